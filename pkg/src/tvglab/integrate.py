"""Deadline-aware adaptive integration.

The stepper is an embedded Dormand-Prince 5(4) pair with two extra rules
that the singular gains demand:

* the step is clamped to a fixed fraction of the remaining distance to the
  deadline, so the right-hand side is never evaluated at or past T, and
* noise and disturbance switching instants are hard step boundaries; the
  integrator lands on them exactly instead of stepping across.

State, noise-as-queried, and algorithm-output records are kept at every
committed step (plus an optional requested output grid), and cubic Hermite
interpolation over committed steps provides dense output in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import CONTROL_LOOP, NoiseSource, NumericalFailure, SystemModel

# Dormand-Prince 5(4) tableau; the 7th stage is the FSAL derivative.
_DP_C = (0.2, 0.3, 0.8, 8.0 / 9.0, 1.0)
_DP_A = (
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
)
_DP_B = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0)
_DP_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
         -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

REACHED_END = "reached_t_end"
BLOW_UP = "blow_up"
STEP_UNDERFLOW = "step_underflow"
EVENT = "event"


@dataclass(frozen=True)
class OutputGrid:
    """Requested dense-output grid: "uniform" in t or "geometric" in (T - t)."""

    kind: str
    count: int

    def __post_init__(self):
        if self.kind not in ("uniform", "geometric"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.count < 2:
            raise ValueError("grid count must be at least 2")

    def points(self, t0: float, t_end: float, T: float) -> np.ndarray:
        if self.kind == "uniform":
            return np.linspace(t0, t_end, self.count)
        u = np.geomspace(T - t0, T - t_end, self.count)
        return T - u


@dataclass(frozen=True)
class IntegrationOptions:
    """Tolerances and safety rails for one integration run.

    rho_min overrides the model horizon's floor when set.  max_step_fraction
    is the deadline clamp kappa: step <= kappa * (T - t).
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_norm: float = 1e9
    max_step_fraction: float = 0.1
    initial_step: Optional[float] = None
    min_step: Optional[float] = None
    rho_min: Optional[float] = None
    output_grid: Optional[OutputGrid] = None
    check_noise_bound: bool = True

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if not (0.0 < self.max_step_fraction < 1.0):
            raise ValueError("max_step_fraction must lie in (0, 1)")
        if self.max_norm <= 0.0:
            raise ValueError("max_norm must be positive")


@dataclass(frozen=True)
class BlowUpEvent:
    """Norm-escape record: ||x(t)|| reached max_norm at t, led by one channel."""

    t: float
    norm: float
    channel: int


@dataclass(frozen=True)
class Termination:
    kind: str
    t: float
    blow_up: Optional[BlowUpEvent] = None


@dataclass
class Trajectory:
    """Committed solution record of one integration run.

    ts/xs/etas/gains hold the sample table (strictly increasing times):
    every committed step plus any requested grid points, with the noise as
    it was queried at each sample and the scalar algorithm output.
    state_at interpolates between committed steps (cubic Hermite).
    """

    ts: np.ndarray
    xs: np.ndarray
    etas: np.ndarray
    gains: np.ndarray
    knot_ts: np.ndarray
    knot_xs: np.ndarray
    knot_fs: np.ndarray
    t0: float
    t_last: float
    termination: Termination
    switch_times: tuple[float, ...]
    T: float
    rho_min: float
    variant: str
    n: int

    def state_at(self, t):
        """Dense-output state at time(s) t within [t0, t_last]."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < self.t0 - 1e-15) or np.any(t_arr > self.t_last + 1e-15):
            raise ValueError("dense output requested outside the integrated span")
        idx = np.clip(np.searchsorted(self.knot_ts, t_arr, side="right") - 1, 0, len(self.knot_ts) - 2)
        tl = self.knot_ts[idx]
        h = self.knot_ts[idx + 1] - tl
        theta = np.clip((t_arr - tl) / h, 0.0, 1.0)[:, None]
        x0 = self.knot_xs[idx]
        x1 = self.knot_xs[idx + 1]
        f0 = self.knot_fs[idx]
        f1 = self.knot_fs[idx + 1]
        hh = h[:, None]
        t2 = theta * theta
        t3 = t2 * theta
        out = (x0 * (2.0 * t3 - 3.0 * t2 + 1.0)
               + hh * f0 * (t3 - 2.0 * t2 + theta)
               + x1 * (-2.0 * t3 + 3.0 * t2)
               + hh * f1 * (t3 - t2))
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out

    @property
    def completed(self) -> bool:
        return self.termination.kind == REACHED_END


def _plain_float(value) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise NumericalFailure("non-finite value in integration record")
    return v


def integrate(model: SystemModel, noise: Optional[NoiseSource], x0, t0: float, t_end: float,
              opts: Optional[IntegrationOptions] = None,
              stop_condition: Optional[Callable[[float, np.ndarray], bool]] = None) -> Trajectory:
    """Integrate the model from (t0, x0) to t_end < T under the given noise.

    The noise source sees every committed step through observe(t, x) and its
    announced discontinuities become exact step boundaries.  Returns a
    Trajectory whose termination reports normal completion, norm escape
    (blow_up), error-control failure (step_underflow), or a stop-condition
    event located by step-local bisection.
    """
    opts = opts or IntegrationOptions()
    T = model.horizon.T
    rho_min = opts.rho_min if opts.rho_min is not None else model.horizon.rho_min
    if not (0.0 < rho_min < T):
        raise ValueError("rho_min must lie in (0, T)")
    min_step = opts.min_step if opts.min_step is not None else 1e-13 * T
    if not (0.0 < min_step <= rho_min):
        raise ValueError("min_step must satisfy 0 < min_step <= rho_min")
    if not (0.0 <= t0 < t_end):
        raise ValueError(f"need 0 <= t0 < t_end, got t0={t0!r}, t_end={t_end!r}")
    if t_end > T - rho_min + 1e-18 * T:
        raise ValueError(f"t_end={t_end!r} exceeds T - rho_min = {T - rho_min!r}")

    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.n,):
        raise ValueError(f"x0 must have shape ({model.n},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    if noise is None:
        noise = model.zero_noise()

    is_control = model.variant == CONTROL_LOOP
    bound_slack = noise.bound * (1.0 + 1e-9) + 1e-300

    def eta_at(t, state):
        e = noise.value(t, state)
        if is_control:
            return np.asarray(e, dtype=float)
        return float(e)

    def eta_norm(e):
        return float(np.linalg.norm(e)) if is_control else abs(e)

    def rhs(t, state, e):
        return model.rhs(t, state, e)

    grid = None
    if opts.output_grid is not None:
        grid = opts.output_grid.points(t0, t_end, T)

    sample_ts: list[float] = []
    sample_xs: list[np.ndarray] = []
    sample_etas: list = []
    sample_gains: list[float] = []
    knot_ts: list[float] = []
    knot_xs: list[np.ndarray] = []
    knot_fs: list[np.ndarray] = []
    switch_times: list[float] = []

    def record_sample(t, state, e):
        if opts.check_noise_bound and eta_norm(e) > bound_slack:
            raise NumericalFailure(
                f"noise bound violated at t={t!r}: |eta|={eta_norm(e)!r} > {noise.bound!r}")
        sample_ts.append(t)
        sample_xs.append(state.copy())
        sample_etas.append(np.array(e, dtype=float) if is_control else float(e))
        sample_gains.append(_plain_float(model.gain_output(t, state, e)))

    def hermite(tl, xl, fl, tr, xr, fr, tq):
        h = tr - tl
        th = (tq - tl) / h
        t2 = th * th
        t3 = t2 * th
        return (xl * (2.0 * t3 - 3.0 * t2 + 1.0) + h * fl * (t3 - 2.0 * t2 + th)
                + xr * (-2.0 * t3 + 3.0 * t2) + h * fr * (t3 - t2))

    # initial commitment: let the source latch its first segment, then record
    noise.observe(t0, x)
    eta0 = eta_at(t0, x)
    f0 = rhs(t0, x, eta0)
    record_sample(t0, x, eta0)
    knot_ts.append(t0)
    knot_xs.append(x.copy())
    knot_fs.append(np.asarray(f0, dtype=float))

    grid_idx = 0
    if grid is not None:
        while grid_idx < len(grid) and grid[grid_idx] <= t0:
            grid_idx += 1

    t = t0
    f_start = np.asarray(f0, dtype=float)
    kappa = opts.max_step_fraction
    h_try = opts.initial_step if opts.initial_step is not None else min(
        1e-3 * (t_end - t0), kappa * (T - t0))
    h_try = max(h_try, min_step)
    termination = None
    n_stages = len(x)

    while termination is None and t < t_end:
        t_disc = noise.next_discontinuity(t)
        d_disc = model.disturbance.next_discontinuity(t)
        barrier = min(t_end, t_disc, d_disc)
        h_cap = kappa * (T - t)
        h = min(h_try, h_cap, barrier - t)
        if barrier - t <= min(h_try, h_cap):
            h = barrier - t  # land exactly on the boundary
        at_barrier = (t + h) >= barrier

        # one trial Dormand-Prince step
        rejected = False
        try:
            k = np.empty((7, n_stages))
            k[0] = f_start
            for i, (c, arow) in enumerate(zip(_DP_C, _DP_A)):
                ts_i = t + c * h
                xs_i = x + h * np.dot(arow, k[: len(arow)])
                k[i + 1] = rhs(ts_i, xs_i, eta_at(ts_i, xs_i))
            x_new = x + h * np.dot(_DP_B, k[:6])
            t_new = barrier if at_barrier else t + h
            k[6] = rhs(t_new, x_new, eta_at(t_new, x_new))
            if not np.all(np.isfinite(x_new)) or not np.all(np.isfinite(k)):
                rejected = True
                err = math.inf
            else:
                err_vec = h * np.dot(_DP_E, k)
                scale = opts.abs_tol + opts.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
                err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        except NumericalFailure:
            rejected = True
            err = math.inf

        if rejected or err > 1.0:
            shrink = 0.5 if not math.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            h_try = h * shrink
            if h_try < min_step:
                termination = Termination(kind=STEP_UNDERFLOW, t=t)
            continue

        # committed: emit any grid samples interior to the step
        f_new = k[6]
        stop_hit = stop_condition is not None and stop_condition(t_new, x_new)
        if stop_hit:
            # bisect to the earliest time the condition holds on this step
            lo, hi = t, t_new
            for _ in range(200):
                if hi - lo <= 1e-12:
                    break
                mid = 0.5 * (lo + hi)
                xm = hermite(t, x, f_start, t_new, x_new, f_new, mid)
                if stop_condition(mid, xm):
                    hi = mid
                else:
                    lo = mid
            t_ev = hi
            x_ev = hermite(t, x, f_start, t_new, x_new, f_new, t_ev)
            if grid is not None:
                while grid_idx < len(grid) and grid[grid_idx] < t_ev:
                    tq = grid[grid_idx]
                    if tq > t:
                        xq = hermite(t, x, f_start, t_new, x_new, f_new, tq)
                        record_sample(tq, xq, eta_at(tq, xq))
                    grid_idx += 1
            eta_ev = eta_at(t_ev, x_ev)
            knot_ts.append(t_ev)
            knot_xs.append(np.asarray(x_ev, dtype=float))
            knot_fs.append(np.asarray(rhs(t_ev, x_ev, eta_ev), dtype=float))
            record_sample(t_ev, np.asarray(x_ev, dtype=float), eta_ev)
            termination = Termination(kind=EVENT, t=t_ev)
            t = t_ev
            break

        if grid is not None:
            while grid_idx < len(grid) and grid[grid_idx] < t_new:
                tq = grid[grid_idx]
                if tq > t:
                    xq = hermite(t, x, f_start, t_new, x_new, f_new, tq)
                    record_sample(tq, xq, eta_at(tq, xq))
                grid_idx += 1

        knot_ts.append(t_new)
        knot_xs.append(x_new.copy())
        knot_fs.append(np.asarray(f_new, dtype=float))

        switched = noise.observe(t_new, x_new)
        if switched:
            switch_times.append(t_new)
            f_new = rhs(t_new, x_new, eta_at(t_new, x_new))  # right-limit derivative
            knot_fs[-1] = np.asarray(f_new, dtype=float)
        eta_right = eta_at(t_new, x_new)
        record_sample(t_new, x_new, eta_right)

        norm_new = float(np.linalg.norm(x_new))
        if norm_new >= opts.max_norm:
            channel = int(np.argmax(np.abs(x_new)))
            termination = Termination(
                kind=BLOW_UP, t=t_new,
                blow_up=BlowUpEvent(t=t_new, norm=norm_new, channel=channel))

        t = t_new
        x = x_new
        f_start = np.asarray(f_new, dtype=float)
        grow = 10.0 if err == 0.0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
        h_try = h * grow

    if termination is None:
        termination = Termination(kind=REACHED_END, t=t)

    etas_arr = np.array(sample_etas) if is_control else np.array(sample_etas, dtype=float).reshape(-1, 1)
    return Trajectory(
        ts=np.array(sample_ts),
        xs=np.array(sample_xs),
        etas=etas_arr,
        gains=np.array(sample_gains),
        knot_ts=np.array(knot_ts),
        knot_xs=np.array(knot_xs),
        knot_fs=np.array(knot_fs),
        t0=t0,
        t_last=t,
        termination=termination,
        switch_times=tuple(switch_times),
        T=T,
        rho_min=rho_min,
        variant=model.variant,
        n=model.n,
    )


def terminal_state(traj: Trajectory, rho: float) -> np.ndarray:
    """State at T - rho by dense interpolation of the committed record."""
    if rho < traj.rho_min:
        raise ValueError(f"rho={rho!r} is below the integration floor rho_min={traj.rho_min!r}")
    t_query = traj.T - rho
    if t_query > traj.t_last + 1e-15:
        raise ValueError(
            f"trajectory ends at t={traj.t_last!r} ({traj.termination.kind}), "
            f"cannot evaluate at T - rho = {t_query!r}")
    if t_query < traj.t0:
        raise ValueError(f"T - rho = {t_query!r} precedes the start time {traj.t0!r}")
    return traj.state_at(t_query)


def detect_peaks(traj: Trajectory, thresholds) -> list[tuple[float, Optional[float]]]:
    """First sample time at which ||x|| reaches each threshold.

    Thresholds must be strictly increasing; a threshold never reached maps
    to None.  Crossing times are scanned over the recorded samples, so they
    inherit the sample resolution.
    """
    thr = [float(v) for v in thresholds]
    if any(b <= a for a, b in zip(thr, thr[1:])):
        raise ValueError("thresholds must be strictly increasing")
    if any(v <= 0.0 for v in thr):
        raise ValueError("thresholds must be positive")
    norms = np.linalg.norm(traj.xs, axis=1)
    out: list[tuple[float, Optional[float]]] = []
    for v in thr:
        hits = np.nonzero(norms >= v)[0]
        out.append((v, float(traj.ts[hits[0]]) if hits.size else None))
    return out
