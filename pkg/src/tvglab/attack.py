"""Constructive measurement-noise attacks on deadline-convergent loops.

Each constructor synthesizes an arbitrarily small bounded noise signal that
defeats a specific robustness property of a time-varying-gain loop:

* controller_divergence_noise: piecewise-constant sign-latched noise on the
  first measured channel; every held segment forces the state norm past the
  next target of a growing ladder, so peaks grow without bound as t -> T.
* controller_terminal_error_noise: a smooth tracking noise that makes the
  closed loop follow a planned cascade state exactly, parking the last state
  component at -2*epsilon at the deadline instead of zero.
* differentiator_divergence_noise: continuous piecewise-linear noise whose
  ramp slopes steepen at each switch; the velocity-error channel tracks the
  negated slope, so its peaks grow without bound.
* differentiator_terminal_error_noise: one bounded ramp that shifts the
  velocity error by exactly epsilon, leaving x2(T) = -epsilon from every
  initial condition.

Switch placement for the divergence noises is simulation-in-the-loop: the
sources watch committed integration steps and switch only once the current
segment's guarantee has been observed and the next segment's start-time
gate has passed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (
    CONTROL_LOOP,
    DIFF_ERROR,
    ControllerSpec,
    NoiseSource,
    SystemModel,
)
from .integrate import (
    BLOW_UP,
    EVENT,
    IntegrationOptions,
    Trajectory,
    detect_peaks,
    integrate,
    terminal_state,
)
from .oracle import instability_witness_time

DEFAULT_LADDER = (0.1, 1.0, 10.0)


def default_targets(eta_bar: float, count: int = 7, growth: float = 2.0) -> tuple[float, ...]:
    """Geometric peak-target ladder max(1, eta_bar) * growth**k, k < count."""
    if count < 1:
        raise ValueError("target count must be positive")
    if growth <= 1.0:
        raise ValueError("target growth must exceed 1")
    base = max(1.0, eta_bar)
    return tuple(base * growth**k for k in range(count))


def default_ladder(eta_bar: float) -> tuple[float, ...]:
    """Peak thresholds used by the divergence verdict: {0.1, 1, 10} * max(1, eta_bar)."""
    base = max(1.0, eta_bar)
    return tuple(base * r for r in DEFAULT_LADDER)


@dataclass(frozen=True)
class SwitchingSchedule:
    """Realized switching description of a divergence noise.

    targets is the strictly increasing peak ladder the construction forces;
    delta is the held noise magnitude (control case only); times are the
    realized switch instants, strictly increasing and accumulating toward T.
    """

    targets: tuple[float, ...]
    delta: Optional[float] = None
    times: tuple[float, ...] = ()

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.targets, self.targets[1:])):
            raise ValueError("targets must be strictly increasing")
        if any(v <= 0.0 for v in self.targets):
            raise ValueError("targets must be positive")


def _sign(v: float) -> float:
    return 1.0 if v >= 0.0 else -1.0


class ControllerDivergenceNoise(NoiseSource):
    """Piecewise-constant noise delta * sigma_k * e1 with sign latched from x1.

    The loop's deadline property turns each held segment into a forced
    excursion: the shifted state x + eta follows the noise-free flow toward
    zero at T, so its velocity channel must sweep past delta / (T - t_k).
    Waiting to switch until after the target gate time therefore guarantees
    the next peak, and observing the realized crossing before switching
    keeps every guarantee intact.
    """

    scalar = False

    def __init__(self, eta_bar: float, targets, n: int = 2, delta: Optional[float] = None,
                 T: float = 1.0):
        if eta_bar <= 0.0:
            raise ValueError("eta_bar must be positive")
        delta = 0.5 * eta_bar if delta is None else float(delta)
        if not (0.0 < delta <= eta_bar):
            raise ValueError("delta must lie in (0, eta_bar]")
        self.bound = float(eta_bar)
        self.eta_bar = float(eta_bar)
        self.delta = delta
        self.T = float(T)
        self.targets = tuple(float(v) for v in targets)
        if any(b <= a for a, b in zip(self.targets, self.targets[1:])) or not self.targets:
            raise ValueError("targets must be a nonempty strictly increasing sequence")
        # gate(eps): earliest admissible switch time for the segment forcing eps
        self._gates = tuple(
            max(instability_witness_time(delta, eps + eta_bar, T=T), T - 1.0 / eps)
            for eps in self.targets
        )
        self._n = int(n)
        self._sigma = 1.0
        self._latched0 = False
        self._seg_target: Optional[float] = None
        self._crossed = False
        self._next_idx = 0
        self._times: list[float] = []
        self._vec = np.zeros(self._n)
        self._vec[0] = self.delta

    def value(self, t: float, x) -> np.ndarray:
        return self._vec

    def observe(self, t: float, x) -> bool:
        if not self._latched0:
            # warm-up segment: latch the start sign, not counted as a switch
            self._sigma = _sign(float(x[0]))
            self._vec[0] = self.delta * self._sigma
            self._latched0 = True
            return False
        if self._seg_target is not None and not self._crossed:
            if float(np.linalg.norm(x)) >= self._seg_target:
                self._crossed = True
        if self._next_idx < len(self.targets):
            ready = self._seg_target is None or self._crossed
            if ready and t >= self._gates[self._next_idx]:
                self._sigma = _sign(float(x[0]))
                self._vec[0] = self.delta * self._sigma
                self._seg_target = self.targets[self._next_idx]
                self._crossed = False
                self._next_idx += 1
                self._times.append(float(t))
                return True
        return False

    @property
    def switch_times(self) -> tuple[float, ...]:
        return tuple(self._times)

    def realized_schedule(self) -> SwitchingSchedule:
        return SwitchingSchedule(targets=self.targets, delta=self.delta, times=tuple(self._times))


class DifferentiatorDivergenceNoise(NoiseSource):
    """Continuous piecewise-linear scalar noise with steepening ramp slopes.

    On segment k the noise runs linearly from its current value toward the
    opposite bound, reaching it exactly at T; the slope magnitude is
    (eta_bar + |eta(t_k)|) / (T - t_k).  The measured loop drives
    x2 + slope to zero, so once tracking is observed (relative tolerance
    track_rel) and the prospective next slope clears the next target, the
    source switches and the velocity error is forced to chase ever larger
    slopes.  Switch instants land on committed integration steps.
    """

    scalar = True

    def __init__(self, eta_bar: float, targets, T: float = 1.0, track_rel: float = 1e-3):
        if eta_bar <= 0.0:
            raise ValueError("eta_bar must be positive")
        self.bound = float(eta_bar)
        self.eta_bar = float(eta_bar)
        self.T = float(T)
        self.targets = tuple(float(v) for v in targets)
        if any(b <= a for a, b in zip(self.targets, self.targets[1:])) or not self.targets:
            raise ValueError("targets must be a nonempty strictly increasing sequence")
        self.track_rel = float(track_rel)
        self._t_k = 0.0
        self._eta_k = self.eta_bar  # required start value eta(0) = eta_bar
        self._slope = -(self.eta_bar * _sign(self._eta_k) + self._eta_k) / (self.T - 0.0)
        self._next_idx = 0
        self._times: list[float] = []
        self._started = False

    def _segment_slope(self, value_now: float, t_now: float) -> float:
        return -(self.eta_bar * _sign(value_now) + value_now) / (self.T - t_now)

    def value(self, t: float, x) -> float:
        v = self._eta_k + self._slope * (t - self._t_k)
        # ramps aim exactly at the opposite bound at T; clip round-off spill
        if v > self.eta_bar:
            v = self.eta_bar
        elif v < -self.eta_bar:
            v = -self.eta_bar
        return v

    @property
    def slope(self) -> float:
        return self._slope

    def observe(self, t: float, x) -> bool:
        if not self._started:
            # segment 0 starts at the integration start time
            self._t_k = float(t)
            self._slope = self._segment_slope(self._eta_k, self._t_k)
            self._started = True
            return False
        if self._next_idx >= len(self.targets):
            return False
        eps_next = self.targets[self._next_idx]
        tracked = abs(float(x[1]) + self._slope) <= max(self.track_rel * abs(self._slope), 1e-12)
        val = self.value(t, x)
        prospective = (self.eta_bar + abs(val)) / (self.T - t)
        if tracked and prospective > eps_next and t > self.T - 1.0 / eps_next:
            self._eta_k = val
            self._t_k = float(t)
            self._slope = self._segment_slope(val, t)
            self._next_idx += 1
            self._times.append(float(t))
            return True
        return False

    @property
    def switch_times(self) -> tuple[float, ...]:
        return tuple(self._times)

    def realized_schedule(self) -> SwitchingSchedule:
        return SwitchingSchedule(targets=self.targets, delta=None, times=tuple(self._times))


@dataclass(frozen=True)
class RampParameters:
    """Terminal-error ramp for the differentiator: constant -eta_bar until
    s = T - 2*eta_bar/epsilon, then slope epsilon up to +eta_bar at T."""

    eta_bar: float
    epsilon: float
    T: float
    s: float


class DifferentiatorTerminalNoise(NoiseSource):
    """Scalar ramp noise that forces x2(T) = -epsilon from any start."""

    scalar = True

    def __init__(self, eta_bar: float, epsilon: float, T: float = 1.0):
        if eta_bar <= 0.0 or epsilon <= 0.0:
            raise ValueError("eta_bar and epsilon must be positive")
        s = T - 2.0 * eta_bar / epsilon
        if s < 0.0:
            raise ValueError(
                f"ramp start T - 2*eta_bar/epsilon = {s!r} precedes 0; "
                "raise epsilon or lower eta_bar")
        self.bound = float(eta_bar)
        self.eta_bar = float(eta_bar)
        self.epsilon = float(epsilon)
        self.T = float(T)
        self.s = float(s)

    def value(self, t: float, x) -> float:
        if t < self.s:
            return -self.eta_bar
        return -self.eta_bar + (t - self.s) * self.epsilon

    def next_discontinuity(self, t: float) -> float:
        return self.s if t < self.s else math.inf

    def ramp(self) -> RampParameters:
        return RampParameters(eta_bar=self.eta_bar, epsilon=self.epsilon, T=self.T, s=self.s)


def differentiator_terminal_error_noise(eta_bar: float, epsilon: float, T: float = 1.0
                                        ) -> DifferentiatorTerminalNoise:
    """Bounded ramp noise pinning the terminal velocity error at -epsilon."""
    return DifferentiatorTerminalNoise(eta_bar=eta_bar, epsilon=epsilon, T=T)


def differentiator_divergence_noise(eta_bar: float, targets=None, T: float = 1.0,
                                    track_rel: float = 1e-3) -> DifferentiatorDivergenceNoise:
    """Continuous noise with steepening ramps forcing unbounded velocity peaks."""
    targets = default_targets(eta_bar) if targets is None else targets
    return DifferentiatorDivergenceNoise(eta_bar=eta_bar, targets=targets, T=T, track_rel=track_rel)


def controller_divergence_noise(eta_bar: float, targets=None, n: int = 2,
                                delta: Optional[float] = None, T: float = 1.0
                                ) -> ControllerDivergenceNoise:
    """Sign-latched held noise forcing unbounded state peaks in the loop."""
    targets = default_targets(eta_bar) if targets is None else targets
    return ControllerDivergenceNoise(eta_bar=eta_bar, targets=targets, n=n, delta=delta, T=T)


# ---------------------------------------------------------------------------
# terminal-error tracking attack on the control loop


class _PolyU:
    """Polynomial in u = T - t with integer powers, kept as {power: coeff}."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Optional[dict[int, float]] = None):
        self.coeffs = {int(m): float(c) for m, c in (coeffs or {}).items() if c != 0.0}

    def add_term(self, power: int, coeff: float) -> None:
        self.coeffs[power] = self.coeffs.get(power, 0.0) + coeff

    def value(self, u):
        acc = 0.0 if np.isscalar(u) else np.zeros_like(np.asarray(u, dtype=float))
        for m, c in sorted(self.coeffs.items()):
            acc = acc + c * u**m
        return acc

    def magnitude_bound(self, w: float) -> float:
        """sum |c| w^m; bounds |value(u)| on u in (0, w] when all powers >= 0."""
        if any(m < 0 for m in self.coeffs):
            raise ValueError("magnitude bound requires nonnegative powers")
        return sum(abs(c) * w**m for m, c in sorted(self.coeffs.items()))

    def antiderivative_in_t(self) -> "_PolyU":
        """P with dP/dt = self along u = T - t (valid for powers >= 0)."""
        out = _PolyU()
        for m, c in self.coeffs.items():
            if m < 0:
                raise ValueError("cascade integration requires nonnegative powers")
            out.add_term(m + 1, -c / (m + 1.0))
        return out

    def minus(self, other: "_PolyU") -> "_PolyU":
        out = _PolyU(dict(self.coeffs))
        for m, c in other.coeffs.items():
            out.add_term(m, -c)
        return out


@dataclass(frozen=True)
class CascadePlan:
    """Planned cascade state the tracking noise forces the loop to follow.

    psi holds one polynomial (in u = T - t) per state channel; the last one
    starts at -2*epsilon at t = s and stays within [-3e, -e], so the loop
    state, which equals the plan exactly, ends at distance >= epsilon from
    zero.  eta holds the per-channel noise polynomials xi'(t) + q - psi(t).
    """

    T: float
    s: float
    epsilon: float
    eta_bar: float
    profile: tuple[_PolyU, ...]
    psi: tuple[_PolyU, ...]
    forcing: _PolyU
    eta: tuple[_PolyU, ...]
    psi_init: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.psi)

    def initial_state(self) -> np.ndarray:
        return self.state_at(self.s)

    def state_at(self, t):
        t_arr = np.asarray(t, dtype=float)
        u = self.T - t_arr
        cols = [p.value(u) for p in self.psi]
        out = np.stack([np.broadcast_to(c, t_arr.shape) for c in cols], axis=-1) \
            if t_arr.ndim else np.array([float(c) for c in cols])
        return out

    def noise_at(self, t):
        t_arr = np.asarray(t, dtype=float)
        u = self.T - t_arr
        cols = [p.value(u) for p in self.eta]
        out = np.stack([np.broadcast_to(c, t_arr.shape) for c in cols], axis=-1) \
            if t_arr.ndim else np.array([float(c) for c in cols])
        return out


class ControllerTerminalNoise(NoiseSource):
    """Smooth vector noise realizing a CascadePlan on [s, T)."""

    scalar = False

    def __init__(self, plan: CascadePlan):
        self.plan = plan
        self.bound = plan.eta_bar

    def value(self, t: float, x) -> np.ndarray:
        eta = self.plan.noise_at(t)
        nrm = float(np.linalg.norm(eta))
        if nrm > self.bound * (1.0 + 1e-12) + 1e-300:
            raise AssertionError(
                f"tracking noise exceeded its bound at t={t!r}: {nrm!r} > {self.bound!r}")
        return eta


def _solve_profile(controller: ControllerSpec, epsilon: float) -> tuple[float, ...]:
    """Per-channel profile coefficients c_i (xi_i = c_i * u) cancelling every
    singular term of the controller along the planned cascade."""
    n = controller.n
    neg_powers = sorted({
        1 - p for g in controller.gains[:-1] for c, p in g.terms if c != 0.0 and 1 - p < 0
    } | {
        -p for c, p in controller.gains[-1].terms if c != 0.0 and p > 0
    })
    if not neg_powers:
        return tuple(0.0 for _ in range(n - 1))
    rows = {m: i for i, m in enumerate(neg_powers)}
    A = np.zeros((len(neg_powers), n - 1))
    b = np.zeros(len(neg_powers))
    for i, g in enumerate(controller.gains[:-1]):
        for c, p in g.terms:
            m = 1 - p
            if m in rows:
                A[rows[m], i] += c
    for c, p in controller.gains[-1].terms:
        m = -p
        if m in rows:
            b[rows[m]] += c * (-2.0 * epsilon)
    sol, *_ = np.linalg.lstsq(A, -b, rcond=None)
    residual = A @ sol + b
    scale = max(1.0, float(np.max(np.abs(b))), float(np.max(np.abs(A @ sol))) if sol.size else 1.0)
    if float(np.max(np.abs(residual), initial=0.0)) > 1e-9 * scale:
        raise ValueError(
            "controller is unbounded along every linear tracking profile; "
            "no terminal-error plan exists for this gain table")
    return tuple(float(v) for v in sol)


def _build_forcing(controller: ControllerSpec, profile: tuple[float, ...], epsilon: float) -> _PolyU:
    """Controller output along the planned cascade, as a polynomial in u.

    Raises when singular terms fail to cancel, since the construction only
    exists for controllers bounded along the profile.
    """
    laurent = _PolyU()
    mags: dict[int, float] = {}
    for i, g in enumerate(controller.gains[:-1]):
        ci = profile[i]
        for c, p in g.terms:
            laurent.add_term(1 - p, c * ci)
            mags[1 - p] = mags.get(1 - p, 0.0) + abs(c * ci)
    for c, p in controller.gains[-1].terms:
        laurent.add_term(-p, c * (-2.0 * epsilon))
        mags[-p] = mags.get(-p, 0.0) + abs(c * 2.0 * epsilon)
    out = _PolyU()
    for m, c in laurent.coeffs.items():
        if m < 0:
            if abs(c) > 1e-9 * max(1.0, mags.get(m, 0.0)):
                raise ValueError(
                    "controller output is unbounded along the tracking profile "
                    f"(uncancelled pole of order {-m})")
            continue
        out.add_term(m, c)
    return out


def terminal_plan_window(n: int, eta_bar: float, epsilon: float, T: float = 1.0
                         ) -> tuple[float, float]:
    """Open interval of admissible plan start times (s_min, T).

    Any start s inside it keeps the planned state and noise within budget
    for an n-channel loop with noise bound eta_bar and target epsilon:
    s_min = max(T - eta_bar / (sqrt(n) * 12 * epsilon), T - 1/2).
    """
    if eta_bar <= 0.0 or epsilon <= 0.0:
        raise ValueError("eta_bar and epsilon must be positive")
    eta_inf = eta_bar / math.sqrt(n)
    return (max(T - eta_inf / (12.0 * epsilon), T - 0.5), T)


def controller_terminal_error_noise(controller: ControllerSpec, eta_bar: float, epsilon: float,
                                    profile_coeffs=None, psi_init=None,
                                    s: Optional[float] = None
                                    ) -> tuple[ControllerTerminalNoise, CascadePlan]:
    """Tracking noise and plan that park the loop's last state at -2*epsilon.

    The plan starts at s close enough to T that the planned state and the
    noise stay within their budgets: per-channel noise within
    eta_bar / sqrt(n), hence ||eta|| <= eta_bar.  When profile_coeffs is
    omitted the per-channel profile is solved so the controller stays
    bounded along the plan (for the reference controller this gives
    xi(t) = (4/3) * epsilon * (1 - t)).  psi_init sets the planned start
    values of channels 1..n-1 (default zero, each bounded by
    eta_bar / (4 sqrt(n))).
    """
    if eta_bar <= 0.0 or epsilon <= 0.0:
        raise ValueError("eta_bar and epsilon must be positive")
    n = controller.n
    T = controller.T
    eta_inf = eta_bar / math.sqrt(n)
    if profile_coeffs is None:
        profile_coeffs = _solve_profile(controller, epsilon)
    profile_coeffs = tuple(float(c) for c in profile_coeffs)
    if len(profile_coeffs) != n - 1:
        raise ValueError(f"profile needs {n - 1} coefficients, got {len(profile_coeffs)}")
    if psi_init is None:
        psi_init = tuple(0.0 for _ in range(n - 1))
    psi_init = tuple(float(v) for v in psi_init)
    if len(psi_init) != n - 1:
        raise ValueError(f"psi_init needs {n - 1} values, got {len(psi_init)}")
    cap = eta_inf / 4.0
    if any(abs(v) > cap * (1.0 + 1e-12) for v in psi_init):
        raise ValueError(f"planned start values must satisfy |psi_i(s)| <= {cap!r}")

    forcing = _build_forcing(controller, profile_coeffs, epsilon)

    def build(w: float) -> CascadePlan:
        s_val = T - w
        u_s = w
        psi: list[Optional[_PolyU]] = [None] * n
        # last channel: psi_n(s) = -2 eps, then integrate the forcing down
        P = forcing.antiderivative_in_t()
        poly_n = _PolyU(dict(P.coeffs))
        poly_n.add_term(0, -2.0 * epsilon - P.value(u_s))
        psi[n - 1] = poly_n
        for i in range(n - 2, -1, -1):
            P = psi[i + 1].antiderivative_in_t()
            poly_i = _PolyU(dict(P.coeffs))
            poly_i.add_term(0, psi_init[i] - P.value(u_s))
            psi[i] = poly_i
        profile_polys = tuple(_PolyU({1: c}) for c in profile_coeffs)
        eta_polys = []
        for i in range(n):
            target = profile_polys[i] if i < n - 1 else _PolyU({0: -2.0 * epsilon})
            eta_polys.append(target.minus(psi[i]))
        return CascadePlan(T=T, s=s_val, epsilon=epsilon, eta_bar=eta_bar,
                           profile=profile_polys, psi=tuple(psi), forcing=forcing,
                           eta=tuple(eta_polys), psi_init=psi_init)

    def feasible(plan: CascadePlan, w: float) -> bool:
        if w >= min(eta_inf / (12.0 * epsilon), 0.5):
            return False
        if any(abs(c) * w > eta_inf / 2.0 for c in profile_coeffs):
            return False
        if w * forcing.magnitude_bound(w) > min(2.0 * epsilon, eta_inf):
            return False
        # last channel must stay in [-3e, -e]; its deviation from -2e is the
        # negated last noise channel, so bound that polynomial directly
        if plan.eta[n - 1].magnitude_bound(w) > epsilon:
            return False
        for i in range(n - 1):
            if plan.psi[i].magnitude_bound(w) > eta_inf / 2.0:
                return False
        for p in plan.eta:
            if p.magnitude_bound(w) > eta_inf:
                return False
        return True

    if s is not None:
        if not (0.0 <= s < T):
            raise ValueError("s must lie in [0, T)")
        plan = build(T - s)
        if not feasible(plan, T - s):
            raise ValueError(
                f"requested start s={s!r} violates the plan's noise or window budget; "
                "move s closer to T")
        return ControllerTerminalNoise(plan), plan

    caps = [eta_inf / (12.0 * epsilon), 0.5]
    caps += [eta_inf / (2.0 * abs(c)) for c in profile_coeffs if c != 0.0]
    w = 0.9 * min(caps)
    for _ in range(200):
        plan = build(w)
        if feasible(plan, w):
            return ControllerTerminalNoise(plan), plan
        w *= 0.5
    raise ValueError("no feasible plan window found; the controller grows too "
                     "fast along every admissible profile")


class PreludeTerminalNoise(NoiseSource):
    """Full-signal variant: constant steering noise on [0, s0), zero on
    [s0, s), then the tracking noise of a CascadePlan on [s, T).  Exactly
    two discontinuities."""

    scalar = False

    def __init__(self, const_vec: np.ndarray, s0: float, plan: CascadePlan):
        self.plan = plan
        self.bound = plan.eta_bar
        self.s0 = float(s0)
        self.s = float(plan.s)
        self._const = np.asarray(const_vec, dtype=float)
        self._zero = np.zeros_like(self._const)
        self._tracker = ControllerTerminalNoise(plan)

    def value(self, t: float, x) -> np.ndarray:
        if t < self.s0:
            return self._const
        if t < self.s:
            return self._zero
        return self._tracker.value(t, x)

    def next_discontinuity(self, t: float) -> float:
        if t < self.s0:
            return self.s0
        if t < self.s:
            return self.s
        return math.inf

    @property
    def switch_times(self) -> tuple[float, ...]:
        return (self.s0, self.s)


@dataclass(frozen=True)
class AttackOutcome:
    """Result of one synthesized-noise run against a declared target."""

    kind: str
    noise_bound: float
    verdict: bool
    trajectory: Trajectory
    schedule: Optional[SwitchingSchedule] = None
    ramp: Optional[RampParameters] = None
    plan: Optional[CascadePlan] = None
    peaks: Optional[tuple[tuple[float, Optional[float]], ...]] = None
    terminal: Optional[np.ndarray] = None
    tracking_error: Optional[float] = None
    notes: str = ""


def _ladder_verdict(peaks) -> bool:
    times = [t for _, t in peaks]
    if any(t is None for t in times):
        return False
    return all(b > a for a, b in zip(times, times[1:]))


def run_divergence_attack(model: SystemModel, eta_bar: float, thresholds=None,
                          targets=None, delta: Optional[float] = None, x0=None,
                          t_end: Optional[float] = None,
                          opts: Optional[IntegrationOptions] = None) -> AttackOutcome:
    """Drive the model with the matching divergence noise and check the ladder.

    The verdict passes when every threshold is crossed at strictly
    increasing times.  A blow_up termination counts as success for any
    thresholds not yet sampled past (the norm left the ladder's range).
    """
    opts = opts or IntegrationOptions()
    T = model.horizon.T
    rho = opts.rho_min if opts.rho_min is not None else model.horizon.rho_min
    t_end = T - rho if t_end is None else t_end
    thresholds = default_ladder(eta_bar) if thresholds is None else tuple(thresholds)
    if model.variant == CONTROL_LOOP:
        noise = controller_divergence_noise(eta_bar, targets=targets, n=model.n,
                                            delta=delta, T=T)
        kind = "controller-divergence"
    else:
        noise = differentiator_divergence_noise(eta_bar, targets=targets, T=T)
        kind = "diff-divergence"
    x0 = np.zeros(model.n) if x0 is None else np.asarray(x0, dtype=float)
    traj = integrate(model, noise, x0, 0.0, t_end, opts)
    peaks = tuple(detect_peaks(traj, thresholds))
    verdict = _ladder_verdict(peaks)
    notes = ""
    if traj.termination.kind == BLOW_UP:
        notes = f"norm escape at t={traj.termination.t!r}"
        crossed = [(v, t) for v, t in peaks if t is not None]
        verdict = _ladder_verdict(crossed) and len(crossed) > 0
    armed = len(noise.switch_times)
    if armed < len(noise.targets) and traj.termination.kind != BLOW_UP:
        notes = (notes + "; " if notes else "") + (
            f"partial schedule: {armed} of {len(noise.targets)} targets armed "
            "before the integration floor")
    return AttackOutcome(kind=kind, noise_bound=eta_bar, verdict=verdict, trajectory=traj,
                         schedule=noise.realized_schedule(), peaks=peaks, notes=notes)


def run_controller_terminal_attack(model: SystemModel, eta_bar: float, epsilon: float,
                                   rho: float = 1e-6, profile_coeffs=None, psi_init=None,
                                   s: Optional[float] = None,
                                   opts: Optional[IntegrationOptions] = None) -> AttackOutcome:
    """Prepared-state tracking attack: start on the plan and ride it to T.

    Integrates from x(s) equal to the planned state under the tracking
    noise; reports the sup-norm tracking error and the terminal state at
    T - rho.  Verdict: terminal norm >= epsilon.
    """
    if model.variant != CONTROL_LOOP:
        raise ValueError("terminal tracking attack applies to the control loop")
    noise, plan = controller_terminal_error_noise(model.controller, eta_bar, epsilon,
                                                  profile_coeffs=profile_coeffs,
                                                  psi_init=psi_init, s=s)
    opts = opts or IntegrationOptions()
    T = model.horizon.T
    traj = integrate(model, noise, plan.initial_state(), plan.s, T - rho, opts)
    predicted = plan.state_at(traj.ts)
    tracking = float(np.max(np.abs(traj.xs - predicted)))
    terminal = terminal_state(traj, rho)
    verdict = bool(np.linalg.norm(terminal) >= epsilon) and traj.completed
    return AttackOutcome(kind="controller-terminal", noise_bound=eta_bar, verdict=verdict,
                         trajectory=traj, plan=plan, terminal=terminal,
                         tracking_error=tracking)


def run_controller_terminal_attack_with_prelude(model: SystemModel, eta_bar: float,
                                                epsilon: float, x0, rho: float = 1e-6,
                                                opts: Optional[IntegrationOptions] = None
                                                ) -> AttackOutcome:
    """Full-signal tracking attack from an arbitrary start state (best effort).

    Phase one holds a small constant noise so the deadline property parks
    the state near a known point; phase two removes the noise and waits for
    the transient to swing the last channel through -2*epsilon; the tracking
    noise then takes over.  The search for the two switch instants runs the
    same integrator; it retries with a narrower window when the swing misses
    the budget checks.
    """
    if model.variant != CONTROL_LOOP:
        raise ValueError("terminal tracking attack applies to the control loop")
    n = model.n
    T = model.horizon.T
    eta_inf = eta_bar / math.sqrt(n)
    opts = opts or IntegrationOptions()
    x0 = np.asarray(x0, dtype=float)

    const_vec = np.zeros(n)
    const_vec[n - 2] = -eta_bar / 8.0
    # start window: wide enough for a swing past 2*epsilon, inside the budget
    w0 = 0.9 * min((3.0 / 32.0) * eta_bar / epsilon, eta_inf / (12.0 * epsilon), 0.25 * T)
    last_err = None
    for _ in range(12):
        s0 = T - w0
        phase_a = integrate(model, _ConstantVectorNoise(const_vec, eta_bar), x0, 0.0, s0, opts)
        xa = phase_a.xs[-1]
        hit = {"t": None, "x": None}

        def swing(t, x):
            return x[n - 1] <= -2.0 * epsilon

        phase_b = integrate(model, None, xa, s0, T - max(rho, 10.0 * opts.abs_tol), opts,
                            stop_condition=swing)
        if phase_b.termination.kind == EVENT:
            s_ev = phase_b.termination.t
            x_ev = phase_b.xs[-1]
            cap = eta_inf / 4.0
            window_ok = s_ev > max(T - eta_inf / (12.0 * epsilon), T - 0.5)
            heads_ok = all(abs(float(v)) <= cap for v in x_ev[: n - 1])
            if window_ok and heads_ok:
                try:
                    _, plan = controller_terminal_error_noise(
                        model.controller, eta_bar, epsilon,
                        psi_init=tuple(float(v) for v in x_ev[: n - 1]), s=s_ev)
                except ValueError as exc:
                    last_err = str(exc)
                    w0 *= 0.5
                    continue
                noise = PreludeTerminalNoise(const_vec, s0, plan)
                traj = integrate(model, noise, x0, 0.0, T - rho, opts)
                mask = traj.ts >= plan.s
                predicted = plan.state_at(traj.ts[mask])
                tracking = float(np.max(np.abs(traj.xs[mask] - predicted)))
                terminal = terminal_state(traj, rho)
                verdict = bool(np.linalg.norm(terminal) >= epsilon) and traj.completed
                return AttackOutcome(kind="controller-terminal-prelude", noise_bound=eta_bar,
                                     verdict=verdict, trajectory=traj, plan=plan,
                                     terminal=terminal, tracking_error=tracking,
                                     notes=f"steering switch at s0={s0!r}, plan start {plan.s!r}")
        last_err = f"no admissible swing found with window {w0!r}"
        w0 *= 0.5
    raise ValueError(f"prelude search failed: {last_err}")


class _ConstantVectorNoise(NoiseSource):
    scalar = False

    def __init__(self, vec: np.ndarray, bound: float):
        self._vec = np.asarray(vec, dtype=float)
        self.bound = float(bound)

    def value(self, t: float, x) -> np.ndarray:
        return self._vec


def run_differentiator_terminal_attack(model: SystemModel, eta_bar: float, epsilon: float,
                                       x0, rho: float = 1e-6, tol: float = 1e-3,
                                       opts: Optional[IntegrationOptions] = None) -> AttackOutcome:
    """Ramp attack on the differentiator: verdict |x2(T - rho) + epsilon| <= tol*epsilon."""
    if model.variant != DIFF_ERROR:
        raise ValueError("ramp terminal attack applies to the differentiator error model")
    noise = differentiator_terminal_error_noise(eta_bar, epsilon, T=model.horizon.T)
    opts = opts or IntegrationOptions()
    traj = integrate(model, noise, np.asarray(x0, dtype=float), 0.0, model.horizon.T - rho, opts)
    terminal = terminal_state(traj, rho)
    verdict = bool(abs(float(terminal[1]) + epsilon) <= tol * epsilon) and traj.completed
    return AttackOutcome(kind="diff-terminal", noise_bound=eta_bar, verdict=verdict,
                         trajectory=traj, ramp=noise.ramp(), terminal=terminal)
