"""System definitions for finite-horizon loops driven by time-varying gains.

Two closed-loop structures live on a horizon [0, T): an integrator chain
under linear state feedback whose gains grow without bound as t -> T, and
the estimation-error dynamics of a differentiator whose output-injection
gains do the same.  This module holds the gain representation, the system
specifications, the signal contracts (measurement noise, matched
disturbance), and the right-hand-side evaluators shared by the integrator
and the analysis routines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

CONTROL_LOOP = "control_loop"
DIFF_ERROR = "diff_error"


class NumericalFailure(RuntimeError):
    """A right-hand-side evaluation produced a non-finite value."""


@dataclass(frozen=True)
class Horizon:
    """Deadline instant T > 0 plus the closest approach allowed during integration.

    rho_min is the minimum distance to T at which state trajectories may be
    evaluated; integration never steps past T - rho_min.  Defaults to 1e-9 * T.
    """

    T: float
    rho_min: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise ValueError(f"horizon T must be a positive finite number, got {self.T!r}")
        if self.rho_min == 0.0:
            object.__setattr__(self, "rho_min", 1e-9 * self.T)
        if not (0.0 < self.rho_min < self.T):
            raise ValueError(f"rho_min must lie in (0, T), got {self.rho_min!r}")


@dataclass(frozen=True)
class RationalGain:
    """One gain channel of the form sum_j c_j / (T - t)**p_j.

    Pole orders p_j are nonnegative integers; a constant term uses p = 0.
    The empty term tuple is the zero gain.
    """

    terms: tuple[tuple[float, int], ...] = ()

    def __post_init__(self):
        for c, p in self.terms:
            if not (isinstance(p, int) and p >= 0):
                raise ValueError(f"pole order must be a nonnegative integer, got {p!r}")
            if not math.isfinite(c):
                raise ValueError(f"gain coefficient must be finite, got {c!r}")

    def value_at(self, u: float) -> float:
        """Evaluate the gain at distance u = T - t from the deadline (u > 0)."""
        acc = 0.0
        for c, p in self.terms:
            acc += c / u**p
        return acc

    def magnitude_at(self, u: float) -> float:
        """Sum of term magnitudes at u; equals |value_at(u)| when all
        coefficients share one sign (true for every built-in gain)."""
        acc = 0.0
        for c, p in self.terms:
            acc += abs(c) / u**p
        return acc

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c, _ in self.terms)

    @property
    def max_pole_order(self) -> int:
        return max((p for c, p in self.terms if c != 0.0), default=0)


def _as_gain(g) -> RationalGain:
    if isinstance(g, RationalGain):
        return g
    return RationalGain(tuple((float(c), int(p)) for c, p in g))


REFERENCE = "reference"
RATIONAL_TVG = "rational_tvg"
PT_DIFF2 = "pt_diff2"


@dataclass(frozen=True)
class ControllerSpec:
    """Linear state feedback v(t, x) = sum_i g_i(t) * x_i on [0, T)."""

    kind: str
    T: float
    gains: tuple[RationalGain, ...]

    def __post_init__(self):
        if self.kind not in (REFERENCE, RATIONAL_TVG):
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if len(self.gains) < 2:
            raise ValueError("controller needs at least two state channels")
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise ValueError("controller horizon T must be positive and finite")

    @staticmethod
    def reference() -> "ControllerSpec":
        """Bundled second-order loop on T = 1 with gains -6/(1-t)^2 and -4/(1-t).

        Every closed-loop solution is a cubic polynomial in (1 - t) and reaches
        zero exactly at t = 1 from any start time and state, which makes this
        loop the solver oracle (see tvglab.oracle.reference_solution).
        """
        return ControllerSpec(
            kind=REFERENCE,
            T=1.0,
            gains=(RationalGain(((-6.0, 2),)), RationalGain(((-4.0, 1),))),
        )

    @staticmethod
    def rational(gains: Sequence, T: float = 1.0) -> "ControllerSpec":
        """Controller from explicit per-channel (coefficient, pole_order) tables."""
        return ControllerSpec(kind=RATIONAL_TVG, T=float(T), gains=tuple(_as_gain(g) for g in gains))

    @staticmethod
    def zero(n: int = 2, T: float = 1.0) -> "ControllerSpec":
        """Open-loop chain: v identically zero (negative-control fixture)."""
        return ControllerSpec.rational([() for _ in range(n)], T=T)

    @property
    def n(self) -> int:
        return len(self.gains)

    def evaluate(self, t: float, x) -> float:
        """Controller output at time t for measured state x; rejects t >= T."""
        u = self.T - t
        if u <= 0.0:
            raise ValueError(f"controller evaluated at t={t!r} >= deadline T={self.T!r}")
        acc = 0.0
        for g, xi in zip(self.gains, x):
            acc += g.value_at(u) * xi
        return acc


@dataclass(frozen=True)
class InjectionSpec:
    """Output injection: channel i contributes phi_i(t, y) = g_i(t) * y,
    where y is the measured first error component."""

    kind: str
    T: float
    gains: tuple[RationalGain, ...]
    ell: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in (PT_DIFF2, RATIONAL_TVG):
            raise ValueError(f"unknown injection kind {self.kind!r}")
        if len(self.gains) < 2:
            raise ValueError("injection needs at least two error channels")
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise ValueError("injection horizon T must be positive and finite")

    @staticmethod
    def prescribed_time_diff(ell1: float = 1.0, ell2: float = 1.0, T: float = 1.0) -> "InjectionSpec":
        """Second-order prescribed-time differentiator error injection.

        Channel gains are -(l1 + 6/(T-t)) and -(l2 + 3 l1/(T-t) + 6/(T-t)^2)
        with l1, l2 > 0.  In the absence of noise the estimation error reaches
        zero exactly at the deadline for every initial error.
        """
        if not (ell1 > 0.0 and ell2 > 0.0):
            raise ValueError("injection parameters l1, l2 must be positive")
        g1 = RationalGain(((-float(ell1), 0), (-6.0, 1)))
        g2 = RationalGain(((-float(ell2), 0), (-3.0 * float(ell1), 1), (-6.0, 2)))
        return InjectionSpec(kind=PT_DIFF2, T=float(T), gains=(g1, g2), ell=(float(ell1), float(ell2)))

    @staticmethod
    def rational(gains: Sequence, T: float = 1.0) -> "InjectionSpec":
        return InjectionSpec(kind=RATIONAL_TVG, T=float(T), gains=tuple(_as_gain(g) for g in gains))

    @staticmethod
    def zero(n: int = 2, T: float = 1.0) -> "InjectionSpec":
        return InjectionSpec.rational([() for _ in range(n)], T=T)

    @property
    def n(self) -> int:
        return len(self.gains)

    def values(self, t: float, y: float) -> np.ndarray:
        """All channel outputs phi_i(t, y); rejects t >= T."""
        u = self.T - t
        if u <= 0.0:
            raise ValueError(f"injection evaluated at t={t!r} >= deadline T={self.T!r}")
        out = np.empty(len(self.gains))
        for i, g in enumerate(self.gains):
            out[i] = g.value_at(u) * y
        return out


def eval_reference_controller(t: float, x) -> float:
    """Output of the bundled reference controller at (t, x), t < 1."""
    return ControllerSpec.reference().evaluate(t, x)


def eval_differentiator_injection(t: float, y: float, spec: Optional[InjectionSpec] = None) -> np.ndarray:
    """Injection channel outputs for measured first component y, t < T."""
    if spec is None:
        spec = InjectionSpec.prescribed_time_diff()
    return spec.values(t, y)


@dataclass(frozen=True)
class DisturbanceSpec:
    """Matched additive disturbance d(t) with |d(t)| <= bound for all t.

    Kinds: "zero", "constant", "sinusoid" (amplitude * sin(2 pi f t + phase)),
    and "piecewise" (zero-order hold over (time, value) samples; zero before
    the first sample time).
    """

    kind: str = "zero"
    bound: float = 0.0
    value: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    samples: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "sinusoid", "piecewise"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.bound < 0.0 or not math.isfinite(self.bound):
            raise ValueError("disturbance bound must be finite and nonnegative")
        if self.kind == "constant" and abs(self.value) > self.bound:
            raise ValueError("constant disturbance exceeds its declared bound")
        if self.kind == "sinusoid" and abs(self.amplitude) > self.bound:
            raise ValueError("sinusoid amplitude exceeds the declared bound")
        if self.kind == "piecewise":
            times = [t for t, _ in self.samples]
            if times != sorted(times):
                raise ValueError("piecewise disturbance samples must be time sorted")
            if any(abs(v) > self.bound for _, v in self.samples):
                raise ValueError("piecewise disturbance sample exceeds the declared bound")

    def __call__(self, t: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.value
        if self.kind == "sinusoid":
            return self.amplitude * math.sin(2.0 * math.pi * self.frequency * t + self.phase)
        # piecewise: hold the latest sample value
        held = 0.0
        for ts, vs in self.samples:
            if t >= ts:
                held = vs
            else:
                break
        return held

    def next_discontinuity(self, t: float) -> float:
        """Next jump instant strictly after t (inf when none)."""
        if self.kind != "piecewise":
            return math.inf
        for ts, _ in self.samples:
            if ts > t:
                return ts
        return math.inf


class NoiseSource:
    """Measurement-noise contract used by the integrator.

    A source is owned by one integration run at a time.  value(t, x) returns
    the additive measurement noise at time t given the current plant state
    (a length-n vector for the control loop, a scalar for the differentiator
    error model) and must satisfy the declared bound at every query.
    observe(t, x) is called once per committed integration step, in time
    order, and is the only place a source may change internal state; it
    returns True when the source switched its law exactly at t.
    next_discontinuity(t) announces the next known switching instant strictly
    after t (inf when none is scheduled) so the integrator can land on it.
    """

    bound: float = 0.0
    scalar: bool = False

    def value(self, t: float, x):
        raise NotImplementedError

    def observe(self, t: float, x) -> bool:
        return False

    def next_discontinuity(self, t: float) -> float:
        return math.inf

    @property
    def switch_times(self) -> tuple[float, ...]:
        return ()


class ZeroNoise(NoiseSource):
    """Noise-free measurement channel; vector when n is given, else scalar."""

    def __init__(self, n: Optional[int] = None):
        self.bound = 0.0
        self.scalar = n is None
        self._zero = 0.0 if n is None else np.zeros(n)

    def value(self, t: float, x):
        return self._zero


@dataclass(frozen=True)
class SystemModel:
    """A simulated system: variant, horizon, and the law driving channel n.

    variant "control_loop":  x_i' = x_{i+1} (i < n),  x_n' = v(t, x + eta) + d(t)
    variant "diff_error":    x_i' = x_{i+1} + phi_i(t, x_1 + eta_1) (i < n),
                             x_n' = d(t) + phi_n(t, x_1 + eta_1)
    """

    variant: str
    horizon: Horizon
    controller: Optional[ControllerSpec] = None
    injection: Optional[InjectionSpec] = None
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)

    def __post_init__(self):
        if self.variant == CONTROL_LOOP:
            if self.controller is None:
                raise ValueError("control_loop model needs a controller")
            if abs(self.controller.T - self.horizon.T) > 0.0:
                raise ValueError("controller horizon differs from model horizon")
        elif self.variant == DIFF_ERROR:
            if self.injection is None:
                raise ValueError("diff_error model needs an injection")
            if abs(self.injection.T - self.horizon.T) > 0.0:
                raise ValueError("injection horizon differs from model horizon")
        else:
            raise ValueError(f"unknown system variant {self.variant!r}")

    @property
    def n(self) -> int:
        if self.variant == CONTROL_LOOP:
            return self.controller.n
        return self.injection.n

    @property
    def T(self) -> float:
        return self.horizon.T

    def rhs(self, t: float, x: np.ndarray, eta) -> np.ndarray:
        if self.variant == CONTROL_LOOP:
            return control_loop_rhs(t, x, eta, self)
        return diff_error_rhs(t, x, eta, self)

    def gain_output(self, t: float, x: np.ndarray, eta) -> float:
        """Scalar record of the algorithm output at (t, x): the controller
        value, or the largest-magnitude injection channel (signed)."""
        if self.variant == CONTROL_LOOP:
            return self.controller.evaluate(t, x + eta)
        phi = self.injection.values(t, float(x[0]) + _scalar(eta))
        return float(phi[int(np.argmax(np.abs(phi)))])

    def zero_noise(self) -> ZeroNoise:
        return ZeroNoise(self.n if self.variant == CONTROL_LOOP else None)


def control_loop_rhs(t: float, x: np.ndarray, eta, model: SystemModel) -> np.ndarray:
    """Chain derivative under noisy state feedback; d enters the last channel."""
    v = model.controller.evaluate(t, x + eta)
    if not math.isfinite(v):
        raise NumericalFailure(f"controller output not finite at t={t!r}")
    dx = np.empty_like(x)
    dx[:-1] = x[1:]
    dx[-1] = v + model.disturbance(t)
    return dx


def _scalar(v) -> float:
    """Plain float from a python number or a length-1 array."""
    arr = np.asarray(v, dtype=float)
    return float(arr.reshape(-1)[0]) if arr.ndim else float(arr)


def diff_error_rhs(t: float, x: np.ndarray, eta1, model: SystemModel) -> np.ndarray:
    """Differentiator error derivative; only the first component is measured."""
    phi = model.injection.values(t, float(x[0]) + _scalar(eta1))
    if not np.all(np.isfinite(phi)):
        raise NumericalFailure(f"injection output not finite at t={t!r}")
    dx = np.empty_like(x)
    dx[:-1] = x[1:] + phi[:-1]
    dx[-1] = model.disturbance(t) + phi[-1]
    return dx


def reference_loop(disturbance: Optional[DisturbanceSpec] = None, rho_min: float = 0.0) -> SystemModel:
    """The bundled second-order control loop on T = 1."""
    return SystemModel(
        variant=CONTROL_LOOP,
        horizon=Horizon(T=1.0, rho_min=rho_min),
        controller=ControllerSpec.reference(),
        disturbance=disturbance or DisturbanceSpec(),
    )


def rational_loop(gains: Sequence, T: float = 1.0,
                  disturbance: Optional[DisturbanceSpec] = None, rho_min: float = 0.0) -> SystemModel:
    """Control loop with user-supplied rational gain tables."""
    return SystemModel(
        variant=CONTROL_LOOP,
        horizon=Horizon(T=float(T), rho_min=rho_min),
        controller=ControllerSpec.rational(gains, T=T),
        disturbance=disturbance or DisturbanceSpec(),
    )


def open_loop_chain(n: int = 2, T: float = 1.0,
                    disturbance: Optional[DisturbanceSpec] = None) -> SystemModel:
    """Integrator chain with the feedback removed (negative-control fixture)."""
    return SystemModel(
        variant=CONTROL_LOOP,
        horizon=Horizon(T=float(T)),
        controller=ControllerSpec.zero(n=n, T=T),
        disturbance=disturbance or DisturbanceSpec(),
    )


def differentiator_error_model(ell1: float = 1.0, ell2: float = 1.0, T: float = 1.0,
                               disturbance: Optional[DisturbanceSpec] = None,
                               rho_min: float = 0.0) -> SystemModel:
    """Second-order prescribed-time differentiator error dynamics."""
    return SystemModel(
        variant=DIFF_ERROR,
        horizon=Horizon(T=float(T), rho_min=rho_min),
        injection=InjectionSpec.prescribed_time_diff(ell1=ell1, ell2=ell2, T=T),
        disturbance=disturbance or DisturbanceSpec(),
    )


def rational_diff_error(gains: Sequence, T: float = 1.0,
                        disturbance: Optional[DisturbanceSpec] = None, rho_min: float = 0.0) -> SystemModel:
    """Differentiator error model with user-supplied rational injection tables."""
    return SystemModel(
        variant=DIFF_ERROR,
        horizon=Horizon(T=float(T), rho_min=rho_min),
        injection=InjectionSpec.rational(gains, T=T),
        disturbance=disturbance or DisturbanceSpec(),
    )
