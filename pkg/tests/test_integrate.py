"""Adaptive stepper: accuracy, noise handling, events, termination."""

import math

import numpy as np
import pytest

from tvglab.core import (
    NoiseSource,
    NumericalFailure,
    differentiator_error_model,
    open_loop_chain,
    reference_loop,
)
from tvglab.integrate import (
    BLOW_UP,
    EVENT,
    REACHED_END,
    STEP_UNDERFLOW,
    IntegrationOptions,
    OutputGrid,
    detect_peaks,
    integrate,
    terminal_state,
)
from tvglab.oracle import reference_solution


def test_closed_loop_matches_closed_form():
    model = reference_loop()
    grid = OutputGrid(kind="uniform", count=101)
    traj = integrate(model, None, np.array([1.0, 0.0]), 0.0, 0.9,
                     IntegrationOptions(output_grid=grid))
    exact = reference_solution(0.0, (1.0, 0.0), traj.ts)
    scale = np.max(np.abs(exact))
    assert np.max(np.abs(traj.xs - exact)) <= 1e-9 * scale
    assert traj.completed
    assert traj.termination.kind == REACHED_END


def test_open_loop_solution_is_affine_in_time():
    model = open_loop_chain()
    traj = integrate(model, None, np.array([2.0, -3.0]), 0.0, 0.5)
    assert traj.xs[-1][0] == pytest.approx(2.0 - 3.0 * 0.5, rel=1e-12)
    assert traj.xs[-1][1] == pytest.approx(-3.0, rel=1e-12)


def test_dense_output_between_steps():
    model = reference_loop()
    traj = integrate(model, None, np.array([1.0, 0.0]), 0.0, 0.9)
    probes = np.linspace(0.05, 0.85, 40)
    states = traj.state_at(probes)
    exact = reference_solution(0.0, (1.0, 0.0), probes)
    assert np.max(np.abs(states - exact)) <= 1e-7
    with pytest.raises(ValueError):
        traj.state_at(0.95)


def test_output_grid_kinds():
    model = reference_loop()
    uni = integrate(model, None, np.array([1.0, 0.0]), 0.0, 0.9,
                    IntegrationOptions(output_grid=OutputGrid(kind="uniform", count=33)))
    for t in np.linspace(0.0, 0.9, 33):
        assert np.min(np.abs(uni.ts - t)) < 1e-12
    geo = integrate(model, None, np.array([1.0, 0.0]), 0.0, 1.0 - 1e-6,
                    IntegrationOptions(output_grid=OutputGrid(kind="geometric", count=33)))
    assert geo.ts[-1] == pytest.approx(1.0 - 1e-6, abs=1e-15)


def test_steps_shrink_toward_deadline():
    model = reference_loop()
    traj = integrate(model, None, np.array([1.0, 0.0]), 0.0, 1.0 - 1e-6)
    hs = np.diff(traj.knot_ts)
    gaps = 1.0 - traj.knot_ts[:-1]
    assert np.all(hs <= 0.1 * gaps + 1e-15)


def test_stop_condition_bisection():
    model = reference_loop()
    traj = integrate(model, None, np.array([1.0, 0.0]), 0.0, 0.99,
                     stop_condition=lambda t, x: x[0] <= 0.25)
    assert traj.termination.kind == EVENT
    # event time matches the closed-form crossing of x1 = 0.25
    assert traj.xs[-1][0] == pytest.approx(0.25, abs=1e-9)
    exact = reference_solution(0.0, (1.0, 0.0), traj.t_last)
    assert exact[0] == pytest.approx(0.25, abs=1e-9)


def test_blow_up_termination():
    model = reference_loop()
    traj = integrate(model, None, np.array([1.0, 0.0]), 0.0, 0.9,
                     IntegrationOptions(max_norm=1.2))
    assert traj.termination.kind == BLOW_UP
    assert traj.termination.blow_up is not None
    assert traj.termination.blow_up.norm >= 1.2


def test_rejects_span_past_the_floor():
    model = reference_loop(rho_min=1e-6)
    with pytest.raises(ValueError):
        integrate(model, None, np.array([1.0, 0.0]), 0.0, 1.0 - 1e-9)
    with pytest.raises(ValueError):
        integrate(model, None, np.array([1.0, 0.0]), 0.5, 0.5)


class _BarrierNoise(NoiseSource):
    """Constant vector noise announcing one switching instant."""

    def __init__(self, n, barrier):
        self.bound = 0.02  # vector noise is bounded in the 2-norm
        self.scalar = False
        self.n = n
        self.barrier = barrier
        self.observed = []

    def value(self, t, x):
        return np.full(self.n, 0.01 if t < self.barrier else -0.01)

    def observe(self, t, x):
        self.observed.append(t)
        return False

    def next_discontinuity(self, t):
        return self.barrier if t < self.barrier else math.inf


def test_noise_barrier_is_hit_exactly():
    model = reference_loop()
    noise = _BarrierNoise(2, 0.37)
    traj = integrate(model, noise, np.array([1.0, 0.0]), 0.0, 0.9)
    assert np.any(traj.knot_ts == 0.37)
    # observe is called at committed steps only, in strictly increasing order
    assert noise.observed == sorted(noise.observed)
    assert len(set(noise.observed)) == len(noise.observed)
    assert noise.observed[0] == 0.0


class _LyingNoise(NoiseSource):
    def __init__(self):
        self.bound = 1e-3
        self.scalar = True

    def value(self, t, x):
        return 1.0  # far above the declared bound

    def observe(self, t, x):
        return False

    def next_discontinuity(self, t):
        return math.inf


def test_noise_bound_violation_is_reported():
    model = differentiator_error_model()
    with pytest.raises(NumericalFailure):
        integrate(model, _LyingNoise(), np.array([0.0, 0.0]), 0.0, 0.5)


def test_recorded_noise_is_not_aliased():
    model = reference_loop()
    noise = _BarrierNoise(2, 0.37)
    traj = integrate(model, noise, np.array([1.0, 0.0]), 0.0, 0.9)
    before = traj.ts < 0.37
    after = traj.ts > 0.37
    assert np.all(traj.etas[before] == 0.01)
    assert np.all(traj.etas[after] == -0.01)


def test_terminal_state_reads_the_requested_distance():
    model = reference_loop()
    traj = integrate(model, None, np.array([1.0, 0.0]), 0.0, 1.0 - 1e-4)
    x = terminal_state(traj, 1e-3)
    exact = reference_solution(0.0, (1.0, 0.0), 1.0 - 1e-3)
    assert np.allclose(x, exact, atol=1e-9)
    with pytest.raises(ValueError):
        terminal_state(traj, 1e-6)  # closer than the integrated span


def test_detect_peaks_reports_first_crossings():
    model = open_loop_chain()
    traj = integrate(model, None, np.array([0.0, 1.0]), 0.0, 0.9,
                     IntegrationOptions(output_grid=OutputGrid(kind="uniform", count=1001)))
    # norm grows from 1 toward sqrt(0.81 + 1) ~ 1.345 on this span
    crossings = detect_peaks(traj, (1.1, 1.3, 2.0))
    assert crossings[0][0] == 1.1 and crossings[0][1] is not None
    assert crossings[1][0] == 1.3 and crossings[1][1] is not None
    assert crossings[0][1] < crossings[1][1]
    assert crossings[2][1] is None  # never reached


def test_gain_record_matches_model_output():
    model = reference_loop()
    traj = integrate(model, None, np.array([1.0, 0.0]), 0.0, 0.5)
    k = len(traj.ts) // 2
    expected = model.gain_output(traj.ts[k], traj.xs[k], traj.etas[k])
    assert traj.gains[k] == pytest.approx(expected, rel=1e-12)


def test_options_validation():
    with pytest.raises(ValueError):
        IntegrationOptions(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegrationOptions(max_step_fraction=1.5)
    with pytest.raises(ValueError):
        OutputGrid(kind="log", count=10)
    with pytest.raises(ValueError):
        OutputGrid(kind="uniform", count=1)
