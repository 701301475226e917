"""Constructive bounded-noise attacks: divergence ladders and terminal errors."""

import math

import numpy as np
import pytest

from tvglab.attack import (
    ControllerDivergenceNoise,
    DifferentiatorDivergenceNoise,
    DifferentiatorTerminalNoise,
    controller_terminal_error_noise,
    default_ladder,
    default_targets,
    run_controller_terminal_attack,
    run_controller_terminal_attack_with_prelude,
    run_differentiator_terminal_attack,
    run_divergence_attack,
    terminal_plan_window,
)
from tvglab.core import ControllerSpec, differentiator_error_model, reference_loop


def test_default_targets_double_from_unit_scale():
    t = default_targets(1e-2)
    assert t == (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    t5 = default_targets(5.0, count=3)
    assert t5 == (5.0, 10.0, 20.0)
    assert default_ladder(1e-2) == (0.1, 1.0, 10.0)
    assert default_ladder(3.0) == pytest.approx((0.3, 3.0, 30.0))


def test_controller_divergence_noise_validation():
    with pytest.raises(ValueError):
        ControllerDivergenceNoise(eta_bar=0.0, targets=(1.0,))
    with pytest.raises(ValueError):
        ControllerDivergenceNoise(eta_bar=0.01, targets=(1.0,), delta=0.02)
    with pytest.raises(ValueError):
        ControllerDivergenceNoise(eta_bar=0.01, targets=(2.0, 1.0))


def test_controller_divergence_noise_holds_and_latches():
    noise = ControllerDivergenceNoise(eta_bar=0.01, targets=(1.0, 2.0))
    x = np.array([0.5, 0.0])
    noise.observe(0.0, x)
    v = noise.value(0.0, x)
    # held vector is delta * sign(x1) * e1 with default delta = eta_bar / 2
    assert v[0] == pytest.approx(0.005)
    assert v[1] == 0.0
    assert np.linalg.norm(v) <= 0.01
    # stays constant until the target is crossed after the gate
    noise.observe(0.1, np.array([-3.0, 0.0]))
    assert noise.value(0.1, np.array([-3.0, 0.0]))[0] == pytest.approx(0.005)


def test_controller_divergence_ladder_small_bound():
    outcome = run_divergence_attack(reference_loop(rho_min=1e-9), 1e-2)
    assert outcome.kind == "controller-divergence"
    assert outcome.verdict
    assert outcome.noise_bound == 1e-2
    assert outcome.schedule.delta == pytest.approx(5e-3)
    times = [t for _, t in outcome.peaks]
    assert all(t is not None for t in times)
    assert times == sorted(times)
    assert all(t < 1.0 - 1e-9 for t in times)
    # crossings concentrate near the deadline
    assert times[0] == pytest.approx(0.9953707191605528, rel=1e-9)
    assert times[-1] == pytest.approx(0.9995623876773592, rel=1e-9)
    assert len(outcome.schedule.times) == 7
    assert outcome.trajectory.completed


def test_controller_divergence_ladder_tiny_bound():
    outcome = run_divergence_attack(reference_loop(rho_min=1e-9), 1e-3)
    assert outcome.verdict
    times = [t for _, t in outcome.peaks]
    assert all(t is not None and t < 1.0 - 1e-9 for t in times)
    assert times == sorted(times)
    # smaller bound pushes every crossing closer to the deadline
    assert times[0] > 0.999


def test_differentiator_divergence_ladder():
    outcome = run_divergence_attack(differentiator_error_model(rho_min=1e-9), 1e-2)
    assert outcome.kind == "diff-divergence"
    assert outcome.verdict
    times = [t for _, t in outcome.peaks]
    assert all(t is not None and t < 1.0 - 1e-9 for t in times)
    assert times == sorted(times)
    assert times[0] == pytest.approx(0.9872415959214417, rel=1e-9)
    outcome3 = run_divergence_attack(differentiator_error_model(rho_min=1e-9), 1e-3)
    assert outcome3.verdict
    assert all(t is not None for _, t in outcome3.peaks)


def test_differentiator_divergence_noise_is_continuous():
    noise = DifferentiatorDivergenceNoise(eta_bar=0.01, targets=(1.0, 2.0))
    assert noise.scalar
    assert noise.value(0.0, np.zeros(2)) == pytest.approx(0.01)
    ts = np.linspace(0.0, 0.5, 200)
    vals = np.array([noise.value(t, np.zeros(2)) for t in ts])
    diffs = np.abs(np.diff(vals))
    # piecewise linear, slope magnitude at most 2 eta_bar / (T - t)
    assert np.all(diffs <= 2.0 * 0.01 * np.diff(ts) / (1.0 - ts[1:]) + 1e-12)
    assert np.all(np.abs(vals) <= 0.01 + 1e-15)


def test_divergence_attack_starts_at_zero_state():
    outcome = run_divergence_attack(reference_loop(rho_min=1e-9), 1e-2)
    assert np.all(outcome.trajectory.xs[0] == 0.0)
    # bounded noise still drives the state across three decades above its size
    assert outcome.peaks[-1][0] / outcome.noise_bound >= 1e3


def test_divergence_attack_custom_ladder_and_blowup():
    from tvglab.integrate import IntegrationOptions
    outcome = run_divergence_attack(
        reference_loop(rho_min=1e-12), 1e-2,
        targets=default_targets(1e-2, count=12),
        opts=IntegrationOptions(max_norm=1e3))
    assert outcome.trajectory.termination.kind == "blow_up"
    assert outcome.verdict  # ladder fully crossed before the escape


def test_ramp_noise_shape():
    noise = DifferentiatorTerminalNoise(eta_bar=0.1, epsilon=1.0)
    assert noise.s == pytest.approx(0.8, abs=1e-15)
    assert noise.value(0.0, None) == -0.1
    assert noise.value(0.8, None) == pytest.approx(-0.1)
    assert noise.value(0.9, None) == pytest.approx(0.0, abs=1e-15)
    assert noise.next_discontinuity(0.0) == pytest.approx(0.8)
    assert noise.next_discontinuity(0.85) == math.inf
    with pytest.raises(ValueError):
        DifferentiatorTerminalNoise(eta_bar=0.6, epsilon=1.0)  # ramp start before 0


@pytest.mark.parametrize("eta_bar,epsilon,s_expected", [
    (0.1, 1.0, 0.8),
    (0.01, 0.5, 0.96),
    (0.001, 0.2, 0.99),
])
def test_differentiator_terminal_error_pins_x2(eta_bar, epsilon, s_expected):
    model = differentiator_error_model()
    for ic in ((0.0, 0.0), (5.0, -3.0)):
        out = run_differentiator_terminal_attack(model, eta_bar, epsilon, np.array(ic))
        assert out.kind == "diff-terminal"
        assert out.ramp.s == pytest.approx(s_expected, abs=1e-14)
        assert out.verdict
        assert abs(out.terminal[1] + epsilon) <= 1e-3 * epsilon
        assert float(np.max(np.abs(out.trajectory.etas))) <= eta_bar * (1 + 1e-12)


def test_terminal_plan_window_reference_point():
    lo, hi = terminal_plan_window(2, 0.1, 0.5)
    assert hi == 1.0
    assert lo == pytest.approx(1.0 - (0.1 / math.sqrt(2.0)) / 6.0, rel=1e-12)
    # wide bounds are capped by the half-horizon rule
    lo2, _ = terminal_plan_window(2, 10.0, 0.1)
    assert lo2 == pytest.approx(0.5)


def test_cascade_plan_structure():
    noise, plan = controller_terminal_error_noise(ControllerSpec.reference(), 0.1, 0.5)
    # last channel is parked at -2 epsilon; first follows a straight line in u
    assert plan.psi[-1].coeffs == {0: -1.0}
    assert plan.profile[0].coeffs[1] == pytest.approx(4.0 * 0.5 / 3.0)
    assert plan.forcing.coeffs == {}
    assert plan.psi_init == (0.0,)
    x_start = plan.initial_state()
    assert x_start[1] == pytest.approx(-1.0)
    # the planned state and noise stay inside their budgets on [s, T)
    for t in np.linspace(plan.s, 1.0 - 1e-9, 100):
        eta = plan.noise_at(t)
        assert np.linalg.norm(eta) <= 0.1 + 1e-12
    assert noise.bound == 0.1


def test_controller_terminal_attack_prepared_state():
    outcome = run_controller_terminal_attack(reference_loop(), 0.1, 0.5)
    assert outcome.kind == "controller-terminal"
    assert outcome.verdict
    assert outcome.tracking_error <= 1e-6
    assert float(np.linalg.norm(outcome.terminal)) >= 0.5
    norms = np.linalg.norm(outcome.trajectory.etas, axis=1)
    assert float(np.max(norms)) <= 0.1 * (1 + 1e-12)
    assert outcome.plan.s == pytest.approx(0.9893933982822017, rel=1e-12)
    # terminal state sits on the plan: x2 = -2 epsilon exactly
    assert outcome.terminal[1] == pytest.approx(-1.0, abs=1e-6)


def test_controller_terminal_attack_explicit_start():
    outcome = run_controller_terminal_attack(reference_loop(), 0.1, 0.5, s=0.99)
    assert outcome.verdict
    assert outcome.plan.s == 0.99
    with pytest.raises(ValueError):
        run_controller_terminal_attack(reference_loop(), 0.1, 0.5, s=0.9)  # outside window


def test_controller_terminal_attack_with_prelude():
    outcome = run_controller_terminal_attack_with_prelude(
        reference_loop(), 0.1, 0.5, np.array([1.0, 1.0]))
    assert outcome.kind == "controller-terminal-prelude"
    assert outcome.verdict
    assert outcome.tracking_error <= 1e-6
    assert float(np.linalg.norm(outcome.terminal)) >= 0.5
    norms = np.linalg.norm(outcome.trajectory.etas, axis=1)
    assert float(np.max(norms)) <= 0.1 * (1 + 1e-12)


def test_attack_runners_reject_wrong_variant():
    with pytest.raises(ValueError):
        run_differentiator_terminal_attack(reference_loop(), 0.1, 1.0, np.zeros(2))
    with pytest.raises(ValueError):
        run_controller_terminal_attack(differentiator_error_model(), 0.1, 0.5)


def test_divergence_attack_is_deterministic():
    a = run_divergence_attack(reference_loop(rho_min=1e-9), 1e-2)
    b = run_divergence_attack(reference_loop(rho_min=1e-9), 1e-2)
    assert a.schedule.times == b.schedule.times
    assert np.array_equal(a.trajectory.xs, b.trajectory.xs)
