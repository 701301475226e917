"""System definitions: gain tables, disturbances, models, right-hand sides."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvglab.core import (
    CONTROL_LOOP,
    DIFF_ERROR,
    ControllerSpec,
    DisturbanceSpec,
    Horizon,
    InjectionSpec,
    RationalGain,
    SystemModel,
    ZeroNoise,
    differentiator_error_model,
    eval_differentiator_injection,
    eval_reference_controller,
    open_loop_chain,
    rational_diff_error,
    rational_loop,
    reference_loop,
)


def test_rational_gain_evaluates_term_sum():
    g = RationalGain(terms=((-6.0, 2), (-4.0, 1)))
    # -6/u^2 - 4/u at u = 0.5
    assert g.value_at(0.5) == pytest.approx(-32.0, rel=1e-15)
    assert g.magnitude_at(0.5) == pytest.approx(32.0, rel=1e-15)
    assert g.max_pole_order == 2
    assert not g.is_zero


def test_rational_gain_rejects_bad_terms():
    with pytest.raises(ValueError):
        RationalGain(terms=((1.0, -1),))
    with pytest.raises(ValueError):
        RationalGain(terms=((math.inf, 1),))


def test_reference_controller_known_values():
    # v(t, x) = -6/(1-t)^2 x1 - 4/(1-t) x2
    assert eval_reference_controller(0.0, (1.0, 0.0)) == pytest.approx(-6.0)
    assert eval_reference_controller(0.0, (0.0, 1.0)) == pytest.approx(-4.0)
    assert eval_reference_controller(0.5, (1.0, 1.0)) == pytest.approx(-24.0 - 8.0)
    spec = ControllerSpec.reference()
    assert spec.kind == "reference"
    assert spec.n == 2
    assert spec.evaluate(0.9, (2.0, -1.0)) == pytest.approx(-6.0 / 0.01 * 2.0 + 4.0 / 0.1)


def test_controller_rejects_times_past_deadline():
    spec = ControllerSpec.reference()
    with pytest.raises(ValueError):
        spec.evaluate(1.0, (1.0, 0.0))
    with pytest.raises(ValueError):
        spec.evaluate(1.5, (1.0, 0.0))


@settings(max_examples=50, deadline=None)
@given(
    t=st.floats(min_value=0.0, max_value=0.99),
    a=st.floats(min_value=-5.0, max_value=5.0),
    x1=st.floats(min_value=-10.0, max_value=10.0),
    x2=st.floats(min_value=-10.0, max_value=10.0),
)
def test_reference_controller_is_linear_in_state(t, a, x1, x2):
    v1 = eval_reference_controller(t, (x1, x2))
    v2 = eval_reference_controller(t, (a * x1, a * x2))
    assert v2 == pytest.approx(a * v1, rel=1e-12, abs=1e-9)


def test_injection_known_values():
    # phi1 = -(l1 + 6/u) y, phi2 = -(l2 + 3 l1/u + 6/u^2) y at u = 0.5
    vals = eval_differentiator_injection(0.5, 1.0)
    assert vals[0] == pytest.approx(-13.0)
    assert vals[1] == pytest.approx(-31.0)
    spec = InjectionSpec.prescribed_time_diff(ell1=2.0, ell2=3.0, T=2.0)
    out = spec.values(1.0, -2.0)
    assert out[0] == pytest.approx(2.0 * (2.0 + 6.0))
    assert out[1] == pytest.approx(2.0 * (3.0 + 6.0 + 6.0))


@settings(max_examples=50, deadline=None)
@given(
    t=st.floats(min_value=0.0, max_value=0.99),
    y=st.floats(min_value=-10.0, max_value=10.0),
)
def test_injection_scales_linearly_in_measurement(t, y):
    base = eval_differentiator_injection(t, 1.0)
    scaled = eval_differentiator_injection(t, y)
    assert np.allclose(scaled, y * base, rtol=1e-12, atol=1e-9)


def test_horizon_defaults_and_validation():
    h = Horizon(T=2.0)
    assert h.rho_min == pytest.approx(2e-9)
    with pytest.raises(ValueError):
        Horizon(T=0.0)
    with pytest.raises(ValueError):
        Horizon(T=1.0, rho_min=1.0)
    with pytest.raises(ValueError):
        Horizon(T=1.0, rho_min=-1e-3)


def test_disturbance_kinds():
    zero = DisturbanceSpec()
    assert zero(0.3) == 0.0
    const = DisturbanceSpec(kind="constant", bound=0.5, value=-0.5)
    assert const(0.9) == -0.5
    sine = DisturbanceSpec(kind="sinusoid", bound=1.0, amplitude=1.0, frequency=0.25)
    assert sine(1.0) == pytest.approx(1.0)
    steps = DisturbanceSpec(kind="piecewise", bound=2.0,
                            samples=((0.2, 1.0), (0.6, -2.0)))
    assert steps(0.1) == 0.0
    assert steps(0.3) == 1.0
    assert steps(0.7) == -2.0
    assert steps.next_discontinuity(0.0) == 0.2
    assert steps.next_discontinuity(0.2) == 0.6
    assert steps.next_discontinuity(0.6) == math.inf


def test_disturbance_validation():
    with pytest.raises(ValueError):
        DisturbanceSpec(kind="constant", bound=0.1, value=0.2)
    with pytest.raises(ValueError):
        DisturbanceSpec(kind="sinusoid", bound=0.1, amplitude=0.2)
    with pytest.raises(ValueError):
        DisturbanceSpec(kind="piecewise", bound=1.0, samples=((0.5, 0.0), (0.2, 0.0)))
    with pytest.raises(ValueError):
        DisturbanceSpec(kind="wobble")


def test_control_loop_rhs_uses_measured_state():
    model = reference_loop()
    x = np.array([1.0, 0.0])
    eta = np.array([0.5, 0.0])
    f = model.rhs(0.0, x, eta)
    assert f[0] == pytest.approx(x[1])
    assert f[1] == pytest.approx(eval_reference_controller(0.0, x + eta))


def test_control_loop_rhs_adds_disturbance_on_last_channel():
    d = DisturbanceSpec(kind="constant", bound=1.0, value=0.75)
    model = reference_loop(disturbance=d)
    f = model.rhs(0.0, np.array([1.0, 0.0]), np.zeros(2))
    assert f[1] == pytest.approx(-6.0 + 0.75)
    assert f[0] == pytest.approx(0.0)


def test_diff_error_rhs_injects_measured_first_component():
    model = differentiator_error_model()
    x = np.array([2.0, 1.0])
    f = model.rhs(0.5, x, np.array([0.25]))
    phi = eval_differentiator_injection(0.5, 2.25)
    assert f[0] == pytest.approx(x[1] + phi[0])
    assert f[1] == pytest.approx(phi[1])


def test_open_loop_chain_is_a_pure_integrator():
    model = open_loop_chain()
    f = model.rhs(0.3, np.array([4.0, -2.0]), np.zeros(2))
    assert f[0] == pytest.approx(-2.0)
    assert f[1] == pytest.approx(0.0)


def test_gain_output_control_is_the_actuation():
    model = reference_loop()
    x = np.array([1.0, 1.0])
    assert model.gain_output(0.0, x, np.zeros(2)) == pytest.approx(-10.0)


def test_gain_output_diff_is_largest_injection_channel():
    model = differentiator_error_model()
    out = model.gain_output(0.5, np.array([1.0, 0.0]), np.array([0.0]))
    # |phi2| = 31 dominates |phi1| = 13; sign is kept
    assert out == pytest.approx(-31.0)


def test_model_variant_validation():
    with pytest.raises(ValueError):
        SystemModel(variant=CONTROL_LOOP, horizon=Horizon(T=1.0))
    with pytest.raises(ValueError):
        SystemModel(variant=DIFF_ERROR, horizon=Horizon(T=1.0))
    with pytest.raises(ValueError):
        SystemModel(variant="other", horizon=Horizon(T=1.0),
                    controller=ControllerSpec.reference())
    with pytest.raises(ValueError):
        SystemModel(variant=CONTROL_LOOP, horizon=Horizon(T=2.0),
                    controller=ControllerSpec.reference())


def test_zero_noise_shapes():
    loop = reference_loop()
    zn = loop.zero_noise()
    assert isinstance(zn, ZeroNoise)
    assert zn.value(0.0, np.zeros(2)).shape == (2,)
    diff = differentiator_error_model()
    assert diff.zero_noise().scalar


def test_rational_model_factories():
    loop = rational_loop((((-6.0, 2),), ((-4.0, 1),)), T=1.0)
    assert loop.controller.evaluate(0.5, (1.0, 1.0)) == pytest.approx(-32.0)
    diff = rational_diff_error((((-6.0, 1),), ((-6.0, 2),)), T=1.0)
    out = diff.injection.values(0.5, 1.0)
    assert out[0] == pytest.approx(-12.0)
    assert out[1] == pytest.approx(-24.0)
