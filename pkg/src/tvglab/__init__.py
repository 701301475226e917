"""Time-varying-gain lab: prescribed-time loops, their noise-free deadline
behavior, and constructive bounded-noise attacks that break them.

The package simulates two plant families whose feedback gains grow without
bound as t approaches a deadline T: a controlled integrator chain and the
error dynamics of a prescribed-time differentiator.  It verifies the
absolute-deadline property in the noise-free case, synthesizes arbitrarily
small measurement-noise signals that force divergence or a fixed terminal
error, scans the gain growth, falsifies uniform stability bounds, and
evaluates the stop-early and deadzone mitigations.
"""

from .core import (
    CONTROL_LOOP,
    DIFF_ERROR,
    REFERENCE,
    RATIONAL_TVG,
    PT_DIFF2,
    ControllerSpec,
    DisturbanceSpec,
    Horizon,
    InjectionSpec,
    NoiseSource,
    NumericalFailure,
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
from .integrate import (
    IntegrationOptions,
    OutputGrid,
    Termination,
    Trajectory,
    detect_peaks,
    integrate,
    terminal_state,
)
from .oracle import (
    SolverCheckCase,
    SolverCheckReport,
    instability_witness_time,
    reference_solution,
    verify_solver_against_oracle,
)
from .attack import (
    AttackOutcome,
    CascadePlan,
    ControllerDivergenceNoise,
    ControllerTerminalNoise,
    DifferentiatorDivergenceNoise,
    DifferentiatorTerminalNoise,
    RampParameters,
    SwitchingSchedule,
    controller_divergence_noise,
    controller_terminal_error_noise,
    default_ladder,
    default_targets,
    differentiator_divergence_noise,
    differentiator_terminal_error_noise,
    run_controller_terminal_attack,
    run_controller_terminal_attack_with_prelude,
    run_differentiator_terminal_attack,
    run_divergence_attack,
    terminal_plan_window,
)
from .analysis import (
    DeadlineCase,
    DeadlineReport,
    DeadzoneCase,
    GainScanRow,
    GainScanTable,
    StabilityWitness,
    StopTimeCase,
    WorkaroundReport,
    check_absolute_deadline,
    evaluate_deadzone,
    evaluate_stop_time,
    falsify_uniform_stability,
    gain_bound_at,
    gain_supremum_scan,
    rho_shrink_profile,
)

__version__ = "0.1.0"

__all__ = [
    "CONTROL_LOOP",
    "DIFF_ERROR",
    "REFERENCE",
    "RATIONAL_TVG",
    "PT_DIFF2",
    "ControllerSpec",
    "DisturbanceSpec",
    "Horizon",
    "InjectionSpec",
    "NoiseSource",
    "NumericalFailure",
    "RationalGain",
    "SystemModel",
    "ZeroNoise",
    "differentiator_error_model",
    "eval_differentiator_injection",
    "eval_reference_controller",
    "open_loop_chain",
    "rational_diff_error",
    "rational_loop",
    "reference_loop",
    "IntegrationOptions",
    "OutputGrid",
    "Termination",
    "Trajectory",
    "detect_peaks",
    "integrate",
    "terminal_state",
    "SolverCheckCase",
    "SolverCheckReport",
    "instability_witness_time",
    "reference_solution",
    "verify_solver_against_oracle",
    "AttackOutcome",
    "CascadePlan",
    "ControllerDivergenceNoise",
    "ControllerTerminalNoise",
    "DifferentiatorDivergenceNoise",
    "DifferentiatorTerminalNoise",
    "RampParameters",
    "SwitchingSchedule",
    "controller_divergence_noise",
    "controller_terminal_error_noise",
    "default_ladder",
    "default_targets",
    "differentiator_divergence_noise",
    "differentiator_terminal_error_noise",
    "run_controller_terminal_attack",
    "run_controller_terminal_attack_with_prelude",
    "run_differentiator_terminal_attack",
    "run_divergence_attack",
    "terminal_plan_window",
    "DeadlineCase",
    "DeadlineReport",
    "DeadzoneCase",
    "GainScanRow",
    "GainScanTable",
    "StabilityWitness",
    "StopTimeCase",
    "WorkaroundReport",
    "check_absolute_deadline",
    "evaluate_deadzone",
    "evaluate_stop_time",
    "falsify_uniform_stability",
    "gain_bound_at",
    "gain_supremum_scan",
    "rho_shrink_profile",
]
