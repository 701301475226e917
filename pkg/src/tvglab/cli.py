"""Experiment harness for the toolkit.

Subcommands: simulate, verify-deadline, attack, gain-scan, falsify-stability,
workaround, selftest.  Configuration is line-based ``key = value`` text with
dotted section prefixes (``system.T = 1.0``); command-line flags mirror the
config keys (``--system.T 1.0``) and override the file.  Every run writes CSV
artifacts plus a text summary into the output directory (``output.dir``,
overridden by the TVGLAB_OUTPUT_DIR environment variable).

Exit codes: 0 scenario ran and its declared properties held; 1 config error;
2 numerical failure; 3 scenario ran but a declared property failed.

Trajectory CSV layout: header ``t,x1..xn,eta1..etan,gain_out`` (a single
``eta1`` column for scalar-noise systems), '#'-prefixed comment rows carrying
the effective config and any switching schedule, and floats printed with 17
significant digits so a re-parse reproduces every value bit-exactly.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    CONTROL_LOOP,
    DIFF_ERROR,
    ControllerSpec,
    DisturbanceSpec,
    InjectionSpec,
    Horizon,
    NumericalFailure,
    SystemModel,
    ZeroNoise,
)
from .integrate import IntegrationOptions, OutputGrid, Trajectory, integrate
from .oracle import verify_solver_against_oracle
from .attack import (
    controller_divergence_noise,
    run_controller_terminal_attack,
    run_controller_terminal_attack_with_prelude,
    run_differentiator_terminal_attack,
    run_divergence_attack,
)
from .analysis import (
    DeadlineReport,
    GainScanTable,
    StabilityWitness,
    WorkaroundReport,
    check_absolute_deadline,
    evaluate_deadzone,
    evaluate_stop_time,
    falsify_uniform_stability,
    gain_supremum_scan,
    rho_shrink_profile,
)

OUTPUT_DIR_ENV = "TVGLAB_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_PROPERTY = 3

ATTACK_KINDS = ("controller-divergence", "controller-terminal",
                "diff-divergence", "diff-terminal")
WORKAROUND_KINDS = ("stop-time", "deadzone")
SCENARIOS = (("simulate", "verify-deadline", "gain-scan", "falsify-stability", "selftest")
             + tuple(f"attack.{k}" for k in ATTACK_KINDS)
             + tuple(f"workaround.{k}" for k in WORKAROUND_KINDS))


def fmt(v: float) -> str:
    """Fixed 17-significant-digit float text; float(fmt(v)) == v exactly."""
    return f"{float(v):.16e}"


# ---------------------------------------------------------------------------
# config schema


def _parse_floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(" ", "").split(",") if p != ""]
    return tuple(float(p) for p in parts)


def _parse_vectors(text: str) -> tuple[tuple[float, ...], ...]:
    groups = [g for g in text.split(";") if g.strip() != ""]
    return tuple(_parse_floats(g) for g in groups)


def _parse_gains(text: str) -> tuple[tuple[tuple[float, int], ...], ...]:
    """Per-channel gain tables: channels split by ';', terms by whitespace,
    each term 'c,p' meaning c / (T-t)**p.  An empty channel is a zero gain."""
    channels = text.split(";")
    out = []
    for ch in channels:
        terms = []
        for tok in ch.split():
            c_txt, _, p_txt = tok.partition(",")
            if p_txt == "":
                raise ValueError(f"gain term {tok!r} must look like c,p")
            terms.append((float(c_txt), int(p_txt)))
        out.append(tuple(terms))
    return tuple(out)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class KeySpec:
    parse: Callable[[str], object]
    default: object = None
    check: Optional[Callable[[object], Optional[str]]] = None
    choices: Optional[tuple[str, ...]] = None
    help: str = ""


def _positive(name: str):
    return lambda v: None if v > 0 else f"{name} must be positive"


def _nonnegative(name: str):
    return lambda v: None if v >= 0 else f"{name} must be nonnegative"


def _in_open_01(name: str):
    return lambda v: None if 0.0 < v < 1.0 else f"{name} must lie in (0, 1)"


KEY_SPECS: dict[str, KeySpec] = {
    "scenario": KeySpec(str, None, choices=SCENARIOS, help="what to run"),
    "attack.kind": KeySpec(str, None, choices=ATTACK_KINDS,
                           help="shorthand: scenario = attack.<kind>"),
    "workaround.variant": KeySpec(str, None, choices=WORKAROUND_KINDS,
                                  help="shorthand: scenario = workaround.<kind>"),
    "seed": KeySpec(int, 0, help="seed for randomized grids (oracle checks)"),

    "system.variant": KeySpec(str, None, choices=(CONTROL_LOOP, DIFF_ERROR),
                              help="plant family; default inferred from scenario"),
    "system.controller": KeySpec(str, "reference", choices=("reference", "rational_tvg", "zero"),
                                 help="controller gain table for control_loop"),
    "system.injection": KeySpec(str, "pt_diff2", choices=("pt_diff2", "rational_tvg", "zero"),
                                help="injection gain table for diff_error"),
    "system.gains": KeySpec(_parse_gains, None,
                            help="rational_tvg tables, e.g. '-6,2; -4,1'"),
    "system.T": KeySpec(float, 1.0, _positive("system.T"), help="deadline instant"),
    "system.n": KeySpec(int, 2, lambda v: None if v >= 2 else "system.n must be >= 2",
                        help="chain length for zero/rational tables"),
    "system.ell1": KeySpec(float, 1.0, _positive("system.ell1"), help="pt_diff2 linear gain 1"),
    "system.ell2": KeySpec(float, 1.0, _positive("system.ell2"), help="pt_diff2 linear gain 2"),
    "system.rho_min": KeySpec(float, None, _positive("system.rho_min"),
                              help="hard floor on T - t during integration"),

    "disturbance.kind": KeySpec(str, "zero", choices=("zero", "constant", "sinusoid", "piecewise"),
                                help="bounded disturbance d(t) on the last channel"),
    "disturbance.bound": KeySpec(float, 0.0, _nonnegative("disturbance.bound")),
    "disturbance.value": KeySpec(float, 0.0),
    "disturbance.amplitude": KeySpec(float, 0.0),
    "disturbance.frequency": KeySpec(float, 1.0),
    "disturbance.phase": KeySpec(float, 0.0),
    "disturbance.samples": KeySpec(_parse_vectors, None,
                                   help="piecewise hold samples 't,v; t,v; ...'"),

    "integration.rel_tol": KeySpec(float, 1e-9, _positive("integration.rel_tol")),
    "integration.abs_tol": KeySpec(float, 1e-12, _positive("integration.abs_tol")),
    "integration.max_norm": KeySpec(float, 1e9, _positive("integration.max_norm")),
    "integration.max_step_fraction": KeySpec(float, 0.1, _in_open_01("integration.max_step_fraction")),
    "integration.rho_min": KeySpec(float, None, _positive("integration.rho_min"),
                                   help="override the model floor for this run"),

    "sim.s": KeySpec(float, 0.0, _nonnegative("sim.s"), help="start time"),
    "sim.x0": KeySpec(_parse_floats, None, help="start state, e.g. '1,0'"),
    "sim.t_end": KeySpec(float, None, _positive("sim.t_end")),
    "sim.grid": KeySpec(str, "geometric", choices=("geometric", "uniform")),
    "sim.grid_count": KeySpec(int, 512, lambda v: None if v >= 2 else "sim.grid_count must be >= 2"),

    "deadline.rho": KeySpec(float, 1e-3, _positive("deadline.rho")),
    "deadline.tol": KeySpec(float, 0.1, _positive("deadline.tol")),
    "deadline.starts": KeySpec(_parse_floats, (0.0, 0.3, 0.6)),
    "deadline.ics": KeySpec(_parse_vectors, ((1.0, 0.0), (0.0, 1.0), (10.0, -10.0))),
    "deadline.shrink_rhos": KeySpec(_parse_floats, (1e-2, 1e-3, 1e-4),
                                    help="rho ladder for the shrink profile; empty to skip"),

    "attack.eta_bar": KeySpec(float, None, _positive("attack.eta_bar"), help="noise bound"),
    "attack.epsilon": KeySpec(float, None, _positive("attack.epsilon"),
                              help="terminal-error target"),
    "attack.delta": KeySpec(float, None, _positive("attack.delta"),
                            help="held amplitude for controller-divergence"),
    "attack.targets": KeySpec(_parse_floats, None, help="peak-target ladder override"),
    "attack.thresholds": KeySpec(_parse_floats, None, help="verdict ladder override"),
    "attack.rho": KeySpec(float, 1e-6, _positive("attack.rho"),
                          help="terminal evaluation distance from T"),
    "attack.tol": KeySpec(float, 1e-3, _positive("attack.tol"),
                          help="relative tolerance of the diff-terminal verdict"),
    "attack.s": KeySpec(float, None, _nonnegative("attack.s"),
                        help="plan start for controller-terminal"),
    "attack.psi_init": KeySpec(_parse_floats, None,
                               help="planned start values, channels 1..n-1"),
    "attack.prelude": KeySpec(_parse_bool, False,
                              help="controller-terminal: steer from attack.x0 first"),
    "attack.x0": KeySpec(_parse_floats, None, help="start state for divergence/prelude runs"),

    "scan.delta": KeySpec(float, 1.0, _positive("scan.delta")),
    "scan.rhos": KeySpec(_parse_floats, (1e-1, 1e-2, 1e-3)),
    "scan.time_samples": KeySpec(int, 64, lambda v: None if v >= 2 else "scan.time_samples must be >= 2"),

    "falsify.delta": KeySpec(float, 1.0, _positive("falsify.delta")),
    "falsify.epsilon": KeySpec(float, 2.0, _positive("falsify.epsilon")),
    "falsify.eps_prime": KeySpec(float, None, _positive("falsify.eps_prime")),

    "workaround.t_stop": KeySpec(float, 0.9, _positive("workaround.t_stop")),
    "workaround.width": KeySpec(float, 1e-2, _positive("workaround.width")),
    "workaround.ics": KeySpec(_parse_vectors, ((1.0, 0.0), (10.0, 0.0), (100.0, 0.0))),
    "workaround.noise_eta_bar": KeySpec(float, None, _positive("workaround.noise_eta_bar"),
                                        help="run the sweep under divergence noise of this bound"),

    "output.dir": KeySpec(str, "."),
    "output.prefix": KeySpec(str, "tvglab"),
    "output.plot": KeySpec(_parse_bool, False, help="also write an SVG norm plot"),
}


class ConfigError(Exception):
    """Carries every violation found while reading a configuration."""

    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = tuple(violations)


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    explicit: set = field(default_factory=set)

    def get(self, key: str):
        return self.values[key]

    @property
    def scenario(self) -> str:
        return self.values["scenario"]


def parse_config(text: str, subcommand: Optional[str] = None,
                 overrides: Optional[Sequence[tuple[str, str]]] = None) -> ExperimentConfig:
    """Parse key = value lines, apply flag overrides, validate everything.

    Raises ConfigError listing every violation (unknown key, bad value,
    range violation, cross-field conflict), each tagged with its source
    line or flag.
    """
    violations: list[str] = []
    cfg = ExperimentConfig(values={k: s.default for k, s in KEY_SPECS.items()})

    def assign(key: str, raw: str, where: str) -> None:
        spec = KEY_SPECS.get(key)
        if spec is None:
            violations.append(f"{where}: unknown key {key!r}")
            return
        try:
            val = spec.parse(raw.strip())
        except (ValueError, TypeError) as exc:
            violations.append(f"{where}: bad value for {key}: {exc}")
            return
        if spec.choices is not None and val not in spec.choices:
            violations.append(f"{where}: {key} must be one of {', '.join(spec.choices)}")
            return
        if spec.check is not None:
            msg = spec.check(val)
            if msg is not None:
                violations.append(f"{where}: {msg} (got {raw.strip()!r})")
                return
        cfg.values[key] = val
        cfg.explicit.add(key)

    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, raw = body.partition("=")
        if sep == "":
            violations.append(f"line {line_no}: expected 'key = value', got {body!r}")
            continue
        assign(key.strip(), raw, f"line {line_no}")

    for i, (key, raw) in enumerate(overrides or (), start=1):
        assign(key, raw, f"flag --{key}")

    _resolve_scenario(cfg, subcommand, violations)
    _cross_validate(cfg, violations)
    if violations:
        raise ConfigError(violations)
    return cfg


def _resolve_scenario(cfg: ExperimentConfig, subcommand: Optional[str],
                      violations: list[str]) -> None:
    scenario = cfg.values.get("scenario")
    if scenario is None and subcommand is not None:
        if subcommand == "attack":
            kind = cfg.values.get("attack.kind")
            if kind is None:
                violations.append(
                    "scenario: the attack subcommand needs attack.kind or an explicit "
                    f"scenario = attack.<kind> (kinds: {', '.join(ATTACK_KINDS)})")
                return
            scenario = f"attack.{kind}"
        elif subcommand == "workaround":
            kind = cfg.values.get("workaround.variant")
            if kind is None:
                violations.append(
                    "scenario: the workaround subcommand needs workaround.variant or an "
                    "explicit scenario = workaround.<kind>")
                return
            scenario = f"workaround.{kind}"
        else:
            scenario = subcommand
        cfg.values["scenario"] = scenario
    elif scenario is None:
        violations.append("scenario: missing required key 'scenario'")
        return
    elif subcommand is not None:
        base = scenario.split(".", 1)[0]
        if base != subcommand:
            violations.append(
                f"scenario: config says {scenario!r} but the subcommand is {subcommand!r}")
            return
    if cfg.values.get("system.variant") is None:
        diff = cfg.values["scenario"] in ("attack.diff-divergence", "attack.diff-terminal")
        cfg.values["system.variant"] = DIFF_ERROR if diff else CONTROL_LOOP


def _cross_validate(cfg: ExperimentConfig, violations: list[str]) -> None:
    scenario = cfg.values.get("scenario")
    if scenario is None:
        return
    variant = cfg.values["system.variant"]
    if scenario.startswith("attack.controller") or scenario == "falsify-stability":
        if variant != CONTROL_LOOP:
            violations.append(f"scenario {scenario} requires system.variant = {CONTROL_LOOP}")
    if scenario.startswith("attack.diff"):
        if variant != DIFF_ERROR:
            violations.append(f"scenario {scenario} requires system.variant = {DIFF_ERROR}")
    if scenario.startswith("attack.") and cfg.values.get("attack.eta_bar") is None:
        violations.append(f"scenario {scenario} requires attack.eta_bar")
    if scenario in ("attack.controller-terminal", "attack.diff-terminal") \
            and cfg.values.get("attack.epsilon") is None:
        violations.append(f"scenario {scenario} requires attack.epsilon")
    if scenario == "attack.diff-terminal" and cfg.values.get("attack.x0") is None:
        cfg.values["attack.x0"] = (0.0,) * cfg.values["system.n"]
    if scenario == "simulate" and cfg.values.get("sim.x0") is None:
        violations.append("scenario simulate requires sim.x0")
    kind_key = "system.controller" if variant == CONTROL_LOOP else "system.injection"
    if cfg.values[kind_key] == "rational_tvg" and cfg.values.get("system.gains") is None:
        violations.append(f"{kind_key} = rational_tvg requires system.gains")
    if cfg.values.get("disturbance.kind") != "zero":
        bound = cfg.values["disturbance.bound"]
        if cfg.values["disturbance.kind"] == "constant" \
                and abs(cfg.values["disturbance.value"]) > bound:
            violations.append("disturbance.value exceeds disturbance.bound")
        if cfg.values["disturbance.kind"] == "sinusoid" \
                and abs(cfg.values["disturbance.amplitude"]) > bound:
            violations.append("disturbance.amplitude exceeds disturbance.bound")
        if cfg.values["disturbance.kind"] == "piecewise" \
                and cfg.values.get("disturbance.samples") is None:
            violations.append("disturbance.kind = piecewise requires disturbance.samples")


# ---------------------------------------------------------------------------
# model assembly


def build_disturbance(cfg: ExperimentConfig) -> DisturbanceSpec:
    kind = cfg.values["disturbance.kind"]
    if kind == "zero":
        return DisturbanceSpec()
    bound = cfg.values["disturbance.bound"]
    if kind == "constant":
        return DisturbanceSpec(kind="constant", bound=bound,
                               value=cfg.values["disturbance.value"])
    if kind == "sinusoid":
        return DisturbanceSpec(kind="sinusoid", bound=bound,
                               amplitude=cfg.values["disturbance.amplitude"],
                               frequency=cfg.values["disturbance.frequency"],
                               phase=cfg.values["disturbance.phase"])
    samples = tuple((float(t), float(v)) for t, v in cfg.values["disturbance.samples"])
    return DisturbanceSpec(kind="piecewise", bound=bound, samples=samples)


def build_model(cfg: ExperimentConfig) -> SystemModel:
    T = cfg.values["system.T"]
    rho_min = cfg.values["system.rho_min"] or 0.0
    horizon = Horizon(T=T, rho_min=rho_min)
    disturbance = build_disturbance(cfg)
    variant = cfg.values["system.variant"]
    if variant == CONTROL_LOOP:
        kind = cfg.values["system.controller"]
        if kind == "reference":
            if cfg.values["system.T"] != 1.0 and "system.T" in cfg.explicit:
                raise ConfigError(["system.T: the reference controller is defined for T = 1"])
            controller = ControllerSpec.reference()
        elif kind == "zero":
            controller = ControllerSpec.zero(cfg.values["system.n"], T)
        else:
            controller = ControllerSpec.rational(cfg.values["system.gains"], T=T)
        return SystemModel(variant=CONTROL_LOOP, horizon=horizon, controller=controller,
                           disturbance=disturbance)
    kind = cfg.values["system.injection"]
    if kind == "pt_diff2":
        injection = InjectionSpec.prescribed_time_diff(cfg.values["system.ell1"],
                                                       cfg.values["system.ell2"], T=T)
    elif kind == "zero":
        injection = InjectionSpec.zero(cfg.values["system.n"], T)
    else:
        injection = InjectionSpec.rational(cfg.values["system.gains"], T=T)
    return SystemModel(variant=DIFF_ERROR, horizon=horizon, injection=injection,
                       disturbance=disturbance)


def build_options(cfg: ExperimentConfig, grid: Optional[OutputGrid] = None) -> IntegrationOptions:
    return IntegrationOptions(rel_tol=cfg.values["integration.rel_tol"],
                              abs_tol=cfg.values["integration.abs_tol"],
                              max_norm=cfg.values["integration.max_norm"],
                              max_step_fraction=cfg.values["integration.max_step_fraction"],
                              rho_min=cfg.values["integration.rho_min"],
                              output_grid=grid)


# ---------------------------------------------------------------------------
# artifact writers


def config_echo_lines(cfg: ExperimentConfig) -> list[str]:
    """Effective configuration as comment lines; output paths are excluded so
    artifacts stay byte-identical across output locations."""
    lines = []
    for key in sorted(KEY_SPECS):
        if key.startswith("output."):
            continue
        val = cfg.values[key]
        if val is None:
            continue
        if isinstance(val, bool):
            txt = "true" if val else "false"
        elif isinstance(val, float):
            txt = fmt(val)
        elif isinstance(val, tuple):
            if val and isinstance(val[0], tuple):
                txt = "; ".join(",".join(fmt(x) for x in grp) for grp in val)
            else:
                txt = ",".join(fmt(x) for x in val)
        else:
            txt = str(val)
        lines.append(f"# config: {key} = {txt}")
    return lines


def write_trajectory_csv(path: str, traj: Trajectory, cfg: Optional[ExperimentConfig] = None,
                         extra_comments: Sequence[str] = ()) -> None:
    n = traj.n
    eta_cols = traj.etas.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n)] \
        + [f"eta{i + 1}" for i in range(eta_cols)] + ["gain_out"]
    lines = []
    if cfg is not None:
        lines.extend(config_echo_lines(cfg))
    lines.extend(extra_comments)
    lines.append(",".join(header))
    for i in range(len(traj.ts)):
        row = [fmt(traj.ts[i])]
        row += [fmt(v) for v in traj.xs[i]]
        row += [fmt(v) for v in traj.etas[i]]
        row.append(fmt(traj.gains[i]))
        lines.append(",".join(row))
    _write_text(path, "\n".join(lines) + "\n")


def parse_trajectory_csv(path: str) -> dict:
    """Re-read a trajectory CSV; values reproduce the originals bit-exactly."""
    header = None
    rows = []
    comments = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line)
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if header is None:
        raise ValueError(f"no header row in {path}")
    data = np.array(rows, dtype=float)
    n = sum(1 for h in header if h.startswith("x"))
    eta_cols = sum(1 for h in header if h.startswith("eta"))
    return {"header": header, "comments": comments, "ts": data[:, 0],
            "xs": data[:, 1:1 + n], "etas": data[:, 1 + n:1 + n + eta_cols],
            "gains": data[:, -1]}


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_deadline_csv(path: str, report: DeadlineReport, cfg: Optional[ExperimentConfig],
                       shrink: Sequence[tuple[str, tuple[tuple[float, float], ...]]] = ()) -> None:
    lines = config_echo_lines(cfg) if cfg is not None else []
    n = max((len(c.xi) for c in report.cases), default=2)
    lines.append(f"# deadline: rho = {fmt(report.rho)}, tol = {fmt(report.tol)}")
    for label, profile in shrink:
        prof_txt = ", ".join(f"rho={fmt(r)} norm={fmt(v)}" for r, v in profile)
        lines.append(f"# shrink {label}: {prof_txt}")
    for i, c in enumerate(report.cases):
        if c.failure:
            lines.append(f"# case {i} failed: {c.failure}")
    header = ["s"] + [f"xi{i + 1}" for i in range(n)] + ["terminal_norm", "bound", "passed"]
    lines.append(",".join(header))
    for c in report.cases:
        row = [fmt(c.s)] + [fmt(v) for v in c.xi]
        row.append(fmt(c.terminal_norm) if c.terminal_norm is not None else "nan")
        row += [fmt(c.bound), "1" if c.passed else "0"]
        lines.append(",".join(row))
    _write_text(path, "\n".join(lines) + "\n")


def write_scan_csv(path: str, table: GainScanTable, cfg: Optional[ExperimentConfig]) -> None:
    lines = config_echo_lines(cfg) if cfg is not None else []
    lines.append(f"# scan: kind = {table.kind}, delta = {fmt(table.delta)}, "
                 f"monotone = {'1' if table.monotone else '0'}")
    width = max(len(r.arg_state) for r in table.rows)
    header = ["rho", "supremum", "arg_time"] + [f"arg_x{i + 1}" for i in range(width)] \
        + ["arg_channel"]
    lines.append(",".join(header))
    for r in table.rows:
        row = [fmt(r.rho), fmt(r.supremum), fmt(r.arg_time)]
        row += [fmt(v) for v in r.arg_state]
        row += ["nan"] * (width - len(r.arg_state))
        row.append(str(-1 if r.arg_channel is None else r.arg_channel))
        lines.append(",".join(row))
    _write_text(path, "\n".join(lines) + "\n")


def write_workaround_csv(path: str, report: WorkaroundReport,
                         cfg: Optional[ExperimentConfig]) -> None:
    lines = config_echo_lines(cfg) if cfg is not None else []
    lines.append(f"# workaround: variant = {report.variant}, parameter = {fmt(report.parameter)}, "
                 f"noisy = {'1' if report.noisy else '0'}")
    if report.variant == "stop_time":
        if report.slope is not None:
            lines.append(f"# fit: slope = {fmt(report.slope)}, intercept = {fmt(report.intercept)}, "
                         f"r_squared = {fmt(report.r_squared)}")
        n = max(len(c.xi) for c in report.cases)
        for i, c in enumerate(report.cases):
            if c.failure:
                lines.append(f"# case {i} failed: {c.failure}")
        header = [f"xi{i + 1}" for i in range(n)] \
            + [f"residual_x{i + 1}" for i in range(n)] + ["residual_norm"]
        lines.append(",".join(header))
        for c in report.cases:
            row = [fmt(v) for v in c.xi]
            if c.residual_state is None:
                row += ["nan"] * (n + 1)
            else:
                row += [fmt(v) for v in c.residual_state] + [fmt(c.residual_norm)]
            lines.append(",".join(row))
    else:
        if report.no_entry_flags:
            flagged = ", ".join(str(i) for i in report.no_entry_flags)
            lines.append(f"# no entry before T - rho_min for cases: {flagged}")
        n = max(len(c.xi) for c in report.cases)
        for i, c in enumerate(report.cases):
            if c.failure:
                lines.append(f"# case {i} failed: {c.failure}")
        header = [f"xi{i + 1}" for i in range(n)] + ["entered", "entry_time", "gain_at_entry"] \
            + [f"final_x{i + 1}" for i in range(n)]
        lines.append(",".join(header))
        for c in report.cases:
            row = [fmt(v) for v in c.xi]
            row.append("1" if c.entered else "0")
            row.append(fmt(c.entry_time) if c.entry_time is not None else "nan")
            row.append(fmt(c.gain_at_entry) if c.gain_at_entry is not None else "nan")
            if c.final_state is None:
                row += ["nan"] * n
            else:
                row += [fmt(v) for v in c.final_state]
            lines.append(",".join(row))
    _write_text(path, "\n".join(lines) + "\n")


def maybe_write_plot(path: str, traj: Trajectory, enabled: bool) -> Optional[str]:
    """Log-scale plot of the state norm against time, near the deadline."""
    if not enabled:
        return None
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("plot requested but matplotlib is not installed; skipping", file=sys.stderr)
        return None
    matplotlib.rcParams["svg.hashsalt"] = "tvglab"
    norms = np.linalg.norm(traj.xs, axis=1)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.semilogy(traj.ts, np.maximum(norms, 1e-300))
    ax.set_xlabel("t")
    ax.set_ylabel("state norm")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# scenario runners


def _out_path(cfg: ExperimentConfig, out_dir: str, stem: str, ext: str = "csv") -> str:
    return os.path.join(out_dir, f"{cfg.values['output.prefix']}_{stem}.{ext}")


def _summary(path: str, lines: Sequence[str]) -> None:
    _write_text(path, "\n".join(lines) + "\n")


def _run_simulate(cfg: ExperimentConfig, out_dir: str) -> int:
    model = build_model(cfg)
    grid = OutputGrid(kind=cfg.values["sim.grid"], count=cfg.values["sim.grid_count"])
    opts = build_options(cfg, grid=grid)
    T = model.horizon.T
    rho_min = opts.rho_min if opts.rho_min is not None else model.horizon.rho_min
    t_end = cfg.values["sim.t_end"]
    t_end = T - rho_min if t_end is None else t_end
    x0 = np.asarray(cfg.values["sim.x0"], dtype=float)
    traj = integrate(model, None, x0, cfg.values["sim.s"], t_end, opts)
    csv_path = _out_path(cfg, out_dir, "simulate")
    write_trajectory_csv(csv_path, traj, cfg,
                         [f"# termination: {traj.termination.kind} at t = {fmt(traj.termination.t)}"])
    maybe_write_plot(_out_path(cfg, out_dir, "simulate", "svg"), traj, cfg.values["output.plot"])
    final = traj.xs[-1]
    lines = [
        "scenario: simulate",
        f"variant: {model.variant}",
        f"span: [{fmt(traj.t0)}, {fmt(traj.t_last)}]",
        f"termination: {traj.termination.kind}",
        f"final state: {', '.join(fmt(v) for v in final)}",
        f"final norm: {fmt(float(np.linalg.norm(final)))}",
        f"artifact: {os.path.basename(csv_path)}",
    ]
    _summary(_out_path(cfg, out_dir, "simulate_summary", "txt"), lines)
    if not traj.completed:
        print(f"simulate: integration ended early: {traj.termination.kind}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _run_verify_deadline(cfg: ExperimentConfig, out_dir: str) -> int:
    model = build_model(cfg)
    opts = build_options(cfg)
    report = check_absolute_deadline(model, cfg.values["deadline.starts"],
                                     cfg.values["deadline.ics"],
                                     rho=cfg.values["deadline.rho"],
                                     tol=cfg.values["deadline.tol"], opts=opts)
    shrink = []
    rhos = cfg.values["deadline.shrink_rhos"]
    if rhos and report.passed:
        xi = cfg.values["deadline.ics"][0]
        prof = rho_shrink_profile(model, cfg.values["deadline.starts"][0], xi, rhos, opts=opts)
        shrink.append((",".join(fmt(v) for v in xi), prof))
    csv_path = _out_path(cfg, out_dir, "deadline")
    write_deadline_csv(csv_path, report, cfg, shrink)
    lines = ["scenario: verify-deadline",
             f"variant: {model.variant}",
             f"cases: {len(report.cases)}",
             f"passed: {report.passed}"]
    for c in report.cases:
        norm_txt = fmt(c.terminal_norm) if c.terminal_norm is not None else "failed"
        lines.append(f"  s={fmt(c.s)} xi=({', '.join(fmt(v) for v in c.xi)}) "
                     f"terminal={norm_txt} bound={fmt(c.bound)} "
                     f"{'ok' if c.passed else 'FAIL'}")
    _summary(_out_path(cfg, out_dir, "deadline_summary", "txt"), lines)
    return EXIT_OK if report.passed else EXIT_PROPERTY


def _run_attack(cfg: ExperimentConfig, out_dir: str) -> int:
    kind = cfg.scenario.split(".", 1)[1]
    model = build_model(cfg)
    opts = build_options(cfg)
    eta_bar = cfg.values["attack.eta_bar"]
    stem = f"attack_{kind.replace('-', '_')}"
    if kind in ("controller-divergence", "diff-divergence"):
        x0 = cfg.values["attack.x0"]
        outcome = run_divergence_attack(
            model, eta_bar, thresholds=cfg.values["attack.thresholds"],
            targets=cfg.values["attack.targets"], delta=cfg.values["attack.delta"],
            x0=None if x0 is None else np.asarray(x0, dtype=float), opts=opts)
        comments = [f"# attack: kind = {kind}, eta_bar = {fmt(eta_bar)}"]
        if outcome.schedule.delta is not None:
            comments.append(f"# schedule: delta = {fmt(outcome.schedule.delta)}")
        comments.append("# schedule: targets = "
                        + ",".join(fmt(v) for v in outcome.schedule.targets))
        for k_i, t_i in enumerate(outcome.schedule.times):
            comments.append(f"# schedule: switch {k_i} at t = {fmt(t_i)}")
        for thr, t_c in outcome.peaks:
            t_txt = fmt(t_c) if t_c is not None else "never"
            comments.append(f"# peak: threshold {fmt(thr)} first crossed at {t_txt}")
    elif kind == "controller-terminal":
        epsilon = cfg.values["attack.epsilon"]
        if cfg.values["attack.prelude"]:
            x0 = cfg.values["attack.x0"]
            if x0 is None:
                print("attack.prelude requires attack.x0", file=sys.stderr)
                return EXIT_CONFIG
            outcome = run_controller_terminal_attack_with_prelude(
                model, eta_bar, epsilon, np.asarray(x0, dtype=float),
                rho=cfg.values["attack.rho"], opts=opts)
        else:
            outcome = run_controller_terminal_attack(
                model, eta_bar, epsilon, rho=cfg.values["attack.rho"],
                psi_init=cfg.values["attack.psi_init"], s=cfg.values["attack.s"], opts=opts)
        comments = [f"# attack: kind = {kind}, eta_bar = {fmt(eta_bar)}, "
                    f"epsilon = {fmt(epsilon)}",
                    f"# plan: s = {fmt(outcome.plan.s)}",
                    f"# plan: tracking_error = {fmt(outcome.tracking_error)}"]
    else:
        epsilon = cfg.values["attack.epsilon"]
        outcome = run_differentiator_terminal_attack(
            model, eta_bar, epsilon, np.asarray(cfg.values["attack.x0"], dtype=float),
            rho=cfg.values["attack.rho"], tol=cfg.values["attack.tol"], opts=opts)
        comments = [f"# attack: kind = {kind}, eta_bar = {fmt(eta_bar)}, "
                    f"epsilon = {fmt(epsilon)}",
                    f"# ramp: s = {fmt(outcome.ramp.s)}"]
    if outcome.notes:
        comments.append(f"# note: {outcome.notes}")
    csv_path = _out_path(cfg, out_dir, stem)
    write_trajectory_csv(csv_path, outcome.trajectory, cfg, comments)
    maybe_write_plot(_out_path(cfg, out_dir, stem, "svg"), outcome.trajectory,
                     cfg.values["output.plot"])
    lines = [f"scenario: attack.{kind}",
             f"noise bound: {fmt(outcome.noise_bound)}",
             f"verdict: {'pass' if outcome.verdict else 'FAIL'}"]
    if outcome.terminal is not None:
        lines.append(f"terminal state: {', '.join(fmt(v) for v in outcome.terminal)}")
        lines.append(f"terminal norm: {fmt(float(np.linalg.norm(outcome.terminal)))}")
    if outcome.tracking_error is not None:
        lines.append(f"tracking error: {fmt(outcome.tracking_error)}")
    if outcome.peaks is not None:
        for thr, t_c in outcome.peaks:
            lines.append(f"threshold {fmt(thr)}: "
                         + (f"crossed at {fmt(t_c)}" if t_c is not None else "never crossed"))
    if outcome.notes:
        lines.append(f"notes: {outcome.notes}")
    _summary(_out_path(cfg, out_dir, f"{stem}_summary", "txt"), lines)
    return EXIT_OK if outcome.verdict else EXIT_PROPERTY


def _run_gain_scan(cfg: ExperimentConfig, out_dir: str) -> int:
    model = build_model(cfg)
    spec = model.controller if model.variant == CONTROL_LOOP else model.injection
    table = gain_supremum_scan(spec, cfg.values["scan.delta"], cfg.values["scan.rhos"],
                               time_samples=cfg.values["scan.time_samples"])
    csv_path = _out_path(cfg, out_dir, "gain_scan")
    write_scan_csv(csv_path, table, cfg)
    lines = ["scenario: gain-scan",
             f"kind: {table.kind}",
             f"delta: {fmt(table.delta)}",
             f"monotone: {table.monotone}"]
    for r in table.rows:
        ch = "" if r.arg_channel is None else f" channel {r.arg_channel + 1}"
        lines.append(f"  rho={fmt(r.rho)} sup={fmt(r.supremum)}{ch} at t={fmt(r.arg_time)}")
    _summary(_out_path(cfg, out_dir, "gain_scan_summary", "txt"), lines)
    return EXIT_OK if table.monotone else EXIT_PROPERTY


def _run_falsify(cfg: ExperimentConfig, out_dir: str) -> int:
    model = build_model(cfg)
    opts = build_options(cfg)
    witness = falsify_uniform_stability(model, cfg.values["falsify.delta"],
                                        cfg.values["falsify.epsilon"],
                                        eps_prime=cfg.values["falsify.eps_prime"], opts=opts)
    csv_path = _out_path(cfg, out_dir, "falsify")
    comments = [f"# witness: s = {fmt(witness.s)}, delta = {fmt(witness.delta)}, "
                f"epsilon = {fmt(witness.epsilon)}, eps_prime = {fmt(witness.eps_prime)}"]
    if witness.crossing_time is not None:
        comments.append(f"# witness: first crossing at t = {fmt(witness.crossing_time)}")
    comments.append(f"# witness: attained norm {fmt(witness.attained_norm)} "
                    f"at t = {fmt(witness.attained_time)}")
    write_trajectory_csv(csv_path, witness.trajectory, cfg, comments)
    maybe_write_plot(_out_path(cfg, out_dir, "falsify", "svg"), witness.trajectory,
                     cfg.values["output.plot"])
    lines = ["scenario: falsify-stability",
             f"start: x(s) = delta * e1 with s = {fmt(witness.s)}, delta = {fmt(witness.delta)}",
             f"crossed epsilon = {fmt(witness.epsilon)}: {'yes' if witness.crossed else 'NO'}"]
    if witness.crossing_time is not None:
        lines.append(f"first crossing: t = {fmt(witness.crossing_time)}")
    lines.append(f"attained norm: {fmt(witness.attained_norm)} at t = {fmt(witness.attained_time)}")
    _summary(_out_path(cfg, out_dir, "falsify_summary", "txt"), lines)
    return EXIT_OK if witness.crossed else EXIT_PROPERTY


def _run_workaround(cfg: ExperimentConfig, out_dir: str) -> int:
    kind = cfg.scenario.split(".", 1)[1]
    model = build_model(cfg)
    opts = build_options(cfg)
    noise_bound = cfg.values["workaround.noise_eta_bar"]
    noise = None
    if noise_bound is not None:
        noise = lambda: controller_divergence_noise(noise_bound, T=model.horizon.T)
    if kind == "stop-time":
        report = evaluate_stop_time(model, cfg.values["workaround.t_stop"],
                                    cfg.values["workaround.ics"], noise=noise, opts=opts)
        stem = "workaround_stop_time"
    else:
        report = evaluate_deadzone(model, cfg.values["workaround.width"],
                                   cfg.values["workaround.ics"], noise=noise, opts=opts)
        stem = "workaround_deadzone"
    csv_path = _out_path(cfg, out_dir, stem)
    write_workaround_csv(csv_path, report, cfg)
    lines = [f"scenario: workaround.{kind}",
             f"parameter: {fmt(report.parameter)}",
             f"noisy: {report.noisy}"]
    if report.variant == "stop_time":
        for c in report.cases:
            res = "failed" if c.residual_state is None \
                else f"residual norm {fmt(c.residual_norm)}"
            lines.append(f"  xi=({', '.join(fmt(v) for v in c.xi)}): {res}")
        if report.slope is not None:
            lines.append(f"fit: slope = {fmt(report.slope)}, intercept = {fmt(report.intercept)}, "
                         f"R^2 = {fmt(report.r_squared)}")
    else:
        for c in report.cases:
            if c.failure:
                lines.append(f"  xi=({', '.join(fmt(v) for v in c.xi)}): failed ({c.failure})")
            elif not c.entered:
                lines.append(f"  xi=({', '.join(fmt(v) for v in c.xi)}): "
                             "no entry before T - rho_min")
            else:
                lines.append(f"  xi=({', '.join(fmt(v) for v in c.xi)}): entry at "
                             f"{fmt(c.entry_time)}, gain {fmt(c.gain_at_entry)}")
        if report.no_entry_flags:
            lines.append("flagged cases (no entry): "
                         + ", ".join(str(i) for i in report.no_entry_flags))
    _summary(_out_path(cfg, out_dir, f"{stem}_summary", "txt"), lines)
    if any(c.failure for c in report.cases):
        return EXIT_NUMERICAL
    return EXIT_OK


def _run_selftest(cfg: ExperimentConfig, out_dir: str) -> int:
    """Deterministic battery touching every capability; artifacts are
    byte-identical across runs with the same config and seed."""
    from .core import reference_loop, differentiator_error_model, open_loop_chain

    checks: list[tuple[str, bool]] = []
    lines = ["scenario: selftest"]

    report = verify_solver_against_oracle(sample_count=8, tol=1e-6,
                                          seed=cfg.values["seed"])
    checks.append(("oracle equivalence (8 seeded cases, tol 1e-6)", report.passed))
    oracle_lines = ["# oracle check", f"# max_rel_error = {fmt(report.max_rel_error)}",
                    "s,xi1,xi2,max_rel_error"]
    for case in report.cases:
        oracle_lines.append(",".join([fmt(case.s), fmt(case.xi[0]), fmt(case.xi[1]),
                                      fmt(case.max_rel_error)]))
    _write_text(_out_path(cfg, out_dir, "selftest_oracle"), "\n".join(oracle_lines) + "\n")

    grid_s = (0.0, 0.3, 0.6)
    grid_xi = ((1.0, 0.0), (0.0, 1.0), (10.0, -10.0))
    rep_c = check_absolute_deadline(reference_loop(), grid_s, grid_xi)
    write_deadline_csv(_out_path(cfg, out_dir, "selftest_deadline_control"), rep_c, None)
    checks.append(("absolute deadline, control loop", rep_c.passed))
    rep_d = check_absolute_deadline(differentiator_error_model(), grid_s, grid_xi)
    write_deadline_csv(_out_path(cfg, out_dir, "selftest_deadline_diff"), rep_d, None)
    checks.append(("absolute deadline, differentiator error model", rep_d.passed))
    rep_o = check_absolute_deadline(open_loop_chain(), (0.0,), ((0.0, 1.0),))
    checks.append(("open-loop negative control fails the deadline check", not rep_o.passed))

    traj_paths = []
    out_cd = run_divergence_attack(reference_loop(rho_min=1e-9), 1e-2)
    p = _out_path(cfg, out_dir, "selftest_attack_controller_divergence")
    write_trajectory_csv(p, out_cd.trajectory, None,
                         [f"# schedule: switch {k} at t = {fmt(t)}"
                          for k, t in enumerate(out_cd.schedule.times)])
    traj_paths.append((p, 1e-2))
    checks.append(("controller divergence ladder", out_cd.verdict))

    out_dd = run_divergence_attack(differentiator_error_model(rho_min=1e-9), 1e-2)
    p = _out_path(cfg, out_dir, "selftest_attack_diff_divergence")
    write_trajectory_csv(p, out_dd.trajectory, None)
    traj_paths.append((p, 1e-2))
    checks.append(("differentiator divergence ladder", out_dd.verdict))

    out_ct = run_controller_terminal_attack(reference_loop(), 0.1, 0.5)
    p = _out_path(cfg, out_dir, "selftest_attack_controller_terminal")
    write_trajectory_csv(p, out_ct.trajectory, None,
                         [f"# plan: s = {fmt(out_ct.plan.s)}"])
    traj_paths.append((p, 0.1))
    checks.append(("controller terminal-error tracking", out_ct.verdict
                   and out_ct.tracking_error <= 1e-6))

    out_dt = run_differentiator_terminal_attack(differentiator_error_model(), 0.1, 1.0,
                                                (0.0, 0.0))
    p = _out_path(cfg, out_dir, "selftest_attack_diff_terminal")
    write_trajectory_csv(p, out_dt.trajectory, None,
                         [f"# ramp: s = {fmt(out_dt.ramp.s)}"])
    traj_paths.append((p, 0.1))
    checks.append(("differentiator terminal ramp", out_dt.verdict))

    tab_c = gain_supremum_scan(ControllerSpec.reference(), 1.0, (1e-1, 1e-2, 1e-3))
    write_scan_csv(_out_path(cfg, out_dir, "selftest_gain_scan_control"), tab_c, None)
    checks.append(("controller gain scan monotone", tab_c.monotone))
    tab_d = gain_supremum_scan(InjectionSpec.prescribed_time_diff(), 1.0, (1e-1, 1e-2, 1e-3))
    write_scan_csv(_out_path(cfg, out_dir, "selftest_gain_scan_diff"), tab_d, None)
    checks.append(("injection gain scan monotone", tab_d.monotone))

    wit = falsify_uniform_stability(reference_loop(), 1.0, 2.0, 2.5)
    p = _out_path(cfg, out_dir, "selftest_falsify")
    write_trajectory_csv(p, wit.trajectory, None,
                         [f"# witness: s = {fmt(wit.s)}",
                          f"# witness: attained = {fmt(wit.attained_norm)}"])
    checks.append(("uniform-stability falsification", wit.crossed))

    rep_st = evaluate_stop_time(reference_loop(), 0.9,
                                ((1.0, 0.0), (2.0, 0.0), (5.0, 0.0), (10.0, 0.0)))
    write_workaround_csv(_out_path(cfg, out_dir, "selftest_workaround_stop_time"), rep_st, None)
    checks.append(("stop-time residual fit", rep_st.r_squared is not None
                   and rep_st.r_squared >= 0.999))

    rep_dz = evaluate_deadzone(reference_loop(rho_min=1e-6), 1e-2,
                               ((1.0, 0.0), (10.0, 0.0), (100.0, 0.0)))
    write_workaround_csv(_out_path(cfg, out_dir, "selftest_workaround_deadzone"), rep_dz, None)
    entries = [c.entry_time for c in rep_dz.cases]
    gains = [c.gain_at_entry for c in rep_dz.cases]
    checks.append(("deadzone noise-free entries ordered",
                   all(c.entered for c in rep_dz.cases)
                   and all(b > a for a, b in zip(entries, entries[1:]))
                   and all(b > a for a, b in zip(gains, gains[1:]))))

    rep_dzn = evaluate_deadzone(reference_loop(rho_min=1e-6), 1e-2, ((10.0, 0.0),),
                                noise=lambda: controller_divergence_noise(1e-2))
    write_workaround_csv(_out_path(cfg, out_dir, "selftest_workaround_deadzone_noisy"),
                         rep_dzn, None)
    checks.append(("deadzone entry prevented by bounded noise", rep_dzn.no_entry_flags == (0,)))

    round_trip_ok = True
    bound_ok = True
    for path, bound in traj_paths:
        parsed = parse_trajectory_csv(path)
        norms = np.linalg.norm(parsed["etas"], axis=1)
        if float(np.max(norms)) > bound * (1.0 + 1e-12):
            bound_ok = False
        with open(path, "r", encoding="utf-8") as fh:
            original = fh.read()
        rebuilt = []
        for line in original.splitlines():
            if line.startswith("#") or line[0].isalpha() or line.startswith("t,"):
                rebuilt.append(line)
                continue
            rebuilt.append(",".join(fmt(float(tok)) for tok in line.split(",")))
        if "\n".join(rebuilt) + "\n" != original:
            round_trip_ok = False
    checks.append(("trajectory CSVs round-trip bit-exactly", round_trip_ok))
    checks.append(("trajectory CSV noise columns respect bounds", bound_ok))

    all_ok = all(ok for _, ok in checks)
    for name, ok in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'}: {name}")
    lines.append(f"overall: {'PASS' if all_ok else 'FAIL'}")
    _summary(_out_path(cfg, out_dir, "selftest_summary", "txt"), lines)
    return EXIT_OK if all_ok else EXIT_PROPERTY


_RUNNERS = {
    "simulate": _run_simulate,
    "verify-deadline": _run_verify_deadline,
    "gain-scan": _run_gain_scan,
    "falsify-stability": _run_falsify,
    "selftest": _run_selftest,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute the configured scenario; returns the process exit code."""
    out_dir = os.environ.get(OUTPUT_DIR_ENV) or cfg.values["output.dir"]
    scenario = cfg.scenario
    try:
        if scenario.startswith("attack."):
            return _run_attack(cfg, out_dir)
        if scenario.startswith("workaround."):
            return _run_workaround(cfg, out_dir)
        return _RUNNERS[scenario](cfg, out_dir)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, ValueError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _split_flags(argv: Sequence[str]) -> tuple[Optional[str], list[tuple[str, str]], list[str]]:
    """Extract (config_path, key overrides, problems) from flag arguments."""
    config_path = None
    overrides: list[tuple[str, str]] = []
    problems: list[str] = []
    i = 0
    args = list(argv)
    while i < len(args):
        tok = args[i]
        if not tok.startswith("--"):
            problems.append(f"unexpected argument {tok!r} (flags look like --key value)")
            i += 1
            continue
        body = tok[2:]
        key, eq, val = body.partition("=")
        if not eq:
            if i + 1 >= len(args):
                problems.append(f"flag --{key} needs a value")
                break
            val = args[i + 1]
            i += 1
        if key == "config":
            config_path = val
        else:
            overrides.append((key, val))
        i += 1
    return config_path, overrides, problems


USAGE = """usage: tvglab SUBCOMMAND [--config FILE] [--KEY VALUE | --KEY=VALUE ...]

subcommands: simulate | verify-deadline | attack | gain-scan |
             falsify-stability | workaround | selftest

Flags mirror config keys (e.g. --system.T 1.0 --attack.eta_bar 0.01).
attack needs --attack.kind {controller-divergence, controller-terminal,
diff-divergence, diff-terminal}; workaround needs --workaround.variant
{stop-time, deadzone}.  The TVGLAB_OUTPUT_DIR environment variable
overrides output.dir."""


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help", "help"):
        print(USAGE)
        return EXIT_OK
    subcommand = argv[0]
    known = ("simulate", "verify-deadline", "attack", "gain-scan",
             "falsify-stability", "workaround", "selftest")
    if subcommand not in known:
        print(f"unknown subcommand {subcommand!r}", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return EXIT_CONFIG
    config_path, overrides, problems = _split_flags(argv[1:])
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    text = ""
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"config error: cannot read {config_path!r}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        cfg = parse_config(text, subcommand=subcommand, overrides=overrides)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
