"""Arbitrarily small measurement noise forces arbitrarily large excursions.

The noise-free loop converges from everywhere, yet a measurement error of
fixed size eta_bar, chosen adversarially, drives the state across any
threshold before the deadline.  The construction exploits the growing gain:
near t = 1 the loop works hard to cancel what it measures, so a held offset
of size delta drags the true state to distance about delta/(1 - t).

Both systems get their own construction.  For the control loop the noise is
a sign-latched held vector; for the differentiator it is a continuous ramp
whose slope steepens after each target is armed.  Halving eta_bar does not
save the loop; it only pushes the same crossings closer to the deadline.
"""

import numpy as np

from tvglab import (
    IntegrationOptions,
    default_targets,
    differentiator_error_model,
    reference_loop,
    run_divergence_attack,
)


def show(name, outcome):
    print(f"== {name} (noise bound {outcome.noise_bound}) ==")
    for threshold, t_cross in outcome.peaks:
        where = f"t = {t_cross:.10f}" if t_cross is not None else "never"
        print(f"  ||x|| first exceeds {threshold:<5} at {where}")
    print(f"  switches: {len(outcome.schedule.times)}, verdict: "
          f"{'pass' if outcome.verdict else 'FAIL'}")
    if outcome.notes:
        print(f"  note: {outcome.notes}")
    print()


def main():
    for eta_bar in (1e-2, 1e-3):
        out = run_divergence_attack(reference_loop(rho_min=1e-9), eta_bar)
        show(f"control loop, eta_bar = {eta_bar}", out)
        assert out.verdict
        times = [t for _, t in out.peaks]
        assert times == sorted(times)

        out = run_divergence_attack(differentiator_error_model(rho_min=1e-9), eta_bar)
        show(f"differentiator, eta_bar = {eta_bar}", out)
        assert out.verdict

    print("== pushing further: a longer ladder under the same 1e-2 bound ==")
    out = run_divergence_attack(
        reference_loop(rho_min=1e-12), 1e-2,
        targets=default_targets(1e-2, count=12),
        opts=IntegrationOptions(max_norm=1e3))
    peak = float(np.max(np.linalg.norm(out.trajectory.xs, axis=1)))
    print(f"  trajectory escaped past ||x|| = {peak:.1f} "
          f"({out.trajectory.termination.kind} at t = {out.trajectory.t_last:.12f})")
    assert peak >= 1e3
    print("  the same bounded noise crosses every finite threshold")


if __name__ == "__main__":
    main()
