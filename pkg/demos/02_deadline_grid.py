"""Absolute-deadline check over a grid of starts, with a negative control.

Both bundled systems (the controlled chain and the differentiator error
model) satisfy the same property: from any start time s < 1 and any initial
state, the state at 1 - rho is small.  An open-loop chain with zero feedback
fails the identical check, confirming the harness measures the loop and not
the test tolerance.
"""

from tvglab import (
    check_absolute_deadline,
    differentiator_error_model,
    open_loop_chain,
    reference_loop,
)

STARTS = (0.0, 0.3, 0.6)
STATES = ((1.0, 0.0), (0.0, 1.0), (10.0, -10.0))


def show(name, report):
    print(f"== {name}: rho = {report.rho}, tol = {report.tol} ==")
    for case in report.cases:
        verdict = "ok " if case.passed else "FAIL"
        print(f"  {verdict} s = {case.s:.1f}  xi = {case.xi}  "
              f"||x(T - rho)|| = {case.terminal_norm:.6e}  bound {case.bound:.3f}")
    print(f"  -> {'pass' if report.passed else 'FAIL'}")
    print()


def main():
    control = check_absolute_deadline(reference_loop(), STARTS, STATES)
    show("control loop", control)
    assert control.passed

    diff = check_absolute_deadline(differentiator_error_model(), STARTS, STATES)
    show("differentiator error model", diff)
    assert diff.passed

    negative = check_absolute_deadline(open_loop_chain(), (0.0,), ((0.0, 1.0),))
    show("open-loop chain (negative control)", negative)
    assert not negative.passed
    print("the open-loop chain misses the deadline, as it should")


if __name__ == "__main__":
    main()
