"""Acceptance criteria, one named check each.

Run with ``pytest -v tests/test_acceptance.py`` or as a script; either way
one PASS/FAIL line per criterion is printed.
"""
import time

import pytest

from borelsum import checks

CRITERIA = [
    (1, "algebra"),
    (2, "hierarchy"),
    (3, "oracle"),
    (4, "lattice"),
    (5, "stokes"),
    (6, "resurgence"),
    (7, "reality"),
    (8, "ode_residual"),
    (9, "classical_stokes"),
    (10, "asymptoticity"),
]


def line(num, name, res, dt):
    flag = "PASS" if res.passed else "FAIL"
    return f"criterion {num:2d} {name:<17s} {flag}  value={res.value:.3e} tol={res.tol:.1e} ({dt:.1f} s)"


@pytest.mark.parametrize("num,name", CRITERIA, ids=[n for _, n in CRITERIA])
def test_criterion(num, name, capsys):
    t0 = time.perf_counter()
    res = checks.CHECKS[name]()
    dt = time.perf_counter() - t0
    with capsys.disabled():
        print("\n" + line(num, name, res, dt))
    assert res.passed, res.detail


if __name__ == "__main__":
    for num, name in CRITERIA:
        t0 = time.perf_counter()
        res = checks.CHECKS[name]()
        print(line(num, name, res, time.perf_counter() - t0))
