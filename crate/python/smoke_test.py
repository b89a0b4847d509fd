#!/usr/bin/env python3
"""Smoke test for the wcstab extension module.

Builds nothing itself: run `cargo build -p wcstab-python` (or --release)
first, then `python3 python/smoke_test.py`. The script copies the cdylib
next to a scratch import path and exercises the main types and operations.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_wcstab():
    candidates = [
        REPO / "target" / "release" / "libwcstab.so",
        REPO / "target" / "debug" / "libwcstab.so",
        REPO / "target" / "release" / "libwcstab.dylib",
        REPO / "target" / "debug" / "libwcstab.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("no built extension found; run `cargo build -p wcstab-python` first")
    scratch = Path(tempfile.mkdtemp(prefix="wcstab-py-"))
    shutil.copy2(built, scratch / "wcstab.so")
    sys.path.insert(0, str(scratch))
    import wcstab

    return wcstab


def check(name, ok):
    print(f"{'PASS' if ok else 'FAIL'} {name}")
    if not ok:
        sys.exit(1)


def main():
    w = import_wcstab()
    tau = 2.0 * math.pi

    grid = w.Grid(1, [64], [tau])
    check("grid round numbers", grid.node_count == 64 and abs(grid.total_volume - tau) < 1e-14)

    # Balance scenario: (1, 1) is an exact solution with zero mass.
    balance = json.dumps(
        {
            "scenario": "q3_balance",
            "grid": {"dim": 1, "points_per_axis": [64], "lengths": [tau]},
            "model": {"q": 3, "alpha": 0.0, "beta": 0.0, "string_tension": {"constant": 0.5}},
        }
    )
    model = w.Model.from_config(balance)
    cfg = w.Configuration.constants(grid, 1.0, 1.0)
    first, second = w.eom_residual(model, cfg)
    check("balance point solves the equations", max(first.max_abs(), second.max_abs()) < 1e-12)
    check("balance point has zero mass", abs(w.mass_squared(model, cfg)) < 1e-10)
    potential = w.effective_potential(model, cfg, 1.0, 1.0)
    check("potential is finite", math.isfinite(potential))

    report = json.loads(w.stability_report(model, cfg))
    check("report is on shell", report["on_shell"])

    # q7 scenario: the reduced solution embeds with negative mass.
    q7 = json.dumps(
        {
            "scenario": "q7_unstable",
            "grid": {"dim": 1, "points_per_axis": [64], "lengths": [tau]},
            "model": {
                "q": 7,
                "alpha": 1.0,
                "flux": {
                    "1": {
                        "constant": 4.0,
                        "modes": [{"wavevector": [1], "amplitude": 0.2, "phase": 0.0}],
                    }
                },
                "curvature": {"constant": 0.5},
                "string_tension": {"constant": 0.5},
            },
        }
    )
    q7_model = w.Model.from_config(q7)
    sub = w.solve_sub_super(q7_model)
    check("monotone solver converges", sub.residual < 1e-10)
    check("bracket ordered", sub.v_minus <= sub.v_star.min() and sub.v_star.max() <= sub.v_plus)
    embedded = w.Configuration(w.ScalarField.constant(grid, 1.0), sub.v_star)
    check("embedded solution is unstable", w.mass_squared(q7_model, embedded) < 0.0)

    # Newton polish of the embedded solution keeps it a solution.
    solved = w.newton_solve(q7_model, embedded)
    r1, r2 = w.eom_residual(q7_model, solved)
    check("newton accepts the embedded solution", max(r1.max_abs(), r2.max_abs()) < 1e-10)

    # Inverse construction at (1, 1) with alpha = 0, beta = -1: both source
    # combinations are exactly 6.
    flat = w.Configuration.constants(grid, 1.0, 1.0)
    a, b = w.inverse_data_solve(0.0, -1.0, w.ScalarField.constant(grid, 0.0), flat)
    check("inverse data gives sixes", a.min() == 6.0 and a.max() == 6.0 and b.min() == 6.0 and b.max() == 6.0)

    # Field algebra: cosine mode integrates to zero, product halves it.
    mode = w.ScalarField.mode(grid, [1], 0.3, 0.0)
    check("mode integrates to zero", abs(mode.integrate()) < 1e-13)
    check(
        "mode squares to half",
        abs((mode * mode).integrate() - 0.5 * 0.3**2 * tau) < 1e-13,
    )

    diag = json.loads(w.operator_diagnostics(grid, 3))
    check("operator ratio within limit", diag["ratio_within_limit"])

    verify = json.loads(w.verify_config(balance))
    check("identity suite passes", verify["passed"])

    print("all smoke tests passed")


if __name__ == "__main__":
    main()
