"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line (value, tolerance, runtime) that
is printed in the terminal summary, then asserts.  Tolerances and runtime
budgets are pinned below.
"""
import json
import math
import time

import numpy as np
import pytest

from yoccoz.cli import main
from yoccoz.kneading import fibonacci_parameter
from yoccoz.modulus import (chain_annuli, covering_pair, grotzsch_check, halffactor_check,
                            halffactor_family, modulus, nice_constant, round_annulus,
                            sublemma_check, sublemma_family)
from yoccoz.nest import build_nest
from yoccoz.poly import Polynomial, green_function
from yoccoz import rays
from yoccoz.angles import RationalAngle
from yoccoz.puzzle import YoccozPuzzle
from yoccoz.boxmap import RENORMALIZABLE, is_renormalizable

from conftest import AIRPLANE, FIB_BITS, FIB_HORIZON
from oracles import green_chebyshev, joukowski_landing, round_modulus

GREEN_TOL, GREEN_BUDGET = 1e-9, 1.0
LANDING_TOL, LANDING_BUDGET = 1e-6, 5.0
ROUND_TOL = {512: 0.02, 1024: 0.01}
ROUND_BUDGET = 30.0
COVER_TOL, COVER_BUDGET = 0.03, 20.0
HALF_SLACK, HALF_RES, HALF_BUDGET = 1.05, (256, 512), 60.0
SUB_SPREAD, SUB_RES, SUB_BUDGET = 0.10, (256, 512), 120.0
NEST_LEVELS, NEST_BUDGET = 5, 600.0
GROTZSCH_SLACK, GROTZSCH_NTHETA, GROTZSCH_BUDGET = 0.95, (128, 256), 300.0
MU_NTHETA = 256
AIRPLANE_BUDGET = 60.0


@pytest.fixture(scope="module")
def fib_run():
    t = time.perf_counter()
    c = fibonacci_parameter(FIB_BITS)
    pz = YoccozPuzzle(n_pc=FIB_HORIZON, horizon=FIB_HORIZON).fit(Polynomial.quadratic(c))
    rec = build_nest(pz, levels=NEST_LEVELS)
    return pz, rec, time.perf_counter() - t


def _levels_line(rec):
    built = len(rec.levels) - 1
    return f"levels built {built}/{NEST_LEVELS}" + (f" (stopped: {rec.stopped})" if rec.stopped else "")


def test_criterion_01_green_oracle(acceptance):
    rng = np.random.default_rng(1)
    z = rng.uniform(2.5, 10, 100) * np.exp(2j * np.pi * rng.random(100))
    poly = Polynomial.quadratic(-2)
    t = time.perf_counter()
    err = max(abs(green_function(poly, w).value - green_chebyshev(w)) for w in z)
    dt = time.perf_counter() - t
    ok = err < GREEN_TOL and dt < GREEN_BUDGET
    acceptance(1, ok, f"max |G - G_oracle| = {err:.2e} (tol {GREEN_TOL:g}), {dt:.2f}s (budget {GREEN_BUDGET:g}s)")
    assert ok


def test_criterion_02_ray_landing(acceptance):
    rays.landing_point.cache_clear()
    rays._trace_cached.cache_clear()
    poly = Polynomial.quadratic(-2)
    t = time.perf_counter()
    errs = {}
    for theta in ("0", "1/3", "2/3", "1/2"):
        z, ok = rays.landing_point(poly, theta)
        errs[theta] = abs(z - joukowski_landing(float(RationalAngle(theta)))) if ok else math.inf
    dt = time.perf_counter() - t
    worst = max(errs.values())
    ok = worst < LANDING_TOL and dt < LANDING_BUDGET
    acceptance(2, ok, f"max landing error {worst:.2e} (tol {LANDING_TOL:g}), {dt:.2f}s (budget {LANDING_BUDGET:g}s)")
    assert ok


def test_criterion_03_round_annulus(acceptance):
    t = time.perf_counter()
    rows = []
    ok = True
    for q in (2, 4, 10):
        truth = round_modulus(1 / q, 1)
        for n, tol in ROUND_TOL.items():
            rel = abs(modulus(round_annulus(1 / q, 1, n)) - truth) / truth
            rows.append(f"R/r={q}@{n}: {rel:.1e}")
            ok &= rel < tol
    dt = time.perf_counter() - t
    ok &= dt < ROUND_BUDGET
    acceptance(3, ok, f"{', '.join(rows)} (tol 2%@512, 1%@1024), {dt:.1f}s (budget {ROUND_BUDGET:g}s)")
    assert ok


def test_criterion_04_covering_division(acceptance):
    t = time.perf_counter()
    base, up = covering_pair(lambda w: np.abs(w) < 1, lambda w: np.abs(w) <= 0.25, 2, 512)
    mb, mu = modulus(base), modulus(up)
    dt = time.perf_counter() - t
    dev = abs(mu / mb - 0.5) / 0.5
    ok = dev < COVER_TOL and dt < COVER_BUDGET
    acceptance(4, ok, f"mod(pullback)/mod(base) = {mu / mb:.5f}, deviation {dev:.2%} (tol 3%), "
                      f"{dt:.1f}s (budget {COVER_BUDGET:g}s)")
    assert ok


def test_criterion_05_halffactor(acceptance):
    t = time.perf_counter()
    results = {n: [halffactor_check(V, B, HALF_SLACK).passed for V, B in halffactor_family(n)]
               for n in HALF_RES}
    dt = time.perf_counter() - t
    counts = {n: f"{sum(r)}/{len(r)}" for n, r in results.items()}
    ok = all(all(r) and len(r) == 10 for r in results.values()) and dt < HALF_BUDGET
    acceptance(5, ok, f"passing cases {counts} at slack {HALF_SLACK}, {dt:.1f}s (budget {HALF_BUDGET:g}s)")
    assert ok


def test_criterion_06_sublemma(acceptance):
    t = time.perf_counter()
    C = {}
    for name, pred in sublemma_family().items():
        for n in SUB_RES:
            mB = None
            for d in (2, 3, 4):
                rep = sublemma_check(d, pred, n, mod_B=mB)
                mB = rep.values["mod_B"]
                C[name, d, n] = rep.values["C_implied"]
    dt = time.perf_counter() - t
    lo, hi = SUB_RES
    spreads = [abs(C[k, d, hi] - C[k, d, lo]) / abs(C[k, d, hi])
               for k in sublemma_family() for d in (2, 3, 4)]
    finite = all(math.isfinite(v) for v in C.values())
    worst, cmax = max(spreads), max(C.values())
    ok = finite and worst <= SUB_SPREAD and dt < SUB_BUDGET
    acceptance(6, ok, f"max C_implied {cmax:.4f}, worst spread {worst:.2%} (tol 10%), "
                      f"{dt:.1f}s (budget {SUB_BUDGET:g}s)")
    assert ok


def test_criterion_07_nest_integers(acceptance, fib_run, golden):
    _, rec, dt = fib_run
    built = len(rec.levels) - 1
    checks_ok = all(c["pass"] for c in rec.checks)
    golden_ok = rec.golden() == (golden / "fibonacci_nest.csv").read_text()
    ok = built >= NEST_LEVELS and checks_ok and golden_ok and dt < NEST_BUDGET
    acceptance(7, ok, f"{_levels_line(rec)}; p = {rec.p}; integer checks "
                      f"{sum(c['pass'] for c in rec.checks)}/{len(rec.checks)}; golden prefix "
                      f"{'matches' if golden_ok else 'differs'}; {dt:.1f}s (budget {NEST_BUDGET:g}s)")
    assert ok


def test_criterion_08_grotzsch_on_nest(acceptance, fib_run):
    pz, rec, _ = fib_run
    t = time.perf_counter()
    rows, ok = [], True
    for n, chain in enumerate(rec.chains):
        for nt in GROTZSCH_NTHETA:
            rings, enc = chain_annuli(pz, chain, nt)
            rep = grotzsch_check(rings, enc, GROTZSCH_SLACK)
            ok &= rep.passed
            rows.append(f"level {n}@{nt}: sum {rep.values['sum']:.4f} <= total {rep.values['total']:.4f}")
    dt = time.perf_counter() - t
    ok &= len(rec.chains) >= NEST_LEVELS and dt < GROTZSCH_BUDGET
    acceptance(8, ok, f"{'; '.join(rows)}; chains {len(rec.chains)}/{NEST_LEVELS}; "
                      f"{dt:.1f}s (budget {GROTZSCH_BUDGET:g}s)")
    assert ok


def test_criterion_09_mu_floor(acceptance, fib_run, golden):
    pz, rec, _ = fib_run
    ref = json.loads((golden / "mu_floor.json").read_text())
    mus = [nice_constant(pz, p, MU_NTHETA).value for p in rec.pieces]
    ratios = [b / a for a, b in zip(mus[:-1], mus[1:])]
    floor = ref["ratio_floor"] * ref["slack"]
    ok = (len(rec.levels) - 1 >= NEST_LEVELS and min(mus) > 0
          and all(r >= floor for r in ratios))
    acceptance(9, ok, f"mu = {[round(m, 4) for m in mus]}, ratios {[round(r, 3) for r in ratios]} "
                      f"(floor {floor:.3f}); {_levels_line(rec)}")
    assert ok


def test_criterion_10_airplane(acceptance, tmp_path):
    t = time.perf_counter()
    pz = YoccozPuzzle(horizon=3000).fit(Polynomial.quadratic(AIRPLANE))
    (v,) = is_renormalizable(pz)
    code = main(["build-nest", "--c", AIRPLANE, "--horizon", "3000", "--out", str(tmp_path)])
    dt = time.perf_counter() - t
    ok = v.verdict == RENORMALIZABLE and v.period == 3 and code == 4 and dt < AIRPLANE_BUDGET
    acceptance(10, ok, f"verdict {v.verdict}, s = {v.period}, build-nest exit {code}, "
                       f"{dt:.1f}s (budget {AIRPLANE_BUDGET:g}s)")
    assert ok
