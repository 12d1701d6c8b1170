"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed again in the terminal summary.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from conftest import Z, record_criterion
from oracles import flow_hamming_w1, tci_grid
from qw1 import bounds as B
from qw1 import suite
from qw1.classical import ClassicalDistribution, diagonal_embed, hamming_w1, is_nondecreasing
from qw1.lattice import (
    StationaryProcess,
    diagonal_family,
    ising_1d,
    log_partition,
    periodic_approx_marginal,
    product_family,
    tci_constants,
)
from qw1.operators import HermitianOperator, Region, h2, partial_trace, trace_norm
from qw1.sampling import random_site_state
from qw1.transport import DEFAULT_CONFIG, w1_norm

TOL = DEFAULT_CONFIG.tol_gap
THREADS = os.cpu_count() or 1


@pytest.fixture(scope="module")
def first_runs():
    """Criteria 1, 9 and 10 once, timed; criterion 12 re-runs them."""
    t0 = time.perf_counter()
    gap = suite.duality_gap_experiment(seed=0)
    elapsed = time.perf_counter() - t0
    return {
        "gap": (gap, elapsed),
        "fekete": suite.fekete_experiment(a_max=3),
        "tci": suite.tci_experiment(),
    }


def _failures(tag, fn, samples, seed=0):
    results = suite.run_check(tag, fn, seed, samples, threads=THREADS)
    bad = [r for r in results if not r.passed]
    worst = min((r.slack for r in results), default=0.0)
    return results, bad, worst


# 1 ---------------------------------------------------------------------------------

def test_criterion_01_duality_gap(first_runs):
    report, elapsed = first_runs["gap"]
    rows = report["rows"]
    counts = {n: sum(r["sites"] == n for r in rows) for n in (2, 3)}
    worst = max(r["relative_gap"] for r in rows)
    ok = (counts == {2: 100, 3: 30} and all(r["converged"] for r in rows)
          and worst <= 1e-4 and elapsed <= 600)
    record_criterion(1, "duality gap", ok, f"max relative gap {worst:.2e}, {elapsed:.1f}s")
    assert ok


# 2 ---------------------------------------------------------------------------------

def test_criterion_02_diagonal_recovery():
    rng = np.random.default_rng(2)
    total = 1000
    worst, flow_dev, count = 0.0, 0.0, 0
    for n in (2, 3):
        R = Region.chain(n)
        for _ in range(50):
            # rational masses so the integer network-flow oracle is exact
            a = rng.multinomial(total, rng.dirichlet(np.ones(R.dim)))
            b = rng.multinomial(total, rng.dirichlet(np.ones(R.dim)))
            mu, nu = ClassicalDistribution(R, a / total), ClassicalDistribution(R, b / total)
            exact = flow_hamming_w1(a, b, n, 2)
            classical = hamming_w1(mu, nu).value
            quantum = w1_norm(diagonal_embed(mu) - diagonal_embed(nu)).primal_value
            flow_dev = max(flow_dev, abs(classical - exact))
            worst = max(worst, abs(quantum - exact))
            count += 1
    ok = count == 100 and worst <= 1e-4 and flow_dev <= 1e-9
    record_criterion(2, "diagonal recovery", ok,
                     f"{count} pairs, max |quantum - classical| {worst:.2e}")
    assert ok


# 3 ---------------------------------------------------------------------------------

def test_criterion_03_structural_checks():
    details, ok = [], True
    for tag, fn in suite.CHECKS["transport"]:
        results, bad, worst = _failures(tag, fn, 500)
        ok &= not bad and len(results) == 500
        details.append(f"{tag} {len(bad)}/{len(results)} failed, min slack {worst:.1e}")
    record_criterion(3, "sandwich, local bound, superadditivity, triangle", ok, "; ".join(details))
    assert ok


# 4 ---------------------------------------------------------------------------------

def test_criterion_04_entropy_continuity():
    results, bad, worst = _failures("entropy_continuity", suite._entropy, 500)
    main = [r for r in results if r.name == "entropy_continuity"]
    ok = len(main) == 500 and not bad and all(r.tolerance_used == 1e-6 for r in main)
    # one qubit: |0><0| against I/2, W1 = 1/2 exactly
    from qw1.operators import DensityMatrix

    rho = DensityMatrix(Region([0]), np.diag([1.0, 0.0]))
    sigma = DensityMatrix.maximally_mixed(Region([0]))
    r = B.check_entropy_continuity(rho, sigma, w1_norm(rho - sigma))
    analytic = h2(0.5) + math.log(3) / 2 - math.log(2)
    ok &= r.passed and round(r.slack, 10) == round(analytic, 10) and analytic > 0
    record_criterion(4, "entropy continuity", ok,
                     f"{len(bad)} failures, min slack {worst:.2e}, one-qubit slack {r.slack:.10f}")
    assert ok


# 5 ---------------------------------------------------------------------------------

def test_criterion_05_marton():
    details, ok = [], True
    for tag, fn in (("marton", suite._marton), ("marton_k", suite._marton_k)):
        results, bad, worst = _failures(tag, fn, 200)
        sizes_ok = all(len(r.extra) >= 1 for r in results)
        ok &= not bad and len(results) == 200 and sizes_ok
        details.append(f"{tag} {len(bad)}/{len(results)} failed, min slack {worst:.1e}")
    record_criterion(5, "Marton transport-cost inequalities", ok, "; ".join(details))
    assert ok


# 6 ---------------------------------------------------------------------------------

def test_criterion_06_concentration():
    results, bad, worst = _failures("concentration", suite._concentration, 200)
    ok = not bad and len(results) == 400
    r = B.check_gaussian_concentration(HermitianOperator(Region([0]), Z),
                                       B.ProductState.uniform(Region([0])))
    scalar = round(r.lhs, 12) == round(math.log(math.cosh(1.0)), 12) and round(r.rhs, 12) == 2.0
    ok &= scalar and r.passed
    record_criterion(6, "Gaussian concentration and Poincare", ok,
                     f"{len(bad)}/{len(results)} failed, ln cosh 1 = {r.lhs:.12f} <= {r.rhs:.12f}")
    assert ok


# 7 ---------------------------------------------------------------------------------

def test_criterion_07_ising_pressure():
    J = 0.5
    phi = ising_1d(J, 0.0)
    limit = math.log(2 * math.cosh(J))
    ns = list(range(4, 13))
    P = [log_partition(phi, Region.chain(n)) / n for n in ns]
    errs = [abs(p - limit) for p in P]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    exact = max(abs(p - (math.log(2) + (n - 1) / n * math.log(math.cosh(J)))) for n, p in zip(ns, P))
    ok = monotone and errs[-1] <= 2e-2 and exact <= 1e-9
    record_criterion(7, "1D Ising pressure", ok,
                     f"|P12 - limit| {errs[-1]:.3e}, open-chain deviation {exact:.1e}")
    assert ok


# 8 ---------------------------------------------------------------------------------

def test_criterion_08_pressure_bound():
    box = Region.box(4)  # eight sites
    results = [B.check_pressure_bound(ising_1d(J, h), box)
               for J in (0.1, 0.5, 1.0) for h in (0.0, 0.3)]
    worst = min(r.slack for r in results)
    ok = len(box) == 8 and worst >= -1e-6 and all(r.passed for r in results)
    record_criterion(8, "pressure bound", ok, f"min slack {worst:.3e}")
    assert ok


# 9 ---------------------------------------------------------------------------------

def test_criterion_09_fekete(first_runs):
    report = first_runs["fekete"]
    ok, worst_match = True, 0.0
    for row in report["rows"]:
        ok &= is_nondecreasing(row["quantum"], 2 * TOL)
        dev = max(abs(a - b) for a, b in zip(row["quantum"], row["classical"]))
        worst_match = max(worst_match, dev)
        ok &= len(row["quantum"]) == 3
    ok &= worst_match <= 2 * TOL
    record_criterion(9, "Fekete monotonicity", ok,
                     f"{len(report['rows'])} pairs, max |quantum - dbar| {worst_match:.1e}")
    assert ok


# 10 --------------------------------------------------------------------------------

def test_criterion_10_tci(first_runs):
    worst = 0.0
    for row in first_runs["tci"]["rows"]:
        M, _ = tci_grid(row["phi_r"], row["N"], row["q"], t_max=50.0, step=50.0 / (10 ** 6 - 1))
        worst = max(worst, abs(row["M"] - M))
    n_points = len(first_runs["tci"]["rows"])
    single = tci_constants(0.02, 1, 2)
    ok = n_points == 18 and worst <= 1e-6 and single.kappa == 1.0
    record_criterion(10, "TCI constants", ok, f"max |dM| {worst:.2e} over {n_points} points")
    assert ok


# 11 --------------------------------------------------------------------------------

def test_criterion_11_periodic_approximation():
    a, b = 3, 1
    bound = 2 * (2 * b) / (2 * a) + 1e-9
    rng = np.random.default_rng(11)
    blocks = {
        "product": product_family(random_site_state(rng, 2), a),
        "markov": diagonal_family(StationaryProcess.markov([[0.85, 0.15], [0.35, 0.65]]), a),
    }
    devs = {}
    for name, fam in blocks.items():
        approx = periodic_approx_marginal(fam[a - 1], b)
        devs[name] = trace_norm(approx - fam[b - 1])
        assert partial_trace(fam[a - 1], fam[b - 1].region).allclose(fam[b - 1])
    ok = all(v <= bound for v in devs.values())
    record_criterion(11, "periodic approximation", ok,
                     ", ".join(f"{k} {v:.3e}" for k, v in devs.items()) + f" <= {bound:.4f}")
    assert ok


# 12 --------------------------------------------------------------------------------

def test_criterion_12_determinism(first_runs):
    def dump(obj):
        return json.dumps(obj, sort_keys=False).encode()

    same = {
        "gap": dump(suite.duality_gap_experiment(seed=0)) == dump(first_runs["gap"][0]),
        "fekete": dump(suite.fekete_experiment(a_max=3)) == dump(first_runs["fekete"]),
        "tci": dump(suite.tci_experiment()) == dump(first_runs["tci"]),
    }
    ok = all(same.values())
    record_criterion(12, "determinism", ok, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}"
                                                      for k, v in same.items()))
    assert ok
