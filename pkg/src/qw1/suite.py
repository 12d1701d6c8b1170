"""Seeded batch runs of the inequality checkers and fixed numerical experiments.

Every instance draws from its own generator seeded by (seed, checker, index),
so reports do not depend on evaluation order or thread count. Reports carry
no timing information; timestamps belong to the run manifest.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bounds as B
from .classical import StationaryProcess, dbar_sequence
from .lattice import (
    diagonal_family,
    gibbs_local,
    ising_1d,
    tci_constants,
    w1_specific_certificates,
)
from .operators import DensityMatrix, Region, partial_trace, tensor
from .sampling import (
    gue_hamiltonian,
    random_site_state,
    random_state,
    random_traceless,
)
from .transport import DEFAULT_CONFIG, SolverConfig, w1_distance, w1_norm

SUITES = ("all", "entropy", "transport", "lattice")
DEFAULT_SIZES = (1, 2, 3)


def _rng(seed, tag, i):
    return np.random.default_rng([int(seed), zlib.crc32(tag.encode()), i])


def _pick(rng, sizes, minimum=1):
    allowed = [s for s in sizes if s >= minimum] or [minimum]
    return int(allowed[int(rng.integers(len(allowed)))])


def _random_product(rng, region):
    return B.ProductState([random_site_state(rng, region.q, s) for s in region.sites])


# ---------------------------------------------------------------------------
# instance generators: (rng, sizes, cfg) -> list of CheckResult
# ---------------------------------------------------------------------------

def _entropy(rng, sizes, cfg):
    R = Region.chain(_pick(rng, sizes))
    rho, sigma = random_state(rng, R), random_state(rng, R)
    cert = w1_distance(rho, sigma, cfg)
    return [
        B.check_entropy_continuity(rho, sigma, cert, tol=1e-6, cfg=cfg),
        B.check_entropy_continuity_old(rho, sigma, cert, tol=1e-6, cfg=cfg),
    ]


def _marton(rng, sizes, cfg):
    R = Region.chain(_pick(rng, sizes))
    sigma = _random_product(rng, R)
    rho = random_state(rng, R)
    cert = w1_distance(rho, sigma.density(), cfg)
    return [B.check_marton(rho, sigma, cert, cfg=cfg)]


def _marton_k(rng, sizes, cfg):
    k = int(rng.integers(2, 4))
    sigma = random_site_state(rng, 2, 0)
    R = Region.chain(k)
    rho = random_state(rng, R)
    sig_k = B.ProductState.copies(sigma, R).density()
    cert = w1_distance(rho, sig_k, cfg)
    return [B.check_marton_k(rho, sigma, cert, cfg=cfg)]


def _concentration(rng, sizes, cfg):
    R = Region.chain(_pick(rng, sizes))
    h = gue_hamiltonian(rng, R)
    omega = _random_product(rng, R)
    return [
        B.check_gaussian_concentration(h, omega, cfg),
        B.check_poincare(h, omega, cfg),
    ]


def _sandwich(rng, sizes, cfg):
    R = Region.chain(_pick(rng, sizes))
    delta = random_traceless(rng, R)
    return [B.check_w1_sandwich(w1_norm(delta, cfg), delta, cfg=cfg)]


def _local(rng, sizes, cfg):
    R = Region.chain(_pick(rng, sizes, 2))
    k = int(rng.integers(1, len(R)))
    sub = Region(sorted(rng.choice(len(R), size=k, replace=False).tolist()), R.q)
    rest = R.without(sub.sites)
    rho = random_state(rng, R)
    tau = random_state(rng, sub)
    delta = rho - tensor(partial_trace(rho, rest), tau)
    return [B.check_local_bound(w1_norm(delta, cfg), delta, sub, cfg=cfg)]


def _superadditivity(rng, sizes, cfg):
    R = Region.chain(_pick(rng, sizes, 2))
    k = int(rng.integers(1, len(R)))
    A = Region(sorted(rng.choice(len(R), size=k, replace=False).tolist()), R.q)
    Bc = R.without(A.sites)
    rho, sigma = random_state(rng, R), random_state(rng, R)
    joint = w1_distance(rho, sigma, cfg)
    parts = [w1_distance(partial_trace(rho, X), partial_trace(sigma, X), cfg) for X in (A, Bc)]
    return [B.check_superadditivity(joint, parts, cfg=cfg)]


def _triangle(rng, sizes, cfg):
    R = Region.chain(_pick(rng, sizes))
    rho, sigma, tau = (random_state(rng, R) for _ in range(3))
    return [B.check_triangle(
        w1_distance(rho, tau, cfg), w1_distance(rho, sigma, cfg), w1_distance(sigma, tau, cfg),
        cfg=cfg,
    )]


def _pressure(rng, sizes, cfg):
    J = float(rng.uniform(-1.0, 1.0))
    h = float(rng.uniform(-0.5, 0.5))
    a = int(rng.integers(1, 5))
    return [B.check_pressure_bound(ising_1d(J, h), Region.box(a), cfg)]


def _random_markov(rng):
    P = rng.dirichlet(np.ones(2), size=2)
    return StationaryProcess.markov(P)


def _specific_entropy(rng, sizes, cfg):
    a_max = 2
    mu = diagonal_family(_random_markov(rng), a_max)
    nu = diagonal_family(StationaryProcess.iid(rng.dirichlet(np.ones(2))), a_max)
    certs = w1_specific_certificates(mu, nu, cfg)
    return [B.check_specific_entropy_continuity(mu, nu, certs, tol=1e-6, cfg=cfg)]


def _gibbs_proxy(rng, sizes, cfg):
    phi = ising_1d(float(rng.uniform(-1, 1)), float(rng.uniform(-0.5, 0.5)))
    R = Region.box(1)
    rho = random_state(rng, R)
    cert = w1_distance(rho, gibbs_local(phi, R), cfg)
    return [B.check_w1_gibbs_proxy(rho, phi, cert, cfg=cfg)]


CHECKS = {
    "entropy": [
        ("entropy_continuity", _entropy),
        ("marton", _marton),
        ("marton_k", _marton_k),
        ("concentration", _concentration),
    ],
    "transport": [
        ("w1_sandwich", _sandwich),
        ("local_bound", _local),
        ("superadditivity", _superadditivity),
        ("triangle", _triangle),
    ],
    "lattice": [
        ("pressure_bound", _pressure),
        ("specific_entropy_continuity", _specific_entropy),
        ("w1_gibbs_proxy", _gibbs_proxy),
    ],
}


def checks_for(suite: str):
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES}")
    if suite == "all":
        return [c for key in ("entropy", "transport", "lattice") for c in CHECKS[key]]
    return CHECKS[suite]


def run_check(tag, fn, seed, samples, sizes=DEFAULT_SIZES, cfg=None, threads=1):
    """All results of one generator over ``samples`` instances, in index order."""
    cfg = cfg or DEFAULT_CONFIG

    def one(i):
        return fn(_rng(seed, tag, i), tuple(sizes), cfg)

    if threads > 1 and samples > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(one, range(samples)))
    else:
        chunks = [one(i) for i in range(samples)]
    return [r for chunk in chunks for r in chunk]


def run_suite(suite="all", seed=0, samples=10, sizes=DEFAULT_SIZES,
              cfg: SolverConfig | None = None, threads=1) -> dict:
    """Deterministic report: results ordered by (checker, sample index)."""
    cfg = cfg or DEFAULT_CONFIG
    results = []
    for tag, fn in checks_for(suite):
        results.extend(run_check(tag, fn, seed, samples, sizes, cfg, threads))
    by_check: dict[str, dict] = {}
    for r in results:
        entry = by_check.setdefault(r.name, {"total": 0, "failed": 0, "min_slack": math.inf})
        entry["total"] += 1
        entry["failed"] += 0 if r.passed else 1
        entry["min_slack"] = min(entry["min_slack"], r.slack)
    failed = sum(e["failed"] for e in by_check.values())
    return {
        "suite": suite,
        "seed": seed,
        "samples": samples,
        "sizes": list(sizes),
        "config": cfg.to_json(),
        "summary": {
            "total": len(results),
            "failed": failed,
            "by_check": {k: by_check[k] for k in sorted(by_check)},
        },
        "results": [r.to_json() for r in results],
    }


def summary_lines(report: dict) -> list:
    lines = []
    for name, e in report["summary"]["by_check"].items():
        verdict = "ok" if e["failed"] == 0 else "FAILED"
        lines.append(f"{name:32s} {e['total']:5d} checked {e['failed']:4d} failed  "
                     f"min slack {e['min_slack']:.3e}  {verdict}")
    s = report["summary"]
    lines.append(f"total {s['total']} checks, {s['failed']} failed")
    return lines


# ---------------------------------------------------------------------------
# fixed experiments
# ---------------------------------------------------------------------------

def duality_gap_experiment(seed=0, counts=((2, 100), (3, 30)), cfg=None) -> dict:
    """W1 certificates for seeded random traceless operators on small chains."""
    cfg = cfg or DEFAULT_CONFIG
    rows = []
    for n, count in counts:
        R = Region.chain(n)
        for i in range(count):
            delta = random_traceless(_rng(seed, f"gap{n}", i), R)
            cert = w1_norm(delta, cfg)
            rows.append({
                "sites": n,
                "index": i,
                "primal": cert.primal_value,
                "dual": cert.dual_value,
                "relative_gap": cert.gap / max(cert.primal_value, 1e-300),
                "iterations": cert.iterations,
                "converged": cert.converged,
            })
    return {"experiment": "duality_gap", "seed": seed, "config": cfg.to_json(), "rows": rows}


FEKETE_PAIRS = (
    ([[0.9, 0.1], [0.2, 0.8]], [0.5, 0.5]),
    ([[0.7, 0.3], [0.4, 0.6]], [0.3, 0.7]),
    ([[0.95, 0.05], [0.05, 0.95]], [0.5, 0.5]),
    ([[0.6, 0.4], [0.1, 0.9]], [0.8, 0.2]),
)


def fekete_experiment(a_max=3, pairs=FEKETE_PAIRS, cfg=None) -> dict:
    """Per-site W1 of diagonal Markov versus i.i.d. families next to the classical values."""
    cfg = cfg or DEFAULT_CONFIG
    rows = []
    for P, p in pairs:
        mu, nu = StationaryProcess.markov(P), StationaryProcess.iid(p)
        certs = w1_specific_certificates(diagonal_family(mu, a_max), diagonal_family(nu, a_max), cfg)
        rows.append({
            "markov": mu.to_json(),
            "iid": nu.to_json(),
            "quantum": [c.primal_value / len(c.region) for c in certs],
            "quantum_lower": [c.dual_value / len(c.region) for c in certs],
            "classical": dbar_sequence(mu, nu, a_max),
        })
    return {"experiment": "fekete", "a_max": a_max, "config": cfg.to_json(), "rows": rows}


TCI_GRID = [(p, N, q) for p in (0.005, 0.01, 0.05) for N in (2, 3, 5) for q in (2, 3)]


def tci_experiment(points=TCI_GRID) -> dict:
    rows = []
    for p, N, q in points:
        rows.append({"phi_r": p, "N": N, "q": q, **tci_constants(p, N, q).to_json()})
    return {"experiment": "tci", "rows": rows}
