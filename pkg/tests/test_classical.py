import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain
from oracles import flow_hamming_w1, lp_hamming_w1
from qw1.classical import (
    ClassicalDistribution,
    StationaryProcess,
    configurations,
    dbar_sequence,
    diagonal_embed,
    hamming_w1,
    is_nondecreasing,
    marginal,
)
from qw1.errors import InvariantViolation, RegionMismatch, SizeCap
from qw1.operators import Region, vn_entropy
from qw1.transport import DEFAULT_CONFIG, w1_norm


def dist(region, p):
    return ClassicalDistribution(region, p)


def integer_pair(rng, n, q, total=60):
    """Random distributions with rational masses k/total, for the exact flow oracle."""
    D = q ** n
    a = rng.multinomial(total, np.ones(D) / D)
    b = rng.multinomial(total, np.ones(D) / D)
    return a, b, a / total, b / total


# -- distributions -----------------------------------------------------------------

def test_distribution_invariants():
    with pytest.raises(InvariantViolation):
        dist(chain(1), [0.5, 0.6])
    with pytest.raises(InvariantViolation):
        dist(chain(1), [1.5, -0.5])
    with pytest.raises(InvariantViolation):
        dist(chain(2), [1.0, 0.0])
    mu = ClassicalDistribution.uniform(chain(2))
    with pytest.raises(ValueError):
        mu.probs[0] = 1


def test_configurations_order():
    assert configurations(2, 3).tolist()[:4] == [[0, 0], [0, 1], [0, 2], [1, 0]]
    mu = ClassicalDistribution.point_mass(chain(2, 3), [1, 2])
    assert mu.probs[5] == 1


def test_marginals_of_products(rng):
    f = [rng.dirichlet(np.ones(3)) for _ in range(3)]
    mu = ClassicalDistribution.product(chain(3, 3), f)
    assert np.allclose(mu.marginal([1]).probs, f[1])
    assert np.allclose(mu.marginal([0, 2]).probs, np.outer(f[0], f[2]).ravel())


def test_distribution_json():
    mu = ClassicalDistribution.product(chain(2), [[0.3, 0.7], [0.6, 0.4]])
    back = ClassicalDistribution.from_json(json.loads(json.dumps(mu.to_json())))
    assert back.region == mu.region and np.array_equal(back.probs, mu.probs)
    assert set(mu.to_json()) == {"q", "sites", "probs"}
    with pytest.raises(InvariantViolation):
        ClassicalDistribution.from_json({"q": 2})


# -- Hamming W1 ------------------------------------------------------------------

def test_hamming_examples():
    R = chain(2)
    mu = ClassicalDistribution.uniform(R)
    assert hamming_w1(mu, mu).value == 0
    assert hamming_w1(ClassicalDistribution.point_mass(chain(1), [0]),
                      ClassicalDistribution.point_mass(chain(1), [1])).value == pytest.approx(1)
    assert hamming_w1(ClassicalDistribution.point_mass(R, [0, 0]),
                      ClassicalDistribution.point_mass(R, [1, 1])).value == pytest.approx(2)


def test_single_site_is_total_variation(rng):
    for q in (2, 3, 5):
        p, r = rng.dirichlet(np.ones(q)), rng.dirichlet(np.ones(q))
        got = hamming_w1(dist(chain(1, q), p), dist(chain(1, q), r)).value
        assert got == pytest.approx(0.5 * np.abs(p - r).sum(), abs=1e-12)


@pytest.mark.parametrize("n,q", [(2, 2), (3, 2), (2, 3), (3, 3)])
def test_matches_exact_flow_oracle(rng, n, q):
    for _ in range(3):
        a, b, p, r = integer_pair(rng, n, q)
        R = chain(n, q)
        got = hamming_w1(dist(R, p), dist(R, r)).value
        assert got == pytest.approx(flow_hamming_w1(a, b, n, q), abs=1e-9)


def test_matches_lp_oracle(rng):
    warnings.simplefilter("ignore")
    p, r = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
    got = hamming_w1(dist(chain(3), p), dist(chain(3), r)).value
    assert got == pytest.approx(lp_hamming_w1(p, r, 3, 2), abs=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 2), (3, 2), (2, 3)]))
def test_coupling_and_potential_certify_value(seed, shape):
    rng = np.random.default_rng(seed)
    n, q = shape
    R = chain(n, q)
    # sparse supports exercise the pruning
    p = rng.dirichlet(np.ones(q ** n)) * (rng.random(q ** n) < 0.6)
    r = rng.dirichlet(np.ones(q ** n))
    if p.sum() == 0:
        p[0] = 1
    p = p / p.sum()
    res = hamming_w1(dist(R, p), dist(R, r))
    pi = res.coupling.toarray()
    assert np.abs(pi.sum(axis=1) - p).max() <= 1e-9
    assert np.abs(pi.sum(axis=0) - r).max() <= 1e-9
    conf = configurations(n, q)
    H = (conf[:, None, :] != conf[None, :, :]).sum(axis=2)
    assert (pi * H).sum() == pytest.approx(res.value, abs=1e-9)
    # Kantorovich potential: 1-Lipschitz for Hamming and dual value equals the cost
    f = res.potential
    assert (np.abs(f[:, None] - f[None, :]) <= H + 1e-9).all()
    assert float(f @ (p - r)) == pytest.approx(res.value, abs=1e-9)


def test_product_additivity(rng):
    f = [rng.dirichlet(np.ones(2)) for _ in range(3)]
    g = [rng.dirichlet(np.ones(2)) for _ in range(3)]
    joint = hamming_w1(ClassicalDistribution.product(chain(3), f),
                       ClassicalDistribution.product(chain(3), g)).value
    parts = sum(hamming_w1(dist(chain(1), a), dist(chain(1), b)).value for a, b in zip(f, g))
    assert joint == pytest.approx(parts, abs=1e-10)


def test_region_mismatch_and_cap():
    with pytest.raises(RegionMismatch):
        hamming_w1(ClassicalDistribution.uniform(chain(2)), ClassicalDistribution.uniform(Region([0, 2])))
    with pytest.raises(SizeCap):
        R = Region.chain(13)
        hamming_w1(ClassicalDistribution.uniform(R), ClassicalDistribution.point_mass(R, [0] * 13))


# -- embedding and recovery -------------------------------------------------------

def test_diagonal_embed(rng):
    R = chain(2)
    assert np.allclose(diagonal_embed(ClassicalDistribution.uniform(R)).matrix, np.eye(4) / 4)
    rho = diagonal_embed(ClassicalDistribution.point_mass(R, [1, 0]))
    assert rho.matrix[2, 2] == 1 and np.trace(rho.matrix) == 1
    mu = dist(chain(3), rng.dirichlet(np.ones(8)))
    assert vn_entropy(diagonal_embed(mu)) == pytest.approx(mu.entropy(), abs=1e-12)


@pytest.mark.parametrize("n,q", [(2, 2), (3, 2), (2, 3)])
def test_quantum_matches_classical(rng, n, q):
    R = chain(n, q)
    mu, nu = dist(R, rng.dirichlet(np.ones(R.dim))), dist(R, rng.dirichlet(np.ones(R.dim)))
    classical = hamming_w1(mu, nu).value
    cert = w1_norm(diagonal_embed(mu) - diagonal_embed(nu))
    assert abs(cert.primal_value - classical) <= 2 * DEFAULT_CONFIG.tol_gap * max(1, classical)
    assert cert.dual_value <= classical + 1e-9


# -- processes ---------------------------------------------------------------------

def test_process_invariants():
    with pytest.raises(InvariantViolation):
        StationaryProcess.markov([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(InvariantViolation):
        StationaryProcess.markov([[0.9, 0.1], [0.2, 0.8]], [0.5, 0.5])
    p = StationaryProcess.markov([[0.9, 0.1], [0.2, 0.8]])
    assert np.allclose(p.pi, [2 / 3, 1 / 3])


def test_process_json():
    p = StationaryProcess.markov([[0.9, 0.1], [0.2, 0.8]])
    back = StationaryProcess.from_json(json.loads(json.dumps(p.to_json())))
    assert np.allclose(back.P, p.P) and np.allclose(back.pi, p.pi)
    assert set(p.to_json()) == {"kind", "P", "pi"}
    iid = StationaryProcess.from_json({"kind": "iid", "pi": [0.25, 0.75]})
    assert np.allclose(marginal(iid, 1).probs, np.outer([0.25, 0.75], [0.25, 0.75]).ravel())


def test_marginal_examples():
    assert np.allclose(marginal(StationaryProcess.iid([0.5, 0.5]), 1).probs, 0.25)
    frozen = StationaryProcess.markov(np.eye(2), [1.0, 0.0])
    m = marginal(frozen, 2)
    assert m.probs[0] == 1 and m.region == Region.box(2)
    flip = StationaryProcess.markov([[0.9, 0.1], [0.1, 0.9]])
    assert np.allclose(marginal(flip, 1).probs, [0.45, 0.05, 0.05, 0.45])


def test_marginal_chain_rule(rng):
    P = rng.dirichlet(np.ones(3), size=3)
    proc = StationaryProcess.markov(P)
    m = marginal(proc, 2)
    conf = configurations(4, 3)
    for k, c in enumerate(conf):
        ref = proc.pi[c[0]] * P[c[0], c[1]] * P[c[1], c[2]] * P[c[2], c[3]]
        assert m.probs[k] == pytest.approx(ref, abs=1e-15)


def test_marginal_shift_consistency(rng):
    proc = StationaryProcess.markov(rng.dirichlet(np.ones(2), size=2))
    big, small = marginal(proc, 3), marginal(proc, 2)
    assert np.allclose(big.marginal(small.region).probs, small.probs, atol=1e-14)
    # stationarity: any window of four consecutive sites has the same law
    assert np.allclose(big.marginal(Region([-3, -2, -1, 0])).probs, small.probs, atol=1e-14)


def test_marginal_cap():
    with pytest.raises(SizeCap):
        marginal(StationaryProcess.iid([0.5, 0.5]), 7)
    with pytest.raises(SizeCap):
        dbar_sequence(StationaryProcess.iid([0.5, 0.5]), StationaryProcess.iid([0.5, 0.5]), 7)


def test_dbar_examples():
    a = StationaryProcess.markov([[0.9, 0.1], [0.2, 0.8]])
    assert dbar_sequence(a, a, 3) == [0.0, 0.0, 0.0]
    zeros, ones = StationaryProcess.constant(0), StationaryProcess.constant(1)
    assert np.allclose(dbar_sequence(zeros, ones, 4), 1.0)


def test_dbar_iid_pair_is_constant():
    # product measures: per-site value is the single-site total variation
    seq = dbar_sequence(StationaryProcess.iid([0.5, 0.5]), StationaryProcess.iid([0.25, 0.75]), 4)
    assert seq[0] == pytest.approx(0.25, abs=1e-12)
    assert is_nondecreasing(seq, 1e-9)
    assert np.allclose(seq, 0.25, atol=1e-12)


def test_dbar_first_term_matches_lp():
    warnings.simplefilter("ignore")
    mu = StationaryProcess.markov([[0.7, 0.3], [0.4, 0.6]])
    nu = StationaryProcess.iid([0.3, 0.7])
    seq = dbar_sequence(mu, nu, 2)
    ref = lp_hamming_w1(marginal(mu, 1).probs, marginal(nu, 1).probs, 2, 2) / 2
    assert seq[0] == pytest.approx(ref, abs=1e-8)


def test_is_nondecreasing():
    assert is_nondecreasing([0.1, 0.1 - 1e-10, 0.2], 1e-9)
    assert not is_nondecreasing([0.2, 0.1], 1e-9)
    assert is_nondecreasing([], 0)
