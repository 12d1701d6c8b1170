"""Classical optimal transport with Hamming cost and Ornstein d-bar windows.

Distributions over [q]^sites share the basis convention of the operator
module, so :func:`diagonal_embed` is a plain diagonal matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import InvariantViolation, RegionMismatch, SizeCap
from .operators import DensityMatrix, Region, _as_site

SUPPORT_CAP = 4096
MAX_WINDOW_SITES = 12


@dataclass(frozen=True, eq=False)
class ClassicalDistribution:
    region: Region
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.shape != (self.region.dim,):
            raise InvariantViolation(
                f"{p.size} probabilities for a region of dimension {self.region.dim}"
            )
        if p.min(initial=0.0) < 0:
            raise InvariantViolation("negative probability")
        if abs(p.sum() - 1.0) > 1e-12:
            raise InvariantViolation(f"probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def point_mass(cls, region: Region, config):
        p = np.zeros(region.dim)
        p[_index(config, region.q)] = 1.0
        return cls(region, p)

    @classmethod
    def uniform(cls, region: Region):
        return cls(region, np.full(region.dim, 1.0 / region.dim))

    @classmethod
    def product(cls, region: Region, factors):
        """Product of single-site probability vectors in canonical site order."""
        p = np.ones(1)
        for f in factors:
            p = np.multiply.outer(p, np.asarray(f, dtype=float)).ravel()
        return cls(region, p)

    def configurations(self) -> np.ndarray:
        return configurations(len(self.region), self.region.q)

    def marginal(self, keep) -> "ClassicalDistribution":
        keep = keep if isinstance(keep, Region) else Region(keep, self.region.q)
        idx = [self.region.index(s) for s in keep.sites]
        n = len(self.region)
        T = self.probs.reshape((self.region.q,) * n)
        drop = tuple(k for k in range(n) if k not in idx)
        T = T.sum(axis=drop)
        # remaining axes are in increasing index order; reorder to keep's order
        remaining = [k for k in range(n) if k in idx]
        T = np.transpose(T, [remaining.index(k) for k in idx])
        return ClassicalDistribution(keep, np.ascontiguousarray(T).ravel())

    def entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return float(-(p * np.log(p)).sum())

    def to_json(self):
        return {
            "q": self.region.q,
            "sites": [list(s) for s in self.region.sites],
            "probs": self.probs.tolist(),
        }

    @classmethod
    def from_json(cls, data):
        try:
            region = Region([_as_site(s) for s in data["sites"]], int(data["q"]))
            return cls(region, np.asarray(data["probs"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvariantViolation(f"malformed distribution JSON: {exc}") from None


def _index(config, q):
    idx = 0
    for c in config:
        idx = idx * q + int(c)
    return idx


def configurations(n, q) -> np.ndarray:
    """All configurations of n sites as rows, first site most significant."""
    if n == 0:
        return np.zeros((1, 0), dtype=int)
    grids = np.indices((q,) * n).reshape(n, -1).T
    return grids


class HammingResult(NamedTuple):
    value: float
    coupling: sp.coo_matrix  # indexed by full basis indices of mu and nu
    potential: np.ndarray  # 1-Lipschitz Kantorovich potential on all configurations


def _hamming_edges(n, q):
    """Directed edges of the Hamming graph on [q]^n (pairs differing at one site)."""
    conf = configurations(n, q)
    N = q ** n
    weights = q ** np.arange(n - 1, -1, -1)
    tails, heads = [], []
    nodes = np.arange(N)
    for k in range(n):
        for shift in range(1, q):
            c = (conf[:, k] + shift) % q
            tails.append(nodes)
            heads.append(nodes + (c - conf[:, k]) * weights[k])
    return np.concatenate(tails), np.concatenate(heads)


def _decompose(flow, tails, heads, excess, N, eps=1e-14):
    """Split an acyclic flow into source-to-sink paths; returns {(s, t): mass}."""
    out_edges = [[] for _ in range(N)]
    order = np.lexsort((heads, tails))
    for e in order:
        if flow[e] > eps:
            out_edges[tails[e]].append(e)
    flow = flow.copy()
    excess = excess.copy()
    pairs = {}
    for s in range(N):
        while excess[s] > eps:
            path, v, seen = [], s, {s}
            while excess[v] >= -eps or v == s:
                edges = [e for e in out_edges[v] if flow[e] > eps]
                if not edges:
                    break
                e = edges[0]
                path.append(e)
                v = heads[e]
                if v in seen:
                    # cancel a (numerically spurious) cycle and restart the walk
                    cyc = path[[heads[p] for p in path].index(v) + 1:] if v != s else path
                    m = min(flow[p] for p in cyc)
                    for p in cyc:
                        flow[p] -= m
                    path, v, seen = [], s, {s}
                    continue
                seen.add(v)
            if not path:
                break
            mass = min(excess[s], -excess[v] if excess[v] < 0 else np.inf,
                       min(flow[p] for p in path))
            for p in path:
                flow[p] -= mass
            excess[s] -= mass
            excess[v] += mass
            pairs[(s, v)] = pairs.get((s, v), 0.0) + mass
    return pairs


def hamming_w1(mu: ClassicalDistribution, nu: ClassicalDistribution) -> HammingResult:
    """Exact optimal transport cost with Hamming cost between ``mu`` and ``nu``.

    The Hamming distance is the graph distance on the Hamming graph, so the
    transport problem is solved as a min-cost flow along single-site flips.
    Optimality is certified by complementary slackness against the node
    potentials, and the coupling is recovered by decomposing the flow into
    paths (each path costs at least the Hamming distance of its endpoints).
    """
    if mu.region != nu.region:
        raise RegionMismatch(f"regions differ: {mu.region} vs {nu.region}")
    if np.count_nonzero(mu.probs) > SUPPORT_CAP or np.count_nonzero(nu.probs) > SUPPORT_CAP:
        raise SizeCap(f"support larger than {SUPPORT_CAP} points")
    n, q, N = len(mu.region), mu.region.q, mu.region.dim
    stay = np.minimum(mu.probs, nu.probs)
    excess = mu.probs - nu.probs
    if n == 0 or not np.any(excess):
        coupling = sp.coo_matrix((stay, (np.arange(N), np.arange(N))), shape=(N, N))
        return HammingResult(0.0, coupling, np.zeros(N))

    tails, heads = _hamming_edges(n, q)
    E = len(tails)
    cols = np.arange(E)
    B = sp.csr_matrix(
        (np.concatenate([np.ones(E), -np.ones(E)]),
         (np.concatenate([tails, heads]), np.concatenate([cols, cols]))),
        shape=(N, E),
    )
    res = linprog(np.ones(E), A_eq=B, b_eq=excess, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise InvariantViolation(f"transport LP failed: {res.message}")
    flow = np.clip(res.x, 0.0, None)
    u = res.eqlin.marginals
    reduced = 1.0 - (u[tails] - u[heads])
    if reduced.min() < -1e-9 or np.abs(reduced[flow > 1e-12]).max(initial=0.0) > 1e-9:
        raise InvariantViolation("complementary slackness check failed")

    pairs = _decompose(flow, tails, heads, excess, N)
    rows = [np.arange(N)] + [np.array([s for s, _ in pairs])]
    cols_ = [np.arange(N)] + [np.array([t for _, t in pairs])]
    vals = [stay] + [np.array(list(pairs.values()))]
    rows, cols_, vals = (np.concatenate(x) for x in (rows, cols_, vals))
    keep = vals > 0
    coupling = sp.coo_matrix((vals[keep], (rows[keep], cols_[keep])), shape=(N, N))

    conf = configurations(n, q)
    value = float(sum(m * np.count_nonzero(conf[s] != conf[t]) for (s, t), m in pairs.items()))
    if abs(value - res.fun) > 1e-9 * max(1.0, res.fun):
        raise InvariantViolation("flow decomposition does not reproduce the optimal cost")
    # normalize the potential so that it vanishes at the first configuration
    return HammingResult(value, coupling, u - u[0])


def diagonal_embed(mu: ClassicalDistribution) -> DensityMatrix:
    return DensityMatrix(mu.region, np.diag(mu.probs.astype(complex)))


# ---------------------------------------------------------------------------
# stationary processes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StationaryProcess:
    """Stationary i.i.d. or first-order Markov process on [q]^Z."""

    kind: str
    P: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        if self.kind not in ("iid", "markov"):
            raise InvariantViolation(f"unknown process kind {self.kind!r}")
        P = np.array(self.P, dtype=float)
        pi = np.array(self.pi, dtype=float)
        q = len(pi)
        if P.shape != (q, q):
            raise InvariantViolation("transition matrix shape mismatch")
        if P.min() < 0 or np.abs(P.sum(axis=1) - 1).max() > 1e-12:
            raise InvariantViolation("transition matrix is not row-stochastic")
        if pi.min() < 0 or abs(pi.sum() - 1) > 1e-12:
            raise InvariantViolation("initial vector is not a distribution")
        if np.abs(pi @ P - pi).max() > 1e-10:
            raise InvariantViolation("initial vector is not stationary")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)

    @property
    def q(self):
        return len(self.pi)

    @classmethod
    def iid(cls, p):
        p = np.asarray(p, dtype=float)
        return cls("iid", np.tile(p, (len(p), 1)), p)

    @classmethod
    def markov(cls, P, pi=None):
        P = np.asarray(P, dtype=float)
        if pi is None:
            w, V = np.linalg.eig(P.T)
            k = int(np.argmin(np.abs(w - 1)))
            pi = np.real(V[:, k])
            pi = pi / pi.sum()
            pi = np.clip(pi, 0, None)
            pi = pi / pi.sum()
        return cls("markov", P, pi)

    @classmethod
    def constant(cls, symbol, q=2):
        """Deterministic process repeating ``symbol``."""
        P = np.zeros((q, q))
        P[:, symbol] = 1.0
        pi = np.zeros(q)
        pi[symbol] = 1.0
        return cls("markov", P, pi)

    def to_json(self):
        if self.kind == "iid":
            return {"kind": "iid", "pi": self.pi.tolist()}
        return {"kind": "markov", "P": self.P.tolist(), "pi": self.pi.tolist()}

    @classmethod
    def from_json(cls, data):
        try:
            kind = data["kind"]
            if kind == "iid":
                return cls.iid(data.get("pi", data.get("p")))
            return cls.markov(data["P"], data.get("pi"))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvariantViolation(f"malformed process JSON: {exc}") from None


def marginal(proc: StationaryProcess, a: int) -> ClassicalDistribution:
    """Marginal on the window {-a, ..., a-1}."""
    if a < 1:
        raise ValueError("window half-width must be >= 1")
    if 2 * a > MAX_WINDOW_SITES:
        raise SizeCap(f"window of {2 * a} sites exceeds {MAX_WINDOW_SITES}")
    q = proc.q
    T = proc.pi
    for _ in range(2 * a - 1):
        T = T[..., :, None] * proc.P
    return ClassicalDistribution(Region.box(a, 1, q), T.ravel())


def dbar_sequence(mu_proc: StationaryProcess, nu_proc: StationaryProcess, a_max: int) -> list:
    """Per-site Hamming W1 between window marginals for a = 1..a_max."""
    if a_max > MAX_WINDOW_SITES // 2:
        raise SizeCap(f"a_max {a_max} exceeds {MAX_WINDOW_SITES // 2}")
    if mu_proc.q != nu_proc.q:
        raise RegionMismatch("processes have different alphabets")
    out = []
    for a in range(1, a_max + 1):
        res = hamming_w1(marginal(mu_proc, a), marginal(nu_proc, a))
        out.append(res.value / (2 * a))
    return out


def is_nondecreasing(seq, tol) -> bool:
    return all(b >= a - tol for a, b in zip(seq, seq[1:]))
