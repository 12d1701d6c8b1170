"""Translation-invariant interactions on Z^d and their finite-volume quantities.

An interaction is stored as a finite list of generator terms. Each term is
an operator on a finite anchor set normalized so that its lexicographically
smallest site is the origin; the full interaction consists of all lattice
translates of the generators. Boundary conditions are open throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels as K
from .classical import StationaryProcess, diagonal_embed, marginal
from .errors import InconsistentMarginals, InvariantViolation, RegionMismatch, SizeCap
from .operators import (
    DensityMatrix,
    HermitianOperator,
    Region,
    _as_site,
    embed,
    operator_from_json,
    operator_to_json,
    partial_trace,
    tensor_all,
)
from .transport import DEFAULT_CONFIG, SolverConfig, partial_dependence, w1_norm

PAULI_Z = np.diag([1.0, -1.0])
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
COMMUTE_TOL = 1e-12
CONSISTENCY_TOL = 1e-9


def _shift(sites, s):
    return tuple(tuple(c + t for c, t in zip(site, s)) for site in sites)


def _neg(s):
    return tuple(-c for c in s)


class Term(NamedTuple):
    sites: tuple  # canonical anchor set, lexicographically first site is the origin
    op: np.ndarray  # matrix in the canonical basis of ``sites``


class Interaction:
    """Finite-range translation-invariant interaction.

    Parameters
    ----------
    d : int
        Lattice dimension.
    q : int
        Local Hilbert-space dimension.
    terms : sequence of (sites, op)
        ``op`` is a :class:`HermitianOperator` or a matrix in the canonical
        basis of ``sites``. Each support is translated so that its smallest
        site sits at the origin; terms whose supports are translates of one
        another are summed.
    """

    def __init__(self, d: int, q: int, terms=()):
        self.d = int(d)
        self.q = int(q)
        merged: dict[tuple, np.ndarray] = {}
        for sites, op in terms:
            if isinstance(op, HermitianOperator):
                region = Region(sites, q)
                if len(op.region) != len(region) or op.q != q:
                    raise InvariantViolation("term operator does not match its sites")
                M = op.matrix
            else:
                M = np.asarray(op, dtype=complex)
                region = Region(sites, q)
            # validates shape and Hermiticity; canonical order handled by Region
            M = HermitianOperator(region, M).matrix
            if region.d != self.d:
                raise InvariantViolation(f"term on {region.sites} is not {self.d}-dimensional")
            anchor = _shift(region.sites, _neg(region.sites[0]))
            if anchor in merged:
                merged[anchor] = merged[anchor] + M
            else:
                merged[anchor] = M
        self.terms = tuple(
            Term(s, merged[s]) for s in sorted(merged) if np.any(merged[s])
        )

    # -- derived data -------------------------------------------------------
    @property
    def range(self) -> int:
        """Largest coordinate extent of a generator support."""
        r = 0
        for t in self.terms:
            arr = np.array(t.sites)
            r = max(r, int((arr.max(axis=0) - arr.min(axis=0)).max()))
        return r

    def neighborhood(self) -> tuple:
        """Union of all translated supports containing the origin."""
        out = set()
        for t in self.terms:
            for s in t.sites:
                out.update(_shift(t.sites, _neg(s)))
        return tuple(sorted(out))

    @property
    def degree(self) -> int:
        return len(self.neighborhood())

    def terms_at_origin(self):
        """Every translate (sites, op) of a generator whose support contains 0."""
        for t in self.terms:
            for s in t.sites:
                yield _shift(t.sites, _neg(s)), t.op

    def is_diagonal(self) -> bool:
        return all(not np.any(t.op - np.diag(np.diag(t.op))) for t in self.terms)

    @property
    def commuting(self) -> bool:
        """True iff every pair of overlapping translated terms commutes."""
        if not hasattr(self, "_commuting"):
            self._commuting = self._check_commuting()
        return self._commuting

    def _check_commuting(self) -> bool:
        for i, a in enumerate(self.terms):
            for b in self.terms[i:]:
                shifts = {
                    tuple(x - y for x, y in zip(sa, sb)) for sa in a.sites for sb in b.sites
                }
                for s in sorted(shifts):
                    bs = _shift(b.sites, s)
                    if a is b and bs == a.sites:
                        continue
                    joint = Region(set(a.sites) | set(bs), self.q)
                    A = embed(HermitianOperator(Region(a.sites, self.q), a.op), joint).matrix
                    B = embed(HermitianOperator(Region(bs, self.q), b.op), joint).matrix
                    scale = max(1.0, K.op_norm(A) * K.op_norm(B))
                    if np.abs(A @ B - B @ A).max() > COMMUTE_TOL * scale:
                        return False
        return True

    def scaled(self, beta: float) -> "Interaction":
        return Interaction(self.d, self.q, [(t.sites, beta * t.op) for t in self.terms])

    def __add__(self, other: "Interaction") -> "Interaction":
        if (self.d, self.q) != (other.d, other.q):
            raise RegionMismatch("interactions live on different lattices")
        return Interaction(self.d, self.q, list(self.terms) + list(other.terms))

    def __repr__(self):
        return f"Interaction(d={self.d}, q={self.q}, supports={[t.sites for t in self.terms]})"

    # -- JSON -----------------------------------------------------------------
    def to_json(self):
        return {
            "d": self.d,
            "q": self.q,
            "terms": [
                {
                    "sites": [list(s) for s in t.sites],
                    "op": operator_to_json(HermitianOperator(Region(t.sites, self.q), t.op)),
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_json(cls, data):
        try:
            d, q = int(data["d"]), int(data["q"])
            terms = []
            for entry in data["terms"]:
                sites = [_as_site(s) for s in entry["sites"]]
                op = operator_from_json(entry["op"])
                terms.append((sites, op.relabel(Region(sites, q))))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvariantViolation(f"malformed interaction JSON: {exc}") from None
        return cls(d, q, terms)


# ---------------------------------------------------------------------------
# factories
# ---------------------------------------------------------------------------

def zero_interaction(d: int = 1, q: int = 2) -> Interaction:
    return Interaction(d, q, [])


def ising_1d(J: float, h: float = 0.0) -> Interaction:
    """Bond J Z0 Z1 and field h Z0; the Hamiltonian is their translate sum."""
    return Interaction(1, 2, [
        ([0, 1], J * np.kron(PAULI_Z, PAULI_Z)),
        ([0], h * PAULI_Z),
    ])


def transverse_ising_1d(J: float, g: float) -> Interaction:
    """Bond J Z0 Z1 and transverse field g X0 (non-commuting for J, g != 0)."""
    return Interaction(1, 2, [
        ([0, 1], J * np.kron(PAULI_Z, PAULI_Z)),
        ([0], g * PAULI_X),
    ])


def product_interaction(op, d: int = 1) -> Interaction:
    """Single-site interaction: the Gibbs state is a product of copies of e^{-op}."""
    op = np.asarray(op)
    return Interaction(d, op.shape[0], [([(0,) * d], op)])


# ---------------------------------------------------------------------------
# local Hamiltonians and Gibbs states
# ---------------------------------------------------------------------------

def _placements(phi: Interaction, box: Region):
    """All translates (sites, op) of generator terms contained in ``box``."""
    for t in phi.terms:
        for b in box.sites:
            sites = _shift(t.sites, b)
            if all(s in box for s in sites):
                yield sites, t.op


def _check_box(phi, box):
    if box.q != phi.q:
        raise RegionMismatch("box and interaction have different q")
    if len(box) and box.d != phi.d:
        raise RegionMismatch("box and interaction have different lattice dimension")


def hamiltonian_diagonal(phi: Interaction, box: Region) -> np.ndarray:
    """Diagonal of H on ``box`` for a diagonal interaction, without dense matrices."""
    _check_box(phi, box)
    if not phi.is_diagonal():
        raise InvariantViolation("interaction is not diagonal")
    n, q = len(box), box.q
    digits = np.indices((q,) * n).reshape(n, -1) if n else np.zeros((0, 1), dtype=int)
    out = np.zeros(q ** n)
    for sites, op in _placements(phi, box):
        idx = np.zeros(q ** n, dtype=int)
        for s in sites:
            idx = idx * q + digits[box.index(s)]
        out += np.diag(op).real[idx]
    return out


def local_hamiltonian(phi: Interaction, box: Region) -> HermitianOperator:
    """Open-boundary Hamiltonian: sum of every translate contained in ``box``."""
    _check_box(phi, box)
    if phi.is_diagonal():
        return HermitianOperator(box, np.diag(hamiltonian_diagonal(phi, box)))
    n, q = len(box), box.q
    H = np.zeros((box.dim, box.dim), dtype=complex)
    for sites, op in _placements(phi, box):
        H += embed(HermitianOperator(Region(sites, q), op), box).matrix
    return HermitianOperator(box, H)


def _boltzmann_weights(w):
    w = -np.asarray(w)
    m = w.max()
    p = np.exp(w - m)
    return p / p.sum(), float(m + np.log(np.exp(w - m).sum()))


def gibbs_local(phi: Interaction, box: Region) -> DensityMatrix:
    """e^{-H}/Tr e^{-H} for the open-boundary Hamiltonian on ``box``."""
    if phi.is_diagonal():
        p, _ = _boltzmann_weights(hamiltonian_diagonal(phi, box))
        return DensityMatrix(box, np.diag(p))
    H = local_hamiltonian(phi, box).matrix
    w, U = np.linalg.eigh(H)
    p, _ = _boltzmann_weights(w)
    return DensityMatrix(box, (U * p) @ U.conj().T)


def log_partition(phi: Interaction, region: Region) -> float:
    """ln Tr e^{-H} on ``region`` (any finite region, open boundary)."""
    if phi.is_diagonal():
        w = hamiltonian_diagonal(phi, region)
    else:
        w = np.linalg.eigvalsh(local_hamiltonian(phi, region).matrix)
    return _boltzmann_weights(w)[1]


def pressure_sequence(phi: Interaction, a_list: Sequence[int]) -> list:
    """Finite-volume pressures ln Tr e^{-H} / |box| on the boxes of half-width a."""
    out = []
    for a in a_list:
        box = Region.box(a, phi.d, phi.q)
        out.append(log_partition(phi, box) / len(box))
    return out


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def phi_r_norm(phi: Interaction, r: float) -> float:
    """Exponentially weighted norm; a generator with support S appears |S| times."""
    if r < 0:
        raise ValueError("r must be non-negative")
    total = 0.0
    for t in phi.terms:
        k = len(t.sites)
        total += k * math.exp(r * (k - 1)) * K.op_norm(t.op)
    return total


def uniform_energy(phi: Interaction) -> float:
    """Specific energy in the maximally mixed state: sum of normalized traces."""
    return float(sum(np.trace(t.op).real / phi.q ** len(t.sites) for t in phi.terms))


def origin_hamiltonian(phi: Interaction, box: Region | None = None) -> HermitianOperator:
    """Sum of the translated terms containing the origin (and fitting in ``box``)."""
    parts = [
        (sites, op)
        for sites, op in phi.terms_at_origin()
        if box is None or all(s in box for s in sites)
    ]
    origin = (0,) * phi.d
    support = {origin}
    for sites, _ in parts:
        support.update(sites)
    region = Region(support, phi.q)
    H = np.zeros((region.dim, region.dim), dtype=complex)
    for sites, op in parts:
        H += embed(HermitianOperator(Region(sites, phi.q), op), region).matrix
    return HermitianOperator(region, H)


def phi_lipschitz(phi: Interaction, cfg: SolverConfig | None = None) -> float:
    """Dependence of the formal Hamiltonian on the origin (certified upper bound).

    Only terms containing the origin matter, since adding an operator that
    does not act on a site leaves the dependence on that site unchanged.
    """
    h = origin_hamiltonian(phi)
    return partial_dependence(h, (0,) * phi.d, cfg).value


def phi_lipschitz_sequence(phi: Interaction, a_list, cfg: SolverConfig | None = None,
                           *, reduce: bool = True) -> list:
    """Dependence of the box Hamiltonian on the origin for each half-width.

    With ``reduce`` the solver runs on the terms containing the origin that
    fit in the box, which gives the same value at a fraction of the size;
    ``reduce=False`` runs it on the full box Hamiltonian.
    """
    origin = (0,) * phi.d
    out = []
    for a in a_list:
        box = Region.box(a, phi.d, phi.q)
        h = origin_hamiltonian(phi, box) if reduce else local_hamiltonian(phi, box)
        out.append(partial_dependence(h, origin, cfg).value)
    return out


def _box_half_width(region: Region):
    if len(region) == 0:
        raise RegionMismatch("empty region is not a box")
    lo = np.min(region.sites, axis=0)
    a = -int(lo[0])
    if a < 1 or region != Region.box(a, region.d, region.q):
        raise RegionMismatch(f"{region} is not a centered box")
    return a


def specific_energy_pairing(rho: DensityMatrix, phi: Interaction) -> float:
    """Tr[rho H_box] / |box| for a marginal on a centered box."""
    _box_half_width(rho.region)
    H = local_hamiltonian(phi, rho.region)
    return H.expect(rho) / len(rho.region)


# ---------------------------------------------------------------------------
# transportation-cost constants at high temperature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TciConstants:
    M: float
    kappa: float
    c: float
    t_star: float
    valid: bool
    t_suggested: float | None = None
    M_suggested: float | None = None

    def to_json(self):
        def num(v):
            return None if v is None or not math.isfinite(v) else v
        return {
            "M": self.M,
            "kappa": self.kappa,
            "c": num(self.c),
            "t_star": num(self.t_star),
            "valid": self.valid,
            "t_suggested": num(self.t_suggested),
            "M_suggested": num(self.M_suggested),
        }


def tci_objective(t, phi_r: float, q: int):
    """The function of t whose infimum over t >= 0 defines M (vectorized)."""
    t = np.asarray(t, dtype=float)
    s = np.sqrt(1.0 + t * t)
    p = phi_r
    return (
        (math.exp(p) + 1.0) * s * p * q ** ((3.0 + s) / 2.0) * np.exp(p * (2.0 + s / 2.0))
        + 2.0 * p * math.exp(2.0 * p)
        + 4.0 * np.exp(-math.pi * t)
    )


def tci_constants(phi_r: float, N: int, q: int, grid=(50.0, 10 ** 6)) -> TciConstants:
    """M, kappa and c of the high-temperature transportation-cost inequality.

    M is minimized on a uniform grid over [0, t_max] and refined by a
    bounded scalar search around the best grid point; the suggested
    closed-form t is also evaluated and the smaller value is kept.
    """
    if phi_r < 0:
        raise ValueError("phi_r must be non-negative")
    if N < 1:
        raise ValueError("N must be >= 1")
    if phi_r == 0.0:
        # the infimum 4 e^{-pi t} -> 0 is approached only as t -> infinity
        M, t_star, t_sug, M_sug = 0.0, math.inf, None, None
    else:
        t_max, steps = grid
        ts = np.linspace(0.0, t_max, int(steps))
        vals = tci_objective(ts, phi_r, q)
        k = int(np.argmin(vals))
        M, t_star = float(vals[k]), float(ts[k])
        h = ts[1] - ts[0] if len(ts) > 1 else t_max
        lo, hi = max(0.0, t_star - h), min(t_max, t_star + h)
        if hi > lo:
            res = minimize_scalar(
                lambda t: float(tci_objective(t, phi_r, q)),
                bounds=(lo, hi), method="bounded", options={"xatol": 1e-10},
            )
            if res.fun < M:
                M, t_star = float(res.fun), float(res.x)
        t_sug = max(0.0, math.log(1.0 / phi_r) / (math.pi + math.log(q) / 2.0))
        M_sug = float(tci_objective(t_sug, phi_r, q))
        if M_sug < M:
            M, t_star = M_sug, t_sug
    kappa = 1.0 if N == 1 else 1.0 - (2 * N - 1) * (N - 1) * M
    valid = kappa > 0
    c = 4.0 * N * N / (1.0 - math.exp(-kappa)) ** 2 if valid else math.inf
    return TciConstants(M, kappa, c, t_star, valid, t_sug, M_sug)


# ---------------------------------------------------------------------------
# marginal families on growing boxes (d = 1)
# ---------------------------------------------------------------------------

def _block_sites(a):
    return Region.box(a, 1).sites


def periodic_approx_marginal(rho_block: DensityMatrix, b: int) -> DensityMatrix:
    """Marginal on the box of half-width ``b`` of the shift-averaged periodic state.

    The periodic state tiles the line with copies of ``rho_block`` on the
    blocks {2ak - a, ..., 2ak + a - 1}; averaging its translates over one
    period gives a translation-invariant state, whose marginal is a uniform
    mixture of tensor products of marginals of ``rho_block``.
    """
    a = _box_half_width(rho_block.region)
    if rho_block.region.d != 1:
        raise InvariantViolation("periodic approximation is implemented for d = 1")
    q = rho_block.q
    target = Region.box(b, 1, q)
    out = np.zeros((target.dim, target.dim), dtype=complex)
    for x in range(-a, a):
        groups: dict[int, list] = {}
        for (s,) in target.sites:
            k = (s - x + a) // (2 * a)
            groups.setdefault(k, []).append(s)
        factors = []
        for k in sorted(groups):
            sites = groups[k]
            offsets = Region([s - x - 2 * a * k for s in sites], q)
            piece = partial_trace(rho_block, offsets)
            factors.append(piece.relabel(Region(sites, q)))
        out += tensor_all(factors).matrix
    return DensityMatrix(target, out / (2 * a))


def check_consistent_family(family: Sequence[DensityMatrix], label: str = "family",
                            tol: float = CONSISTENCY_TOL):
    """Require each box marginal to be the partial trace of the next one."""
    for a, (small, big) in enumerate(zip(family, family[1:]), start=1):
        reduced = partial_trace(big, small.region)
        dev = float(np.abs(reduced.matrix - small.matrix).max())
        if dev > tol:
            raise InconsistentMarginals(
                f"{label}: box {a + 1} does not reduce to box {a} (deviation {dev:.3e})",
                pair=(a, a + 1),
            )


def _check_boxes(family, label):
    for a, rho in enumerate(family, start=1):
        if rho.region != Region.box(a, rho.region.d or 1, rho.q):
            raise RegionMismatch(f"{label}[{a - 1}] is not on the box of half-width {a}")


def w1_specific_certificates(rho_marginals, sigma_marginals, cfg: SolverConfig | None = None,
                             **kw) -> list:
    """Transport certificates between matching box marginals for a = 1, 2, ..."""
    if len(rho_marginals) != len(sigma_marginals):
        raise RegionMismatch("families have different lengths")
    _check_boxes(rho_marginals, "rho")
    _check_boxes(sigma_marginals, "sigma")
    check_consistent_family(rho_marginals, "rho")
    check_consistent_family(sigma_marginals, "sigma")
    return [w1_norm(r - s, cfg, **kw) for r, s in zip(rho_marginals, sigma_marginals)]


def w1_specific_sequence(rho_marginals, sigma_marginals, cfg: SolverConfig | None = None,
                         **kw) -> list:
    """Per-site W1 upper bounds between box marginals of two consistent families."""
    certs = w1_specific_certificates(rho_marginals, sigma_marginals, cfg, **kw)
    return [c.primal_value / len(c.region) for c in certs]


def diagonal_family(proc: StationaryProcess, a_max: int) -> list:
    """Diagonal states carrying the window marginals of a classical process."""
    return [diagonal_embed(marginal(proc, a)) for a in range(1, a_max + 1)]


def product_family(sigma: DensityMatrix, a_max: int) -> list:
    """Box marginals of the translation-invariant product of one-site ``sigma``."""
    q = sigma.q
    out = []
    for a in range(1, a_max + 1):
        box = Region.box(a, 1, q)
        out.append(tensor_all([sigma.relabel(Region([s], q)) for s in box.sites]))
    return out


def gibbs_product_family(phi: Interaction, a_max: int) -> list:
    """Box marginals of the Gibbs state of a single-site interaction."""
    if any(len(t.sites) > 1 for t in phi.terms):
        raise InvariantViolation("only single-site interactions have product Gibbs states")
    one = gibbs_local(phi, Region([(0,) * phi.d], phi.q))
    return product_family(one, a_max)
