"""Dense Hermitian operators on labeled multi-site Hilbert spaces.

Basis convention: the first site of a region (in canonical lexicographic
order) is the most significant digit of the basis index. Every leg
permutation is explicit.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .config import get_dim_cap
from .errors import (
    InvariantViolation,
    NonPositiveDefinite,
    RegionMismatch,
    RegionOverlap,
    SizeCap,
)

HERM_TOL = 1e-12
HERM_ATOL = 1e-14
TRACE_TOL = 1e-10
PSD_TOL = 1e-10


def _as_site(s) -> tuple:
    if isinstance(s, (int, np.integer)):
        return (int(s),)
    return tuple(int(c) for c in s)


class Region:
    """Finite ordered set of lattice sites with local dimension ``q``.

    Sites are integer d-vectors; plain integers are read as 1-D sites.
    The stored order is lexicographic, so regions compare equal iff they
    hold the same sites and the same ``q``.
    """

    __slots__ = ("sites", "q", "_index")

    def __init__(self, sites: Iterable = (), q: int = 2, *, check_cap: bool = True):
        if q < 2:
            raise ValueError("local dimension q must be >= 2")
        raw = [_as_site(s) for s in sites]
        canon = tuple(sorted(raw))
        if len(set(canon)) != len(canon):
            raise InvariantViolation(f"duplicate sites in region: {raw}")
        if len({len(s) for s in canon}) > 1:
            raise InvariantViolation("sites of mixed dimension")
        self.sites = canon
        self.q = int(q)
        if check_cap and self.q ** len(canon) > get_dim_cap():
            raise SizeCap(
                f"dimension {self.q}^{len(canon)} exceeds cap {get_dim_cap()}"
            )
        self._index = {s: k for k, s in enumerate(canon)}

    @classmethod
    def box(cls, a: int | Sequence[int], d: int = 1, q: int = 2) -> "Region":
        """The box {x : -a <= x < a} with 2a sites per axis."""
        if isinstance(a, (int, np.integer)):
            a = (int(a),) * d
        ranges = [range(-ai, ai) for ai in a]
        return cls(_product(ranges), q)

    @classmethod
    def chain(cls, n: int, q: int = 2, start: int = 0) -> "Region":
        return cls([(start + i,) for i in range(n)], q)

    @property
    def d(self):
        return len(self.sites[0]) if self.sites else 0

    @property
    def dim(self):
        return self.q ** len(self.sites)

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, site):
        return _as_site(site) in self._index

    def index(self, site) -> int:
        try:
            return self._index[_as_site(site)]
        except KeyError:
            raise RegionMismatch(f"site {site} not in region {self.sites}") from None

    def __eq__(self, other):
        return (
            isinstance(other, Region)
            and self.sites == other.sites
            and self.q == other.q
        )

    def __hash__(self):
        return hash((self.sites, self.q))

    def __repr__(self):
        return f"Region({list(self.sites)}, q={self.q})"

    def issubset(self, other: "Region") -> bool:
        return self.q == other.q and all(s in other._index for s in self.sites)

    def isdisjoint(self, other: "Region") -> bool:
        return not any(s in other._index for s in self.sites)

    def union(self, other: "Region") -> "Region":
        if self.q != other.q:
            raise RegionMismatch("local dimensions differ")
        return Region(set(self.sites) | set(other.sites), self.q)

    def without(self, sites) -> "Region":
        drop = {_as_site(s) for s in sites}
        return Region([s for s in self.sites if s not in drop], self.q, check_cap=False)

    def translate(self, shift) -> "Region":
        shift = _as_site(shift)
        return Region(
            [tuple(c + t for c, t in zip(s, shift)) for s in self.sites], self.q
        )


def _product(ranges):
    if not ranges:
        return [()]
    out = [()]
    for r in ranges:
        out = [p + (v,) for p in out for v in r]
    return out


def _coerce_region(region, q=None) -> Region:
    if isinstance(region, Region):
        return region
    return Region(region, q if q is not None else 2)


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense self-adjoint operator on ``region``."""

    region: Region
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=complex)
        D = self.region.dim
        if M.shape != (D, D):
            raise InvariantViolation(
                f"matrix shape {M.shape} does not match region dimension {D}"
            )
        if D:
            dev = np.abs(M - M.conj().T).max()
            scale = np.abs(M).max()
            if dev > HERM_TOL * scale + HERM_ATOL:
                raise InvariantViolation(f"operator is not Hermitian (deviation {dev:.3e})")
        M = K.herm(M)
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, region: Region):
        return cls(region, np.eye(region.dim))

    @classmethod
    def zeros(cls, region: Region):
        return cls(region, np.zeros((region.dim, region.dim)))

    @classmethod
    def local(cls, matrix, site, q: int | None = None):
        """Single-site operator ``matrix`` placed on ``site``."""
        matrix = np.asarray(matrix)
        q = q or matrix.shape[0]
        return cls(Region([site], q), matrix)

    @classmethod
    def diagonal(cls, region: Region, diag):
        return cls(region, np.diag(np.asarray(diag, dtype=complex)))

    # -- basic properties -------------------------------------------------
    @property
    def q(self):
        return self.region.q

    @property
    def dim(self):
        return self.region.dim

    @property
    def n_sites(self):
        return len(self.region)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def expect(self, rho: "HermitianOperator") -> float:
        _same_region(self, rho)
        return float(np.vdot(rho.matrix, self.matrix).real)

    def is_diagonal(self) -> bool:
        M = self.matrix
        return not np.any(M - np.diag(np.diag(M)))

    def relabel(self, region: Region) -> "HermitianOperator":
        """Same matrix on a region of equal size; sites map in canonical order."""
        if len(region) != len(self.region) or region.q != self.q:
            raise RegionMismatch("relabel needs a region of identical shape")
        return HermitianOperator(region, self.matrix)

    def with_type(self, cls):
        return cls(self.region, self.matrix)

    # -- arithmetic (always returns plain HermitianOperator) --------------
    def __add__(self, other):
        _same_region(self, other)
        return HermitianOperator(self.region, self.matrix + other.matrix)

    def __sub__(self, other):
        _same_region(self, other)
        return HermitianOperator(self.region, self.matrix - other.matrix)

    def __neg__(self):
        return HermitianOperator(self.region, -self.matrix)

    def __mul__(self, c):
        c = float(c)
        return HermitianOperator(self.region, c * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def allclose(self, other, atol=1e-10) -> bool:
        return self.region == other.region and np.allclose(
            self.matrix, other.matrix, atol=atol, rtol=0
        )

    def to_json(self) -> dict:
        return operator_to_json(self)


class DensityMatrix(HermitianOperator):
    """Positive semidefinite, unit-trace operator."""

    def __post_init__(self):
        super().__post_init__()
        tr = np.trace(self.matrix).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"density matrix trace {tr!r} != 1")
        lo = np.linalg.eigvalsh(self.matrix)[0] if self.dim else 0.0
        if lo < -PSD_TOL:
            raise InvariantViolation(f"density matrix has eigenvalue {lo:.3e} < 0")

    @classmethod
    def maximally_mixed(cls, region: Region):
        return cls(region, np.eye(region.dim) / region.dim)

    @classmethod
    def pure(cls, region: Region, psi):
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(region, np.outer(psi, psi.conj()))

    @classmethod
    def basis_state(cls, region: Region, config: Sequence[int]):
        idx = _config_index(config, region.q)
        M = np.zeros((region.dim, region.dim))
        M[idx, idx] = 1.0
        return cls(region, M)


def _config_index(config, q):
    idx = 0
    for c in config:
        idx = idx * q + int(c)
    return idx


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def _same_region(a, b):
    if a.region != b.region:
        raise RegionMismatch(f"regions differ: {a.region} vs {b.region}")


# ---------------------------------------------------------------------------
# tensor calculus
# ---------------------------------------------------------------------------

def _permute_legs(M, n, q, perm):
    """Reorder tensor legs: new leg k is old leg ``perm[k]``."""
    if list(perm) == list(range(n)):
        return M
    T = M.reshape((q,) * (2 * n))
    T = T.transpose(list(perm) + [n + p for p in perm])
    return T.reshape(q ** n, q ** n)


def tensor(a: HermitianOperator, b: HermitianOperator) -> HermitianOperator:
    """Tensor product on the canonical-ordered union of disjoint regions.

    Returns a :class:`DensityMatrix` when both factors are density matrices.
    """
    if a.q != b.q:
        raise RegionMismatch("local dimensions differ")
    if not a.region.isdisjoint(b.region):
        raise RegionOverlap(f"regions overlap: {a.region} and {b.region}")
    joint = a.region.union(b.region)
    order = list(a.region.sites) + list(b.region.sites)
    perm = [order.index(s) for s in joint.sites]
    M = _permute_legs(np.kron(a.matrix, b.matrix), len(joint), joint.q, perm)
    cls = DensityMatrix if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix) else HermitianOperator
    return cls(joint, M)


def tensor_all(ops: Sequence[HermitianOperator]) -> HermitianOperator:
    out = ops[0]
    for op in ops[1:]:
        out = tensor(out, op)
    return out


def _ptrace_matrix(M, n, q, keep_idx):
    if len(keep_idx) == n:
        return M
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep_idx:
            cols[i] = rows[i]
    out = "".join(rows[i] for i in keep_idx) + "".join(cols[i] for i in keep_idx)
    T = np.einsum("".join(rows) + "".join(cols) + "->" + out, M.reshape((q,) * (2 * n)))
    d = q ** len(keep_idx)
    return T.reshape(d, d)


def partial_trace(a: HermitianOperator, keep) -> HermitianOperator:
    """Trace out every site of ``a`` not in ``keep``."""
    keep = _coerce_region(keep, a.q)
    if not keep.issubset(a.region):
        raise RegionMismatch(f"{keep} is not a subset of {a.region}")
    keep_idx = [a.region.index(s) for s in keep.sites]
    M = _ptrace_matrix(a.matrix, len(a.region), a.q, keep_idx)
    cls = DensityMatrix if isinstance(a, DensityMatrix) else HermitianOperator
    return cls(keep, M)


def trace_out(a: HermitianOperator, sites) -> HermitianOperator:
    """Partial trace over the listed sites."""
    sites = [_as_site(s) for s in sites]
    for s in sites:
        a.region.index(s)
    return partial_trace(a, a.region.without(sites))


def embed(a: HermitianOperator, ambient) -> HermitianOperator:
    """``a`` tensored with the identity on ``ambient`` minus ``a.region``."""
    ambient = _coerce_region(ambient, a.q)
    if not a.region.issubset(ambient):
        raise RegionMismatch(f"{a.region} is not a subset of {ambient}")
    rest = ambient.without(a.region.sites)
    if len(rest) == 0:
        return HermitianOperator(ambient, a.matrix)
    return HermitianOperator(
        ambient, tensor(a, HermitianOperator.identity(rest)).matrix
    )


# ---------------------------------------------------------------------------
# spectral routines
# ---------------------------------------------------------------------------

def eig_herm(a: HermitianOperator | np.ndarray) -> Spectrum:
    M = a.matrix if isinstance(a, HermitianOperator) else np.asarray(a)
    w, U = np.linalg.eigh(M)
    return Spectrum(w, U)


def eigenvalues(a: HermitianOperator) -> np.ndarray:
    return np.linalg.eigvalsh(a.matrix)


def trace_norm(a: HermitianOperator) -> float:
    return K.trace_norm(a.matrix)


def op_norm(a: HermitianOperator) -> float:
    return K.op_norm(a.matrix)


def matrix_exp_herm(a: HermitianOperator) -> HermitianOperator:
    if a.is_diagonal():
        return HermitianOperator(a.region, np.diag(np.exp(np.diag(a.matrix).real)))
    return HermitianOperator(a.region, K.spectral_apply(a.matrix, np.exp))


def matrix_log_pd(a: HermitianOperator) -> HermitianOperator:
    w, U = np.linalg.eigh(a.matrix)
    if w[0] <= 1e-14:
        raise NonPositiveDefinite(f"minimum eigenvalue {w[0]:.3e} <= 1e-14")
    return HermitianOperator(a.region, (U * np.log(w)) @ U.conj().T)


def log_trace_exp(a: HermitianOperator) -> float:
    """ln Tr e^A, evaluated stably from the spectrum."""
    w = np.diag(a.matrix).real if a.is_diagonal() else np.linalg.eigvalsh(a.matrix)
    m = w.max()
    return float(m + np.log(np.exp(w - m).sum()))


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

def _clip_probs(w):
    if w.size and w.min() < -PSD_TOL:
        raise InvariantViolation(f"eigenvalue {w.min():.3e} below -1e-10")
    return np.clip(w, 0.0, None)


def _shannon(p):
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def vn_entropy(rho: DensityMatrix) -> float:
    return _shannon(_clip_probs(eigenvalues(rho)))


def rel_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """S(rho||sigma) in nats; ``math.inf`` when supp(rho) is not inside supp(sigma)."""
    _same_region(rho, sigma)
    s, V = np.linalg.eigh(sigma.matrix)
    s = _clip_probs(s)
    diag = np.einsum("ji,jk,ki->i", V.conj(), rho.matrix, V).real
    kernel = s <= 1e-12
    if kernel.any() and diag[kernel].sum() > 1e-12:
        return math.inf
    cross = float((diag[~kernel] * np.log(s[~kernel])).sum())
    val = -vn_entropy(rho) - cross
    return val if val > 0 else 0.0


def cond_expectation(h: HermitianOperator, x) -> HermitianOperator:
    """Average out site ``x`` against the uniform state: (I/q) (x) Tr_x h."""
    i = h.region.index(x)
    return HermitianOperator(
        h.region, K.site_average(h.matrix, len(h.region), h.q, i)
    )


def variance(rho: DensityMatrix, h: HermitianOperator) -> float:
    _same_region(rho, h)
    m = h.expect(rho)
    H2 = h.matrix @ h.matrix
    v = float(np.vdot(rho.matrix, H2).real) - m * m
    return max(v, 0.0)


# ---------------------------------------------------------------------------
# scalar entropy functions
# ---------------------------------------------------------------------------

def _xlogx(t):
    return 0.0 if t <= 0 else t * math.log(t)


def h2(t: float) -> float:
    """Binary entropy in nats."""
    if t < 0 or t > 1:
        raise ValueError("h2 is defined on [0, 1]")
    return -_xlogx(t) - _xlogx(1.0 - t)


def g(t: float) -> float:
    """(t+1) ln(t+1) - t ln t for t >= 0."""
    if t < 0:
        raise ValueError("g is defined for t >= 0")
    return _xlogx(t + 1.0) - _xlogx(t)


def phi_q(t: float, q: int) -> float:
    """h2(t) + t ln(q^2 - 1); increasing on [0, 1 - 1/q^2]."""
    return h2(t) + t * math.log(q * q - 1)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def operator_to_json(op: HermitianOperator) -> dict:
    return {
        "q": op.q,
        "sites": [list(s) for s in op.region.sites],
        "re": op.matrix.real.tolist(),
        "im": op.matrix.imag.tolist(),
    }


def operator_from_json(data: dict, cls=HermitianOperator) -> HermitianOperator:
    try:
        q = int(data["q"])
        sites = [_as_site(s) for s in data["sites"]]
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvariantViolation(f"malformed operator JSON: {exc}") from None
    # stored order must already be canonical; reorder legs otherwise
    region = Region(sites, q)
    M = re + 1j * im
    if list(region.sites) != sites:
        perm = [sites.index(s) for s in region.sites]
        M = _permute_legs(M, len(sites), q, perm)
    return cls(region, M)
