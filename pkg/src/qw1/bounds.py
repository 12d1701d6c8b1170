"""Executable inequality checkers.

Each checker evaluates both sides of one inequality and returns a
:class:`CheckResult` with slack ``rhs - lhs``. Where the W1 norm enters,
the side it appears on decides which certificate value is used:

========================  ==========================  ===================
inequality                W1 enters as                value used
========================  ==========================  ===================
entropy continuity        argument of increasing rhs  primal (upper)
old continuity bound      argument of increasing rhs  primal (upper)
Marton / k-fold Marton    lhs                         primal (upper)
sandwich, lower side      lhs of W >= ...             dual (lower)
sandwich, upper side      lhs of W <= ...             primal (upper)
local bound               lhs                         primal (upper)
superadditivity           joint >= sum of parts       joint dual, parts primal
triangle                  lhs primal, rhs duals
w1-Gibbs entropy proxy    argument of increasing rhs  primal (upper)
========================  ==========================  ===================

Dependence values always enter right-hand sides and are certified upper
bounds, so they can only loosen a check.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvariantViolation, NotFullRank, NotProduct, NotTraceless, RegionMismatch
from .lattice import (
    Interaction,
    check_consistent_family,
    gibbs_local,
    local_hamiltonian,
    log_partition,
    phi_lipschitz,
    phi_r_norm,
    uniform_energy,
)
from .operators import (
    DensityMatrix,
    HermitianOperator,
    Region,
    g,
    h2,
    log_trace_exp,
    operator_to_json,
    partial_trace,
    phi_q,
    rel_entropy,
    tensor_all,
    trace_norm,
    variance,
    vn_entropy,
)
from .transport import DEFAULT_CONFIG, SolverConfig, TransportCertificate, partial_dependence


@dataclass
class CheckResult:
    name: str
    lhs: float
    rhs: float
    slack: float
    tolerance_used: float
    inputs_digest: str
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "tolerance": self.tolerance_used,
            "inputs_digest": self.inputs_digest,
            "pass": self.passed,
            "extra": self.extra,
        }


def _feed(h, item):
    if item is None:
        h.update(b"none")
    elif isinstance(item, HermitianOperator):
        h.update(repr(item.region).encode())
        h.update(np.ascontiguousarray(item.matrix).tobytes())
    elif isinstance(item, TransportCertificate):
        h.update(repr((item.primal_value, item.dual_value)).encode())
    elif isinstance(item, ProductState):
        for f in item.factors:
            _feed(h, f)
    elif isinstance(item, Interaction):
        h.update(json.dumps(item.to_json()).encode())
    elif isinstance(item, Region):
        h.update(repr(item).encode())
    elif isinstance(item, (list, tuple)):
        for x in item:
            _feed(h, x)
    else:
        h.update(repr(item).encode())


def inputs_digest(*items) -> str:
    h = hashlib.sha256()
    for item in items:
        _feed(h, item)
    return h.hexdigest()


def default_tolerance(scale: float = 1.0, cfg: SolverConfig | None = None) -> float:
    cfg = cfg or DEFAULT_CONFIG
    return max(1e-9, 3.0 * cfg.tol_gap * max(1.0, scale))


def _result(name, lhs, rhs, tol, digest, **extra):
    lhs, rhs = float(lhs), float(rhs)
    slack = rhs - lhs
    return CheckResult(name, lhs, rhs, slack, float(tol), digest, bool(slack >= -tol), extra)


def _tol(tol, lhs, rhs, cfg):
    if tol is not None:
        return tol
    return default_tolerance(max(abs(lhs), abs(rhs)), cfg)


# ---------------------------------------------------------------------------
# product states
# ---------------------------------------------------------------------------

class ProductState:
    """Explicit tensor product of one-site states, one per site."""

    def __init__(self, factors: Sequence[DensityMatrix]):
        factors = list(factors)
        for f in factors:
            if len(f.region) != 1:
                raise NotProduct("every factor must live on exactly one site")
        self.factors = factors
        self.region = Region([f.region.sites[0] for f in factors], factors[0].q)
        order = {f.region.sites[0]: f for f in factors}
        self._ordered = [order[s] for s in self.region.sites]

    @classmethod
    def uniform(cls, region: Region):
        return cls([DensityMatrix.maximally_mixed(Region([s], region.q)) for s in region.sites])

    @classmethod
    def copies(cls, sigma: DensityMatrix, region: Region):
        return cls([sigma.relabel(Region([s], region.q)) for s in region.sites])

    def density(self) -> DensityMatrix:
        return tensor_all(self._ordered)

    def min_eigenvalue(self) -> float:
        return min(float(np.linalg.eigvalsh(f.matrix)[0]) for f in self.factors)

    def log_matrix(self) -> np.ndarray:
        """ln of the product: a sum of one-site logarithms."""
        if self.min_eigenvalue() <= 1e-12:
            raise NotFullRank("product state is not full rank")
        n, q = len(self.region), self.region.q
        out = np.zeros((q ** n, q ** n), dtype=complex)
        for i, f in enumerate(self._ordered):
            w, U = np.linalg.eigh(f.matrix)
            L = (U * np.log(w)) @ U.conj().T
            out += np.kron(np.kron(np.eye(q ** i), L), np.eye(q ** (n - i - 1)))
        return out


def _as_product(omega) -> ProductState:
    if isinstance(omega, ProductState):
        return omega
    raise NotProduct("pass the product state as a ProductState of one-site factors")


def _same(a, b):
    if a.region != b.region:
        raise RegionMismatch(f"regions differ: {a.region} vs {b.region}")


# ---------------------------------------------------------------------------
# entropy continuity
# ---------------------------------------------------------------------------

def check_entropy_continuity(rho: DensityMatrix, sigma: DensityMatrix,
                             cert: TransportCertificate, tol=None, cfg=None) -> CheckResult:
    """Per-site entropy difference against h2(w) + w ln(q^2 - 1), w = W1/|region|."""
    _same(rho, sigma)
    n, q = len(rho.region), rho.q
    lhs = abs(vn_entropy(rho) - vn_entropy(sigma)) / n
    w_ub = cert.primal_value / n
    w_peak = 1.0 - 1.0 / q ** 2
    if w_ub <= w_peak:
        rhs, regime = phi_q(max(w_ub, 0.0), q), "increasing"
    else:
        # beyond the peak the bound is at least ln q, the largest entropy per site
        rhs, regime = math.log(q), "saturated"
    w_lb = min(max(cert.dual_value / n, 0.0), w_peak)
    return _result(
        "entropy_continuity", lhs, rhs, _tol(tol, lhs, rhs, cfg),
        inputs_digest(rho, sigma, cert), regime=regime, w_upper=w_ub,
        rhs_from_dual=phi_q(w_lb, q),
    )


def check_entropy_continuity_old(rho: DensityMatrix, sigma: DensityMatrix,
                                 cert: TransportCertificate, tol=None, cfg=None) -> CheckResult:
    """|S(rho) - S(sigma)| against g(W) + W ln(q^2 |region|)."""
    _same(rho, sigma)
    n, q = len(rho.region), rho.q
    lhs = abs(vn_entropy(rho) - vn_entropy(sigma))
    W = max(cert.primal_value, 0.0)
    rhs = g(W) + W * math.log(q * q * n)
    w = W / n
    new_rhs = n * (phi_q(w, q) if w <= 1.0 - 1.0 / q ** 2 else math.log(q))
    return _result(
        "entropy_continuity_old", lhs, rhs, _tol(tol, lhs, rhs, cfg),
        inputs_digest(rho, sigma, cert), new_rhs=new_rhs, new_is_tighter=bool(new_rhs <= rhs),
    )


# ---------------------------------------------------------------------------
# concentration
# ---------------------------------------------------------------------------

def _dependences(h, cfg):
    return [partial_dependence(h, s, cfg).value for s in h.region.sites]


def check_gaussian_concentration(h: HermitianOperator, omega, cfg=None, tol=None) -> CheckResult:
    """ln Tr exp(H + ln omega) against Tr[omega H] + sum of squared dependences / 2."""
    omega = _as_product(omega)
    if omega.region != h.region:
        raise RegionMismatch("operator and product state live on different regions")
    logw = omega.log_matrix()
    lhs = log_trace_exp(HermitianOperator(h.region, h.matrix + logw))
    deps = _dependences(h, cfg)
    mean = h.expect(omega.density())
    rhs = mean + 0.5 * sum(d * d for d in deps)
    return _result(
        "gaussian_concentration", lhs, rhs, _tol(tol, lhs, rhs, cfg),
        inputs_digest(h, omega), dependences=deps,
    )


def check_poincare(h: HermitianOperator, omega, cfg=None, tol=None) -> CheckResult:
    """Var_omega H against the sum of squared dependences."""
    omega = _as_product(omega)
    if omega.region != h.region:
        raise RegionMismatch("operator and product state live on different regions")
    lhs = variance(omega.density(), h)
    deps = _dependences(h, cfg)
    rhs = sum(d * d for d in deps)
    return _result(
        "poincare", lhs, rhs, _tol(tol, lhs, rhs, cfg), inputs_digest(h, omega),
        dependences=deps,
    )


def check_poincare_volume(phi: Interaction, box: Region, omega=None, cfg=None, tol=None) -> CheckResult:
    """Variance per site of the box Hamiltonian against the mean squared dependence.

    The infinite-volume Lipschitz constant squared is reported alongside,
    since the mean squared dependence converges to it as the box grows.
    """
    omega = omega or ProductState.uniform(box)
    H = local_hamiltonian(phi, box)
    n = len(box)
    lhs = variance(_as_product(omega).density(), H) / n
    deps = _dependences(H, cfg)
    rhs = sum(d * d for d in deps) / n
    lip = phi_lipschitz(phi, cfg)
    return _result(
        "poincare_volume", lhs, rhs, _tol(tol, lhs, rhs, cfg),
        inputs_digest(phi, box, omega), lipschitz_squared=lip * lip,
    )


# ---------------------------------------------------------------------------
# transportation-cost inequalities
# ---------------------------------------------------------------------------

def check_marton(rho: DensityMatrix, sigma, cert: TransportCertificate, tol=None, cfg=None) -> CheckResult:
    """W1^2 against (|region|/2) S(rho||sigma) for a product ``sigma``."""
    sigma = _as_product(sigma)
    sig = sigma.density()
    _same(rho, sig)
    n = len(rho.region)
    lhs = cert.primal_value ** 2
    rhs = 0.5 * n * rel_entropy(rho, sig)
    return _result(
        "marton", lhs, rhs, _tol(tol, lhs, rhs if math.isfinite(rhs) else lhs, cfg),
        inputs_digest(rho, sigma, cert), lhs_from_dual=max(cert.dual_value, 0.0) ** 2,
    )


def check_marton_k(rho_k: DensityMatrix, sigma: DensityMatrix, cert: TransportCertificate,
                   tol=None, cfg=None) -> CheckResult:
    """W1(rho, sigma^k)^2 against 2 k |block|^2 S(rho||sigma^k).

    The region of ``rho_k`` is split into consecutive blocks of the size of
    ``sigma``'s region (in canonical order); each block is one copy.
    """
    m = len(sigma.region)
    N = len(rho_k.region)
    if N % m:
        raise RegionMismatch("region size is not a multiple of the block size")
    k = N // m
    q = sigma.q
    sites = rho_k.region.sites
    copies = [sigma.relabel(Region(sites[i * m:(i + 1) * m], q)) for i in range(k)]
    sig_k = tensor_all(copies)
    lhs = cert.primal_value ** 2
    rhs = 2.0 * k * m * m * rel_entropy(rho_k, sig_k)
    return _result(
        "marton_k", lhs, rhs, _tol(tol, lhs, rhs if math.isfinite(rhs) else lhs, cfg),
        inputs_digest(rho_k, sigma, cert), k=k, lhs_from_dual=max(cert.dual_value, 0.0) ** 2,
    )


# ---------------------------------------------------------------------------
# structural properties of the W1 norm
# ---------------------------------------------------------------------------

def check_w1_sandwich(cert: TransportCertificate, delta: HermitianOperator, tol=None, cfg=None) -> CheckResult:
    """Half the trace norm <= W1 <= (|region|/2) trace norm; reports the tighter side."""
    t1 = trace_norm(delta)
    n = len(delta.region)
    lower = (0.5 * t1, cert.dual_value)  # (lhs, rhs) of 0.5||D||_1 <= W
    upper = (cert.primal_value, 0.5 * n * t1)
    s_lo, s_up = lower[1] - lower[0], upper[1] - upper[0]
    lhs, rhs = lower if s_lo <= s_up else upper
    return _result(
        "w1_sandwich", lhs, rhs, _tol(tol, 0.5 * n * t1, 0.0, cfg), inputs_digest(delta, cert),
        lower_slack=s_lo, upper_slack=s_up,
    )


def check_local_bound(cert: TransportCertificate, delta: HermitianOperator, sub_region,
                      tol=None, cfg=None) -> CheckResult:
    """W1 <= (q^2-1)/q^2 |sub| ||D||_1 when tracing out ``sub`` annihilates D."""
    q = delta.q
    sub = sub_region if isinstance(sub_region, Region) else Region(sub_region, q)
    if not sub.issubset(delta.region):
        raise RegionMismatch(f"{sub} is not inside {delta.region}")
    rest = delta.region.without(sub.sites)
    reduced = partial_trace(delta, rest)
    if np.abs(reduced.matrix).max(initial=0.0) > 1e-9:
        raise NotTraceless("the operator does not vanish when the sub-region is traced out")
    lhs = cert.primal_value
    rhs = (q * q - 1) / (q * q) * len(sub) * trace_norm(delta)
    return _result(
        "local_bound", lhs, rhs, _tol(tol, lhs, rhs, cfg), inputs_digest(delta, sub, cert),
    )


def check_superadditivity(joint: TransportCertificate, parts: Sequence[TransportCertificate],
                          tol=None, cfg=None) -> CheckResult:
    """W1 of the joint difference >= sum of W1 of its marginals on disjoint regions."""
    seen = set()
    for p in parts:
        if not p.region.issubset(joint.region):
            raise RegionMismatch(f"{p.region} is not inside {joint.region}")
        if seen & set(p.region.sites):
            raise RegionMismatch("marginal regions overlap")
        seen |= set(p.region.sites)
    lhs = sum(p.primal_value for p in parts)
    rhs = joint.dual_value
    return _result(
        "superadditivity", lhs, rhs, _tol(tol, lhs, rhs, cfg),
        inputs_digest(joint, list(parts)),
    )


def check_triangle(c_rt: TransportCertificate, c_rs: TransportCertificate,
                   c_st: TransportCertificate, tol=None, cfg=None) -> CheckResult:
    """W1(rho, tau) <= W1(rho, sigma) + W1(sigma, tau)."""
    lhs = c_rt.primal_value
    rhs = c_rs.dual_value + c_st.dual_value
    return _result(
        "triangle", lhs, rhs, _tol(tol, lhs, rhs, cfg), inputs_digest(c_rt, c_rs, c_st),
    )


# ---------------------------------------------------------------------------
# lattice inequalities
# ---------------------------------------------------------------------------

def check_pressure_bound(phi: Interaction, box: Region, cfg=None, tol=1e-6) -> CheckResult:
    """Finite-volume pressure against ln q + ||Phi||_L^2 / 2 - omega(E_Phi)."""
    lhs = log_partition(phi, box) / len(box)
    lip = phi_lipschitz(phi, cfg)
    rhs = math.log(phi.q) + 0.5 * lip * lip - uniform_energy(phi)
    return _result(
        "pressure_bound", lhs, rhs, tol, inputs_digest(phi, box),
        lipschitz=lip, finite_volume_proxy=True,
    )


def check_specific_entropy_continuity(rho_family, sigma_family, certs, tol=None, cfg=None) -> CheckResult:
    """Entropy continuity at every box of two marginal families; reports the worst box."""
    if not (len(rho_family) == len(sigma_family) == len(certs)):
        raise RegionMismatch("families and certificates differ in length")
    check_consistent_family(rho_family, "rho")
    check_consistent_family(sigma_family, "sigma")
    per_box = [
        check_entropy_continuity(r, s, c, tol, cfg)
        for r, s, c in zip(rho_family, sigma_family, certs)
    ]
    worst = min(per_box, key=lambda r: r.slack)
    ws = [c.primal_value / len(c.region) for c in certs]
    return CheckResult(
        "specific_entropy_continuity", worst.lhs, worst.rhs, worst.slack, worst.tolerance_used,
        inputs_digest(list(rho_family), list(sigma_family), list(certs)),
        all(r.passed for r in per_box),
        {
            "slacks": [r.slack for r in per_box],
            "w_sequence": ws,
            "consistency": "checked",
            "translation_invariance": "assumed",
        },
    )


def check_w1_gibbs_proxy(rho: DensityMatrix, phi: Interaction, cert: TransportCertificate,
                         tol=None, cfg=None) -> CheckResult:
    """S(rho||omega)/|box| against h2(w) + w (ln(q^2-1) + 2 ||Phi||_0), omega the local Gibbs state.

    The right-hand side increases up to its peak and is capped there, so an
    upper bound on w always yields a valid right-hand side.
    """
    omega = gibbs_local(phi, rho.region)
    n, q = len(rho.region), rho.q
    lhs = rel_entropy(rho, omega) / n
    c = math.log(q * q - 1) + 2.0 * phi_r_norm(phi, 0.0)
    w_peak = 1.0 / (1.0 + math.exp(-c))
    w = min(max(cert.primal_value / n, 0.0), w_peak)
    rhs = h2(w) + w * c
    return _result(
        "w1_gibbs_proxy", lhs, rhs, _tol(tol, lhs, rhs, cfg), inputs_digest(rho, phi, cert),
        w_upper=cert.primal_value / n,
    )
