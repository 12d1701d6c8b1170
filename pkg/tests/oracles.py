"""Independent reference computations used only by the tests.

Nothing here imports the solver internals: each routine re-derives its
quantity by a different method (Jacobi rotations, explicit basis loops,
conic programming, integer network flow, dense grids, enumeration).
"""

import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def jacobi_eigvalsh(M, tol=1e-13, max_sweeps=100):
    """Eigenvalues of a Hermitian matrix by cyclic Jacobi on its real embedding.

    The real symmetric matrix [[Re, -Im], [Im, Re]] has every eigenvalue of M
    twice, so every second sorted value is returned.
    """
    M = np.asarray(M, dtype=complex)
    A = np.block([[M.real, -M.imag], [M.imag, M.real]]).astype(float)
    n = A.shape[0]
    fro = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * max(fro, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p], A[:, q] = c * Ap - s * Aq, s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :], A[q, :] = c * Ap - s * Aq, s * Ap + c * Aq
    return np.sort(np.diag(A))[::2]


def digits(index, n, q):
    out = []
    for _ in range(n):
        out.append(index % q)
        index //= q
    return out[::-1]


def loop_partial_trace(M, n, q, keep):
    """Partial trace by explicit summation over basis labels."""
    keep = list(keep)
    k = len(keep)
    out = np.zeros((q ** k, q ** k), dtype=complex)
    for i in range(q ** n):
        di = digits(i, n, q)
        for j in range(q ** n):
            dj = digits(j, n, q)
            if any(di[t] != dj[t] for t in range(n) if t not in keep):
                continue
            a = sum(di[t] * q ** (k - 1 - r) for r, t in enumerate(keep))
            b = sum(dj[t] * q ** (k - 1 - r) for r, t in enumerate(keep))
            out[a, b] += M[i, j]
    return out


def loop_embed(A, positions, n, q):
    """A acting on the listed positions (in order) of n sites, identity elsewhere."""
    out = np.zeros((q ** n, q ** n), dtype=complex)
    k = len(positions)
    for i in range(q ** n):
        di = digits(i, n, q)
        for j in range(q ** n):
            dj = digits(j, n, q)
            if any(di[t] != dj[t] for t in range(n) if t not in positions):
                continue
            a = sum(di[t] * q ** (k - 1 - r) for r, t in enumerate(positions))
            b = sum(dj[t] * q ** (k - 1 - r) for r, t in enumerate(positions))
            out[i, j] = A[a, b]
    return out


# ---------------------------------------------------------------------------
# conic programs
# ---------------------------------------------------------------------------

def sdp_w1(delta, n, q):
    """W1 norm from its primal semidefinite formulation, solved with cvxpy."""
    import cvxpy as cp

    D = q ** n
    dims = [q] * n
    P = [cp.Variable((D, D), hermitian=True) for _ in range(n)]
    N = [cp.Variable((D, D), hermitian=True) for _ in range(n)]
    cons = []
    total = 0
    for x in range(n):
        cons += [P[x] >> 0, N[x] >> 0]
        cons.append(cp.partial_trace(P[x] - N[x], dims, axis=x) == 0)
        total = total + P[x] - N[x]
    cons.append(total == delta)
    obj = cp.Minimize(0.5 * sum(cp.real(cp.trace(P[x] + N[x])) for x in range(n)))
    prob = cp.Problem(obj, cons)
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return float(prob.value)


def sdp_partial_dependence(H, n, q, x):
    """2 min_A ||H - A||_inf over A trivial on site x, as an SDP."""
    import cvxpy as cp

    rest = q ** (n - 1)
    A = cp.Variable((rest, rest), hermitian=True)
    t = cp.Variable()
    E = _insert_identity(A, n, q, x)
    D = q ** n
    cons = [H - E << t * np.eye(D), H - E >> -t * np.eye(D)]
    prob = cp.Problem(cp.Minimize(t), cons)
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return 2.0 * float(prob.value)


def _insert_identity(A, n, q, x):
    """cvxpy expression for A (on the other n-1 sites) tensored with I at site x."""
    import cvxpy as cp

    D = q ** n
    rest = q ** (n - 1)
    # selection matrices S_k mapping the rest basis into the full basis with site x = k
    expr = 0
    for k in range(q):
        S = np.zeros((D, rest))
        for r in range(rest):
            dr = digits(r, n - 1, q)
            full = dr[:x] + [k] + dr[x:]
            S[sum(d * q ** (n - 1 - t) for t, d in enumerate(full)), r] = 1.0
        expr = expr + S @ A @ S.T
    return expr


def lp_hamming_w1(mu, nu, n, q):
    """Bipartite transport LP with explicit Hamming costs, via cvxpy."""
    import cvxpy as cp

    confs = list(itertools.product(range(q), repeat=n))
    C = np.array([[sum(a != b for a, b in zip(x, y)) for y in confs] for x in confs], dtype=float)
    Pi = cp.Variable(C.shape, nonneg=True)
    cons = [cp.sum(Pi, axis=1) == mu, cp.sum(Pi, axis=0) == nu]
    prob = cp.Problem(cp.Minimize(cp.sum(cp.multiply(C, Pi))), cons)
    prob.solve(solver="CLARABEL")
    return float(prob.value)


def flow_hamming_w1(mu_counts, nu_counts, n, q):
    """Exact integer optimal transport on the bipartite graph with networkx.

    ``mu_counts``/``nu_counts`` are integer masses with equal totals; the
    return value is the optimal cost divided by that total.
    """
    import networkx as nx

    confs = list(itertools.product(range(q), repeat=n))
    G = nx.DiGraph()
    total = int(sum(mu_counts))
    for i, c in enumerate(mu_counts):
        G.add_node(("s", i), demand=-int(c))
    for j, c in enumerate(nu_counts):
        G.add_node(("t", j), demand=int(c))
    for i, x in enumerate(confs):
        if mu_counts[i] == 0:
            continue
        for j, y in enumerate(confs):
            if nu_counts[j] == 0:
                continue
            G.add_edge(("s", i), ("t", j), weight=sum(a != b for a, b in zip(x, y)))
    cost = nx.min_cost_flow_cost(G)
    return cost / total


# ---------------------------------------------------------------------------
# first-order dual oracle
# ---------------------------------------------------------------------------

def _site_average(M, n, q, x):
    a, b = q ** x, q ** (n - x - 1)
    T = M.reshape(a, q, b, a, q, b)
    tr = np.einsum("aibcid->abcd", T)
    return np.einsum("abcd,ij->aibcjd", tr, np.eye(q) / q).reshape(q ** n, q ** n)


def dual_subgradient_w1(delta, n, q, steps=4000):
    """Valid lower bound on W1 by projected ascent on the dual.

    The constraint on each site is enforced by shrinking H toward its
    average over that site; 2||H - Psi_x H|| bounds the dependence from
    above, so the returned value is always a certified lower bound.
    """
    H = np.zeros_like(delta)
    best = 0.0
    lr = 0.5
    for k in range(steps):
        H = H + lr / math.sqrt(k + 1) * delta
        for x in range(n):
            R = H - _site_average(H, n, q, x)
            s = 2 * np.abs(np.linalg.eigvalsh(R)).max()
            if s > 1:
                H = H - R + R / s
        lip = max(2 * np.abs(np.linalg.eigvalsh(H - _site_average(H, n, q, x))).max() for x in range(n))
        val = float(np.vdot(H, delta).real) / max(1.0, lip)
        best = max(best, val)
    return best


# ---------------------------------------------------------------------------
# scalar oracles
# ---------------------------------------------------------------------------

def tci_grid(phi_r, N, q, t_max=50.0, step=1e-5):
    """Minimum of the defining objective on a dense uniform grid."""
    t = np.arange(0.0, t_max + step / 2, step)
    s = np.sqrt(1 + t ** 2)
    p = phi_r
    f = ((math.exp(p) + 1) * s * p * np.power(float(q), (3 + s) / 2) * np.exp(p * (2 + s / 2))
         + 2 * p * math.exp(2 * p) + 4 * np.exp(-math.pi * t))
    M = float(f.min())
    kappa = 1 - (2 * N - 1) * (N - 1) * M
    return M, kappa


def ising_chain_log_partition(J, h, n):
    """ln sum over spins of exp(-J sum s_i s_{i+1} - h sum s_i), by enumeration."""
    best = -np.inf
    vals = []
    for spins in itertools.product((1, -1), repeat=n):
        e = J * sum(spins[i] * spins[i + 1] for i in range(n - 1)) + h * sum(spins)
        vals.append(-e)
    vals = np.array(vals)
    m = vals.max()
    return float(m + np.log(np.exp(vals - m).sum()))


def ising_transfer_log_partition(J, h, n):
    """Same quantity through the 2x2 transfer matrix."""
    s = np.array([1.0, -1.0])
    T = np.exp(-J * np.outer(s, s) - h * (s[:, None] + s[None, :]) / 2)
    v = np.exp(-h * s / 2)
    Z = v @ np.linalg.matrix_power(T, n - 1) @ v
    return float(np.log(Z))


def ising_pressure_limit(J, h):
    s = np.array([1.0, -1.0])
    T = np.exp(-J * np.outer(s, s) - h * (s[:, None] + s[None, :]) / 2)
    return float(np.log(np.linalg.eigvalsh(T).max()))
