"""Array-level single-site maps used in the hot loops of the solvers.

Matrices act on ``n`` sites of local dimension ``q`` with the first site as
the most significant digit of the basis index. All functions accept stacks
``(..., D, D)``.
"""

import numpy as np


def _split(n, q, i):
    return q ** i, q ** (n - i - 1)


def site_trace(M, n, q, i):
    """Partial trace over site ``i``; result acts on the remaining n-1 sites."""
    a, b = _split(n, q, i)
    lead = M.shape[:-2]
    T = M.reshape(lead + (a, q, b, a, q, b))
    T = np.trace(T, axis1=-5, axis2=-2)
    return T.reshape(lead + (a * b, a * b))


def site_embed(A, n, q, i):
    """Tensor the identity on site ``i`` into an operator on the other sites."""
    a, b = _split(n, q, i)
    lead = A.shape[:-2]
    Ar = A.reshape(lead + (a, 1, b, a, 1, b))
    eye = np.eye(q).reshape(q, 1, 1, q, 1)
    return (Ar * eye).reshape(lead + (a * q * b, a * q * b))


def site_average(M, n, q, i):
    """Replace the site-``i`` factor by the normalized identity: (I/q) (x) Tr_i M."""
    return site_embed(site_trace(M, n, q, i), n, q, i) / q


def herm(M):
    return 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))


def eigvalsh(M):
    return np.linalg.eigvalsh(M)


def trace_norm(M):
    return float(np.abs(np.linalg.eigvalsh(M)).sum())


def op_norm(M):
    if M.shape[-1] == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvalsh(M)).max())


def spectral_apply(M, fn):
    w, U = np.linalg.eigh(M)
    return (U * fn(w)[..., None, :]) @ np.conj(np.swapaxes(U, -1, -2))


def soft_threshold(M, t):
    """Proximal map of ``t * ||.||_1`` on Hermitian matrices (eigenvalue shrinkage)."""
    return spectral_apply(M, lambda w: np.sign(w) * np.maximum(np.abs(w) - t, 0.0))


def project_l1_ball(w, radius=1.0):
    """Euclidean projection of a real vector onto the l1 ball."""
    a = np.abs(w)
    if a.sum() <= radius:
        return w.copy()
    u = np.sort(a)[::-1]
    cs = np.cumsum(u)
    k = np.nonzero(u * np.arange(1, len(u) + 1) > cs - radius)[0][-1]
    theta = (cs[k] - radius) / (k + 1.0)
    return np.sign(w) * np.maximum(a - theta, 0.0)


def prox_op_norm(M, t):
    """Proximal map of ``t * ||.||_inf`` via the Moreau identity."""
    return spectral_apply(M, lambda w: w - t * project_l1_ball(w / t))
