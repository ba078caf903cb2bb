"""EM and modified-EM joint LSFC/SSFC estimators, plus the conventional LS
LSFC estimator that is handed the true SSFCs.  These are comparison
baselines for the decoupled estimator in :mod:`composite_csi.lsfc`.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import SystemDims, gen_lsfc
from .rng import substream


class EmError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class EmPrior:
    mean_sqrt_beta: np.ndarray
    cov_sqrt_beta: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cov_sqrt_beta)
        if not np.allclose(c, c.T):
            raise ValueError("prior covariance must be symmetric")
        if np.linalg.eigvalsh(c).min() < -1e-12 * max(1.0, np.abs(c).max()):
            raise ValueError("prior covariance must be positive semidefinite")


@dataclass(frozen=True, eq=False)
class EmState:
    sqrt_beta_hat: np.ndarray
    h_hat: np.ndarray
    iteration: int
    pilots_p: np.ndarray = field(repr=False, default=None)

    @property
    def beta_hat(self):
        return self.sqrt_beta_hat**2

    @property
    def a_matrix(self):
        return design_matrix(self.h_hat, self.pilots_p)


@dataclass(frozen=True)
class EmTrace:
    """Per-iteration estimates; index 0 is the initialisation."""

    sqrt_beta: list
    h_hat: list

    def beta(self, i):
        return self.sqrt_beta[i] ** 2


@lru_cache(maxsize=16)
def em_prior(params, K, n_samples=10**6, seed=20130901):
    """Monte Carlo prior moments of ``sqrt(beta)`` under ``params``.

    Users are i.i.d., so the covariance is diagonal.
    """
    lsfc = gen_lsfc(SystemDims(M=1, K=1, T=1), params, substream(seed, 0), batch=(n_samples,))
    s = np.sqrt(lsfc.beta[:, 0])
    return EmPrior(mean_sqrt_beta=np.full(K, s.mean()), cov_sqrt_beta=np.eye(K) * s.var())


def design_matrix(h, p):
    """``A = (1_T kron H) o (P^T kron 1_M)`` so that ``A sqrt(beta) = vec(H D P)``."""
    M, K = h.shape
    T = p.shape[-1]
    return np.kron(np.ones((T, 1)), h) * np.kron(p.T, np.ones((M, 1)))


def gram_khatri_rao(h, p):
    """``A^H A = (H^H H) o (P^* P^T)`` without forming ``A``."""
    hh = np.swapaxes(h.conj(), -1, -2) @ h
    pp = p.conj() @ np.swapaxes(p, -1, -2)
    return hh * pp


def _a_herm_y(h, y, p):
    # A^H vec(Y): entry k is h_k^H Y p_k
    yp = y @ np.swapaxes(p, -1, -2).conj()
    return np.sum(h.conj() * yp, axis=-2)


def conventional_lsfc_ls(y, h_true, pilots):
    """LS estimate of ``sqrt(beta)`` given the true SSFCs, returned squared.

    The real part of the LS solution is taken since ``sqrt(beta)`` is real.
    """
    y = getattr(y, "y", y)
    h = getattr(h_true, "h", h_true)
    p = pilots.p
    gram = gram_khatri_rao(h, p)
    rhs = _a_herm_y(h, y, p)
    try:
        s = np.linalg.solve(gram, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise EmError("A^H A is singular") from exc
    return s.real**2


def mem_gram_deviation(h, pilots):
    """``||A^H A - Diag(M ||p_k||^2)||_F / (M mean ||p_k||^2)``."""
    M = h.shape[-2]
    e = pilots.energy
    g = gram_khatri_rao(h, pilots.p)
    target = np.einsum("...k,kl->...kl", M * e, np.eye(h.shape[-1]))
    return np.linalg.norm(g - target, axis=(-2, -1)) / (M * np.mean(e, axis=-1))


def _eig_cache(correlations):
    vals, vecs = zip(*(np.linalg.eigh(c.phi) for c in correlations))
    return np.stack(vals), np.stack(vecs)


def em_step_ssfc(y, p, sqrt_beta, eig):
    """SSFC update ``h_k = (Phi_k + ||p_k||^2 beta_k I)^{-1} beta_k^{1/2} Y p_k``."""
    vals, vecs = eig
    beta = sqrt_beta**2
    e = np.sum(np.abs(p) ** 2, axis=-1)
    yp = y @ np.swapaxes(p, -1, -2).conj()  # (..., M, K)
    denom = vals + (e * beta)[..., :, None]  # (..., K, M)
    if np.any(np.abs(denom) < 1e-300):
        raise EmError("singular regularised system in the SSFC update")
    rhs = np.abs(sqrt_beta)[..., None, :] * yp
    coeff = np.einsum("kmj,...mk->...kj", vecs.conj(), rhs) / denom
    return np.einsum("kmj,...kj->...mk", vecs, coeff)


def em_step_lsfc(y, p, h, prior, variant):
    """Prior-regularised LS update of ``sqrt(beta)`` (real part kept)."""
    mu = prior.mean_sqrt_beta
    M = h.shape[-2]
    if variant == "EM":
        gram = gram_khatri_rao(h, p)
    elif variant == "MEM":
        e = np.sum(np.abs(p) ** 2, axis=-1)
        gram = np.einsum("...k,kl->...kl", M * e, np.eye(h.shape[-1])).astype(complex)
    else:
        raise ValueError(f"unknown EM variant {variant!r}")
    resid = _a_herm_y(h, y, p) - np.einsum("...kl,l->...k", gram_khatri_rao(h, p), mu)
    lhs = np.linalg.inv(prior.cov_sqrt_beta) + gram
    try:
        delta = np.linalg.solve(lhs, resid[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise EmError("singular regularised system in the LSFC update") from exc
    return (mu + delta).real


def em_joint(y, pilots, correlations, prior, max_iters=20, variant="EM", tol=1e-6):
    """Iterate the EM (or MEM) joint estimator.

    Returns the final :class:`EmState` and an :class:`EmTrace` holding the
    estimates after every iteration (index 0 = initialisation, where the
    SSFCs are the step-2 output for the prior mean).
    """
    if max_iters < 0:
        raise ValueError("max_iters must be non-negative")
    y = getattr(y, "y", y)
    p = pilots.p
    batch = y.shape[:-2]
    K = p.shape[-2]
    eig = _eig_cache(correlations)
    s = np.broadcast_to(prior.mean_sqrt_beta, batch + (K,)).astype(float).copy()
    h = em_step_ssfc(y, p, s, eig)
    trace = EmTrace(sqrt_beta=[s], h_hat=[h])
    it = 0
    for it in range(1, max_iters + 1):
        s_new = em_step_lsfc(y, p, h, prior, variant)
        h = em_step_ssfc(y, p, s_new, eig)
        change = np.max(np.abs(s_new - s)) / max(np.max(np.abs(s_new)), 1e-300)
        s = s_new
        trace.sqrt_beta.append(s)
        trace.h_hat.append(h)
        if tol > 0 and change < tol:
            break
    return EmState(sqrt_beta_hat=s, h_hat=h, iteration=it, pilots_p=p), trace
