"""SSFC-free large-scale fading coefficient estimation.

The estimator exploits channel hardening: for large ``M``,
``Y^H Y / M - I`` concentrates around ``P^H D_beta P``, so each
``beta_k`` can be read off with a quadratic form in its own pilot.
Noise variance is assumed normalised to one.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LsfcEstimate:
    beta_hat: np.ndarray
    blocks_used: int


def _check_energy(pilots):
    energy = pilots.energy
    if np.any(energy <= 0):
        raise ValueError("pilot energy must be positive")
    return energy


def _pilot_power_stat(y, pilots):
    # ||Y p_k||^2 = p_k^H Y^H Y p_k, for every user at once.
    yp = y @ pilots.vectors()
    return np.sum(np.abs(yp) ** 2, axis=-2)


def estimate_lsfc(y, pilots, M=None):
    """Decoupled LSFC estimate from one received block.

    ``beta_k = (p_k^H Y^H Y p_k - M ||p_k||^2) / (M ||p_k||^4)``
    """
    y = getattr(y, "y", y)
    M = y.shape[-2] if M is None else M
    energy = _check_energy(pilots)
    stat = _pilot_power_stat(y, pilots)
    return LsfcEstimate(beta_hat=(stat - M * energy) / (M * energy**2), blocks_used=1)


def estimate_lsfc_multi(blocks, pilots, M=None):
    """LSFC estimate pooled over ``J`` coherence blocks with common LSFCs.

    ``blocks`` is a sequence of blocks or an array whose axis 0 indexes them.
    """
    if isinstance(blocks, np.ndarray):
        ys = blocks
    else:
        ys = [getattr(b, "y", b) for b in blocks]
        if not ys:
            raise ValueError("need at least one received block")
        ys = np.stack(ys)
    J = ys.shape[0]
    if J == 0:
        raise ValueError("need at least one received block")
    M = ys.shape[-2] if M is None else M
    energy = _check_energy(pilots)
    stat = sum(_pilot_power_stat(ys[i], pilots) for i in range(J))
    beta_hat = (stat - M * J * energy) / (M * J * energy**2)
    return LsfcEstimate(beta_hat=beta_hat, blocks_used=J)


def estimate_lsfc_matrix_form(y, pilots, M=None, J=1):
    """Vectorised least-squares form of the same estimator (single pilot set).

    ``beta = Diag(||p_k||^-4) ((1_T^T kron P) o (P^* kron 1_T^T)) vec(G)``
    with ``G = sum_i Y_i^H Y_i / (M J) - I``. Kept as an algebraic
    cross-check of the element-wise path.
    """
    ys = np.asarray(getattr(y, "y", y))
    if ys.ndim == 2:
        ys = ys[None]
    J = ys.shape[0]
    M = ys.shape[-2] if M is None else M
    P = pilots.p
    K, T = P.shape
    gram = sum(yi.conj().T @ yi for yi in ys) / (M * J) - np.eye(T)
    ones = np.ones((1, T))
    design = np.kron(ones, P) * np.kron(P.conj(), ones)
    vec_g = gram.reshape(-1, order="F")
    energy = _check_energy(pilots)
    beta = (design @ vec_g) / energy**2
    return LsfcEstimate(beta_hat=beta.real, blocks_used=J)


def lsfc_error_decomposition(h_k, beta_k, noise, p_k):
    """Split ``beta_hat_k - beta_k`` into noise, hardening and cross terms.

    Returns ``(r1, r2, r3)``: the noise-power term, the channel-hardening term
    and the signal-noise cross term.  Their sum equals the estimation error
    exactly when pilots are orthogonal.
    """
    M = h_k.shape[-1]
    e = np.sum(np.abs(p_k) ** 2)
    n_p = noise @ p_k
    r1 = (np.sum(np.abs(n_p) ** 2, axis=-1) - M * e) / (M * e**2)
    r2 = beta_k * (np.sum(np.abs(h_k) ** 2, axis=-1) - M) / M
    cross = np.sum(h_k.conj() * n_p, axis=-1)
    r3 = np.sqrt(beta_k) * 2 * cross.real / (M * e)
    return r1, r2, r3
