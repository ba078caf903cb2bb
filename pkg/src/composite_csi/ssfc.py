"""Small-scale fading estimators: conventional LS and the two rank-reduced
estimators, the second with a mean-AoA line search.

All functions operate on the matched-filter output ``Yp`` computed from the
received block and one user's pilot column, and broadcast over leading
batch axes.
"""

from dataclasses import dataclass

import numpy as np

from .channel import steering_vector

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SsfcEstimate:
    h_hat: np.ndarray
    c_hat: np.ndarray
    phi_hat: np.ndarray | float | None
    gamma_used: np.ndarray | float


@dataclass(frozen=True)
class AoaSearchGrid:
    n_grid: int = 181
    refine_iters: int = 40

    def __post_init__(self):
        if self.n_grid < 16:
            raise ValueError("coarse AoA grid needs at least 16 points")
        if self.refine_iters < 0:
            raise ValueError("refine_iters must be non-negative")


def _check_gamma(gamma):
    gamma = np.asarray(gamma, dtype=float)
    if np.any(~(gamma > 0)):
        raise ValueError("gamma must be positive; drop trials with non-positive LSFC estimates first")
    return gamma


def matched_filter(y, p):
    """``Y p`` for a pilot column ``p`` (broadcasts over batches)."""
    y = getattr(y, "y", y)
    return np.einsum("...mt,...t->...m", y, p)


def gamma_from_beta(beta, energy):
    """``gamma = sqrt(beta) ||p||^2``; NaN where ``beta <= 0`` (failed trial)."""
    beta = np.asarray(beta, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where(beta > 0, np.sqrt(np.where(beta > 0, beta, np.nan)), np.nan) * energy


def conventional_ls(y, p, gamma):
    gamma = _check_gamma(gamma)
    h = matched_filter(y, p) / gamma[..., None]
    return SsfcEstimate(h_hat=h, c_hat=h, phi_hat=None, gamma_used=gamma)


def estimate_ssfc_I(y, p, gamma_hat, basis):
    return rr_estimate(matched_filter(y, p), gamma_hat, basis)


def estimate_ssfc_II(y, p, gamma_hat, basis, phi_hat, spacing):
    return rr_estimate(matched_filter(y, p), gamma_hat, basis, phi_hat, spacing)


def rr_estimate(yp, gamma_hat, basis, phi_hat=None, spacing=0.5):
    """Rank-reduced estimate from a matched-filter output ``Yp``.

    Without ``phi_hat`` this is estimator I, ``h = Q_m Q_m^H Yp / gamma``;
    with it, the projection happens after de-rotating by ``W(phi_hat)``.
    """
    gamma = _check_gamma(gamma_hat)
    q = basis.q
    if phi_hat is None:
        c = (yp @ q.conj()) / gamma[..., None]
        return SsfcEstimate(h_hat=c @ q.T, c_hat=c, phi_hat=None, gamma_used=gamma)
    w = steering_vector(basis.M, phi_hat, spacing)
    c = ((w.conj() * yp) @ q.conj()) / gamma[..., None]
    return SsfcEstimate(h_hat=w * (c @ q.T), c_hat=c, phi_hat=phi_hat, gamma_used=gamma)


def _times_basis(x, q):
    # one flat 2-D product is much faster than a stacked matmul
    x = np.asarray(x)
    out = x.reshape(-1, x.shape[-1]) @ q.conj().astype(complex)
    return out.reshape(x.shape[:-1] + (q.shape[-1],))


def aoa_objective(yp, basis, phi, spacing):
    """``||Q_m^H W^H(phi) Yp||^2``; ``phi`` broadcasts against ``yp``'s batch."""
    w = steering_vector(basis.M, phi, spacing)
    proj = _times_basis(w.conj() * yp, basis.q)
    return np.sum(np.abs(proj) ** 2, axis=-1)


def _grid_objective(yp, basis, angles, spacing, max_elems=2**22):
    """Objective at every grid angle as ``(n_angles, *batch)``.

    ``Yp^T conj(W(phi)) Q`` is one matrix product per chunk of angles.
    """
    M, m = basis.M, basis.m
    flat = yp.reshape(-1, M)
    chunk = max(1, max_elems // max(flat.shape[0] * m, 1))
    out = np.empty((angles.size, flat.shape[0]))
    for start in range(0, angles.size, chunk):
        a = angles[start : start + chunk]
        derot = steering_vector(M, a, spacing).conj()[:, :, None] * basis.q.conj()  # (g, M, m)
        proj = flat @ np.moveaxis(derot, 0, 1).reshape(M, -1)
        out[start : start + a.size] = np.sum(np.abs(proj.reshape(-1, a.size, m)) ** 2, axis=-1).T
    return out.reshape((angles.size,) + yp.shape[:-1])


def aoa_line_search(y, p, basis, spacing, grid=AoaSearchGrid()):
    """Mean-AoA estimate: coarse grid over [-pi/2, pi/2] then golden-section
    refinement over the two cells around the best grid point."""
    yp = matched_filter(y, p)
    return aoa_search_yp(yp, basis, spacing, grid)


def aoa_search_yp(yp, basis, spacing, grid=AoaSearchGrid()):
    yp = np.asarray(yp)
    batch = yp.shape[:-1]
    angles = np.linspace(-np.pi / 2, np.pi / 2, grid.n_grid)
    obj = _grid_objective(yp, basis, angles, spacing)
    best = np.argmax(obj, axis=0)
    phi = angles[best]
    f_best = np.take_along_axis(obj, best[None], axis=0)[0]
    if grid.refine_iters == 0:
        return phi if batch else float(phi)

    step = angles[1] - angles[0]
    a = np.clip(phi - step, -np.pi / 2, np.pi / 2)
    b = np.clip(phi + step, -np.pi / 2, np.pi / 2)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = aoa_objective(yp, basis, c, spacing)
    fd = aoa_objective(yp, basis, d, spacing)
    for _ in range(grid.refine_iters):
        left = fc >= fd
        # maximise: keep [a, d] when f(c) >= f(d), else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - GOLDEN * (b - a)
        new_d = a + GOLDEN * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_prev, fd_prev = fc, fd
        probe = np.where(left, c_next, d_next)
        f_probe = aoa_objective(yp, basis, probe, spacing)
        fc = np.where(left, f_probe, fd_prev)
        fd = np.where(left, fc_prev, f_probe)
        c, d = c_next, d_next
    mid = 0.5 * (a + b)
    f_mid = aoa_objective(yp, basis, mid, spacing)
    # keep the grid point unless refinement beats it by more than rounding noise
    out = np.where(f_mid > f_best * (1 + 1e-12), mid, phi)
    return out if batch else float(out)
