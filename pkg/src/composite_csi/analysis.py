"""Closed-form SSFC MSE predictors, NMSE metrics and hardening diagnostics."""

from dataclasses import dataclass

import numpy as np

from .rng import complex_normal


@dataclass(frozen=True)
class TheoryMse:
    variance: float
    bias: float
    total: float
    d_m: np.ndarray


@dataclass(frozen=True)
class NmseReport:
    nmse_ssfc: float
    nmse_lsfc_db: float
    failure_rate: float


def theoretical_variance(m, beta, pilot_energy):
    """Noise-induced variance ``m / (beta ||p||^2)`` of a rank-``m`` estimate."""
    return m / (beta * pilot_energy)


def _aligned(phi, w):
    mat = np.asarray(getattr(phi, "phi", phi))
    if w is None:
        return mat
    d = getattr(w, "entries", w)
    return d.conj()[:, None] * mat * d[None, :]


def discarded_energy(parent, phi, w=None):
    """``q_j^H W^H Phi W q_j`` for every parent column ``j`` (real)."""
    mat = _aligned(phi, w)
    return np.real(np.einsum("ij,ik,kj->j", parent.conj(), mat, parent))


def theoretical_bias(basis, phi, w=None):
    """Modeling-error term: energy of the aligned correlation outside span(Q_m)."""
    if basis.parent is None or basis.parent.shape[0] != basis.parent.shape[1]:
        raise ValueError("bias needs the full M x M parent basis")
    per_col = discarded_energy(basis.parent, phi, w)
    return float(np.sum(per_col[basis.m :]))


def theoretical_mse(m, beta, pilot_energy, basis, phi, w=None):
    b = basis.with_order(m) if basis.m != m else basis
    var = theoretical_variance(m, beta, pilot_energy)
    bias = max(theoretical_bias(b, phi, w), 0.0)
    mask = np.zeros(b.M)
    mask[m:] = 1.0
    return TheoryMse(variance=var, bias=bias, total=var + bias, d_m=mask)


def mse_curve(parent, phi, w, beta_energy):
    """Total MSE for every order ``m = 1..M`` at once.

    ``beta_energy`` is ``beta ||p||^2`` (scalar or array); returns
    ``(orders, total)`` with ``total`` shaped ``(..., M)``.
    """
    per_col = discarded_energy(parent, phi, w)
    M = per_col.size
    tail = np.concatenate([np.cumsum(per_col[::-1])[::-1][1:], [0.0]])
    orders = np.arange(1, M + 1)
    be = np.asarray(beta_energy, dtype=float)[..., None]
    return orders, orders / be + np.maximum(tail, 0.0)


def optimal_order(parent, phi, w, beta_energy):
    orders, total = mse_curve(parent, phi, w, beta_energy)
    return orders[np.argmin(total, axis=-1)]


def log_beta_variance(params):
    """Analytic ``Var{10 log10 beta}`` for area-uniform distances on the annulus
    ``[min_distance, cell_radius]`` plus log-normal shadowing."""
    d0, R = params.min_distance, params.cell_radius
    area = R**2 - d0**2

    def m1(d):
        return d**2 * np.log(d) - d**2 / 2

    def m2(d):
        return d**2 * np.log(d) ** 2 - d**2 * np.log(d) + d**2 / 2

    e1 = (m1(R) - m1(d0)) / area
    e2 = (m2(R) - m2(d0)) / area
    var_ln_d = e2 - e1**2
    return params.sigma_s_db**2 + (10 * params.alpha / np.log(10)) ** 2 * var_ln_d


def db_square_error(beta_hat, beta):
    """``(10 log10(beta_hat / beta))^2``; NaN where ``beta_hat <= 0``."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(beta_hat > 0, beta_hat / beta, np.nan)
        return (10 * np.log10(ratio)) ** 2


def nmse_metrics(beta_hat, beta, log_beta_var, h_hat=None, h=None, entry_variance=1.0):
    """NMSE report over a sample of trials.

    LSFC error is measured in dB over trials with ``beta_hat > 0``; the
    fraction of non-positive estimates is returned as ``failure_rate``.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    if beta_hat.size == 0:
        raise ValueError("empty sample set")
    sq = db_square_error(beta_hat, beta)
    ok = np.isfinite(sq)
    failure = 1.0 - ok.mean()
    nmse_l = float(np.mean(sq[ok]) / log_beta_var) if ok.any() else float("nan")
    nmse_s = float("nan")
    if h_hat is not None:
        err = np.abs(np.asarray(h_hat) - np.asarray(h)) ** 2
        nmse_s = float(np.mean(err) / entry_variance)
    return NmseReport(nmse_ssfc=nmse_s, nmse_lsfc_db=nmse_l, failure_rate=float(failure))


def quadratic_form_deviation(A, rng, n_draws):
    """Monte Carlo ``E|p^H A p - tr A| / M`` and ``E|p^H A q| / M``."""
    M = A.shape[0]
    p = complex_normal(rng, (n_draws, M))
    q = complex_normal(rng, (n_draws, M))
    Ap = p @ A.T
    quad = np.einsum("nm,nm->n", p.conj(), Ap)
    Aq = q @ A.T
    cross = np.einsum("nm,nm->n", p.conj(), Aq)
    tr = np.trace(A)
    return float(np.mean(np.abs(quad - tr)) / M), float(np.mean(np.abs(cross)) / M)


def hardening_deviation(h_tilde, roots, noise=None):
    """Frobenius deviations ``||H~^H Phi~^H Phi~ H~ / M - I||`` and, if noise is
    given, ``||H~^H Phi~^H N / M||``, per leading draw.

    ``roots`` stacks the per-user correlation roots as ``(K, M, M)``.
    """
    M, K = h_tilde.shape[-2:]
    g = np.einsum("kij,...jk->...ik", roots, h_tilde)
    gram = np.swapaxes(g.conj(), -1, -2) @ g / M
    dev = np.linalg.norm(gram - np.eye(K), axis=(-2, -1))
    if noise is None:
        return dev
    cross = np.swapaxes(g.conj(), -1, -2) @ noise / M
    return dev, np.linalg.norm(cross, axis=(-2, -1))


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def batch_stderr(values, n_batches=20):
    """Standard error of the mean from contiguous batch means."""
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size < n_batches:
        n_batches = max(values.size, 1)
    if n_batches < 2:
        return 0.0
    means = np.array([b.mean() for b in np.array_split(values, n_batches)])
    return float(np.std(means, ddof=1) / np.sqrt(n_batches))
