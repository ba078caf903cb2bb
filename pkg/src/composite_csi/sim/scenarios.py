"""Monte Carlo scenarios, one per figure family.

A scenario expands a config into outer sweep points; for each point the
runner simulates independent *drops* (one geometry: LSFCs, mean AoAs and
correlation matrices) of up to ``trials_per_drop`` trials, each trial
redrawing SSFCs and noise.  ``simulate`` returns, per inner key, a
numerator and denominator array over the drop's trials so that ratio
metrics can be reduced exactly and batched for standard errors.
"""

from itertools import product

import numpy as np

from .. import analysis, bases, em, lsfc, ssfc
from ..channel import (
    SpatialProfile,
    SystemDims,
    correlation_from_profile,
    draw_mean_aoas,
    gen_lsfc,
    gen_ssfc,
    received_block,
    steering_vector,
)
from ..pilots import pilots_for_snr


def outer_points(cfg):
    """Sweep coordinates simulated independently, in a fixed order."""
    pts = []
    for M, xi, as_deg, snr in product(cfg.antennas, cfg.spacings, cfg.angle_spreads_deg, cfg.snr_db):
        pts.append({"M": int(M), "spacing": float(xi), "as_deg": float(as_deg), "snr_db": float(snr)})
    return pts


class Accumulator:
    """Ordered map ``(metric, inner keys) -> (numerators, denominators, scale)``."""

    def __init__(self, n):
        self.n = n
        self.items = {}

    def add(self, metric, keys, num, den, scale=1.0):
        num = np.broadcast_to(np.asarray(num, float), (self.n,))
        den = np.broadcast_to(np.asarray(den, float), (self.n,))
        self.items[(metric, tuple(keys.items()))] = (num.copy(), den.copy(), scale)


def _drop(cfg, point, rng, n, n_blocks):
    dims = SystemDims(M=point["M"], K=cfg.dims.K, T=cfg.dims.T, J=max(n_blocks, 1))
    ls = gen_lsfc(dims, cfg.large_scale, rng)
    aoas = draw_mean_aoas(rng, dims.K, cfg.aoa_limit_deg)
    rms = np.deg2rad(point["as_deg"])
    corr = [
        correlation_from_profile(
            dims.M,
            SpatialProfile.from_rms(float(a), rms, spacing_wavelengths=point["spacing"], pas_kind=cfg.pas_kind),
        )
        for a in aoas
    ]
    pilots = pilots_for_snr(ls.beta, point["snr_db"], dims.K, dims.T)
    blocks = []
    for _ in range(max(n_blocks, 1)):
        s = gen_ssfc(corr, rng, batch=(n,))
        blocks.append((s, received_block(s, ls, pilots, 1.0, rng)))
    return dims, ls, aoas, corr, pilots, blocks


def _lsfc_metrics(acc, keys, beta_hat, beta, log_var):
    sq = analysis.db_square_error(beta_hat, beta)
    ok = np.isfinite(sq)
    acc.add("nmse_lsfc_db", keys, np.where(ok, sq, 0.0).sum(-1), ok.sum(-1), 1.0 / log_var)
    acc.add("failure_rate", keys, (~ok).sum(-1), ok.shape[-1])


def simulate_lsfc(cfg, point, rng, n):
    js = sorted({j for j in cfg.j_blocks if j >= 1}) or [1]
    dims, ls, _, _, pilots, blocks = _drop(cfg, point, rng, n, max(js))
    log_var = analysis.log_beta_variance(cfg.large_scale)
    ys = np.stack([b.y for _, b in blocks])
    acc = Accumulator(n)
    for J in js:
        est = lsfc.estimate_lsfc_multi(ys[:J], pilots, dims.M)
        _lsfc_metrics(acc, {"estimator": "proposed", "J": J}, est.beta_hat, ls.beta, log_var)
    s0, b0 = blocks[0]
    conv = em.conventional_lsfc_ls(b0.y, s0.h, pilots)
    _lsfc_metrics(acc, {"estimator": "conventional", "J": 1}, conv, ls.beta, log_var)
    return acc


def _ssfc_err(h_hat, h, valid):
    err = np.sum(np.abs(h_hat - h) ** 2, axis=-2)  # per trial, per user
    return np.where(valid, err, 0.0).sum(-1), valid.sum(-1) * h.shape[-2]


def simulate_em(cfg, point, rng, n):
    dims, ls, _, corr, pilots, blocks = _drop(cfg, point, rng, n, 1)
    s0, b0 = blocks[0]
    log_var = analysis.log_beta_variance(cfg.large_scale)
    prior = em.em_prior(cfg.large_scale, dims.K)
    acc = Accumulator(n)
    all_users = np.ones((n, dims.K), bool)
    for variant in ("EM", "MEM"):
        _, trace = em.em_joint(b0.y, pilots, corr, prior, cfg.em_iters, variant, tol=0.0)
        for it in range(len(trace.sqrt_beta)):
            keys = {"estimator": variant, "iteration": it}
            _lsfc_metrics(acc, keys, trace.beta(it), ls.beta, log_var)
            acc.add("nmse_ssfc", keys, *_ssfc_err(trace.h_hat[it], s0.h, all_users))

    beta_hat = lsfc.estimate_lsfc(b0.y, pilots, dims.M).beta_hat
    keys = {"estimator": "proposed", "iteration": ""}
    _lsfc_metrics(acc, keys, beta_hat, ls.beta, log_var)
    gamma = ssfc.gamma_from_beta(beta_hat, pilots.energy)
    valid = np.isfinite(gamma)
    yp = b0.y @ pilots.vectors()
    h_hat = yp / np.where(valid, gamma, 1.0)[..., None, :]
    acc.add("nmse_ssfc", keys, *_ssfc_err(h_hat, s0.h, valid))
    return acc


def _wrap_angle(x):
    return (x + np.pi / 2) % np.pi - np.pi / 2


def simulate_ssfc(cfg, point, rng, n):
    js = sorted(set(cfg.j_blocks))
    dims, ls, aoas, _, pilots, blocks = _drop(cfg, point, rng, n, max(js + [1]))
    s0, b0 = blocks[0]
    ys = np.stack([b.y for _, b in blocks])
    energy = pilots.energy
    yp = np.swapaxes(b0.y @ pilots.vectors(), -1, -2)  # (n, K, M)
    h = np.swapaxes(s0.h, -1, -2)
    grid = ssfc.AoaSearchGrid(cfg.aoa_grid_points, cfg.aoa_refine_iters)
    acc = Accumulator(n)

    gammas = {}
    for J in js:
        beta = ls.beta if J == 0 else lsfc.estimate_lsfc_multi(ys[:J], pilots, dims.M).beta_hat
        gammas[J] = np.broadcast_to(ssfc.gamma_from_beta(beta, energy), (n, dims.K))

    for kind, m in product(cfg.basis_kinds, cfg.modeling_orders):
        if kind == "klt":
            continue  # channel-dependent; only evaluated in the theory surface
        basis = bases.make_basis(kind, dims.M, int(m))
        phi_hat = ssfc.aoa_search_yp(yp, basis, point["spacing"], grid)
        aoa_err = _wrap_angle(phi_hat - aoas)
        for J in js:
            gamma = gammas[J]
            valid = np.isfinite(gamma)
            safe = np.where(valid, gamma, 1.0)
            h_hat = ssfc.rr_estimate(yp, safe, basis, phi_hat, point["spacing"]).h_hat
            err = np.sum(np.abs(h_hat - h) ** 2, axis=-1)
            keys = {"basis": kind, "m": int(m), "J": J}
            acc.add("nmse_ssfc", keys, np.where(valid, err, 0.0).sum(-1), valid.sum(-1) * dims.M)
            acc.add("failure_rate", keys, (~valid).sum(-1), dims.K)
        acc.add("aoa_mse_deg2", {"basis": kind, "m": int(m), "J": ""},
                np.rad2deg(aoa_err) ** 2 @ np.ones(dims.K), dims.K)
    return acc


SIMULATORS = {
    "lsfc_vs_spacing": simulate_lsfc,
    "lsfc_vs_M": simulate_lsfc,
    "em_vs_proposed": simulate_em,
    "ssfc_vs_snr_order": simulate_ssfc,
}


def theory_rows(cfg):
    """Formula-only MSE surface; averages over the configured mean AoAs."""
    rows = []
    for M, xi, as_deg in product(cfg.antennas, cfg.spacings, cfg.angle_spreads_deg):
        rms = np.deg2rad(as_deg)
        profiles = [
            SpatialProfile.from_rms(np.deg2rad(a), rms, spacing_wavelengths=xi, pas_kind=cfg.pas_kind)
            for a in cfg.theory_aoas_deg
        ]
        corr = [correlation_from_profile(M, p) for p in profiles]
        be = cfg.dims.T * 10 ** (np.asarray(cfg.snr_db, float) / 10)
        for kind, estimator in product(cfg.basis_kinds, ("I", "II")):
            curves = []
            for prof, c in zip(profiles, corr):
                w = steering_vector(M, prof.mean_aoa, xi) if estimator == "II" else None
                if kind == "klt":
                    aligned = c.phi if w is None else w.conj()[:, None] * c.phi * w[None, :]
                    parent = bases.klt_basis(aligned).parent
                    _, tot = analysis.mse_curve(parent, aligned, None, be)
                else:
                    parent = bases.make_basis(kind, M, M).parent
                    _, tot = analysis.mse_curve(parent, c.phi, w, be)
                curves.append(tot)
            mean_curve = np.mean(curves, axis=0) / M  # (snr, M)
            for (si, snr), m in product(enumerate(cfg.snr_db), cfg.modeling_orders):
                keys = {"M": int(M), "spacing": float(xi), "as_deg": float(as_deg), "snr_db": float(snr),
                        "basis": kind, "estimator": estimator, "m": int(m)}
                rows.append((keys, "nmse_ssfc_theory", float(mean_curve[si, int(m) - 1]), len(profiles), 0.0))
    return rows
