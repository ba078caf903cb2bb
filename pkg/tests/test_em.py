import numpy as np
import pytest

from composite_csi.analysis import db_square_error
from composite_csi.channel import (
    CorrelationMatrix,
    LargeScaleParams,
    LargeScaleRealization,
    SmallScaleRealization,
    SpatialProfile,
    SystemDims,
    correlation_from_profile,
    gen_lsfc,
    gen_ssfc,
    received_block,
)
from composite_csi.em import (
    EmError,
    EmPrior,
    conventional_lsfc_ls,
    design_matrix,
    em_joint,
    em_prior,
    em_step_lsfc,
    em_step_ssfc,
    gram_khatri_rao,
    mem_gram_deviation,
)
from composite_csi.pilots import PilotMatrix, orthogonal_pilots, pilots_for_snr
from composite_csi.rng import complex_normal, substream


def _lsfc(beta):
    beta = np.asarray(beta, float)
    return LargeScaleRealization(beta=beta, distances=np.ones_like(beta), shadow_db=np.zeros_like(beta))


def _prior_moments(params):
    # closed forms for area-uniform d on [d0, R] and log-normal shadowing
    R, d0, a, s = params.cell_radius, params.min_distance, params.alpha, params.sigma_s_db

    def moment_d(q):
        return 2 / (R**2 - d0**2) * (R ** (2 - q) - d0 ** (2 - q)) / (2 - q)

    mean = np.exp(0.5 * (s * np.log(10) / 20) ** 2) * moment_d(a / 2)
    second = np.exp(0.5 * (s * np.log(10) / 10) ** 2) * moment_d(a)
    return mean, second - mean**2


def _setup(M=12, K=3, T=4, seed=0):
    rng = substream(seed)
    corr = [correlation_from_profile(M, SpatialProfile.from_rms(a, np.deg2rad(10))) for a in np.linspace(-0.6, 0.6, K)]
    ls = _lsfc(rng.uniform(0.2, 2.0, K))
    pil = orthogonal_pilots(K, T, 1.5)
    s = gen_ssfc(corr, rng)
    return rng, corr, ls, pil, s, received_block(s, ls, pil, 1.0, rng)


class TestPrior:
    def test_mean_matches_closed_form(self):
        params = LargeScaleParams()
        mean, var = _prior_moments(params)
        prior = em_prior(params, 8)
        np.testing.assert_allclose(prior.mean_sqrt_beta, mean, rtol=0.02)
        # heavy right tail: the sample variance of sqrt(beta) converges slowly
        assert 0.6 * var < prior.cov_sqrt_beta[0, 0] < 1.2 * var
        np.testing.assert_array_equal(prior.cov_sqrt_beta, np.eye(8) * prior.cov_sqrt_beta[0, 0])

    def test_invalid_covariance_rejected(self):
        with pytest.raises(ValueError):
            EmPrior(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            EmPrior(np.zeros(2), np.diag([1.0, -1.0]))


class TestConventionalLs:
    def test_noiseless_single_user(self):
        h = complex_normal(substream(1), (10, 1))
        pil = orthogonal_pilots(1, 3, 2.0)
        y = received_block(SmallScaleRealization(h, h), _lsfc([0.37]), pil, 0.0).y
        assert conventional_lsfc_ls(y, h, pil)[0] == pytest.approx(0.37, rel=1e-12)

    def test_noiseless_multi_user(self):
        _, corr, ls, pil, s, _ = _setup()
        y = received_block(s, ls, pil, 0.0).y
        np.testing.assert_allclose(conventional_lsfc_ls(y, s, pil), ls.beta, rtol=1e-10)

    def test_gram_identity(self):
        rng = substream(2)
        h, p = complex_normal(rng, (7, 3)), complex_normal(rng, (3, 5))
        a = design_matrix(h, p)
        np.testing.assert_allclose(a.conj().T @ a, gram_khatri_rao(h, p), atol=1e-12)
        s = rng.uniform(size=3)
        # A sqrt(beta) = vec(H D P), column-major
        np.testing.assert_allclose(a @ s, ((h * s) @ p).reshape(-1, order="F"), atol=1e-12)

    def test_nmse_decreases_with_antennas(self):
        params, K, T = LargeScaleParams(), 8, 8
        out = []
        for M in (50, 100, 200):
            errs = []
            for drop in range(60):
                rng = substream(3, M, drop)
                ls = gen_lsfc(SystemDims(M, K, T), params, rng)
                corr = [correlation_from_profile(M, SpatialProfile.from_rms(a, np.deg2rad(15)))
                        for a in rng.uniform(-np.pi / 3, np.pi / 3, K)]
                pil = pilots_for_snr(ls.beta, 10.0, K, T)
                s = gen_ssfc(corr, rng, batch=(20,))
                y = received_block(s, ls, pil, 1.0, rng).y
                errs.append(db_square_error(conventional_lsfc_ls(y, s, pil), ls.beta))
            out.append(np.nanmean(errs))
        assert out[0] > out[1] > out[2]

    def test_singular_gram(self):
        h = np.ones((4, 2), complex)
        with pytest.raises(EmError):
            conventional_lsfc_ls(np.ones((4, 2)), h, PilotMatrix(np.ones((2, 2), complex)))


class TestEmSteps:
    def test_zero_iterations_returns_prior_mean(self):
        _, corr, _, pil, _, blk = _setup()
        prior = EmPrior(np.array([0.3, 0.2, 0.1]), np.eye(3) * 0.01)
        state, trace = em_joint(blk, pil, corr, prior, max_iters=0)
        np.testing.assert_array_equal(state.sqrt_beta_hat, prior.mean_sqrt_beta)
        assert state.iteration == 0 and len(trace.sqrt_beta) == 1

    def test_ssfc_step_is_scaled_matched_filter_for_identity(self):
        M, K, T = 10, 2, 3
        rng = substream(4)
        y = complex_normal(rng, (M, T))
        pil = orthogonal_pilots(K, T, 2.0)
        eye = CorrelationMatrix.from_matrix(np.eye(M))
        eig = tuple(np.stack(v) for v in zip(*[np.linalg.eigh(eye.phi)] * K))
        s = np.array([0.5, 1.3])
        h = em_step_ssfc(y, pil.p, s, eig)
        yp = y @ pil.vectors()
        for k in range(K):
            ratio = h[:, k] / yp[:, k]
            np.testing.assert_allclose(ratio, ratio[0], atol=1e-10)
            assert ratio[0].real == pytest.approx(s[k] / (1 + 6.0 * s[k] ** 2))

    def test_em_equals_mem_for_orthogonal_channels(self):
        M, K, T = 16, 3, 4
        rng = substream(5)
        u, _ = np.linalg.qr(complex_normal(rng, (M, K)))
        h = np.sqrt(M) * u
        pil = orthogonal_pilots(K, T, 1.0)
        y = complex_normal(rng, (M, T))
        prior = EmPrior(np.full(K, 0.4), np.eye(K) * 0.05)
        np.testing.assert_allclose(
            em_step_lsfc(y, pil.p, h, prior, "EM"), em_step_lsfc(y, pil.p, h, prior, "MEM"), atol=1e-10
        )

    def test_unknown_variant(self):
        _, corr, _, pil, s, blk = _setup()
        with pytest.raises(ValueError):
            em_step_lsfc(blk.y, pil.p, s.h, EmPrior(np.ones(3), np.eye(3)), "VB")

    def test_mem_deviation_decays_with_antennas(self):
        devs = []
        for M in (32, 64, 128, 256):
            corr = [correlation_from_profile(M, SpatialProfile.from_rms(a, np.deg2rad(7.2))) for a in (-0.4, 0.1, 0.7)]
            s = gen_ssfc(corr, substream(6, M), batch=(200,))
            devs.append(np.mean(mem_gram_deviation(s.h, orthogonal_pilots(3, 4))))
        assert np.all(np.diff(devs) < 0)

    def test_trace_and_state_are_consistent(self):
        _, corr, _, pil, _, blk = _setup(seed=7)
        prior = EmPrior(np.full(3, 0.5), np.eye(3) * 0.2)
        state, trace = em_joint(blk, pil, corr, prior, max_iters=5, tol=0.0)
        assert state.iteration == 5 and len(trace.h_hat) == 6
        np.testing.assert_array_equal(trace.sqrt_beta[-1], state.sqrt_beta_hat)
        np.testing.assert_allclose(state.a_matrix, design_matrix(state.h_hat, pil.p))
        np.testing.assert_allclose(trace.beta(2), trace.sqrt_beta[2] ** 2)

    def test_negative_iterations_rejected(self):
        _, corr, _, pil, _, blk = _setup()
        with pytest.raises(ValueError):
            em_joint(blk, pil, corr, EmPrior(np.ones(3), np.eye(3)), max_iters=-1)
