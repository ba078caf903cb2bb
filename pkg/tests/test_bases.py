import mpmath
import numpy as np
import pytest
import scipy.fft
from hypothesis import given, settings
from hypothesis import strategies as st

from composite_csi.bases import (
    captured_energy,
    dct2_basis,
    klt_basis,
    make_basis,
    polynomial_basis,
)
from composite_csi.channel import SpatialProfile, correlation_from_profile, steering_diag
from composite_csi.rng import complex_normal, substream


def _mp_vandermonde_q(M, dps=120):
    """Modified Gram-Schmidt on [(i-1)^(j-1)] in extended precision."""
    with mpmath.workdps(dps):
        cols = [[mpmath.mpf(i) ** j for i in range(M)] for j in range(M)]
        q = []
        for v in cols:
            v = list(v)
            for u in q:
                r = mpmath.fsum(a * b for a, b in zip(u, v))
                v = [a - r * b for a, b in zip(v, u)]
            nrm = mpmath.sqrt(mpmath.fsum(a * a for a in v))
            q.append([a / nrm for a in v])
        return np.array([[float(x) for x in col] for col in q]).T


class TestPolynomial:
    def test_first_column_constant(self):
        for M in (1, 7, 100):
            np.testing.assert_allclose(polynomial_basis(M, 1).q[:, 0], 1 / np.sqrt(M))

    def test_full_order_is_unitary(self):
        q = polynomial_basis(100, 100).q
        np.testing.assert_allclose(q @ q.T, np.eye(100), atol=1e-10)
        np.testing.assert_allclose(q.T @ q, np.eye(100), atol=1e-10)

    def test_reproduces_quadratic(self):
        v = np.arange(8.0) ** 2
        np.testing.assert_allclose(polynomial_basis(8, 3).project(v), v, atol=1e-12)
        assert np.linalg.norm(polynomial_basis(8, 2).project(v) - v) > 1.0

    @pytest.mark.parametrize("M", [12, 30])
    def test_matches_extended_precision_qr(self, M):
        np.testing.assert_allclose(polynomial_basis(M, M).q, _mp_vandermonde_q(M), atol=1e-10)

    def test_columns_ordered_by_degree(self):
        q = polynomial_basis(20, 20).q
        x = np.arange(20.0)
        for j in range(1, 6):
            # column j is orthogonal to every polynomial of lower degree
            lower = np.vander(x, j, increasing=True)
            assert np.abs(lower.T @ q[:, j]).max() < 1e-8 * np.abs(lower).max()

    def test_order_out_of_range(self):
        with pytest.raises(ValueError):
            polynomial_basis(5, 0)
        with pytest.raises(ValueError):
            polynomial_basis(5, 6)


class TestDct:
    def test_first_column_constant(self):
        np.testing.assert_allclose(dct2_basis(9, 2).q[:, 0], 1 / np.sqrt(9))

    def test_orthonormal(self):
        q = dct2_basis(100, 30).q
        np.testing.assert_allclose(q.T @ q, np.eye(30), atol=1e-10)

    def test_closed_form_entry(self):
        assert dct2_basis(4, 4).q[1, 1] == pytest.approx(np.sqrt(0.5) * np.cos(3 * np.pi / 8), abs=1e-15)

    @pytest.mark.parametrize("M", [4, 17, 100])
    def test_matches_scipy_dct(self, M):
        ref = scipy.fft.dct(np.eye(M), type=2, norm="ortho", axis=0).T
        np.testing.assert_allclose(dct2_basis(M, M).q, ref, atol=1e-13)


class TestKlt:
    def test_identity_has_flat_spectrum(self):
        b = klt_basis(np.eye(10), m=4)
        np.testing.assert_allclose(b.eigenvalues, 1.0)
        assert captured_energy(b, np.eye(10)) == pytest.approx(0.4)

    def test_aligned_point_source(self):
        M, phi = 16, 0.4
        c = correlation_from_profile(M, SpatialProfile(mean_aoa=phi, angle_spread=0.0))
        b = klt_basis(c, steering_diag(M, phi, 0.5), m=1)
        assert b.eigenvalues[0] == pytest.approx(M)
        v = b.q[:, 0] * np.conj(b.q[0, 0]) / abs(b.q[0, 0])
        np.testing.assert_allclose(v, 1 / np.sqrt(M), atol=1e-10)

    def test_energy_ordering_at_high_correlation(self):
        M, phi = 100, 0.35
        c = correlation_from_profile(M, SpatialProfile.from_rms(phi, np.deg2rad(7.2)))
        w = steering_diag(M, phi, 0.5)
        e_klt = captured_energy(klt_basis(c, w, 30), c, w)
        e_dct = captured_energy(dct2_basis(M, 30), c, w)
        e_poly = captured_energy(polynomial_basis(M, 30), c, w)
        # oracle: sum of the 30 largest eigenvalues of the aligned matrix
        aligned = w.entries.conj()[:, None] * c.phi * w.entries[None, :]
        top = np.sort(np.linalg.eigvalsh(aligned))[::-1][:30].sum() / M
        assert e_klt == pytest.approx(top, rel=1e-10)
        assert e_klt >= e_dct >= e_poly

    def test_descending_with_index_ties(self):
        b = klt_basis(np.diag([1.0, 3.0, 3.0, 2.0]))
        np.testing.assert_allclose(b.eigenvalues, [3.0, 3.0, 2.0, 1.0])
        again = klt_basis(np.diag([1.0, 3.0, 3.0, 2.0]))
        np.testing.assert_array_equal(b.parent, again.parent)

    def test_non_hermitian_rejected(self):
        with pytest.raises(np.linalg.LinAlgError):
            klt_basis(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_make_basis_requires_phi_for_klt(self):
        with pytest.raises(ValueError):
            make_basis("klt", 4, 2)
        with pytest.raises(ValueError):
            make_basis("haar", 4, 2)


def _parent(kind, M):
    if kind == "klt":
        c = correlation_from_profile(M, SpatialProfile.from_rms(0.3, np.deg2rad(10)))
        return klt_basis(c)
    return make_basis(kind, M, M)


KIND = st.sampled_from(["polynomial", "dct2", "klt"])


@settings(max_examples=40, deadline=None)
@given(KIND, st.integers(2, 40), st.data())
def test_bases_are_nested(kind, M, data):
    full = _parent(kind, M)
    m = data.draw(st.integers(1, M - 1))
    m2 = data.draw(st.integers(m + 1, M))
    small, big = full.with_order(m).q, full.with_order(m2).q
    # span(Q_m) inside span(Q_m2): projecting onto the larger span is the identity
    np.testing.assert_allclose(big @ (big.conj().T @ small), small, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(KIND, st.integers(2, 40), st.integers(0, 2**31))
def test_projection_residual_non_increasing(kind, M, seed):
    full = _parent(kind, M)
    x = complex_normal(substream(seed), M)
    res = [np.linalg.norm(x - full.with_order(m).project(x)) for m in range(1, M + 1)]
    assert np.all(np.diff(res) <= 1e-9)
    assert res[-1] < 1e-9 * np.linalg.norm(x)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["polynomial", "dct2"]), st.integers(2, 40), st.floats(-1.2, 1.2))
def test_captured_energy_monotone(kind, M, phi):
    c = correlation_from_profile(M, SpatialProfile.from_rms(phi, np.deg2rad(7.2)))
    w = steering_diag(M, phi, 0.5)
    full = make_basis(kind, M, M)
    f = [captured_energy(full.with_order(m), c, w) for m in range(1, M + 1)]
    assert np.all(np.diff(f) >= -1e-12)
    assert f[-1] == pytest.approx(1.0, abs=1e-10)
