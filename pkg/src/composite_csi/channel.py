"""Uplink channel model: large-scale fading, BS-side spatial correlation,
small-scale fading and received pilot blocks.

Array conventions: antennas run along axis ``-2`` and users along axis
``-1`` for channel matrices (``M x K``); received blocks are ``M x T``.
Any leading axes are treated as independent Monte Carlo draws.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import toeplitz

from .rng import complex_normal

# Standard SCM base-station subpath offsets (degrees) for a 2 degree RMS spread.
SCM_SUBPATH_OFFSETS_DEG = np.array(
    [0.0894, 0.2826, 0.4984, 0.7431, 1.0257, 1.3594, 1.7688, 2.2961, 3.0389, 4.3101]
)
SCM_REFERENCE_AS_DEG = 2.0

EIGEN_FLOOR = 1e-10
QUAD_TOL = 1e-10


class DimensionError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class SystemDims:
    M: int
    K: int
    T: int
    J: int = 1

    def __post_init__(self):
        for name in ("M", "K", "T", "J"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not (self.M >= self.T >= self.K):
            raise ValueError(f"need M >= T >= K, got M={self.M}, T={self.T}, K={self.K}")


@dataclass(frozen=True)
class LargeScaleParams:
    alpha: float = 3.0
    sigma_s_db: float = 10.0
    cell_radius: float = 100.0
    min_distance: float = 1.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValueError("pathloss exponent must exceed 2")
        if self.sigma_s_db < 0:
            raise ValueError("shadowing std must be non-negative")
        if not (0 < self.min_distance < self.cell_radius):
            raise ValueError("need 0 < min_distance < cell_radius")


@dataclass(frozen=True)
class LargeScaleRealization:
    beta: np.ndarray
    distances: np.ndarray
    shadow_db: np.ndarray


@dataclass(frozen=True)
class SpatialProfile:
    """Power azimuth spectrum seen at the BS for one user.

    ``angle_spread`` is the half-width of the uniform PAS (radians).  The SCM
    subpath mode uses the same RMS spread, ``angle_spread / sqrt(3)``.
    """

    mean_aoa: float
    angle_spread: float
    spacing_wavelengths: float = 0.5
    pas_kind: str = "uniform"
    n_path: int = 1
    n_subpath: int = 20

    def __post_init__(self):
        if not abs(self.mean_aoa) <= np.pi / 2 + 1e-12:
            raise ValueError("mean AoA must lie in [-pi/2, pi/2]")
        if self.angle_spread < 0:
            raise ValueError("angle spread must be non-negative")
        if not (np.isfinite(self.spacing_wavelengths) and self.spacing_wavelengths >= 0):
            raise ValueError("antenna spacing must be finite and non-negative")
        if self.pas_kind not in ("uniform", "scm_subpaths"):
            raise ValueError(f"unknown PAS kind {self.pas_kind!r}")
        if self.pas_kind == "scm_subpaths" and (self.n_path != 1 or self.n_subpath != 20):
            raise ValueError("SCM subpath mode supports 1 path with 20 subpaths")

    @classmethod
    def from_rms(cls, mean_aoa, rms_spread, **kw):
        """Build a profile from an RMS angle spread (radians)."""
        return cls(mean_aoa=mean_aoa, angle_spread=np.sqrt(3.0) * rms_spread, **kw)

    @property
    def rms_spread(self):
        return self.angle_spread / np.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    phi: np.ndarray
    sqrt: np.ndarray

    @classmethod
    def from_matrix(cls, phi):
        phi = np.asarray(phi, dtype=complex)
        phi = 0.5 * (phi + phi.conj().T)
        return cls(phi=phi, sqrt=hermitian_sqrt(phi))

    @property
    def M(self):
        return self.phi.shape[0]


@dataclass(frozen=True)
class SmallScaleRealization:
    h_tilde: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class ReceivedBlock:
    y: np.ndarray
    noise: np.ndarray | None = None
    noise_seed: object = None


@dataclass(frozen=True)
class SteeringDiagonal:
    phi_angle: float
    entries: np.ndarray

    @property
    def matrix(self):
        return np.diag(self.entries)


@dataclass(frozen=True)
class ChannelRealization:
    """Ground truth for one drop; simulation-only."""

    lsfc: LargeScaleRealization
    ssfc: SmallScaleRealization
    correlations: list = field(default_factory=list)
    mean_aoas: np.ndarray | None = None


def gen_lsfc(dims, params, rng, batch=()):
    """Draw per-user LSFCs ``beta = 10**(shadow/10) * d**-alpha``.

    Distances are area-uniform on the annulus ``[min_distance, cell_radius]``.
    """
    shape = tuple(batch) + (dims.K,)
    d0, R = params.min_distance, params.cell_radius
    d = np.sqrt(d0**2 + rng.uniform(size=shape) * (R**2 - d0**2))
    shadow = params.sigma_s_db * rng.standard_normal(shape)
    beta = 10.0 ** (shadow / 10.0) * d ** (-params.alpha)
    return LargeScaleRealization(beta=beta, distances=d, shadow_db=shadow)


def steering_vector(M, phi, spacing_wavelengths):
    """Entries ``exp(-j 2 pi (i-1) xi/lambda sin phi)``; ``phi`` may be an array."""
    phi = np.asarray(phi, dtype=float)
    i = np.arange(M)
    return np.exp(-2j * np.pi * spacing_wavelengths * np.sin(phi)[..., None] * i)


def steering_diag(M, phi, spacing_wavelengths):
    if abs(phi) > np.pi / 2 + 1e-12:
        raise ValueError("AoA must lie in [-pi/2, pi/2]")
    return SteeringDiagonal(phi_angle=float(phi), entries=steering_vector(M, phi, spacing_wavelengths))


def hermitian_sqrt(phi, floor=EIGEN_FLOOR):
    """Hermitian square root with eigenvalues below ``floor`` clamped to zero."""
    w, v = np.linalg.eigh(phi)
    w = np.where(w < floor, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def _gauss_panels(f, lo, hi, n_panels, n_nodes):
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    nodes = (0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * x
    weights = half[:, None] * w
    return f(nodes.ravel()).T @ weights.ravel()


def _uniform_pas_lags(M, profile):
    # [Phi]_{i,j} depends only on i - j for a ULA, so integrate one column.
    lags = np.arange(M)
    lo = profile.mean_aoa - profile.angle_spread
    hi = profile.mean_aoa + profile.angle_spread
    density = 1.0 / (hi - lo)
    k = 2 * np.pi * profile.spacing_wavelengths * lags

    def integrand(theta):
        # lags are integers, so the phasors are powers of the unit-lag phasor
        z = np.exp(-1j * k[1 if M > 1 else 0] * np.sin(theta))
        out = np.empty(np.shape(theta) + (M,), complex)
        out[..., 0] = density
        if M > 1:
            out[..., 1:] = z[..., None]
            np.cumprod(out[..., 1:], axis=-1, out=out[..., 1:])
            out[..., 1:] *= density
        return out

    # one panel per oscillation of the fastest lag, checked against a finer rule
    n_panels = int(np.ceil(k[-1] * (hi - lo) / (2 * np.pi))) + 1
    for _ in range(4):
        coarse = _gauss_panels(integrand, lo, hi, n_panels, 16)
        fine = _gauss_panels(integrand, lo, hi, n_panels, 24)
        if np.max(np.abs(fine - coarse)) <= QUAD_TOL:
            return fine
        n_panels *= 2

    val, err, info = quad_vec(
        integrand, lo, hi, epsabs=QUAD_TOL, epsrel=0.0, norm="max", limit=20000,
        full_output=True,
    )
    if info.status != 0 or err > QUAD_TOL:
        raise QuadratureError(
            f"correlation quadrature did not converge (err={err:.3e}, status={info.status})"
        )
    return val


def _scm_subpath_angles(profile):
    scale = np.rad2deg(profile.rms_spread) / SCM_REFERENCE_AS_DEG
    offs = np.deg2rad(np.concatenate([SCM_SUBPATH_OFFSETS_DEG, -SCM_SUBPATH_OFFSETS_DEG]) * scale)
    return profile.mean_aoa + offs


@lru_cache(maxsize=512)
def _correlation_cached(M, profile):
    xi = profile.spacing_wavelengths
    if profile.angle_spread == 0 or xi == 0:
        w = steering_vector(M, profile.mean_aoa, xi)
        phi = np.outer(w, w.conj())
    elif profile.pas_kind == "uniform":
        col = _uniform_pas_lags(M, profile)
        phi = toeplitz(col)
    else:
        a = steering_vector(M, _scm_subpath_angles(profile), xi)
        phi = a.T @ a.conj() / a.shape[0]
    return CorrelationMatrix.from_matrix(phi)


def correlation_from_profile(M, profile):
    """Spatial correlation of an ``M``-element ULA under ``profile``.

    Results are cached; the returned arrays must be treated as read-only.
    """
    return _correlation_cached(int(M), profile)


def gen_ssfc(correlations, rng, batch=()):
    """Draw ``h_k = Phi_k^{1/2} h~_k`` for every user."""
    shapes = {c.sqrt.shape for c in correlations}
    if len(shapes) != 1 or any(a != b for a, b in shapes):
        raise DimensionError("all correlation matrices must share one M x M shape")
    roots = np.stack([c.sqrt for c in correlations])
    K, M, _ = roots.shape
    h_tilde = complex_normal(rng, tuple(batch) + (M, K))
    h = np.swapaxes(roots @ np.swapaxes(h_tilde, -1, -2)[..., None], -2, -3)[..., 0]
    return SmallScaleRealization(h_tilde=h_tilde, h=h)


def received_block(ssfc, lsfc, pilots, noise_power=1.0, rng=None, noise_seed=None):
    """``Y = H D_beta^{1/2} P + N`` with i.i.d. CN(0, noise_power) noise."""
    h = ssfc.h
    beta = np.asarray(lsfc.beta)
    p = pilots.p
    M, K = h.shape[-2:]
    if beta.shape[-1] != K or p.shape[-2] != K:
        raise DimensionError(f"user count mismatch: H has {K}, beta {beta.shape}, P {p.shape}")
    if noise_power < 0:
        raise ValueError("noise power must be non-negative")
    y = (h * np.sqrt(beta)[..., None, :]) @ p
    if noise_power > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_power > 0")
        noise = complex_normal(rng, y.shape, noise_power)
    else:
        noise = np.zeros(y.shape, dtype=complex)
    return ReceivedBlock(y=y + noise, noise=noise, noise_seed=noise_seed)


def draw_mean_aoas(rng, K, limit_deg=60.0, batch=()):
    lim = np.deg2rad(limit_deg)
    return rng.uniform(-lim, lim, size=tuple(batch) + (K,))


def normalize_noise(y, noise_power):
    """Rescale raw samples to unit noise variance."""
    if noise_power <= 0:
        raise ValueError("noise power must be positive")
    return np.asarray(y) / np.sqrt(noise_power)
