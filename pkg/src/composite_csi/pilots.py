"""Orthogonal uplink pilots and SNR bookkeeping."""

from dataclasses import dataclass

import numpy as np


class InvalidPilotError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PilotMatrix:
    """Pilot matrix ``P`` whose rows are ``p_k^H``.

    ``p`` may carry leading batch axes when pilot power is set per trial.
    """

    p: np.ndarray

    @property
    def energy(self):
        return np.sum(np.abs(self.p) ** 2, axis=-1)

    @property
    def K(self):
        return self.p.shape[-2]

    @property
    def T(self):
        return self.p.shape[-1]

    def vector(self, k):
        """Pilot column ``p_k`` (conjugate of row ``k``)."""
        return self.p[..., k, :].conj()

    def vectors(self):
        """All pilot columns stacked as ``T x K``, i.e. ``P^H``."""
        return np.swapaxes(self.p, -1, -2).conj()


@dataclass(frozen=True)
class SnrSpec:
    snr: np.ndarray

    @property
    def snr_db(self):
        return 10 * np.log10(self.snr)


def orthogonal_pilots(K, T, per_symbol_power=1.0):
    """First ``K`` rows of a unit-modulus ``T``-point DFT, scaled by sqrt(power).

    ``per_symbol_power`` is a scalar or an array ending in a length-``K`` axis
    (per-user override, possibly batched).
    """
    if T < K:
        raise InvalidPilotError(f"pilot length T={T} is shorter than user count K={K}")
    power = np.asarray(per_symbol_power, dtype=float)
    if np.any(power <= 0):
        raise InvalidPilotError("pilot power must be positive")
    n = np.arange(T)
    dft = np.exp(-2j * np.pi * np.outer(np.arange(K), n) / T)
    if power.ndim == 0:
        return PilotMatrix(p=np.sqrt(power) * dft)
    if power.shape[-1] != K:
        raise InvalidPilotError("per-user power must have one entry per user")
    return PilotMatrix(p=np.sqrt(power)[..., None] * dft)


def snr_for(lsfc, pilots):
    beta = np.asarray(getattr(lsfc, "beta", lsfc))
    return SnrSpec(snr=beta * pilots.energy / pilots.T)


def power_for_snr(beta, snr):
    """Per-symbol pilot power giving ``SNR_k = beta_k ||p_k||^2 / T``."""
    return np.asarray(snr, dtype=float) / np.asarray(beta, dtype=float)


def pilots_for_snr(beta, snr_db, K, T):
    """Orthogonal pilots power-controlled so every user sees ``snr_db``."""
    return orthogonal_pilots(K, T, power_for_snr(beta, 10 ** (snr_db / 10)))
