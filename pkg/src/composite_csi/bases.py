"""Unitary bases for rank-reduced channel representations."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

KINDS = ("polynomial", "dct2", "klt")


@dataclass(frozen=True, eq=False)
class RrBasis:
    """First ``m`` columns of a unitary ``M x M`` parent basis.

    ``eigenvalues`` is populated for KLT bases only.
    """

    parent: np.ndarray
    kind: str
    m: int
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        M = self.parent.shape[0]
        if not 1 <= self.m <= M:
            raise ValueError(f"modeling order m={self.m} outside [1, {M}]")
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @property
    def q(self):
        return self.parent[:, : self.m]

    @property
    def M(self):
        return self.parent.shape[0]

    def with_order(self, m):
        return RrBasis(self.parent, self.kind, m, self.eigenvalues)

    def project(self, x):
        """Orthogonal projection of the trailing axis of ``x`` onto span(Q_m)."""
        q = self.q
        return (x @ q.conj()) @ q.T


def _check_order(M, m):
    if not (1 <= m <= M):
        raise ValueError(f"modeling order m={m} outside [1, {M}]")


@lru_cache(maxsize=64)
def _polynomial_parent(M):
    # Arnoldi on x = 0..M-1 with full reorthogonalisation. Spans the same
    # nested subspaces as QR of the monomial matrix [(i-1)^(j-1)], without
    # ever forming it; positive leading coefficients match R_jj > 0.
    x = np.arange(M, dtype=float)
    Q = np.zeros((M, M))
    Q[:, 0] = 1.0 / np.sqrt(M)
    for j in range(1, M):
        v = x * Q[:, j - 1]
        for _ in range(2):
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
        Q[:, j] = v / np.linalg.norm(v)
    Q.setflags(write=False)
    return Q


@lru_cache(maxsize=64)
def _dct2_parent(M):
    i = np.arange(1, M + 1)[:, None]
    j = np.arange(1, M + 1)[None, :]
    scale = np.where(j == 1, np.sqrt(1.0 / M), np.sqrt(2.0 / M))
    Q = scale * np.cos(np.pi * (2 * i - 1) * (j - 1) / (2 * M))
    Q.setflags(write=False)
    return Q


def polynomial_basis(M, m):
    """Orthonormal discrete polynomial basis, ascending degree."""
    _check_order(M, m)
    return RrBasis(_polynomial_parent(int(M)), "polynomial", int(m))


def dct2_basis(M, m):
    """Orthonormal type-2 DCT basis, ascending frequency."""
    _check_order(M, m)
    return RrBasis(_dct2_parent(int(M)), "dct2", int(m))


def klt_basis(phi, w=None, m=None):
    """Eigenvectors of ``W^H Phi W`` (or ``Phi``) by descending eigenvalue.

    ``phi`` is a ``CorrelationMatrix`` or a Hermitian array; ``w`` is an
    optional ``SteeringDiagonal``.  Ties keep ascending original index.
    """
    mat = np.asarray(getattr(phi, "phi", phi))
    if not np.allclose(mat, mat.conj().T, atol=1e-10):
        raise np.linalg.LinAlgError("KLT requires a Hermitian correlation matrix")
    if w is not None:
        d = w.entries
        mat = d.conj()[:, None] * mat * d[None, :]
    M = mat.shape[0]
    m = M if m is None else m
    _check_order(M, m)
    vals, vecs = np.linalg.eigh(mat)
    order = np.lexsort((np.arange(M), -np.round(vals, 12)))
    return RrBasis(vecs[:, order], "klt", int(m), eigenvalues=vals[order])


def make_basis(kind, M, m, phi=None, w=None):
    if kind == "polynomial":
        return polynomial_basis(M, m)
    if kind == "dct2":
        return dct2_basis(M, m)
    if kind == "klt":
        if phi is None:
            raise ValueError("KLT basis needs a correlation matrix")
        return klt_basis(phi, w, m)
    raise ValueError(f"unknown basis kind {kind!r}")


def captured_energy(basis, phi, w=None):
    """Fraction ``tr(Q_m^H W^H Phi W Q_m) / M`` of aligned correlation energy."""
    mat = np.asarray(getattr(phi, "phi", phi))
    if w is not None:
        d = w.entries
        mat = d.conj()[:, None] * mat * d[None, :]
    q = basis.q
    return float(np.real(np.trace(q.conj().T @ mat @ q))) / basis.M
