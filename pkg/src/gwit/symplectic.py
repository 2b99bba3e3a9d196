"""Symplectic linear algebra in the ``(x_1..x_N, p_1..p_N)`` ordering."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from gwit.model import CovarianceState, InputError, NumericalError, VACUUM_HALF

PAIRING_RTOL = 1e-8
NEGATIVE_TOL = 1e-12


@lru_cache(maxsize=64)
def _omega(n: int) -> np.ndarray:
    eye = np.eye(n)
    zero = np.zeros((n, n))
    om = np.block([[zero, eye], [-eye, zero]])
    om.setflags(write=False)
    return om


def symplectic_form(n_modes: int) -> np.ndarray:
    """Return ``Omega = [[0, I], [-I, 0]]`` for ``n_modes`` modes."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise InputError(f"n_modes must be >= 1, got {n_modes!r}")
    return _omega(int(n_modes)).copy()


def is_symplectic(s: np.ndarray, atol: float = 1e-10) -> bool:
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
        return False
    om = _omega(s.shape[0] // 2)
    return bool(np.max(np.abs(s @ om @ s.T - om)) <= atol)


def _check_square_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] % 2 or a.shape[0] == 0:
        raise InputError(f"expected an even-dimensional square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > 1e-9 * scale:
        raise InputError("matrix is not symmetric")
    return (a + a.T) / 2


def _sqrt_psd(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -NEGATIVE_TOL * scale:
        raise InputError(f"matrix has a negative eigenvalue {w[0]:.3g}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def _pair_moduli(values: np.ndarray, n: int) -> np.ndarray:
    """Collapse 2n eigenvalue moduli into n symplectic eigenvalues."""
    mod = np.sort(np.abs(values))
    first, second = mod[0::2], mod[1::2]
    scale = max(float(mod[-1]), np.finfo(float).tiny)
    gap = np.abs(first - second)
    if np.any(gap > PAIRING_RTOL * np.maximum(second, 1e-6 * scale)):
        raise NumericalError("eigenvalues of i*Omega*A do not come in +/- pairs")
    return (first + second) / 2


def symplectic_eigenvalues(a: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a symmetric positive (semi)definite matrix.

    Computed from the spectrum of the Hermitian matrix ``i sqrt(A) Omega
    sqrt(A)``, which is ``{+-lambda_k}``.  Returned ascending, length N.
    """
    a = _check_square_symmetric(a)
    n = a.shape[0] // 2
    r = _sqrt_psd(a)
    h = 1j * (r @ _omega(n) @ r)
    w = np.linalg.eigvalsh((h + h.conj().T) / 2)
    return _pair_moduli(w, n)


def symplectic_eigenvalues_direct(a: np.ndarray) -> np.ndarray:
    """Moduli of the eigenvalues of ``i Omega A``; cross-check for the symmetric path."""
    a = _check_square_symmetric(a)
    n = a.shape[0] // 2
    if np.linalg.eigvalsh(a)[0] < -NEGATIVE_TOL * max(1.0, float(np.max(np.abs(a)))):
        raise InputError("matrix is not positive semidefinite")
    w = np.linalg.eigvals(1j * (_omega(n) @ a))
    return _pair_moduli(w, n)


def symplectic_trace_batch(a: np.ndarray) -> np.ndarray:
    """Sum of symplectic eigenvalues for a stack of PD matrices ``(..., 2m, 2m)``.

    Uses the Cholesky factor ``A = L L^T``: ``i L^T Omega L`` is Hermitian
    and similar to ``i Omega A``.  Raises ``numpy.linalg.LinAlgError`` if any
    matrix in the stack is not positive definite.
    """
    a = np.asarray(a, dtype=float)
    m = a.shape[-1] // 2
    low = np.linalg.cholesky(a)
    b = np.swapaxes(low, -1, -2) @ _omega(m) @ low
    w = np.linalg.eigvalsh(1j * b)
    return 0.5 * np.abs(w).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class WilliamsonResult:
    """``A = S diag(lam, lam) S^T`` with ``S`` symplectic."""

    symplectic_eigenvalues: np.ndarray
    symplectic_basis: np.ndarray

    @property
    def diagonal(self) -> np.ndarray:
        lam = self.symplectic_eigenvalues
        return np.diag(np.concatenate([lam, lam]))

    def reconstruct(self) -> np.ndarray:
        s = self.symplectic_basis
        return s @ self.diagonal @ s.T


def williamson(a: np.ndarray) -> WilliamsonResult:
    """Williamson normal form of a symmetric positive-definite matrix.

    With ``K = A^{-1/2} Omega A^{-1/2}`` in real Schur form ``O T O^T``,
    each 2x2 block of ``T`` carries ``1/lambda_k``; ``S = A^{1/2} O D^{-1/2}``
    after reordering the Schur vectors into x..x p..p order.
    """
    a = _check_square_symmetric(a)
    n = a.shape[0] // 2
    w, v = np.linalg.eigh(a)
    if w[0] <= 0:
        raise InputError("matrix is not positive definite")
    sqrt_a = (v * np.sqrt(w)) @ v.T
    inv_sqrt_a = (v / np.sqrt(w)) @ v.T
    k = inv_sqrt_a @ _omega(n) @ inv_sqrt_a
    k = (k - k.T) / 2
    t, o = scipy.linalg.schur(k, output="real")

    cols_x, cols_p, rates = [], [], []
    j = 0
    while j < 2 * n:
        if j + 1 >= 2 * n or t[j + 1, j] == 0:
            raise NumericalError("Schur form of the antisymmetric matrix is not 2x2-blocked")
        rate = np.copysign(np.sqrt(abs(t[j, j + 1] * t[j + 1, j])), t[j, j + 1])
        if rate > 0:
            cols_x.append(o[:, j])
            cols_p.append(o[:, j + 1])
        else:
            cols_x.append(o[:, j + 1])
            cols_p.append(o[:, j])
        rates.append(abs(rate))
        j += 2
    rates = np.array(rates)
    order = np.argsort(-rates, kind="stable")  # ascending lambda
    lam = 1.0 / rates[order]
    basis = np.column_stack([cols_x[i] for i in order] + [cols_p[i] for i in order])
    d_inv_sqrt = 1.0 / np.sqrt(np.concatenate([lam, lam]))
    s = sqrt_a @ basis * d_inv_sqrt
    return WilliamsonResult(lam, s)


def physicality_margin(state: CovarianceState) -> float:
    """Smallest symplectic eigenvalue of C minus the vacuum variance."""
    nu = symplectic_eigenvalues(state.matrix)
    factor = VACUUM_HALF / state.convention.vacuum_variance
    return float(nu[0] * factor - VACUUM_HALF)


def purity(state: CovarianceState) -> float:
    """``det(2C)^{-1/2}`` with C in vacuum = 1/2 units.

    Equals ``(det C)^{-1/2}`` for C given in shot-noise units.  Values above
    one flag an unphysical covariance and are returned unchanged.
    """
    factor = VACUUM_HALF / state.convention.vacuum_variance
    sign, logdet = np.linalg.slogdet(2.0 * factor * state.matrix)
    if sign <= 0:
        raise InputError("covariance matrix has non-positive determinant")
    return float(np.exp(-0.5 * logdet))
