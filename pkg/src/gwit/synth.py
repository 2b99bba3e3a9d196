"""Synthetic Gaussian states with known separability structure.

Sign convention for squeezing levels: a negative dB value squeezes the x
quadrature of that mode, a positive value squeezes p.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from gwit.model import CovarianceState, InputError, Partition, normalize_state
from gwit.symplectic import is_symplectic

DEFAULT_SPOPO_DB = (-2.6, -1.5, -0.4, 0.8, 1.9, 3.0)
PRODUCT_TOL = 1e-12


def vacuum(n: int) -> CovarianceState:
    if n < 1:
        raise InputError(f"need at least one mode, got {n}")
    return CovarianceState(n, 0.5 * np.eye(2 * n), label=f"vacuum n={n}")


def squeezed_supermodes(db: Sequence[float]) -> CovarianceState:
    """Product of single-mode squeezed vacua with the given levels in dB."""
    db = np.asarray(db, dtype=float)
    if db.ndim != 1 or db.size == 0 or not np.all(np.isfinite(db)):
        raise InputError("squeezing levels must be a non-empty list of finite numbers")
    g = 10.0 ** (db / 10.0)
    diag = 0.5 * np.concatenate([g, 1.0 / g])
    label = "squeezed dB=[" + ",".join(f"{v:g}" for v in db) + "]"
    return CovarianceState(db.size, np.diag(diag), label=label)


def thermal(n: int, nu: float) -> CovarianceState:
    """Thermal state with symplectic eigenvalue ``nu/2`` on every mode."""
    if nu < 1:
        raise InputError(f"thermal factor must be >= 1, got {nu}")
    return CovarianceState(n, 0.5 * nu * np.eye(2 * n), label=f"thermal nu={nu:g}")


def _passive(u: np.ndarray) -> np.ndarray:
    re, im = u.real, u.imag
    return np.block([[re, -im], [im, re]])


def random_symplectic(n: int, seed: Optional[int] = None) -> np.ndarray:
    """Random passive (orthogonal and symplectic) 2n x 2n matrix.

    Built from a Haar-random n x n unitary acting on ``a = (x + i p)/sqrt(2)``.
    """
    rng = np.random.default_rng(seed)
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return _passive(q)


def beam_splitter(theta: float, i: int, j: int, n: int, phi: float = 0.0) -> np.ndarray:
    u = np.eye(n, dtype=complex)
    u[i, i] = np.cos(theta)
    u[i, j] = -np.exp(-1j * phi) * np.sin(theta)
    u[j, i] = np.exp(1j * phi) * np.sin(theta)
    u[j, j] = np.cos(theta)
    return _passive(u)


def single_mode_squeezer(r: float, i: int, n: int) -> np.ndarray:
    """Squeezes x of mode ``i`` by ``e^{-r}`` (variance by ``e^{-2r}``)."""
    s = np.eye(2 * n)
    s[i, i] = np.exp(-r)
    s[i + n, i + n] = np.exp(r)
    return s


def two_mode_squeezer(r: float, i: int = 0, j: int = 1, n: int = 2) -> np.ndarray:
    """Two-mode squeezer correlating x_i with x_j and anti-correlating p_i with p_j."""
    if i == j:
        raise InputError("two-mode squeezer needs two distinct modes")
    if not (0 <= i < n and 0 <= j < n):
        raise InputError(f"two-mode squeezer modes {i + 1},{j + 1} out of range 1..{n}")
    s = np.eye(2 * n)
    c, sh = np.cosh(r), np.sinh(r)
    for a, b in ((i, j), (j, i)):
        s[a, a] = c
        s[a, b] = sh
        s[a + n, a + n] = c
        s[a + n, b + n] = -sh
    return s


def apply_symplectic(s: np.ndarray, state: CovarianceState) -> CovarianceState:
    """``C -> S C S^T``; uncertainties propagate as ``|S| dC |S|^T``."""
    s = np.asarray(s, dtype=float)
    if s.shape != (state.dim, state.dim):
        raise InputError(f"symplectic matrix must be {state.dim}x{state.dim}, got {s.shape}")
    if not is_symplectic(s, atol=1e-10):
        raise InputError("matrix is not symplectic")
    state = normalize_state(state)
    c = s @ state.matrix @ s.T
    c = (c + c.T) / 2
    a = np.abs(s)
    dc = a @ state.uncertainty @ a.T
    dc = (dc + dc.T) / 2
    return CovarianceState(state.n_modes, c, dc, state.convention, state.label)


def tms(r: float, n: int = 2, modes: tuple[int, int] = (0, 1)) -> CovarianceState:
    """Two-mode squeezed vacuum on ``modes`` (0-based), vacuum elsewhere."""
    state = apply_symplectic(two_mode_squeezer(r, modes[0], modes[1], n), vacuum(n))
    return state.with_label(f"tms r={r:g} modes={modes[0] + 1},{modes[1] + 1}")


def embed(state: CovarianceState, modes: Sequence[int], n: int) -> CovarianceState:
    """Place ``state`` on the 0-based ``modes`` of an n-mode vacuum."""
    modes = list(modes)
    if len(modes) != state.n_modes or len(set(modes)) != len(modes):
        raise InputError("embedding needs one distinct target mode per input mode")
    if min(modes) < 0 or max(modes) >= n:
        raise InputError(f"embedding modes out of range 0..{n - 1}")
    state = normalize_state(state)
    idx = modes + [m + n for m in modes]
    c = 0.5 * np.eye(2 * n)
    dc = np.zeros((2 * n, 2 * n))
    c[np.ix_(idx, idx)] = state.matrix
    dc[np.ix_(idx, idx)] = state.uncertainty
    return CovarianceState(n, c, dc, label=state.label)


def product_partition(state: CovarianceState, tol: float = PRODUCT_TOL) -> Partition:
    """Finest partition across which ``state`` has no correlations.

    For a Gaussian state, vanishing cross-covariances between blocks mean the
    state factorizes, so this is the finest partition it is a product over.
    """
    n = state.n_modes
    c = state.matrix
    scale = max(1.0, float(np.max(np.abs(c))))
    linked = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(n):
            if a != b:
                rows = [a, a + n]
                cols = [b, b + n]
                linked[a, b] = np.max(np.abs(c[np.ix_(rows, cols)])) > tol * scale
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in range(n):
        for b in range(a + 1, n):
            if linked[a, b] or linked[b, a]:
                parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for m in range(n):
        groups.setdefault(find(m), []).append(m)
    return Partition.from_blocks(n, groups.values())


def separability_class(parts) -> int:
    """Largest K for which a mixture of ``parts`` is K-separable by construction.

    Each part is a product state over :func:`product_partition`; a mixture
    of states each separable for some K_i-partition is min(K_i)-separable.
    """
    return min(product_partition(state).k for _, state in parts)


def mixture_covariance(parts) -> CovarianceState:
    """Covariance of the zero-mean mixture ``sum_i p_i rho_i``.

    ``parts`` is a sequence of ``(weight, CovarianceState)``.  Weights must
    be positive and sum to one (within 1e-9).  The label records the parts
    and the guaranteed separability class.
    """
    parts = list(parts)
    if not parts:
        raise InputError("mixture needs at least one part")
    weights = np.array([float(w) for w, _ in parts])
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise InputError(f"mixture weights must be positive and sum to 1, got {weights.tolist()}")
    states = [normalize_state(s) for _, s in parts]
    n = states[0].n_modes
    if any(s.n_modes != n for s in states):
        raise InputError("all mixture parts must have the same number of modes")
    c = sum(w * s.matrix for w, s in zip(weights, states))
    dc = sum(w * s.uncertainty for w, s in zip(weights, states))
    k = separability_class(list(zip(weights, states)))
    desc = " + ".join(f"{Fraction(w).limit_denominator(1000)}*({s.label})"
                      for w, s in zip(weights, states))
    return CovarianceState(n, c, dc, label=f"mixture[{desc}] separable K={k}")


def cross_bipartition_mixture(r: float = 1.0, n: int = 3) -> CovarianceState:
    """Equal mixture of two-mode squeezed pairs over every pair of ``n`` modes.

    Each part is entangled across one pair only, hence separable for a
    bipartition; the mixture is biseparable (K=2) by construction.
    """
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    w = 1.0 / len(pairs)
    return mixture_covariance([(w, tms(r, n, pair)) for pair in pairs])


def spopo_like(n_modes: int = 6, db: Optional[Sequence[float]] = None, mixing_seed: int = 0,
               impurity: float = 1.0, delta_c: float = 0.0,
               impure_modes: Optional[Sequence[int]] = None) -> CovarianceState:
    """Qualitative stand-in for a multimode squeezed frequency comb.

    Independent squeezed supermodes (levels ``db``, default spanning -2.6 dB
    to +3.0 dB), optionally thermalized by ``impurity`` on ``impure_modes``
    (default all), then mixed by a random passive transformation.  A uniform
    uncertainty ``delta_c`` is attached to every element.
    """
    if impurity < 1:
        raise InputError(f"impurity must be >= 1, got {impurity}")
    if delta_c < 0:
        raise InputError(f"delta_c must be >= 0, got {delta_c}")
    if db is None:
        db = (DEFAULT_SPOPO_DB if n_modes == 6
              else np.linspace(DEFAULT_SPOPO_DB[0], DEFAULT_SPOPO_DB[-1], n_modes))
    db = list(db)
    if len(db) != n_modes:
        raise InputError(f"need {n_modes} squeezing levels, got {len(db)}")
    base = squeezed_supermodes(db)
    c = base.matrix.copy()
    targets = range(n_modes) if impure_modes is None else impure_modes
    for j in targets:
        c[j, j] *= impurity
        c[j + n_modes, j + n_modes] *= impurity
    s = random_symplectic(n_modes, mixing_seed)
    mixed = s @ c @ s.T
    mixed = (mixed + mixed.T) / 2
    label = (f"spopo-like n={n_modes} dB=[" + ",".join(f"{v:g}" for v in db)
             + f"] seed={mixing_seed} impurity={impurity:g}")
    return CovarianceState(n_modes, mixed, np.full((2 * n_modes, 2 * n_modes), float(delta_c)),
                           label=label)
