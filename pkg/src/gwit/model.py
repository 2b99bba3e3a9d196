"""Core data types shared by the rest of the package.

Quadrature vectors are ordered ``(x_1, ..., x_N, p_1, ..., p_N)`` and all
internal arithmetic uses a vacuum variance of 1/2 per quadrature
(``[x, p] = i``).  Mode indices are 0-based internally and 1-based in every
external interface (files, CLI flags, reports).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

VACUUM_HALF = 0.5
SYMMETRY_TOL = 1e-9
OPERATOR_SYMMETRY_TOL = 1e-12

UNIT_TAGS = {"vacuum_1": 1.0, "vacuum_half": 0.5}


class GwitError(Exception):
    """Base class for package errors."""


class InputError(GwitError, ValueError):
    """Malformed or invalid user input (files, matrices, flags)."""


class NumericalError(GwitError, RuntimeError):
    """An internal numerical routine failed on input that passed validation."""


class InadmissibleOperatorError(GwitError, ValueError):
    """A test operator has a singular or indefinite block for some partition."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QuadratureConvention:
    vacuum_variance: float = VACUUM_HALF

    def __post_init__(self):
        if not self.vacuum_variance > 0:
            raise InputError("vacuum variance must be positive")


@dataclass(frozen=True, eq=False)
class CovarianceState:
    """Covariance matrix of a zero-mean Gaussian state plus element-wise errors.

    Construction only checks shapes; use :func:`validate` for the physical
    and numerical invariants and :func:`normalize_units` to build a checked
    state from raw data.
    """

    n_modes: int
    matrix: np.ndarray
    uncertainty: np.ndarray = None
    convention: QuadratureConvention = field(default_factory=QuadratureConvention)
    label: str = ""

    def __post_init__(self):
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise InputError(f"n_modes must be a positive integer, got {self.n_modes!r}")
        dim = 2 * self.n_modes
        matrix = _frozen(self.matrix)
        if matrix.shape != (dim, dim):
            raise InputError(f"matrix must be {dim}x{dim}, got {matrix.shape}")
        if self.uncertainty is None:
            uncertainty = _frozen(np.zeros((dim, dim)))
        else:
            uncertainty = _frozen(self.uncertainty)
        if uncertainty.shape != (dim, dim):
            raise InputError(f"uncertainty must be {dim}x{dim}, got {uncertainty.shape}")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "uncertainty", uncertainty)

    @property
    def dim(self) -> int:
        return 2 * self.n_modes

    def with_uncertainty(self, uncertainty) -> "CovarianceState":
        """Return a copy with ``uncertainty`` replaced; a scalar means uniform."""
        unc = np.asarray(uncertainty, dtype=float)
        if unc.ndim == 0:
            unc = np.full((self.dim, self.dim), float(unc))
        return CovarianceState(self.n_modes, self.matrix, unc, self.convention, self.label)

    def with_label(self, label: str) -> "CovarianceState":
        return CovarianceState(self.n_modes, self.matrix, self.uncertainty, self.convention, label)

    def __eq__(self, other):
        if not isinstance(other, CovarianceState):
            return NotImplemented
        return (
            self.n_modes == other.n_modes
            and self.convention == other.convention
            and self.label == other.label
            and np.array_equal(self.matrix, other.matrix)
            and np.array_equal(self.uncertainty, other.uncertainty)
        )

    __hash__ = None


def mode_indices(subset: Iterable[int], n_modes: int) -> list[int]:
    """Rows/columns ``{i, i+N}`` of the quadrature vector for 0-based ``subset``."""
    modes = sorted(subset)
    return modes + [i + n_modes for i in modes]


@dataclass(frozen=True, eq=False)
class TestOperator:
    """Symmetric matrix M of the quadratic test operator ``L = xi^T M xi``.

    M must be positive semidefinite and every single-mode 2x2 block
    (rows/columns ``j, j+N``) strictly positive definite.
    """

    __test__ = False  # keep pytest from collecting this class

    n_modes: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = 2 * self.n_modes
        m = np.array(self.matrix, dtype=float)
        if m.shape != (dim, dim):
            raise InputError(f"test operator must be {dim}x{dim}, got {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > OPERATOR_SYMMETRY_TOL * scale:
            raise InputError("test operator is not symmetric")
        m = (m + m.T) / 2
        if np.linalg.eigvalsh(m)[0] < -1e-12 * scale:
            raise InputError("test operator is not positive semidefinite")
        for j in range(self.n_modes):
            block = m[np.ix_([j, j + self.n_modes], [j, j + self.n_modes])]
            if block[0, 0] <= 0 or np.linalg.det(block) <= 0:
                raise InputError(f"single-mode block of mode {j + 1} is not positive definite")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        object.__setattr__(self, "matrix", _frozen(m))

    def scaled(self, factor: float) -> "TestOperator":
        return TestOperator(self.n_modes, factor * self.matrix)

    def __eq__(self, other):
        if not isinstance(other, TestOperator):
            return NotImplemented
        return self.n_modes == other.n_modes and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


@dataclass(frozen=True)
class Partition:
    """A decomposition of modes ``0..N-1`` into disjoint non-empty blocks.

    Always held in canonical form: each block sorted, blocks ordered by their
    smallest element.  Build instances with :meth:`from_blocks`.
    """

    n_modes: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = [m for b in self.blocks for m in b]
        if any(len(b) == 0 for b in self.blocks):
            raise InputError("partition has an empty block")
        if len(seen) != len(set(seen)):
            raise InputError("partition blocks are not disjoint")
        if sorted(seen) != list(range(self.n_modes)):
            raise InputError(f"partition does not cover modes 1..{self.n_modes}")
        canonical = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0]))
        if canonical != self.blocks:
            raise InputError("partition is not in canonical form; use Partition.from_blocks")

    @classmethod
    def from_blocks(cls, n_modes: int, blocks: Iterable[Iterable[int]]) -> "Partition":
        """Canonicalize 0-based ``blocks``."""
        canonical = tuple(sorted((tuple(sorted(int(m) for m in b)) for b in blocks),
                                 key=lambda b: b[0] if b else -1))
        return cls(int(n_modes), canonical)

    @classmethod
    def trivial(cls, n_modes: int) -> "Partition":
        return cls(n_modes, (tuple(range(n_modes)),))

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << m for m in b) for b in self.blocks)

    def __str__(self) -> str:
        return ":".join(",".join(str(m + 1) for m in b) for b in self.blocks)


@dataclass(frozen=True)
class Individual:
    """Separability with respect to one specific partition."""

    partition: Partition

    @property
    def k(self) -> int:
        return self.partition.k

    def __str__(self) -> str:
        return f"partition={self.partition}"


@dataclass(frozen=True)
class ConvexK:
    """Separability with respect to convex mixtures of all K-partitions."""

    k: int

    def __str__(self) -> str:
        return f"K={self.k}"


SeparabilityTarget = Union[Individual, ConvexK]


def check_target(target: SeparabilityTarget, n_modes: int) -> None:
    if isinstance(target, ConvexK):
        if not 1 <= target.k <= n_modes:
            raise InputError(f"K={target.k} out of range 1..{n_modes}")
    elif isinstance(target, Individual):
        if target.partition.n_modes != n_modes:
            raise InputError(
                f"partition {target.partition} is for {target.partition.n_modes} modes, "
                f"state has {n_modes}")
    else:
        raise InputError(f"unknown separability target {target!r}")


@dataclass(frozen=True)
class WitnessVerdict:
    """Outcome of one witness evaluation.

    ``sigma`` is negative when the notion of separability named by
    ``target`` is violated; its magnitude is the number of standard
    deviations.  A zero error with a nonzero numerator gives ``sigma=±inf``
    (see :attr:`infinite`).
    """

    target: SeparabilityTarget
    expectation: float
    bound: float
    error: float
    sigma: float
    argmin_partition: Partition

    @property
    def numerator(self) -> float:
        return self.expectation - self.bound

    @property
    def infinite(self) -> bool:
        return bool(np.isinf(self.sigma))

    @property
    def detected(self) -> bool:
        return self.sigma < 0


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.message}"


def symmetrize(matrix: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Return ``(A + A^T)/2`` after checking the asymmetry is below tolerance."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"{what} must be square, got shape {a.shape}")
    if a.shape[0] % 2:
        raise InputError(f"{what} dimension must be even, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{what} has non-finite entries")
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > SYMMETRY_TOL:
        raise InputError(f"{what} is not symmetric (max asymmetry {asym:.3g})")
    return (a + a.T) / 2


def normalize_units(matrix, uncertainty=None, units: str = "vacuum_half",
                    label: str = "") -> CovarianceState:
    """Build a validated state in internal (vacuum = 1/2) units.

    ``units`` is ``"vacuum_1"`` (shot-noise units, vacuum variance 1) or
    ``"vacuum_half"``.  Inputs in ``vacuum_1`` are multiplied by 1/2,
    uncertainties included.  Raises :class:`InputError` on any error-level
    diagnostic from :func:`validate`.
    """
    if units not in UNIT_TAGS:
        raise InputError(f"unknown units {units!r}; expected one of {sorted(UNIT_TAGS)}")
    c = symmetrize(matrix, "matrix")
    n = c.shape[0] // 2
    if uncertainty is None:
        dc = np.zeros_like(c)
    else:
        dc = np.asarray(uncertainty, dtype=float)
        if dc.shape != c.shape:
            raise InputError(f"uncertainty shape {dc.shape} does not match matrix {c.shape}")
        dc = symmetrize(dc, "uncertainty")
    factor = VACUUM_HALF / UNIT_TAGS[units]
    state = CovarianceState(n, c * factor, dc * factor, QuadratureConvention(VACUUM_HALF), label)
    errors = [d for d in validate(state) if d.level == "error"]
    if errors:
        raise InputError("; ".join(d.message for d in errors))
    return state


def normalize_state(state: CovarianceState) -> CovarianceState:
    """Rescale an existing state to vacuum variance 1/2 (idempotent)."""
    factor = VACUUM_HALF / state.convention.vacuum_variance
    if factor == 1.0:
        return state
    return CovarianceState(state.n_modes, state.matrix * factor, state.uncertainty * factor,
                           QuadratureConvention(VACUUM_HALF), state.label)


def validate(state: CovarianceState) -> list[Diagnostic]:
    """Check a state's invariants; an empty list means everything holds.

    Unphysical states (a symplectic eigenvalue below the vacuum variance)
    give a warning only, since measured data may violate the bound
    marginally.
    """
    from gwit.symplectic import symplectic_eigenvalues

    out: list[Diagnostic] = []
    c, dc = state.matrix, state.uncertainty
    if not np.all(np.isfinite(c)):
        return [Diagnostic("error", "matrix has non-finite entries")]
    if np.max(np.abs(c - c.T)) > SYMMETRY_TOL:
        out.append(Diagnostic("error", "matrix is not symmetric"))
    if not np.all(np.isfinite(dc)) or np.max(np.abs(dc - dc.T)) > SYMMETRY_TOL:
        out.append(Diagnostic("error", "uncertainty is not symmetric"))
    if np.any(dc < 0):
        out.append(Diagnostic("error", "uncertainty has negative entries"))
    eig_min = float(np.linalg.eigvalsh((c + c.T) / 2)[0])
    if eig_min <= 0:
        out.append(Diagnostic("error", f"matrix is not positive definite (min eigenvalue {eig_min:.6g})"))
        return out
    nu = symplectic_eigenvalues((c + c.T) / 2)
    vac = state.convention.vacuum_variance
    if nu[0] < vac * (1 - 1e-12):
        out.append(Diagnostic(
            "warning",
            f"symplectic eigenvalue {nu[0]:.6g} < {vac:g}, unphysical"))
    return out


