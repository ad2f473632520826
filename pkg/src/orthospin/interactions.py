"""Interaction matrices: Curie-Weiss, sine (MPR) and Haar-random orthogonal.

All matrices are dense, real and exactly symmetric.  Spins are indexed
``1..n`` in formulas; the stored arrays are 0-based as usual in numpy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidSizeError


class Kind(str, enum.Enum):
    CURIE_WEISS = "curie_weiss"
    SINE = "sine"
    RANDOM_ORTHOGONAL = "random_orthogonal"
    CUSTOM = "custom"


class SelfInteraction(str, enum.Enum):
    """Whether the Hamiltonian sees the diagonal of ``J``.

    ``ZERO_DIAGONAL`` models sum over pairs ``i < j`` only; the stored
    diagonal is forced to zero so that ``H = -(1/2) s.J.s`` holds for
    both conventions.
    """

    ZERO_DIAGONAL = "zero_diagonal"
    KEEP_DIAGONAL = "keep_diagonal"


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Immutable symmetric coupling matrix with its model tag."""

    entries: np.ndarray
    kind: Kind
    self_interaction: SelfInteraction

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"coupling matrix must be square, got shape {a.shape}")
        if a.shape[0] < 1:
            raise InvalidSizeError("coupling matrix must have at least one spin")
        if not np.all(np.isfinite(a)):
            raise ValueError("coupling matrix has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.T)) > 1e-12 * scale:
            raise ValueError("coupling matrix is not symmetric")
        # (a + a.T) / 2 is bitwise symmetric because float addition commutes
        a = 0.5 * (a + a.T)
        if self.self_interaction is SelfInteraction.ZERO_DIAGONAL:
            np.fill_diagonal(a, 0.0)
        kind = Kind(self.kind)
        if kind is Kind.CURIE_WEISS:
            off = a[~np.eye(a.shape[0], dtype=bool)]
            if np.any(np.diag(a) != 0) or (off.size and np.any(off != off[0])):
                raise ValueError("curie_weiss matrix needs equal off-diagonal entries and zero diagonal")
        elif kind in (Kind.SINE, Kind.RANDOM_ORTHOGONAL):
            if np.max(np.abs(a @ a.T - np.eye(a.shape[0]))) > 1e-10:
                raise ValueError(f"{kind.value} matrix is not orthogonal to 1e-10")
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "self_interaction", SelfInteraction(self.self_interaction))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def keeps_diagonal(self) -> bool:
        return self.self_interaction is SelfInteraction.KEEP_DIAGONAL

    def __repr__(self):
        return f"InteractionMatrix(n={self.n}, kind={self.kind.value}, self_interaction={self.self_interaction.value})"


def _check_size(n: int) -> int:
    if int(n) != n or n < 2:
        raise InvalidSizeError(f"need at least 2 spins, got n={n!r}")
    return int(n)


def build_curie_weiss(n: int, normalization: str = "n") -> InteractionMatrix:
    """Uniform all-to-all coupling without self-interaction.

    ``normalization="n"`` gives ``J_ij = 1/n``; ``"n-1"`` gives ``1/(n-1)``,
    the scaling under which the bipartition average of two half systems
    reproduces the full Hamiltonian exactly.
    """
    n = _check_size(n)
    if normalization == "n":
        c = 1.0 / n
    elif normalization == "n-1":
        c = 1.0 / (n - 1)
    else:
        raise ValueError(f"normalization must be 'n' or 'n-1', got {normalization!r}")
    J = np.full((n, n), c)
    return InteractionMatrix(J, Kind.CURIE_WEISS, SelfInteraction.ZERO_DIAGONAL)


def build_curie_weiss_self(n: int) -> InteractionMatrix:
    """Curie-Weiss couplings with the diagonal kept, ``H = -M^2 / (2n)``.

    Differs from :func:`build_curie_weiss` by the constant ``-1/2`` in the
    energy.  Tagged ``CUSTOM`` since the Curie-Weiss kind has zero diagonal.
    """
    n = _check_size(n)
    J = np.full((n, n), 1.0 / n)
    return InteractionMatrix(J, Kind.CUSTOM, SelfInteraction.KEEP_DIAGONAL)


def build_sine(n: int) -> InteractionMatrix:
    """Sine-model couplings ``J_ij = 2/sqrt(2n+1) sin(2 pi i j / (2n+1))``, ``i, j = 1..n``."""
    n = _check_size(n)
    m = 2 * n + 1
    idx = np.arange(1, n + 1, dtype=np.int64)
    # exact integer reduction of i*j mod (2n+1) keeps the sine argument in [0, 2pi)
    residues = np.outer(idx, idx) % m
    arg = (2 * np.pi * residues.astype(np.longdouble)) / np.longdouble(m)
    J = (np.longdouble(2) / np.sqrt(np.longdouble(m))) * np.sin(arg)
    return InteractionMatrix(J.astype(np.float64), Kind.SINE, SelfInteraction.KEEP_DIAGONAL)


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via QR of a Gaussian matrix."""
    z = rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def build_random_orthogonal(n: int, signs: Sequence[int], seed: int) -> InteractionMatrix:
    """Symmetric orthogonal ``J = O diag(signs) O^T`` with Haar-random ``O``.

    Args:
        n: number of spins.
        signs: eigenvalues of ``J``, each ``+1`` or ``-1``.
        seed: seed for ``numpy.random.default_rng``; the result is a pure
            function of ``(n, signs, seed)``.
    """
    n = _check_size(n)
    s = np.asarray(signs, dtype=np.float64)
    if s.shape != (n,):
        raise DimensionError(f"expected {n} signs, got shape {s.shape}")
    if not np.all(np.abs(s) == 1.0):
        raise ValueError("signs must be +1 or -1")
    O = haar_orthogonal(n, np.random.default_rng(seed))
    J = (O * s) @ O.T
    return InteractionMatrix(J, Kind.RANDOM_ORTHOGONAL, SelfInteraction.KEEP_DIAGONAL)


def alternating_signs(n: int) -> np.ndarray:
    """``(+1, -1, +1, ...)``: trace ``n mod 2``, the same as the sine model."""
    return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)


def custom(entries, self_interaction: SelfInteraction = SelfInteraction.KEEP_DIAGONAL) -> InteractionMatrix:
    return InteractionMatrix(np.asarray(entries, dtype=np.float64), Kind.CUSTOM, SelfInteraction(self_interaction))


def orthogonality_defect(J: InteractionMatrix) -> float:
    """``max |J J^T - I|``."""
    a = J.entries
    return float(np.max(np.abs(a @ a.T - np.eye(J.n))))


def trace_identities(J: InteractionMatrix) -> tuple[float, float]:
    """Return ``(sum_i J_ii, sum_i J_ii^2)``."""
    d = np.diag(J.entries)
    return float(np.sum(d)), float(np.sum(d * d))


def save_csv(J: InteractionMatrix, path) -> None:
    """Write the matrix row-major as CSV with round-trip precision."""
    np.savetxt(Path(path), J.entries, fmt="%.17g", delimiter=",")


def load_csv(path, kind: Kind = Kind.CUSTOM,
             self_interaction: SelfInteraction = SelfInteraction.KEEP_DIAGONAL) -> InteractionMatrix:
    a = np.loadtxt(Path(path), delimiter=",", dtype=np.float64, ndmin=2)
    return InteractionMatrix(a, Kind(kind), SelfInteraction(self_interaction))
