"""Core graph types and the shared linear algebra: shift operators, node
partitions, block decompositions, graph filters, and the smoothness and
commutativity functionals every estimator is built on.

All matrices are dense, real, double precision. Types are immutable after
construction (arrays are marked read-only) and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

SYMMETRY_TOL = 1e-12
ROW_SUM_TOL = 1e-9
EIG_TOL = 1e-9


class GsoKind(Enum):
    ADJACENCY = "adjacency"
    LAPLACIAN = "laplacian"
    LAPLACIAN_RELAXED = "laplacian_relaxed"
    GENERIC = "generic"


class InvalidInputError(ValueError):
    """Raised when a matrix violates the invariants of its declared kind."""


class InvalidPartitionError(ValueError):
    """Raised when a node partition does not cover the index range."""


def symmetrize(matrix: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Average a nearly symmetric matrix with its transpose.

    Rejects matrices whose asymmetry exceeds ``tol`` relative to their
    largest entry; undirected graphs admit no directional slack.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max())) if m.size else 1.0
    asym = float(np.abs(m - m.T).max()) if m.size else 0.0
    if asym > tol * scale:
        raise InvalidInputError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    return (m + m.T) / 2.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Gso:
    """A graph-shift operator: dense symmetric N x N matrix tagged with its kind."""

    matrix: np.ndarray
    kind: GsoKind = GsoKind.GENERIC

    def __post_init__(self):
        m = symmetrize(self.matrix)
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("shift operator has non-finite entries")
        self._validate_kind(m)
        object.__setattr__(self, "matrix", _frozen(m))

    def _validate_kind(self, m: np.ndarray) -> None:
        n = m.shape[0]
        off = m[~np.eye(n, dtype=bool)] if n else np.empty(0)
        if self.kind is GsoKind.ADJACENCY:
            if m.size and m.min() < -SYMMETRY_TOL:
                raise InvalidInputError("adjacency entries must be nonnegative")
            if m.size and np.abs(np.diag(m)).max() > SYMMETRY_TOL:
                raise InvalidInputError("adjacency diagonal must be zero")
        elif self.kind in (GsoKind.LAPLACIAN, GsoKind.LAPLACIAN_RELAXED):
            if off.size and off.max() > SYMMETRY_TOL:
                raise InvalidInputError("Laplacian off-diagonal entries must be nonpositive")
            row_sums = m.sum(axis=1)
            scale = max(1.0, float(np.abs(m).max()))
            if self.kind is GsoKind.LAPLACIAN:
                if row_sums.size and np.abs(row_sums).max() > ROW_SUM_TOL * scale:
                    raise InvalidInputError("Laplacian rows must sum to zero")
            else:
                if row_sums.size and row_sums.min() < -ROW_SUM_TOL * scale:
                    raise InvalidInputError("relaxed Laplacian rows must sum to >= 0")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class NodePartition:
    """Split of node indices 0..N-1 into observed and hidden subsets."""

    observed: tuple
    hidden: tuple = ()

    def __post_init__(self):
        obs = tuple(int(i) for i in self.observed)
        hid = tuple(int(i) for i in self.hidden)
        if len(obs) < 1:
            raise InvalidPartitionError("at least one observed node is required")
        n = len(obs) + len(hid)
        if set(obs) & set(hid):
            raise InvalidPartitionError("observed and hidden sets overlap")
        if set(obs) | set(hid) != set(range(n)):
            raise InvalidPartitionError(f"partition must cover indices 0..{n - 1}")
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "hidden", hid)

    @property
    def n(self) -> int:
        return len(self.observed) + len(self.hidden)

    @property
    def n_observed(self) -> int:
        return len(self.observed)

    @property
    def n_hidden(self) -> int:
        return len(self.hidden)


@dataclass(frozen=True)
class BlockView:
    """Observed-first block decomposition of a symmetric matrix.

    ``upper_left`` is the observed-observed block, ``upper_right`` the
    observed-hidden block and ``lower_right`` the hidden-hidden block; the
    lower-left block is always ``upper_right.T`` by symmetry.
    """

    upper_left: np.ndarray
    upper_right: np.ndarray
    lower_right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "upper_left", _frozen(self.upper_left))
        object.__setattr__(self, "upper_right", _frozen(self.upper_right))
        object.__setattr__(self, "lower_right", _frozen(self.lower_right))

    def reassemble(self) -> np.ndarray:
        """Stack the blocks back into the full (permuted) matrix."""
        top = np.hstack([self.upper_left, self.upper_right])
        bottom = np.hstack([self.upper_right.T, self.lower_right])
        return np.vstack([top, bottom])


@dataclass(frozen=True)
class SignalMatrix:
    """R x M matrix of graph signals: rows are nodes, columns realizations."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim != 2:
            raise InvalidInputError(f"signals must be a 2-D array, got ndim={d.ndim}")
        if d.shape[1] < 1:
            raise InvalidInputError("at least one signal realization is required")
        if not np.all(np.isfinite(d)):
            raise InvalidInputError("signals contain non-finite entries")
        object.__setattr__(self, "data", _frozen(d))

    @property
    def n_nodes(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CovEstimate:
    """An O x O covariance: either a sample estimate or an ensemble construction."""

    matrix: np.ndarray
    num_samples: int | None = None
    is_ensemble: bool = False

    def __post_init__(self):
        m = symmetrize(self.matrix)
        eigvals = np.linalg.eigvalsh(m)
        scale = max(1.0, float(eigvals[-1])) if eigvals.size else 1.0
        if eigvals.size and eigvals[0] < -EIG_TOL * scale:
            raise InvalidInputError(
                f"covariance is not PSD (min eigenvalue {eigvals[0]:.3e})"
            )
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class FilterSpec:
    """Polynomial graph-filter coefficients, normalized to unit Euclidean norm."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size < 1:
            raise InvalidInputError("filter needs at least one coefficient")
        nrm = float(np.linalg.norm(c))
        if nrm == 0.0:
            raise InvalidInputError("filter coefficients cannot all be zero")
        object.__setattr__(self, "coeffs", _frozen(c / nrm))

    @property
    def order(self) -> int:
        return self.coeffs.size - 1


# ---------------------------------------------------------------------------
# constraint-set membership


def in_adjacency_set(m: np.ndarray, tol: float = ROW_SUM_TOL, require_degree: bool = False) -> bool:
    """Membership test for the admissible adjacency set (optionally with A1 >= 1)."""
    m = np.asarray(m, dtype=float)
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > tol * scale:
        return False
    if m.min() < -tol:
        return False
    if np.abs(np.diag(m)).max() > tol:
        return False
    if require_degree and m.sum(axis=1).min() < 1.0 - tol:
        return False
    return True


def in_laplacian_set(m: np.ndarray, tol: float = ROW_SUM_TOL, relaxed: bool = False) -> bool:
    """Membership test for the combinatorial Laplacian set (or its relaxed variant)."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > tol * scale:
        return False
    off = m[~np.eye(n, dtype=bool)]
    if off.size and off.max() > tol:
        return False
    row_sums = m.sum(axis=1)
    if relaxed:
        if row_sums.min() < -tol * scale:
            return False
    elif np.abs(row_sums).max() > tol * scale:
        return False
    return bool(np.linalg.eigvalsh((m + m.T) / 2)[0] >= -EIG_TOL * scale)


# ---------------------------------------------------------------------------
# operations


def laplacian_from_adjacency(adjacency: Gso) -> Gso:
    """Combinatorial Laplacian diag(A 1) - A of a nonnegative adjacency."""
    if adjacency.kind is not GsoKind.ADJACENCY:
        raise InvalidInputError(f"expected an adjacency GSO, got kind={adjacency.kind}")
    a = adjacency.matrix
    lap = np.diag(a.sum(axis=1)) - a
    return Gso(lap, GsoKind.LAPLACIAN)


def block_partition(matrix: np.ndarray, partition: NodePartition) -> BlockView:
    """Decompose a symmetric matrix into observed/hidden blocks.

    The observed indices are permuted first; reassembling the view with the
    transposed cross block reproduces the permuted matrix exactly.
    """
    m = symmetrize(matrix)
    if m.shape[0] != partition.n:
        raise InvalidPartitionError(
            f"partition covers {partition.n} nodes but matrix is {m.shape[0]} x {m.shape[0]}"
        )
    obs = list(partition.observed)
    hid = list(partition.hidden)
    return BlockView(
        upper_left=m[np.ix_(obs, obs)],
        upper_right=m[np.ix_(obs, hid)],
        lower_right=m[np.ix_(hid, hid)],
    )


def apply_graph_filter(gso: Gso, filt: FilterSpec, signals: SignalMatrix) -> SignalMatrix:
    """Apply the polynomial filter sum_l h_l S^l to a signal matrix.

    Uses iterated multiplication (Horner form), never forming powers of the
    shift operator beyond S itself.
    """
    s = gso.matrix
    x = signals.data
    if x.shape[0] != s.shape[0]:
        raise InvalidInputError(
            f"signals have {x.shape[0]} rows but shift operator is {s.shape[0]} x {s.shape[0]}"
        )
    h = filt.coeffs
    out = h[-1] * x
    for coeff in h[-2::-1]:
        out = s @ out + coeff * x
    return SignalMatrix(out)


def local_variation(laplacian: Gso, signals: SignalMatrix) -> float:
    """Mean quadratic form (1/M) sum_m x_m^T L x_m, equal to tr(C_hat L)."""
    lap = laplacian.matrix
    x = signals.data
    if x.shape[0] != lap.shape[0]:
        raise InvalidInputError("signal/operator dimension mismatch")
    return float(np.sum(x * (lap @ x)) / x.shape[1])


def smoothness_block_decomposition(
    cov: np.ndarray, lap: np.ndarray, partition: NodePartition
) -> tuple:
    """Split tr(C L) into observed, cross, and hidden contributions.

    Returns ``(term_obs, term_cross, term_hidden)`` whose sum equals tr(C L);
    the cross term carries the factor 2 from the two symmetric off blocks.
    """
    c = block_partition(cov, partition)
    l = block_partition(lap, partition)
    term_obs = float(np.sum(c.upper_left * l.upper_left))
    term_cross = 2.0 * float(np.sum(c.upper_right * l.upper_right))
    term_hidden = float(np.sum(c.lower_right * l.lower_right))
    return term_obs, term_cross, term_hidden


def commutativity_residual(cov_obs: np.ndarray, s_obs: np.ndarray, coupling: np.ndarray) -> float:
    """Squared Frobenius norm of C S + K - S C - K^T.

    Quantifies how far the observed covariance block is from commuting with
    the observed shift block once the latent coupling K is accounted for.
    Only the skew part of K enters.
    """
    c = np.asarray(cov_obs, dtype=float)
    s = np.asarray(s_obs, dtype=float)
    k = np.asarray(coupling, dtype=float)
    if not (c.shape == s.shape == k.shape) or c.shape[0] != c.shape[1]:
        raise InvalidInputError("all three matrices must be square with equal shape")
    e = c @ s + k - s @ c - k.T
    return float(np.sum(e * e))
