from enum import Enum
from scipy import linalg
import numpy as np
import logging

logger = logging.getLogger(__name__)


class LiftingError(ValueError):
    pass


class DensitySnapshot(object):
    """
    One frame of occupancy intensities on a rows x cols grid, values in [0, 1].
    """

    def __init__(self, values, timestamp: int = 0):
        values = np.array(values, dtype=float)
        if values.ndim != 2 or values.size == 0:
            raise LiftingError("snapshot must be a non-empty 2D grid, got shape {0}".format(values.shape))
        if not np.all(np.isfinite(values)):
            raise LiftingError("snapshot {0} contains non-finite values".format(timestamp))
        if values.min() < 0.0 or values.max() > 1.0:
            raise LiftingError(
                "snapshot {0} has values outside [0, 1] (min {1}, max {2})".format(timestamp, values.min(), values.max())
            )
        if timestamp < 0:
            raise LiftingError("timestamp must be nonnegative")
        self.values = values
        self.timestamp = timestamp

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        return (
            isinstance(other, DensitySnapshot)
            and self.timestamp == other.timestamp
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return "DensitySnapshot({0}x{1}, t={2})".format(self.rows, self.cols, self.timestamp)


class DataMatrices(object):
    def __init__(self, X: np.ndarray, Y: np.ndarray, shape=None):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if X.ndim != 2 or X.shape != Y.shape:
            raise LiftingError("X and Y must be matrices of identical shape, got {0} and {1}".format(X.shape, Y.shape))
        self.X = X
        self.Y = Y
        # grid shape the rows were lifted from, if known
        self.shape = shape

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def N(self) -> int:
        return self.X.shape[1]

    def frames(self) -> np.ndarray:
        """
        the underlying trajectory as columns: x_0 .. x_N
        """
        return np.hstack([self.X, self.Y[:, -1:]])

    def shifted(self, h: int):
        """
        pairs (x_k, x_{k+h}) from the same trajectory; columns without an h-step successor are dropped
        """
        if h < 1:
            raise LiftingError("shift must be at least 1, got {0}".format(h))
        if h > self.N:
            raise LiftingError("cannot shift {0} steps with only {1} pairs".format(h, self.N))
        return self.X[:, : self.N - h + 1], self.Y[:, h - 1:]


class Provenance(Enum):
    CENTRALIZED = "centralized"
    DISTRIBUTED = "distributed"


class KoopmanOperator(object):
    def __init__(self, matrix: np.ndarray, provenance: Provenance = Provenance.CENTRALIZED):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise LiftingError("Koopman operator must be square, got shape {0}".format(matrix.shape))
        self.matrix = matrix
        self.provenance = provenance

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self):
        return "KoopmanOperator(n={0}, {1})".format(self.n, self.provenance.value)


def lift_snapshot(s: DensitySnapshot) -> np.ndarray:
    # row-major: (r, c) -> r * cols + c
    return s.values.reshape(-1).copy()


def assemble_pairs(snapshots) -> DataMatrices:
    snapshots = list(snapshots)
    if len(snapshots) < 2:
        raise LiftingError("need at least 2 snapshots to form a pair, got {0}".format(len(snapshots)))
    shape = snapshots[0].shape
    for s in snapshots[1:]:
        if s.shape != shape:
            raise LiftingError("snapshot {0} has shape {1}, expected {2}".format(s.timestamp, s.shape, shape))
    lifted = np.column_stack([lift_snapshot(s) for s in snapshots])
    return DataMatrices(lifted[:, :-1], lifted[:, 1:], shape)


def centralized_edmd(d: DataMatrices, ridge: float = 0.0) -> KoopmanOperator:
    if ridge < 0:
        raise LiftingError("ridge must be nonnegative, got {0}".format(ridge))
    if ridge > 0:
        # K (X X^T + ridge I) = Y X^T
        gram = d.X @ d.X.T + ridge * np.eye(d.n)
        K = linalg.solve(gram, d.X @ d.Y.T, assume_a="pos").T
    else:
        K = d.Y @ linalg.pinv(d.X)
    return KoopmanOperator(K, Provenance.CENTRALIZED)


def residual_orthogonality(K, d: DataMatrices) -> float:
    matrix = K.matrix if isinstance(K, KoopmanOperator) else np.asarray(K)
    if matrix.shape != (d.n, d.n):
        raise LiftingError("operator shape {0} does not match lift dimension {1}".format(matrix.shape, d.n))
    return float(np.linalg.norm((d.Y - matrix @ d.X) @ d.X.T, "fro"))


def balanced_sizes(n: int, p: int):
    if p < 1 or n < p:
        raise LiftingError("cannot split {0} rows among {1} agents".format(n, p))
    base, extra = divmod(n, p)
    return [base + 1 if i < extra else base for i in range(p)]


def partition_rows(d: DataMatrices, p: int, sizes=None):
    if p < 1:
        raise LiftingError("agent count must be positive, got {0}".format(p))
    if sizes is None:
        if d.n % p != 0:
            raise LiftingError("lift dimension {0} is not divisible by {1} agents; give explicit sizes".format(d.n, p))
        sizes = [d.n // p] * p
    sizes = list(sizes)
    if len(sizes) != p:
        raise LiftingError("expected {0} block sizes, got {1}".format(p, len(sizes)))
    if any(s < 1 for s in sizes) or sum(sizes) != d.n:
        raise LiftingError("block sizes {0} must be positive and sum to {1}".format(sizes, d.n))
    bounds = np.cumsum([0] + sizes)
    return [(d.X[a:b, :], d.Y[a:b, :]) for a, b in zip(bounds[:-1], bounds[1:])]
