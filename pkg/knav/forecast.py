from knav.lifting import DensitySnapshot, DataMatrices, KoopmanOperator, lift_snapshot
from scipy.stats import spearmanr
import numpy as np
import logging

logger = logging.getLogger(__name__)


class ForecastError(ValueError):
    pass


class GridWorldMap(object):
    """
    Maps grid cells to world coordinates: column index runs along x, row index along y.
    """

    def __init__(self, rows: int, cols: int, cell_size: float, origin=(0.0, 0.0)):
        if cell_size <= 0:
            raise ForecastError("cell size must be positive, got {0}".format(cell_size))
        if rows < 1 or cols < 1:
            raise ForecastError("grid must have at least one cell")
        self.rows = rows
        self.cols = cols
        self.cell_size = float(cell_size)
        self.origin = (float(origin[0]), float(origin[1]))

    @property
    def extent(self):
        x0, y0 = self.origin
        return x0, y0, x0 + self.cols * self.cell_size, y0 + self.rows * self.cell_size

    def cellCenter(self, row, col):
        x0, y0 = self.origin
        return x0 + (np.asarray(col) + 0.5) * self.cell_size, y0 + (np.asarray(row) + 0.5) * self.cell_size

    def centers(self):
        """
        world coordinates of every cell center as two rows x cols arrays
        """
        rows, cols = np.meshgrid(np.arange(self.rows), np.arange(self.cols), indexing="ij")
        return self.cellCenter(rows, cols)

    def contains(self, points: np.ndarray) -> bool:
        x0, y0, x1, y1 = self.extent
        points = np.asarray(points).reshape(-1, 2)
        return bool(np.all((points[:, 0] >= x0) & (points[:, 0] <= x1) & (points[:, 1] >= y0) & (points[:, 1] <= y1)))

    def matches(self, snapshot: DensitySnapshot) -> bool:
        return snapshot.shape == (self.rows, self.cols)


class ForecastSequence(object):
    def __init__(self, origin: int, snapshots):
        self.origin = origin
        self.snapshots = list(snapshots)
        if not self.snapshots:
            raise ForecastError("a forecast needs at least one step")
        shape = self.snapshots[0].shape
        if any(s.shape != shape for s in self.snapshots):
            raise ForecastError("all forecast frames must share one grid shape")

    @property
    def horizon(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, h):
        """
        1-based: forecast[h] is the prediction for t + h
        """
        if h < 1 or h > self.horizon:
            raise IndexError(h)
        return self.snapshots[h - 1]

    def __iter__(self):
        return iter(self.snapshots)


class OccupancyPointSet(object):
    def __init__(self, points, threshold: float, horizon: int, weights=None):
        self.points = np.asarray(points, dtype=float).reshape(-1, 2)
        self.threshold = threshold
        self.horizon = horizon
        self.weights = None if weights is None else np.asarray(weights, dtype=float)

    def __len__(self):
        return self.points.shape[0]


class ExactFit(object):
    """
    reported instead of a ratio when the centralized operator already fits the data exactly
    """

    def __bool__(self):
        return False

    def __repr__(self):
        return "ExactFit"

    def __str__(self):
        return "exact"


EXACT_FIT = ExactFit()


def propagate(K: KoopmanOperator, x_t: np.ndarray, H: int):
    matrix = K.matrix if isinstance(K, KoopmanOperator) else np.asarray(K)
    x_t = np.asarray(x_t, dtype=float)
    if matrix.shape[1] != x_t.shape[0]:
        raise ForecastError("operator of size {0} cannot act on a state of length {1}".format(matrix.shape[0], x_t.shape[0]))
    if H < 1:
        raise ForecastError("horizon must be at least 1, got {0}".format(H))
    result = []
    current = x_t
    for _ in range(H):
        current = matrix @ current
        result.append(current)
    return result


def reconstruct(v: np.ndarray, shape, timestamp: int = 0) -> DensitySnapshot:
    v = np.asarray(v, dtype=float)
    rows, cols = shape
    if v.shape != (rows * cols,):
        raise ForecastError("vector of length {0} cannot fill a {1}x{2} grid".format(v.size, rows, cols))
    return DensitySnapshot(np.clip(v, 0.0, 1.0).reshape(rows, cols), timestamp)


def forecast(K: KoopmanOperator, snapshot: DensitySnapshot, H: int) -> ForecastSequence:
    states = propagate(K, lift_snapshot(snapshot), H)
    return ForecastSequence(
        snapshot.timestamp,
        [reconstruct(x, snapshot.shape, snapshot.timestamp + h + 1) for h, x in enumerate(states)],
    )


def persistence(snapshot: DensitySnapshot, H: int) -> ForecastSequence:
    """
    the current frame repeated over the horizon (no anticipation)
    """
    return ForecastSequence(
        snapshot.timestamp,
        [DensitySnapshot(snapshot.values, snapshot.timestamp + h + 1) for h in range(H)],
    )


def threshold_set(rho: DensitySnapshot, c_rho: float, world: GridWorldMap, horizon: int = 0, weighted: bool = False) -> OccupancyPointSet:
    # c_rho = 1 is allowed and always yields an empty set
    if not 0.0 <= c_rho <= 1.0:
        raise ForecastError("threshold must lie in [0, 1], got {0}".format(c_rho))
    if not world.matches(rho):
        raise ForecastError("map is {0}x{1} but the snapshot is {2}x{3}".format(world.rows, world.cols, rho.rows, rho.cols))
    rows, cols = np.nonzero(rho.values > c_rho)
    x, y = world.cellCenter(rows, cols)
    weights = rho.values[rows, cols] if weighted else None
    return OccupancyPointSet(np.column_stack([x, y]), c_rho, horizon, weights)


def _ratio(numerator: float, denominator: float):
    if denominator < 1e-14:
        return EXACT_FIT
    return numerator / denominator


def normalized_errors(K_d, K_star, d: DataMatrices, h: int):
    """
    (e_1, e_h): prediction residuals of the distributed operator relative to the centralized one
    """
    a = K_d.matrix if isinstance(K_d, KoopmanOperator) else np.asarray(K_d)
    b = K_star.matrix if isinstance(K_star, KoopmanOperator) else np.asarray(K_star)
    if a.shape != b.shape or a.shape[0] != d.n:
        raise ForecastError("operators must both be {0}x{0}".format(d.n))
    if h < 1:
        raise ForecastError("horizon must be at least 1, got {0}".format(h))
    e_1 = _ratio(np.linalg.norm(d.Y - a @ d.X, "fro"), np.linalg.norm(d.Y - b @ d.X, "fro"))
    X_h, Y_h = d.shifted(h)
    pred_a = X_h
    pred_b = X_h
    for _ in range(h):
        pred_a = a @ pred_a
        pred_b = b @ pred_b
    e_h = _ratio(np.linalg.norm(Y_h - pred_a, "fro"), np.linalg.norm(Y_h - pred_b, "fro"))
    return e_1, e_h


class ErrorMap(object):
    def __init__(self, cells, step_errors):
        # H x rows x cols absolute errors, and the Frobenius error of every step
        self.cells = cells
        self.step_errors = step_errors

    def trend(self) -> float:
        """
        Spearman correlation of the per-step error against the horizon step
        """
        if len(self.step_errors) < 2:
            return 0.0
        correlation, _ = spearmanr(np.arange(1, len(self.step_errors) + 1), self.step_errors)
        return float(correlation) if np.isfinite(correlation) else 0.0


def forecast_error_map(predicted: ForecastSequence, truth) -> ErrorMap:
    truth = list(truth)
    if len(truth) < predicted.horizon:
        raise ForecastError("need {0} true frames, got {1}".format(predicted.horizon, len(truth)))
    cells = np.stack([np.abs(p.values - t.values) for p, t in zip(predicted, truth)])
    steps = np.array([np.linalg.norm(c, "fro") for c in cells])
    return ErrorMap(cells, steps)
