from knav.forecast import OccupancyPointSet, threshold_set
from scipy.special import logsumexp
from scipy import linalg
import numpy as np
import math
import logging

logger = logging.getLogger(__name__)


class GeometryError(ValueError):
    pass


class GaussianComponent(object):
    def __init__(self, mean, covariance, weight: float):
        self.mean = np.asarray(mean, dtype=float)
        self.covariance = np.asarray(covariance, dtype=float)
        self.weight = float(weight)

    def __repr__(self):
        return "GaussianComponent(mean={0}, weight={1:.4f})".format(np.round(self.mean, 4).tolist(), self.weight)


class ConfidenceEllipse(object):
    def __init__(self, center, rotation, semi_axes, quantile: float, delta2: float):
        self.center = np.asarray(center, dtype=float)
        self.rotation = np.asarray(rotation, dtype=float)
        self.semi_axes = (float(semi_axes[0]), float(semi_axes[1]))
        self.quantile = quantile
        self.delta2 = delta2

    def eigenvalues(self):
        a, b = self.semi_axes
        return np.array([a * a / self.delta2, b * b / self.delta2])

    def covariance(self) -> np.ndarray:
        U = self.rotation
        return U @ np.diag(self.eigenvalues()) @ U.T


class ObstaclePolytope(object):
    """
    Half-space description of one predicted obstacle: the robot is clear of facet i when
    normals[i] . xi >= offsets[i] + epsilon.
    """

    def __init__(self, normals, offsets, support, epsilon: float, horizon: int = 0, index: int = 0):
        self.normals = np.asarray(normals, dtype=float)
        self.offsets = np.asarray(offsets, dtype=float)
        self.support = np.asarray(support, dtype=float)
        self.epsilon = float(epsilon)
        self.horizon = horizon
        self.index = index

    @property
    def facets(self) -> int:
        return self.normals.shape[0]

    def activations(self, xi) -> np.ndarray:
        return self.normals @ np.asarray(xi, dtype=float) - self.offsets - self.epsilon


class ActiveConstraint(object):
    def __init__(self, normal, offset: float, epsilon: float, horizon: int, obstacle: int, facet: int):
        self.normal = np.asarray(normal, dtype=float)
        self.offset = float(offset)
        self.epsilon = float(epsilon)
        self.horizon = horizon
        self.obstacle = obstacle
        self.facet = facet

    def margin(self, xi) -> float:
        return float(self.normal @ np.asarray(xi, dtype=float) - self.offset - self.epsilon)

    def __repr__(self):
        return "ActiveConstraint(h={0}, obstacle={1}, facet={2})".format(self.horizon, self.obstacle, self.facet)


def _floor_covariance(covariance: np.ndarray, floor: float):
    covariance = 0.5 * (covariance + covariance.T)
    values, vectors = linalg.eigh(covariance)
    if np.all(values >= floor):
        return covariance, False
    values = np.maximum(values, floor)
    return vectors @ np.diag(values) @ vectors.T, True


def _log_gaussian(points: np.ndarray, mean: np.ndarray, covariance: np.ndarray) -> np.ndarray:
    factor = linalg.cholesky(covariance, lower=True)
    solved = linalg.solve_triangular(factor, (points - mean).T, lower=True)
    mahalanobis = np.sum(solved ** 2, axis=0)
    log_det = 2.0 * np.sum(np.log(np.diag(factor)))
    return -0.5 * (mahalanobis + log_det + points.shape[1] * math.log(2.0 * math.pi))


def _kmeans_plus_plus(points: np.ndarray, weights: np.ndarray, k: int, rng) -> np.ndarray:
    # greedy variant: several candidates per round, keep the one with the lowest potential
    trials = 2 + int(math.log(k))
    first = rng.choice(len(points), p=weights / weights.sum())
    centers = [points[first]]
    closest = np.sum((points - points[first]) ** 2, axis=1)
    for _ in range(1, k):
        potential = closest * weights
        if potential.sum() <= 0:
            candidates = rng.choice(len(points), size=trials)
        else:
            candidates = rng.choice(len(points), size=trials, p=potential / potential.sum())
        best = None
        for c in candidates:
            distance = np.minimum(closest, np.sum((points - points[c]) ** 2, axis=1))
            score = np.sum(distance * weights)
            if best is None or score < best[0]:
                best = (score, c, distance)
        centers.append(points[best[1]])
        closest = best[2]
    return np.array(centers)


def fit_gmm(points: OccupancyPointSet, L_o: int, seed, max_iter: int = 100, tol: float = 1e-6, cell_size: float = 0.5, weighted: bool = False):
    """
    Expectation-maximization fit of an L_o-component mixture to the occupancy points.

    Deterministic for a given ``seed`` (int or numpy SeedSequence). Covariance eigenvalues are floored at
    (cell_size / 4)^2. Components come back sorted by descending weight, ties by lexicographic mean.
    """
    data = points.points
    m = data.shape[0]
    if L_o < 1:
        raise GeometryError("component count must be positive, got {0}".format(L_o))
    if m < L_o:
        raise GeometryError("cannot fit {0} components to {1} points".format(L_o, m))
    if weighted and points.weights is not None:
        weights = np.asarray(points.weights, dtype=float)
        weights = weights * (m / weights.sum())
    else:
        weights = np.ones(m)
    floor = (0.25 * cell_size) ** 2
    if m > 1 and np.all(np.ptp(data, axis=0) == 0):
        logger.warning("all %d occupancy points coincide, covariances are floored", m)

    rng = np.random.default_rng(seed)
    means = _kmeans_plus_plus(data, weights, L_o, rng)

    # one hard assignment to seed covariances and weights
    labels = np.argmin(np.sum((data[:, None, :] - means[None, :, :]) ** 2, axis=2), axis=1)
    global_cov, _ = _floor_covariance(np.cov(data.T, aweights=weights) if m > 1 else np.zeros((2, 2)), floor)
    covariances = []
    mixing = np.empty(L_o)
    for k in range(L_o):
        member = labels == k
        mixing[k] = max(weights[member].sum(), 1.0) / m
        if member.sum() > 1:
            cov = np.cov(data[member].T, aweights=weights[member], bias=True)
            cov, _ = _floor_covariance(cov, floor)
        else:
            cov = global_cov
        covariances.append(cov)
    covariances = np.array(covariances)
    mixing /= mixing.sum()

    total = weights.sum()
    likelihood = -np.inf
    floored = False
    for iteration in range(max_iter):
        log_prob = np.column_stack([
            math.log(mixing[k]) + _log_gaussian(data, means[k], covariances[k]) for k in range(L_o)
        ])
        norm = logsumexp(log_prob, axis=1)
        current = float(np.sum(weights * norm) / total)
        resp = np.exp(log_prob - norm[:, None]) * weights[:, None]

        counts = resp.sum(axis=0)
        for k in range(L_o):
            if counts[k] <= 1e-12 * total:
                # starved component keeps its parameters
                continue
            means[k] = resp[:, k] @ data / counts[k]
            centered = data - means[k]
            cov = (resp[:, k, None] * centered).T @ centered / counts[k]
            covariances[k], hit = _floor_covariance(cov, floor)
            floored = floored or hit
        mixing = np.maximum(counts, 1e-12 * total) / total
        mixing /= mixing.sum()

        if current - likelihood < tol:
            logger.debug("EM converged after %d iterations (mean log-likelihood %.6f)", iteration + 1, current)
            break
        likelihood = current
    else:
        logger.debug("EM stopped at the iteration limit %d", max_iter)

    if floored:
        logger.debug("covariance floor %.4g applied", floor)

    components = [GaussianComponent(means[k].copy(), covariances[k].copy(), mixing[k]) for k in range(L_o)]
    components.sort(key=lambda c: (-c.weight, c.mean[0], c.mean[1]))
    return components


def chi2_quantile_2d(q: float) -> float:
    if not 0.0 < q < 1.0:
        raise GeometryError("quantile must lie in (0, 1), got {0}".format(q))
    return -2.0 * math.log1p(-q)


def confidence_ellipse(c: GaussianComponent, q: float = 0.95) -> ConfidenceEllipse:
    delta2 = chi2_quantile_2d(q)
    values, vectors = linalg.eigh(0.5 * (c.covariance + c.covariance.T))
    # descending: major axis first
    values = values[::-1]
    if values[1] <= 0:
        raise GeometryError("covariance is not positive definite")
    if values[0] - values[1] <= 1e-12 * values[0]:
        # isotropic: any frame works, keep the world axes
        major = np.array([1.0, 0.0])
    else:
        major = vectors[:, -1]
        if major[0] < 0 or (major[0] == 0 and major[1] < 0):
            major = -major
    # right-handed frame with the major axis first
    rotation = np.array([[major[0], -major[1]], [major[1], major[0]]])
    return ConfidenceEllipse(c.mean, rotation, (math.sqrt(delta2 * values[0]), math.sqrt(delta2 * values[1])), q, delta2)


NORMAL_MODES = ("radial", "rotated", "tangent")


def ellipse_polytope(e: ConfidenceEllipse, n_facets: int, epsilon: float, mode: str = "radial", horizon: int = 0, index: int = 0) -> ObstaclePolytope:
    """
    Facet i passes through the support point mu + U [a cos t_i, b sin t_i], t_i = 2 pi i / n.

    ``radial`` uses the normal [cos t_i, sin t_i] as is, ``rotated`` turns it into the ellipse frame
    and ``tangent`` uses the supporting-hyperplane normal of the ellipse at the support point.
    """
    if n_facets < 3:
        raise GeometryError("a polytope needs at least 3 facets, got {0}".format(n_facets))
    if epsilon < 0:
        raise GeometryError("safety margin must be nonnegative")
    if mode not in NORMAL_MODES:
        raise GeometryError('unknown normal mode "{0}"'.format(mode))
    a, b = e.semi_axes
    angles = 2.0 * math.pi * np.arange(n_facets) / n_facets
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    support = e.center + (directions * [a, b]) @ e.rotation.T
    if mode == "radial":
        normals = directions
    elif mode == "rotated":
        normals = directions @ e.rotation.T
    else:
        local = directions / [a, b]
        normals = local @ e.rotation.T
        normals /= np.linalg.norm(normals, axis=1)[:, None]
    offsets = np.sum(normals * support, axis=1)
    return ObstaclePolytope(normals, offsets, support, epsilon, horizon, index)


def most_active_facet(p: ObstaclePolytope, xi) -> ActiveConstraint:
    activation = p.activations(xi)
    best = activation.max()
    # ties go to the smallest facet index
    tolerance = 1e-12 * (1.0 + abs(best))
    facet = int(np.flatnonzero(activation >= best - tolerance)[0])
    return ActiveConstraint(p.normals[facet], p.offsets[facet], p.epsilon, p.horizon, p.index, facet)


class PerceptionSettings(object):
    def __init__(self, threshold: float = 0.5, components: int = 12, quantile: float = 0.95, facets: int = 8, epsilon: float = 0.5, normal_mode: str = "radial", weighted: bool = False, max_iter: int = 100, tol: float = 1e-6):
        self.threshold = threshold
        self.components = components
        self.quantile = quantile
        self.facets = facets
        self.epsilon = epsilon
        self.normal_mode = normal_mode
        self.weighted = weighted
        self.max_iter = max_iter
        self.tol = tol


def obstacle_polytopes(snapshot, world, settings: PerceptionSettings, seed, horizon: int = 0):
    """
    threshold -> mixture fit -> confidence ellipses -> polytopes for one (predicted) frame.
    Fewer occupied cells than components shrinks the mixture; an empty frame yields no polytopes.
    """
    points = threshold_set(snapshot, settings.threshold, world, horizon, settings.weighted)
    if len(points) == 0:
        return []
    count = min(settings.components, len(points))
    components = fit_gmm(points, count, seed, settings.max_iter, settings.tol, world.cell_size, settings.weighted)
    return [
        ellipse_polytope(confidence_ellipse(c, settings.quantile), settings.facets, settings.epsilon, settings.normal_mode, horizon, index)
        for index, c in enumerate(components)
    ]
