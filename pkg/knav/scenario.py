from knav.forecast import GridWorldMap
from knav.lifting import DensitySnapshot
from knav.seeding import stage_rng
import numpy as np
import math
import logging

logger = logging.getLogger(__name__)


class ScenarioError(ValueError):
    pass


BOUNDARY_POLICIES = ("bounce", "wrap")


class ObstacleBlob(object):
    def __init__(self, center, velocity, sigma: float, peak: float):
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.velocity = np.asarray(velocity, dtype=float).reshape(2)
        self.sigma = float(sigma)
        self.peak = float(peak)

    def validate(self):
        if self.sigma <= 0:
            raise ScenarioError("blob spread must be positive, got {0}".format(self.sigma))
        if not 0.0 < self.peak <= 1.0:
            raise ScenarioError("blob peak must lie in (0, 1], got {0}".format(self.peak))

    def copy(self) -> "ObstacleBlob":
        return ObstacleBlob(self.center.copy(), self.velocity.copy(), self.sigma, self.peak)

    def __repr__(self):
        return "ObstacleBlob(center={0}, velocity={1})".format(np.round(self.center, 3).tolist(), np.round(self.velocity, 3).tolist())


class ScenarioConfig(object):
    """
    Synthetic obstacle world. With an explicit ``blobs`` list the random generator is bypassed;
    otherwise ``count`` blobs are drawn from the seed, keeping ``clearance`` meters from start and goal.
    """

    def __init__(
        self,
        world: GridWorldMap = None,
        blobs=None,
        count: int = 12,
        frames: int = 11,
        seed: int = 0,
        boundary: str = "bounce",
        dt: float = 0.1,
        speed=(0.3, 0.6),
        sigma=(0.4, 0.6),
        peak=(0.8, 1.0),
        start=(0.0, 0.0),
        goal=(15.0, 15.0),
        clearance: float = 2.0,
    ):
        self.world = GridWorldMap(30, 30, 0.5) if world is None else world
        self.blobs = None if blobs is None else [b.copy() for b in blobs]
        self.count = count
        self.frames = frames
        self.seed = seed
        self.boundary = boundary
        self.dt = dt
        self.speed = tuple(speed)
        self.sigma = tuple(sigma)
        self.peak = tuple(peak)
        self.start = np.asarray(start, dtype=float)
        self.goal = np.asarray(goal, dtype=float)
        self.clearance = clearance
        self.validate()

    def validate(self):
        if self.boundary not in BOUNDARY_POLICIES:
            raise ScenarioError('unknown boundary policy "{0}"'.format(self.boundary))
        if self.frames < 2:
            raise ScenarioError("need at least 2 frames, got {0}".format(self.frames))
        if self.dt <= 0:
            raise ScenarioError("time step must be positive")
        if self.blobs is not None:
            for blob in self.blobs:
                blob.validate()
            return
        if self.count < 0:
            raise ScenarioError("obstacle count must be nonnegative")
        for name, (low, high) in (("speed", self.speed), ("sigma", self.sigma), ("peak", self.peak)):
            if low > high:
                raise ScenarioError("{0} range is empty: {1} > {2}".format(name, low, high))
        if self.sigma[0] <= 0:
            raise ScenarioError("blob spread must be positive")
        if not (0.0 < self.peak[0] and self.peak[1] <= 1.0):
            raise ScenarioError("blob peak must lie in (0, 1]")
        if self.speed[0] < 0:
            raise ScenarioError("speeds must be nonnegative")

    def obstacles(self):
        if self.blobs is not None:
            return [b.copy() for b in self.blobs]
        rng = stage_rng(self.seed, "scenario")
        x0, y0, x1, y1 = self.world.extent
        result = []
        for i in range(self.count):
            for _ in range(1000):
                center = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
                if (
                    np.linalg.norm(center - self.start) >= self.clearance
                    and np.linalg.norm(center - self.goal) >= self.clearance
                ):
                    break
            else:
                raise ScenarioError("cannot place obstacle {0} with {1} m clearance".format(i + 1, self.clearance))
            heading = rng.uniform(0.0, 2.0 * math.pi)
            speed = rng.uniform(*self.speed)
            velocity = speed * np.array([math.cos(heading), math.sin(heading)])
            result.append(ObstacleBlob(center, velocity, rng.uniform(*self.sigma), rng.uniform(*self.peak)))
        return result


class ObstacleField(object):
    def __init__(self, blobs, world: GridWorldMap, boundary: str = "bounce", dt: float = 0.1, timestamp: int = 0):
        self.blobs = blobs
        self.world = world
        self.boundary = boundary
        self.dt = dt
        self.timestamp = timestamp

    @staticmethod
    def fromConfig(c: ScenarioConfig) -> "ObstacleField":
        return ObstacleField(c.obstacles(), c.world, c.boundary, c.dt)

    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.blobs]).reshape(-1, 2)

    def advance(self) -> "ObstacleField":
        x0, y0, x1, y1 = self.world.extent
        low = np.array([x0, y0])
        high = np.array([x1, y1])
        moved = []
        for blob in self.blobs:
            center = blob.center + blob.velocity * self.dt
            velocity = blob.velocity.copy()
            if self.boundary == "wrap":
                center = low + np.mod(center - low, high - low)
            else:
                for axis in range(2):
                    if center[axis] < low[axis]:
                        center[axis] = 2 * low[axis] - center[axis]
                        velocity[axis] = -velocity[axis]
                    elif center[axis] > high[axis]:
                        center[axis] = 2 * high[axis] - center[axis]
                        velocity[axis] = -velocity[axis]
            moved.append(ObstacleBlob(center, velocity, blob.sigma, blob.peak))
        return ObstacleField(moved, self.world, self.boundary, self.dt, self.timestamp + 1)

    def render(self) -> DensitySnapshot:
        x, y = self.world.centers()
        values = np.zeros(x.shape)
        for blob in self.blobs:
            distance2 = (x - blob.center[0]) ** 2 + (y - blob.center[1]) ** 2
            values += blob.peak * np.exp(-distance2 / (2.0 * blob.sigma ** 2))
        return DensitySnapshot(np.clip(values, 0.0, 1.0), self.timestamp)


def generate_scenario(c: ScenarioConfig):
    field = ObstacleField.fromConfig(c)
    snapshots = [field.render()]
    for _ in range(c.frames - 1):
        field = field.advance()
        snapshots.append(field.render())
    return snapshots
