import numpy as np
import math
import logging

logger = logging.getLogger(__name__)


V_MIN = 0.05


class SingularityError(ArithmeticError):
    pass


def wrap_angle(angle: float) -> float:
    """
    wrap into (-pi, pi]
    """
    return math.pi - (math.pi - angle) % (2.0 * math.pi)


class UnicycleState(object):
    def __init__(self, x: float, y: float, theta: float, v: float):
        self.x = float(x)
        self.y = float(y)
        self.theta = wrap_angle(float(theta))
        self.v = float(v)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def toArray(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.v])

    @staticmethod
    def fromArray(values) -> "UnicycleState":
        return UnicycleState(*values)

    def isFinite(self) -> bool:
        return bool(np.all(np.isfinite(self.toArray())))

    def __repr__(self):
        return "UnicycleState(x={0:.4f}, y={1:.4f}, theta={2:.4f}, v={3:.4f})".format(self.x, self.y, self.theta, self.v)


class LinearState(object):
    """
    feedback-linearized coordinates (x, dx/dt, y, dy/dt)
    """

    def __init__(self, eta):
        self.eta = np.asarray(eta, dtype=float).reshape(4)

    @staticmethod
    def fromUnicycle(s: UnicycleState) -> "LinearState":
        return LinearState([s.x, s.v * math.cos(s.theta), s.y, s.v * math.sin(s.theta)])

    @property
    def position(self) -> np.ndarray:
        return self.eta[[0, 2]]

    @property
    def velocity(self) -> np.ndarray:
        return self.eta[[1, 3]]


class DiscreteModel(object):
    def __init__(self, A: np.ndarray, B: np.ndarray, C: np.ndarray, tau: float):
        self.A = A
        self.B = B
        self.C = C
        self.tau = tau


def _derivative(state: np.ndarray, omega: float, a: float) -> np.ndarray:
    _, _, theta, v = state
    return np.array([v * math.cos(theta), v * math.sin(theta), omega, a])


def unicycle_step(s: UnicycleState, omega: float, a: float, dt: float) -> UnicycleState:
    if dt <= 0:
        raise ValueError("integration step must be positive, got {0}".format(dt))
    y0 = s.toArray()
    k1 = _derivative(y0, omega, a)
    k2 = _derivative(y0 + 0.5 * dt * k1, omega, a)
    k3 = _derivative(y0 + 0.5 * dt * k2, omega, a)
    k4 = _derivative(y0 + dt * k3, omega, a)
    return UnicycleState.fromArray(y0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def forward_inputs(omega: float, a: float, theta: float, v: float):
    """
    (omega, a) -> (a_x, a_y): the accelerations the unicycle produces in the plane
    """
    return (
        a * math.cos(theta) - v * omega * math.sin(theta),
        a * math.sin(theta) + v * omega * math.cos(theta),
    )


def guard_speed(v: float, v_min: float = V_MIN):
    """
    returns the speed used for inversion and whether it had to be clamped
    """
    if abs(v) >= v_min:
        return v, False
    return math.copysign(v_min, v) if v != 0 else v_min, True


def recover_inputs(a_x: float, a_y: float, theta: float, v: float, v_min: float = V_MIN, strict: bool = False):
    speed, clamped = guard_speed(v, v_min)
    if clamped:
        if strict:
            raise SingularityError("speed {0:.4g} is below the singularity guard {1}".format(v, v_min))
        logger.debug("speed %.4g clamped to %.4g before input recovery", v, speed)
    sin, cos = math.sin(theta), math.cos(theta)
    omega = (-sin * a_x + cos * a_y) / speed
    a = cos * a_x + sin * a_y
    return omega, a


def discrete_model(tau: float) -> DiscreteModel:
    if tau < 0:
        raise ValueError("sampling interval must be nonnegative, got {0}".format(tau))
    A = np.array([
        [1.0, tau, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, tau],
        [0.0, 0.0, 0.0, 1.0],
    ])
    B = np.array([
        [tau * tau / 2.0, 0.0],
        [tau, 0.0],
        [0.0, tau * tau / 2.0],
        [0.0, tau],
    ])
    C = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    return DiscreteModel(A, B, C, tau)
