"""
Dense primal active-set solver for convex quadratic programs

    minimize    1/2 x^T G x + c^T x
    subject to  A x >= b

with G symmetric positive definite.
"""

from scipy import linalg
from scipy.optimize import linprog
import numpy as np
import warnings
import logging

logger = logging.getLogger(__name__)


class QpStatus(object):
    OPTIMAL = "optimal"
    FAILED = "failed"
    INFEASIBLE = "infeasible"


class QuadraticProgram(object):
    def __init__(self, G, c, A=None, b=None):
        self.G = np.asarray(G, dtype=float)
        self.c = np.asarray(c, dtype=float).reshape(-1)
        n = self.c.shape[0]
        if self.G.shape != (n, n):
            raise ValueError("Hessian has shape {0}, expected {1}".format(self.G.shape, (n, n)))
        if A is None:
            A = np.zeros((0, n))
            b = np.zeros(0)
        self.A = np.asarray(A, dtype=float).reshape(-1, n)
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("constraint matrix has {0} rows but there are {1} bounds".format(self.A.shape[0], self.b.shape[0]))

    @property
    def variables(self) -> int:
        return self.c.shape[0]

    @property
    def constraints(self) -> int:
        return self.b.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.G @ x + self.c @ x)

    def isFeasible(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(self.A @ x - self.b >= -tol))


class QpResult(object):
    def __init__(self, x, multipliers, active, objective, iterations, status, kkt_residual):
        self.x = x
        self.multipliers = multipliers
        self.active = active
        self.objective = objective
        self.iterations = iterations
        self.status = status
        self.kkt_residual = kkt_residual

    @property
    def optimal(self) -> bool:
        return self.status == QpStatus.OPTIMAL

    def __repr__(self):
        return "QpResult(status={0}, objective={1:.6g}, iterations={2})".format(self.status, self.objective, self.iterations)


def solve_equality_qp(G: np.ndarray, g: np.ndarray, A: np.ndarray, rhs: np.ndarray):
    """
    minimize 1/2 p^T G p + g^T p subject to A p = rhs; returns (p, multipliers)
    """
    n = G.shape[0]
    m = A.shape[0]
    kkt = np.block([[G, A.T], [A, np.zeros((m, m))]])
    right = np.concatenate([-g, rhs])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            solution = linalg.solve(kkt, right, assume_a="sym")
    except (linalg.LinAlgError, linalg.LinAlgWarning):
        logger.debug("KKT system is singular, using least squares")
        solution = linalg.lstsq(kkt, right)[0]
    # the symmetric system carries -lambda
    return solution[:n], -solution[n:]


def kkt_residual(qp: QuadraticProgram, x: np.ndarray, multipliers: np.ndarray) -> float:
    stationarity = qp.G @ x + qp.c - qp.A.T @ multipliers
    slack = qp.A @ x - qp.b
    parts = [np.max(np.abs(stationarity)) if stationarity.size else 0.0]
    if qp.constraints:
        parts.append(np.max(np.maximum(-slack, 0.0)))
        parts.append(np.max(np.maximum(-multipliers, 0.0)))
        parts.append(np.max(np.abs(multipliers * slack)))
    return float(max(parts))


def find_feasible_point(qp: QuadraticProgram):
    result = linprog(
        np.zeros(qp.variables),
        A_ub=-qp.A,
        b_ub=-qp.b,
        bounds=[(None, None)] * qp.variables,
        method="highs",
    )
    if result.status != 0:
        return None
    return result.x


def solve_qp(qp: QuadraticProgram, tol: float = 1e-9, max_iter: int = 500, x0=None) -> QpResult:
    n = qp.variables
    m = qp.constraints

    if m == 0:
        x, _ = solve_equality_qp(qp.G, qp.c, np.zeros((0, n)), np.zeros(0))
        return QpResult(x, np.zeros(0), np.zeros(0, dtype=bool), qp.objective(x), 0, QpStatus.OPTIMAL, kkt_residual(qp, x, np.zeros(0)))

    if x0 is not None and qp.isFeasible(np.asarray(x0, dtype=float), tol):
        x = np.array(x0, dtype=float)
    else:
        x = find_feasible_point(qp)
        if x is None:
            logger.warning("quadratic program has no feasible point")
            empty = np.zeros(n)
            return QpResult(empty, np.zeros(m), np.zeros(m, dtype=bool), qp.objective(empty), 0, QpStatus.INFEASIBLE, np.inf)

    working = np.zeros(m, dtype=bool)
    multipliers = np.zeros(m)
    status = QpStatus.FAILED
    iterations = 0
    # set after an unblocked full step: x minimizes over the current working set
    stationary = False
    while iterations < max_iter:
        iterations += 1
        indices = np.flatnonzero(working)
        gradient = qp.G @ x + qp.c
        p, lam = solve_equality_qp(qp.G, gradient, qp.A[indices], np.zeros(len(indices)))

        if stationary or np.linalg.norm(p, np.inf) <= tol * max(1.0, np.linalg.norm(x, np.inf)):
            stationary = True
            multipliers = np.zeros(m)
            multipliers[indices] = lam
            if len(indices) == 0 or lam.min() >= -tol:
                status = QpStatus.OPTIMAL
                break
            # drop the constraint with the most negative multiplier
            working[indices[int(np.argmin(lam))]] = False
            stationary = False
            continue

        step = 1.0
        blocking = None
        direction = qp.A @ p
        for i in np.flatnonzero(~working):
            if direction[i] < -tol * np.linalg.norm(qp.A[i]) * np.linalg.norm(p):
                ratio = max((qp.b[i] - qp.A[i] @ x) / direction[i], 0.0)
                if ratio < step:
                    step = ratio
                    blocking = i
        x = x + step * p
        if blocking is not None:
            working[blocking] = True
        else:
            stationary = True
    else:
        logger.warning("active-set solver stopped after %d iterations", max_iter)

    residual = kkt_residual(qp, x, multipliers)
    return QpResult(x, multipliers, working, qp.objective(x), iterations, status, residual)
