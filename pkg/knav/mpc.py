"""
Receding-horizon controller for the feedback-linearized unicycle.

The states are eliminated (condensed form), so the decision vector of each solve is the stacked
input sequence u_0 .. u_{H-1} followed by one nonnegative slack per obstacle constraint. Predicted
output k (0-based) is z_{t+k+1|t}; its obstacle constraints come from the forecast for t+k+1.
"""

from knav.geometry import most_active_facet, ActiveConstraint
from knav.qp import QuadraticProgram, QpStatus, solve_qp
from knav.vehicle import DiscreteModel, LinearState, discrete_model
from scipy import linalg
import numpy as np
import logging

logger = logging.getLogger(__name__)


class MpcError(ValueError):
    pass


class SolutionStatus(object):
    OPTIMAL = "optimal"
    SOFT_FEASIBLE = "soft-feasible"
    FAILED = "failed"


class MpcConfig(object):
    def __init__(
        self,
        horizon: int = 14,
        Q=None,
        R=None,
        goal=(15.0, 15.0),
        safety_margin: float = 0.5,
        robot_radius: float = 0.3,
        input_bound: float = None,
        tau: float = 0.1,
        tol: float = 1e-9,
        max_iter: int = 500,
        slack_weight: float = None,
        slack_tolerance: float = 1e-6,
    ):
        self.horizon = horizon
        self.Q = np.eye(2) if Q is None else np.asarray(Q, dtype=float)
        self.R = 0.1 * np.eye(2) if R is None else np.asarray(R, dtype=float)
        self.goal = np.asarray(goal, dtype=float)
        self.safety_margin = safety_margin
        self.robot_radius = robot_radius
        self.input_bound = input_bound
        self.tau = tau
        self.tol = tol
        self.max_iter = max_iter
        if slack_weight is None:
            slack_weight = 1e6 * float(np.max(linalg.eigvalsh(0.5 * (self.Q + self.Q.T))))
        self.slack_weight = slack_weight
        self.slack_tolerance = slack_tolerance
        self.validate()

    def validate(self):
        if self.horizon < 1:
            raise MpcError("horizon must be at least 1, got {0}".format(self.horizon))
        for name, matrix in (("Q", self.Q), ("R", self.R)):
            if matrix.shape != (2, 2) or not np.allclose(matrix, matrix.T):
                raise MpcError("{0} must be a symmetric 2x2 matrix".format(name))
            if np.min(linalg.eigvalsh(matrix)) <= 0:
                raise MpcError("{0} must be positive definite".format(name))
        if self.safety_margin < self.robot_radius:
            raise MpcError(
                "safety margin {0} is smaller than the robot radius {1}".format(self.safety_margin, self.robot_radius)
            )
        if self.input_bound is not None and self.input_bound <= 0:
            raise MpcError("input bound must be positive")
        if self.tau <= 0:
            raise MpcError("sampling interval must be positive")
        if self.slack_weight <= 0:
            raise MpcError("slack weight must be positive")


class MpcProblem(object):
    def __init__(self, x_t, model: DiscreteModel, constraints, config: MpcConfig):
        self.x_t = x_t.eta if isinstance(x_t, LinearState) else np.asarray(x_t, dtype=float)
        self.model = model
        self.constraints = list(constraints)
        self.config = config
        for c in self.constraints:
            if not 0 <= c.horizon < config.horizon:
                raise MpcError("constraint slot {0} is outside the horizon {1}".format(c.horizon, config.horizon))


class MpcSolution(object):
    def __init__(self, inputs, outputs, objective, status, slacks, iterations=0, kkt_residual=0.0, fallback=False):
        self.inputs = inputs
        self.outputs = outputs
        self.objective = objective
        self.status = status
        self.slacks = slacks
        self.iterations = iterations
        self.kkt_residual = kkt_residual
        self.fallback = fallback

    @property
    def max_slack(self) -> float:
        return float(self.slacks.max()) if self.slacks.size else 0.0

    def shifted(self) -> "MpcSolution":
        """
        the plan one step later: drop the applied input, hold the last output, coast with zero input
        """
        inputs = np.vstack([self.inputs[1:], np.zeros((1, 2))])
        outputs = np.vstack([self.outputs[1:], self.outputs[-1:]])
        return MpcSolution(inputs, outputs, self.objective, SolutionStatus.FAILED, np.zeros(0), 0, np.inf, True)


def straight_line(position, goal, H: int) -> np.ndarray:
    fractions = (np.arange(H) + 1.0) / H
    return position[None, :] + fractions[:, None] * (goal - position)[None, :]


def generate_constraints(polytopes, ref_traj) -> list:
    """
    polytopes[k] lists the obstacle polytopes predicted for slot k; the most active facet of each is
    taken at ref_traj[k]
    """
    polytopes = list(polytopes)
    if not polytopes:
        return []
    ref_traj = np.asarray(ref_traj, dtype=float)
    if len(polytopes) != ref_traj.shape[0]:
        raise MpcError("got polytopes for {0} slots but the reference has {1}".format(len(polytopes), ref_traj.shape[0]))
    result = []
    for k, slot in enumerate(polytopes):
        if slot is None:
            raise MpcError("missing polytopes for slot {0}".format(k))
        for p in slot:
            active = most_active_facet(p, ref_traj[k])
            result.append(ActiveConstraint(active.normal, active.offset, active.epsilon, k, active.obstacle, active.facet))
    return result


class CondensedQp(object):
    def __init__(self, qp: QuadraticProgram, Phi, Gamma, constant: float, inputs: int, slacks: int, constraint_rows: np.ndarray, constraint_rhs: np.ndarray):
        self.qp = qp
        # output prediction: Z = Phi x_t + Gamma u
        self.Phi = Phi
        self.Gamma = Gamma
        self.constant = constant
        self.inputs = inputs
        self.slacks = slacks
        self.constraint_rows = constraint_rows
        self.constraint_rhs = constraint_rhs

    def feasibleStart(self, u: np.ndarray, bound: float = None) -> np.ndarray:
        if bound is not None:
            u = np.clip(u, -bound, bound)
        if self.slacks == 0:
            return u
        s = np.maximum(self.constraint_rhs - self.constraint_rows @ u, 0.0)
        return np.concatenate([u, s])


def condense(model: DiscreteModel, H: int):
    """
    state and output prediction matrices over slots 1..H
    """
    nx = model.A.shape[0]
    nu = model.B.shape[1]
    Phi = np.zeros((nx * H, nx))
    Gamma = np.zeros((nx * H, nu * H))
    power = np.eye(nx)
    for k in range(H):
        power = model.A @ power
        Phi[k * nx:(k + 1) * nx, :] = power
        for j in range(k + 1):
            # A^(k-j) B acts on u_j in x_{k+1}
            Gamma[k * nx:(k + 1) * nx, j * nu:(j + 1) * nu] = np.linalg.matrix_power(model.A, k - j) @ model.B
    C_bar = np.kron(np.eye(H), model.C)
    return C_bar @ Phi, C_bar @ Gamma


def build_qp(p: MpcProblem) -> CondensedQp:
    config = p.config
    H = config.horizon
    Phi, Gamma = condense(p.model, H)
    Q_bar = np.kron(np.eye(H), config.Q)
    R_bar = np.kron(np.eye(H), config.R)
    target = np.tile(config.goal, H)
    free = Phi @ p.x_t - target

    nu = Gamma.shape[1]
    ns = len(p.constraints)
    G_u = 2.0 * (Gamma.T @ Q_bar @ Gamma + R_bar)
    c_u = 2.0 * Gamma.T @ Q_bar @ free
    G = linalg.block_diag(G_u, 2.0 * config.slack_weight * np.eye(ns))
    c = np.concatenate([c_u, config.slack_weight * np.ones(ns)])
    constant = float(free @ Q_bar @ free)

    rows = np.zeros((ns, nu))
    rhs = np.zeros(ns)
    for i, constraint in enumerate(p.constraints):
        block = slice(2 * constraint.horizon, 2 * constraint.horizon + 2)
        # normal . z_k + s_i >= offset + epsilon
        rows[i] = constraint.normal @ Gamma[block, :]
        rhs[i] = constraint.offset + constraint.epsilon - constraint.normal @ (Phi[block, :] @ p.x_t)

    A_parts = [np.hstack([rows, np.eye(ns)]), np.hstack([np.zeros((ns, nu)), np.eye(ns)])]
    b_parts = [rhs, np.zeros(ns)]
    if config.input_bound is not None:
        box = np.hstack([np.eye(nu), np.zeros((nu, ns))])
        A_parts += [box, -box]
        b_parts += [-config.input_bound * np.ones(nu), -config.input_bound * np.ones(nu)]
    qp = QuadraticProgram(G, c, np.vstack(A_parts), np.concatenate(b_parts))
    return CondensedQp(qp, Phi, Gamma, constant, nu, ns, rows, rhs)


def solve(problem: MpcProblem, warm_inputs=None) -> MpcSolution:
    config = problem.config
    H = config.horizon
    condensed = build_qp(problem)
    u_start = np.zeros(2 * H) if warm_inputs is None else np.asarray(warm_inputs, dtype=float).reshape(-1)
    start = condensed.feasibleStart(u_start, config.input_bound)
    result = solve_qp(condensed.qp, config.tol, config.max_iter, x0=start)
    u = result.x[:condensed.inputs]
    slacks = result.x[condensed.inputs:]
    outputs = (condensed.Phi @ problem.x_t + condensed.Gamma @ u).reshape(H, 2)
    if result.status != QpStatus.OPTIMAL:
        status = SolutionStatus.FAILED
    elif slacks.size and slacks.max() > config.slack_tolerance:
        status = SolutionStatus.SOFT_FEASIBLE
    else:
        status = SolutionStatus.OPTIMAL
    return MpcSolution(u.reshape(H, 2), outputs, result.objective + condensed.constant, status, slacks, result.iterations, result.kkt_residual)


class StepReport(object):
    def __init__(self, applied, solution: MpcSolution, constraints, initial_violation: bool):
        self.applied = applied
        self.solution = solution
        self.constraints = constraints
        # robot already inside an inflated region at solve time
        self.initial_violation = initial_violation


class MpcController(object):
    def __init__(self, config: MpcConfig):
        self.config = config
        self.model = discrete_model(config.tau)
        self.previous = None

    def reset(self):
        self.previous = None

    def referenceTrajectory(self, state: LinearState) -> np.ndarray:
        if self.previous is None:
            return straight_line(state.position, self.config.goal, self.config.horizon)
        return self.previous.shifted().outputs

    def mpc_step(self, state: LinearState, polytopes=(), current=()) -> StepReport:
        """
        ``polytopes`` holds one list per predicted step t+1..t+H; ``current`` the polytopes of the frame
        observed at t, which only feed the initial violation flag.
        """
        reference = self.referenceTrajectory(state)
        constraints = generate_constraints(polytopes, reference)
        initial_violation = any(p.activations(state.position).max() < 0 for p in current)
        warm = None if self.previous is None else self.previous.shifted().inputs
        solution = solve(MpcProblem(state, self.model, constraints, self.config), warm)
        if solution.status == SolutionStatus.FAILED:
            if self.previous is not None:
                logger.warning("MPC solve failed, following the previous plan")
                fallback = self.previous.shifted()
                fallback.iterations = solution.iterations
                solution = fallback
            else:
                logger.warning("MPC solve failed without a previous plan, applying zero input")
                solution = MpcSolution(np.zeros((self.config.horizon, 2)), reference, solution.objective, SolutionStatus.FAILED, solution.slacks, solution.iterations, solution.kkt_residual, True)
        self.previous = solution
        return StepReport(solution.inputs[0].copy(), solution, constraints, initial_violation)


def mpc_step(controller: MpcController, state: LinearState, polytopes=(), current=()):
    report = controller.mpc_step(state, polytopes, current)
    return report.applied, report.solution
