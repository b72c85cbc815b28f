"""
Consensus-based distributed learning of the Koopman operator.

Each of the p agents owns a contiguous row block (X_i, Y_i) of the lifted data and a column block K_i
of the operator. Agents only exchange their auxiliary matrices S_i with graph neighbours. With the
prescribed initialization (K_i = 0, S_i = -Y_i placed in the agent's own rows) the concatenation
[K_1 ... K_p] converges to a least-squares minimizer of ||Y - K X||_F as long as the step size stays
below the bound derived from the spectrum of the convergence matrix.
"""

from knav.graph import CommGraph, lifted_laplacian
from knav.lifting import DataMatrices, KoopmanOperator, Provenance, centralized_edmd, partition_rows
from scipy import linalg
from scipy.spatial.distance import directed_hausdorff
import numpy as np
import math
import logging

logger = logging.getLogger(__name__)


class LearningError(ValueError):
    pass


class AgentState(object):
    def __init__(self, index: int, offset: int, K: np.ndarray, S: np.ndarray, X: np.ndarray, Y: np.ndarray):
        if K.shape[1] != X.shape[0]:
            raise LearningError(
                "agent {0}: K_i has {1} columns but X_i has {2} rows".format(index + 1, K.shape[1], X.shape[0])
            )
        if S.shape != (K.shape[0], X.shape[1]):
            raise LearningError("agent {0}: S_i has shape {1}, expected {2}".format(index + 1, S.shape, (K.shape[0], X.shape[1])))
        self.index = index
        # first global row owned by this agent
        self.offset = offset
        self.K = K
        self.S = S
        self.X = X
        self.Y = Y

    @property
    def rows(self) -> int:
        return self.X.shape[0]

    def evolve(self, K: np.ndarray, S: np.ndarray) -> "AgentState":
        return AgentState(self.index, self.offset, K, S, self.X, self.Y)

    def __repr__(self):
        return "AgentState(i={0}, rows={1}..{2})".format(self.index + 1, self.offset + 1, self.offset + self.rows)


def _check_partitions(partitions):
    partitions = list(partitions)
    if not partitions:
        raise LearningError("at least one partition is needed")
    N = partitions[0][0].shape[1]
    for i, (X, Y) in enumerate(partitions):
        if X.shape != Y.shape:
            raise LearningError("partition {0}: X_i {1} and Y_i {2} differ in shape".format(i + 1, X.shape, Y.shape))
        if X.shape[1] != N:
            raise LearningError("partition {0} has {1} samples, expected {2}".format(i + 1, X.shape[1], N))
    return partitions


def init_agents(partitions):
    partitions = _check_partitions(partitions)
    n = sum(X.shape[0] for X, _ in partitions)
    N = partitions[0][0].shape[1]
    agents = []
    offset = 0
    for i, (X, Y) in enumerate(partitions):
        S = np.zeros((n, N))
        S[offset:offset + X.shape[0], :] = -Y
        agents.append(AgentState(i, offset, np.zeros((n, X.shape[0])), S, X, Y))
        offset += X.shape[0]
    return agents


def warm_start_agents(partitions, blocks):
    """
    resume from previous operator blocks K_i on fresh data; S_i = K_i X_i - Y_i keeps the consensus defect at zero
    """
    partitions = _check_partitions(partitions)
    blocks = list(blocks)
    if len(blocks) != len(partitions):
        raise LearningError("got {0} operator blocks for {1} partitions".format(len(blocks), len(partitions)))
    n = sum(X.shape[0] for X, _ in partitions)
    agents = []
    offset = 0
    for i, ((X, Y), K) in enumerate(zip(partitions, blocks)):
        K = np.array(K, dtype=float)
        if K.shape != (n, X.shape[0]):
            raise LearningError("agent {0}: warm block has shape {1}, expected {2}".format(i + 1, K.shape, (n, X.shape[0])))
        S = K @ X
        S[offset:offset + X.shape[0], :] -= Y
        agents.append(AgentState(i, offset, K, S, X, Y))
        offset += X.shape[0]
    return agents


def assemble_operator(agents) -> KoopmanOperator:
    return KoopmanOperator(np.hstack([a.K for a in agents]), Provenance.DISTRIBUTED)


class ConvergenceMatrix(object):
    def __init__(self, M: np.ndarray, X_block: np.ndarray, Y_block: np.ndarray, L_block: np.ndarray):
        self.M = M
        self.X_block = X_block
        self.Y_block = Y_block
        self.L_block = L_block
        self._eigenvalues = None

    @property
    def dimension(self) -> int:
        return self.M.shape[0]

    def eigenvalues(self) -> np.ndarray:
        if self._eigenvalues is None:
            self._eigenvalues = linalg.eigvals(self.M)
        return self._eigenvalues

    def zeroThreshold(self) -> float:
        return 1e-9 * np.linalg.norm(self.M, "fro")

    def nonzeroEigenvalues(self) -> np.ndarray:
        eig = self.eigenvalues()
        nonzero = eig[np.abs(eig) > self.zeroThreshold()]
        if nonzero.size == 0:
            raise LearningError("convergence matrix has no nonzero eigenvalue")
        return nonzero


def build_convergence_matrix(partitions, L: np.ndarray, N: int) -> ConvergenceMatrix:
    partitions = _check_partitions(partitions)
    if L.shape != (len(partitions), len(partitions)):
        raise LearningError("Laplacian of shape {0} does not match {1} partitions".format(L.shape, len(partitions)))
    X_block = linalg.block_diag(*[X for X, _ in partitions])
    Y_block = linalg.block_diag(*[Y for _, Y in partitions])
    L_block = lifted_laplacian(L, N)
    M = -np.block([[X_block @ X_block.T, X_block @ L_block], [X_block.T, L_block]])
    return ConvergenceMatrix(M, X_block, Y_block, L_block)


def alpha_max(m: ConvergenceMatrix) -> float:
    eig = m.nonzeroEigenvalues()
    if np.any(eig.real > m.zeroThreshold()):
        raise LearningError("convergence matrix has eigenvalues with positive real part")
    value = float(np.min(-2.0 * eig.real / np.abs(eig) ** 2))
    if value <= 0:
        raise LearningError("convergence matrix is not semi-Hurwitz (alpha_max = {0})".format(value))
    return value


def rho_max(m: ConvergenceMatrix, alpha: float) -> float:
    if alpha <= 0:
        raise LearningError("step size must be positive, got {0}".format(alpha))
    eig = m.nonzeroEigenvalues()
    radicand = 1.0 + 2.0 * alpha * eig.real + alpha ** 2 * np.abs(eig) ** 2
    return float(np.sqrt(np.clip(radicand, 0.0, None)).max())


def required_rounds(rho: float, tolerance: float = 1e-8):
    """
    rounds the rate bound needs to shrink the error by ``tolerance``; infinite when rho does not contract
    """
    if rho <= 0.0:
        return 1
    if rho >= 1.0:
        return math.inf
    return max(math.ceil(math.log(tolerance) / math.log(rho)), 1)


def iteration_budget(rho: float, tolerance: float = 1e-8, cap: int = 20000) -> int:
    budget = required_rounds(rho, tolerance)
    if math.isinf(budget):
        logger.warning("rate bound %.6f is not contracting, using the iteration cap %d", rho, cap)
        return cap
    if budget > cap:
        logger.warning("rate bound %.6f needs %d iterations, capped at %d", rho, budget, cap)
        return cap
    return max(budget, 1)


def step(agents, alpha: float, g: CommGraph, executor=None):
    if g.node_count != len(agents):
        raise LearningError("graph has {0} nodes but there are {1} agents".format(g.node_count, len(agents)))
    # every agent reads the S_j broadcast before the round
    broadcast = [a.S for a in agents]

    def update(i):
        agent = agents[i]
        K_next = agent.K - alpha * agent.S @ agent.X.T
        disagreement = np.zeros_like(agent.S)
        for j in g.neighbors(i):
            disagreement += agent.S - broadcast[j]
        S_next = agent.S + (K_next - agent.K) @ agent.X - alpha * disagreement
        return agent.evolve(K_next, S_next)

    if executor is None:
        return [update(i) for i in range(len(agents))]
    return list(executor.map(update, range(len(agents))))


def consensus_defect(agents, w_star_free: bool = True) -> float:
    """
    ||W(t)(1_p x I_N)||_F with W(t) = S(t) + Y_block - K(t) X_block.

    The limit term W*(1_p x I_N) vanishes identically, so ``w_star_free=False`` (measuring the deviation
    from the limit instead of W itself) yields the same number; W* is never materialized.
    """
    total = np.zeros_like(agents[0].S)
    for a in agents:
        total += a.S - a.K @ a.X
        total[a.offset:a.offset + a.rows, :] += a.Y
    return float(np.linalg.norm(total, "fro"))


class LearningTrace(object):
    def __init__(self, objective, operator_error, defect, operator: KoopmanOperator, agents):
        self.objective = np.asarray(objective)
        self.operator_error = np.asarray(operator_error)
        self.defect = np.asarray(defect)
        self.operator = operator
        self.agents = agents

    def __len__(self):
        return len(self.defect)

    @property
    def t_max(self) -> int:
        return len(self) - 1

    def rows(self):
        for t in range(len(self)):
            yield t, self.objective[t], self.operator_error[t], self.defect[t]

    def objectiveRatio(self) -> float:
        """
        O(t_max) / O(0); nan without an oracle, 0 when the start already fits
        """
        if self.objective[0] == 0:
            return 0.0 if self.objective[-1] == 0 else math.inf
        return float(self.objective[-1] / self.objective[0])

    def converged(self, ratio: float = 1e-6) -> bool:
        value = self.objectiveRatio()
        return bool(np.isfinite(value) and value <= ratio)


def run(agents, alpha: float, t_max: int, g: CommGraph, d: DataMatrices, oracle: KoopmanOperator = None, limit: float = None, executor=None) -> LearningTrace:
    if t_max < 0:
        raise LearningError("t_max must be nonnegative")
    if limit is not None and alpha >= limit:
        logger.warning("step size %.6g is not below alpha_max %.6g, the iteration may diverge", alpha, limit)

    objective = []
    operator_error = []
    defect = []

    def record(current):
        K_d = np.hstack([a.K for a in current])
        if oracle is not None:
            objective.append(float(np.linalg.norm((oracle.matrix - K_d) @ d.X, "fro")))
            operator_error.append(float(np.linalg.norm(K_d - oracle.matrix, "fro")))
        else:
            objective.append(math.nan)
            operator_error.append(math.nan)
        defect.append(consensus_defect(current))

    # divergence runs are legitimate, let them overflow quietly
    with np.errstate(over="ignore", invalid="ignore"):
        record(agents)
        for t in range(t_max):
            agents = step(agents, alpha, g, executor)
            record(agents)

    logger.debug("distributed learning finished after %d rounds, final defect %.3e", t_max, defect[-1])
    return LearningTrace(objective, operator_error, defect, assemble_operator(agents), agents)


def geometric_rate(values, fraction: float = 1.0 / 3.0, floor: float = 1e-13) -> float:
    """
    least-squares fit of log(values) over the final ``fraction`` of the sequence; entries below
    ``floor`` times the first value are excluded as roundoff
    """
    values = np.asarray(values, dtype=float)
    start = int(len(values) * (1.0 - fraction))
    t = np.arange(start, len(values))
    tail = values[start:]
    usable = np.isfinite(tail) & (tail > floor * values[0])
    if usable.sum() < 2:
        raise LearningError("not enough usable samples to fit a rate")
    slope, _ = np.polyfit(t[usable], np.log(tail[usable]), 1)
    return float(math.exp(slope))


def operator_diff_map(K_d, K_star) -> np.ndarray:
    a = K_d.matrix if isinstance(K_d, KoopmanOperator) else np.asarray(K_d)
    b = K_star.matrix if isinstance(K_star, KoopmanOperator) else np.asarray(K_star)
    if a.shape != b.shape:
        raise LearningError("cannot compare operators of shape {0} and {1}".format(a.shape, b.shape))
    return np.abs(a - b)


def sorted_eigenvalues(K) -> np.ndarray:
    matrix = K.matrix if isinstance(K, KoopmanOperator) else np.asarray(K)
    eig = linalg.eigvals(matrix)
    # by magnitude, then angle
    order = np.lexsort((np.angle(eig), np.abs(eig)))
    return eig[order]


def spectrum_compare(K_d, K_star):
    return sorted_eigenvalues(K_d), sorted_eigenvalues(K_star)


def spectrum_distance(first: np.ndarray, second: np.ndarray) -> float:
    a = np.column_stack([first.real, first.imag])
    b = np.column_stack([second.real, second.imag])
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


def spectral_radius(K) -> float:
    matrix = K.matrix if isinstance(K, KoopmanOperator) else np.asarray(K)
    return float(np.max(np.abs(linalg.eigvals(matrix))))


class LearningResult(object):
    def __init__(self, trace: LearningTrace, convergence: ConvergenceMatrix, alpha: float, alpha_limit: float, rho: float, oracle: KoopmanOperator, required=None):
        self.trace = trace
        self.convergence = convergence
        self.alpha = alpha
        self.alpha_limit = alpha_limit
        self.rho = rho
        self.oracle = oracle
        # rounds the rate bound asks for, before any cap
        self.required = required

    @property
    def converged(self) -> bool:
        return self.trace.converged()

    @property
    def capped(self) -> bool:
        return self.required is not None and self.required > self.trace.t_max

    def diagnostics(self) -> dict:
        return {
            "converged": self.converged,
            "rounds": self.trace.t_max,
            "rounds_required": self.required if self.required is None or math.isfinite(self.required) else "unbounded",
            "objective_ratio": self.trace.objectiveRatio(),
        }

    @property
    def operator(self) -> KoopmanOperator:
        return self.trace.operator

    def blocks(self):
        return [a.K for a in self.trace.agents]


def fit_distributed(d: DataMatrices, g: CommGraph, L: np.ndarray, sizes=None, alpha_fraction: float = 0.5, t_max: int = None, tolerance: float = 1e-8, cap: int = 20000, ridge: float = 0.0, warm_blocks=None, executor=None) -> LearningResult:
    """
    Full distributed learning pass: partition, spectral step size, rate-derived budget, rounds.

    ``t_max=None`` derives the iteration count from the rate bound. With ``warm_blocks`` the agents resume
    from previous operator blocks instead of the zero initialization.
    """
    partitions = partition_rows(d, g.node_count, sizes)
    convergence = build_convergence_matrix(partitions, L, d.N)
    limit = alpha_max(convergence)
    alpha = alpha_fraction * limit
    rho = rho_max(convergence, alpha)
    required = required_rounds(rho, tolerance)
    if t_max is None:
        t_max = iteration_budget(rho, tolerance, cap)
    logger.info("alpha_max %.6g, alpha %.6g, rho_max %.6g, %d rounds", limit, alpha, rho, t_max)
    oracle = centralized_edmd(d, ridge)
    if warm_blocks is None:
        agents = init_agents(partitions)
    else:
        agents = warm_start_agents(partitions, warm_blocks)
    trace = run(agents, alpha, t_max, g, d, oracle, limit, executor)
    return LearningResult(trace, convergence, alpha, limit, rho, oracle, required)


def spectral_report(result: LearningResult) -> dict:
    eig_d, eig_star = spectrum_compare(result.operator, result.oracle)
    return {
        **result.diagnostics(),
        "alpha_max": result.alpha_limit,
        "alpha": result.alpha,
        "rho_max": result.rho,
        "t_max": result.trace.t_max,
        "hausdorff": spectrum_distance(eig_d, eig_star),
        "radius_distributed": float(np.max(np.abs(eig_d))),
        "radius_centralized": float(np.max(np.abs(eig_star))),
        "eigenvalues": {
            "convergence": result.convergence.eigenvalues(),
            "distributed": eig_d,
            "centralized": eig_star,
        },
    }
