"""
Closed loop: observe the obstacle field, learn and forecast its density, turn each predicted frame
into obstacle polytopes, solve the MPC problem and drive the unicycle with the first input.
"""

from knav.forecast import forecast, persistence
from knav.geometry import PerceptionSettings, obstacle_polytopes
from knav.graph import CommGraph, laplacian
from knav.learning import fit_distributed
from knav.lifting import assemble_pairs
from knav.mpc import MpcConfig, MpcController, SolutionStatus
from knav.scenario import ScenarioConfig, ObstacleField
from knav.seeding import stage_seed
from knav.vehicle import UnicycleState, LinearState, V_MIN, guard_speed, recover_inputs, forward_inputs, unicycle_step
import numpy as np
import math
import logging

logger = logging.getLogger(__name__)


FORECAST_MODES = ("forecast", "static")


class LearningSettings(object):
    def __init__(self, graph: CommGraph, sizes=None, alpha_fraction: float = 0.5, t_max: int = None, tolerance: float = 1e-8, cap: int = 20000, ridge: float = 0.0, refresh_interval: int = 0, refresh_iterations: int = 500):
        self.graph = graph
        self.sizes = sizes
        self.alpha_fraction = alpha_fraction
        self.t_max = t_max
        self.tolerance = tolerance
        self.cap = cap
        self.ridge = ridge
        # 0 disables re-learning during the run
        self.refresh_interval = refresh_interval
        self.refresh_iterations = refresh_iterations


class SimulationSettings(object):
    def __init__(self, max_steps: int = 600, goal_tolerance: float = 0.1, forecast_mode: str = "forecast", v_min: float = V_MIN, dump_interval: int = 0):
        if forecast_mode not in FORECAST_MODES:
            raise ValueError('unknown forecast mode "{0}"'.format(forecast_mode))
        self.max_steps = max_steps
        self.goal_tolerance = goal_tolerance
        self.forecast_mode = forecast_mode
        self.v_min = v_min
        # write forecast and polytope dumps every n steps, 0 = never
        self.dump_interval = dump_interval


class NotReached(object):
    def __bool__(self):
        return False

    def __repr__(self):
        return "NotReached"

    def __str__(self):
        return "not reached"


NOT_REACHED = NotReached()


LOG_COLUMNS = [
    "t", "x", "y", "theta", "v", "a_x", "a_y", "omega", "a",
    "objective", "max_slack", "iterations", "status",
    "h0_violation", "speed_clamped", "recovery_error", "constraints",
]


class ClosedLoopLog(object):
    def __init__(self, dt: float, goal, obstacle_count: int):
        self.dt = dt
        self.goal = np.asarray(goal, dtype=float)
        self.obstacle_count = obstacle_count
        self.rows = []
        self.distances = []
        self.soft_activations = []
        self.polytopes = []
        self.forecasts = {}
        self.final_state = None
        self.reached_at = None
        # one entry per learning pass: step, warm start flag and the pass diagnostics
        self.learning = []

    def append(self, row: dict, distances, activations: int):
        if self.rows and row["t"] <= self.rows[-1]["t"]:
            raise ValueError("log timestamps must increase")
        self.rows.append(row)
        self.distances.append(np.asarray(distances, dtype=float))
        self.soft_activations.append(activations)

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def distanceMatrix(self) -> np.ndarray:
        return np.array(self.distances).reshape(len(self.distances), self.obstacle_count)

    def isFinite(self) -> bool:
        numeric = [c for c in LOG_COLUMNS if c != "status"]
        values = np.array([[float(r[c]) for c in numeric] for r in self.rows])
        return bool(np.all(np.isfinite(values)) and np.all(np.isfinite(self.distanceMatrix())))


class Summary(object):
    def __init__(self, min_distance, mean_distance, time_to_goal, input_energy, soft_activations, steps, h0_violations, speed_clamps, fallbacks, max_recovery_error, final_distance, learning_converged=None, learning_passes=0):
        self.min_distance = min_distance
        self.mean_distance = mean_distance
        self.time_to_goal = time_to_goal
        self.input_energy = input_energy
        self.soft_activations = soft_activations
        self.steps = steps
        self.h0_violations = h0_violations
        self.speed_clamps = speed_clamps
        self.fallbacks = fallbacks
        self.max_recovery_error = max_recovery_error
        self.final_distance = final_distance
        # None without learning, otherwise whether the initial cold-start pass converged
        self.learning_converged = learning_converged
        self.learning_passes = learning_passes

    def __dict__(self):
        return {
            "min_distance": self.min_distance,
            "mean_distance": self.mean_distance,
            "time_to_goal": self.time_to_goal if self.time_to_goal else str(NOT_REACHED),
            "input_energy": self.input_energy,
            "soft_activations": self.soft_activations,
            "steps": self.steps,
            "h0_violations": self.h0_violations,
            "speed_clamps": self.speed_clamps,
            "fallbacks": self.fallbacks,
            "max_recovery_error": self.max_recovery_error,
            "final_goal_distance": self.final_distance,
            "learning_converged": self.learning_converged,
            "learning_passes": self.learning_passes,
        }


def metrics(log: ClosedLoopLog) -> Summary:
    if not len(log):
        raise ValueError("cannot summarize an empty log")
    distances = log.distanceMatrix()
    if distances.size:
        min_distance = float(distances.min())
        # mean over steps of the closest obstacle
        mean_distance = float(distances.min(axis=1).mean())
    else:
        min_distance = math.inf
        mean_distance = math.inf
    inputs = np.column_stack([log.column("a_x"), log.column("a_y")])
    final = log.final_state if log.final_state is not None else np.array([log.rows[-1]["x"], log.rows[-1]["y"]])
    return Summary(
        min_distance,
        mean_distance,
        NOT_REACHED if log.reached_at is None else log.reached_at,
        float(np.sum(inputs ** 2)),
        int(sum(log.soft_activations)),
        len(log),
        int(log.column("h0_violation").sum()),
        int(log.column("speed_clamped").sum()),
        int(sum(1 for r in log.rows if r["status"] == SolutionStatus.FAILED)),
        float(log.column("recovery_error").max()),
        float(np.linalg.norm(final[:2] - log.goal)),
        log.learning[0]["converged"] if log.learning else None,
        len(log.learning),
    )


class ClosedLoop(object):
    def __init__(self, scenario: ScenarioConfig, learning: LearningSettings, perception: PerceptionSettings, mpc: MpcConfig, settings: SimulationSettings, executor=None):
        self.scenario = scenario
        self.learning = learning
        self.perception = perception
        self.mpc = mpc
        self.settings = settings
        self.executor = executor
        self.operator = None
        self.blocks = None

    def learn(self, history, log: ClosedLoopLog = None, step: int = 0, warm: bool = False):
        d = assemble_pairs(history)
        L = laplacian(self.learning.graph)
        if warm and self.blocks is not None:
            result = fit_distributed(
                d, self.learning.graph, L, self.learning.sizes, self.learning.alpha_fraction,
                t_max=self.learning.refresh_iterations, ridge=self.learning.ridge,
                warm_blocks=self.blocks, executor=self.executor,
            )
        else:
            result = fit_distributed(
                d, self.learning.graph, L, self.learning.sizes, self.learning.alpha_fraction,
                t_max=self.learning.t_max, tolerance=self.learning.tolerance, cap=self.learning.cap,
                ridge=self.learning.ridge, executor=self.executor,
            )
        self.operator = result.operator
        self.blocks = result.blocks()
        if log is not None:
            log.learning.append(dict(step=step, warm=warm, **result.diagnostics()))
        return result

    def perceive(self, current, predicted, step: int):
        """
        returns (polytopes of the observed frame, one polytope list per predicted step)
        """
        world = self.scenario.world
        frames = [current] + [predicted[h] for h in range(1, predicted.horizon + 1)]

        def fit(h):
            seed = stage_seed(self.scenario.seed, "gmm", step, h)
            return obstacle_polytopes(frames[h], world, self.perception, seed, max(h - 1, 0))

        horizons = range(len(frames))
        if self.executor is None:
            fitted = [fit(h) for h in horizons]
        else:
            fitted = list(self.executor.map(fit, horizons))
        return fitted[0], fitted[1:]

    def run(self) -> ClosedLoopLog:
        scenario = self.scenario
        settings = self.settings
        T = scenario.frames
        H = self.mpc.horizon

        field = ObstacleField.fromConfig(scenario)
        history = [field.render()]
        for _ in range(T - 1):
            field = field.advance()
            history.append(field.render())

        goal = scenario.goal
        log = ClosedLoopLog(scenario.dt, goal, len(field.blobs))
        if settings.forecast_mode == "forecast":
            result = self.learn(history, log)
            if not result.converged:
                logger.warning(
                    "forecasts use an unconverged operator: objective ratio %.3g after %d of %s rounds",
                    result.trace.objectiveRatio(), result.trace.t_max, log.learning[-1]["rounds_required"],
                )

        heading = math.atan2(goal[1] - scenario.start[1], goal[0] - scenario.start[0])
        robot = UnicycleState(scenario.start[0], scenario.start[1], heading, settings.v_min)
        controller = MpcController(self.mpc)

        for step in range(settings.max_steps):
            current = history[-1]
            refresh = self.learning.refresh_interval
            if settings.forecast_mode == "forecast" and refresh > 0 and step > 0 and step % refresh == 0:
                self.learn(history[-T:], log, step, warm=True)

            if settings.forecast_mode == "forecast":
                predicted = forecast(self.operator, current, H)
            else:
                predicted = persistence(current, H)
            observed, polytopes = self.perceive(current, predicted, step)

            report = controller.mpc_step(LinearState.fromUnicycle(robot), polytopes, observed)
            a_x, a_y = report.applied
            _, clamped = guard_speed(robot.v, settings.v_min)
            omega, a = recover_inputs(a_x, a_y, robot.theta, robot.v, settings.v_min)
            speed, _ = guard_speed(robot.v, settings.v_min)
            check = forward_inputs(omega, a, robot.theta, speed)
            solution = report.solution

            distances = np.linalg.norm(field.centers() - robot.position[None, :], axis=1)
            activations = int(np.sum(solution.slacks > self.mpc.slack_tolerance))
            log.append({
                "t": step * scenario.dt,
                "x": robot.x,
                "y": robot.y,
                "theta": robot.theta,
                "v": robot.v,
                "a_x": float(a_x),
                "a_y": float(a_y),
                "omega": omega,
                "a": a,
                "objective": solution.objective,
                "max_slack": solution.max_slack,
                "iterations": solution.iterations,
                "status": solution.status,
                "h0_violation": int(report.initial_violation),
                "speed_clamped": int(clamped),
                "recovery_error": float(math.hypot(check[0] - a_x, check[1] - a_y)),
                "constraints": len(report.constraints),
            }, distances, activations)

            if settings.dump_interval and step % settings.dump_interval == 0:
                log.forecasts[step] = predicted
                for slot in polytopes:
                    for p in slot:
                        log.polytopes.append((step, p))

            robot = unicycle_step(robot, omega, a, scenario.dt)
            field = field.advance()
            history = history[1:] + [field.render()]

            if not robot.isFinite():
                logger.error("robot state became non-finite at step %d", step)
                break
            if np.linalg.norm(robot.position - goal) <= settings.goal_tolerance:
                log.reached_at = (step + 1) * scenario.dt
                logger.info("goal reached after %.2f s", log.reached_at)
                break
        else:
            logger.info("goal not reached within %d steps", settings.max_steps)

        log.final_state = robot.toArray()
        return log


def run_closed_loop(scenario: ScenarioConfig, learning: LearningSettings, perception: PerceptionSettings, mpc: MpcConfig, settings: SimulationSettings = None, executor=None) -> ClosedLoopLog:
    return ClosedLoop(scenario, learning, perception, mpc, settings or SimulationSettings(), executor).run()
