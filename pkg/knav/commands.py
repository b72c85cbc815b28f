from abc import ABC, ABCMeta, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from knav.config import Config
from knav.config.error import ConfigError
from knav.forecast import GridWorldMap, EXACT_FIT, forecast, threshold_set, normalized_errors, forecast_error_map
from knav.formats import (
    FormatError, write_snapshots, read_snapshots, write_matrix, read_matrix, write_trace, write_eigenvalues,
    write_points, write_polytopes, write_step_polytopes, write_error_map, write_step_errors, write_log,
    write_distances, write_json, read_json, file_digest,
)
from knav.geometry import PerceptionSettings, obstacle_polytopes
from knav.graph import GraphError, build_graph, is_connected, laplacian, parse_edges, format_edges
from knav.learning import fit_distributed, spectral_report, operator_diff_map
from knav.lifting import KoopmanOperator, Provenance, assemble_pairs, balanced_sizes
from knav.mpc import MpcConfig
from knav.scenario import ScenarioConfig, ObstacleBlob, generate_scenario
from knav.seeding import stage_seed
from knav.simulation import LearningSettings, SimulationSettings, run_closed_loop, metrics
from knav.verify import VerificationSuite
from knav.version import knav_version
from pathlib import Path
import numpy as np
import logging

logger = logging.getLogger(__name__)


class RunManifest(object):
    filename = "manifest.json"

    def __init__(self, command: str, arguments, config_files, seed: int, output_directory: str, files: dict, version: str = knav_version, diagnostics: dict = None):
        self.command = command
        self.arguments = list(arguments)
        self.config_files = [str(f) for f in config_files]
        self.seed = seed
        self.output_directory = str(output_directory)
        # emitted file name -> sha256
        self.files = dict(files)
        self.version = version
        # run outcomes worth a look without opening the outputs, e.g. unconverged learning
        self.diagnostics = {} if diagnostics is None else dict(diagnostics)

    def __dict__(self):
        return {
            "command": self.command,
            "arguments": self.arguments,
            "config_files": self.config_files,
            "seed": self.seed,
            "output_directory": self.output_directory,
            "files": self.files,
            "version": self.version,
            "diagnostics": self.diagnostics,
        }

    def write(self, directory: Path):
        write_json(Path(directory) / RunManifest.filename, self)

    @staticmethod
    def load(path: Path) -> "RunManifest":
        content = read_json(path)
        try:
            return RunManifest(
                content["command"],
                content["arguments"],
                content["config_files"],
                content["seed"],
                content["output_directory"],
                content["files"],
                content["version"],
                content.get("diagnostics"),
            )
        except (KeyError, TypeError) as e:
            raise FormatError("{0}: not a run manifest ({1})".format(path, e))


def scenario_config(config: Config) -> ScenarioConfig:
    s = config.section("scenario")
    world = GridWorldMap(s["rows"], s["cols"], s["cell_size"], (s["origin_x"], s["origin_y"]))
    blobs = None
    if s["obstacles"]:
        blobs = [
            ObstacleBlob((o["x"], o["y"]), (o["vx"], o["vy"]), o["sigma"], o["peak"]) for o in s["obstacles"]
        ]
    return ScenarioConfig(
        world=world,
        blobs=blobs,
        count=s["obstacle_count"],
        frames=s["frames"],
        seed=config.section("core")["seed"],
        boundary=s["boundary"],
        dt=s["dt"],
        speed=(s["speed_min"], s["speed_max"]),
        sigma=(s["sigma_min"], s["sigma_max"]),
        peak=(s["peak_min"], s["peak_max"]),
        start=(s["start_x"], s["start_y"]),
        goal=(s["goal_x"], s["goal_y"]),
        clearance=s["clearance"],
    )


def comm_graph(config: Config):
    g = config.section("graph")
    try:
        edges = parse_edges(g["edges"]) if g["topology"] == "custom" else None
        graph = build_graph(g["topology"], g["nodes"], edges)
    except GraphError as e:
        raise ConfigError("graph.edges", str(e))
    if not is_connected(graph):
        raise ConfigError("graph.edges", "communication graph is not connected: {0}".format(format_edges(graph)))
    return graph


def partition_sizes(config: Config, n: int):
    g = config.section("graph")
    if g["partition"] == "even":
        if n % g["nodes"] != 0:
            raise ConfigError("graph.partition", "{0} rows cannot be split evenly among {1} agents".format(n, g["nodes"]))
        return None
    try:
        return balanced_sizes(n, g["nodes"])
    except ValueError as e:
        raise ConfigError("graph.nodes", str(e))


def learning_settings(config: Config, n: int) -> LearningSettings:
    l = config.section("learning")
    return LearningSettings(
        comm_graph(config),
        partition_sizes(config, n),
        alpha_fraction=l["alpha_fraction"],
        t_max=l["t_max"] or None,
        tolerance=l["tolerance"],
        cap=l["max_iterations"],
        ridge=l["ridge"],
        refresh_interval=l["refresh_interval"],
        refresh_iterations=l["refresh_iterations"],
    )


def perception_settings(config: Config) -> PerceptionSettings:
    f = config.section("forecast")
    return PerceptionSettings(
        threshold=f["threshold"],
        components=f["components"],
        quantile=f["quantile"],
        facets=f["facets"],
        epsilon=config.section("mpc")["safety_margin"],
        normal_mode=f["normal_mode"],
        weighted=f["weighted"],
        max_iter=f["gmm_max_iter"],
        tol=f["gmm_tol"],
    )


def mpc_config(config: Config) -> MpcConfig:
    m = config.section("mpc")
    s = config.section("scenario")
    return MpcConfig(
        horizon=config.section("forecast")["horizon"],
        Q=m["q_weight"] * np.eye(2),
        R=m["r_weight"] * np.eye(2),
        goal=(s["goal_x"], s["goal_y"]),
        safety_margin=m["safety_margin"],
        robot_radius=m["robot_radius"],
        input_bound=m["input_bound"] or None,
        tau=s["dt"],
        tol=m["tolerance"],
        max_iter=m["max_iterations"],
        slack_weight=m["slack_weight"] or None,
    )


def simulation_settings(config: Config) -> SimulationSettings:
    s = config.section("scenario")
    m = config.section("mpc")
    return SimulationSettings(
        max_steps=s["max_steps"],
        goal_tolerance=s["goal_tolerance"],
        forecast_mode=m["forecast_mode"],
        v_min=m["v_min"],
        dump_interval=s["dump_interval"],
    )


class Command(ABC):
    def __init__(self, config: Config):
        self.config = config

    @abstractmethod
    def run(self, args):
        pass


class PipelineCommand(Command, metaclass=ABCMeta):
    """
    A command that writes artifacts into the output directory and records them in a run manifest.
    """

    name = None

    def __init__(self, config: Config):
        super().__init__(config)
        self.outputs = []
        self.diagnostics = {}

    def outputDirectory(self) -> Path:
        directory = Path(self.config.section("core")["output_directory"])
        directory.mkdir(parents=True, exist_ok=True)
        return directory

    def output(self, name: str) -> Path:
        self.outputs.append(name)
        return self.outputDirectory() / name

    def executor(self):
        threads = self.config.section("core")["threads"]
        if threads > 1:
            return ThreadPoolExecutor(max_workers=threads)
        return nullcontext()

    def snapshots(self, args):
        if getattr(args, "data", None) is not None:
            return read_snapshots(args.data)
        return generate_scenario(scenario_config(self.config))

    def run(self, args):
        result = self.produce(args)
        directory = self.outputDirectory()
        manifest = RunManifest(
            self.name,
            getattr(args, "arguments", []),
            self.config.files,
            self.config.section("core")["seed"],
            directory,
            {name: file_digest(directory / name) for name in self.outputs},
            diagnostics=self.diagnostics,
        )
        manifest.write(directory)
        logger.info("%d files written to %s", len(self.outputs), directory)
        return result

    @abstractmethod
    def produce(self, args) -> int:
        pass


class SimGenCommand(PipelineCommand):
    name = "simgen"

    def produce(self, args):
        scenario = scenario_config(self.config)
        snapshots = generate_scenario(scenario)
        world = scenario.world
        comments = [
            "seed {0}".format(scenario.seed),
            "dt {0!r}".format(scenario.dt),
            "cell_size {0!r}".format(world.cell_size),
            "origin {0!r} {1!r}".format(*world.origin),
        ]
        write_snapshots(self.output("snapshots.txt"), snapshots, comments)
        return 0


class LearnCommand(PipelineCommand):
    name = "learn"

    def produce(self, args):
        d = assemble_pairs(self.snapshots(args))
        settings = learning_settings(self.config, d.n)
        with self.executor() as executor:
            result = fit_distributed(
                d, settings.graph, laplacian(settings.graph), settings.sizes, settings.alpha_fraction,
                t_max=settings.t_max, tolerance=settings.tolerance, cap=settings.cap, ridge=settings.ridge,
                executor=executor,
            )
        self.diagnostics["learning"] = result.diagnostics()
        if not result.converged:
            logger.warning(
                "operator did not converge: objective ratio %.3g after %d rounds, the rate bound asks for %s",
                result.trace.objectiveRatio(), result.trace.t_max, self.diagnostics["learning"]["rounds_required"],
            )

        write_matrix(self.output("operator.txt"), result.operator.matrix, ["distributed", "agents {0}".format(settings.graph.node_count)])
        write_matrix(self.output("oracle.txt"), result.oracle.matrix, ["centralized"])
        write_trace(self.output("trace.csv"), result.trace)
        report = spectral_report(result)
        write_eigenvalues(self.output("eigenvalues.csv"), report.pop("eigenvalues"))
        write_matrix(self.output("operator_diff.txt"), operator_diff_map(result.operator, result.oracle), ["K_d - K*"])

        h = min(self.config.section("forecast")["horizon"], d.N)
        e_1, e_h = normalized_errors(result.operator, result.oracle, d, h)
        report["e_1"] = float(e_1) if e_1 is not EXACT_FIT else str(e_1)
        report["e_h"] = float(e_h) if e_h is not EXACT_FIT else str(e_h)
        report["h"] = h
        write_json(self.output("spectral.json"), report)
        return 0


class ForecastCommand(PipelineCommand):
    name = "forecast"

    def produce(self, args):
        snapshots = read_snapshots(args.data)
        operator = KoopmanOperator(read_matrix(args.operator), Provenance.DISTRIBUTED)
        H = args.horizon if args.horizon is not None else self.config.section("forecast")["horizon"]
        origin = len(snapshots) - 1 if args.origin is None else args.origin
        if not 0 <= origin < len(snapshots):
            raise ConfigError("origin", "frame {0} is outside 0..{1}".format(origin, len(snapshots) - 1))
        world = scenario_config(self.config).world
        if not world.matches(snapshots[origin]):
            raise FormatError("{0}: frames are {1}x{2} but the configured map is {3}x{4}".format(
                args.data, snapshots[origin].rows, snapshots[origin].cols, world.rows, world.cols
            ))

        predicted = forecast(operator, snapshots[origin], H)
        write_snapshots(self.output("forecast.txt"), list(predicted), ["origin {0}".format(origin), "horizon {0}".format(H)])

        perception = perception_settings(self.config)
        seed = self.config.section("core")["seed"]
        write_points(self.output("points.csv"), [
            threshold_set(predicted[h], perception.threshold, world, h - 1) for h in range(1, H + 1)
        ])

        def fit(h):
            return obstacle_polytopes(predicted[h], world, perception, stage_seed(seed, "gmm", origin, h), h - 1)

        with self.executor() as executor:
            horizons = range(1, H + 1)
            slots = [fit(h) for h in horizons] if executor is None else list(executor.map(fit, horizons))
        write_polytopes(self.output("polytopes.csv"), [p for slot in slots for p in slot])

        truth = snapshots[origin + 1:origin + 1 + H]
        if len(truth) == H:
            error_map = forecast_error_map(predicted, truth)
            write_error_map(self.output("error_map.csv"), error_map)
            write_step_errors(self.output("step_errors.csv"), error_map)
            logger.info("forecast error trend over the horizon: %.3f", error_map.trend())
        else:
            logger.info("only %d true frames follow the origin, no error map for horizon %d", len(truth), H)
        return 0


class NavigateCommand(PipelineCommand):
    name = "navigate"

    def produce(self, args):
        scenario = scenario_config(self.config)
        n = scenario.world.rows * scenario.world.cols
        learning = learning_settings(self.config, n)
        with self.executor() as executor:
            log = run_closed_loop(
                scenario, learning, perception_settings(self.config), mpc_config(self.config),
                simulation_settings(self.config), executor,
            )

        write_log(self.output("log.csv"), log)
        write_distances(self.output("distances.csv"), log)
        summary = metrics(log)
        write_json(self.output("summary.json"), summary)
        if log.learning:
            # the cold-start pass; warm refreshes run a fixed number of rounds
            self.diagnostics["learning"] = log.learning[0]
            self.diagnostics["learning_passes"] = len(log.learning)
        for step in sorted(log.forecasts):
            write_snapshots(self.output("forecast_{0:05d}.txt".format(step)), list(log.forecasts[step]), ["step {0}".format(step)])
        if log.polytopes:
            write_step_polytopes(self.output("polytopes.csv"), log.polytopes)

        if not log.isFinite():
            logger.error("closed loop produced non-finite values")
            return 1
        return 0


class VerifyCommand(PipelineCommand):
    name = "verify"

    def produce(self, args):
        d = assemble_pairs(self.snapshots(args))
        settings = learning_settings(self.config, d.n)
        with self.executor() as executor:
            suite = VerificationSuite(d, settings.graph, settings.sizes, settings.tolerance, settings.cap, executor=executor)
            results = suite.run()
        write_json(self.output("verify.json"), {"checks": results, "passed": all(r.passed for r in results)})
        for r in results:
            print(r)
        return 0 if all(r.passed for r in results) else 1


class ReplayCommand(Command):
    def run(self, args):
        # the entry point imports this module
        from knav.__main__ import main

        manifest = RunManifest.load(args.manifest)
        target = Path(args.into) if args.into is not None else Path(manifest.output_directory)
        if manifest.version != knav_version:
            logger.warning("manifest was written by %s, replaying with %s", manifest.version, knav_version)
        logger.info('replaying "%s" into %s', manifest.command, target)
        result = main(["--out", str(target)] + manifest.arguments)
        if result != 0:
            return result
        mismatches = []
        for name in sorted(manifest.files):
            path = target / name
            if not path.is_file():
                mismatches.append(name)
                logger.error("%s was not reproduced", name)
            elif file_digest(path) != manifest.files[name]:
                mismatches.append(name)
                logger.error("%s differs from the recorded run", name)
        if mismatches:
            return 1
        print("{0} files reproduced bit-identically".format(len(manifest.files)))
        return 0
