from knav.property.validators import RangeValidator, ChoiceValidator, BoolValidator, StringValidator, LambdaValidator


configValidators = {
    "core": {
        "log_level": ChoiceValidator("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"),
        "seed": RangeValidator(0, integer=True),
        "threads": RangeValidator(1, integer=True),
        "output_directory": StringValidator(),
    },
    "scenario": {
        "rows": RangeValidator(1, integer=True),
        "cols": RangeValidator(1, integer=True),
        "cell_size": RangeValidator(0, min_inclusive=False),
        "origin_x": RangeValidator(),
        "origin_y": RangeValidator(),
        "frames": RangeValidator(2, integer=True),
        "dt": RangeValidator(0, min_inclusive=False),
        "boundary": ChoiceValidator("bounce", "wrap"),
        "obstacle_count": RangeValidator(0, integer=True),
        "speed_min": RangeValidator(0),
        "speed_max": RangeValidator(0),
        "sigma_min": RangeValidator(0, min_inclusive=False),
        "sigma_max": RangeValidator(0, min_inclusive=False),
        "peak_min": RangeValidator(0, 1, min_inclusive=False),
        "peak_max": RangeValidator(0, 1, min_inclusive=False),
        "clearance": RangeValidator(0),
        "start_x": RangeValidator(),
        "start_y": RangeValidator(),
        "goal_x": RangeValidator(),
        "goal_y": RangeValidator(),
        "max_steps": RangeValidator(1, integer=True),
        "goal_tolerance": RangeValidator(0, min_inclusive=False),
        "dump_interval": RangeValidator(0, integer=True),
        "obstacles": LambdaValidator(
            lambda v: all(o["sigma"] > 0 and 0 < o["peak"] <= 1 for o in v)
        ),
    },
    "graph": {
        "topology": ChoiceValidator("ring", "path", "complete", "custom"),
        "nodes": RangeValidator(1, integer=True),
        "edges": StringValidator(),
        "partition": ChoiceValidator("balanced", "even"),
    },
    "learning": {
        "alpha_fraction": RangeValidator(0, min_inclusive=False),
        "t_max": RangeValidator(0, integer=True),
        "tolerance": RangeValidator(0, 1, min_inclusive=False, max_inclusive=False),
        "max_iterations": RangeValidator(1, integer=True),
        "ridge": RangeValidator(0),
        "refresh_interval": RangeValidator(0, integer=True),
        "refresh_iterations": RangeValidator(1, integer=True),
    },
    "forecast": {
        "horizon": RangeValidator(1, integer=True),
        "threshold": RangeValidator(0, 1),
        "components": RangeValidator(1, integer=True),
        "quantile": RangeValidator(0, 1, min_inclusive=False, max_inclusive=False),
        "facets": RangeValidator(3, integer=True),
        "normal_mode": ChoiceValidator("radial", "rotated", "tangent"),
        "weighted": BoolValidator(),
        "gmm_max_iter": RangeValidator(1, integer=True),
        "gmm_tol": RangeValidator(0, min_inclusive=False),
    },
    "mpc": {
        "q_weight": RangeValidator(0, min_inclusive=False),
        "r_weight": RangeValidator(0, min_inclusive=False),
        "robot_radius": RangeValidator(0),
        "safety_margin": RangeValidator(0),
        "input_bound": RangeValidator(0),
        "slack_weight": RangeValidator(0),
        "tolerance": RangeValidator(0, min_inclusive=False),
        "max_iterations": RangeValidator(1, integer=True),
        "forecast_mode": ChoiceValidator("forecast", "static"),
        "v_min": RangeValidator(0, min_inclusive=False),
    },
}


# (section, description, check) for rules spanning several keys
crossValidators = [
    ("scenario", "speed_min must not exceed speed_max", lambda s: s["speed_min"] <= s["speed_max"]),
    ("scenario", "sigma_min must not exceed sigma_max", lambda s: s["sigma_min"] <= s["sigma_max"]),
    ("scenario", "peak_min must not exceed peak_max", lambda s: s["peak_min"] <= s["peak_max"]),
    ("mpc", "safety_margin must be at least robot_radius", lambda s: s["safety_margin"] >= s["robot_radius"]),
    ("graph", "custom topology needs edges", lambda s: s["topology"] != "custom" or s["edges"].strip() != ""),
]
