from knav.property import PropertyLayer


defaultConfig = PropertyLayer(
    core=PropertyLayer(
        log_level="INFO",
        seed=1,
        threads=1,
        output_directory="knav-out",
    ),
    scenario=PropertyLayer(
        rows=30,
        cols=30,
        cell_size=0.5,
        origin_x=0.0,
        origin_y=0.0,
        frames=11,
        dt=0.1,
        boundary="bounce",
        obstacle_count=12,
        speed_min=0.3,
        speed_max=0.6,
        sigma_min=0.4,
        sigma_max=0.6,
        peak_min=0.8,
        peak_max=1.0,
        clearance=2.0,
        start_x=0.0,
        start_y=0.0,
        goal_x=15.0,
        goal_y=15.0,
        max_steps=600,
        goal_tolerance=0.1,
        dump_interval=0,
        obstacles=[],
    ),
    graph=PropertyLayer(
        topology="ring",
        nodes=3,
        edges="",
        partition="balanced",
    ),
    learning=PropertyLayer(
        alpha_fraction=0.5,
        t_max=0,
        tolerance=1e-8,
        max_iterations=20000,
        ridge=0.0,
        refresh_interval=20,
        refresh_iterations=500,
    ),
    forecast=PropertyLayer(
        horizon=14,
        threshold=0.5,
        components=12,
        quantile=0.95,
        facets=8,
        normal_mode="radial",
        weighted=False,
        gmm_max_iter=100,
        gmm_tol=1e-6,
    ),
    mpc=PropertyLayer(
        q_weight=1.0,
        r_weight=0.1,
        robot_radius=0.3,
        safety_margin=0.5,
        input_bound=0.0,
        slack_weight=0.0,
        tolerance=1e-9,
        max_iterations=500,
        forecast_mode="forecast",
        v_min=0.05,
    ),
).readonly()
