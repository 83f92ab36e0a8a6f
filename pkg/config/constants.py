"""Configuration constants for the lab."""

SCHEMA_VERSION = 1
ARTIFACT_VERSION = "0.1.0"

# Keys absent from an experiment file fall back to these values.
CONFIG_DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "field": {"name": "fput", "dim": 1, "params": {}},
    "noise": {"family": "brownian", "scale": 1.0},
    "x0": [1.0],
    "schedule": {
        "epsilons": [0.1, 0.05, 0.025],
        "r_grid": [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0],
        "w": 1.0,
        "p": 2.0,
    },
    "estimator": {"method": "auto", "cap": 2048, "reps": 8, "n_directions": 64},
    "n_traj": 2048,
    "dt": None,
    "horizon": None,
    "t_end": 5.0,
    "time_grid": [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
    "invariant_method": "ensemble",
    "properties_n": 512,
    "master_seed": 0,
    "output_dir": "runs/default",
}

SUBCOMMANDS = [
    "spectral",
    "simulate",
    "wasserstein",
    "properties",
    "ergodic",
    "cutoff",
    "moments",
    "fw-error",
]
