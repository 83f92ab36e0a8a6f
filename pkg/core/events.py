"""Centralized structured-log event names.

Using constants avoids typos when emitting events through :mod:`utils.logx`.
"""

# Simulation events
SIM_START = "sim_start"
SIM_DONE = "sim_done"
SIM_PROGRESS = "sim_progress"
NONFINITE_STATE = "nonfinite_state"
FLOW_ENTERED = "flow_entered"

# Spectral events
SPECTRAL_EXTRACTED = "spectral_extracted"
PROFILE_VERDICT = "profile_verdict"

# Experiment events
CURVE_POINT = "curve_point"
CURVE_POINT_SKIPPED = "curve_point_skipped"
INVARIANT_ESTIMATED = "invariant_estimated"

# Harness events
RUN_START = "run_start"
RUN_DONE = "run_done"
RUN_FAILED = "run_failed"
ARTIFACT_WRITTEN = "artifact_written"
CONFIG_INVALID = "config_invalid"

# All events set for easy validation
ALL_EVENTS = {
    SIM_START,
    SIM_DONE,
    SIM_PROGRESS,
    NONFINITE_STATE,
    FLOW_ENTERED,
    SPECTRAL_EXTRACTED,
    PROFILE_VERDICT,
    CURVE_POINT,
    CURVE_POINT_SKIPPED,
    INVARIANT_ESTIMATED,
    RUN_START,
    RUN_DONE,
    RUN_FAILED,
    ARTIFACT_WRITTEN,
    CONFIG_INVALID,
}
