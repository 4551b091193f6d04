from .sim_engine import (
    RobotScenario as RobotScenario,
    compare_runs as compare_runs,
    compute_metrics as compute_metrics,
    run_scenario as run_scenario,
)

__version__ = "0.4.0"
__author__ = "lsmrac developers"
__url__ = "https://github.com/lsmrac/lsmrac"
