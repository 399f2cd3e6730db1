"""Signal temporal logic task planning with time-varying control barrier
functions, deadline re-timing and a small simulated world."""
from .barrier import BarrierParams, CompositeBarrier, composite_eval, smooth_min
from .config import ConfigError, ScenarioConfig, bundled, load_scenario
from .qp import Dynamics, Infeasible, QpProblem, QpSolution, control_step, solve_qp
from .replan import ReplanParams, Replanner, ReplanningExhausted, compute_tstar_new
from .report import Report, build_report, read_csv, write_csv
from .sim import Simulation, TrajectoryLog, run_scenario, schedule_tasks
from .stl import eval_boolean, eval_robustness, format_formula, parse_formula
from .world import Obstacle, Rhodonea, Static, World, Zone, vmax_at

__version__ = "0.1.0"
