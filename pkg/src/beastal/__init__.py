"""Train resistor networks by imposing boundary pressures only."""

from .graph import Topology, build_topology
from .rules import Rule
from .tasks import RegressionTask, gen_regression_task, load_iris
from .trainer import TrainerConfig, make_config, train

__version__ = "0.1.0"

__all__ = [
    "RegressionTask",
    "Rule",
    "Topology",
    "TrainerConfig",
    "build_topology",
    "gen_regression_task",
    "load_iris",
    "make_config",
    "train",
    "__version__",
]
