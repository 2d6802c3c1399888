"""Event-triggered axial shared-control simulator and co-adaptation trainer."""

__version__ = "0.1.0"

from .config import default_config, load_config
from .env import Environment, EpisodeConfig
from .kinematics import RobotModel

__all__ = ["default_config", "load_config", "Environment", "EpisodeConfig",
           "RobotModel", "__version__"]
