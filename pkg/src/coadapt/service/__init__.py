from .app import create_app
from .estimate import empirical_profile
from .pressure import PressureAdapter, pressure_commands

__all__ = ["create_app", "empirical_profile", "PressureAdapter",
           "pressure_commands"]
