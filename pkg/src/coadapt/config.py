"""Global configuration: one JSON document with strict key checking.

Every tunable default lives in ``data/default_config.json``. A user config
is merged over the defaults section by section; any key not present in the
defaults is rejected so typos fail loudly. The ``COADAPT_CONFIG``
environment variable overrides the config path for the CLI and service.
"""

from __future__ import annotations

import copy
import json
import os
from importlib import resources
from pathlib import Path

from .errors import ConfigInvalid

ENV_VAR = "COADAPT_CONFIG"
SECTIONS = ("robot", "trigger", "agents", "learner", "env", "experiment")


def default_config() -> dict:
    """The packaged defaults as a fresh dict."""
    text = resources.files("coadapt.data").joinpath("default_config.json").read_text()
    return json.loads(text)


def _merge(base: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigInvalid(f"unknown config key: {path}{key}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | os.PathLike | None = None) -> dict:
    """Load defaults, overlaid with the user config file if one is given.

    Resolution order for the path: explicit argument, then COADAPT_CONFIG,
    then defaults only.
    """
    cfg = default_config()
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigInvalid(f"config file not found: {p}")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigInvalid(f"config file {p} must hold a JSON object")
        cfg = _merge(cfg, user, "")
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    """Cross-field sanity checks beyond strict key matching."""
    missing = [s for s in SECTIONS if s not in cfg]
    if missing:
        raise ConfigInvalid(f"missing config sections: {missing}")
    trig = cfg["trigger"]
    if not trig["epsilon_small"] < trig["epsilon_big"]:
        raise ConfigInvalid("epsilon_small must be < epsilon_big")
    if not trig["epsilon_goal"] <= trig["epsilon_small"]:
        raise ConfigInvalid("epsilon_goal must be <= epsilon_small")
    hum = cfg["agents"]["human"]
    for k in ("err_rate_big", "err_rate_small"):
        if not 0.0 <= hum[k] < 0.5:
            raise ConfigInvalid(f"{k} must be in [0, 0.5)")
    if not hum["t_dec_big"] < hum["t_dec_small"]:
        raise ConfigInvalid("t_dec_big must be < t_dec_small")
    mags = cfg["agents"]["magnitudes"]
    for axis in "xyz":
        if not 0.0 < mags[f"{axis}_small"] < mags[f"{axis}_big"]:
            raise ConfigInvalid(f"need 0 < {axis}_small < {axis}_big")
    env = cfg["env"]
    lo, hi = env["workspace_lo"], env["workspace_hi"]
    if any(l >= h for l, h in zip(lo, hi)):
        raise ConfigInvalid("workspace_lo must be < workspace_hi per axis")
    if env["max_wall_time"] <= 0 or env["max_microsteps"] <= 0:
        raise ConfigInvalid("episode budgets must be positive")
    if env["fidelity"] not in ("fast", "dynamic"):
        raise ConfigInvalid("fidelity must be 'fast' or 'dynamic'")
    if env["controller"] not in ("fixed_frequency", "event_fixed_model", "dammrl"):
        raise ConfigInvalid("unknown controller")
    axis = cfg["agents"]["primary_axis"]
    if axis not in (0, 1, 2):
        raise ConfigInvalid("primary_axis must be 0, 1, or 2")


def dump_config(cfg: dict, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(cfg, indent=2) + "\n")
