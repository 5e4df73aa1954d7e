"""Desk-scale peg-transfer simulation with a learned coarse controller and
manual-override precision control."""

from . import arbiter, config, ddqn, metrics, renderer, sim_env, trials

__all__ = ["arbiter", "config", "ddqn", "metrics", "renderer", "sim_env", "trials"]
__version__ = "0.1.0"
