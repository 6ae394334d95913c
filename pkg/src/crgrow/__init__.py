"""Simulator and experiments for multi-type continuum Richardson growth."""
from .coverage import EventLog, InitialConfig, Piece, raster
from .dynamics import RunResult, RunSpec, run, run_coupled, verify_result
from .geometry import Ball, Region

__all__ = ["EventLog", "InitialConfig", "Piece", "raster", "RunResult", "RunSpec", "run", "run_coupled",
           "verify_result", "Ball", "Region"]
__version__ = "0.1.0"
