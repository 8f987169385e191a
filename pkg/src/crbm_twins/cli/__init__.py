"""Command-line pipelines: prepare, synth, sweep, train, generate, evaluate."""
from .config import RunConfig, cell_seed, expand_grid, load_config
from .sweep import CellState, SweepState, run_sweep

__all__ = ["CellState", "RunConfig", "SweepState", "cell_seed", "expand_grid", "load_config", "run_sweep"]
