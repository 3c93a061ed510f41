"""
Run Orchestration Module
"""
from app.agents.base_runner import BaseRunner, RunnerStatus
from app.agents.grid_manager import DEFAULT_POLICIES, GridCellRunner, GridManager, run_ablation_grid
