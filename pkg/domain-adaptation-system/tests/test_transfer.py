"""
Desk-scale directional experiments on the shipped presets
"""
import pytest

from app.agents.grid_manager import SOURCE_ONLY_ROW, GridManager
from app.schemas.adapt import AdaptConfig, SelectionPolicy
from app.services.benchmark_service import generate_shift_benchmark, load_preset

pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2, 3, 4]


def _row(grid, label):
    return next(cell for cell in grid.rows if cell.row == label)


def test_soft_selection_improves_on_ambiguity_benchmark():
    bench = generate_shift_benchmark(load_preset("ambiguity-16"))
    grid = GridManager(AdaptConfig(lambda_=0.5)).run(
        bench.source, bench.target, SEEDS, policies=[SelectionPolicy.hard(3), SelectionPolicy.soft(3)], baselines=True,
    )
    source_only = _row(grid, SOURCE_ONLY_ROW).mean_top1
    soft = _row(grid, "SM k=3").mean_top1
    hard = _row(grid, "HM k=3").mean_top1
    assert soft - source_only >= 0.03
    assert soft >= hard - 0.01


def test_no_gain_without_shift():
    bench = generate_shift_benchmark(load_preset("null-16"))
    grid = GridManager(AdaptConfig(lambda_=0.5)).run(
        bench.source, bench.target, SEEDS, policies=[SelectionPolicy.soft(3)], baselines=True,
    )
    assert abs(_row(grid, "SM k=3").mean_top1 - _row(grid, SOURCE_ONLY_ROW).mean_top1) <= 0.02


def test_full_grid_is_rerun_identical():
    bench = generate_shift_benchmark(load_preset("ambiguity-16"))
    manager = GridManager(AdaptConfig())
    first = manager.run(bench.source, bench.target, [0])
    assert len(first.rows) == 9
    assert all(cell.error is None for cell in first.rows)
    assert manager.run(bench.source, bench.target, [0]) == first
