"""
CLI Commands
One handler per subcommand; each returns a process exit code
"""
import argparse
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel

from app.agents.grid_manager import GridManager
from app.core.exceptions import EXIT_CHECK_FAILED, EXIT_OK
from app.core.logging import get_logger
from app.models.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.models.dataset import EmbeddingDataset
from app.models.network import ModelDims, ModelParams, forward_features, init_params
from app.repositories.dataset_repository import CsvSchema, load_csv, save_csv
from app.repositories.report_repository import ReportRepository
from app.schemas.adapt import AdaptConfig
from app.services.adaptation_service import AdaptationService
from app.services.benchmark_service import generate_shift_benchmark, load_preset, load_spec
from app.services.evaluation_service import evaluate
from app.services.gradcheck_service import run_gradcheck
from app.services.report_service import ReportService, summary_lines
from app.cli.parser import config_from_args

logger = get_logger("cli")


def _load_source(args: argparse.Namespace) -> EmbeddingDataset:
    return load_csv(args.source, CsvSchema(has_label=True, num_classes=getattr(args, "num_classes", None)), role="source")


def _load_target(path: str, source: EmbeddingDataset) -> EmbeddingDataset:
    return load_csv(path, CsvSchema(dim=source.dim, num_classes=source.num_classes), role="target")


def _initial_params(args: argparse.Namespace, cfg: AdaptConfig, source: EmbeddingDataset) -> ModelParams:
    if getattr(args, "init_checkpoint", None):
        return load_checkpoint(args.init_checkpoint).bind(source.dim, source.num_classes)
    return init_params(ModelDims(source.dim, cfg.hidden_dim, cfg.feature_dim, source.num_classes), cfg.seed)


def _save_model(path: Optional[str], params: ModelParams, cfg: AdaptConfig):
    if path:
        save_checkpoint(Checkpoint(params=params, rng_seed=cfg.seed, epoch=cfg.epochs), path)


def _emit(args: argparse.Namespace, kind: str, payload: BaseModel, table: str, inputs: Dict[str, Any]):
    service = ReportService(include_timing=getattr(args, "include_timing", False))
    document = service.build_document(kind, payload, inputs)
    print("\n".join(summary_lines(document)))
    print(table, end="")
    if getattr(args, "report", None):
        ReportRepository().save(document, args.report)


def cmd_generate(args: argparse.Namespace) -> int:
    spec = load_preset(args.preset) if args.preset else load_spec(Path(args.spec))
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    bench = generate_shift_benchmark(spec)

    out = Path(args.out)
    save_csv(bench.source, out / "source.csv")
    save_csv(bench.target, out / "target.csv")
    save_csv(bench.source_test, out / "source_test.csv")
    print(f"wrote {out / 'source.csv'} ({bench.source.n} rows), {out / 'target.csv'} ({bench.target.n} rows), "
          f"{out / 'source_test.csv'} ({bench.source_test.n} rows)")
    return EXIT_OK


def cmd_train_source(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    source = _load_source(args)
    target = _load_target(args.target, source) if args.target else None

    service = AdaptationService(cfg)
    params, report = service.train_source_only(_initial_params(args, cfg, source), source, eval_set=target)
    _save_model(args.out_checkpoint, params, cfg)
    _emit(args, "source_only", report, ReportService().adapt_tables(report), {"source": args.source, "target": args.target})
    return EXIT_OK


def cmd_adapt(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    source = _load_source(args)
    target = _load_target(args.target, source)

    service = AdaptationService(cfg)
    params, report = service.adapt(_initial_params(args, cfg, source), source, target, pretrain=not args.skip_pretrain)
    _save_model(args.out_checkpoint, params, cfg)
    _emit(args, "adapt", report, ReportService().adapt_tables(report), {"source": args.source, "target": args.target})
    return EXIT_OK


def cmd_chain(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    source = _load_source(args)
    targets = [_load_target(path, source) for path in args.targets]

    service = AdaptationService(cfg)
    params, report = service.chain_adapt(
        _initial_params(args, cfg, source), source, targets, checkpoint_dir=args.checkpoint_dir
    )
    _save_model(args.out_checkpoint, params, cfg)
    _emit(args, "chain", report, ReportService().chain_tables(report), {"source": args.source, "targets": args.targets})
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    dims = ckpt.dims
    data = load_csv(args.data, CsvSchema(dim=dims.d_in, has_label=True, num_classes=dims.num_classes), role="target")
    metrics = evaluate(ckpt.bind(data.dim, data.num_classes), data)
    _emit(args, "evaluate", metrics, ReportService().metrics_table(metrics, "data"), {"checkpoint": args.checkpoint, "data": args.data})
    return EXIT_OK


def cmd_grid(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    source = _load_source(args)
    target = _load_target(args.target, source)

    grid = GridManager(cfg, workers=args.workers).run(source, target, args.seeds, baselines=args.baselines)
    _emit(args, "grid", grid, ReportService().grid_table(grid), {"source": args.source, "target": args.target})
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    report = run_gradcheck(args.instances, args.epsilon, args.tolerance, seed=args.seed)
    _emit(args, "gradcheck", report, ReportService().gradcheck_table(report), {})
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_dump_features(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    dims = ckpt.dims
    data = load_csv(args.data, CsvSchema(dim=dims.d_in, num_classes=dims.num_classes), role="target")
    F = forward_features(ckpt.bind(data.dim, data.num_classes), data.X)
    save_csv(EmbeddingDataset(F, data.num_classes, data.evaluation_labels(), "target", args.data), args.out)
    print(f"wrote {data.n} x {F.shape[1]} features to {args.out}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train-source": cmd_train_source,
    "adapt": cmd_adapt,
    "chain": cmd_chain,
    "evaluate": cmd_evaluate,
    "grid": cmd_grid,
    "gradcheck": cmd_gradcheck,
    "dump-features": cmd_dump_features,
}
