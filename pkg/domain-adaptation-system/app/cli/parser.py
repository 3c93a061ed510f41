"""
CLI Parser
Argument definitions; training flags mirror AdaptConfig fields
"""
import argparse
from typing import Any, Dict

from app.config import settings
from app.schemas.adapt import AdaptConfig, validate_model

# flag dest -> AdaptConfig field
TRAINING_FIELDS = {
    "lr": "lr",
    "momentum": "momentum",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "hidden_dim": "hidden_dim",
    "feature_dim": "feature_dim",
    "seed": "seed",
}
ADAPT_FIELDS = {
    "lambda_": "lambda",
    "lambda_ramp": "lambda_ramp",
    "mode": "mode",
    "cluster_scope": "cluster_scope",
    "min_cluster_size": "min_cluster_size",
    "freeze_g": "freeze_g",
}
POLICY_FIELDS = {"policy": "variant", "k": "k", "threshold": "threshold"}
KERNEL_FIELDS = {
    "bandwidth": "bandwidth_rule",
    "sigma0_sq": "sigma0_sq",
    "multipliers": "multipliers",
    "weight_scaling": "weight_scaling",
}


def _picked(args: argparse.Namespace, mapping: Dict[str, str]) -> Dict[str, Any]:
    return {field: getattr(args, dest) for dest, field in mapping.items() if getattr(args, dest, None) is not None}


def config_from_args(args: argparse.Namespace) -> AdaptConfig:
    """
    AdaptConfig from the flags that were given; omitted flags keep model defaults

    Raises:
        ConfigValidationException naming the offending field
    """
    data = _picked(args, TRAINING_FIELDS)
    data.update(_picked(args, ADAPT_FIELDS))
    policy = _picked(args, POLICY_FIELDS)
    if policy:
        data["policy"] = policy
    kernel = _picked(args, KERNEL_FIELDS)
    if kernel:
        data["kernel"] = kernel
    if getattr(args, "no_eval_each_epoch", False):
        data["eval_each_epoch"] = False
    return validate_model(AdaptConfig, data)


def _logging_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--log-level", default=None, help=f"default {settings.LOG_LEVEL}")
    p.add_argument("--log-format", choices=["structured", "simple"], default=None)
    p.add_argument("--log-file", default=None)
    return p


def _report_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--report", help="write the JSON report document to this path")
    p.add_argument("--include-timing", action="store_true", help="keep wall-clock seconds in the report")
    return p


def _training_parent(seed_required: bool = True) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("training")
    if seed_required:
        g.add_argument("--seed", type=int, required=True)
    g.add_argument("--lr", type=float)
    g.add_argument("--momentum", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--hidden-dim", type=int)
    g.add_argument("--feature-dim", type=int)
    g.add_argument("--no-eval-each-epoch", action="store_true")
    g.add_argument("--num-classes", type=int, help="class count when the source labels do not reveal it")
    return p


def _adapt_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("adaptation")
    g.add_argument("--lambda", dest="lambda_", type=float)
    g.add_argument("--lambda-ramp", action="store_true", default=None)
    g.add_argument("--mode", choices=["end_to_end", "two_stage"])
    g.add_argument("--cluster-scope", choices=["batch", "global"])
    g.add_argument("--min-cluster-size", type=int)
    g.add_argument("--freeze-g", action="store_true", default=None)
    k = p.add_argument_group("kernel")
    k.add_argument("--bandwidth", choices=["median_heuristic", "fixed"])
    k.add_argument("--sigma0-sq", type=float)
    k.add_argument("--multipliers", type=float, nargs="+")
    k.add_argument("--weight-scaling", choices=["per_class_sum", "literal_inverse_nt"])
    return p


def _policy_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("selection policy")
    g.add_argument("--policy", choices=["single_label", "hard", "soft", "ratio"])
    g.add_argument("--k", type=int)
    g.add_argument("--threshold", type=float)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcrl",
        description="Multi-cluster reference learning: class-conditional MMD domain adaptation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    log = _logging_parent()
    report = _report_parent()

    p = sub.add_parser("generate", parents=[log], help="write a synthetic shift benchmark as CSV")
    spec = p.add_mutually_exclusive_group(required=True)
    spec.add_argument("--preset", help="shipped preset name, e.g. ambiguity-16")
    spec.add_argument("--spec", help="ShiftSpec JSON file")
    p.add_argument("--seed", type=int, help="override the ShiftSpec seed")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train-source", parents=[log, report, _training_parent()], help="source-only training")
    p.add_argument("--source", required=True)
    p.add_argument("--target", help="labeled target CSV evaluated each epoch")
    p.add_argument("--out-checkpoint")

    p = sub.add_parser(
        "adapt", parents=[log, report, _training_parent(), _adapt_parent(), _policy_parent()],
        help="adapt a model to a target domain",
    )
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--init-checkpoint", help="start from this checkpoint instead of a fresh init")
    p.add_argument("--skip-pretrain", action="store_true", help="two_stage mode: the initial model is already trained")
    p.add_argument("--out-checkpoint")

    p = sub.add_parser(
        "chain", parents=[log, report, _training_parent(), _adapt_parent(), _policy_parent()],
        help="adapt through intermediate target domains in order",
    )
    p.add_argument("--source", required=True)
    p.add_argument("--targets", required=True, nargs="+")
    p.add_argument("--init-checkpoint")
    p.add_argument("--checkpoint-dir", help="write stage_NN.ckpt after each stage")
    p.add_argument("--out-checkpoint")

    p = sub.add_parser("evaluate", parents=[log, report], help="metrics of a checkpoint on a labeled CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser(
        "grid", parents=[log, report, _training_parent(seed_required=False), _adapt_parent()],
        help="selection-policy ablation grid",
    )
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--seeds", type=int, nargs="+", required=True)
    p.add_argument("--workers", type=int, help=f"default {settings.GRID_WORKERS}")
    p.add_argument("--baselines", action="store_true", help="add source-only and single-label rows")

    p = sub.add_parser("gradcheck", parents=[log, report], help="finite-difference gradient checks")
    p.add_argument("--instances", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("dump-features", parents=[log], help="write post-g features to CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    return parser
