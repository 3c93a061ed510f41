"""
Evaluation Service
Top-k accuracy, confusion matrices and macro-F1
"""
import numpy as np
from sklearn.metrics import confusion_matrix as sk_confusion_matrix

from app.core.exceptions import ContractViolationException, InvalidArgumentException
from app.core.numerics import as_matrix
from app.models.dataset import EmbeddingDataset
from app.models.network import ModelParams, check_labels, predict_logits
from app.schemas.report import MetricsReport


def topk_accuracy(logits: np.ndarray, y: np.ndarray, k: int) -> float:
    """Fraction of rows whose label is among the k highest logits (ties to lower index)"""
    Z = as_matrix(logits, "logits")
    n, C = Z.shape
    if not 1 <= k <= C:
        raise InvalidArgumentException(f"k must lie in [1, {C}], got {k}", argument="k")
    y = check_labels(y, C, n)
    if n == 0:
        return 0.0

    ranked = np.argsort(-Z, axis=1, kind="stable")[:, :k]
    return float(np.mean(np.any(ranked == y[:, None], axis=1)))


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> np.ndarray:
    """Counts with rows = actual class, columns = predicted class"""
    y_true = check_labels(y_true, num_classes, len(y_true))
    y_pred = check_labels(y_pred, num_classes, len(y_true))
    return sk_confusion_matrix(y_true, y_pred, labels=np.arange(num_classes)).astype(np.int64)


def macro_f1(confusion: np.ndarray) -> float:
    """
    Unweighted mean of per-class F1

    A class with no true positives (including one never predicted and never
    present) scores 0.
    """
    conf = np.asarray(confusion)
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
        raise ContractViolationException("confusion matrix must be square", details={"shape": list(conf.shape)})
    if np.any(conf < 0):
        raise InvalidArgumentException("confusion counts must be nonnegative", argument="confusion")
    if conf.sum() == 0:
        raise InvalidArgumentException("confusion matrix is empty", argument="confusion")

    conf = conf.astype(np.float64)
    tp = np.diag(conf)
    predicted = conf.sum(axis=0)
    actual = conf.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2.0 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(f1.mean())


def metrics_from_logits(logits: np.ndarray, y: np.ndarray) -> MetricsReport:
    Z = as_matrix(logits, "logits")
    C = Z.shape[1]
    conf = confusion_matrix(y, np.argmax(Z, axis=1), C)
    return MetricsReport(
        top1=topk_accuracy(Z, y, 1),
        top3=topk_accuracy(Z, y, min(3, C)),
        macro_f1=macro_f1(conf),
        confusion=conf.tolist(),
        n_eval=int(conf.sum())
    )


def evaluate(params: ModelParams, ds: EmbeddingDataset) -> MetricsReport:
    """Metrics of the model on a labeled dataset (target labels read through the evaluation accessor)"""
    y = ds.evaluation_labels()
    if y is None:
        raise InvalidArgumentException("evaluation needs a labeled dataset", argument="ds")
    return metrics_from_logits(predict_logits(params, ds.X), y)
