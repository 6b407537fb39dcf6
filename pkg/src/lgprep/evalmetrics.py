"""Classification metrics: accuracy, per-class F1, confusion, ROC/AUC.

ROC handling is binary-only and threshold-free in the sklearn style:
scores are sorted descending, the curve is the cumulative TP/FP walk
sampled at distinct score values, and AUC is the trapezoid integral.
Only the ordering of scores matters, so any monotone rescaling of the
scores leaves the curve and AUC unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import LabeledDataset
from .learners import KnnModel, MlpModel, knn_predict_batch, mlp_forward

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass
class EvalReport:
    accuracy: float
    f1_per_class: np.ndarray  # (C,)
    confusion: np.ndarray  # (C, C) int64, rows = true class
    class_names: list[str]
    num_instances: int
    roc_points: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None  # fpr, tpr, thr
    auc: float | None = None


def _as_label_arrays(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y_true, dtype=np.int64).ravel()
    p = np.asarray(y_pred, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise ValueError(f"label shape mismatch: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise ValueError("cannot score an empty label set")
    return t, p


def accuracy(y_true, y_pred) -> float:
    t, p = _as_label_arrays(y_true, y_pred)
    return float(np.mean(t == p))


def confusion_matrix(y_true, y_pred, num_classes: int) -> np.ndarray:
    t, p = _as_label_arrays(y_true, y_pred)
    if t.min() < 0 or t.max() >= num_classes or p.min() < 0 or p.max() >= num_classes:
        raise ValueError("label outside [0, num_classes)")
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (t, p), 1)
    return conf


def f1_per_class(y_true, y_pred, num_classes: int) -> np.ndarray:
    """F1 for each class; classes with zero precision+recall denominator get 0."""
    conf = confusion_matrix(y_true, y_pred, num_classes)
    tp = np.diag(conf).astype(np.float64)
    pred_totals = conf.sum(axis=0).astype(np.float64)
    true_totals = conf.sum(axis=1).astype(np.float64)
    denom = pred_totals + true_totals  # == 2tp + fp + fn
    out = np.zeros(num_classes)
    nz = denom > 0
    out[nz] = 2.0 * tp[nz] / denom[nz]
    return out


def roc_curve(y_true, scores) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Binary ROC: (fpr, tpr, thresholds), class 1 is the positive class.

    Both classes must appear in y_true. The curve starts at (0, 0) with
    threshold +inf and ends at (1, 1).
    """
    y = np.asarray(y_true, dtype=np.int64).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    if y.shape != s.shape:
        raise ValueError(f"labels/scores shape mismatch: {y.shape} vs {s.shape}")
    if y.size == 0:
        raise ValueError("cannot build a ROC from an empty set")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("roc_curve needs binary labels in {0, 1}")
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_curve needs both classes present")
    order = np.argsort(-s, kind="stable")
    ys = y[order]
    ss = s[order]
    tp = np.cumsum(ys == 1)
    fp = np.cumsum(ys == 0)
    last_of_score = np.r_[np.flatnonzero(np.diff(ss)), ss.size - 1]
    tpr = tp[last_of_score] / n_pos
    fpr = fp[last_of_score] / n_neg
    thr = ss[last_of_score]
    return (
        np.concatenate(([0.0], fpr)),
        np.concatenate(([0.0], tpr)),
        np.concatenate(([np.inf], thr)),
    )


def auc(fpr, tpr) -> float:
    f = np.asarray(fpr, dtype=np.float64)
    t = np.asarray(tpr, dtype=np.float64)
    if f.shape != t.shape or f.ndim != 1 or f.size < 2:
        raise ValueError("auc needs matching 1-D fpr/tpr with >= 2 points")
    return float(_trapezoid(t, f))


def evaluate(model, ds: LabeledDataset) -> EvalReport:
    """Run a fitted model over a dataset of feature vectors.

    ROC/AUC are filled in only for two-class models when both classes
    occur in the data; scores for the positive class come from the
    model's per-class scores (distance ratios for kNN, probabilities
    for the MLP).
    """
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    x = ds.stack().astype(np.float64)
    y = ds.labels()
    if isinstance(model, KnnModel):
        preds, scores = knn_predict_batch(model, x)
        class_names = model.class_names
    elif isinstance(model, MlpModel):
        scores = np.atleast_2d(mlp_forward(model, x))
        preds = scores.argmax(axis=1)
        class_names = model.class_names
    else:
        raise ValueError(f"cannot evaluate a {type(model).__name__}")
    c = len(class_names)
    if y.max() >= c:
        raise ValueError("dataset labels outside the model's class range")
    acc = accuracy(y, preds)
    f1 = f1_per_class(y, preds, c)
    conf = confusion_matrix(y, preds, c)
    roc = None
    auc_value = None
    if c == 2 and np.unique(y).size == 2:
        fpr, tpr, thr = roc_curve(y, scores[:, 1])
        roc = (fpr, tpr, thr)
        auc_value = auc(fpr, tpr)
    return EvalReport(
        accuracy=acc,
        f1_per_class=f1,
        confusion=conf,
        class_names=list(class_names),
        num_instances=len(ds),
        roc_points=roc,
        auc=auc_value,
    )


def report_key_values(report: EvalReport, split_name: str = "test") -> list[str]:
    """Flat key=value lines, one metric per line, stable order."""
    lines = [
        f"split={split_name}",
        f"instances={report.num_instances}",
        f"accuracy={report.accuracy:.6f}",
    ]
    for name, f1 in zip(report.class_names, report.f1_per_class):
        lines.append(f"f1_{name}={f1:.6f}")
    if report.auc is not None:
        lines.append(f"auc={report.auc:.6f}")
    return lines


def render_report(report: EvalReport, split_name: str = "test") -> str:
    """Human-readable block: summary, per-class table, confusion matrix."""
    width = max([len(n) for n in report.class_names] + [5])
    out = [
        f"evaluation on {split_name} ({report.num_instances} instances)",
        f"accuracy: {report.accuracy:.4f}",
    ]
    if report.auc is not None:
        out.append(f"auc: {report.auc:.4f}")
    out.append("")
    out.append(f"{'class':<{width}}  {'f1':>8}  {'support':>8}")
    support = report.confusion.sum(axis=1)
    for i, name in enumerate(report.class_names):
        out.append(f"{name:<{width}}  {report.f1_per_class[i]:>8.4f}  {support[i]:>8d}")
    out.append("")
    out.append("confusion (rows = true, cols = predicted):")
    header = " " * width + "  " + "  ".join(f"{n:>{width}}" for n in report.class_names)
    out.append(header)
    for i, name in enumerate(report.class_names):
        cells = "  ".join(f"{v:>{width}d}" for v in report.confusion[i])
        out.append(f"{name:<{width}}  {cells}")
    return "\n".join(out) + "\n"
