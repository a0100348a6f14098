"""Label-based and example-based multi-label metrics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class MetricsReport:
    mA: float
    acc: float
    prec: float
    rec: float
    f1: float
    pos_acc: np.ndarray  # TP_i / P_i per attribute
    neg_acc: np.ndarray  # TN_i / N_i per attribute

    def as_dict(self) -> dict[str, float]:
        return {"mA": self.mA, "Acc": self.acc, "Prec": self.prec, "Rec": self.rec, "F1": self.f1}


def _check(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.ndim != 2 or truth.shape != pred.shape:
        raise ValidationError(f"label matrices must be 2-D with equal shapes, got {truth.shape} and {pred.shape}")
    for name, m in (("truth", truth), ("pred", pred)):
        if not np.isin(m, (0, 1)).all():
            raise ValidationError(f"{name} matrix is not binary")
    return truth.astype(bool), pred.astype(bool)


def attribute_accuracies(truth, pred, names=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-attribute positive and negative accuracy.

    A column with no positives (or no negatives) gets 0 for that term, and a
    warning names it.
    """
    y, p = _check(truth, pred)
    P = y.sum(axis=0)
    N = (~y).sum(axis=0)
    TP = (y & p).sum(axis=0)
    TN = (~y & ~p).sum(axis=0)
    pos = np.divide(TP, P, out=np.zeros(P.shape), where=P > 0)
    neg = np.divide(TN, N, out=np.zeros(N.shape), where=N > 0)
    bad = np.flatnonzero((P == 0) | (N == 0))
    if bad.size:
        labels = [names[i] for i in bad] if names is not None else bad.tolist()
        warnings.warn(f"attributes without positive or negative samples: {labels}", stacklevel=2)
    return pos, neg


def mean_accuracy(truth, pred, names=None) -> float:
    pos, neg = attribute_accuracies(truth, pred, names)
    return float(np.sum(pos + neg) / (2 * pos.shape[0]))


def example_metrics(truth, pred) -> tuple[float, float, float, float]:
    """Acc, Prec, Rec, F1 averaged over samples with 1/N normalisation.

    Empty predicted set contributes 0 to Prec, empty truth set 0 to Rec, and
    both empty counts as a perfect match for Acc.
    """
    y, p = _check(truth, pred)
    inter = (y & p).sum(axis=1)
    union = (y | p).sum(axis=1)
    n_pred = p.sum(axis=1)
    n_true = y.sum(axis=1)
    acc = np.divide(inter, union, out=np.ones(inter.shape), where=union > 0).mean()
    prec = np.divide(inter, n_pred, out=np.zeros(inter.shape), where=n_pred > 0).mean()
    rec = np.divide(inter, n_true, out=np.zeros(inter.shape), where=n_true > 0).mean()
    f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    return float(acc), float(prec), float(rec), float(f1)


def evaluate(truth, pred, names=None) -> MetricsReport:
    pos, neg = attribute_accuracies(truth, pred, names)
    acc, prec, rec, f1 = example_metrics(truth, pred)
    mA = float(np.sum(pos + neg) / (2 * pos.shape[0]))
    return MetricsReport(mA=mA, acc=acc, prec=prec, rec=rec, f1=f1, pos_acc=pos, neg_acc=neg)


def format_report(report: MetricsReport, names=None) -> str:
    lines = [f"{k:5s} {v:.6f}" for k, v in report.as_dict().items()]
    lines.append("")
    lines.append(f"{'attribute':24s} {'pos_acc':>8s} {'neg_acc':>8s}")
    for i, (pa, na) in enumerate(zip(report.pos_acc, report.neg_acc)):
        name = names[i] if names is not None else str(i)
        lines.append(f"{name:24s} {pa:8.4f} {na:8.4f}")
    return "\n".join(lines) + "\n"


def summary_lines(report: MetricsReport, names=None) -> str:
    """Machine-readable ``key=value`` lines; floats use repr for lossless round trips."""
    out = [f"{k}={v!r}" for k, v in report.as_dict().items()]
    for i, (pa, na) in enumerate(zip(report.pos_acc, report.neg_acc)):
        name = names[i] if names is not None else str(i)
        out.append(f"attribute={name} pos_acc={float(pa)!r} neg_acc={float(na)!r}")
    return "\n".join(out) + "\n"
