"""Reward-magnitude sweeps and the grouping/reward ablation on synthetic data."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .dataio import Dataset, FeatureScaler
from .errors import ValidationError
from .metrics import MetricsReport, evaluate
from .schema import GroupConfig
from .trainer import TrainConfig, TrainedModel, TrainingReport, train

log = logging.getLogger(__name__)


def parse_rho_range(text: str) -> list[float]:
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    if ":" in text:
        try:
            start, stop, stride = (float(x) for x in text.split(":"))
        except ValueError:
            raise ValidationError(f"bad rho range {text!r}; expected start:stop:step") from None
        if stride <= 0 or stop < start:
            raise ValidationError(f"bad rho range {text!r}")
        n = int(round((stop - start) / stride)) + 1
        values = [round(start + k * stride, 10) for k in range(n)]
    else:
        try:
            values = [float(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise ValidationError(f"bad rho list {text!r}") from None
    if not values or any(not 0.0 < v <= 1.0 for v in values):
        raise ValidationError("rho values must lie in (0, 1]")
    return values


def group_view(ds: Dataset, attrs) -> Dataset:
    """The dataset restricted to one group's label columns."""
    attrs = list(attrs)
    return Dataset(tuple(ds.names[i] for i in attrs), ds.ids, ds.features, ds.labels[:, attrs], ds.split, ds.scaler)


def _quiet_evaluate(truth, pred) -> MetricsReport:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return evaluate(truth, pred)


def same_training(a: tuple[TrainedModel, TrainingReport], b: tuple[TrainedModel, TrainingReport]) -> bool:
    """True when two runs produced bit-identical reports and agent parameters."""
    (ma, ra), (mb, rb) = a, b
    if ra.summary_text() != rb.summary_text() or len(ma.agents) != len(mb.agents):
        return False
    return all(
        np.array_equal(x.policy.theta, y.policy.theta) and np.array_equal(x.opt.m, y.opt.m)
        and np.array_equal(x.opt.v, y.opt.v) and x.opt_steps == y.opt_steps
        for x, y in zip(ma.agents, mb.agents)
    )


@dataclass
class SweepRow:
    rho: float
    metrics: MetricsReport


@dataclass
class SweepResult:
    group_name: str
    attributes: tuple[str, ...]
    rows: list[SweepRow]
    basic: MetricsReport
    # None when 1.0 is not among the swept values
    rho_one_matches_basic: bool | None = None

    def table(self, sep: str = "\t") -> str:
        head = sep.join(["rho", "Acc", "F1", "mA", "Prec", "Rec"])
        lines = [head]
        for r in self.rows:
            m = r.metrics
            lines.append(sep.join([f"{r.rho:.2f}"] + [f"{x:.6f}" for x in (m.acc, m.f1, m.mA, m.prec, m.rec)]))
        m = self.basic
        lines.append(sep.join(["basic"] + [f"{x:.6f}" for x in (m.acc, m.f1, m.mA, m.prec, m.rec)]))
        return "\n".join(lines) + "\n"


def sweep_rho(train_ds: Dataset, test_ds: Dataset, attrs, rhos, cfg: TrainConfig,
              group_name: str = "group") -> SweepResult:
    """Train the group once per reward magnitude (plus once with the basic reward).

    Metrics are computed on the test split's columns for the group. The run
    with ``rho = 1`` is compared against the basic-reward run step for step.
    """
    tr = group_view(train_ds, attrs)
    te = group_view(test_ds, attrs)
    if tr.scaler is None and cfg.standardize:
        tr.scaler = FeatureScaler.fit(train_ds.features)
    single = GroupConfig.single(tr.L, group_name)

    basic_run = train(tr, single, replace(cfg, reward_mode="basic", rho_override=None))
    basic = _quiet_evaluate(te.labels, basic_run[0].predict_dataset(te))
    rows = []
    matches = None
    for rho in rhos:
        run = train(tr, single, replace(cfg, reward_mode="gor", rho_override=rho))
        m = _quiet_evaluate(te.labels, run[0].predict_dataset(te))
        log.info("rho=%.2f Acc=%.4f F1=%.4f mA=%.4f", rho, m.acc, m.f1, m.mA)
        rows.append(SweepRow(rho, m))
        if rho == 1.0:
            matches = same_training(run, basic_run)
    return SweepResult(group_name, tr.names, rows, basic, matches)


@dataclass
class AblationResult:
    variants: dict[str, MetricsReport] = field(default_factory=dict)
    reports: dict[str, TrainingReport] = field(default_factory=dict)

    def table(self, sep: str = "\t") -> str:
        lines = [sep.join(["variant", "mA", "Acc", "Prec", "Rec", "F1"])]
        for name, m in self.variants.items():
            lines.append(sep.join([name] + [f"{x:.6f}" for x in (m.mA, m.acc, m.prec, m.rec, m.f1)]))
        return "\n".join(lines) + "\n"


def run_ablation(train_ds: Dataset, test_ds: Dataset, groups: GroupConfig, cfg: TrainConfig) -> AblationResult:
    """Baseline (one group, basic reward), +grouping, +grouping and group reward."""
    variants = {
        "Baseline": (GroupConfig.single(train_ds.L), "basic"),
        "Baseline+AGS": (groups, "basic"),
        "Baseline+AGS+GOR": (groups, "gor"),
    }
    out = AblationResult()
    for name, (g, mode) in variants.items():
        model, report = train(train_ds, g, replace(cfg, reward_mode=mode))
        out.variants[name] = _quiet_evaluate(test_ds.labels, model.predict_dataset(test_ds))
        out.reports[name] = report
    return out
