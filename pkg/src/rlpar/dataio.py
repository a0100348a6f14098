"""Datasets of precomputed feature vectors with binary attribute labels.

On disk a dataset is a text manifest of ``key = value`` lines naming three
sibling files: raw little-endian float64 features (N x F, row-major), a
labels file with one row of L space-separated bits per sample, and an ids
file with one sample id per line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DatasetError, ValidationError
from .schema import AttributeSchema

MANIFEST_FORMAT = "rlpar-dataset/1"
PREDICTIONS_HEADER = "# rlpar-predictions"
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class FeatureScaler:
    """Per-dimension standardisation fitted on a training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "FeatureScaler":
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std = np.where(std > 1e-12, std, 1.0)
        return cls(mean=mean, std=std)

    @classmethod
    def identity(cls, n_features: int) -> "FeatureScaler":
        return cls(mean=np.zeros(n_features), std=np.ones(n_features))

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std


@dataclass(frozen=True)
class Sample:
    id: str
    features: np.ndarray
    labels: np.ndarray


@dataclass(eq=False)
class Dataset:
    names: tuple[str, ...]
    ids: list[str]
    features: np.ndarray  # (N, F) float64
    labels: np.ndarray  # (N, L) uint8
    split: str = "train"
    scaler: FeatureScaler | None = None

    def __post_init__(self):
        self.names = tuple(self.names)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.uint8)
        self.ids = list(self.ids)
        if self.features.ndim != 2 or self.labels.ndim != 2:
            raise DatasetError("features and labels must be 2-D")
        N = self.features.shape[0]
        if self.labels.shape[0] != N or len(self.ids) != N:
            raise DatasetError(f"sample count mismatch: {N} feature rows, {self.labels.shape[0]} label rows, {len(self.ids)} ids")
        if self.labels.shape[1] != len(self.names):
            raise DatasetError(f"{self.labels.shape[1]} label columns for {len(self.names)} attributes")
        if len(set(self.ids)) != N:
            seen = set()
            dup = next(i for i in self.ids if i in seen or seen.add(i))
            raise DatasetError(f"duplicate sample id {dup!r}")
        if self.split not in SPLITS:
            raise DatasetError(f"unknown split {self.split!r}")

    def __len__(self):
        return self.features.shape[0]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.ids[i], self.features[i], self.labels[i])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.names == other.names and self.ids == other.ids and self.split == other.split
            and np.array_equal(self.features, other.features) and np.array_equal(self.labels, other.labels)
        )

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def F(self) -> int:
        return self.features.shape[1]

    @property
    def L(self) -> int:
        return len(self.names)

    @property
    def schema(self) -> AttributeSchema:
        return AttributeSchema(self.names)

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = list(rows)
        return Dataset(self.names, [self.ids[i] for i in rows], self.features[rows], self.labels[rows],
                       self.split, self.scaler)


def _fmt_floats(a: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in a)


def save_dataset(ds: Dataset, manifest_path: str | Path) -> Path:
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    stem = manifest_path.stem
    feat = manifest_path.with_name(f"{stem}.features.f64")
    lab = manifest_path.with_name(f"{stem}.labels.txt")
    ids = manifest_path.with_name(f"{stem}.ids.txt")

    ds.features.astype("<f8").tofile(feat)
    lab.write_text("".join(" ".join(str(int(b)) for b in row) + "\n" for row in ds.labels))
    ids.write_text("".join(f"{i}\n" for i in ds.ids))
    lines = [
        f"format = {MANIFEST_FORMAT}",
        f"split = {ds.split}",
        f"N = {ds.N}",
        f"F = {ds.F}",
        f"L = {ds.L}",
        f"attributes = {', '.join(ds.names)}",
        f"features = {feat.name}",
        f"labels = {lab.name}",
        f"ids = {ids.name}",
    ]
    if ds.scaler is not None:
        lines.append(f"feature_mean = {_fmt_floats(ds.scaler.mean)}")
        lines.append(f"feature_std = {_fmt_floats(ds.scaler.std)}")
    manifest_path.write_text("\n".join(lines) + "\n")
    return manifest_path


def read_keyvalue(path: Path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DatasetError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def _int_field(meta: dict[str, str], key: str, path: Path) -> int:
    try:
        return int(meta[key])
    except KeyError:
        raise DatasetError(f"{path}: manifest lacks {key!r}") from None
    except ValueError:
        raise DatasetError(f"{path}: {key} = {meta[key]!r} is not an integer") from None


def load_dataset(manifest_path: str | Path, schema: AttributeSchema | None = None) -> Dataset:
    path = Path(manifest_path)
    if not path.is_file():
        raise DatasetError(f"manifest not found: {path}")
    meta = read_keyvalue(path)
    if meta.get("format") != MANIFEST_FORMAT:
        raise DatasetError(f"{path}: unsupported manifest format {meta.get('format')!r}")
    N = _int_field(meta, "N", path)
    F = _int_field(meta, "F", path)
    L = _int_field(meta, "L", path)
    names = tuple(a.strip() for a in meta.get("attributes", "").split(",") if a.strip())
    if len(names) != L:
        raise DatasetError(f"{path}: {len(names)} attribute names for L = {L}")
    if schema is not None and names != schema.names:
        raise DatasetError(f"{path}: attribute names do not match the supplied schema")

    files = {}
    for key in ("features", "labels", "ids"):
        if key not in meta:
            raise DatasetError(f"{path}: manifest lacks {key!r}")
        files[key] = path.parent / meta[key]
        if not files[key].is_file():
            raise DatasetError(f"missing {key} file: {files[key]}")

    raw = files["features"].read_bytes()
    if len(raw) != N * F * 8:
        raise DatasetError(f"{files['features']}: {len(raw)} bytes, expected N*F*8 = {N * F * 8}")
    features = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(N, F)

    labels = np.zeros((N, L), dtype=np.uint8)
    rows = [r for r in files["labels"].read_text().splitlines() if r.strip()]
    if len(rows) != N:
        raise DatasetError(f"{files['labels']}: {len(rows)} rows, expected N = {N}")
    for r, row in enumerate(rows):
        cells = row.split()
        if len(cells) != L:
            raise DatasetError(f"{files['labels']}: row {r} has {len(cells)} columns, expected L = {L}")
        for c, cell in enumerate(cells):
            if cell not in ("0", "1"):
                raise DatasetError(f"{files['labels']}: row {r}, column {c}: label {cell!r} is not binary")
            labels[r, c] = cell == "1"

    ids = [i.strip() for i in files["ids"].read_text().splitlines() if i.strip()]
    if len(ids) != N:
        raise DatasetError(f"{files['ids']}: {len(ids)} ids, expected N = {N}")

    scaler = None
    if "feature_mean" in meta and "feature_std" in meta:
        mean = np.array([float(x) for x in meta["feature_mean"].split()])
        std = np.array([float(x) for x in meta["feature_std"].split()])
        if mean.shape != (F,) or std.shape != (F,):
            raise DatasetError(f"{path}: normalisation statistics do not have F = {F} entries")
        scaler = FeatureScaler(mean, std)
    return Dataset(names, ids, features, labels, meta.get("split", "train"), scaler)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic dataset.

    Features are ``W @ labels + noise`` with ``W`` an F x L standard normal
    mixing matrix and noise of standard deviation ``1 / snr`` per dimension;
    ``snr = inf`` gives noiseless features.
    """

    n: int
    n_features: int
    n_attributes: int
    rates: tuple[float, ...]
    snr: float = math.inf
    seed: int = 0
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n < 1 or self.n_features < 1 or self.n_attributes < 1:
            raise ValidationError("N, F and L must be positive")
        rates = tuple(float(r) for r in self.rates)
        if len(rates) == 1:
            rates = rates * self.n_attributes
        object.__setattr__(self, "rates", rates)
        if len(rates) != self.n_attributes:
            raise ValidationError(f"{len(rates)} positive rates for L = {self.n_attributes}")
        if any(not 0.0 < r < 1.0 for r in rates):
            raise ValidationError("positive rates must lie in (0, 1)")
        if not self.snr > 0:
            raise ValidationError("signal-to-noise must be positive")
        if self.names is not None and len(self.names) != self.n_attributes:
            raise ValidationError("names must have L entries")

    def attribute_names(self) -> tuple[str, ...]:
        return tuple(self.names) if self.names else tuple(f"attr{i:02d}" for i in range(self.n_attributes))

    def mixing_matrix(self) -> np.ndarray:
        rng = np.random.default_rng([self.seed, 0])
        return rng.standard_normal((self.n_features, self.n_attributes))


def generate_synthetic(spec: SynthSpec, split: str = "train", n: int | None = None) -> Dataset:
    """Draw a split; all splits of one spec share the mixing matrix."""
    n = spec.n if n is None else n
    W = spec.mixing_matrix()
    rng = np.random.default_rng([spec.seed, 1 + SPLITS.index(split)])
    rates = np.asarray(spec.rates)
    labels = (rng.random((n, spec.n_attributes)) < rates).astype(np.uint8)
    features = labels @ W.T
    if math.isfinite(spec.snr):
        features = features + rng.standard_normal(features.shape) / spec.snr
    ids = [f"{split}-{i:06d}" for i in range(n)]
    return Dataset(spec.attribute_names(), ids, features, labels, split)


def parse_synth_spec(text: str) -> tuple[SynthSpec, int]:
    """Read a ``key = value`` synth spec; returns the spec and the test-split size.

    Keys: ``n`` (train size), ``n_test``, ``F``, ``L``, ``rates`` (one value or
    L comma-separated values), ``snr`` (``inf`` for noiseless), ``seed``,
    optional ``names``.
    """
    meta = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"bad synth spec line {raw!r}")
            meta[key.strip()] = value.strip()
    try:
        names = tuple(a.strip() for a in meta["names"].split(",")) if "names" in meta else None
        spec = SynthSpec(
            n=int(meta["n"]),
            n_features=int(meta["F"]),
            n_attributes=int(meta["L"]),
            rates=tuple(float(r) for r in meta["rates"].split(",")),
            snr=float(meta.get("snr", "inf")),
            seed=int(meta.get("seed", "0")),
            names=names,
        )
        n_test = int(meta.get("n_test", "0"))
    except KeyError as e:
        raise ValidationError(f"synth spec lacks {e.args[0]!r}") from None
    except ValueError as e:
        raise ValidationError(f"bad synth spec value: {e}") from None
    return spec, n_test


def export_predictions(ds: Dataset, predictions: np.ndarray, path: str | Path) -> None:
    """Write ``id b1 ... bL`` rows under a header naming the attributes."""
    pred = np.asarray(predictions)
    if pred.shape != (ds.N, ds.L):
        raise ValidationError(f"prediction matrix shape {pred.shape} does not match dataset ({ds.N}, {ds.L})")
    if not np.isin(pred, (0, 1)).all():
        raise ValidationError("predictions must be binary")
    lines = [f"{PREDICTIONS_HEADER} attributes={','.join(ds.names)}"]
    lines += [f"{i} " + " ".join(str(int(b)) for b in row) for i, row in zip(ds.ids, pred)]
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise ValidationError(f"cannot write predictions to {path}: {e}") from None


def read_predictions(path: str | Path) -> tuple[tuple[str, ...], list[str], np.ndarray]:
    """Inverse of :func:`export_predictions`: (attribute names, ids, label matrix)."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"predictions file not found: {path}")
    lines = [l for l in path.read_text().splitlines() if l.strip()]
    if not lines or not lines[0].startswith(PREDICTIONS_HEADER):
        raise DatasetError(f"{path}: not a predictions file")
    _, _, names = lines[0].partition("attributes=")
    names = tuple(n for n in names.strip().split(",") if n)
    ids, rows = [], []
    for r, line in enumerate(lines[1:]):
        cells = line.split()
        if len(cells) != len(names) + 1:
            raise DatasetError(f"{path}: row {r} has {len(cells) - 1} labels, expected {len(names)}")
        for c, cell in enumerate(cells[1:]):
            if cell not in ("0", "1"):
                raise DatasetError(f"{path}: row {r}, column {c}: label {cell!r} is not binary")
        ids.append(cells[0])
        rows.append([int(x) for x in cells[1:]])
    return names, ids, np.array(rows, dtype=np.uint8).reshape(len(rows), len(names))


def is_predictions_file(path: str | Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return fh.readline().startswith(PREDICTIONS_HEADER)
