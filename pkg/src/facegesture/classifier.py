"""Gesture model: training, minimum-distance classification, intensity
scoring against the neutral class, evaluation, and FGR1 serialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics
from .imgio import NEUTRAL, GrayImage, LabeledDataset, normalize_zmuv
from .metrics import CovarianceModel, build_cov_model, estimate_covariance
from .subspace import Subspace, fit_pca_snapshot, project

MAGIC = "FGR1"


class ModelError(ValueError):
    pass


class ImageDimensionError(ValueError):
    pass


class IntensityUnavailableError(ValueError):
    pass


class UnknownLabelError(ValueError):
    pass


class ModelParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True)
class ClassModel:
    label: str
    mu: np.ndarray
    count: int


@dataclass(frozen=True)
class TrainConfig:
    k: int | None = None
    fraction: float | None = None
    lam: float = metrics.DEFAULT_LAMBDA
    metric: str = "md"
    neutral_label: str = NEUTRAL
    nearest_neighbor: bool = False


@dataclass(frozen=True, eq=False)
class GestureModel:
    """Trained pipeline state.

    ``samples`` holds projected training points (label, coords) and is only
    populated for nearest-neighbor models.
    """

    subspace: Subspace
    classes: tuple[ClassModel, ...]
    pooled_cov: CovarianceModel
    metric: str
    neutral_label: str
    image_dims: tuple[int, int]
    median_raw: float
    samples: tuple[tuple[str, np.ndarray], ...] = ()

    def __post_init__(self):
        labels = [c.label for c in self.classes]
        if labels != sorted(set(labels)):
            raise ModelError("class labels must be distinct and sorted")
        if self.neutral_label not in labels:
            raise ModelError(f"neutral label {self.neutral_label!r} not among classes")
        if self.pooled_cov.dim != self.subspace.k:
            raise ModelError("covariance dimension differs from subspace k")
        if self.metric not in metrics.METRICS:
            raise ModelError(f"unknown metric {self.metric!r}")
        w, h = self.image_dims
        if w * h != self.subspace.dim:
            raise ModelError("image dims do not match subspace dimension")

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.classes]

    @property
    def k(self) -> int:
        return self.subspace.k

    def neutral_mean(self) -> np.ndarray:
        return next(c.mu for c in self.classes if c.label == self.neutral_label)

    def embed(self, img: GrayImage) -> np.ndarray:
        """Normalize and project an image into the face space."""
        if (img.width, img.height) != self.image_dims:
            raise ImageDimensionError(
                f"image is {img.width}x{img.height}, model expects "
                f"{self.image_dims[0]}x{self.image_dims[1]}"
            )
        return project(self.subspace, normalize_zmuv(img))


@dataclass(frozen=True)
class ClassificationResult:
    label: str
    distance: float
    per_class: tuple[tuple[str, float], ...]


def train(data: LabeledDataset, config: TrainConfig = TrainConfig()) -> GestureModel:
    """Fit the face space, class means and pooled within-class covariance."""
    if len(data.labels) < 2:
        raise ModelError("need at least 2 classes")
    if config.neutral_label not in data.labels:
        raise ModelError(f"neutral class {config.neutral_label!r} missing from dataset")
    if config.metric not in metrics.METRICS:
        raise ModelError(f"unknown metric {config.metric!r}")

    X = np.stack([normalize_zmuv(img) for _, img in data.items])
    item_labels = [lbl for lbl, _ in data.items]
    fraction = config.fraction if config.k is None else None
    sub = fit_pca_snapshot(X, k=config.k, fraction=fraction)
    Y = project(sub, X)

    classes = []
    scatter = np.zeros((sub.k, sub.k))
    by_label = {}
    for label in data.labels:
        rows = Y[[i for i, lbl in enumerate(item_labels) if lbl == label]]
        if rows.shape[0] == 0:
            raise ModelError(f"class {label!r} has no images")
        mu = rows.mean(axis=0)
        mu.setflags(write=False)
        classes.append(ClassModel(label, mu, rows.shape[0]))
        scatter += rows.shape[0] * estimate_covariance(rows, mu)
        by_label[label] = mu
    pooled = scatter / Y.shape[0]
    cov = build_cov_model(0.5 * (pooled + pooled.T), config.lam)

    neutral_mu = by_label[config.neutral_label]
    raws = [metrics.mahalanobis(y, neutral_mu, cov)
            for y, lbl in zip(Y, item_labels) if lbl != config.neutral_label]
    median_raw = float(np.median(raws)) if raws else 0.0

    samples = ()
    if config.nearest_neighbor:
        samples = tuple((lbl, y.copy()) for lbl, y in zip(item_labels, Y))
    return GestureModel(sub, tuple(classes), cov, config.metric, config.neutral_label,
                        (data.width, data.height), median_raw, samples)


def _dist(model: GestureModel, coords, mu) -> float:
    return metrics.distance(model.metric, coords, mu, model.pooled_cov)


def classify_coords(model: GestureModel, coords, nearest_neighbor: bool = False) -> ClassificationResult:
    coords = np.asarray(coords, dtype=np.float64)
    if nearest_neighbor:
        if not model.samples:
            raise ModelError("model holds no training samples; train with nearest_neighbor=True")
        best: dict[str, float] = {}
        for label, y in model.samples:
            d = _dist(model, coords, y)
            if label not in best or d < best[label]:
                best[label] = d
        per_class = tuple((lbl, best[lbl]) for lbl in model.labels if lbl in best)
    else:
        per_class = tuple((c.label, _dist(model, coords, c.mu)) for c in model.classes)
    # per_class is label-sorted, so min() keeps the smallest label on ties
    label, dist = min(per_class, key=lambda p: p[1])
    return ClassificationResult(label, dist, per_class)


def classify(model: GestureModel, img: GrayImage, nearest_neighbor: bool = False) -> ClassificationResult:
    return classify_coords(model, model.embed(img), nearest_neighbor)


def intensity_coords(model: GestureModel, coords) -> tuple[float, float]:
    raw = metrics.mahalanobis(coords, model.neutral_mean(), model.pooled_cov)
    m = model.median_raw
    if not (np.isfinite(m) and m > 0):
        raise IntensityUnavailableError("model has no positive median distance for non-neutral images")
    return raw, raw / (raw + m)


def intensity(model: GestureModel, img: GrayImage) -> tuple[float, float]:
    """Mahalanobis distance from the neutral mean, raw and squashed to [0, 1)."""
    return intensity_coords(model, model.embed(img))


def evaluate(model: GestureModel, test: LabeledDataset, nearest_neighbor: bool = False):
    """Return ``(accuracy, confusion)``; confusion rows are true labels."""
    index = {lbl: i for i, lbl in enumerate(model.labels)}
    unknown = sorted(set(test.labels) - set(index))
    if unknown:
        raise UnknownLabelError(f"test labels not in model: {unknown}")
    confusion = np.zeros((len(index), len(index)), dtype=np.int64)
    for label, img in test.items:
        pred = classify(model, img, nearest_neighbor).label
        confusion[index[label], index[pred]] += 1
    total = int(confusion.sum())
    return float(np.trace(confusion)) / total, confusion


# ---------------------------------------------------------------------------
# FGR1 text format

def _fmt(values) -> str:
    return " ".join("%.17g" % v for v in np.asarray(values, dtype=np.float64).ravel())


def save_model(model: GestureModel) -> bytes:
    sub = model.subspace
    w, h = model.image_dims
    lines = [
        MAGIC,
        f"dims {w} {h} {sub.k}",
        f"metric {model.metric}",
        f"lambda {model.pooled_cov.shrinkage:.17g}",
        f"neutral {model.neutral_label}",
        f"median_raw {model.median_raw:.17g}",
        f"mean {_fmt(sub.mean)}",
        f"eigenvalues {_fmt(sub.eigenvalues)}",
    ]
    lines += [f"basis {_fmt(row)}" for row in sub.basis]
    lines.append(f"classes {len(model.classes)}")
    lines += [f"class {c.label} {c.count} {_fmt(c.mu)}" for c in model.classes]
    lines.append("cov")
    lines += [_fmt(row) for row in model.pooled_cov.sigma]
    if model.samples:
        lines.append(f"samples {len(model.samples)}")
        lines += [f"sample {lbl} {_fmt(y)}" for lbl, y in model.samples]
    return ("\n".join(lines) + "\n").encode("utf-8")


class _Lines:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.pos = 0

    @property
    def lineno(self) -> int:
        return self.pos + 1

    def at_end(self) -> bool:
        return self.pos >= len(self.lines)

    def next(self, keyword: str | None = None, nfields: int | None = None) -> list[str]:
        if self.at_end():
            raise ModelParseError(f"unexpected end of file, expected {keyword or 'data'}", self.lineno)
        fields = self.lines[self.pos].split(" ")
        if keyword is not None and fields[0] != keyword:
            raise ModelParseError(f"expected {keyword!r}, found {fields[0]!r}", self.lineno)
        if nfields is not None and len(fields) != nfields:
            raise ModelParseError(f"expected {nfields} fields, found {len(fields)}", self.lineno)
        self.pos += 1
        return fields


def _reals(fields: list[str], line: int) -> np.ndarray:
    try:
        vals = np.array([float(f) for f in fields], dtype=np.float64)
    except ValueError:
        raise ModelParseError("malformed number", line) from None
    if not np.all(np.isfinite(vals)):
        raise ModelParseError("non-finite number", line)
    return vals


def _int(field: str, line: int) -> int:
    try:
        return int(field)
    except ValueError:
        raise ModelParseError(f"expected integer, found {field!r}", line) from None


def load_model(data: bytes) -> GestureModel:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise ModelParseError("model file is not UTF-8", 1) from None
    r = _Lines(text)
    if r.at_end() or r.lines[0] != MAGIC:
        raise ModelParseError(f"bad magic, expected {MAGIC}", 1)
    r.pos = 1
    ln = r.lineno
    _, w, h, k = r.next("dims", 4)
    w, h, k = _int(w, ln), _int(h, ln), _int(k, ln)
    if w < 1 or h < 1 or k < 1:
        raise ModelParseError("dims must be positive", ln)
    d = w * h
    metric = r.next("metric", 2)[1]
    if metric not in metrics.METRICS:
        raise ModelParseError(f"unknown metric {metric!r}", r.lineno - 1)
    ln = r.lineno
    lam = float(_reals(r.next("lambda", 2)[1:], ln)[0])
    neutral = r.next("neutral", 2)[1]
    ln = r.lineno
    median_raw = float(_reals(r.next("median_raw", 2)[1:], ln)[0])
    ln = r.lineno
    mean = _reals(r.next("mean", d + 1)[1:], ln)
    ln = r.lineno
    eig = _reals(r.next("eigenvalues", k + 1)[1:], ln)
    basis = []
    for _ in range(k):
        ln = r.lineno
        basis.append(_reals(r.next("basis", d + 1)[1:], ln))
    ln = r.lineno
    n_classes = _int(r.next("classes", 2)[1], ln)
    classes = []
    for _ in range(n_classes):
        ln = r.lineno
        f = r.next("class", k + 3)
        mu = _reals(f[3:], ln)
        mu.setflags(write=False)
        classes.append(ClassModel(f[1], mu, _int(f[2], ln)))
    r.next("cov", 1)
    rows = []
    for _ in range(k):
        ln = r.lineno
        rows.append(_reals(r.next(None, k), ln))
    samples = []
    if not r.at_end():
        ln = r.lineno
        n_samples = _int(r.next("samples", 2)[1], ln)
        for _ in range(n_samples):
            ln = r.lineno
            f = r.next("sample", k + 2)
            samples.append((f[1], _reals(f[2:], ln)))
    if not r.at_end():
        raise ModelParseError("trailing content", r.lineno)

    try:
        sub = Subspace(mean, np.array(basis), eig)
        cov = build_cov_model(np.array(rows), lam)
        return GestureModel(sub, tuple(classes), cov, metric, neutral, (w, h),
                            median_raw, tuple(samples))
    except ValueError as exc:
        raise ModelParseError(f"invalid model: {exc}") from exc
