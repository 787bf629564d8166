"""Grayscale images, PGM I/O, normalization, and dataset loading/synthesis."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NEUTRAL = "neutral"

# Labels handed out by the synthetic generator, class 0 first.
_SYNTH_LABELS = (
    NEUTRAL, "happy", "sad", "disgust", "anger",
    "class05", "class06", "class07", "class08", "class09",
    "class10", "class11", "class12", "class13", "class14", "class15",
)
_GRID_MAX = 4


class PGMError(ValueError):
    """Malformed portable graymap."""


class TruncatedPGMError(PGMError):
    pass


class MaxvalRangeError(PGMError):
    pass


class DegenerateImageError(ValueError):
    pass


class DatasetError(ValueError):
    pass


class DimensionMismatchError(DatasetError):
    pass


class EmptyClassError(DatasetError):
    pass


class EmptyDatasetError(DatasetError):
    pass


class CapacityError(ValueError):
    pass


def round_half_away(x):
    """Round to nearest integer, halves away from zero (numpy rounds to even)."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class GrayImage:
    """A grayscale raster with intensities in [0, 1].

    ``pixels`` is stored as a read-only ``(height, width)`` float64 array.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be a non-empty 2D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_flat(cls, values, width: int, height: int) -> GrayImage:
        values = np.asarray(values, dtype=np.float64)
        if values.size != width * height:
            raise ValueError(f"expected {width * height} pixels, got {values.size}")
        return cls(values.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.shape, self.pixels.tobytes()))


@dataclass(frozen=True)
class LabeledDataset:
    """Labeled images sharing one size; ``labels`` is the sorted label set."""

    items: tuple[tuple[str, GrayImage], ...]
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        items = tuple((str(lbl), img) for lbl, img in self.items)
        if not items:
            raise EmptyDatasetError("dataset has no images")
        shape = items[0][1].shape
        for lbl, img in items:
            if img.shape != shape:
                raise DimensionMismatchError(
                    f"image labeled {lbl!r} is {img.width}x{img.height}, "
                    f"expected {shape[1]}x{shape[0]}"
                )
        present = sorted({lbl for lbl, _ in items})
        labels = tuple(sorted(set(self.labels))) if self.labels else tuple(present)
        missing = set(present) - set(labels)
        if missing:
            raise DatasetError(f"labels missing from label set: {sorted(missing)}")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "labels", labels)

    @property
    def width(self) -> int:
        return self.items[0][1].width

    @property
    def height(self) -> int:
        return self.items[0][1].height

    def __len__(self) -> int:
        return len(self.items)

    def of_label(self, label: str) -> list[GrayImage]:
        return [img for lbl, img in self.items if lbl == label]


# ---------------------------------------------------------------------------
# PGM

_TOKEN = re.compile(rb"\S+")


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Return the first ``count`` whitespace-separated header tokens and the
    offset just past the last one, skipping ``#`` comments."""
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PGMError("unexpected end of header")
        if data[pos:pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            pos = n if eol < 0 else eol + 1
            continue
        m = _TOKEN.match(data, pos)
        tok = m.group(0)
        if b"#" in tok:
            tok = tok[:tok.index(b"#")]
        tokens.append(tok)
        pos += len(tok)
    return tokens, pos


def read_pgm(data: bytes) -> GrayImage:
    """Parse a P2 or P5 portable graymap into a :class:`GrayImage`."""
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise PGMError("bad magic number, expected P2 or P5")
    binary = data[:2] == b"P5"
    if len(data) > 2 and not data[2:3].isspace() and data[2:3] != b"#":
        raise PGMError("bad magic number, expected P2 or P5")
    tokens, pos = _header_tokens(data[2:], 3)
    pos += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PGMError(f"non-integer header field in {tokens!r}") from None
    if width < 1 or height < 1:
        raise PGMError(f"invalid dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise MaxvalRangeError(f"maxval {maxval} outside [1, 65535]")
    count = width * height

    if binary:
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise PGMError("missing whitespace after maxval")
        body = data[pos + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(body) < need:
            raise TruncatedPGMError(f"expected {count} pixels, body holds {len(body) // dtype.itemsize}")
        raw = np.frombuffer(body[:need], dtype=dtype).astype(np.float64)
    else:
        text = re.sub(rb"#[^\n]*", b"", data[pos:])
        fields = text.split()
        if len(fields) < count:
            raise TruncatedPGMError(f"expected {count} pixels, found {len(fields)}")
        try:
            raw = np.array([int(f) for f in fields[:count]], dtype=np.float64)
        except ValueError:
            raise PGMError("non-integer pixel value") from None
    if raw.max(initial=0) > maxval:
        raise MaxvalRangeError(f"pixel value exceeds maxval {maxval}")
    return GrayImage((raw / maxval).reshape(height, width))


def write_pgm(img: GrayImage, binary: bool = True) -> bytes:
    """Serialize with maxval 255; each pixel becomes round(p * 255)."""
    q = round_half_away(img.pixels * 255.0).astype(np.uint8)
    if binary:
        return b"P5\n%d %d\n255\n" % (img.width, img.height) + q.tobytes()
    rows = [" ".join(str(v) for v in row) for row in q]
    return ("P2\n%d %d\n255\n" % (img.width, img.height) + "\n".join(rows) + "\n").encode("ascii")


def load_pgm(path) -> GrayImage:
    return read_pgm(Path(path).read_bytes())


def save_pgm(img: GrayImage, path, binary: bool = True) -> None:
    Path(path).write_bytes(write_pgm(img, binary=binary))


# ---------------------------------------------------------------------------
# Feature vectors

def flatten(img: GrayImage) -> np.ndarray:
    """Row-major vectorization: ``out[i * width + j] == pixel(i, j)``."""
    return img.pixels.reshape(-1).copy()


def unflatten(vec, width: int, height: int) -> GrayImage:
    return GrayImage.from_flat(vec, width, height)


def normalize_zmuv(img) -> np.ndarray:
    """Flatten and rescale to zero mean and unit (population) variance."""
    x = flatten(img) if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64).ravel()
    centered = x - x.mean()
    std = math.sqrt(np.dot(centered, centered) / x.size)
    if std < 1e-12:
        raise DegenerateImageError("image has zero variance")
    out = centered / std
    # second centering pass removes residual rounding in the mean
    return out - out.mean()


# ---------------------------------------------------------------------------
# Datasets

def load_dataset(root) -> LabeledDataset:
    """Load ``<root>/<label>/*.pgm`` in lexicographic label, then file order."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"not a directory: {root}")
    class_dirs = sorted((p for p in root.iterdir() if p.is_dir()), key=lambda p: p.name)
    if not class_dirs:
        raise EmptyDatasetError(f"no class directories under {root}")
    items = []
    shape = None
    for d in class_dirs:
        files = sorted((p for p in d.iterdir() if p.is_file() and p.suffix.lower() == ".pgm"),
                       key=lambda p: p.name)
        if not files:
            raise EmptyClassError(f"class directory {d} holds no .pgm files")
        for f in files:
            img = load_pgm(f)
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise DimensionMismatchError(
                    f"{f}: {img.width}x{img.height} differs from {shape[1]}x{shape[0]}"
                )
            items.append((d.name, img))
    return LabeledDataset(tuple(items))


def class_centers(classes: int, width: int, height: int) -> list[tuple[float, float]]:
    """(row, col) bump centers on a regular grid, class index order."""
    if classes < 1:
        raise ValueError("classes must be >= 1")
    g = math.ceil(math.sqrt(classes))
    if g > _GRID_MAX:
        raise CapacityError(f"{classes} classes exceed grid capacity of {_GRID_MAX ** 2}")
    return [
        ((c // g + 0.5) * height / g - 0.5, (c % g + 0.5) * width / g - 0.5)
        for c in range(classes)
    ]


def gaussian_bump(width: int, height: int, center, amplitude: float = 0.8, std: float | None = None) -> np.ndarray:
    if std is None:
        std = min(width, height) / 6.0
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]
    r0, c0 = center
    return amplitude * np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / (2.0 * std * std))


def synth_labels(classes: int) -> list[str]:
    if classes > len(_SYNTH_LABELS):
        raise CapacityError(f"{classes} classes exceed grid capacity of {_GRID_MAX ** 2}")
    return list(_SYNTH_LABELS[:classes])


def synth_dataset(classes: int, per_class: int, width: int, height: int,
                  noise_sigma: float, seed: int) -> LabeledDataset:
    """Gaussian-bump classes on a grid plus clamped i.i.d. Gaussian noise.

    Class 0 is labeled ``"neutral"``. Items are ordered by class index, then
    sample index; the result is a pure function of the arguments.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if width < 8 or height < 8:
        raise ValueError("width and height must be >= 8")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    centers = class_centers(classes, width, height)
    labels = synth_labels(classes)
    rng = np.random.default_rng(seed)
    items = []
    for label, center in zip(labels, centers):
        proto = gaussian_bump(width, height, center)
        for _ in range(per_class):
            noisy = proto + rng.normal(0.0, noise_sigma, proto.shape) if noise_sigma > 0 else proto
            items.append((label, GrayImage(np.clip(noisy, 0.0, 1.0))))
    return LabeledDataset(tuple(items))


def synth_metadata(classes: int, per_class: int, width: int, height: int,
                   noise_sigma: float, seed: int) -> str:
    rows = [("classes", classes), ("per_class", per_class), ("width", width),
            ("height", height), ("noise_sigma", repr(float(noise_sigma))), ("seed", seed)]
    return "".join(f"{k}\t{v}\n" for k, v in rows)


def write_dataset(data: LabeledDataset, root, metadata: str | None = None) -> list[Path]:
    """Write ``<root>/<label>/<label>_NNN.pgm`` plus an optional ``metadata.tsv``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    counters: dict[str, int] = {}
    for label, img in data.items:
        idx = counters.get(label, 0)
        counters[label] = idx + 1
        d = root / label
        d.mkdir(exist_ok=True)
        path = d / f"{label}_{idx:03d}.pgm"
        save_pgm(img, path)
        written.append(path)
    if metadata is not None:
        (root / "metadata.tsv").write_text(metadata, encoding="utf-8")
    return written
