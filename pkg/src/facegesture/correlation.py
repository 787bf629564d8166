"""Template correlation: direct and FFT cross-correlation, NCC, peak picking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imgio import GrayImage

_FLAT_EPS = 1e-12
# Bound on window-tensor elements held in memory at once by ncc().
_NCC_CHUNK_ELEMS = 1 << 22


class TemplateSizeError(ValueError):
    pass


class DegenerateTemplateError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationMap:
    """Valid-mode correlation surface, shape ``(height, width)``."""

    scores: np.ndarray

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def height(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class Peak:
    row: int
    col: int
    score: float


def _pixels(img) -> np.ndarray:
    if isinstance(img, GrayImage):
        return img.pixels
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2D image")
    return arr


def _check_sizes(test: np.ndarray, template: np.ndarray) -> None:
    if template.shape[0] > test.shape[0] or template.shape[1] > test.shape[1]:
        raise TemplateSizeError(
            f"template {template.shape[1]}x{template.shape[0]} larger than "
            f"test image {test.shape[1]}x{test.shape[0]}"
        )


def cross_correlate_direct(test, template) -> CorrelationMap:
    """Sliding inner product over every placement fully inside ``test``.

    Each output cell accumulates template terms in row-major (i, j) order.
    """
    t = _pixels(test)
    f = _pixels(template)
    _check_sizes(t, f)
    th, tw = f.shape
    oh, ow = t.shape[0] - th + 1, t.shape[1] - tw + 1
    out = np.zeros((oh, ow))
    for i in range(th):
        for j in range(tw):
            out += f[i, j] * t[i:i + oh, j:j + ow]
    return CorrelationMap(out)


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def cross_correlate_fft(test, template) -> CorrelationMap:
    """Same contract as :func:`cross_correlate_direct`, via the frequency domain.

    Correlation is convolution with the conjugated, reversed template; for
    real input that is just the reversed template. Transforms are zero-padded
    to the next power of two covering the full linear convolution.
    """
    t = _pixels(test)
    f = _pixels(template)
    _check_sizes(t, f)
    th, tw = f.shape
    shape = (_next_pow2(t.shape[0] + th - 1), _next_pow2(t.shape[1] + tw - 1))
    spec = np.fft.rfft2(t, shape) * np.fft.rfft2(f[::-1, ::-1], shape)
    full = np.fft.irfft2(spec, shape)
    return CorrelationMap(full[th - 1:t.shape[0], tw - 1:t.shape[1]].copy())


def ncc(test, template) -> CorrelationMap:
    """Zero-mean normalized cross-correlation, scores clamped to [-1, 1].

    Windows with (near) zero variance score exactly 0.
    """
    t = _pixels(test)
    f = _pixels(template)
    _check_sizes(t, f)
    fc = f - f.mean()
    fnorm = np.sqrt(np.sum(fc * fc))
    if fnorm < _FLAT_EPS:
        raise DegenerateTemplateError("template has zero variance")

    th, tw = f.shape
    windows = sliding_window_view(t, (th, tw))
    oh, ow = windows.shape[:2]
    out = np.empty((oh, ow))
    rows_per_chunk = max(1, _NCC_CHUNK_ELEMS // max(1, ow * th * tw))
    for r0 in range(0, oh, rows_per_chunk):
        w = windows[r0:r0 + rows_per_chunk]
        wc = w - w.mean(axis=(2, 3), keepdims=True)
        num = np.einsum("abij,ij->ab", wc, fc)
        wnorm = np.sqrt(np.einsum("abij,abij->ab", wc, wc))
        flat = wnorm < _FLAT_EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            chunk = num / (wnorm * fnorm)
        chunk[flat] = 0.0
        out[r0:r0 + rows_per_chunk] = chunk
    np.clip(out, -1.0, 1.0, out=out)
    return CorrelationMap(out)


def find_peaks(cmap: CorrelationMap, threshold: float, min_separation: int = 1,
               max_peaks: int = 1) -> list[Peak]:
    """Greedy non-maximum suppression on a correlation map.

    Repeatedly takes the best remaining cell scoring at least ``threshold``
    and suppresses every cell at Chebyshev distance below ``min_separation``.
    Equal scores resolve to the smaller (row, col).
    """
    if min_separation < 1:
        raise ValueError("min_separation must be >= 1")
    if max_peaks < 1:
        raise ValueError("max_peaks must be >= 1")
    scores = np.asarray(cmap.scores if isinstance(cmap, CorrelationMap) else cmap, dtype=np.float64)
    h, w = scores.shape
    flat = scores.ravel()
    # stable sort keeps row-major order among equal scores
    order = np.argsort(-flat, kind="stable")
    suppressed = np.zeros(scores.shape, dtype=bool)
    r = min_separation - 1
    peaks: list[Peak] = []
    for idx in order:
        score = flat[idx]
        if not score >= threshold:
            break
        row, col = divmod(int(idx), w)
        if suppressed[row, col]:
            continue
        peaks.append(Peak(row, col, float(score)))
        if len(peaks) == max_peaks:
            break
        suppressed[max(0, row - r):row + r + 1, max(0, col - r):col + r + 1] = True
    return peaks


def locate(test, template) -> tuple[Peak, GrayImage]:
    """Best NCC placement of ``template`` in ``test`` and the matched window."""
    cmap = ncc(test, template)
    peak = find_peaks(cmap, threshold=-np.inf, min_separation=1, max_peaks=1)[0]
    f = _pixels(template)
    window = _pixels(test)[peak.row:peak.row + f.shape[0], peak.col:peak.col + f.shape[1]]
    return peak, GrayImage(window)
