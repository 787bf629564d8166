"""Frame-differencing motion tracker with an EMA-smoothed bounding box."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgio import GrayImage, round_half_away

Box = tuple[int, int, int, int]  # top, left, bottom, right (inclusive)


@dataclass(frozen=True)
class TrackState:
    previous: GrayImage | None = None
    box: Box | None = None
    ema_alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ValueError(f"ema_alpha must be in (0, 1], got {self.ema_alpha}")


def motion_box(prev: GrayImage, frame: GrayImage, threshold: float) -> Box | None:
    """Bounding box of pixels whose absolute change exceeds ``threshold``."""
    if prev.shape != frame.shape:
        raise ValueError(f"frame is {frame.width}x{frame.height}, expected {prev.width}x{prev.height}")
    changed = np.abs(frame.pixels - prev.pixels) > threshold
    rows = np.flatnonzero(changed.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(changed.any(axis=0))
    return int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1])


def track_step(state: TrackState, frame: GrayImage, threshold: float):
    """Advance the tracker by one frame.

    Returns ``(new_state, box)``; ``box`` is None on the first frame or when
    nothing moved. The last smoothed box is kept across still frames.
    """
    if state.previous is None:
        return TrackState(frame, state.box, state.ema_alpha), None
    raw = motion_box(state.previous, frame, threshold)
    if raw is None:
        return TrackState(frame, state.box, state.ema_alpha), None
    if state.box is None:
        box = raw
    else:
        a = state.ema_alpha
        blended = a * np.array(raw, dtype=float) + (1.0 - a) * np.array(state.box, dtype=float)
        box = tuple(int(v) for v in round_half_away(blended))
    return TrackState(frame, box, state.ema_alpha), box
