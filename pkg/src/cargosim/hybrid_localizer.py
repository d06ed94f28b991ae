"""Arbitration between marker-based and ranging-based pose estimates.

The marker (QR) fix is preferred whenever it is available because of its
higher accuracy near the platform; the ranging (UWB) fix is always
present as the fallback.  A short mean-filter window over the selected
estimates smooths the hand-over so the output position has no step
discontinuities, and every source change is recorded as an event.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .frames import wrap_angle
from .qr_localization import PoseEstimate


@dataclass
class HybridState:
    """Smoothing window plus source bookkeeping for one UAV."""

    window: int = 25
    qr_debounce: int = 2
    estimates: deque = field(default_factory=deque)
    active_source: str = "uwb"
    qr_streak: int = 0
    switch_count: int = 0
    last_output: PoseEstimate | None = None
    # running sums over the window (kept incrementally; the loop runs at
    # 50 Hz so recomputing them every epoch is measurable)
    _pos_sum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    _sin_sum: float = 0.0
    _cos_sum: float = 0.0
    _vel_sum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    _vel_count: int = 0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        self.estimates = deque(self.estimates)
        for e in self.estimates:
            self._add(e)
        while len(self.estimates) > self.window:
            self._drop()

    def _add(self, e: PoseEstimate) -> None:
        self._pos_sum = self._pos_sum + e.position
        self._sin_sum += math.sin(e.yaw)
        self._cos_sum += math.cos(e.yaw)
        if e.velocity is not None:
            self._vel_sum = self._vel_sum + e.velocity
            self._vel_count += 1

    def _drop(self) -> None:
        e = self.estimates.popleft()
        self._pos_sum = self._pos_sum - e.position
        self._sin_sum -= math.sin(e.yaw)
        self._cos_sum -= math.cos(e.yaw)
        if e.velocity is not None:
            self._vel_sum = self._vel_sum - e.velocity
            self._vel_count -= 1

    def push(self, e: PoseEstimate) -> None:
        self.estimates.append(e)
        self._add(e)
        while len(self.estimates) > self.window:
            self._drop()


def arbitrate(qr: PoseEstimate | None, uwb: PoseEstimate,
              st: HybridState) -> tuple[PoseEstimate, HybridState, list[str]]:
    """Select a source for this epoch and return the window-mean output.

    QR wins once it has been present for `qr_debounce` consecutive
    epochs; a single missing QR epoch falls back to UWB immediately.
    Returns (output, state, events); events holds "source_switch:..."
    strings on transitions.
    """
    events: list[str] = []
    st.qr_streak = st.qr_streak + 1 if qr is not None else 0
    use_qr = qr is not None and st.qr_streak >= st.qr_debounce
    source = "qr" if use_qr else "uwb"
    if source != st.active_source:
        events.append(f"source_switch:{st.active_source}->{source}")
        st.switch_count += 1
        st.active_source = source

    chosen = qr if use_qr else uwb
    st.push(chosen)

    n = len(st.estimates)
    pos = st._pos_sum / n
    yaw = wrap_angle(math.atan2(st._sin_sum, st._cos_sum))
    vel = st._vel_sum / st._vel_count if st._vel_count else None
    out = PoseEstimate(position=pos, yaw=yaw, source=source,
                       timestamp=chosen.timestamp, velocity=vel)
    st.last_output = out
    return out, st, events
