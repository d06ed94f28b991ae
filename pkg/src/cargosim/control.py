"""Four-channel PID velocity command generation.

World-frame position errors are rotated into the UAV body frame (the
vehicle's velocity interface is body-frame), each of the x, y, z and yaw
channels runs an independent discrete PID with a sliding 3-second
integral window, the cargo velocity can be fed forward during landing,
and the output is saturated with windup protection: while the previous
command was saturated, errors that would push further into saturation
are not accumulated, while counteracting errors are.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .frames import wrap_angle

CHANNELS = ("x", "y", "z", "yaw")


@dataclass(frozen=True)
class PidGains:
    """Per-channel gains; kp/ki/kd apply to x, y, z, kp_yaw to heading."""

    kp: float
    ki: float
    kd: float
    kp_yaw: float = 0.1

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd, self.kp_yaw) < 0:
            raise ValueError("gains must be >= 0")

    def channel(self, name: str) -> tuple[float, float, float]:
        if name == "yaw":
            return (self.kp_yaw, 0.0, 0.0)
        return (self.kp, self.ki, self.kd)


# Per-phase defaults used by the mission executive.
PHASE_GAINS = {
    "takeoff": PidGains(kp=0.8, ki=0.0, kd=0.2),
    "search": PidGains(kp=0.5, ki=0.0, kd=0.0),
    "land": PidGains(kp=0.3, ki=0.001, kd=0.05),
    "return": PidGains(kp=0.1, ki=0.001, kd=0.0),
}


@dataclass(frozen=True)
class VelocityLimits:
    horizontal: float = 0.6  # m/s
    vertical: float = 0.3  # m/s, differs per vehicle
    yaw_rate: float = 0.5  # rad/s

    def for_channel(self, name: str) -> float:
        if name in ("x", "y"):
            return self.horizontal
        if name == "z":
            return self.vertical
        return self.yaw_rate


@dataclass(frozen=True)
class VelocityCommand:
    """Saturated body-frame velocity command plus yaw rate."""

    vx: float
    vy: float
    vz: float
    yaw_rate: float
    timestamp: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz, self.yaw_rate])


class _Channel:
    __slots__ = ("window", "prev_error", "prev_raw", "has_prev")

    def __init__(self):
        self.window: deque = deque()  # (timestamp, error) pairs, 3 s span
        self.prev_error = 0.0
        self.prev_raw = 0.0
        self.has_prev = False


@dataclass
class ControllerState:
    """Integral windows and derivative history for the four channels."""

    integral_span: float = 3.0  # s
    channels: dict = field(default_factory=lambda: {c: _Channel() for c in CHANNELS})

    def reset_derivative(self) -> None:
        """Drop derivative history so a gain switch causes no kick."""
        for ch in self.channels.values():
            ch.has_prev = False

    def reset(self) -> None:
        self.channels = {c: _Channel() for c in CHANNELS}

    def integral_sum(self, name: str) -> float:
        return sum(e for _, e in self.channels[name].window)


def position_error_body(p_star: np.ndarray, p: np.ndarray,
                        R_w_b: np.ndarray) -> np.ndarray:
    """World-frame setpoint error rotated into the body frame."""
    return R_w_b @ (np.asarray(p_star, dtype=float) - np.asarray(p, dtype=float))


def yaw_error(psi_cargo_body: float) -> float:
    """Heading error aligning the vehicle across the cargo's long side."""
    return wrap_angle(psi_cargo_body + math.pi / 2.0)


def saturate(value: float, limit: float) -> float:
    return max(-limit, min(limit, value))


def pid_step(gains: PidGains, errors: dict[str, float], st: ControllerState,
             T: float, now: float, limits: VelocityLimits = VelocityLimits(),
             feedforward: np.ndarray | None = None,
             ) -> tuple[VelocityCommand, ControllerState]:
    """One 50 Hz control step over all four channels.

    v = kp*e + ki*sum(window errors) + kd*(e - e_prev)/T, plus the cargo
    velocity feedforward on the translational channels when given, then
    clamped per channel.  Integral accumulation follows the anti-windup
    rule based on the previous raw (unclamped) command.
    """
    if T <= 0:
        raise ValueError("period must be > 0")
    out = {}
    for i, name in enumerate(CHANNELS):
        e = errors.get(name, 0.0)
        kp, ki, kd = gains.channel(name)
        ch = st.channels[name]
        limit = limits.for_channel(name)

        if ki > 0.0:
            _accumulate(ch, e, now, limit, st.integral_span)

        p_term = kp * e
        i_term = ki * sum(err for _, err in ch.window)
        d_term = kd * (e - ch.prev_error) / T if ch.has_prev else 0.0
        raw = p_term + i_term + d_term
        if feedforward is not None and name in ("x", "y", "z"):
            raw += float(feedforward[i])

        ch.prev_error = e
        ch.has_prev = True
        ch.prev_raw = raw
        out[name] = saturate(raw, limit)

    cmd = VelocityCommand(vx=out["x"], vy=out["y"], vz=out["z"],
                          yaw_rate=out["yaw"], timestamp=now)
    return cmd, st


def _accumulate(ch: _Channel, e: float, now: float, limit: float,
                span: float) -> None:
    # Anti-windup: while the previous raw command was saturated, only
    # counteracting errors enter the window; reinforcing errors leave the
    # accumulator untouched (no append, no pruning).
    if ch.prev_raw >= limit and e > 0.0:
        return
    if ch.prev_raw <= -limit and e < 0.0:
        return
    ch.window.append((now, e))
    while ch.window and now - ch.window[0][0] > span:
        ch.window.popleft()


def saturate_antiwindup(raw: dict[str, float], st: ControllerState,
                        limits: VelocityLimits, now: float = 0.0,
                        ) -> tuple[VelocityCommand, ControllerState]:
    """Clamp raw per-channel commands and record them for windup gating."""
    out = {}
    for name in CHANNELS:
        limit = limits.for_channel(name)
        ch = st.channels[name]
        ch.prev_raw = raw[name]
        out[name] = saturate(raw[name], limit)
    cmd = VelocityCommand(vx=out["x"], vy=out["y"], vz=out["z"],
                          yaw_rate=out["yaw"], timestamp=now)
    return cmd, st
