"""Per-label EKF over anchor ranges, dual-label fusion and heading recovery.

Each ranging label on the UAV carries its own 6-state filter (position
and velocity in the platform-fixed anchor frame) driven by body-frame
acceleration and corrected by ranges to the fixed anchors.  The two
label states are averaged into the UAV center, rotated into the world
frame, and their baseline vector yields the UAV yaw independent of the
magnetometer.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .frames import wrap_angle
from .qr_localization import PoseEstimate


@dataclass(frozen=True)
class AnchorSet:
    """Fixed anchor positions in the platform anchor frame.

    At least three non-collinear anchors are required for the label
    position to be observable from ranges.
    """

    positions: np.ndarray  # (N_a, 3)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "positions", pos)
        if pos.shape[0] < 3 or pos.shape[1] != 3:
            raise ValueError(f"need >= 3 anchors with 3 coordinates, got {pos.shape}")
        centered = pos - pos.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-9) < 2:
            raise ValueError("anchors are collinear; label position unobservable")

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class EkfParams:
    """Filter tuning: jerk-scale process noise, range noise, sample period."""

    # The state lives in the platform-fixed frame, which rotates with the
    # sea state; at long lever arms that motion looks like large unmodeled
    # acceleration, so the jerk noise must be generous or the filter lags.
    sigma_jerk: float = 200.0  # m/s^3, enters through the D matrix
    sigma_range: float = 0.10  # m
    period: float = 0.02  # s

    def __post_init__(self):
        if self.sigma_jerk <= 0 or self.sigma_range <= 0 or self.period <= 0:
            raise ValueError("EKF parameters must be positive")


@dataclass(frozen=True)
class EkfState:
    """Label state [position, velocity] with covariance, anchor frame."""

    mean: np.ndarray  # (6,)
    cov: np.ndarray  # (6, 6)
    timestamp: float
    degraded: bool = False  # last update dropped all range rows

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))
        if self.mean.shape != (6,) or self.cov.shape != (6, 6):
            raise ValueError("state must be 6-dim with 6x6 covariance")

    @property
    def position(self) -> np.ndarray:
        return self.mean[:3]

    @property
    def velocity(self) -> np.ndarray:
        return self.mean[3:]


def initial_state(position: np.ndarray, timestamp: float, pos_var: float = 0.25,
                  vel_var: float = 0.25) -> EkfState:
    mean = np.concatenate([np.asarray(position, dtype=float), np.zeros(3)])
    cov = np.diag([pos_var] * 3 + [vel_var] * 3)
    return EkfState(mean=mean, cov=cov, timestamp=timestamp)


@functools.lru_cache(maxsize=8)
def _transition_matrices(T: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    I3 = np.eye(3)
    A = np.block([[I3, T * I3], [np.zeros((3, 3)), I3]])
    B = np.vstack([T * T / 2 * I3, T * I3])
    D = np.vstack([T ** 3 / 6 * I3, T * T / 2 * I3])
    return A, B, D


def ekf_predict(s: EkfState, a_body: np.ndarray, R_b_w: np.ndarray,
                R_w_u: np.ndarray, params: EkfParams) -> EkfState:
    """Constant-acceleration prediction over one sample period.

    Body acceleration is rotated world-then-anchor-frame before entering
    the input matrix; covariance grows by the jerk-noise term D Q D^T.
    """
    a_body = np.asarray(a_body, dtype=float)
    if not np.all(np.isfinite(a_body)):
        raise ValueError("acceleration must be finite")
    T = params.period
    A, B, D = _transition_matrices(T)
    a_u = R_w_u @ (R_b_w @ a_body)
    mean = A @ s.mean + B @ a_u
    Q = (params.sigma_jerk ** 2) * np.eye(3)
    cov = A @ s.cov @ A.T + D @ Q @ D.T
    return EkfState(mean=mean, cov=cov, timestamp=s.timestamp + T)


def ekf_update(s: EkfState, ranges: list[tuple[int, float]], anchors: AnchorSet,
               params: EkfParams) -> EkfState:
    """Range correction with rows linearized at the predicted mean.

    Each row of the Jacobian is [(u - anchor)/d, 0, 0, 0]; the innovation
    uses the nonlinear predicted distance.  A range whose anchor sits at
    the predicted position (d < 1e-9) is dropped; if every row is dropped
    the state is returned unchanged with the degraded flag set.  The
    covariance is updated in Joseph form to preserve symmetry/PSD.
    """
    if not ranges:
        raise ValueError("at least one range measurement is required")
    u = s.position
    rows = []
    innov = []
    for j, measured in ranges:
        anchor = anchors.positions[j]
        diff = u - anchor
        d = float(np.linalg.norm(diff))
        if d < 1e-9:
            continue
        rows.append(np.concatenate([diff / d, np.zeros(3)]))
        innov.append(measured - d)
    if not rows:
        return replace(s, degraded=True)

    H = np.vstack(rows)
    y = np.asarray(innov)
    R = (params.sigma_range ** 2) * np.eye(len(rows))
    S = H @ s.cov @ H.T + R
    K = s.cov @ H.T @ np.linalg.inv(S)
    mean = s.mean + K @ y
    IKH = np.eye(6) - K @ H
    cov = IKH @ s.cov @ IKH.T + K @ R @ K.T
    return EkfState(mean=mean, cov=cov, timestamp=s.timestamp, degraded=False)


def fuse_labels(s1: EkfState, s2: EkfState, R_au_w: np.ndarray,
                period: float = 0.02) -> PoseEstimate:
    """Average the two label states and rotate them into the world frame.

    Averaging the symmetric labels cancels the baseline offset and
    decouples the estimate from platform attitude once rotated to world.
    Yaw is not set here (see :func:`yaw_from_labels`).  Timestamps must
    agree within half a sample period.
    """
    dt = abs(s1.timestamp - s2.timestamp)
    if dt > 0.5 * period:
        raise ValueError(f"label state timestamps differ by {dt:.4f}s")
    mean = 0.5 * (s1.mean + s2.mean)
    pos_w = R_au_w @ mean[:3]
    vel_w = R_au_w @ mean[3:]
    return PoseEstimate(position=pos_w, yaw=0.0, source="uwb",
                        timestamp=s1.timestamp, velocity=vel_w)


class BaselineGateError(ValueError):
    """Label baseline length inconsistent with the mounted geometry."""


def yaw_from_labels(u1: np.ndarray, u2: np.ndarray, roll: float, pitch: float,
                    d: float) -> float:
    """UAV yaw from the world-frame vector between the two labels.

    The labels sit at (0, +-d/2, 0) in the body frame, so the normalized
    difference equals the middle column of the body-to-world rotation;
    solving that column for yaw gives

        psi = arctan2(-dx, dy)                     if S_phi S_theta = 0
        psi = arctan2(rho1, rho2)                  otherwise

    with rho1 = (dy/d) S_phi S_theta - (dx/d) C_phi and
    rho2 = (dx/d) S_phi S_theta + (dy/d) C_phi.  The baseline length is
    gated to [0.8 d, 1.2 d] as an estimator-divergence check.
    """
    if abs(roll) >= math.pi / 2:
        raise ValueError("roll magnitude must be below pi/2")
    delta = np.asarray(u1, dtype=float) - np.asarray(u2, dtype=float)
    norm = float(np.linalg.norm(delta))
    if not (0.8 * d <= norm <= 1.2 * d):
        raise BaselineGateError(
            f"baseline length {norm:.3f} m outside [0.8, 1.2] x {d:.3f} m")
    dx, dy = delta[0], delta[1]
    sf, cf = math.sin(roll), math.cos(roll)
    st = math.sin(pitch)
    sfst = sf * st
    if abs(sfst) < 1e-9:
        return wrap_angle(math.atan2(-dx, dy))
    rho1 = (dy / d) * sfst - (dx / d) * cf
    rho2 = (dx / d) * sfst + (dy / d) * cf
    return wrap_angle(math.atan2(rho1, rho2))


def multilaterate(ranges: list[tuple[int, float]], anchors: AnchorSet,
                  initial: np.ndarray | None = None, max_iter: int = 50,
                  tol: float = 1e-12) -> np.ndarray:
    """Gauss-Newton least-squares position from one epoch of ranges.

    Used to initialize the filters from the first complete epoch and as
    the raw per-epoch baseline the filtered estimate is compared against.
    """
    if len(ranges) < 3:
        raise ValueError("multilateration needs at least 3 ranges")
    idx = np.array([j for j, _ in ranges])
    meas = np.array([r for _, r in ranges])
    pts = anchors.positions[idx]
    u = np.asarray(initial, dtype=float) if initial is not None else pts.mean(axis=0) + 1e-3
    for _ in range(max_iter):
        diff = u - pts
        dists = np.linalg.norm(diff, axis=1)
        dists = np.maximum(dists, 1e-12)
        J = diff / dists[:, None]
        r = dists - meas
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        u = u + step
        if np.linalg.norm(step) < tol:
            break
    return u
