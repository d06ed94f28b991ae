"""Synthetic sea environment and sensor generation.

Provides the oscillating landing platform, the target-vessel deck with
its cargo, UAV velocity-tracking kinematics with wind gusts, and every
synthetic measurement the autonomy stack consumes: anchor ranges, marker
observations, cargo detections, IMU attitude/acceleration and rotor
telemetry.  All randomness flows from one seeded generator so a run is
reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .frames import EulerAngles, rotation_from_euler, rotation_from_rpy, wrap_angle
from .perception import DetectionObservation
from .qr_localization import QrMarker, QrObservation

GRAVITY = 9.81


@dataclass(frozen=True)
class CargoSpec:
    """A transportable box on the target deck."""

    position: tuple[float, float, float]  # world, top-face center
    mass: float
    top_diagonal: float
    yaw: float = 0.0

    def __post_init__(self):
        if self.mass <= 0 or self.top_diagonal <= 0:
            raise ValueError("cargo mass and diagonal must be > 0")


def _default_anchors() -> np.ndarray:
    return np.array([
        [1.7, 2.4, 0.2], [1.7, -2.4, 0.2], [-1.7, 2.4, 0.2], [-1.7, -2.4, 0.2],
        [-1.7, 0.8, 3.7], [-1.7, -0.8, 3.7],
    ])


def _default_markers() -> list[QrMarker]:
    # mixed-size markers on the landing panel centered at (1, 2) on the platform
    return [
        QrMarker(label=1, diagonal=0.60, panel_xy=(1.0, 2.0)),
        QrMarker(label=2, diagonal=0.30, panel_xy=(1.35, 2.35)),
        QrMarker(label=3, diagonal=0.30, panel_xy=(0.65, 1.65)),
        QrMarker(label=4, diagonal=0.15, panel_xy=(1.35, 1.65)),
        QrMarker(label=5, diagonal=0.15, panel_xy=(0.65, 2.35)),
    ]


@dataclass(frozen=True)
class ScenarioConfig:
    """World geometry, noise levels and vehicle parameters for one run.

    Angles are radians here; the JSON schema uses degrees and is
    converted on load.  Defaults replicate the competition setup.
    """

    seed: int = 0
    # localization infrastructure (platform frame)
    anchors: np.ndarray = field(default_factory=_default_anchors)
    label_baseline: float = 0.4
    qr_markers: list[QrMarker] = field(default_factory=_default_markers)
    # cameras
    qr_focal: float = 0.0036
    qr_h_fov: float = math.radians(81.0)
    qr_v_fov: float = math.radians(53.0)
    qr_max_height: float = 5.0
    # calibrated so median fix error per 1 m height band reproduces the
    # field measurements (about 2 cm at 1 m up to 32 cm at 5 m)
    qr_image_noise: float = 3e-5  # image-plane units, quantization stand-in
    qr_yaw_noise: float = 0.01
    qr_dropout: float = 0.05
    det_focal: float = 0.0027
    det_h_fov: float = math.radians(106.0)
    det_v_fov: float = math.radians(73.0)
    det_min_height: float = 0.09  # cargo fills the view below this
    det_pos_noise: float = 0.01  # m, applied at the cargo plane
    det_yaw_noise: float = 0.01
    det_dropout: float = 0.05
    det_conf_base: float = 0.75
    det_conf_jitter: float = 0.15
    # world geometry
    platform_size: tuple[float, float] = (3.5, 4.8)
    uav_start: tuple[float, float, float] = (1.0, 2.0, 0.0)
    deck_center: tuple[float, float] = (8.0, 0.0)
    deck_yaw: float = 0.0
    deck_size: tuple[float, float] = (4.0, 4.0)
    deck_height: float = 1.0
    cargoes: tuple[CargoSpec, ...] = (
        CargoSpec(position=(8.0, 0.0, 1.10), mass=0.89, top_diagonal=0.372),
    )
    # platform oscillation
    platform_roll_amp: float = math.radians(8.0)
    platform_pitch_amp: float = math.radians(10.0)
    platform_roll_period: float = 6.0
    platform_pitch_period: float = 5.0
    platform_roll_phase: float = 0.0
    platform_pitch_phase: float = 1.1
    platform_yaw_walk: float = 0.0  # rad/sqrt(s)
    # wind (Ornstein-Uhlenbeck gust velocity); defaults peak near 12 m/s
    wind_mean: tuple[float, float] = (5.0, 2.0)  # m/s, world xy
    wind_sigma: float = 2.0
    wind_tau: float = 2.0
    drag_coeff: float = 0.24  # gust velocity -> disturbance acceleration
    # the autopilot's inner velocity loop estimates and cancels slow wind
    # (it carries its own integrator); only gusts faster than this time
    # constant leak through as disturbance
    trim_tau: float = 1.0
    # vehicle
    uav_mass: float = 7.9
    vel_time_constant: float = 0.3
    tilt_limit: float = math.radians(15.0)
    rotor_noise: float = 0.02  # rad/s on each rotor speed sample
    # ranging noise
    sigma_uwb: float = 0.10
    occlusion_center: tuple[float, float, float] | None = None
    occlusion_radius: float = 0.0
    occlusion_factor: float = 5.0

    def __post_init__(self):
        anchors = np.asarray(self.anchors, dtype=float)
        object.__setattr__(self, "anchors", anchors)
        if anchors.shape[0] < 3:
            raise ValueError("need at least three anchors")
        centered = anchors - anchors.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-9) < 2:
            raise ValueError("anchors must be non-collinear")
        if self.label_baseline <= 0:
            raise ValueError("label baseline must be > 0")
        for fov in (self.qr_h_fov, self.qr_v_fov, self.det_h_fov, self.det_v_fov):
            if not (0 < fov < math.pi):
                raise ValueError("fields of view must be in (0, 180) degrees")
        if self.uav_mass <= 0:
            raise ValueError("UAV mass must be > 0")

    @property
    def label_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.label_baseline
        return (np.array([0.0, d / 2, 0.0]), np.array([0.0, -d / 2, 0.0]))


@dataclass(frozen=True)
class SimState:
    """Immutable snapshot of the world at time t."""

    t: float
    platform_attitude: EulerAngles
    uav_pos: np.ndarray
    uav_euler: EulerAngles
    uav_vel: np.ndarray
    uav_acc: np.ndarray  # world frame, kinematic
    wind_vel: np.ndarray  # world xy gust velocity
    wind_trim: np.ndarray  # inner-loop estimate of the wind disturbance
    attached_mass: float
    rotor_speeds: np.ndarray  # (4,) rad/s
    on_ground: bool = False

    @property
    def rotor_sum_sq(self) -> float:
        return float(np.dot(self.rotor_speeds, self.rotor_speeds))


@dataclass(frozen=True)
class RotorTelemetry:
    """Window-averaged rotor speeds used by the attachment test."""

    speeds: np.ndarray  # (4,) rad/s averaged over the hover window

    @property
    def sum_sq(self) -> float:
        return float(np.dot(self.speeds, self.speeds))


class SimWorld:
    """Steppable world; owns the seeded generator for all noise draws."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self._platform_yaw = 0.0

    def initial_state(self) -> SimState:
        cfg = self.cfg
        hover = math.sqrt(cfg.uav_mass * GRAVITY / 4.0)
        return SimState(
            t=0.0,
            platform_attitude=self._platform_attitude(0.0),
            uav_pos=np.asarray(cfg.uav_start, dtype=float),
            uav_euler=EulerAngles(0.0, 0.0, 0.0),
            uav_vel=np.zeros(3),
            uav_acc=np.zeros(3),
            wind_vel=np.asarray(cfg.wind_mean, dtype=float),
            wind_trim=cfg.drag_coeff * np.asarray(cfg.wind_mean, dtype=float),
            attached_mass=0.0,
            rotor_speeds=np.full(4, hover),
        )

    def _platform_attitude(self, t: float) -> EulerAngles:
        cfg = self.cfg
        roll = cfg.platform_roll_amp * math.sin(
            2 * math.pi * t / cfg.platform_roll_period + cfg.platform_roll_phase)
        pitch = cfg.platform_pitch_amp * math.sin(
            2 * math.pi * t / cfg.platform_pitch_period + cfg.platform_pitch_phase)
        return EulerAngles(roll, pitch, wrap_angle(self._platform_yaw))

    def step(self, state: SimState, cmd: np.ndarray, dt: float) -> SimState:
        """Advance one control period under a body-frame velocity command.

        cmd is [vx, vy, vz, yaw_rate].  The UAV velocity follows the
        command through a first-order lag; gusts act as a bounded
        disturbance acceleration; rotor speeds balance the carried
        weight plus the commanded vertical acceleration.
        """
        cfg = self.cfg
        cmd = np.asarray(cmd, dtype=float)
        if not np.all(np.isfinite(cmd)):
            raise ValueError("command must be finite")
        if not (0.0 < dt <= 0.1):
            raise ValueError(f"dt must be in (0, 0.1], got {dt}")

        t = state.t + dt
        if cfg.platform_yaw_walk > 0.0:
            self._platform_yaw += cfg.platform_yaw_walk * math.sqrt(dt) * \
                self.rng.standard_normal()
        platform = self._platform_attitude(t)

        wind = state.wind_vel
        if cfg.wind_sigma > 0.0:
            mean = np.asarray(cfg.wind_mean, dtype=float)
            wind = wind + (mean - wind) * (dt / cfg.wind_tau) + \
                cfg.wind_sigma * math.sqrt(dt) * self.rng.standard_normal(2)

        yaw = wrap_angle(state.uav_euler.yaw + cmd[3] * dt)
        cy, sy = math.cos(yaw), math.sin(yaw)
        v_cmd_w = np.array([cy * cmd[0] - sy * cmd[1],
                            sy * cmd[0] + cy * cmd[1],
                            cmd[2]])
        disturbance = cfg.drag_coeff * (wind - state.uav_vel[:2])
        trim = state.wind_trim + \
            (disturbance - state.wind_trim) * (dt / cfg.trim_tau)
        acc = (v_cmd_w - state.uav_vel) / cfg.vel_time_constant
        acc = acc + np.array([disturbance[0] - trim[0],
                              disturbance[1] - trim[1], 0.0])
        vel = state.uav_vel + acc * dt
        pos = state.uav_pos + vel * dt
        on_ground = state.on_ground
        if on_ground and cmd[2] <= 0.0:
            vel = np.zeros(3)
            acc = np.zeros(3)
            pos = state.uav_pos
        elif cmd[2] > 0.0:
            on_ground = False

        # tilt follows the commanded horizontal acceleration
        a_bx = cy * acc[0] + sy * acc[1]
        a_by = -sy * acc[0] + cy * acc[1]
        lim = cfg.tilt_limit
        pitch = max(-lim, min(lim, math.atan2(a_bx, GRAVITY)))
        roll = max(-lim, min(lim, -math.atan2(a_by, GRAVITY)))
        euler = EulerAngles(roll, pitch, yaw)

        mass = cfg.uav_mass + state.attached_mass
        thrust = max(0.05 * mass * GRAVITY, mass * (GRAVITY + acc[2]))
        speed = math.sqrt(thrust / 4.0)
        rotors = np.full(4, speed)
        if cfg.rotor_noise > 0.0:
            rotors = rotors + cfg.rotor_noise * self.rng.standard_normal(4)

        return SimState(t=t, platform_attitude=platform, uav_pos=pos,
                        uav_euler=euler, uav_vel=vel, uav_acc=acc,
                        wind_vel=wind, wind_trim=trim,
                        attached_mass=state.attached_mass,
                        rotor_speeds=rotors, on_ground=on_ground)

    # --- sensors -----------------------------------------------------

    def label_positions_platform(self, state: SimState) -> list[np.ndarray]:
        """True ranging-label positions in the platform (anchor) frame."""
        R_b_w = rotation_from_euler(state.uav_euler)
        R_w_a = rotation_from_euler(state.platform_attitude).T
        return [R_w_a @ (state.uav_pos + R_b_w @ off)
                for off in self.cfg.label_offsets]

    def sense_uwb(self, state: SimState) -> list[tuple[int, int, float]]:
        """Noisy label-to-anchor ranges: (label index, anchor index, range)."""
        cfg = self.cfg
        out = []
        for i, label_pos in enumerate(self.label_positions_platform(state)):
            sigma = cfg.sigma_uwb
            if cfg.occlusion_center is not None:
                if np.linalg.norm(label_pos - np.asarray(cfg.occlusion_center)) \
                        <= cfg.occlusion_radius:
                    sigma = sigma * cfg.occlusion_factor
            dists = np.linalg.norm(cfg.anchors - label_pos, axis=1)
            if sigma > 0.0:
                dists = dists + sigma * self.rng.standard_normal(len(dists))
            out.extend((i, j, float(d)) for j, d in enumerate(dists))
        return out

    def sense_imu(self, state: SimState) -> tuple[np.ndarray, float, float]:
        """Body-frame acceleration plus roll and pitch (yaw withheld)."""
        R_w_b = rotation_from_euler(state.uav_euler).T
        return R_w_b @ state.uav_acc, state.uav_euler.roll, state.uav_euler.pitch

    def sense_qr(self, state: SimState) -> list[QrObservation]:
        """Project visible panel markers into the downward camera."""
        cfg = self.cfg
        R_a_w = rotation_from_euler(state.platform_attitude)
        R_w_b = rotation_from_euler(state.uav_euler).T
        psi_img = wrap_angle(state.platform_attitude.yaw - state.uav_euler.yaw
                             - math.pi)
        tan_h = math.tan(cfg.qr_h_fov / 2.0)
        tan_v = math.tan(cfg.qr_v_fov / 2.0)
        out = []
        for marker in cfg.qr_markers:
            panel = np.array([marker.panel_xy[0], marker.panel_xy[1], 0.0])
            cam = R_w_b @ (R_a_w @ panel - state.uav_pos)
            z = cam[2]
            if z >= -cfg.qr_focal:
                continue
            depth = -z
            if depth > cfg.qr_max_height:
                continue
            if abs(cam[0]) > tan_h * depth or abs(cam[1]) > tan_v * depth:
                continue
            if cfg.qr_dropout > 0.0 and self.rng.random() < cfg.qr_dropout:
                continue
            d_img = -cfg.qr_focal * marker.diagonal / (z + cfg.qr_focal)
            cx = cam[0] * d_img / marker.diagonal
            cy = cam[1] * d_img / marker.diagonal
            yaw = psi_img
            if cfg.qr_image_noise > 0.0:
                cx += cfg.qr_image_noise * self.rng.standard_normal()
                cy += cfg.qr_image_noise * self.rng.standard_normal()
                d_img = abs(d_img + cfg.qr_image_noise * self.rng.standard_normal())
            if cfg.qr_yaw_noise > 0.0:
                yaw = wrap_angle(yaw + cfg.qr_yaw_noise * self.rng.standard_normal())
            out.append(QrObservation(label=marker.label, image_diagonal=d_img,
                                     image_center=(cx, cy), image_yaw=yaw,
                                     focal_length=cfg.qr_focal))
        return out

    def sense_cargo(self, state: SimState) -> list[DetectionObservation]:
        """Project deck cargoes into the detection camera with noise."""
        cfg = self.cfg
        R_w_b = rotation_from_euler(state.uav_euler).T
        tan_h = math.tan(cfg.det_h_fov / 2.0)
        tan_v = math.tan(cfg.det_v_fov / 2.0)
        out = []
        for k, cargo in enumerate(cfg.cargoes):
            cam = R_w_b @ (np.asarray(cargo.position) - state.uav_pos)
            if cfg.det_pos_noise > 0.0:
                cam = cam + cfg.det_pos_noise * self.rng.standard_normal(3)
            z = cam[2]
            if z >= -cfg.det_focal:
                continue
            depth = -z
            if depth < cfg.det_min_height:
                continue  # cargo fills the field of view
            if abs(cam[0]) > tan_h * depth or abs(cam[1]) > tan_v * depth:
                continue
            if cfg.det_dropout > 0.0 and self.rng.random() < cfg.det_dropout:
                continue
            d_img = -cfg.det_focal * cargo.top_diagonal / (z + cfg.det_focal)
            cx = cam[0] * d_img / cargo.top_diagonal
            cy = cam[1] * d_img / cargo.top_diagonal
            conf = cfg.det_conf_base + cfg.det_conf_jitter * \
                (2.0 * self.rng.random() - 1.0)
            yaw = wrap_angle(cargo.yaw - state.uav_euler.yaw)
            if cfg.det_yaw_noise > 0.0:
                yaw = wrap_angle(yaw + cfg.det_yaw_noise * self.rng.standard_normal())
            out.append(DetectionObservation(
                class_id=k, confidence=min(1.0, max(0.0, conf)),
                image_center=(cx, cy), box_diagonal=d_img, timestamp=state.t,
                box_yaw=yaw))
        return out

    def attach_cargo(self, state: SimState, index: int = 0) -> SimState:
        return replace(state, attached_mass=self.cfg.cargoes[index].mass)

    def set_on_ground(self, state: SimState, value: bool) -> SimState:
        return replace(state, on_ground=value,
                       uav_vel=np.zeros(3) if value else state.uav_vel)
