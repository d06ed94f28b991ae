"""Closed-loop mission execution, logging, metrics and Monte-Carlo fan-out.

Wires the simulated world, the hybrid localization stack, the perception
track, the mission executive and the PID controller into one 50 Hz loop,
logging a per-tick trajectory record and producing a machine-readable
run summary.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import control, hybrid_localizer, uwb_localization
from .control import ControllerState, VelocityLimits, pid_step
from .frames import (rotation_from_euler, rotation_from_rpy, wrap_angle,
                     yaw_rotation)
from .mission import (MissionConfig, MissionExecutive, MissionPhase, TickInputs)
from .perception import (CargoTrack, PerceptionParams, cargo_position_from_detection,
                         smooth_track, wavegate_select)
from .qr_localization import NoFix, estimate_pose
from .sim_world import ScenarioConfig, SimWorld

LOG_SCHEMA = "cargosim-log-v1"
LOG_COLUMNS = [
    "t", "phase", "true_x", "true_y", "true_z", "true_yaw",
    "est_x", "est_y", "est_z", "est_yaw", "source",
    "cargo_bx", "cargo_by", "cargo_bz",
    "cmd_vx", "cmd_vy", "cmd_vz", "cmd_yaw_rate", "rotor_sum_sq", "events",
]


@dataclass
class RunSummary:
    """Per-run outcome: phase timing, landing accuracy, attach result."""

    final_phase: str = "aborted"
    abort_reason: str | None = None
    phase_durations: dict = field(default_factory=dict)
    landing_error: float = float("nan")  # true horizontal error vs cargo center, m
    attach_success: bool = False
    rmse: dict = field(default_factory=dict)  # source -> [ex, ey, ez]
    source_switches: int = 0
    total_time: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "final_phase": self.final_phase,
            "abort_reason": self.abort_reason,
            "phase_durations": self.phase_durations,
            "landing_error": self.landing_error,
            "attach_success": self.attach_success,
            "rmse": self.rmse,
            "source_switches": self.source_switches,
            "total_time": self.total_time,
            "seed": self.seed,
        }


def run_mission(scenario: ScenarioConfig, mission: MissionConfig,
                seed: int | None = None, max_time: float = 600.0,
                dt: float = 0.02) -> tuple[RunSummary, list[list]]:
    """Execute one full mission; returns (summary, trajectory records)."""
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    world = SimWorld(scenario)
    state = world.initial_state()

    markers = {m.label: m for m in scenario.qr_markers}
    anchors = uwb_localization.AnchorSet(scenario.anchors)
    ekf_params = uwb_localization.EkfParams(
        sigma_range=max(scenario.sigma_uwb, 1e-4), period=dt)
    label_filters: list = [None, None]
    yaw_est = 0.0  # calibration value before the first dual-label solution

    hybrid_state = hybrid_localizer.HybridState()
    perception = PerceptionParams(frame_period=dt)
    track = CargoTrack()
    executive = MissionExecutive(mission, scenario)
    ctrl = ControllerState()
    limits = VelocityLimits(vertical=mission.vertical_limit)
    prev_gains = None

    records: list[list] = []
    errors_by_source: dict[str, list[np.ndarray]] = {"qr": [], "uwb": []}
    phase_durations: dict[str, float] = {}
    landing_error = float("nan")
    cargo = scenario.cargoes[0]
    cargo_top = cargo.position[2]
    deck = scenario.deck_center

    n_steps = int(round(max_time / dt))
    for _ in range(n_steps):
        a_body, roll, pitch = world.sense_imu(state)
        R_a_w = rotation_from_euler(state.platform_attitude)
        R_b_w = rotation_from_rpy(roll, pitch, yaw_est)

        # --- ranging localization -----------------------------------
        ranges = world.sense_uwb(state)
        per_label: list[list[tuple[int, float]]] = [[], []]
        for i, j, d in ranges:
            per_label[i].append((j, d))
        for i in (0, 1):
            if label_filters[i] is None:
                pos = uwb_localization.multilaterate(per_label[i], anchors)
                label_filters[i] = uwb_localization.initial_state(pos, state.t)
            else:
                s = uwb_localization.ekf_predict(
                    label_filters[i], a_body, R_b_w, R_a_w.T, ekf_params)
                label_filters[i] = uwb_localization.ekf_update(
                    s, per_label[i], anchors, ekf_params)

        u1w = R_a_w @ label_filters[0].position
        u2w = R_a_w @ label_filters[1].position
        try:
            yaw_est = uwb_localization.yaw_from_labels(
                u1w, u2w, roll, pitch, scenario.label_baseline)
        except uwb_localization.BaselineGateError:
            pass  # hold the last valid heading
        uwb_pose = uwb_localization.fuse_labels(
            label_filters[0], label_filters[1], R_a_w, period=dt)
        uwb_pose = replace(uwb_pose, yaw=yaw_est)

        # --- marker localization ------------------------------------
        qr_pose = None
        obs = world.sense_qr(state)
        if obs:
            try:
                qr_pose = estimate_pose(obs, markers, state.platform_attitude,
                                        (roll, pitch), timestamp=state.t)
            except NoFix:
                qr_pose = None

        est, hybrid_state, hybrid_events = hybrid_localizer.arbitrate(
            qr_pose, uwb_pose, hybrid_state)

        truth = state.uav_pos
        errors_by_source[est.source].append(est.position - truth)

        # --- perception ---------------------------------------------
        candidates = world.sense_cargo(state)
        track = wavegate_select(candidates, track, perception)
        if track.selected is not None:
            pos_cam = cargo_position_from_detection(
                track.selected, scenario.det_focal, cargo.top_diagonal)
            # de-rotate by the IMU roll/pitch: without this the vehicle's
            # own tilt shifts the apparent target the same way the command
            # pushes, a positive feedback that never converges
            pos_b = rotation_from_rpy(roll, pitch, 0.0) @ pos_cam
            track = smooth_track(track, pos_b, perception)

        # --- mission + control --------------------------------------
        cmd = executive.tick(TickInputs(t=state.t, estimate=est, track=track,
                                        rotor_speeds=state.rotor_speeds,
                                        on_ground=state.on_ground))
        if cmd.gains is not prev_gains:
            ctrl.reset_derivative()
            prev_gains = cmd.gains

        if cmd.mode == "velocity":
            v = np.clip(cmd.velocity,
                        [-limits.horizontal, -limits.horizontal,
                         -limits.vertical, -limits.yaw_rate],
                        [limits.horizontal, limits.horizontal,
                         limits.vertical, limits.yaw_rate])
            vel_cmd = control.VelocityCommand(v[0], v[1], v[2], v[3],
                                              timestamp=state.t)
        else:
            if cmd.mode == "world":
                # the velocity interface is yaw-aligned and horizontal, so
                # tilt must not leak altitude error into the x/y channels
                e_b = control.position_error_body(cmd.setpoint, est.position,
                                                  yaw_rotation(est.yaw).T)
                yaw_e = wrap_angle(cmd.yaw_setpoint - est.yaw)
                ff = None
            else:  # body: visual servoing
                e_b = cmd.body_error
                yaw_e = cmd.body_yaw_error
                ff = cmd.feedforward
            errors = {"x": e_b[0], "y": e_b[1], "z": e_b[2], "yaw": yaw_e}
            vel_cmd, ctrl = pid_step(cmd.gains, errors, ctrl, dt, state.t,
                                     limits=limits, feedforward=ff)

        if cmd.do_adsorb:
            if world.rng.random() < mission.adsorb_success_prob:
                state = world.attach_cargo(state)

        state = world.step(state, vel_cmd.as_array(), dt)

        # --- ground contact -----------------------------------------
        support = _support_height(state.uav_pos, scenario, cargo_top)
        if not state.on_ground and state.uav_vel[2] <= 0.0 and \
                state.uav_pos[2] <= support + 0.02 and vel_cmd.vz <= 0.0:
            state = world.set_on_ground(state, True)
        if any(e == "phase:land->adsorb" for e in cmd.events) and \
                math.isnan(landing_error):
            landing_error = float(np.linalg.norm(
                state.uav_pos[:2] - np.asarray(cargo.position[:2])))

        events = list(hybrid_events) + list(cmd.events)
        c_b = track.position if track.position is not None else (
            float("nan"), float("nan"), float("nan"))
        records.append([
            round(state.t, 6), cmd.phase.value,
            truth[0], truth[1], truth[2], state.uav_euler.yaw,
            est.position[0], est.position[1], est.position[2], est.yaw,
            est.source, c_b[0], c_b[1], c_b[2],
            vel_cmd.vx, vel_cmd.vy, vel_cmd.vz, vel_cmd.yaw_rate,
            state.rotor_sum_sq, ";".join(events),
        ])

        phase_durations[cmd.phase.value] = \
            phase_durations.get(cmd.phase.value, 0.0) + dt
        if executive.phase in (MissionPhase.DONE, MissionPhase.ABORTED):
            break

    rmse = {}
    for source, errs in errors_by_source.items():
        if errs:
            arr = np.array(errs)
            rmse[source] = list(np.sqrt(np.mean(arr * arr, axis=0)))
    summary = RunSummary(
        final_phase=executive.phase.value,
        abort_reason=executive.abort_reason if
        executive.phase is MissionPhase.ABORTED else (
            None if executive.phase is MissionPhase.DONE else "timeout"),
        phase_durations=phase_durations,
        landing_error=landing_error,
        attach_success=bool(executive.attach_success),
        rmse=rmse,
        source_switches=hybrid_state.switch_count,
        total_time=state.t,
        seed=scenario.seed,
    )
    if summary.final_phase not in ("done", "aborted"):
        summary.final_phase = "aborted"
        summary.abort_reason = "timeout"
    return summary, records


def _support_height(pos: np.ndarray, scenario: ScenarioConfig,
                    cargo_top: float) -> float:
    cargo = scenario.cargoes[0]
    if math.hypot(pos[0] - cargo.position[0], pos[1] - cargo.position[1]) \
            <= cargo.top_diagonal / 2.0:
        return cargo_top
    dx = pos[0] - scenario.deck_center[0]
    dy = pos[1] - scenario.deck_center[1]
    if abs(dx) <= scenario.deck_size[0] / 2 and abs(dy) <= scenario.deck_size[1] / 2:
        return scenario.deck_height
    return 0.0


# --- logging ---------------------------------------------------------

def write_log(records: list[list], path) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# {LOG_SCHEMA}\n")
        writer = csv.writer(f)
        writer.writerow(LOG_COLUMNS)
        for row in records:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return v


def read_log(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as f:
        first = f.readline().strip()
        if first != f"# {LOG_SCHEMA}":
            raise ValueError(f"unknown log schema: {first!r}")
        reader = csv.reader(f)
        header = next(reader)
        return header, list(reader)


def metrics_from_log(path) -> dict:
    """Per-source RMSE vs ground truth plus marker-fix error by height bucket."""
    header, rows = read_log(path)
    idx = {name: k for k, name in enumerate(header)}
    by_source: dict[str, list] = {}
    qr_by_bucket: dict[int, list] = {}
    for row in rows:
        truth = np.array([float(row[idx["true_x"]]), float(row[idx["true_y"]]),
                          float(row[idx["true_z"]])])
        est = np.array([float(row[idx["est_x"]]), float(row[idx["est_y"]]),
                        float(row[idx["est_z"]])])
        source = row[idx["source"]]
        err = est - truth
        by_source.setdefault(source, []).append(err)
        if source == "qr":
            bucket = int(truth[2] // 1.0)
            qr_by_bucket.setdefault(bucket, []).append(float(np.linalg.norm(err)))
    out = {"rmse": {}, "qr_error_by_height": {}}
    for source, errs in by_source.items():
        arr = np.array(errs)
        out["rmse"][source] = list(np.sqrt(np.mean(arr * arr, axis=0)))
    for bucket in sorted(qr_by_bucket):
        vals = qr_by_bucket[bucket]
        out["qr_error_by_height"][f"{bucket}m-{bucket + 1}m"] = {
            "median": float(np.median(vals)), "count": len(vals)}
    return out


# --- Monte Carlo -----------------------------------------------------

def _run_one(args) -> dict:
    scenario, mission, seed = args
    summary, _ = run_mission(scenario, mission, seed=seed)
    return summary.to_dict()


def montecarlo(scenario: ScenarioConfig, mission: MissionConfig, runs: int,
               seed_base: int = 0, workers: int = 1) -> dict:
    """N independent seeded runs; aggregation is order-independent."""
    if runs < 1:
        raise ValueError("need at least one run")
    jobs = [(scenario, mission, seed_base + i) for i in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_one, jobs))
    else:
        summaries = [_run_one(j) for j in jobs]

    landing = np.array([s["landing_error"] for s in summaries])
    done = np.array([s["final_phase"] == "done" for s in summaries])
    ok = done & np.isfinite(landing)
    within = ok & (landing <= 0.15)
    finite = landing[np.isfinite(landing)]
    agg = {
        "runs": runs,
        "completed": int(done.sum()),
        "landing_within_15cm_rate": float(within.sum() / runs),
        "landing_error_quantiles": {
            q: (float(np.quantile(finite, float(q))) if finite.size else None)
            for q in ("0.5", "0.9", "0.95")},
        "summaries": summaries,
    }
    return agg
