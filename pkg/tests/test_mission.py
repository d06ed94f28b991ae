import math

import numpy as np
import pytest

from cargosim.mission import (MissionConfig, MissionExecutive, MissionPhase,
                              RotorTelemetry, TickInputs, attachment_check)
from cargosim.perception import CargoTrack
from cargosim.qr_localization import PoseEstimate

from conftest import calm_scenario


def _telemetry(mass):
    return RotorTelemetry(speeds=np.full(4, math.sqrt(mass * 9.81 / 4.0)))


def _est(x, y, z, yaw=0.0):
    return PoseEstimate(position=np.array([x, y, z], dtype=float), yaw=yaw,
                        source="uwb", timestamp=0.0)


def _inputs(t, est, track=None, rotors=None, on_ground=False):
    return TickInputs(t=t, estimate=est,
                      track=track if track is not None else CargoTrack(),
                      rotor_speeds=rotors if rotors is not None
                      else np.full(4, 100.0),
                      on_ground=on_ground)


# --- attachment determination ---------------------------------------

def test_attachment_identical_telemetry_false():
    t = _telemetry(7.9)
    assert attachment_check(t, t, 0.05) is False


def test_attachment_mass_ratio_example():
    pre, post = _telemetry(7.9), _telemetry(8.79)
    assert post.sum_sq / pre.sum_sq == pytest.approx(8.79 / 7.9, rel=1e-9)
    assert attachment_check(pre, post, 0.05) is True
    assert attachment_check(pre, post, 0.20) is False


def test_attachment_rejects_empty_pre_window():
    with pytest.raises(ValueError):
        attachment_check(RotorTelemetry(speeds=np.zeros(4)), _telemetry(8.0),
                         0.05)


def test_mission_config_validation():
    with pytest.raises(ValueError):
        MissionConfig(attach_delta=0.0)
    with pytest.raises(ValueError):
        MissionConfig(hover_window=-1.0)


# --- phase sequencing ------------------------------------------------

def _executive(**mission_overrides):
    return MissionExecutive(MissionConfig(**mission_overrides), calm_scenario())


def test_takeoff_holds_pad_position_laterally():
    ex = _executive()
    cmd = ex.tick(_inputs(0.0, _est(1.0, 2.0, 0.5)))
    assert cmd.phase is MissionPhase.TAKEOFF
    assert cmd.mode == "world"
    np.testing.assert_allclose(cmd.setpoint[:2], [1.0, 2.0])
    assert cmd.setpoint[2] == pytest.approx(6.0)


def test_takeoff_transitions_to_search_at_altitude():
    ex = _executive()
    cmd = ex.tick(_inputs(10.0, _est(1.0, 2.0, 5.95)))
    assert any(e == "phase:takeoff->search" for e in cmd.events)
    assert ex.phase is MissionPhase.SEARCH
    assert ex.path is not None


def test_search_advances_waypoints_and_replans_lower():
    ex = _executive()
    ex.phase = MissionPhase.SEARCH
    ex._plan()
    assert len(ex.path.waypoints) == 1  # replica deck: single waypoint
    wp = ex.path.waypoints[0]
    cmd = ex.tick(_inputs(20.0, _est(wp[0], wp[1], 6.0)))
    assert any(e.startswith("coverage_replan") for e in cmd.events)
    assert ex.search_altitude == pytest.approx(5.0)


def test_search_locks_only_overhead():
    ex = _executive()
    ex.phase = MissionPhase.SEARCH
    ex._plan()
    sideways = CargoTrack(locked=True)
    sideways.position = np.array([5.0, 0.0, -4.0])  # far off nadir
    cmd = ex.tick(_inputs(20.0, _est(4.0, 0.0, 6.0), track=sideways))
    assert ex.phase is MissionPhase.SEARCH

    overhead = CargoTrack(locked=True)
    overhead.position = np.array([0.2, 0.1, -4.0])
    cmd = ex.tick(_inputs(20.0, _est(8.0, 0.0, 6.0), track=overhead))
    assert ex.phase is MissionPhase.LAND
    assert any(e == "cargo_locked" for e in cmd.events)


def test_land_servo_descends_only_inside_funnel():
    ex = _executive()
    ex.phase = MissionPhase.LAND
    track = CargoTrack(locked=True)
    track.position = np.array([1.5, 0.0, -2.0])  # badly off to the side
    cmd = ex.tick(_inputs(30.0, _est(8.0, 0.0, 3.0), track=track))
    assert cmd.mode == "body"
    assert cmd.body_error[2] == 0.0  # no descent while misaligned
    track.position = np.array([0.05, 0.0, -2.0])
    cmd = ex.tick(_inputs(30.1, _est(8.0, 0.0, 3.0), track=track))
    assert cmd.body_error[2] < 0.0


def test_land_blind_descent_after_hold():
    ex = _executive()
    ex.phase = MissionPhase.LAND
    track = CargoTrack(locked=True)
    track.position = np.array([0.02, 0.01, -0.15])  # centered, near hover
    t = 40.0
    events = []
    for _ in range(120):  # 2.4 s > blind hold time
        cmd = ex.tick(_inputs(t, _est(8.0, 0.0, 1.25), track=track))
        events.extend(cmd.events)
        t += 0.02
    assert "blind_descent" in events
    assert ex.pre_telemetry is not None
    cmd = ex.tick(_inputs(t, _est(8.0, 0.0, 1.2), track=track))
    assert cmd.mode == "velocity"
    assert cmd.velocity[2] < 0.0


def test_land_touchdown_enters_adsorb_then_return():
    ex = _executive(adsorb_settle_time=0.5)
    ex.phase = MissionPhase.LAND
    ex._blind = True
    cmd = ex.tick(_inputs(50.0, _est(8.0, 0.0, 1.1), on_ground=True))
    assert ex.phase is MissionPhase.ADSORB
    t = 50.0
    while ex.phase is MissionPhase.ADSORB:
        t += 0.02
        cmd = ex.tick(_inputs(t, _est(8.0, 0.0, 1.1), on_ground=True))
    assert ex.phase is MissionPhase.RETURN
    assert cmd.do_adsorb


def test_lost_target_returns_to_search():
    ex = _executive()
    ex.phase = MissionPhase.LAND
    empty = CargoTrack()  # not locked
    t = 60.0
    events = []
    for _ in range(200):  # 4 s > reacquire time
        cmd = ex.tick(_inputs(t, _est(8.0, 0.0, 4.0), track=empty))
        events.extend(cmd.events)
        t += 0.02
    assert "target_lost" in events
    assert ex.phase is MissionPhase.SEARCH


def test_bounce_recovery_climbs_clear():
    ex = _executive()
    ex.phase = MissionPhase.LAND
    track = CargoTrack(locked=True)
    track.position = np.array([0.3, 0.0, -0.5])
    cmd = ex.tick(_inputs(70.0, _est(8.0, 0.3, 1.15), track=track,
                          on_ground=True))
    assert any(e == "land_bounce" for e in cmd.events)
    assert cmd.mode == "velocity" and cmd.velocity[2] > 0.0
    # stays in climb mode until clear of the cargo top
    cmd = ex.tick(_inputs(70.1, _est(8.0, 0.3, 1.3), track=track))
    assert cmd.mode == "velocity" and cmd.velocity[2] > 0.0
    cmd = ex.tick(_inputs(70.2, _est(8.0, 0.3, 1.8), track=track))
    assert cmd.mode == "body"  # back to servoing


def test_attach_failure_reenters_land_then_aborts():
    ex = _executive(max_attach_attempts=2, hover_window=0.1)
    ex.pre_telemetry = _telemetry(7.9)
    ex.phase = MissionPhase.RETURN
    ex._return_stage = "verify"
    ex._verify_since = 80.0
    ex.attach_attempts = 1
    hover = np.full(4, math.sqrt(7.9 * 9.81 / 4.0))  # unchanged: no cargo
    t = 80.0
    while ex.phase is MissionPhase.RETURN:
        t += 0.02
        cmd = ex.tick(_inputs(t, _est(8.0, 0.0, 2.6), rotors=hover))
    assert ex.phase is MissionPhase.LAND
    assert ex.attach_success is False

    # second failed verification exhausts the attempts
    ex.attach_attempts = 2
    ex.phase = MissionPhase.RETURN
    ex._return_stage = "verify"
    ex._verify_since = t
    ex._post_window = []
    while ex.phase is MissionPhase.RETURN:
        t += 0.02
        ex.tick(_inputs(t, _est(8.0, 0.0, 2.6), rotors=hover))
    assert ex.phase is MissionPhase.ABORTED
    assert ex.abort_reason == "attach_retries_exhausted"


def test_successful_verify_cruises_home_and_lands():
    ex = _executive(hover_window=0.1)
    ex.pre_telemetry = _telemetry(7.9)
    ex.phase = MissionPhase.RETURN
    ex._return_stage = "verify"
    ex._verify_since = 90.0
    loaded = np.full(4, math.sqrt(8.79 * 9.81 / 4.0))
    t = 90.0
    while ex._return_stage == "verify":
        t += 0.02
        ex.tick(_inputs(t, _est(8.0, 0.0, 2.6), rotors=loaded))
    assert ex.attach_success is True
    assert ex._return_stage == "cruise"
    cmd = ex.tick(_inputs(t, _est(1.1, 2.0, 6.0), rotors=loaded))
    assert ex._return_stage == "descend"
    cmd = ex.tick(_inputs(t, _est(1.0, 2.0, 0.05), rotors=loaded,
                          on_ground=True))
    assert ex.phase is MissionPhase.DONE
    assert any(e == "platform_landed" for e in cmd.events)


def test_geofence_breach_aborts_within_one_tick():
    ex = _executive()
    cmd = ex.tick(_inputs(0.0, _est(50.0, 0.0, 3.0)))
    assert ex.phase is MissionPhase.ABORTED
    assert ex.abort_reason == "geofence"
    assert cmd.mode == "velocity"
    np.testing.assert_array_equal(cmd.velocity, np.zeros(4))


def test_terminal_phases_hold_zero_velocity():
    ex = _executive()
    ex.phase = MissionPhase.DONE
    cmd = ex.tick(_inputs(0.0, _est(1.0, 2.0, 0.0)))
    assert cmd.phase is MissionPhase.DONE
    np.testing.assert_array_equal(cmd.velocity, np.zeros(4))
