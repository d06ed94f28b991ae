"""Shared fixtures and forward-model oracles used across the test suite."""

import math
from dataclasses import replace

import numpy as np
import pytest

from cargosim.frames import EulerAngles, rotation_from_euler, wrap_angle
from cargosim.qr_localization import QrObservation
from cargosim.sim_world import ScenarioConfig


def calm_scenario(**overrides) -> ScenarioConfig:
    """Default scenario with every noise source and the wind switched off."""
    base = dict(
        qr_image_noise=0.0, qr_yaw_noise=0.0, qr_dropout=0.0,
        det_pos_noise=0.0, det_yaw_noise=0.0, det_dropout=0.0,
        wind_mean=(0.0, 0.0), wind_sigma=0.0, sigma_uwb=0.0,
        rotor_noise=0.0,
        platform_roll_amp=0.0, platform_pitch_amp=0.0,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def project_marker(marker, uav_pos, uav_euler: EulerAngles,
                   platform_attitude: EulerAngles, focal: float) -> QrObservation:
    """Independent noiseless pinhole projection of one panel marker.

    Written directly from the geometry (marker world position through the
    camera rotation, similar-triangles scaling) so the estimator tests do
    not reuse the code under test.
    """
    R_a_w = rotation_from_euler(platform_attitude)
    R_w_b = rotation_from_euler(uav_euler).T
    panel = np.array([marker.panel_xy[0], marker.panel_xy[1], 0.0])
    cam = R_w_b @ (R_a_w @ panel - np.asarray(uav_pos, dtype=float))
    assert cam[2] < -focal, "marker must be below the camera"
    d_img = -focal * marker.diagonal / (cam[2] + focal)
    scale = d_img / marker.diagonal
    image_yaw = wrap_angle(platform_attitude.yaw - uav_euler.yaw - math.pi)
    return QrObservation(label=marker.label, image_diagonal=d_img,
                         image_center=(cam[0] * scale, cam[1] * scale),
                         image_yaw=image_yaw, focal_length=focal)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
