"""Horn-Schunck flow against synthetic-shift oracles."""
from __future__ import annotations

import numpy as np
import pytest

from glpworld.optflow import flow_derivatives, horn_schunck, to_luma


def smooth_image(h: int = 32, w: int = 32, phase: float = 0.0) -> np.ndarray:
    """Low-frequency luma pattern (0..255 scale) shiftable by phase."""
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    z = (
        0.5
        + 0.25 * np.sin(2 * np.pi * (xs - phase) / 16.0)
        + 0.2 * np.cos(2 * np.pi * ys / 20.0 + 0.7)
    )
    return (z * 255.0).astype(np.float32)


def shifted_pair(px: float) -> tuple[np.ndarray, np.ndarray]:
    """f2 is f1 with content moved +x by px pixels (sampled, not rolled)."""
    return smooth_image(phase=0.0), smooth_image(phase=px)


def pan_image(h: int = 32, w: int = 32, phase: float = 0.0) -> np.ndarray:
    """Translating ramp: every 1-px step presents the solver identical data."""
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    z = 4.0 * (xs - phase) + 20.0 * np.cos(2 * np.pi * ys / 20.0) + 120.0
    return z.astype(np.float32)


def test_identical_frames_give_exact_zero_flow():
    f = smooth_image()
    u, v = horn_schunck(f, f)
    assert np.all(u == 0.0) and np.all(v == 0.0)


def test_one_px_shift_recovered():
    f1, f2 = shifted_pair(1.0)
    u, v = horn_schunck(f1, f2)
    inner = np.s_[4:-4, 4:-4]  # edges lack neighbors and derivative support
    assert abs(float(np.mean(u[inner])) - 1.0) < 0.25
    assert abs(float(np.mean(v[inner]))) < 0.25


def test_two_px_shift_roughly_doubles_flow():
    f1a, f2a = shifted_pair(1.0)
    f1b, f2b = shifted_pair(2.0)
    inner = np.s_[4:-4, 4:-4]
    u1, _ = horn_schunck(f1a, f2a)
    u2, _ = horn_schunck(f1b, f2b)
    ratio = float(np.mean(u2[inner])) / float(np.mean(u1[inner]))
    assert 1.5 < ratio < 2.5


def test_transpose_symmetry():
    f1, f2 = shifted_pair(1.0)
    u, v = horn_schunck(f1, f2)
    ut, vt = horn_schunck(f1.T, f2.T)
    assert np.allclose(ut, v.T, atol=1e-6)
    assert np.allclose(vt, u.T, atol=1e-6)


def test_shape_mismatch_raises():
    with pytest.raises(ValueError, match="mismatch"):
        horn_schunck(np.zeros((8, 8)), np.zeros((8, 9)))


def test_rgb_input_accepted_via_luma():
    f = np.stack([smooth_image()] * 3, axis=-1) / 255.0  # [0,1] RGB convention
    u, v = horn_schunck(f, f)
    assert u.shape == (32, 32)
    assert to_luma(f).shape == (32, 32)
    assert to_luma(f).max() > 100.0  # rescaled to the 0..255 luma range


def test_flow_derivatives_static_video_all_zero():
    frames = np.stack([smooth_image()] * 5)
    d = flow_derivatives(frames)
    assert np.all(d["speeds"] == 0.0) and np.all(d["accelerations"] == 0.0)


def test_constant_pan_has_near_zero_acceleration():
    frames = np.stack([pan_image(phase=t * 1.0) for t in range(5)])
    d = flow_derivatives(frames)
    assert float(d["accelerations"].max()) < 0.05
    assert float(d["speeds"].mean()) > 0.5


def test_reversal_pan_spikes_acceleration_at_turn():
    phases = [0.0, 1.0, 2.0, 3.0, 2.0, 1.0, 0.0]  # reverses after index 3
    frames = np.stack([pan_image(phase=p) for p in phases])
    d = flow_derivatives(frames)
    # flows: 0..5; accelerations: 0..4; the velocity sign flips between
    # flow 2 (2->3) and flow 3 (3->2), i.e. acceleration index 2
    assert int(np.argmax(d["accelerations"])) == 2


def test_too_few_frames_raises():
    with pytest.raises(ValueError, match="at least 3"):
        flow_derivatives(np.zeros((2, 8, 8)))
