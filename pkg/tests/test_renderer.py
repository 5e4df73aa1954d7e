import numpy as np
import pytest

from pegsim.renderer import (
    Frame,
    FrameStack,
    RenderConfig,
    feature_observation,
    init_stack,
    push_frame,
    render,
    to_input,
    write_pgm,
)
from pegsim.sim_env import EnvConfig, Peg, SceneState

RC = RenderConfig()
CFG = EnvConfig()


def scene(gx=20.0, gy=20.0, roll=0.0, pegs=None, target=0):
    if pegs is None:
        pegs = (Peg(id=0, x=80.0, y=60.0),)
    return SceneState(
        gripper_x=gx, gripper_y=gy, gripper_z=10.0, gripper_roll=roll,
        jaws_closed=False, pegs=pegs, target_index=target, held_peg=None,
        tick=0, seed=0,
    )


def test_render_background_only():
    # Gripper parked outside the roi contributes nothing.
    rc = RenderConfig(roi_x_min=60.0, roi_x_max=100.0, roi_y_min=40.0, roi_y_max=80.0)
    s = scene(gx=10.0, gy=10.0, pegs=(Peg(id=0, x=10.0, y=100.0),))
    frame = render(s, rc)
    assert frame.pixels.max() == rc.background


def test_render_target_at_centre():
    s = scene(pegs=(Peg(id=0, x=80.0, y=60.0),))
    frame = render(s, RC)
    assert frame.pixels[RC.height // 2, RC.width // 2] == RC.target_intensity


def test_render_distinguishes_target_from_distractor():
    pegs = (Peg(id=0, x=40.0, y=60.0), Peg(id=1, x=120.0, y=60.0))
    frame = render(scene(pegs=pegs, target=1), RC)
    assert RC.peg_intensity in frame.pixels
    assert RC.target_intensity in frame.pixels


def test_render_deterministic():
    s = scene()
    a = render(s, RC)
    b = render(s, RC)
    assert np.array_equal(a.pixels, b.pixels)


def test_render_gripper_glyph_present():
    frame = render(scene(gx=80.0, gy=30.0), RC)
    assert (frame.pixels == RC.gripper_intensity).sum() > 0


def test_peg_outside_roi_contributes_no_pixels():
    rc = RenderConfig(roi_x_min=0.0, roi_x_max=60.0, roi_y_min=0.0, roi_y_max=60.0)
    frame = render(scene(gx=30.0, gy=30.0, pegs=(Peg(id=0, x=120.0, y=100.0),)), rc)
    assert RC.target_intensity not in frame.pixels


def test_rejects_zero_area_roi():
    with pytest.raises(ValueError):
        RenderConfig(roi_x_min=10.0, roi_x_max=10.0)


def _flat(value, w=4, h=4):
    return Frame(width=w, height=h, pixels=np.full((h, w), value, dtype=np.uint8))


def test_push_frame_fifo():
    a, b, c, d, e = (_flat(v) for v in (1, 2, 3, 4, 5))
    stack = FrameStack(frames=(a, b, c, d))
    out = push_frame(stack, e)
    assert out.frames == (b, c, d, e)


def test_init_stack_replicates():
    f = _flat(9)
    stack = init_stack(f)
    assert stack.frames == (f, f, f, f)


def test_full_turnover():
    stack = init_stack(_flat(0))
    pushed = [_flat(v) for v in (10, 20, 30, 40)]
    for f in pushed:
        stack = push_frame(stack, f)
    assert list(stack.frames) == pushed


def test_push_frame_dimension_mismatch():
    stack = init_stack(_flat(1))
    with pytest.raises(ValueError):
        push_frame(stack, _flat(1, w=8, h=8))


def test_to_input_scaling_and_order():
    zeros = _flat(0)
    stack = init_stack(zeros)
    assert to_input(stack).sum() == 0.0

    px = np.zeros((4, 4), dtype=np.uint8)
    px[2, 1] = 255
    bright = Frame(width=4, height=4, pixels=px)
    stack = push_frame(stack, bright)
    tensor = to_input(stack)
    assert tensor.shape == (4, 4, 4)
    assert tensor[3, 2, 1] == 1.0
    assert tensor[0, 2, 1] == 0.0


def test_feature_observation_matches_scene_geometry():
    s = scene(gx=20.0, gy=60.0, roll=0.2, pegs=(Peg(id=0, x=80.0, y=60.0),))
    obs = feature_observation(s, CFG)
    assert obs.shape == (8,)
    assert obs[0] == pytest.approx(0.6)   # offset x
    assert obs[1] == pytest.approx(0.0)   # offset y
    assert obs[2] == pytest.approx(1.0)   # unit bearing x
    assert obs[3] == pytest.approx(0.0)   # unit bearing y
    assert obs[4] == pytest.approx(0.6)   # distance
    # Gripper left of an axis-aligned square: signed error equals the roll.
    assert obs[5] == pytest.approx(0.2 / (np.pi / 4.0), rel=1e-6)


def test_write_pgm_round_trip(tmp_path):
    frame = render(scene(), RC)
    path = tmp_path / "tick_000.pgm"
    write_pgm(frame, str(path))
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n84 84\n255\n")
    body = raw.split(b"255\n", 1)[1]
    assert np.array_equal(
        np.frombuffer(body, dtype=np.uint8).reshape(84, 84), frame.pixels
    )
