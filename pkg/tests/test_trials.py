import pytest

from oracle_agents import GeometricCoarseAgent
from pegsim.metrics import TrialMode
from pegsim.sim_env import EnvConfig
from pegsim.trials import ReplayMismatchError, replay_trial, run_trial

CFG = EnvConfig()


@pytest.fixture(scope="module")
def manual_result():
    return run_trial(TrialMode.MANUAL, seed=5, env_config=CFG)


@pytest.fixture(scope="module")
def semi_result():
    return run_trial(TrialMode.SEMI_AUTONOMOUS, seed=5, env_config=CFG,
                     agent=GeometricCoarseAgent(CFG))


def test_both_modes_complete(manual_result, semi_result):
    assert manual_result.completed and semi_result.completed
    assert len(manual_result.record.leg_markers) == 9
    assert len(semi_result.record.leg_markers) == 9


def test_semi_travel_shorter(manual_result, semi_result):
    assert semi_result.travel_mm < manual_result.travel_mm


def test_run_trial_is_deterministic():
    a = run_trial(TrialMode.MANUAL, seed=17, env_config=CFG)
    b = run_trial(TrialMode.MANUAL, seed=17, env_config=CFG)
    assert a.log_lines == b.log_lines
    assert a.travel_mm == b.travel_mm


def test_semi_requires_agent():
    with pytest.raises(ValueError):
        run_trial(TrialMode.SEMI_AUTONOMOUS, seed=1, env_config=CFG)


def test_replay_reproduces_metrics(manual_result, semi_result):
    for result in (manual_result, semi_result):
        replayed = replay_trial(result.log_lines, CFG)
        assert replayed.travel_mm == result.travel_mm
        assert replayed.duration_s == result.duration_s
        assert replayed.completed


def test_replay_detects_tampered_input(manual_result):
    lines = list(manual_result.log_lines)
    idx = next(i for i, l in enumerate(lines)
               if " kind=manual " in l and "dx=2.0" in l)
    lines[idx] = lines[idx].replace("dx=2.0", "dx=1.0", 1)
    with pytest.raises(ReplayMismatchError):
        replay_trial(lines, CFG)


def test_replay_detects_tampered_summary(manual_result):
    lines = list(manual_result.log_lines)
    assert lines[-1].startswith("summary")
    import re
    lines[-1] = re.sub(r"m_mm=\S+", "m_mm=123.0", lines[-1])
    with pytest.raises(ReplayMismatchError, match="travel length"):
        replay_trial(lines, CFG)


def test_replay_detects_tampered_pose(manual_result):
    lines = list(manual_result.log_lines)
    idx = next(i for i, l in enumerate(lines) if " kind=manual " in l)
    import re
    lines[idx] = re.sub(r" x=\S+", " x=999.0", lines[idx], count=1)
    with pytest.raises(ReplayMismatchError):
        replay_trial(lines, CFG)


def test_replay_rejects_wrong_version(manual_result):
    lines = list(manual_result.log_lines)
    lines[0] = lines[0].replace("version=1", "version=9")
    with pytest.raises(ReplayMismatchError, match="version"):
        replay_trial(lines, CFG)


def test_samples_only_from_manual_segments(semi_result):
    # Coarse-phase ticks contribute no samples: every sample belongs to a
    # manual segment, and segments are contiguous in time.
    segments = {}
    for s in semi_result.record.samples:
        segments.setdefault(s.segment, []).append(s.t_ms)
    for times in segments.values():
        assert times == sorted(times)
    auto_lines = [l for l in semi_result.log_lines if " kind=auto " in l]
    assert auto_lines, "semi trial must contain autonomous motion"
    assert len(semi_result.record.samples) < semi_result.ticks
