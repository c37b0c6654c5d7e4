import json
from pathlib import Path

import pytest

import vilas

FROZEN = json.loads((Path(__file__).resolve().parents[1] / "oracles" / "frozen.json").read_text())


@pytest.mark.parametrize("key", sorted(FROZEN["per_step_display_ms"]))
def test_per_step_display(key):
    mean, horizon = key.split("/")
    stats = vilas.latency_stats([float(mean)] * 5, int(horizon))
    assert vilas.format_ms(stats["per_step_ms"]) == FROZEN["per_step_display_ms"][key] + " ms"
    assert stats["per_step_ms"] * int(horizon) == pytest.approx(stats["mean_ms"], abs=1e-12)


def test_fixture_rates():
    outcomes = [[True] * 3] * 29 + [[True, False, True]] * 6 + [[False, False, True]] * 6 + [[False] * 3] * 9
    r = vilas.success_rates(outcomes, any2=True)
    assert r["single"] == FROZEN["fixture"]["single"]
    assert r["multi"] == FROZEN["fixture"]["multi"]
    assert r["multi_any2"] == FROZEN["fixture"]["multi_any2"]
    assert vilas.multi_success([True, False, True]) is FROZEN["fixture"]["t_f_t_multi"]
    assert vilas.multi_success([True, False, True], any2=True)


def test_aborted_trials_are_excluded():
    r = vilas.success_rates([[True, True, False], [False] * 3], aborted=[False, True])
    assert r["trials_used"] == 1
    assert r["single"] == 1.0
    with pytest.raises(vilas.VilasError):
        vilas.success_rates([[True]], aborted=[True])


def test_oracle_trial_over_both_protocols():
    ws = vilas.run_trial("oracle", seed=11, protocol="ws")
    mq = vilas.run_trial("oracle", seed=11, protocol="mq")
    assert ws["attempt_outcomes"] == mq["attempt_outcomes"] == [True, True, True]
    assert ws["sim_time_s"] == mq["sim_time_s"]


def test_forward_kinematics_home():
    x, y, z, yaw = vilas.forward_kinematics([0.0, 1.0551166348190384, -1.7998865251343823, -0.8260264364795524, 0, 0])
    assert (x, y, z) == pytest.approx((0.5, 0.0, 0.0), abs=1e-9)
