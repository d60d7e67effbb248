"""Smoke test for the mechrl extension module.

Build and install with `pip install --no-build-isolation ./crates/py`
(maturin), then run `python crates/py/python/smoke_test.py`.
"""

import json
import math
import random

import mechrl


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def main():
    assert mechrl.ACTION_COUNT == 12
    assert mechrl.code_of(mechrl.action_of("FB")) == "FB"
    assert close(mechrl.latch_reward(2.839, 0.003), 28.39, 0.005)
    assert close(mechrl.gripper_reward(math.radians(46.9), 3), 10.24, 0.01)

    toy = mechrl.Scenario.builtin("toy-latch")
    assert toy.horizon == 9
    assert mechrl.Scenario.from_json(toy.to_json()).name == toy.name

    env = mechrl.Env(toy)
    obs = env.reset()
    assert len(obs) == env.observation_size == 9 * 13
    rng = random.Random(0)
    done, reward = False, 0.0
    while not done:
        obs, reward, done = env.step(rng.randrange(12))
    slots = env.slot_actions()
    direct = toy.evaluate(slots)
    assert direct.reward == reward == env.evaluation().reward, (direct, reward)

    rows = mechrl.cell_load_tests("SP")
    assert [r["load"] for r in rows] == ["F1", "F2"]
    assert len(mechrl.cell_load_tests("FD")) == 3

    base = mechrl.run_baseline(toy, "random", 50, 1)
    assert base["max"] == max(base["rewards"])
    assert toy.evaluate(base["best_actions"]).reward == base["max"]

    config = {"episodes": 20, "batch_size": 8, "trunk": [16, 16], "head_hidden": 8, "seed": 2}
    run = mechrl.train(toy, json.dumps(config))
    assert len(run["rewards"]) == 20
    assert run["best_reward"] == max(run["rewards"])
    again = mechrl.train(toy, json.dumps(config))
    assert again["rewards"] == run["rewards"]

    svg = toy.render(run["best_actions"]) if not toy.evaluate(run["best_actions"]).singular else toy.render([11] * 9)
    assert svg.count("<polyline") > 0
    print("mechrl smoke test passed")


if __name__ == "__main__":
    main()
