use std::ffi::CString;

use mechrl::mechrl;
use pyo3::prelude::*;

fn run(code: &str) -> PyResult<()> {
    let code = CString::new(code).unwrap();
    Python::attach(|py| py.run(&code, None, None))
}

fn init() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        pyo3::append_to_inittab!(mechrl);
        Python::initialize();
    });
}

#[test]
fn scenario_env_and_rewards_from_python() {
    init();
    run(r#"
import mechrl
toy = mechrl.Scenario.builtin("toy-latch")
assert toy.horizon == 9
env = mechrl.Env(toy)
obs = env.reset()
assert len(obs) == env.observation_size
done, total = False, 0.0
for a in range(9):
    obs, r, done = env.step(a % mechrl.ACTION_COUNT)
    total += r
assert done
ev = env.evaluation()
assert ev.reward == total
assert toy.evaluate(env.slot_actions()).reward == ev.reward
assert abs(mechrl.latch_reward(ev.ux, ev.uy) - ev.reward) <= 1e-12 * max(1.0, abs(ev.reward))
"#)
    .unwrap();
}

#[test]
fn errors_map_to_python_exceptions() {
    init();
    run(r#"
import mechrl
for bad, exc in [(lambda: mechrl.action_of("XX"), ValueError),
                 (lambda: mechrl.Scenario.builtin("nope"), ValueError),
                 (lambda: mechrl.run_baseline(mechrl.Scenario.builtin("toy-latch"), n=0), ValueError)]:
    try:
        bad()
    except exc:
        pass
    else:
        raise AssertionError("no exception")
"#)
    .unwrap();
}

#[test]
fn training_runs_and_is_seeded() {
    init();
    run(r#"
import json, mechrl
toy = mechrl.Scenario.builtin("toy-latch")
cfg = json.dumps({"episodes": 6, "batch_size": 4, "trunk": [8], "head_hidden": 4, "seed": 3})
a, b = mechrl.train(toy, cfg), mechrl.train(toy, cfg)
assert a["rewards"] == b["rewards"] and len(a["rewards"]) == 6
assert a["best_reward"] == max(a["rewards"])
"#)
    .unwrap();
}
