use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mechrl_core::lattice::DesignFile;
use mechrl_core::mechanisms::{latch_reward, toy_latch, Scenario, LATCH_C};
use mechrl_core::CellKind;

fn mechrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechrl")).args(args).output().expect("spawn mechrl")
}

fn ok(args: &[&str]) -> String {
    let out = mechrl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn toy_design(dir: &Path, name: &str, codes: &[&str]) -> PathBuf {
    let scenario = toy_latch();
    let kinds: Vec<CellKind> = codes.iter().map(|c| c.parse().unwrap()).collect();
    let grid = scenario.design(&kinds).unwrap();
    let path = dir.join(name);
    DesignFile::new(grid, scenario.params).save(&path).unwrap();
    path
}

const SMALL: &str = r#"
scenario = "toy-latch"

[train]
episodes = 30
batch_size = 8
trunk = [16, 16]
head_hidden = 8
checkpoint_every = 10
"#;

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path
}

#[test]
fn characterize_writes_all_tables_idempotently() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cells");
    let report = ok(&["characterize", "--kinds", "all", "--out", s(&out)]);
    let mut names: Vec<String> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv")).count(), 12);
    assert!(names.contains(&"orderings.txt".to_string()));
    let sp = std::fs::read_to_string(out.join("SP.csv")).unwrap();
    assert!(sp.starts_with("load_case,ux,uy,abs_u\nF1,"));
    assert_eq!(sp.lines().count(), 3);
    assert_eq!(std::fs::read_to_string(out.join("FP.csv")).unwrap().lines().count(), 4);
    assert!(report.contains("HOLDS  SP >= 5x every reinforced square under F1"));

    let before: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(out.join(n)).unwrap()).collect();
    ok(&["characterize", "--out", s(&out)]);
    let after: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(out.join(n)).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn characterize_subset_and_bad_code() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["characterize", "--kinds", "SD,FB", "--out", s(dir.path())]);
    assert!(dir.path().join("SD.csv").exists() && dir.path().join("FB.csv").exists());
    assert!(!dir.path().join("orderings.txt").exists());
    assert_eq!(mechrl(&["characterize", "--kinds", "XX", "--out", s(dir.path())]).status.code(), Some(2));
}

#[test]
fn evaluate_is_repeatable_and_uses_the_reward_function() {
    let dir = tempfile::tempdir().unwrap();
    let design = toy_design(dir.path(), "d.json", &["SP", "SF", "SB", "SD", "FP", "FF", "FB", "FD", "BP"]);
    let args = ["evaluate", "--scenario", "toy-latch", "--design", s(&design)];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let v = json(&a);
    let reward = v["reward"].as_f64().unwrap();
    let expect = latch_reward(v["ux_mm"].as_f64().unwrap(), v["uy_mm"].as_f64().unwrap(), LATCH_C);
    assert_eq!(reward.to_bits(), expect.to_bits());
    assert!(v["area_density_percent"].as_f64().unwrap() > 0.0);
}

#[test]
fn evaluate_reports_dangling_hinges() {
    let dir = tempfile::tempdir().unwrap();
    let design = toy_design(dir.path(), "d.json", &[".", ".", "SD", ".", "FP", "SD", "SD", "SD", "SD"]);
    let v = json(&ok(&["evaluate", "--scenario", "toy-latch", "--design", s(&design)]));
    assert!(v["disconnections"].as_u64().unwrap() >= 1, "{v}");
}

#[test]
fn train_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["train", "--config", s(&cfg), "--seed", "7", "--out", s(&a)]);
    ok(&["train", "--config", s(&cfg), "--seed", "7", "--out", s(&b)]);
    let curve = std::fs::read(a.join("curve.csv")).unwrap();
    assert_eq!(curve, std::fs::read(b.join("curve.csv")).unwrap());
    let text = String::from_utf8(curve.clone()).unwrap();
    assert!(text.starts_with("episode,reward,moving_avg,epsilon,disconnections\n"));
    assert_eq!(text.lines().count(), 31);

    // best design re-evaluates to the recorded best reward
    let summary = json(&std::fs::read_to_string(a.join("summary.json")).unwrap());
    let eval = json(&ok(&["evaluate", "--scenario", s(&a.join("scenario.json")), "--design", s(&a.join("best_design.json"))]));
    assert_eq!(eval["reward"].as_f64().unwrap().to_bits(), summary["best_reward"].as_f64().unwrap().to_bits());
    let best_in_curve =
        text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best_in_curve.to_bits(), summary["best_reward"].as_f64().unwrap().to_bits());

    // a 20-episode run resumed to 30 matches the uninterrupted run
    let c = dir.path().join("c");
    ok(&["train", "--config", s(&cfg), "--seed", "7", "--episodes", "20", "--out", s(&c)]);
    ok(&["train", "--config", s(&cfg), "--seed", "7", "--resume", s(&c.join("checkpoint.bin")), "--out", s(&c)]);
    assert_eq!(std::fs::read(c.join("curve.csv")).unwrap(), curve);

    // the best-design snapshot parses and draws each element twice
    let svg = std::fs::read_to_string(a.join("best_design.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let design = DesignFile::load(&a.join("best_design.json")).unwrap();
    let analysis = Scenario::load(&a.join("scenario.json")).unwrap().analyse(&design.grid).unwrap();
    let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(lines, 2 * analysis.model.elements.len());
}

#[test]
fn resume_rejects_a_shorter_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("r");
    ok(&["train", "--config", s(&cfg), "--episodes", "12", "--out", s(&out)]);
    let r = mechrl(&["train", "--config", s(&cfg), "--episodes", "5", "--resume", s(&out.join("checkpoint.bin")), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn baseline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["baseline", "--scenario", "toy-latch", "--policy", "random", "-n", "25", "--seed", "3"];
    let a = json(&ok(&args));
    let b = json(&ok(&args));
    assert_eq!(a, b);
    let one = json(&ok(&["baseline", "--scenario", "toy-latch", "-n", "1", "--out", s(dir.path())]));
    assert_eq!(one["mean"], one["max"]);
    let rows = std::fs::read_to_string(dir.path().join("baseline_rewards.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);
    assert!(dir.path().join("baseline_best.json").exists());
}

#[test]
fn render_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let design = toy_design(dir.path(), "d.json", &["SD"; 9]);
    let file = dir.path().join("pic.svg");
    ok(&["render", "--scenario", "toy-latch", "--design", s(&design), "--out", s(&file)]);
    let svg = std::fs::read_to_string(&file).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert!(doc.descendants().any(|n| n.attribute("id") == Some("deformed")));
    assert!(svg.contains("deformation_scale"));
    let bare = ok(&["render", "--design", s(&design)]);
    assert!(!bare.contains("id=\"deformed\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "scenario = \"toy-latch\"\n[train]\nepisode = 3\n").unwrap();
    let r = mechrl(&["train", "--config", s(&bad), "--out", s(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));

    let missing = dir.path().join("missing.json");
    assert_eq!(mechrl(&["evaluate", "--scenario", "toy-latch", "--design", s(&missing)]).status.code(), Some(4));

    // an empty fill leaves the loaded latch floating
    let empty = dir.path().join("empty.json");
    let scenario = toy_latch();
    let grid = scenario.design(&[CellKind::Empty; 9]).unwrap();
    DesignFile::new(grid, scenario.params).save(&empty).unwrap();
    assert_eq!(mechrl(&["render", "--scenario", "toy-latch", "--design", s(&empty)]).status.code(), Some(3));
    let v = json(&ok(&["evaluate", "--scenario", "toy-latch", "--design", s(&empty)]));
    assert_eq!(v["singular"], true);
}
