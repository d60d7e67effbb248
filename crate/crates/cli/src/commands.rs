use std::path::{Path, PathBuf};
use std::sync::Arc;

use mechrl_core::agent::{write_curve_csv, Trainer};
use mechrl_core::baseline::{run_baseline, Policy};
use mechrl_core::cells::catalog;
use mechrl_core::env::{Env, EvalCache};
use mechrl_core::lattice::{area_density, assemble, DesignFile};
use mechrl_core::mechanisms::{cell_load_tests, unit_cell_orderings, Scenario};
use mechrl_core::render::{render_svg, RenderOptions};
use mechrl_core::{CellKind, CellParams, DesignGrid, Error, Material};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::Common;

fn experiment(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&common.config, &common.scenario) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(s)) => ExperimentConfig::for_scenario(s),
        (None, None) => return Err(Error::Config("pass --config or --scenario".into())),
    };
    if let (Some(_), Some(s)) = (&common.config, &common.scenario) {
        cfg.scenario = s.clone();
        cfg.base = None;
    }
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn required_out(out: Option<&PathBuf>) -> Result<PathBuf, Error> {
    let dir = out.cloned().ok_or_else(|| Error::Config("pass --out or set `out` in the config".into()))?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}

fn parse_kinds(spec: &str) -> Result<Vec<CellKind>, Error> {
    if spec == "all" {
        return Ok(catalog().to_vec());
    }
    spec.split(',')
        .map(|code| {
            let kind: CellKind = code.trim().parse()?;
            if !kind.is_action() {
                return Err(Error::NotPlaceable(kind));
            }
            Ok(kind)
        })
        .collect()
}

pub fn characterize(kinds: &str, common: &Common) -> Result<(), Error> {
    let params = match &common.config {
        Some(path) => ExperimentConfig::load(path)?.cell.unwrap_or_default(),
        None => CellParams::default(),
    };
    let kinds = parse_kinds(kinds)?;
    let dir = required_out(common.out.as_ref())?;
    for kind in &kinds {
        let mut csv = String::from("load_case,ux,uy,abs_u\n");
        for r in cell_load_tests(*kind, &params)? {
            csv.push_str(&format!("{},{},{},{}\n", r.load.name(), r.ux, r.uy, r.magnitude));
        }
        write(&dir.join(format!("{}.csv", kind.code())), csv)?;
    }
    if kinds.len() == catalog().len() {
        let mut report = String::new();
        for check in unit_cell_orderings(&params)? {
            let status = if check.holds { "HOLDS" } else { "FAILS" };
            report.push_str(&format!("{status}  {}  ({})\n", check.name, check.detail));
        }
        write(&dir.join("orderings.txt"), &report)?;
        print!("{report}");
    }
    println!("wrote {} cell tables to {}", kinds.len(), dir.display());
    Ok(())
}

#[derive(Serialize)]
struct EvaluationReport {
    scenario: String,
    reward: f64,
    ux_mm: f64,
    uy_mm: f64,
    theta_rad: f64,
    theta_deg: f64,
    disconnections: usize,
    area_density_percent: f64,
    singular: bool,
}

fn load_design(common: &Common) -> Result<DesignFile, Error> {
    let path = common.design.as_ref().ok_or_else(|| Error::Config("pass --design".into()))?;
    DesignFile::load(path)
}

fn evaluation_report(scenario: &Scenario, grid: &DesignGrid) -> Result<EvaluationReport, Error> {
    let e = scenario.evaluate(grid)?;
    Ok(EvaluationReport {
        scenario: scenario.name.clone(),
        reward: e.reward,
        ux_mm: e.ux,
        uy_mm: e.uy,
        theta_rad: e.theta,
        theta_deg: e.theta.to_degrees(),
        disconnections: e.disconnections,
        area_density_percent: area_density(grid, &scenario.params)?,
        singular: e.singular,
    })
}

/// The design file's cell parameters take precedence over the scenario's.
pub fn evaluate(common: &Common) -> Result<(), Error> {
    let design = load_design(common)?;
    let mut scenario = experiment(common)?.resolve_scenario()?;
    scenario.params = design.params;
    let report = json(&evaluation_report(&scenario, &design.grid)?);
    if let Some(dir) = &common.out {
        let dir = required_out(Some(dir))?;
        write(&dir.join("evaluation.json"), &report)?;
    }
    print!("{report}");
    Ok(())
}

fn design_for(scenario: &Scenario, slot_actions: &[u8]) -> Result<DesignGrid, Error> {
    let kinds = slot_actions.iter().map(|&a| CellKind::from_action(a as usize)).collect::<Result<Vec<_>, _>>()?;
    scenario.design(&kinds)
}

fn svg_for(scenario: &Scenario, grid: &DesignGrid, scale: Option<f64>) -> Result<String, Error> {
    let opts = RenderOptions { scale, ..RenderOptions::default() };
    match scenario.analyse(grid) {
        Ok(a) => Ok(render_svg(&a.model, Some(&a.field), &opts)),
        Err(e) if e.is_numeric() => Ok(render_svg(&assemble(grid, &scenario.params, scenario.material)?, None, &opts)),
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct TrainSummary {
    scenario: String,
    episodes: usize,
    seed: u64,
    final_moving_avg: Option<f64>,
    best_episode: Option<usize>,
    best_reward: Option<f64>,
}

fn write_artifacts(dir: &Path, scenario: &Scenario, trainer: &Trainer) -> Result<(), Error> {
    let mut csv = Vec::new();
    write_curve_csv(&trainer.curve, &mut csv).map_err(|e| Error::Config(e.to_string()))?;
    write(&dir.join("curve.csv"), csv)?;
    if let Some(best) = &trainer.best {
        let grid = design_for(scenario, &best.slot_actions)?;
        write(&dir.join("best_design.json"), DesignFile::new(grid.clone(), scenario.params).to_json())?;
        write(&dir.join("best_design.svg"), svg_for(scenario, &grid, None)?)?;
    }
    let summary = TrainSummary {
        scenario: scenario.name.clone(),
        episodes: trainer.episode,
        seed: trainer.config.seed,
        final_moving_avg: trainer.curve.last().map(|p| p.moving_avg),
        best_episode: trainer.best.as_ref().map(|b| b.episode),
        best_reward: trainer.best.as_ref().map(|b| b.evaluation.reward),
    };
    write(&dir.join("summary.json"), json(&summary))
}

pub fn train(common: &Common, resume: Option<&Path>, episodes: Option<usize>) -> Result<(), Error> {
    let mut cfg = experiment(common)?;
    if let Some(n) = episodes {
        cfg.train.episodes = n;
    }
    cfg.train.validate()?;
    let scenario = Arc::new(cfg.resolve_scenario()?);
    let dir = required_out(cfg.out.as_ref())?;
    write(&dir.join("experiment.toml"), cfg.to_toml())?;
    write(&dir.join("scenario.json"), scenario.to_json())?;

    let cache = Arc::new(EvalCache::open(&dir.join("eval_cache.bin"), scenario.key())?);
    let env = Env::new(scenario.clone(), scenario.tiling)?.with_cache(cache);
    let mut trainer = match resume {
        Some(path) => {
            let mut t = Trainer::resume(env, path)?;
            if cfg.train.episodes < t.episode {
                return Err(Error::Config(format!("checkpoint is at episode {}, beyond the requested {}", t.episode, cfg.train.episodes)));
            }
            t.config.episodes = cfg.train.episodes;
            t
        }
        None => Trainer::new(env, cfg.train.clone())?,
    };
    let checkpoint = dir.join("checkpoint.bin");
    let every = trainer.config.checkpoint_every;
    while !trainer.is_finished() {
        let p = trainer.run_episode()?;
        if every > 0 && trainer.episode % every == 0 && !trainer.is_finished() {
            trainer.save_checkpoint(&checkpoint)?;
            write_artifacts(&dir, &scenario, &trainer)?;
        }
        if trainer.episode % 100 == 0 {
            eprintln!("episode {} reward {:.4} moving avg {:.4} epsilon {:.3}", p.episode, p.reward, p.moving_avg, p.epsilon);
        }
    }
    trainer.save_checkpoint(&checkpoint)?;
    write_artifacts(&dir, &scenario, &trainer)?;
    if let Some(best) = &trainer.best {
        println!("best reward {} at episode {}; artifacts in {}", best.evaluation.reward, best.episode, dir.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineSummary {
    scenario: String,
    policy: Policy,
    rollouts: usize,
    seed: u64,
    mean: f64,
    max: f64,
    best_rollout: usize,
}

pub fn baseline(common: &Common, policy: Policy, n: usize) -> Result<(), Error> {
    let cfg = experiment(common)?;
    let scenario = Arc::new(cfg.resolve_scenario()?);
    let env = Env::new(scenario.clone(), scenario.tiling)?.with_cache(Arc::new(EvalCache::in_memory()));
    let seed = cfg.train.seed;
    let report = run_baseline(&env, policy, n, seed)?;
    let summary = json(&BaselineSummary {
        scenario: scenario.name.clone(),
        policy,
        rollouts: n,
        seed,
        mean: report.mean,
        max: report.max,
        best_rollout: report.best,
    });
    if let Some(dir) = &cfg.out {
        let dir = required_out(Some(dir))?;
        let mut csv = String::from("rollout,reward,disconnections,singular\n");
        for (i, r) in report.rollouts.iter().enumerate() {
            let e = &r.evaluation;
            csv.push_str(&format!("{i},{},{},{}\n", e.reward, e.disconnections, e.singular));
        }
        write(&dir.join("baseline_rewards.csv"), csv)?;
        write(&dir.join("baseline_summary.json"), &summary)?;
        let grid = design_for(&scenario, &report.rollouts[report.best].slot_actions)?;
        write(&dir.join("baseline_best.json"), DesignFile::new(grid, scenario.params).to_json())?;
    }
    print!("{summary}");
    Ok(())
}

/// Without a scenario only the undeformed design is drawn.
pub fn render(common: &Common, scale: Option<f64>) -> Result<(), Error> {
    let design = load_design(common)?;
    let svg = if common.scenario.is_some() || common.config.is_some() {
        let mut scenario = experiment(common)?.resolve_scenario()?;
        scenario.params = design.params;
        let a = scenario.analyse(&design.grid)?;
        render_svg(&a.model, Some(&a.field), &RenderOptions { scale, ..RenderOptions::default() })
    } else {
        let model = assemble(&design.grid, &design.params, Material::TPU)?;
        render_svg(&model, None, &RenderOptions::default())
    };
    match &common.out {
        Some(p) if p.extension().is_some_and(|e| e == "svg") => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            write(p, svg)
        }
        Some(dir) => write(&required_out(Some(dir))?.join("design.svg"), svg),
        None => {
            print!("{svg}");
            Ok(())
        }
    }
}
