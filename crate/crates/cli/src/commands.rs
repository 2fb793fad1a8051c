use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use polar_reading::analysis::{polarization_profile, write_profile_csv, PolarizationProfile};
use polar_reading::code::{sample_frozen_maps, select_information_set, ConstructionParams, CodeConstruction};
use polar_reading::decode::{
    monte_carlo_error, union_bound_rhs, write_trials_csv, ScDecoder, SimulationSummary,
};
use polar_reading::polar::polar_transform;
use polar_reading::probe::{optimize_probe, probe_sweep, write_sweep_csv};

use crate::config::ExperimentConfig;
use crate::verify::run_checks;

/// What a command produced, and whether every requested check passed.
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub passed: bool,
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(path)
}

pub fn transform(n: u32) -> Result<Vec<String>> {
    let t = polar_transform(n)?;
    Ok((0..t.block_len()).map(|i| t.row_string(i)).collect())
}

fn profile(cfg: &ExperimentConfig) -> Result<PolarizationProfile> {
    let (cell, probe, model) = cfg.build()?;
    polarization_profile(&cell, &probe, model, cfg.n, cfg.beta)
        .context("exact synthesized channels need n ≤ 3 (N ≤ 8); lower --n")
}

#[derive(Serialize)]
struct PolarizeSummary {
    n: usize,
    level: u32,
    beta: f64,
    log2_delta: f64,
    uniform_source: bool,
    good: usize,
    bad: usize,
    total: usize,
}

pub fn polarize(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = profile(cfg)?;
    let (csv_path, w) = create(&cfg.out_dir, "profile.csv")?;
    write_profile_csv(&p, w)?;
    let c = p.counts();
    let summary = PolarizeSummary {
        n: p.block_len(),
        level: p.level,
        beta: p.thresholds.beta,
        log2_delta: p.thresholds.log2_delta,
        uniform_source: p.uniform_source,
        good: c.good,
        bad: c.bad,
        total: c.total,
    };
    let json_path = write_json(&cfg.out_dir, "polarize.json", &summary)?;
    Ok(Outcome {
        outputs: vec![csv_path, json_path],
        passed: true,
    })
}

fn construction(cfg: &ExperimentConfig, p: &PolarizationProfile) -> Result<CodeConstruction> {
    let params = ConstructionParams {
        target_rate: cfg.target_rate,
        z_threshold: cfg.z_threshold,
        zsrc_threshold: cfg.zsrc_threshold,
        frozen_seed: cfg.frozen_seed,
    };
    Ok(select_information_set(p, &params)?)
}

pub fn construct(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = profile(cfg)?;
    let c = construction(cfg, &p)?;
    let path = write_json(&cfg.out_dir, "construction.json", &c)?;
    Ok(Outcome {
        outputs: vec![path],
        passed: true,
    })
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.trials == 0 {
        bail!("trials must be at least 1");
    }
    let (cell, probe, model) = cfg.build()?;
    let p = profile(cfg)?;
    let c = construction(cfg, &p)?;
    let maps = sample_frozen_maps(model, &c)?;
    let decoder = ScDecoder::new(&cell, &probe, model, &c, &maps)?;
    let result = monte_carlo_error(&decoder, cfg.trials, cfg.seed)?;
    let bound = union_bound_rhs(&p, &c.info_set, 1.0)?;
    let (csv_path, w) = create(&cfg.out_dir, "trials.csv")?;
    write_trials_csv(&result, w)?;
    let summary = SimulationSummary::new(&c, &result, bound);
    let json_path = write_json(&cfg.out_dir, "summary.json", &summary)?;
    let construction_path = write_json(&cfg.out_dir, "construction.json", &c)?;
    Ok(Outcome {
        outputs: vec![csv_path, json_path, construction_path],
        passed: true,
    })
}

pub fn probe_opt(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (cell, _, _) = cfg.build()?;
    let opt = optimize_probe(&cell, cfg.objective, cfg.grid_per_axis, cfg.refine_iters, cfg.seed)?;
    let json_path = write_json(&cfg.out_dir, "probe_opt.json", &opt)?;
    let points = probe_sweep(&cell, cfg.objective, cfg.sweep_axis, cfg.sweep_samples)?;
    let (csv_path, w) = create(&cfg.out_dir, "sweep.csv")?;
    write_sweep_csv(&points, w)?;
    Ok(Outcome {
        outputs: vec![json_path, csv_path],
        passed: true,
    })
}

pub fn verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let report = run_checks(cfg.instances, cfg.seed)?;
    let path = write_json(&cfg.out_dir, "verify.json", &report)?;
    Ok(Outcome {
        outputs: vec![path],
        passed: report.all_passed,
    })
}
