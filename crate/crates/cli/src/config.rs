use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use polar_reading::cell::ProbeSpec;
use polar_reading::probe::{ProbeObjective, SweepAxis};
use polar_reading::{CellSpec, MemoryCell, ProbeState, SourceKind, SourceModel};

use crate::RunArgs;

/// Experiment settings. `n` is the level, so blocks have `N = 2^n` cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub cell: CellSpec,
    pub probe: ProbeSpec,
    pub source: SourceKind,
    pub n: u32,
    pub beta: f64,
    pub target_rate: f64,
    pub z_threshold: f64,
    pub zsrc_threshold: Option<f64>,
    pub frozen_seed: u64,
    pub seed: u64,
    pub trials: u64,
    pub objective: ProbeObjective,
    pub grid_per_axis: usize,
    pub refine_iters: usize,
    pub sweep_axis: SweepAxis,
    pub sweep_samples: usize,
    pub instances: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cell: CellSpec::Ad {
                gamma0: 0.0,
                gamma1: 0.5,
                prior_p: 0.5,
            },
            probe: ProbeSpec {
                bloch: [0.0, 0.0, -1.0],
            },
            source: SourceKind::InducedFromIidX,
            n: 3,
            beta: 0.49,
            target_rate: 0.25,
            z_threshold: 1.0,
            zsrc_threshold: None,
            frozen_seed: 0,
            seed: 0,
            trials: 2000,
            objective: ProbeObjective::Rate,
            grid_per_axis: 21,
            refine_iters: 200,
            sweep_axis: SweepAxis::Z,
            sweep_samples: 41,
            instances: 100,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Flags win over the file.
    pub fn apply(&mut self, args: &RunArgs) {
        if let Some(n) = args.n {
            self.n = n;
        }
        if let Some(p) = args.prior {
            self.cell.set_prior_p(p);
        }
        if let Some(s) = args.seed {
            self.seed = s;
        }
        if let Some(t) = args.trials {
            self.trials = t;
        }
        if let Some(d) = &args.out_dir {
            self.out_dir = d.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 0.5) {
            bail!("beta must lie in (0, 1/2), got {}", self.beta);
        }
        if !(self.target_rate > 0.0 && self.target_rate <= 1.0) {
            bail!("target_rate must lie in (0, 1], got {}", self.target_rate);
        }
        if self.grid_per_axis < 3 {
            bail!("grid_per_axis must be at least 3");
        }
        if self.sweep_samples < 2 {
            bail!("sweep_samples must be at least 2");
        }
        self.build()?;
        Ok(())
    }

    pub fn build(&self) -> Result<(MemoryCell, ProbeState, SourceModel)> {
        let cell = self.cell.build()?;
        let probe = ProbeState::new(self.probe.bloch)?;
        let model = SourceModel::new(self.source, cell.prior_p())?;
        Ok((cell, probe, model))
    }
}
