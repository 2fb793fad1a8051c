//! Finite-N polarization profiles and good/bad classification.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{prefix_stats, source_reliability_from_table, ChannelAccumulator};
use crate::cell::{cq_view, CqEnsemble, MemoryCell, ProbeState};
use crate::error::{invalid, Result};
use crate::polar::{unpack_bits, SourceModel, Synthesizer};

/// `δ = 2^{-2^{nβ}}`, kept as `log₂ δ` so that large `n` does not underflow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub level: u32,
    pub beta: f64,
    pub log2_delta: f64,
}

pub fn thresholds(level: u32, beta: f64) -> Result<Thresholds> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(invalid("beta", format!("{beta} is not in (0, 1/2)")));
    }
    Ok(Thresholds {
        level,
        beta,
        log2_delta: -(2f64.powf(f64::from(level) * beta)),
    })
}

impl Thresholds {
    pub fn delta(&self) -> f64 {
        self.log2_delta.exp2()
    }

    /// `x ≤ δ`.
    pub fn is_small(&self, x: f64) -> bool {
        x <= 0.0 || x.log2() <= self.log2_delta
    }

    /// `x ≥ 1 − δ`.
    pub fn is_near_one(&self, x: f64) -> bool {
        self.is_small(1.0 - x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub index: usize,
    pub i_rate_bits: f64,
    pub z_reliability: f64,
    pub z_source: f64,
    pub is_good: bool,
    pub is_bad: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ProfileCounts {
    pub good: usize,
    pub bad: usize,
    pub total: usize,
}

#[derive(Clone, Debug)]
pub struct PolarizationProfile {
    pub level: u32,
    pub thresholds: Thresholds,
    /// A uniform source has `Z(U_i|U_1^{i-1}) = 1` everywhere, and only the
    /// channel side of the good/bad conditions applies.
    pub uniform_source: bool,
    pub rows: Vec<ProfileRow>,
}

impl PolarizationProfile {
    pub fn block_len(&self) -> usize {
        self.rows.len()
    }

    pub fn counts(&self) -> ProfileCounts {
        ProfileCounts {
            good: self.rows.iter().filter(|r| r.is_good).count(),
            bad: self.rows.iter().filter(|r| r.is_bad).count(),
            total: self.rows.len(),
        }
    }

    pub fn z(&self, index: usize) -> f64 {
        self.rows[index - 1].z_reliability
    }

    /// `max_i Z_i − min_i Z_i`.
    pub fn spread(&self) -> f64 {
        let zs = self.rows.iter().map(|r| r.z_reliability);
        zs.clone().fold(f64::NEG_INFINITY, f64::max) - zs.fold(f64::INFINITY, f64::min)
    }
}

pub fn polarization_profile(
    cell: &MemoryCell,
    probe: &ProbeState,
    model: SourceModel,
    n: u32,
    beta: f64,
) -> Result<PolarizationProfile> {
    polarization_profile_with(&cq_view(cell, &probe.density())?, model, n, beta)
}

pub fn polarization_profile_with(
    e: &CqEnsemble,
    model: SourceModel,
    n: u32,
    beta: f64,
) -> Result<PolarizationProfile> {
    let th = thresholds(n, beta)?;
    let synth = Synthesizer::new(e, model, n)?;
    let uniform_source = model.is_uniform();
    let big_n = synth.block_len();
    let rows = (1..=big_n)
        .into_par_iter()
        .map(|i| {
            let table = synth.table();
            let mut acc = ChannelAccumulator::default();
            for pre in 0..(1u64 << (i - 1)) {
                if table.prefix_prob(pre, i - 1) <= 0.0 {
                    continue;
                }
                let view = synth.view(i, &unpack_bits(pre, i - 1))?;
                acc.add(&prefix_stats(&view)?);
            }
            let z = acc.reliability()?;
            let zsrc = source_reliability_from_table(table, i);
            let src_good = uniform_source || th.is_near_one(zsrc);
            let src_bad = uniform_source || th.is_small(zsrc);
            Ok(ProfileRow {
                index: i,
                i_rate_bits: acc.rate()?,
                z_reliability: z,
                z_source: zsrc,
                is_good: th.is_small(z) && src_good,
                is_bad: th.is_near_one(z) && src_bad,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolarizationProfile {
        level: n,
        thresholds: th,
        uniform_source,
        rows,
    })
}

/// Writes `index,i_rate_bits,z_reliability,z_source,is_good,is_bad`.
pub fn write_profile_csv<W: Write>(profile: &PolarizationProfile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &profile.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
