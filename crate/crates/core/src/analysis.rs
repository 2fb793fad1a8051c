//! Rates, reliabilities and bounds for cq ensembles and synthesized channels.

mod lift;
mod profile;

pub use lift::{
    correspondence_for, lifted_reliability, symmetric_lift, trace_out_correspondence, Correspondence, SymmetricLift,
    LIFT_MAX_N,
};
pub use profile::{
    polarization_profile, polarization_profile_with, thresholds, write_profile_csv,
    PolarizationProfile, ProfileCounts, ProfileRow, Thresholds,
};

use serde::Serialize;

use crate::cell::{cq_view, rate, reliability, CqEnsemble, MemoryCell, ProbeState};
use crate::error::{invalid, Error, Result};
use crate::polar::{one_step_transform, SourceModel, SourceTable, SynthesizedChannelView, Synthesizer};
use crate::qmat::{
    binary_entropy, fidelity, matrix_sqrt, pair_statistics, sparse_aware_mul, HermitianOperator,
    PSD_TOL,
};

/// Allowed slack when checking that prefix probabilities sum to one.
pub const COVERAGE_TOL: f64 = 1e-9;

/// Per-prefix contributions of one synthesized channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrefixStats {
    pub joint: [f64; 2],
    /// `h(P(U_i = 0 | prefix))`.
    pub cond_entropy: f64,
    /// Holevo quantity of the conditional ensemble.
    pub holevo: f64,
    pub fidelity: f64,
}

pub fn prefix_stats(view: &SynthesizedChannelView) -> Result<PrefixStats> {
    let q = view.cond_prior;
    let s = pair_statistics(view.cond_states[0].op(), view.cond_states[1].op(), q)?;
    let holevo = s.entropy_mix - q * s.entropy_a - (1.0 - q) * s.entropy_b;
    Ok(PrefixStats {
        joint: view.joint,
        cond_entropy: binary_entropy(q),
        holevo: holevo.max(0.0),
        fidelity: s.fidelity.min(1.0),
    })
}

/// Accumulates `I(U_i; U_1^{i-1} B^N)` and `Z(W_N^{(i)})` over prefixes.
#[derive(Clone, Debug, Default)]
pub struct ChannelAccumulator {
    mass: f64,
    mass_zero: f64,
    cond_term: f64,
    z: f64,
}

impl ChannelAccumulator {
    pub fn add(&mut self, s: &PrefixStats) {
        let w = s.joint[0] + s.joint[1];
        self.mass += w;
        self.mass_zero += s.joint[0];
        self.cond_term += w * (s.cond_entropy - s.holevo);
        self.z += 2.0 * (s.joint[0] * s.joint[1]).sqrt() * s.fidelity;
    }

    fn check(&self) -> Result<()> {
        if (self.mass - 1.0).abs() > COVERAGE_TOL {
            return Err(Error::IncompletePrefixCoverage(self.mass));
        }
        Ok(())
    }

    /// `H(U_i) − Σ_prefix P(prefix) H(U_i | B^N, prefix)`, clipped to `[0, 1]`.
    pub fn rate(&self) -> Result<f64> {
        self.check()?;
        Ok((binary_entropy(self.mass_zero.clamp(0.0, 1.0)) - self.cond_term).clamp(0.0, 1.0))
    }

    pub fn reliability(&self) -> Result<f64> {
        self.check()?;
        Ok(self.z.clamp(0.0, 1.0))
    }
}

/// Rate of a synthesized channel from the views of all its positive-probability prefixes.
pub fn synthesized_rate(views: &[SynthesizedChannelView]) -> Result<f64> {
    let mut acc = ChannelAccumulator::default();
    for v in views {
        acc.add(&prefix_stats(v)?);
    }
    acc.rate()
}

/// `2 Σ_prefix √(P(prefix,0) P(prefix,1)) F(W̄^{prefix,0}, W̄^{prefix,1})`.
pub fn synthesized_reliability_from_views(views: &[SynthesizedChannelView]) -> Result<f64> {
    let mut acc = ChannelAccumulator::default();
    for v in views {
        let f = fidelity(&v.cond_states[0], &v.cond_states[1])?;
        acc.add(&PrefixStats {
            joint: v.joint,
            cond_entropy: 0.0,
            holevo: 0.0,
            fidelity: f.min(1.0),
        });
    }
    acc.reliability()
}

pub fn synthesized_reliability(
    cell: &MemoryCell,
    probe: &ProbeState,
    model: SourceModel,
    n: u32,
    index: usize,
) -> Result<f64> {
    let s = Synthesizer::from_cell(cell, probe, model, n)?;
    if index == 0 || index > s.block_len() {
        return Err(invalid("i", format!("{index} is not in 1..={}", s.block_len())));
    }
    synthesized_reliability_from_views(&s.views(index)?)
}

/// `Z(U_i | U_1^{i-1}) = 2 Σ_prefix √(P(prefix,0) P(prefix,1))`.
pub fn source_reliability_from_table(table: &SourceTable, index: usize) -> f64 {
    let len = index - 1;
    let z: f64 = (0..1u64 << len)
        .map(|pre| (table.joint_next(pre, len, 0) * table.joint_next(pre, len, 1)).sqrt())
        .sum();
    (2.0 * z).min(1.0)
}

pub fn source_reliability(model: SourceModel, n: u32, index: usize) -> Result<f64> {
    let table = crate::polar::source_distribution(model, n)?;
    if index == 0 || index > table.block_len() {
        return Err(invalid("i", format!("{index} is not in 1..={}", table.block_len())));
    }
    Ok(source_reliability_from_table(&table, index))
}

/// Rates and reliabilities of one polarization step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OneStepReport {
    pub i: f64,
    pub i_minus: f64,
    pub i_plus: f64,
    pub z: f64,
    pub z_minus: f64,
    pub z_plus: f64,
}

pub fn one_step_report(e: &CqEnsemble) -> Result<OneStepReport> {
    let split = one_step_transform(e)?;
    Ok(OneStepReport {
        i: rate(e),
        i_minus: rate(&split.minus),
        i_plus: rate(&split.plus),
        z: reliability(e),
        z_minus: reliability(&split.minus),
        z_plus: reliability(&split.plus),
    })
}

/// One-step report for a cell under a probe.
pub fn one_step_report_for(cell: &MemoryCell, probe: &ProbeState) -> Result<OneStepReport> {
    one_step_report(&cq_view(cell, &probe.density())?)
}

/// `−log₂ Tr{(p₀√ρ₀ + p₁√ρ₁)²}`.
pub fn holevo_lower_bound(e: &CqEnsemble) -> Result<f64> {
    let [p0, p1] = e.priors();
    let mut a = matrix_sqrt(e.state(0).op(), PSD_TOL)?.scaled(p0);
    a.add_scaled(&matrix_sqrt(e.state(1).op(), PSD_TOL)?, p1)?;
    let sq = sparse_aware_mul(a.matrix(), a.matrix());
    let t = HermitianOperator::from_matrix_unchecked(sq).trace();
    Ok(-t.log2())
}

fn check_pz(p: f64, z: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("{p} is not in [0, 1]")));
    }
    let zmax = 2.0 * (p * (1.0 - p)).sqrt();
    if !(z >= 0.0 && z <= zmax + 1e-12) {
        return Err(invalid("z", format!("{z} is not in [0, {zmax}]")));
    }
    Ok(())
}

/// `H(σ)` with `σ = ((p, Z/2), (Z/2, 1−p))`.
pub fn roga_upper_bound(p: f64, z: f64) -> Result<f64> {
    check_pz(p, z)?;
    let r = ((2.0 * p - 1.0).powi(2) + z * z).sqrt().min(1.0);
    Ok(binary_entropy(0.5 * (1.0 + r)))
}

/// `(h(p) − log₂(1 + Z), √(4p(1−p) − Z²))`.
pub fn rate_reliability_bounds(p: f64, z: f64) -> Result<(f64, f64)> {
    check_pz(p, z)?;
    let lower = binary_entropy(p) - (1.0 + z).log2();
    let upper = (4.0 * p * (1.0 - p) - z * z).max(0.0).sqrt();
    Ok((lower, upper))
}
