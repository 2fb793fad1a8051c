//! Square-root measurements and the quantum successive-cancellation decoder.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::PolarizationProfile;
use crate::cell::{cq_view, CqEnsemble, MemoryCell, ProbeState};
use crate::code::{encode_message, CodeConstruction, FrozenMaps};
use crate::error::{invalid, Error, Result};
use crate::polar::{pack_bits, product_output, SourceModel, SynthesizedChannelView, Synthesizer};
use crate::qmat::{
    fidelity, hermitian_eigs, matrix_sqrt, pinv_sqrt, sparse_aware_mul, support_projector,
    DensityOperator, HermitianOperator, PSD_TOL,
};

/// Eigenvalues of `S` below this fraction of its largest one are treated as zero.
pub const SUPPORT_CUT: f64 = 1e-12;
pub const POVM_PSD_TOL: f64 = 1e-10;
pub const POVM_SUM_TOL: f64 = 1e-9;

/// A finite POVM, validated on construction.
#[derive(Clone, Debug)]
pub struct Povm {
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| invalid("elements", "a POVM needs at least one element"))?;
        let dim = first.dim();
        let mut sum = HermitianOperator::zeros(dim);
        for e in &elements {
            let min = hermitian_eigs(e).values.last().copied().unwrap_or(0.0);
            if min < -POVM_PSD_TOL {
                return Err(Error::NotPsd(min));
            }
            sum.add_scaled(e, 1.0)?;
        }
        let dev = sum.max_abs_diff(&HermitianOperator::identity(dim));
        if dev > POVM_SUM_TOL {
            return Err(invalid("elements", format!("sum deviates from identity by {dev:e}")));
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    /// `Tr{Λ_k ρ}` for every element.
    pub fn probabilities(&self, rho: &DensityOperator) -> Vec<f64> {
        self.elements
            .iter()
            .map(|e| e.trace_product(rho.op()).max(0.0))
            .collect()
    }
}

/// `Λ_u = S^{-1/2} p_u ρ_u S^{-1/2}` with `S = Σ_u p_u ρ_u`; the projector onto
/// the kernel of `S` is added to the element with the largest prior.
pub fn square_root_measurement(priors: &[f64], states: &[DensityOperator]) -> Result<Povm> {
    if priors.len() != states.len() || priors.is_empty() {
        return Err(Error::LengthMismatch {
            expected: priors.len(),
            got: states.len(),
        });
    }
    let total: f64 = priors.iter().sum();
    if priors.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(invalid("priors", format!("not a probability vector (sum {total})")));
    }
    let dim = states[0].dim();
    let mut s = HermitianOperator::zeros(dim);
    for (p, rho) in priors.iter().zip(states) {
        if rho.dim() != dim {
            return Err(Error::DimensionMismatch(dim, rho.dim()));
        }
        s.add_scaled(rho.op(), *p)?;
    }
    let top = hermitian_eigs(&s).values.first().copied().unwrap_or(0.0);
    let cut = SUPPORT_CUT * top.max(0.0);
    let inv = pinv_sqrt(&s, cut);
    let mut elements: Vec<HermitianOperator> = priors
        .iter()
        .zip(states)
        .map(|(p, rho)| rho.op().scaled(*p).sandwich(&inv))
        .collect();
    let mut residue = HermitianOperator::identity(dim);
    residue.add_scaled(&support_projector(&s, cut), -1.0)?;
    let best = priors
        .iter()
        .enumerate()
        .fold(0, |b, (k, &p)| if p > priors[b] { k } else { b });
    elements[best].add_scaled(&residue, 1.0)?;
    Povm::new(elements)
}

/// `1 − Σ_u p_u Tr{Λ_u ρ_u}`.
pub fn measurement_error(priors: &[f64], states: &[DensityOperator], povm: &Povm) -> f64 {
    let success: f64 = priors
        .iter()
        .zip(states)
        .zip(povm.elements())
        .map(|((p, rho), e)| p * e.trace_product(rho.op()))
        .sum();
    1.0 - success
}

/// `Σ_{u≠v} √(p_u p_v) F(ρ_u, ρ_v)`.
pub fn barnum_knill_bound(priors: &[f64], states: &[DensityOperator]) -> Result<f64> {
    let mut total = 0.0;
    for u in 0..states.len() {
        for v in 0..states.len() {
            if u != v {
                total += (priors[u] * priors[v]).sqrt() * fidelity(&states[u], &states[v])?.min(1.0);
            }
        }
    }
    Ok(total)
}

/// `(1 + c + 1/c)/2 · Σ_{i∈A} Z_i`.
pub fn union_bound_rhs(profile: &PolarizationProfile, info_set: &[usize], c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid("c", format!("{c} is not positive")));
    }
    let sum: f64 = info_set.iter().map(|&i| profile.z(i)).sum();
    Ok(0.5 * (1.0 + c + 1.0 / c) * sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Info,
    Frozen,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeStep {
    pub index: usize,
    pub kind: StepKind,
    /// Outcome probabilities; `[1, 0]` or `[0, 1]` for frozen steps.
    pub probabilities: [f64; 2],
    pub outcome: u8,
    /// The decoded prefix had zero probability and the uniform prior was used.
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeTrace {
    pub decoded: Vec<u8>,
    pub steps: Vec<DecodeStep>,
    pub success: bool,
    /// Product of the sampled outcome probabilities.
    pub path_probability: f64,
}

impl DecodeTrace {
    pub fn first_error_index(&self, truth: &[u8]) -> Option<usize> {
        self.decoded
            .iter()
            .zip(truth)
            .position(|(a, b)| a != b)
            .map(|k| k + 1)
    }
}

struct Measurement {
    povm: Povm,
    roots: [HermitianOperator; 2],
    fallback: bool,
}

/// Successive-cancellation decoder for one code, cell and probe.
///
/// Measurements depend only on the index and the decoded prefix, so they are
/// built once and shared between trials.
pub struct ScDecoder {
    synth: Synthesizer,
    construction: CodeConstruction,
    maps: FrozenMaps,
    strict: bool,
    uniform: OnceLock<Synthesizer>,
    cache: Mutex<HashMap<(usize, u64), Arc<Measurement>>>,
}

impl ScDecoder {
    pub fn new(
        cell: &MemoryCell,
        probe: &ProbeState,
        model: SourceModel,
        construction: &CodeConstruction,
        maps: &FrozenMaps,
    ) -> Result<Self> {
        Self::for_ensemble(&cq_view(cell, &probe.density())?, model, construction, maps)
    }

    pub fn for_ensemble(
        e: &CqEnsemble,
        model: SourceModel,
        construction: &CodeConstruction,
        maps: &FrozenMaps,
    ) -> Result<Self> {
        let big_n = construction.n;
        if !big_n.is_power_of_two() || maps.block_len() != big_n {
            return Err(invalid("construction", "block length must match the frozen maps"));
        }
        Ok(Self {
            synth: Synthesizer::new(e, model, big_n.trailing_zeros())?,
            construction: construction.clone(),
            maps: maps.clone(),
            strict: false,
            uniform: OnceLock::new(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Abort on zero-probability prefixes instead of falling back to prior ½.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn construction(&self) -> &CodeConstruction {
        &self.construction
    }

    pub fn maps(&self) -> &FrozenMaps {
        &self.maps
    }

    fn conditional_view(&self, index: usize, prefix: &[u8]) -> Result<(SynthesizedChannelView, bool)> {
        match self.synth.view(index, prefix) {
            Err(Error::ZeroProbabilityPrefix) if !self.strict => {
                let uniform = self.uniform.get_or_init(|| {
                    let e = CqEnsemble::new(0.5, self.synth.outputs()[0].clone(), self.synth.outputs()[1].clone())
                        .expect("stored outputs form an ensemble");
                    let model = SourceModel::iid_u(0.5).expect("valid prior");
                    Synthesizer::new(&e, model, self.synth.block_len().trailing_zeros())
                        .expect("same block length as the primary synthesizer")
                });
                Ok((uniform.view(index, prefix)?, true))
            }
            other => other.map(|v| (v, false)),
        }
    }

    fn measurement(&self, index: usize, prefix: &[u8]) -> Result<Arc<Measurement>> {
        let key = (index, pack_bits(prefix));
        if let Some(m) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(m));
        }
        let (view, fallback) = self.conditional_view(index, prefix)?;
        let q = view.cond_prior;
        let povm = square_root_measurement(&[q, 1.0 - q], &view.cond_states)?;
        let roots = [
            matrix_sqrt(&povm.elements()[0], PSD_TOL)?,
            matrix_sqrt(&povm.elements()[1], PSD_TOL)?,
        ];
        let m = Arc::new(Measurement { povm, roots, fallback });
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&m));
        Ok(m)
    }

    /// Decodes the output of `true_u` using `rng` for measurement outcomes.
    pub fn decode<R: Rng + ?Sized>(&self, true_u: &[u8], rng: &mut R) -> Result<DecodeTrace> {
        let big_n = self.construction.n;
        if true_u.len() != big_n {
            return Err(Error::LengthMismatch {
                expected: big_n,
                got: true_u.len(),
            });
        }
        let x = crate::polar::encode_bits(true_u)?;
        let mut rho = product_output(self.synth.outputs(), &x);
        let last_info = self.construction.info_set.last().copied().unwrap_or(0);
        let mut decoded = Vec::with_capacity(big_n);
        let mut steps = Vec::with_capacity(big_n);
        let mut path = 1.0;
        for i in 1..=big_n {
            if self.maps.is_frozen(i) {
                let b = self.maps.value(i, &decoded);
                let mut probabilities = [0.0; 2];
                probabilities[usize::from(b)] = 1.0;
                steps.push(DecodeStep {
                    index: i,
                    kind: StepKind::Frozen,
                    probabilities,
                    outcome: b,
                    fallback: false,
                });
                decoded.push(b);
                continue;
            }
            let m = self.measurement(i, &decoded)?;
            let p0 = m.povm.elements()[0].trace_product(&rho).clamp(0.0, 1.0);
            let probabilities = [p0, 1.0 - p0];
            let b = u8::from(rng.gen::<f64>() >= p0);
            let pb = probabilities[usize::from(b)];
            path *= pb;
            if i != last_info && pb > 0.0 {
                let k = m.roots[usize::from(b)].matrix();
                let updated = sparse_aware_mul(&sparse_aware_mul(k, rho.matrix()), k);
                rho = HermitianOperator::from_matrix_unchecked(updated).scaled(1.0 / pb);
            }
            steps.push(DecodeStep {
                index: i,
                kind: StepKind::Info,
                probabilities,
                outcome: b,
                fallback: m.fallback,
            });
            decoded.push(b);
        }
        Ok(DecodeTrace {
            success: decoded == true_u,
            decoded,
            steps,
            path_probability: path,
        })
    }
}

/// One successive-cancellation run with a seeded outcome generator.
pub fn sc_decode(
    cell: &MemoryCell,
    probe: &ProbeState,
    model: SourceModel,
    construction: &CodeConstruction,
    maps: &FrozenMaps,
    true_u: &[u8],
    rng_seed: u64,
) -> Result<DecodeTrace> {
    let decoder = ScDecoder::new(cell, probe, model, construction, maps)?;
    decoder.decode(true_u, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub success: bool,
    pub first_error_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloResult {
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub records: Vec<TrialRecord>,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    (low, high)
}

/// Generator for trial `t`: ChaCha8 seeded by `master_seed` on stream `t`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Block error rate over `trials` uniformly random messages.
pub fn monte_carlo_error(decoder: &ScDecoder, trials: u64, master_seed: u64) -> Result<MonteCarloResult> {
    if trials == 0 {
        return Err(invalid("trials", "at least one trial is required"));
    }
    let k = decoder.construction().info_set.len();
    let records = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t);
            let msg: Vec<u8> = (0..k).map(|_| (rng.next_u32() & 1) as u8).collect();
            let (u, _) = encode_message(&msg, decoder.construction(), decoder.maps())?;
            let trace = decoder.decode(&u, &mut rng)?;
            Ok(TrialRecord {
                trial: t,
                success: trace.success,
                first_error_index: trace.first_error_index(&u),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors = records.iter().filter(|r| !r.success).count() as u64;
    let (wilson_low, wilson_high) = wilson_interval(errors, trials);
    Ok(MonteCarloResult {
        trials,
        errors,
        error_rate: errors as f64 / trials as f64,
        wilson_low,
        wilson_high,
        records,
    })
}

/// Writes `trial,success,first_error_index`.
pub fn write_trials_csv<W: Write>(result: &MonteCarloResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &result.records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub n: usize,
    pub rate: f64,
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub union_bound_c1: f64,
}

impl SimulationSummary {
    pub fn new(construction: &CodeConstruction, result: &MonteCarloResult, union_bound_c1: f64) -> Self {
        Self {
            n: construction.n,
            rate: construction.achieved_rate(),
            trials: result.trials,
            errors: result.errors,
            error_rate: result.error_rate,
            wilson_low: result.wilson_low,
            wilson_high: result.wilson_high,
            union_bound_c1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{ad_cell, reliability};
    use crate::code::sample_frozen_maps;

    fn basis(k: usize) -> DensityOperator {
        DensityOperator::basis(2, k)
    }

    #[test]
    fn orthogonal_states_give_projectors() {
        let states = [basis(0), basis(1)];
        let povm = square_root_measurement(&[0.3, 0.7], &states).unwrap();
        assert!(povm.elements()[0].max_abs_diff(basis(0).op()) < 1e-12);
        assert!(povm.elements()[1].max_abs_diff(basis(1).op()) < 1e-12);
        assert!(measurement_error(&[0.3, 0.7], &states, &povm).abs() < 1e-12);
        assert!(barnum_knill_bound(&[0.3, 0.7], &states).unwrap().abs() < 1e-12);
    }

    #[test]
    fn identical_states() {
        let rho = DensityOperator::from_diagonal(&[0.6, 0.4]).unwrap();
        let p = 0.3;
        let states = [rho.clone(), rho.clone()];
        let povm = square_root_measurement(&[p, 1.0 - p], &states).unwrap();
        let success = 1.0 - measurement_error(&[p, 1.0 - p], &states, &povm);
        assert!((success - (p * p + (1.0 - p) * (1.0 - p))).abs() < 1e-12);
        // rank-deficient states: the residue lands on the larger prior
        let pure = basis(0);
        let povm = square_root_measurement(&[p, 1.0 - p], &[pure.clone(), pure]).unwrap();
        assert!((povm.elements()[1].matrix()[(1, 1)].re - 1.0).abs() < 1e-12);
        assert!((povm.elements()[0].matrix()[(0, 0)].re - p).abs() < 1e-12);
    }

    #[test]
    fn barnum_knill_binary_is_reliability() {
        let cell = ad_cell(0.2, 0.7, 0.35).unwrap();
        let e = cq_view(&cell, &ProbeState::new([0.4, 0.1, -0.5]).unwrap().density()).unwrap();
        let b = barnum_knill_bound(&e.priors(), e.states()).unwrap();
        assert!((b - reliability(&e)).abs() < 1e-12);
        let povm = square_root_measurement(&e.priors(), e.states()).unwrap();
        assert!(measurement_error(&e.priors(), e.states(), &povm) <= 0.5 * b + 1e-12);
    }

    #[test]
    fn povm_validation() {
        assert!(Povm::new(vec![HermitianOperator::identity(2).scaled(0.5)]).is_err());
        assert!(Povm::new(vec![]).is_err());
        assert!(square_root_measurement(&[0.5], &[basis(0), basis(1)]).is_err());
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_994).abs() < 1e-5);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_832).abs() < 1e-5 && (hi - 0.596_168).abs() < 1e-5);
    }

    #[test]
    fn noiseless_single_cell_decodes() {
        let cell = ad_cell(0.0, 1.0, 0.5).unwrap();
        let c = CodeConstruction {
            n: 1,
            info_set: vec![1],
            target_rate: 1.0,
            z_threshold: 1.0,
            zsrc_threshold: 0.0,
            frozen_seed: 0,
        };
        let model = SourceModel::induced(0.5).unwrap();
        let maps = sample_frozen_maps(model, &c).unwrap();
        for (u, seed) in [(0u8, 1u64), (1, 2)] {
            let t = sc_decode(&cell, &ProbeState::one(), model, &c, &maps, &[u], seed).unwrap();
            assert!(t.success);
            assert!((t.path_probability - 1.0).abs() < 1e-12);
        }
    }
}
