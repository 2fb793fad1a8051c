//! Seeded bound checks on random qubit cells.
//!
//! Every check is phrased as a margin that must be nonnegative.

use anyhow::Result;
use serde::Serialize;

use polar_reading::analysis::{
    correspondence_for, holevo_lower_bound, lifted_reliability, one_step_report,
    rate_reliability_bounds, roga_upper_bound, symmetric_lift, synthesized_reliability_from_views,
};
use polar_reading::cell::{rate, reliability};
use polar_reading::decode::{measurement_error, square_root_measurement, trial_rng};
use polar_reading::polar::Synthesizer;
use polar_reading::qmat::{binary_entropy, fidelity};
use polar_reading::random::{random_bloch_in_ball, random_prior, random_qubit_cell};
use polar_reading::{cq_view, SourceModel};

const TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub worst_margin: f64,
    pub evaluated: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub instances: usize,
    pub seed: u64,
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

struct Tally {
    names: Vec<&'static str>,
    worst: Vec<f64>,
    count: Vec<usize>,
}

impl Tally {
    fn record(&mut self, name: &'static str, margin: f64) {
        let k = match self.names.iter().position(|n| *n == name) {
            Some(k) => k,
            None => {
                self.names.push(name);
                self.worst.push(f64::INFINITY);
                self.count.push(0);
                self.names.len() - 1
            }
        };
        // NaN margins count as failures
        self.worst[k] = if margin.is_nan() { f64::NEG_INFINITY } else { self.worst[k].min(margin) };
        self.count[k] += 1;
    }
}

pub fn run_checks(instances: usize, seed: u64) -> Result<VerifyReport> {
    let mut t = Tally {
        names: Vec::new(),
        worst: Vec::new(),
        count: Vec::new(),
    };
    for k in 0..instances {
        let mut rng = trial_rng(seed, k as u64);
        let p = random_prior(&mut rng, 0.05, 0.95);
        let cell = random_qubit_cell(&mut rng, p);
        let probe = random_bloch_in_ball(&mut rng);
        let e = cq_view(&cell, &probe.density())?;
        let r = one_step_report(&e)?;
        t.record("rate_sum", 2.0 * r.i - r.i_minus - r.i_plus + TOL);
        t.record("rate_plus", r.i_plus - r.i + TOL);
        let f = fidelity(e.state(0), e.state(1))?.min(1.0);
        t.record("plus_reliability", TOL - (r.z_plus - 2.0 * (p * (1.0 - p)).sqrt() * f * f).abs());

        let half = cq_view(&cell.with_prior(0.5)?, &probe.density())?;
        let h = one_step_report(&half)?;
        t.record("chain_rule_uniform", TOL - (h.i_minus + h.i_plus - 2.0 * h.i).abs());
        t.record("plus_reliability_uniform", TOL - (h.z_plus - h.z * h.z).abs());
        t.record("minus_reliability_uniform", 2.0 * h.z - h.z * h.z - h.z_minus + TOL);

        let i = rate(&e);
        let z = reliability(&e);
        let (lower, upper) = rate_reliability_bounds(p, z)?;
        t.record("rate_lower_bound", i - lower + TOL);
        t.record("rate_upper_bound", upper.min(roga_upper_bound(p, z)?) - i + TOL);
        t.record("holevo_lower_bound", i - holevo_lower_bound(&e)? + TOL);

        let povm = square_root_measurement(&e.priors(), e.states())?;
        t.record("pgm_error", 0.5 * z - measurement_error(&e.priors(), e.states(), &povm) + TOL);

        let lift = symmetric_lift(&e)?;
        t.record("lift_rate", TOL - (lift.rate() - (1.0 - lift.base_conditional_entropy())).abs());
        let model = SourceModel::induced(p)?;
        let synth = Synthesizer::new(&e, model, 1)?;
        for index in 1..=2 {
            let c = correspondence_for(&e, model, 1, index)?;
            t.record("lift_correspondence", TOL - c.max_deviation);
            t.record("lift_constant", TOL - (c.constant - 0.25).abs());
            let za = synthesized_reliability_from_views(&synth.views(index)?)?;
            let zl = lifted_reliability(&e, model, 1, index)?;
            t.record("lift_reliability", TOL - (za - zl).abs());
        }
        t.record("rate_at_most_entropy", binary_entropy(p) - i + TOL);
    }
    let checks: Vec<CheckResult> = t
        .names
        .iter()
        .zip(&t.worst)
        .zip(&t.count)
        .map(|((name, &worst), &count)| CheckResult {
            name,
            passed: worst >= 0.0,
            worst_margin: worst,
            evaluated: count,
        })
        .collect();
    Ok(VerifyReport {
        instances,
        seed,
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
