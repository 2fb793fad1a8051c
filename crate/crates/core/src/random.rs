//! Seeded sampling of random states, channels and memory cells.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cell::{ad_cell, KrausChannel, MemoryCell, ProbeState};
use crate::qmat::{CMatrix, DensityOperator, HermitianOperator, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Random mixed state `G G† / Tr(G G†)` with a `dim × rank` Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityOperator {
    let g = ginibre(rng, dim, rank.max(1));
    let op = HermitianOperator::from_matrix_unchecked(&g * g.adjoint());
    DensityOperator::normalized(op).expect("Ginibre product has positive trace")
}

pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator {
    random_density(rng, dim, 1)
}

/// Random state with full or reduced rank chosen uniformly from `1..=dim`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator {
    let rank = rng.gen_range(1..=dim);
    random_density(rng, dim, rank)
}

/// Random CPTP map with `n_kraus` Kraus operators, from a random isometry
/// `C^d → C^{k·d}` obtained by QR of a Ginibre matrix.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, dim: usize, n_kraus: usize) -> KrausChannel {
    let k = n_kraus.max(1);
    let g = ginibre(rng, k * dim, dim);
    let q = g.qr().q();
    let ops = (0..k)
        .map(|j| q.rows(j * dim, dim).into_owned())
        .collect();
    KrausChannel::new(ops).expect("isometry blocks form a valid channel")
}

/// Uniform point in the closed Bloch ball.
pub fn random_bloch_in_ball<R: Rng + ?Sized>(rng: &mut R) -> ProbeState {
    loop {
        let v: [f64; 3] = [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ];
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return ProbeState::new(v).expect("inside the ball");
        }
    }
}

/// Uniform point on the Bloch sphere (pure probe).
pub fn random_bloch_pure<R: Rng + ?Sized>(rng: &mut R) -> ProbeState {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return ProbeState::new([v[0] / n, v[1] / n, v[2] / n]).expect("unit vector");
        }
    }
}

/// Random qubit memory cell: two independent random channels with 1–3
/// Kraus operators each.
pub fn random_qubit_cell<R: Rng + ?Sized>(rng: &mut R, prior_p: f64) -> MemoryCell {
    let k0 = rng.gen_range(1..=3);
    let k1 = rng.gen_range(1..=3);
    let c0 = random_channel(rng, 2, k0);
    let c1 = random_channel(rng, 2, k1);
    MemoryCell::new(c0, c1, prior_p).expect("prior validated by caller")
}

/// Random amplitude-damping cell with `|γ0 − γ1| ≥ min_gap`.
pub fn random_ad_cell<R: Rng + ?Sized>(rng: &mut R, prior_p: f64, min_gap: f64) -> MemoryCell {
    loop {
        let g0: f64 = rng.gen_range(0.0..=1.0);
        let g1: f64 = rng.gen_range(0.0..=1.0);
        if (g0 - g1).abs() >= min_gap {
            return ad_cell(g0, g1, prior_p).expect("gammas in range");
        }
    }
}

/// Prior drawn uniformly from `[lo, hi]`.
pub fn random_prior<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..=hi)
}
