//! The symmetric lift of an asymmetric cq channel.
//!
//! `W̃^ũ = Σ_u p(u) |ũ⊕u⟩⟨ũ⊕u| ⊗ W^u` carries an extra classical register
//! `Z̃` (stored first) and is used with a uniform input. For blocks of `N`
//! cells the lifted synthesized channel is block diagonal in `z̃^N`, and its
//! `z̃ = 0` block reproduces the asymmetric synthesized channel.

use serde::Serialize;

use crate::cell::{cq_view, joint_state, rate, CqEnsemble, MemoryCell, ProbeState};
use crate::error::{invalid, Error, Result};
use crate::polar::{encode_index, product_output, unpack_bits, SourceModel, Synthesizer};
use crate::qmat::{
    fidelity_psd, von_neumann_entropy, CMatrix, DensityOperator, HermitianOperator, C64,
};

/// Largest block length for which lifted synthesized channels are built.
pub const LIFT_MAX_N: usize = 4;

#[derive(Clone, Debug)]
pub struct SymmetricLift {
    pub base: CqEnsemble,
    /// Uniform-prior ensemble on `Z̃ ⊗ B`.
    pub lifted: CqEnsemble,
}

impl SymmetricLift {
    pub fn rate(&self) -> f64 {
        rate(&self.lifted)
    }

    /// `H(X|B)` of the base ensemble.
    pub fn base_conditional_entropy(&self) -> f64 {
        von_neumann_entropy(&joint_state(&self.base)) - von_neumann_entropy(&self.base.average())
    }
}

pub fn symmetric_lift(e: &CqEnsemble) -> Result<SymmetricLift> {
    let d = e.dim();
    let pu = e.priors();
    let mut states = Vec::with_capacity(2);
    for ut in 0..2usize {
        let mut m = CMatrix::zeros(2 * d, 2 * d);
        for (u, w) in pu.iter().enumerate() {
            let off = (ut ^ u) * d;
            let block = e.state(u as u8).matrix() * C64::new(*w, 0.0);
            m.view_mut((off, off), (d, d)).copy_from(&block);
        }
        states.push(DensityOperator::from_operator_unchecked(
            HermitianOperator::from_matrix_unchecked(m),
        ));
    }
    let s1 = states.pop().expect("two inputs");
    let s0 = states.pop().expect("two inputs");
    Ok(SymmetricLift {
        base: e.clone(),
        lifted: CqEnsemble::new(0.5, s0, s1)?,
    })
}

/// Block-diagonal lifted synthesized operators, indexed by packed `z̃^N`.
struct LiftedBlocks {
    synth: Synthesizer,
    /// `W^{uG}(ρ^{⊗N})` for every packed `u`.
    products: Vec<HermitianOperator>,
}

impl LiftedBlocks {
    fn new(e: &CqEnsemble, model: SourceModel, n: u32) -> Result<Self> {
        let big_n = 1usize << n.min(20);
        if n > 20 || big_n > LIFT_MAX_N {
            return Err(Error::CapExceeded {
                what: "lifted synthesized channels",
                n: big_n,
                cap: LIFT_MAX_N,
            });
        }
        let synth = Synthesizer::new(e, model, n)?;
        let products = (0..1u64 << big_n)
            .map(|u| product_output(synth.outputs(), &unpack_bits(encode_index(u, big_n), big_n)))
            .collect();
        Ok(Self { synth, products })
    }

    fn block_len(&self) -> usize {
        self.synth.block_len()
    }

    /// `M_{z̃}^{prefix,b} = 2^{-(N-i)} Σ_{ũ suffix} Σ_u p(u) [(ũ⊕u)G = z̃] W^{uG}`.
    fn blocks(&self, index: usize, prefix: u64, b: u8) -> Vec<Option<HermitianOperator>> {
        let big_n = self.block_len();
        let mut out: Vec<Option<HermitianOperator>> = vec![None; 1 << big_n];
        let head = prefix | (u64::from(b) << (index - 1));
        let scale = 0.5f64.powi((big_n - index) as i32);
        for suffix in 0..(1u64 << (big_n - index)) {
            let ut = head | (suffix << index);
            for u in 0..(1u64 << big_n) {
                let w = self.synth.table().prob(u);
                if w == 0.0 {
                    continue;
                }
                let z = encode_index(ut ^ u, big_n) as usize;
                let term = &self.products[u as usize];
                match &mut out[z] {
                    Some(acc) => acc.add_scaled(term, w * scale).expect("dimensions agree"),
                    slot => *slot = Some(term.scaled(w * scale)),
                }
            }
        }
        out
    }
}

/// Proportionality between the projected lifted channel and the asymmetric one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Correspondence {
    pub n: usize,
    pub index: usize,
    /// Least-squares constant `c` in `P ≈ c·A`.
    pub constant: f64,
    /// `max ‖P − cA‖_max / max ‖cA‖_max` over prefixes and `u_i`.
    pub max_deviation: f64,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Compares `½·2^{-(i-1)} ⟨0|M^{prefix,u_i}|0⟩` with the unnormalized
/// asymmetric joint block `P(prefix,u_i)·W̄^{prefix,u_i}` over all prefixes.
pub fn trace_out_correspondence(
    cell: &MemoryCell,
    probe: &ProbeState,
    model: SourceModel,
    n: u32,
    index: usize,
) -> Result<Correspondence> {
    correspondence_for(&cq_view(cell, &probe.density())?, model, n, index)
}

pub fn correspondence_for(
    e: &CqEnsemble,
    model: SourceModel,
    n: u32,
    index: usize,
) -> Result<Correspondence> {
    let lb = LiftedBlocks::new(e, model, n)?;
    let big_n = lb.block_len();
    if index == 0 || index > big_n {
        return Err(invalid("i", format!("{index} is not in 1..={big_n}")));
    }
    let weight = 0.5 * 0.5f64.powi(index as i32 - 1);
    let mut pairs = Vec::new();
    for pre in 0..(1u64 << (index - 1)) {
        for b in 0..2u8 {
            let projected = lb.blocks(index, pre, b).swap_remove(0);
            let dim = lb.products[0].dim();
            let p = projected.map_or_else(|| HermitianOperator::zeros(dim), |m| m.scaled(weight));
            pairs.push((p, lb.synth.branch_operator(index, pre, b)));
        }
    }
    let num: f64 = pairs.iter().map(|(p, a)| a.trace_product(p)).sum();
    let den: f64 = pairs.iter().map(|(_, a)| a.trace_product(a)).sum();
    let c = if den > 0.0 { num / den } else { 0.0 };
    let mut dev: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (p, a) in &pairs {
        let ca = a.scaled(c);
        dev = dev.max(p.max_abs_diff(&ca));
        scale = scale.max(max_abs(ca.matrix()));
    }
    Ok(Correspondence {
        n: big_n,
        index,
        constant: c,
        max_deviation: if scale > 0.0 { dev / scale } else { dev },
    })
}

/// `Z(W̃_N^{(i)}) = Σ_prefix 2^{-(i-1)} Σ_{z̃} F(M_{z̃}^{prefix,0}, M_{z̃}^{prefix,1})`.
pub fn lifted_reliability(e: &CqEnsemble, model: SourceModel, n: u32, index: usize) -> Result<f64> {
    let lb = LiftedBlocks::new(e, model, n)?;
    let big_n = lb.block_len();
    if index == 0 || index > big_n {
        return Err(invalid("i", format!("{index} is not in 1..={big_n}")));
    }
    let weight = 0.5f64.powi(index as i32 - 1);
    let mut z = 0.0;
    for pre in 0..(1u64 << (index - 1)) {
        let m0 = lb.blocks(index, pre, 0);
        let m1 = lb.blocks(index, pre, 1);
        for (a, b) in m0.iter().zip(&m1) {
            if let (Some(a), Some(b)) = (a, b) {
                z += weight * fidelity_psd(a, b)?;
            }
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::ad_cell;
    use crate::qmat::fidelity;

    fn sample() -> CqEnsemble {
        let cell = ad_cell(0.25, 0.8, 0.3).unwrap();
        cq_view(&cell, &ProbeState::new([0.5, -0.1, -0.6]).unwrap().density()).unwrap()
    }

    #[test]
    fn lift_is_symmetric() {
        let l = symmetric_lift(&sample()).unwrap();
        let d = l.base.dim();
        let s0 = l.lifted.state(0).matrix();
        let s1 = l.lifted.state(1).matrix();
        for r in 0..2 * d {
            for c in 0..2 * d {
                let flipped = s1[((r + d) % (2 * d), (c + d) % (2 * d))];
                assert!((s0[(r, c)] - flipped).norm() < 1e-15);
            }
        }
        // exactly two nonzero register blocks per input, off-diagonal blocks zero
        for c in 0..d {
            for r in 0..d {
                assert_eq!(s0[(r, c + d)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn lift_rate_examples() {
        let s = ProbeState::new([0.1, 0.2, 0.3]).unwrap().density();
        let l = symmetric_lift(&CqEnsemble::new(0.5, s.clone(), s).unwrap()).unwrap();
        assert!(l.rate().abs() < 1e-12);
        assert!((l.base_conditional_entropy() - 1.0).abs() < 1e-12);
        let e = CqEnsemble::new(0.2, DensityOperator::basis(2, 0), DensityOperator::basis(2, 1)).unwrap();
        assert!((symmetric_lift(&e).unwrap().rate() - 1.0).abs() < 1e-12);
        let l = symmetric_lift(&sample()).unwrap();
        assert!((l.rate() - (1.0 - l.base_conditional_entropy())).abs() < 1e-12);
    }

    #[test]
    fn single_cell_projection() {
        let e = sample();
        let c = correspondence_for(&e, SourceModel::induced(0.3).unwrap(), 0, 1).unwrap();
        assert!(c.max_deviation < 1e-12);
        assert!((c.constant - 0.5).abs() < 1e-12);
        let z = lifted_reliability(&e, SourceModel::induced(0.3).unwrap(), 0, 1).unwrap();
        let f = fidelity(e.state(0), e.state(1)).unwrap();
        assert!((z - 2.0 * (0.21f64).sqrt() * f).abs() < 1e-10);
    }

    #[test]
    fn lift_cap() {
        assert!(matches!(
            lifted_reliability(&sample(), SourceModel::induced(0.3).unwrap(), 3, 1),
            Err(Error::CapExceeded { .. })
        ));
    }
}
