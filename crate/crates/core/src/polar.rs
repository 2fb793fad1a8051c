//! Channel combining and splitting.
//!
//! `G_N = R_N F^{⊗n}` maps source bits to cell labels, `x = u·G_N`. The
//! synthesized channel `i` takes `u_i` to the prefix `u_1^{i-1}` plus all `N`
//! outputs; for a fixed prefix its two conditional output states are the
//! suffix averages of product outputs `⊗_j W^{x_j}(ρ)`.
//!
//! Bit vectors are `Vec<u8>` of 0/1 values, `u[0] = u_1`. Packed indices put
//! `u_{k+1}` at bit `k`, so a prefix of length `l` is the low `l` bits.

use crate::cell::{cq_view, CqEnsemble, MemoryCell, ProbeState};
use crate::error::{invalid, Error, Result};
use crate::qmat::{tensor, CMatrix, DensityOperator, HermitianOperator, C64};

/// Largest level for which the dense binary matrix is materialized.
pub const TRANSFORM_MAX_LEVEL: u32 = 12;
/// Default cap on `N` for full source tables.
pub const DEFAULT_TABLE_CAP: usize = 8;
/// Largest `N` for exact synthesized channels (256-dimensional outputs for qubits).
pub const EXACT_MAX_N: usize = 8;

/// Reverses the lowest `n` bits of `j`.
pub fn bit_reverse(j: usize, n: u32) -> usize {
    if n == 0 {
        return 0;
    }
    j.reverse_bits() >> (usize::BITS - n)
}

/// The binary polar transform `G_N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarTransform {
    n: u32,
    rows: Vec<Vec<u8>>,
}

/// Builds `G_N = R_N F^{⊗n}` with `F = [[1,0],[1,1]]`.
pub fn polar_transform(n: u32) -> Result<PolarTransform> {
    if n > TRANSFORM_MAX_LEVEL {
        return Err(Error::CapExceeded {
            what: "the dense polar transform",
            n: 1usize << n.min(63),
            cap: 1 << TRANSFORM_MAX_LEVEL,
        });
    }
    let big_n = 1usize << n;
    // F^{⊗n}[i][j] = 1 iff the bits of j are a subset of the bits of i.
    let kron_row = |i: usize| -> Vec<u8> { (0..big_n).map(|j| u8::from(j & !i == 0)).collect() };
    let rows = (0..big_n).map(|i| kron_row(bit_reverse(i, n))).collect();
    Ok(PolarTransform { n, rows })
}

impl PolarTransform {
    pub fn level(&self) -> u32 {
        self.n
    }

    pub fn block_len(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn row_string(&self, i: usize) -> String {
        self.rows[i].iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
    }

    /// Product over GF(2).
    pub fn gf2_mul(&self, other: &PolarTransform) -> Vec<Vec<u8>> {
        let n = self.block_len();
        (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| (0..n).fold(0u8, |acc, k| acc ^ (self.rows[r][k] & other.rows[k][c])))
                    .collect()
            })
            .collect()
    }

    /// `x = u·G_N mod 2` by direct matrix-vector product.
    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>> {
        let n = self.block_len();
        if u.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: u.len() });
        }
        Ok((0..n)
            .map(|j| (0..n).fold(0u8, |acc, i| acc ^ (u[i] & self.rows[i][j])))
            .collect())
    }
}

/// `x = u·G_N` via the `O(N log N)` butterfly: bit-reversal permutation
/// followed by a superset-sum transform over GF(2).
pub fn encode_bits(u: &[u8]) -> Result<Vec<u8>> {
    let big_n = u.len();
    if !big_n.is_power_of_two() {
        return Err(invalid("u", format!("length {big_n} is not a power of two")));
    }
    let n = big_n.trailing_zeros();
    let mut v = vec![0u8; big_n];
    for (i, &b) in u.iter().enumerate() {
        v[bit_reverse(i, n)] = b & 1;
    }
    let mut half = 1;
    while half < big_n {
        for i in 0..big_n {
            if i & half == 0 {
                v[i] ^= v[i | half];
            }
        }
        half <<= 1;
    }
    Ok(v)
}

/// Packed version of [`encode_bits`] for `N ≤ 64`.
pub fn encode_index(u: u64, big_n: usize) -> u64 {
    let n = big_n.trailing_zeros();
    let mut v = 0u64;
    for i in 0..big_n {
        if (u >> i) & 1 == 1 {
            v |= 1 << bit_reverse(i, n);
        }
    }
    let mut half = 1;
    while half < big_n {
        for i in 0..big_n {
            if i & half == 0 && (v >> (i | half)) & 1 == 1 {
                v ^= 1 << i;
            }
        }
        half <<= 1;
    }
    v
}

pub fn pack_bits(bits: &[u8]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (k, &b)| acc | (u64::from(b & 1) << k))
}

pub fn unpack_bits(v: u64, len: usize) -> Vec<u8> {
    (0..len).map(|k| ((v >> k) & 1) as u8).collect()
}

/// How the source vector `U^N` is distributed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// `U_j` i.i.d. with `P(U_j = 0) = p`.
    IidU,
    /// `U^N = X^N G_N` with `X_j` i.i.d. and `P(X_j = 0) = p`.
    InducedFromIidX,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceModel {
    pub kind: SourceKind,
    pub prior_p: f64,
}

impl SourceModel {
    pub fn new(kind: SourceKind, prior_p: f64) -> Result<Self> {
        if !(prior_p > 0.0 && prior_p < 1.0) {
            return Err(invalid("prior_p", format!("{prior_p} is not in (0, 1)")));
        }
        Ok(Self { kind, prior_p })
    }

    pub fn iid_u(prior_p: f64) -> Result<Self> {
        Self::new(SourceKind::IidU, prior_p)
    }

    pub fn induced(prior_p: f64) -> Result<Self> {
        Self::new(SourceKind::InducedFromIidX, prior_p)
    }

    /// Both kinds coincide at `p = 1/2`: every `u^N` has probability `2^{-N}`.
    pub fn is_uniform(&self) -> bool {
        self.prior_p == 0.5
    }

    fn bit_prob(&self, b: u64) -> f64 {
        if b == 0 {
            self.prior_p
        } else {
            1.0 - self.prior_p
        }
    }

    /// `p(u^N)` for a packed vector.
    pub fn prob(&self, u: u64, big_n: usize) -> f64 {
        let v = match self.kind {
            SourceKind::IidU => u,
            SourceKind::InducedFromIidX => encode_index(u, big_n),
        };
        (0..big_n).map(|j| self.bit_prob((v >> j) & 1)).product()
    }
}

/// Full probability table of a source model with prefix marginals.
#[derive(Clone, Debug)]
pub struct SourceTable {
    model: SourceModel,
    big_n: usize,
    /// `marginals[l][prefix] = P(U_1^l = prefix)`, `l = 0..=N`.
    marginals: Vec<Vec<f64>>,
}

/// Probability table over all `2^N` source vectors.
pub fn source_distribution(model: SourceModel, n: u32) -> Result<SourceTable> {
    SourceTable::with_cap(model, n, DEFAULT_TABLE_CAP)
}

impl SourceTable {
    pub fn with_cap(model: SourceModel, n: u32, cap: usize) -> Result<Self> {
        let big_n = 1usize << n.min(20);
        if n > 20 || big_n > cap {
            return Err(Error::CapExceeded {
                what: "full source tables",
                n: big_n,
                cap,
            });
        }
        let full: Vec<f64> = (0..1u64 << big_n).map(|u| model.prob(u, big_n)).collect();
        let mut marginals = vec![Vec::new(); big_n + 1];
        marginals[big_n] = full;
        for l in (0..big_n).rev() {
            let next = &marginals[l + 1];
            let half = 1usize << l;
            marginals[l] = (0..half).map(|pre| next[pre] + next[pre | half]).collect();
        }
        Ok(Self {
            model,
            big_n,
            marginals,
        })
    }

    pub fn model(&self) -> SourceModel {
        self.model
    }

    pub fn block_len(&self) -> usize {
        self.big_n
    }

    pub fn probs(&self) -> &[f64] {
        &self.marginals[self.big_n]
    }

    pub fn prob(&self, u: u64) -> f64 {
        self.marginals[self.big_n][u as usize]
    }

    /// `P(U_1^l = prefix)`.
    pub fn prefix_prob(&self, prefix: u64, len: usize) -> f64 {
        self.marginals[len][prefix as usize]
    }

    /// `P(U_1^{l} = prefix, U_{l+1} = b)`.
    pub fn joint_next(&self, prefix: u64, len: usize, b: u8) -> f64 {
        self.marginals[len + 1][(prefix | (u64::from(b) << len)) as usize]
    }

    /// `P(U_{l+1} = 1 | U_1^l = prefix)`; zero when the prefix is impossible.
    pub fn conditional_one(&self, prefix: u64, len: usize) -> f64 {
        let total = self.prefix_prob(prefix, len);
        if total <= 0.0 {
            return 0.0;
        }
        (self.joint_next(prefix, len, 1) / total).clamp(0.0, 1.0)
    }
}

/// Product output `⊗_j W^{x_j}(ρ)` for per-label outputs `outputs[x]`.
pub fn product_output(outputs: &[DensityOperator; 2], x: &[u8]) -> HermitianOperator {
    let mut acc = HermitianOperator::identity(1);
    for &b in x {
        acc = tensor(&acc, outputs[usize::from(b & 1)].op());
    }
    acc
}

/// `⊗_j W^{x_j}(ρ)` for a memory cell and probe.
pub fn channel_output(cell: &MemoryCell, probe: &ProbeState, x: &[u8]) -> Result<DensityOperator> {
    let e = cq_view(cell, &probe.density())?;
    Ok(DensityOperator::from_operator_unchecked(product_output(e.states(), x)))
}

/// One synthesized channel seen through a fixed prefix.
#[derive(Clone, Debug)]
pub struct SynthesizedChannelView {
    pub block_len: usize,
    /// 1-based index `i`.
    pub index: usize,
    pub prefix: Vec<u8>,
    /// `P(U_1^{i-1} = prefix)`.
    pub prefix_prob: f64,
    /// `P(U_1^{i-1} = prefix, U_i = b)`.
    pub joint: [f64; 2],
    /// `P(U_i = 0 | prefix)`.
    pub cond_prior: f64,
    /// Normalized conditional outputs on `B^N`.
    pub cond_states: [DensityOperator; 2],
}

impl SynthesizedChannelView {
    /// The conditional states as a cq ensemble with the conditional prior.
    pub fn ensemble(&self) -> Result<CqEnsemble> {
        CqEnsemble::new(
            self.cond_prior,
            self.cond_states[0].clone(),
            self.cond_states[1].clone(),
        )
    }
}

/// Exact synthesized channels for one cq ensemble and source model, by
/// enumerating suffixes.
#[derive(Clone, Debug)]
pub struct Synthesizer {
    outputs: [DensityOperator; 2],
    table: SourceTable,
}

impl Synthesizer {
    pub fn new(ensemble: &CqEnsemble, model: SourceModel, n: u32) -> Result<Self> {
        let big_n = 1usize << n.min(20);
        if n > 20 || big_n > EXACT_MAX_N {
            return Err(Error::CapExceeded {
                what: "exact synthesized channels",
                n: big_n,
                cap: EXACT_MAX_N,
            });
        }
        Ok(Self {
            outputs: ensemble.states().clone(),
            table: SourceTable::with_cap(model, n, EXACT_MAX_N)?,
        })
    }

    pub fn from_cell(cell: &MemoryCell, probe: &ProbeState, model: SourceModel, n: u32) -> Result<Self> {
        Self::new(&cq_view(cell, &probe.density())?, model, n)
    }

    pub fn block_len(&self) -> usize {
        self.table.block_len()
    }

    pub fn table(&self) -> &SourceTable {
        &self.table
    }

    pub fn outputs(&self) -> &[DensityOperator; 2] {
        &self.outputs
    }

    /// Unnormalized `Σ_suffix p(prefix, b, suffix) ⊗_j W^{x_j}(ρ)`.
    pub fn branch_operator(&self, index: usize, prefix: u64, b: u8) -> HermitianOperator {
        let big_n = self.block_len();
        let head = prefix | (u64::from(b) << (index - 1));
        let dim = self.outputs[0].dim().pow(big_n as u32);
        let mut acc = HermitianOperator::zeros(dim);
        for suffix in 0..(1u64 << (big_n - index)) {
            let u = head | (suffix << index);
            let w = self.table.prob(u);
            if w == 0.0 {
                continue;
            }
            let x = unpack_bits(encode_index(u, big_n), big_n);
            acc.add_scaled(&product_output(&self.outputs, &x), w)
                .expect("dimensions agree");
        }
        acc
    }

    /// The view of channel `index` (1-based) given `prefix` (length `index − 1`).
    pub fn view(&self, index: usize, prefix: &[u8]) -> Result<SynthesizedChannelView> {
        let big_n = self.block_len();
        if index == 0 || index > big_n {
            return Err(invalid("i", format!("{index} is not in 1..={big_n}")));
        }
        if prefix.len() != index - 1 {
            return Err(Error::LengthMismatch {
                expected: index - 1,
                got: prefix.len(),
            });
        }
        let packed = pack_bits(prefix);
        let prefix_prob = self.table.prefix_prob(packed, index - 1);
        if prefix_prob <= 0.0 {
            return Err(Error::ZeroProbabilityPrefix);
        }
        let mut joint = [0.0; 2];
        let mut states = Vec::with_capacity(2);
        for b in 0..2u8 {
            let op = self.branch_operator(index, packed, b);
            let w = op.trace();
            joint[usize::from(b)] = self.table.joint_next(packed, index - 1, b);
            states.push(if w > 0.0 {
                DensityOperator::from_operator_unchecked(op.scaled(1.0 / w))
            } else {
                DensityOperator::maximally_mixed(op.dim())
            });
        }
        let s1 = states.pop().expect("two branches");
        let s0 = states.pop().expect("two branches");
        Ok(SynthesizedChannelView {
            block_len: big_n,
            index,
            prefix: prefix.to_vec(),
            prefix_prob,
            joint,
            cond_prior: joint[0] / (joint[0] + joint[1]),
            cond_states: [s0, s1],
        })
    }

    /// Views for every positive-probability prefix of channel `index`, in
    /// packed-prefix order.
    pub fn views(&self, index: usize) -> Result<Vec<SynthesizedChannelView>> {
        (0..1u64 << (index - 1))
            .filter(|&pre| self.table.prefix_prob(pre, index - 1) > 0.0)
            .map(|pre| self.view(index, &unpack_bits(pre, index - 1)))
            .collect()
    }
}

/// Exact synthesized channel view by suffix enumeration.
pub fn synthesize(
    cell: &MemoryCell,
    probe: &ProbeState,
    model: SourceModel,
    n: u32,
    index: usize,
    prefix: &[u8],
) -> Result<SynthesizedChannelView> {
    Synthesizer::from_cell(cell, probe, model, n)?.view(index, prefix)
}

/// Recursive construction of the same view from two level-`n−1` views.
///
/// Valid when the halves of the source block are independent copies of the
/// level-`n−1` source, which holds for [`SourceKind::InducedFromIidX`] (and
/// for i.i.d. `U` at `p = 1/2`, where both kinds coincide).
pub fn synthesize_recursive(
    ensemble: &CqEnsemble,
    model: SourceModel,
    n: u32,
    index: usize,
    prefix: &[u8],
) -> Result<SynthesizedChannelView> {
    if model.kind == SourceKind::IidU && !model.is_uniform() {
        return Err(Error::Unsupported(
            "recursive synthesis for i.i.d. U with a non-uniform prior".into(),
        ));
    }
    let big_n = 1usize << n;
    if big_n > EXACT_MAX_N {
        return Err(Error::CapExceeded {
            what: "exact synthesized channels",
            n: big_n,
            cap: EXACT_MAX_N,
        });
    }
    if index == 0 || index > big_n {
        return Err(invalid("i", format!("{index} is not in 1..={big_n}")));
    }
    if prefix.len() != index - 1 {
        return Err(Error::LengthMismatch {
            expected: index - 1,
            got: prefix.len(),
        });
    }
    let (joint, ops) = recurse(ensemble, model, n, index, prefix);
    let prefix_prob = joint[0] + joint[1];
    if prefix_prob <= 0.0 {
        return Err(Error::ZeroProbabilityPrefix);
    }
    let [o0, o1] = ops;
    Ok(SynthesizedChannelView {
        block_len: big_n,
        index,
        prefix: prefix.to_vec(),
        prefix_prob,
        joint,
        cond_prior: joint[0] / prefix_prob,
        cond_states: [
            DensityOperator::from_operator_unchecked(o0),
            DensityOperator::from_operator_unchecked(o1),
        ],
    })
}

/// Returns `P(prefix, U_i = b)` and the normalized branch states.
fn recurse(
    ensemble: &CqEnsemble,
    model: SourceModel,
    n: u32,
    index: usize,
    prefix: &[u8],
) -> ([f64; 2], [HermitianOperator; 2]) {
    if n == 0 {
        let p = model.prior_p;
        return (
            [p, 1.0 - p],
            [ensemble.state(0).op().clone(), ensemble.state(1).op().clone()],
        );
    }
    // u_{2k-1} = s_k ⊕ t_k and u_{2k} = t_k; the first half of the block is
    // driven by s, the second by t.
    let half_index = index.div_ceil(2);
    let pairs = half_index - 1;
    let s_pre: Vec<u8> = (0..pairs).map(|k| prefix[2 * k] ^ prefix[2 * k + 1]).collect();
    let t_pre: Vec<u8> = (0..pairs).map(|k| prefix[2 * k + 1]).collect();
    let (js, ss) = recurse(ensemble, model, n - 1, half_index, &s_pre);
    let (jt, st) = recurse(ensemble, model, n - 1, half_index, &t_pre);
    let dim = ss[0].dim() * st[0].dim();
    let mut joint = [0.0; 2];
    let mut ops = [HermitianOperator::zeros(dim), HermitianOperator::zeros(dim)];
    for b in 0..2u8 {
        let bi = usize::from(b);
        if index % 2 == 1 {
            // Minus step: U_i = S ⊕ T, marginalize over T.
            for t in 0..2u8 {
                let s = b ^ t;
                let w = js[usize::from(s)] * jt[usize::from(t)];
                if w > 0.0 {
                    ops[bi]
                        .add_scaled(&tensor(&ss[usize::from(s)], &st[usize::from(t)]), w)
                        .expect("dimensions agree");
                }
                joint[bi] += w;
            }
        } else {
            // Plus step: U_{i-1} = S ⊕ T is known, U_i = T.
            let s = prefix[index - 2] ^ b;
            let w = js[usize::from(s)] * jt[bi];
            ops[bi] = tensor(&ss[usize::from(s)], &st[bi]).scaled(1.0);
            joint[bi] = w;
        }
    }
    for (op, &w) in ops.iter_mut().zip(&joint) {
        if index % 2 == 1 && w > 0.0 {
            *op = op.scaled(1.0 / w);
        }
    }
    (joint, ops)
}

/// The one-step split `(W, W) → (W⁻, W⁺)` with `U1, U2` i.i.d. under the
/// ensemble prior.
#[derive(Clone, Debug)]
pub struct OneStep {
    /// `u1 ↦ Σ_{u2} p(u2) W^{u1⊕u2}(ρ) ⊗ W^{u2}(ρ)` on `B1 B2`.
    pub minus: CqEnsemble,
    /// `u2 ↦ Σ_{u1} p(u1) |u1⟩⟨u1| ⊗ W^{u1⊕u2}(ρ) ⊗ W^{u2}(ρ)` on `U1 B1 B2`.
    pub plus: CqEnsemble,
}

pub fn one_step_transform(e: &CqEnsemble) -> Result<OneStep> {
    let pu = e.priors();
    let d = e.dim();
    let mut minus = Vec::with_capacity(2);
    let mut plus = Vec::with_capacity(2);
    for b in 0..2u8 {
        let mut m = HermitianOperator::zeros(d * d);
        for u2 in 0..2u8 {
            m.add_scaled(&tensor(e.state(b ^ u2).op(), e.state(u2).op()), pu[usize::from(u2)])?;
        }
        minus.push(DensityOperator::from_operator_unchecked(m));

        let mut big = CMatrix::zeros(2 * d * d, 2 * d * d);
        for u1 in 0..2u8 {
            let block = tensor(e.state(u1 ^ b).op(), e.state(b).op()).into_matrix()
                * C64::new(pu[usize::from(u1)], 0.0);
            let off = usize::from(u1) * d * d;
            big.view_mut((off, off), (d * d, d * d)).copy_from(&block);
        }
        plus.push(DensityOperator::from_operator_unchecked(
            HermitianOperator::from_matrix_unchecked(big),
        ));
    }
    let m1 = minus.pop().expect("two");
    let m0 = minus.pop().expect("two");
    let p1 = plus.pop().expect("two");
    let p0 = plus.pop().expect("two");
    Ok(OneStep {
        minus: CqEnsemble::new(e.prior_p(), m0, m1)?,
        plus: CqEnsemble::new(e.prior_p(), p0, p1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{ad_cell, rate};

    fn rows_of(t: &PolarTransform) -> Vec<String> {
        (0..t.block_len()).map(|i| t.row_string(i)).collect()
    }

    #[test]
    fn transform_small_levels() {
        assert_eq!(rows_of(&polar_transform(0).unwrap()), vec!["1"]);
        assert_eq!(rows_of(&polar_transform(1).unwrap()), vec!["10", "11"]);
        assert_eq!(
            rows_of(&polar_transform(2).unwrap()),
            vec!["1000", "1010", "1100", "1111"]
        );
    }

    #[test]
    fn transform_cap() {
        assert!(matches!(polar_transform(13), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_bits(&[0; 8]).unwrap(), vec![0; 8]);
        assert_eq!(encode_bits(&[1, 1]).unwrap(), vec![0, 1]);
        // x = (u1⊕u2⊕u3⊕u4, u3⊕u4, u2⊕u4, u4)
        assert_eq!(encode_bits(&[0, 0, 1, 1]).unwrap(), vec![0, 0, 1, 1]);
        assert!(encode_bits(&[1, 0, 1]).is_err());
        let t = polar_transform(2).unwrap();
        assert!(matches!(t.encode(&[1, 0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn butterfly_matches_matrix() {
        for n in 0..=4u32 {
            let t = polar_transform(n).unwrap();
            let big_n = t.block_len();
            for u in 0..(1u64 << big_n) {
                let bits = unpack_bits(u, big_n);
                let x = t.encode(&bits).unwrap();
                assert_eq!(encode_bits(&bits).unwrap(), x);
                assert_eq!(encode_index(u, big_n), pack_bits(&x));
            }
        }
    }

    #[test]
    fn encoding_splits_into_halves() {
        // u·G_N = (s·G_{N/2}, t·G_{N/2}) with s = u_odd ⊕ u_even, t = u_even.
        for u in 0..256u64 {
            let bits = unpack_bits(u, 8);
            let s: Vec<u8> = (0..4).map(|k| bits[2 * k] ^ bits[2 * k + 1]).collect();
            let t: Vec<u8> = (0..4).map(|k| bits[2 * k + 1]).collect();
            let mut want = encode_bits(&s).unwrap();
            want.extend(encode_bits(&t).unwrap());
            assert_eq!(encode_bits(&bits).unwrap(), want);
        }
    }

    #[test]
    fn source_table_examples() {
        for kind in [SourceKind::IidU, SourceKind::InducedFromIidX] {
            let t = source_distribution(SourceModel::new(kind, 0.5).unwrap(), 1).unwrap();
            assert!(t.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        }
        let m = SourceModel::induced(0.8).unwrap();
        let t = source_distribution(m, 1).unwrap();
        let px = |b: u8| if b == 0 { 0.8 } else { 0.2 };
        for u in 0..4u64 {
            let (u1, u2) = ((u & 1) as u8, ((u >> 1) & 1) as u8);
            assert!((t.prob(u) - px(u1 ^ u2) * px(u2)).abs() < 1e-15);
        }
        // Enumerated: P(U1 = 0) = 0.8² + 0.2² = 0.68.
        assert!((t.prefix_prob(0, 1) - 0.68).abs() < 1e-15);
        assert!(matches!(
            source_distribution(m, 4),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn tables_sum_to_one() {
        for kind in [SourceKind::IidU, SourceKind::InducedFromIidX] {
            let t = source_distribution(SourceModel::new(kind, 0.27).unwrap(), 3).unwrap();
            let s: f64 = t.probs().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_output_examples() {
        let cell = ad_cell(0.0, 0.6, 0.5).unwrap();
        let probe = ProbeState::new([0.3, 0.0, 0.4]).unwrap();
        let rho = probe.density();
        let out = channel_output(&cell, &probe, &[0, 0]).unwrap();
        assert!(out.op().max_abs_diff(rho.tensor(&rho).op()) < 1e-15);
        let one = channel_output(&cell, &probe, &[1]).unwrap();
        assert!(one.op().max_abs_diff(cell.channel(1).apply(&rho).unwrap().op()) < 1e-15);
        let out = channel_output(&cell, &probe, &[1, 0, 1, 1]).unwrap();
        assert!((out.op().trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn synthesize_single_use() {
        let cell = ad_cell(0.1, 0.7, 0.3).unwrap();
        let probe = ProbeState::new([0.5, 0.1, -0.6]).unwrap();
        let v = synthesize(&cell, &probe, SourceModel::iid_u(0.3).unwrap(), 0, 1, &[]).unwrap();
        let e = cq_view(&cell, &probe.density()).unwrap();
        assert!(v.cond_states[0].op().max_abs_diff(e.state(0).op()) < 1e-15);
        assert!(v.cond_states[1].op().max_abs_diff(e.state(1).op()) < 1e-15);
        assert!((v.cond_prior - 0.3).abs() < 1e-15);
    }

    #[test]
    fn synthesize_two_uses_matches_split() {
        let cell = ad_cell(0.2, 0.9, 0.35).unwrap();
        let probe = ProbeState::new([0.4, -0.3, 0.2]).unwrap();
        let model = SourceModel::iid_u(0.35).unwrap();
        let e = cq_view(&cell, &probe.density()).unwrap();
        let split = one_step_transform(&e).unwrap();
        let v1 = synthesize(&cell, &probe, model, 1, 1, &[]).unwrap();
        for b in 0..2u8 {
            assert!(
                v1.cond_states[usize::from(b)].op().max_abs_diff(split.minus.state(b).op()) < 1e-14
            );
        }
        // Channel 2 for prefix u1: W^{u1⊕u2} ⊗ W^{u2}, the u1 block of W⁺.
        for u1 in 0..2u8 {
            let v2 = synthesize(&cell, &probe, model, 1, 2, &[u1]).unwrap();
            for u2 in 0..2u8 {
                let want = tensor(e.state(u1 ^ u2).op(), e.state(u2).op());
                assert!(v2.cond_states[usize::from(u2)].op().max_abs_diff(&want) < 1e-14);
            }
        }
    }

    #[test]
    fn zero_probability_prefix_and_bad_lengths() {
        let cell = ad_cell(0.2, 0.9, 0.35).unwrap();
        let probe = ProbeState::one();
        let s = Synthesizer::from_cell(&cell, &probe, SourceModel::iid_u(0.35).unwrap(), 1).unwrap();
        assert!(matches!(s.view(2, &[]), Err(Error::LengthMismatch { .. })));
        assert!(s.view(3, &[0, 0]).is_err());
        assert!(matches!(
            Synthesizer::from_cell(&cell, &probe, SourceModel::iid_u(0.35).unwrap(), 4),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn one_step_identical_and_noiseless() {
        let s = ProbeState::new([0.2, 0.3, 0.1]).unwrap().density();
        let e = CqEnsemble::new(0.4, s.clone(), s).unwrap();
        let split = one_step_transform(&e).unwrap();
        assert!(split.minus.state(0).op().max_abs_diff(split.minus.state(1).op()) < 1e-15);

        let e = CqEnsemble::new(0.5, DensityOperator::basis(2, 0), DensityOperator::basis(2, 1)).unwrap();
        let split = one_step_transform(&e).unwrap();
        assert!((rate(&split.minus) - 1.0).abs() < 1e-12);
        assert!((rate(&split.plus) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recursion_rejects_nonuniform_iid() {
        let e = CqEnsemble::new(0.3, DensityOperator::basis(2, 0), DensityOperator::basis(2, 1)).unwrap();
        assert!(matches!(
            synthesize_recursive(&e, SourceModel::iid_u(0.3).unwrap(), 1, 1, &[]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn recursion_matches_enumeration() {
        let cell = ad_cell(0.15, 0.8, 0.3).unwrap();
        let probe = ProbeState::new([0.3, -0.2, -0.7]).unwrap();
        let e = cq_view(&cell, &probe.density()).unwrap();
        for (model, n) in [
            (SourceModel::induced(0.3).unwrap(), 1u32),
            (SourceModel::induced(0.3).unwrap(), 2),
            (SourceModel::iid_u(0.5).unwrap(), 2),
        ] {
            let s = Synthesizer::new(&e, model, n).unwrap();
            for i in 1..=s.block_len() {
                for v in s.views(i).unwrap() {
                    let r = synthesize_recursive(&e, model, n, i, &v.prefix).unwrap();
                    assert!((r.cond_prior - v.cond_prior).abs() < 1e-12);
                    assert!((r.prefix_prob - v.prefix_prob).abs() < 1e-12);
                    for b in 0..2 {
                        assert!(r.cond_states[b].trace_distance(&v.cond_states[b]) < 1e-9);
                    }
                }
            }
        }
    }
}
