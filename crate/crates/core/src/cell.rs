//! Quantum memory cells, probe states and the classical-quantum view of a
//! cell under a fixed probe.
//!
//! A binary memory cell stores one of two channels `W^0`, `W^1` with prior
//! `P(X = 0) = p`. Probing it with `ρ` yields the cq ensemble
//! `(p, W^0(ρ), W^1(ρ))`, whose Holevo rate and fidelity-based reliability
//! drive everything downstream.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qmat::{
    binary_entropy, fidelity, von_neumann_entropy, CMatrix, DensityOperator, HermitianOperator,
    C64,
};

const TP_TOL: f64 = 1e-10;

/// A qubit probe given by its Bloch vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeState {
    bloch: [f64; 3],
}

impl ProbeState {
    pub fn new(bloch: [f64; 3]) -> Result<Self> {
        if bloch.iter().any(|v| !v.is_finite()) {
            return Err(invalid("bloch", "components must be finite"));
        }
        let r2: f64 = bloch.iter().map(|v| v * v).sum();
        if r2 > 1.0 + 1e-12 {
            return Err(invalid("bloch", format!("|r|² = {r2} exceeds 1")));
        }
        Ok(Self { bloch })
    }

    /// `|0⟩`, Bloch vector `(0, 0, 1)`.
    pub fn zero() -> Self {
        Self { bloch: [0.0, 0.0, 1.0] }
    }

    /// `|1⟩`, Bloch vector `(0, 0, −1)`.
    pub fn one() -> Self {
        Self { bloch: [0.0, 0.0, -1.0] }
    }

    pub fn maximally_mixed() -> Self {
        Self { bloch: [0.0; 3] }
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.bloch
    }

    pub fn radius(&self) -> f64 {
        self.bloch.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `½(I + r·σ)`.
    pub fn density(&self) -> DensityOperator {
        let [x, y, z] = self.bloch;
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.5 * (1.0 + z), 0.0),
                C64::new(0.5 * x, -0.5 * y),
                C64::new(0.5 * x, 0.5 * y),
                C64::new(0.5 * (1.0 - z), 0.0),
            ],
        );
        DensityOperator::from_operator_unchecked(HermitianOperator::from_matrix_unchecked(m))
    }
}

/// A CPTP map in Kraus form, `ρ ↦ Σ_k A_k ρ A_k†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    ops: Vec<CMatrix>,
}

impl KrausChannel {
    /// Requires equal shapes and `Σ A_k† A_k = I` within 1e−10.
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| invalid("kraus_ops", "at least one Kraus operator is required"))?;
        let (rows, cols) = first.shape();
        if let Some(bad) = ops.iter().find(|a| a.shape() != (rows, cols)) {
            return Err(invalid(
                "kraus_ops",
                format!("shape {:?} differs from {:?}", bad.shape(), (rows, cols)),
            ));
        }
        let mut sum = CMatrix::zeros(cols, cols);
        for a in &ops {
            sum += a.adjoint() * a;
        }
        let dev = (sum - CMatrix::identity(cols, cols))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > TP_TOL {
            return Err(invalid(
                "kraus_ops",
                format!("not trace preserving: max |Σ A†A − I| = {dev:e}"),
            ));
        }
        Ok(Self { ops })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            ops: vec![CMatrix::identity(dim, dim)],
        }
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn input_dim(&self) -> usize {
        self.ops[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch(rho.dim(), self.input_dim()));
        }
        let d = self.output_dim();
        let mut out = CMatrix::zeros(d, d);
        for a in &self.ops {
            out += a * rho.matrix() * a.adjoint();
        }
        Ok(DensityOperator::from_operator_unchecked(
            HermitianOperator::from_matrix_unchecked(out),
        ))
    }
}

/// Applies a channel to a state.
pub fn apply_channel(ch: &KrausChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    ch.apply(rho)
}

/// A binary-labelled pair of channels together with the label prior `P(X=0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryCell {
    channels: [KrausChannel; 2],
    prior_p: f64,
}

impl MemoryCell {
    pub fn new(channel0: KrausChannel, channel1: KrausChannel, prior_p: f64) -> Result<Self> {
        check_prior(prior_p)?;
        if channel0.input_dim() != channel1.input_dim()
            || channel0.output_dim() != channel1.output_dim()
        {
            return Err(Error::DimensionMismatch(
                channel0.output_dim(),
                channel1.output_dim(),
            ));
        }
        Ok(Self {
            channels: [channel0, channel1],
            prior_p,
        })
    }

    pub fn channel(&self, x: u8) -> &KrausChannel {
        &self.channels[usize::from(x & 1)]
    }

    pub fn prior_p(&self) -> f64 {
        self.prior_p
    }

    pub fn input_dim(&self) -> usize {
        self.channels[0].input_dim()
    }

    /// Same channels with the labels exchanged and the prior mirrored.
    pub fn relabeled(&self) -> Self {
        Self {
            channels: [self.channels[1].clone(), self.channels[0].clone()],
            prior_p: 1.0 - self.prior_p,
        }
    }

    pub fn with_prior(&self, prior_p: f64) -> Result<Self> {
        check_prior(prior_p)?;
        Ok(Self {
            channels: self.channels.clone(),
            prior_p,
        })
    }
}

fn check_prior(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("prior_p", format!("{p} is not in (0, 1)")));
    }
    Ok(())
}

/// Amplitude-damping Kraus pair `A0 = diag(1, √(1−γ))`, `A1 = √γ |0⟩⟨1|`.
pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid("gamma", format!("{gamma} is not in [0, 1]")));
    }
    let z = C64::new(0.0, 0.0);
    let a0 = CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(1.0, 0.0), z, z, C64::new((1.0 - gamma).sqrt(), 0.0)],
    );
    let a1 = CMatrix::from_row_slice(2, 2, &[z, C64::new(gamma.sqrt(), 0.0), z, z]);
    KrausChannel::new(vec![a0, a1])
}

/// Memory cell whose label `x` selects amplitude damping with parameter `gamma_x`.
pub fn ad_cell(gamma0: f64, gamma1: f64, prior_p: f64) -> Result<MemoryCell> {
    MemoryCell::new(amplitude_damping(gamma0)?, amplitude_damping(gamma1)?, prior_p)
}

/// The cq channel `x ↦ ρ_x` with prior `P(X=0) = p`.
#[derive(Clone, Debug, PartialEq)]
pub struct CqEnsemble {
    prior_p: f64,
    states: [DensityOperator; 2],
}

impl CqEnsemble {
    pub fn new(prior_p: f64, state0: DensityOperator, state1: DensityOperator) -> Result<Self> {
        check_prior(prior_p)?;
        if state0.dim() != state1.dim() {
            return Err(Error::DimensionMismatch(state0.dim(), state1.dim()));
        }
        Ok(Self {
            prior_p,
            states: [state0, state1],
        })
    }

    pub fn prior_p(&self) -> f64 {
        self.prior_p
    }

    pub fn priors(&self) -> [f64; 2] {
        [self.prior_p, 1.0 - self.prior_p]
    }

    pub fn state(&self, x: u8) -> &DensityOperator {
        &self.states[usize::from(x & 1)]
    }

    pub fn states(&self) -> &[DensityOperator; 2] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Average output `p ρ0 + (1−p) ρ1`.
    pub fn average(&self) -> DensityOperator {
        DensityOperator::mixture(&[
            (self.prior_p, &self.states[0]),
            (1.0 - self.prior_p, &self.states[1]),
        ])
        .expect("states share a dimension")
    }
}

/// The cell seen as a cq channel for a fixed probe.
pub fn cq_view(cell: &MemoryCell, probe: &DensityOperator) -> Result<CqEnsemble> {
    let s0 = cell.channel(0).apply(probe)?;
    let s1 = cell.channel(1).apply(probe)?;
    CqEnsemble::new(cell.prior_p(), s0, s1)
}

/// `ρ^XB = p|0⟩⟨0| ⊗ ρ0 + (1−p)|1⟩⟨1| ⊗ ρ1`, basis ordered `(x, b)`.
pub fn joint_state(e: &CqEnsemble) -> DensityOperator {
    let d = e.dim();
    let mut m = CMatrix::zeros(2 * d, 2 * d);
    for (x, w) in e.priors().iter().enumerate() {
        let s = e.states[x].matrix() * C64::new(*w, 0.0);
        m.view_mut((x * d, x * d), (d, d)).copy_from(&s);
    }
    DensityOperator::from_operator_unchecked(HermitianOperator::from_matrix_unchecked(m))
}

/// Holevo rate `H(pρ0 + (1−p)ρ1) − pH(ρ0) − (1−p)H(ρ1)` in bits.
pub fn rate(e: &CqEnsemble) -> f64 {
    let [p0, p1] = e.priors();
    let chi = von_neumann_entropy(&e.average())
        - p0 * von_neumann_entropy(&e.states[0])
        - p1 * von_neumann_entropy(&e.states[1]);
    chi.max(0.0)
}

/// Reliability `2√(p(1−p)) F(ρ0, ρ1)`.
pub fn reliability(e: &CqEnsemble) -> f64 {
    let [p0, p1] = e.priors();
    let f = fidelity(&e.states[0], &e.states[1]).expect("states share a dimension");
    2.0 * (p0 * p1).sqrt() * f.min(1.0)
}

/// `h(p)`, the largest rate any ensemble with this prior can reach.
pub fn prior_entropy(e: &CqEnsemble) -> f64 {
    binary_entropy(e.prior_p)
}

/// JSON description of a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CellSpec {
    Ad {
        gamma0: f64,
        gamma1: f64,
        prior_p: f64,
    },
    Kraus {
        ops0: Vec<Vec<Vec<[f64; 2]>>>,
        ops1: Vec<Vec<Vec<[f64; 2]>>>,
        prior_p: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub bloch: [f64; 3],
}

/// `{"cell": ..., "probe": {"bloch": [x, y, z]}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub cell: CellSpec,
    pub probe: ProbeSpec,
}

fn parse_ops(name: &'static str, ops: &[Vec<Vec<[f64; 2]>>]) -> Result<Vec<CMatrix>> {
    ops.iter()
        .map(|rows| {
            let nrows = rows.len();
            let ncols = rows.first().map(Vec::len).unwrap_or(0);
            if nrows == 0 || rows.iter().any(|r| r.len() != ncols) {
                return Err(invalid(name, "Kraus operator rows must be non-empty and equal length"));
            }
            Ok(CMatrix::from_fn(nrows, ncols, |r, c| {
                C64::new(rows[r][c][0], rows[r][c][1])
            }))
        })
        .collect()
}

fn encode_ops(ops: &[CMatrix]) -> Vec<Vec<Vec<[f64; 2]>>> {
    ops.iter()
        .map(|a| {
            (0..a.nrows())
                .map(|r| (0..a.ncols()).map(|c| [a[(r, c)].re, a[(r, c)].im]).collect())
                .collect()
        })
        .collect()
}

impl CellSpec {
    pub fn build(&self) -> Result<MemoryCell> {
        match self {
            CellSpec::Ad {
                gamma0,
                gamma1,
                prior_p,
            } => ad_cell(*gamma0, *gamma1, *prior_p),
            CellSpec::Kraus { ops0, ops1, prior_p } => MemoryCell::new(
                KrausChannel::new(parse_ops("ops0", ops0)?)?,
                KrausChannel::new(parse_ops("ops1", ops1)?)?,
                *prior_p,
            ),
        }
    }

    pub fn prior_p(&self) -> f64 {
        match self {
            CellSpec::Ad { prior_p, .. } | CellSpec::Kraus { prior_p, .. } => *prior_p,
        }
    }

    pub fn set_prior_p(&mut self, p: f64) {
        match self {
            CellSpec::Ad { prior_p, .. } | CellSpec::Kraus { prior_p, .. } => *prior_p = p,
        }
    }

    pub fn from_cell(cell: &MemoryCell) -> Self {
        CellSpec::Kraus {
            ops0: encode_ops(cell.channel(0).ops()),
            ops1: encode_ops(cell.channel(1).ops()),
            prior_p: cell.prior_p(),
        }
    }
}

impl CellConfig {
    pub fn build(&self) -> Result<(MemoryCell, ProbeState)> {
        Ok((self.cell.build()?, ProbeState::new(self.probe.bloch)?))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::partial_trace;

    fn plus() -> DensityOperator {
        ProbeState::new([1.0, 0.0, 0.0]).unwrap().density()
    }

    #[test]
    fn ad_gamma_zero_is_identity() {
        let ch = amplitude_damping(0.0).unwrap();
        for rho in [plus(), ProbeState::one().density(), ProbeState::new([0.3, -0.2, 0.5]).unwrap().density()] {
            assert!(ch.apply(&rho).unwrap().op().max_abs_diff(rho.op()) < 1e-15);
        }
    }

    #[test]
    fn ad_gamma_one_resets_to_ground() {
        let ch = amplitude_damping(1.0).unwrap();
        let g = DensityOperator::basis(2, 0);
        for rho in [plus(), ProbeState::one().density(), ProbeState::new([0.1, 0.6, -0.5]).unwrap().density()] {
            assert!(ch.apply(&rho).unwrap().op().max_abs_diff(g.op()) < 1e-15);
        }
    }

    #[test]
    fn ad_on_excited_state() {
        let out = amplitude_damping(0.3).unwrap().apply(&ProbeState::one().density()).unwrap();
        let want = DensityOperator::from_diagonal(&[0.3, 0.7]).unwrap();
        assert!(out.op().max_abs_diff(want.op()) < 1e-15);
    }

    #[test]
    fn ad_on_plus_state() {
        // Hand-expanded: A0|+⟩⟨+|A0† + A1|+⟩⟨+|A1† with γ = 0.3 gives
        // populations (½ + ½γ, ½(1−γ)) and coherence ½√(1−γ).
        let out = amplitude_damping(0.3).unwrap().apply(&plus()).unwrap();
        let m = out.matrix();
        assert!((m[(0, 0)].re - 0.65).abs() < 1e-15);
        assert!((m[(1, 1)].re - 0.35).abs() < 1e-15);
        assert!((m[(0, 1)].re - 0.5 * 0.7f64.sqrt()).abs() < 1e-15);
        assert!(m[(0, 1)].im.abs() < 1e-15);
    }

    #[test]
    fn gamma_out_of_range() {
        assert!(ad_cell(-0.1, 0.5, 0.5).is_err());
        assert!(ad_cell(0.1, 1.5, 0.5).is_err());
    }

    #[test]
    fn degenerate_prior_rejected() {
        assert!(ad_cell(0.1, 0.5, 0.0).is_err());
        assert!(ad_cell(0.1, 0.5, 1.0).is_err());
    }

    #[test]
    fn non_trace_preserving_rejected() {
        let a = CMatrix::identity(2, 2) * C64::new(0.9, 0.0);
        assert!(KrausChannel::new(vec![a]).is_err());
    }

    #[test]
    fn apply_dimension_mismatch() {
        let ch = amplitude_damping(0.2).unwrap();
        assert!(matches!(
            ch.apply(&DensityOperator::maximally_mixed(4)),
            Err(Error::DimensionMismatch(4, 2))
        ));
    }

    #[test]
    fn cq_view_examples() {
        let same = ad_cell(0.4, 0.4, 0.5).unwrap();
        let e = cq_view(&same, &plus()).unwrap();
        assert_eq!(e.state(0), e.state(1));

        let cell = ad_cell(0.0, 1.0, 0.5).unwrap();
        let e = cq_view(&cell, &ProbeState::one().density()).unwrap();
        assert!(e.state(0).op().max_abs_diff(DensityOperator::basis(2, 1).op()) < 1e-15);
        assert!(e.state(1).op().max_abs_diff(DensityOperator::basis(2, 0).op()) < 1e-15);

        let e = cq_view(&cell, &ProbeState::maximally_mixed().density()).unwrap();
        assert!(e.state(0).op().max_abs_diff(DensityOperator::maximally_mixed(2).op()) < 1e-15);
        assert!(e.state(1).op().max_abs_diff(DensityOperator::basis(2, 0).op()) < 1e-15);
    }

    #[test]
    fn joint_state_examples() {
        let e = CqEnsemble::new(0.5, DensityOperator::basis(2, 0), DensityOperator::basis(2, 1)).unwrap();
        let j = joint_state(&e);
        let want = HermitianOperator::from_real_diagonal(&[0.5, 0.0, 0.0, 0.5]);
        assert!(j.op().max_abs_diff(&want) < 1e-15);

        let sigma = ProbeState::new([0.2, 0.1, -0.4]).unwrap().density();
        let e = CqEnsemble::new(0.3, sigma.clone(), sigma.clone()).unwrap();
        let j = joint_state(&e);
        let want = DensityOperator::from_diagonal(&[0.3, 0.7]).unwrap().tensor(&sigma);
        assert!(j.op().max_abs_diff(want.op()) < 1e-15);
        assert!((j.op().trace() - 1.0).abs() < 1e-15);
        let b = partial_trace(j.op(), 2, 2, false).unwrap();
        assert!(b.max_abs_diff(e.average().op()) < 1e-15);
    }

    #[test]
    fn rate_examples() {
        let s = ProbeState::new([0.2, 0.1, -0.4]).unwrap().density();
        let e = CqEnsemble::new(0.4, s.clone(), s).unwrap();
        assert!(rate(&e).abs() < 1e-12);
        let e = CqEnsemble::new(0.5, DensityOperator::basis(2, 0), DensityOperator::basis(2, 1)).unwrap();
        assert!((rate(&e) - 1.0).abs() < 1e-12);
        for p in [0.1, 0.27, 0.8] {
            let e = CqEnsemble::new(p, DensityOperator::basis(2, 0), DensityOperator::basis(2, 1)).unwrap();
            assert!((rate(&e) - binary_entropy(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn reliability_examples() {
        let e = CqEnsemble::new(0.3, DensityOperator::basis(2, 0), DensityOperator::basis(2, 1)).unwrap();
        assert!(reliability(&e).abs() < 1e-14);
        let s = ProbeState::new([0.2, 0.1, -0.4]).unwrap().density();
        let e = CqEnsemble::new(0.5, s.clone(), s.clone()).unwrap();
        assert!((reliability(&e) - 1.0).abs() < 1e-12);
        let e = CqEnsemble::new(0.2, s.clone(), s).unwrap();
        assert!((reliability(&e) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn probe_validation() {
        assert!(ProbeState::new([1.0, 1.0, 0.0]).is_err());
        assert!(ProbeState::new([f64::NAN, 0.0, 0.0]).is_err());
        assert!(ProbeState::new([0.6, 0.0, 0.8]).is_ok());
    }

    #[test]
    fn config_json_roundtrip() {
        let text = r#"{"cell": {"type": "ad", "gamma0": 0.0, "gamma1": 0.5, "prior_p": 0.5}, "probe": {"bloch": [0, 0, -1]}}"#;
        let cfg = CellConfig::from_json(text).unwrap();
        let (cell, probe) = cfg.build().unwrap();
        assert_eq!(cell, ad_cell(0.0, 0.5, 0.5).unwrap());
        assert_eq!(probe, ProbeState::one());

        let spec = CellSpec::from_cell(&cell);
        assert_eq!(spec.build().unwrap(), cell);

        let bad = r#"{"cell": {"type": "ad", "gamma0": 0.0, "gamma1": 0.5, "prior_p": 0.5, "x": 1}, "probe": {"bloch": [0, 0, -1]}}"#;
        assert!(CellConfig::from_json(bad).is_err());
    }
}
