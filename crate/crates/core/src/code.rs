//! Information-set selection and encoding with prefix-dependent frozen bits.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{thresholds, PolarizationProfile};
use crate::error::{invalid, Error, Result};
use crate::polar::{encode_bits, pack_bits, source_distribution, SourceModel, SourceTable};

/// `β` used for the default source-reliability threshold.
pub const DEFAULT_BETA: f64 = 0.49;

/// A polar code: information set plus the parameters it was built from.
///
/// `n` is the block length `N` and indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConstruction {
    pub n: usize,
    pub info_set: Vec<usize>,
    pub target_rate: f64,
    pub z_threshold: f64,
    pub zsrc_threshold: f64,
    pub frozen_seed: u64,
}

impl CodeConstruction {
    pub fn achieved_rate(&self) -> f64 {
        self.info_set.len() as f64 / self.n as f64
    }

    pub fn is_info(&self, index: usize) -> bool {
        self.info_set.binary_search(&index).is_ok()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if !c.n.is_power_of_two() || c.info_set.iter().any(|&i| i == 0 || i > c.n) {
            return Err(invalid("info_set", "indices must lie in 1..=n with n a power of two"));
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstructionParams {
    pub target_rate: f64,
    /// Selected channels must satisfy `Z_i ≤ z_threshold`.
    pub z_threshold: f64,
    /// Selected channels must satisfy `Z(U_i|U_1^{i-1}) ≥ zsrc_threshold`;
    /// `None` means `1 − 2^{-2^{nβ}}` with `β = 0.49`.
    pub zsrc_threshold: Option<f64>,
    pub frozen_seed: u64,
}

impl ConstructionParams {
    pub fn new(target_rate: f64, frozen_seed: u64) -> Self {
        Self {
            target_rate,
            z_threshold: 1.0,
            zsrc_threshold: None,
            frozen_seed,
        }
    }
}

/// Default source-reliability threshold `1 − 2^{-2^{nβ}}`.
pub fn default_zsrc_threshold(level: u32) -> f64 {
    let t = thresholds(level, DEFAULT_BETA).expect("β is in range");
    1.0 - t.delta()
}

/// Picks the `⌊RN⌋` most reliable channels, then drops selected indices that
/// violate either threshold, worst first.
pub fn select_information_set(
    profile: &PolarizationProfile,
    params: &ConstructionParams,
) -> Result<CodeConstruction> {
    let r = params.target_rate;
    if !(r > 0.0 && r <= 1.0) {
        return Err(invalid("target_rate", format!("{r} is not in (0, 1]")));
    }
    let big_n = profile.block_len();
    let zsrc_threshold = params
        .zsrc_threshold
        .unwrap_or_else(|| default_zsrc_threshold(profile.level));
    let k = (r * big_n as f64 + 1e-9).floor() as usize;
    let mut order: Vec<_> = profile.rows.iter().collect();
    order.sort_by(|a, b| {
        a.z_reliability
            .total_cmp(&b.z_reliability)
            .then(b.z_source.total_cmp(&a.z_source))
            .then(a.index.cmp(&b.index))
    });
    let mut chosen: Vec<_> = order.into_iter().take(k).collect();
    loop {
        let violators = chosen.iter().enumerate().filter(|(_, row)| {
            row.z_source < zsrc_threshold || row.z_reliability > params.z_threshold
        });
        // worst: largest source shortfall, then largest Z
        let worst = violators
            .max_by(|(_, a), (_, b)| {
                b.z_source
                    .total_cmp(&a.z_source)
                    .then(a.z_reliability.total_cmp(&b.z_reliability))
            })
            .map(|(pos, _)| pos);
        match worst {
            Some(pos) => {
                chosen.remove(pos);
            }
            None => break,
        }
    }
    if chosen.is_empty() {
        return Err(Error::Infeasible(format!(
            "no channel among the {k} most reliable satisfies Z ≤ {} and Z(U_i|U^(i-1)) ≥ {zsrc_threshold}",
            params.z_threshold
        )));
    }
    let mut info_set: Vec<usize> = chosen.iter().map(|row| row.index).collect();
    info_set.sort_unstable();
    Ok(CodeConstruction {
        n: big_n,
        info_set,
        target_rate: r,
        z_threshold: params.z_threshold,
        zsrc_threshold,
        frozen_seed: params.frozen_seed,
    })
}

/// Frozen-bit maps `λ_j(prefix) = [ξ(seed, j, prefix) < P(U_j = 1 | prefix)]`
/// with `ξ` a counter-based uniform draw.
///
/// For a uniform source the draw ignores the prefix, so each `λ_j` is a
/// fair constant bit.
#[derive(Clone, Debug)]
pub struct FrozenMaps {
    seed: u64,
    table: SourceTable,
    frozen: Vec<bool>,
}

pub fn sample_frozen_maps(model: SourceModel, construction: &CodeConstruction) -> Result<FrozenMaps> {
    let big_n = construction.n;
    if !big_n.is_power_of_two() {
        return Err(invalid("n", format!("{big_n} is not a power of two")));
    }
    let table = source_distribution(model, big_n.trailing_zeros())?;
    let frozen = (1..=big_n).map(|i| !construction.is_info(i)).collect();
    Ok(FrozenMaps {
        seed: construction.frozen_seed,
        table,
        frozen,
    })
}

/// Uniform draw in `[0, 1)` determined by `(seed, stream, position)`.
fn counter_uniform(seed: u64, stream: u64, position: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(position) * 2);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn freeze_bit(draw: f64, q: f64) -> u8 {
    u8::from(draw < q)
}

impl FrozenMaps {
    pub fn block_len(&self) -> usize {
        self.frozen.len()
    }

    pub fn table(&self) -> &SourceTable {
        &self.table
    }

    pub fn is_frozen(&self, index: usize) -> bool {
        self.frozen[index - 1]
    }

    /// `λ_j(prefix)` for `prefix = u_1^{j-1}`; defined for every index.
    pub fn value(&self, index: usize, prefix: &[u8]) -> u8 {
        let packed = pack_bits(prefix);
        let q = self.table.conditional_one(packed, index - 1);
        let position = if self.table.model().is_uniform() { 0 } else { packed };
        freeze_bit(counter_uniform(self.seed, index as u64, position), q)
    }
}

/// Fills `u` in ascending order (message bits on `A`, `λ_j` elsewhere) and
/// returns `(u, u·G_N)`.
pub fn encode_message(
    msg: &[u8],
    construction: &CodeConstruction,
    maps: &FrozenMaps,
) -> Result<(Vec<u8>, Vec<u8>)> {
    if msg.len() != construction.info_set.len() {
        return Err(Error::LengthMismatch {
            expected: construction.info_set.len(),
            got: msg.len(),
        });
    }
    if maps.block_len() != construction.n {
        return Err(Error::LengthMismatch {
            expected: construction.n,
            got: maps.block_len(),
        });
    }
    let mut u = Vec::with_capacity(construction.n);
    let mut next = msg.iter();
    for i in 1..=construction.n {
        let bit = if maps.is_frozen(i) {
            maps.value(i, &u)
        } else {
            *next.next().expect("one message bit per information index") & 1
        };
        u.push(bit);
    }
    let x = encode_bits(&u)?;
    Ok((u, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::polarization_profile_with;
    use crate::cell::CqEnsemble;
    use crate::qmat::DensityOperator;

    fn profile(n: u32, same: bool) -> PolarizationProfile {
        let s0 = DensityOperator::from_diagonal(&[0.9, 0.1]).unwrap();
        let s1 = if same { s0.clone() } else { DensityOperator::from_diagonal(&[0.3, 0.7]).unwrap() };
        let e = CqEnsemble::new(0.5, s0, s1).unwrap();
        polarization_profile_with(&e, SourceModel::induced(0.5).unwrap(), n, 0.49).unwrap()
    }

    fn construction(n: usize, info_set: Vec<usize>, seed: u64) -> CodeConstruction {
        CodeConstruction {
            n,
            info_set,
            target_rate: 0.5,
            z_threshold: 1.0,
            zsrc_threshold: 0.0,
            frozen_seed: seed,
        }
    }

    #[test]
    fn half_rate_picks_plus_channel() {
        let c = select_information_set(&profile(1, false), &ConstructionParams::new(0.5, 1)).unwrap();
        assert_eq!(c.info_set, vec![2]);
        let c = select_information_set(&profile(2, false), &ConstructionParams::new(1.0, 1)).unwrap();
        assert_eq!(c.info_set, vec![1, 2, 3, 4]);
        assert!((c.achieved_rate() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_channels_are_infeasible() {
        let mut params = ConstructionParams::new(0.5, 1);
        params.z_threshold = 0.999;
        assert!(matches!(
            select_information_set(&profile(2, true), &params),
            Err(Error::Infeasible(_))
        ));
        assert!(select_information_set(&profile(2, true), &ConstructionParams::new(0.0, 1)).is_err());
    }

    #[test]
    fn source_threshold_shrinks_the_set() {
        let s0 = DensityOperator::from_diagonal(&[0.9, 0.1]).unwrap();
        let s1 = DensityOperator::from_diagonal(&[0.2, 0.8]).unwrap();
        let e = CqEnsemble::new(0.8, s0, s1).unwrap();
        let p = polarization_profile_with(&e, SourceModel::induced(0.8).unwrap(), 2, 0.49).unwrap();
        let mut params = ConstructionParams::new(1.0, 3);
        params.zsrc_threshold = Some(0.9);
        let c = select_information_set(&p, &params).unwrap();
        for &i in &c.info_set {
            assert!(p.rows[i - 1].z_source >= 0.9);
        }
        assert!(c.info_set.len() < 4);
    }

    #[test]
    fn json_round_trip() {
        let c = construction(4, vec![2, 4], 7);
        let back = CodeConstruction::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let text = r#"{"n":4,"info_set":[5],"target_rate":0.5,"z_threshold":1,"zsrc_threshold":0,"frozen_seed":1}"#;
        assert!(CodeConstruction::from_json(text).is_err());
        let text = r#"{"n":4,"info_set":[1],"target_rate":0.5,"z_threshold":1,"zsrc_threshold":0,"frozen_seed":1,"x":1}"#;
        assert!(CodeConstruction::from_json(text).is_err());
    }

    #[test]
    fn maps_are_deterministic_and_prefix_free_when_uniform() {
        let c = construction(4, vec![4], 11);
        let m = sample_frozen_maps(SourceModel::induced(0.5).unwrap(), &c).unwrap();
        let again = sample_frozen_maps(SourceModel::induced(0.5).unwrap(), &c).unwrap();
        for j in 1..=3 {
            let first = m.value(j, &vec![0; j - 1]);
            for pre in 0..(1u64 << (j - 1)) {
                let bits = crate::polar::unpack_bits(pre, j - 1);
                assert_eq!(m.value(j, &bits), first);
                assert_eq!(again.value(j, &bits), first);
            }
        }
    }

    #[test]
    fn degenerate_conditionals_freeze_to_zero() {
        for s in 0..1000 {
            assert_eq!(freeze_bit(counter_uniform(s, 1, 0), 0.0), 0);
        }
        // conditionals of order 1e-12 freeze every bit to zero for this seed
        let empty = construction(4, vec![], 5);
        let m = sample_frozen_maps(SourceModel::induced(1.0 - 1e-12).unwrap(), &empty).unwrap();
        let (u, x) = encode_message(&[], &empty, &m).unwrap();
        assert_eq!(u, vec![0; 4]);
        assert_eq!(x, vec![0; 4]);
    }

    #[test]
    fn encode_examples() {
        let all = construction(4, vec![1, 2, 3, 4], 0);
        let m = sample_frozen_maps(SourceModel::induced(0.3).unwrap(), &all).unwrap();
        let (u, x) = encode_message(&[1, 0, 1, 1], &all, &m).unwrap();
        assert_eq!(u, vec![1, 0, 1, 1]);
        assert_eq!(x, encode_bits(&[1, 0, 1, 1]).unwrap());

        let seed = (0..)
            .find(|&s| {
                let c = construction(2, vec![2], s);
                sample_frozen_maps(SourceModel::induced(0.5).unwrap(), &c)
                    .unwrap()
                    .value(1, &[])
                    == 0
            })
            .unwrap();
        let c = construction(2, vec![2], seed);
        let m = sample_frozen_maps(SourceModel::induced(0.5).unwrap(), &c).unwrap();
        let (u, x) = encode_message(&[1], &c, &m).unwrap();
        assert_eq!(u, vec![0, 1]);
        assert_eq!(x, vec![1, 1]);
        assert!(matches!(encode_message(&[1, 1], &c, &m), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn counter_draws_are_uniform() {
        let n = 10_000;
        let mean: f64 = (0..n).map(|s| counter_uniform(s, 3, 5)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0 / n as f64).sqrt());
    }
}
