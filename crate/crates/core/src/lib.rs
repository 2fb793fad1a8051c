//! Polar coding for binary quantum memory cells.
//!
//! The crate builds the classical-quantum channels obtained by probing a
//! two-channel memory cell, combines them with the polar transform, and
//! analyzes the resulting synthesized channels: Holevo rates, fidelity-based
//! reliabilities, rate/reliability bounds, the symmetric lift of an
//! asymmetric channel, successive-cancellation decoding with square-root
//! measurements, and probe-state optimization over the Bloch ball.

pub mod analysis;
pub mod cell;
pub mod code;
pub mod decode;
pub mod error;
pub mod polar;
pub mod probe;
pub mod qmat;
pub mod random;

pub use cell::{ad_cell, cq_view, CellConfig, CellSpec, CqEnsemble, KrausChannel, MemoryCell, ProbeState};
pub use error::{Error, Result};
pub use polar::{PolarTransform, SourceKind, SourceModel, SynthesizedChannelView};
pub use qmat::{DensityOperator, HermitianOperator};
