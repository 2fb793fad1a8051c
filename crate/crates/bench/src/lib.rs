//! Shared fixtures for the benchmarks.

use polar_reading::cell::ad_cell;
use polar_reading::{MemoryCell, ProbeState};

/// `ad_cell(0, 0.5, 0.5)` read with `|1⟩`.
pub fn reference() -> (MemoryCell, ProbeState) {
    (ad_cell(0.0, 0.5, 0.5).expect("valid cell"), ProbeState::one())
}
