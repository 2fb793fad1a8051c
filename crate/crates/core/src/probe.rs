//! Probe-state objectives over the Bloch ball and their maximization.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::one_step_report;
use crate::cell::{cq_view, rate, MemoryCell, ProbeState};
use crate::error::{invalid, Error, Result};
use crate::qmat::DensityOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeObjective {
    /// `I(W)_ρ`.
    Rate,
    /// `I(W⁺)_ρ − I(W⁻)_ρ` with i.i.d. inputs.
    Gap,
}

pub fn evaluate_objective(cell: &MemoryCell, probe: &ProbeState, obj: ProbeObjective) -> Result<f64> {
    if cell.input_dim() != 2 {
        return Err(Error::Unsupported(format!(
            "probe objectives for {}-dimensional cells",
            cell.input_dim()
        )));
    }
    let e = cq_view(cell, &probe.density())?;
    Ok(match obj {
        ProbeObjective::Rate => rate(&e),
        ProbeObjective::Gap => {
            let r = one_step_report(&e)?;
            r.i_plus - r.i_minus
        }
    })
}

/// True when both channels agree on a spanning set of inputs.
pub fn is_degenerate(cell: &MemoryCell) -> Result<bool> {
    let d = cell.input_dim();
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let mut probes: Vec<DensityOperator> = (0..d).map(|k| DensityOperator::basis(d, k)).collect();
    for j in 0..d {
        for k in (j + 1)..d {
            let mut plus = vec![crate::qmat::C64::new(0.0, 0.0); d];
            plus[j] = crate::qmat::C64::new(c, 0.0);
            plus[k] = crate::qmat::C64::new(c, 0.0);
            probes.push(DensityOperator::pure(&plus)?);
            plus[k] = crate::qmat::C64::new(0.0, c);
            probes.push(DensityOperator::pure(&plus)?);
        }
    }
    for rho in &probes {
        let e = cq_view(cell, rho)?;
        if e.state(0).op().max_abs_diff(e.state(1).op()) > 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeOptimum {
    pub objective: ProbeObjective,
    pub best_bloch: [f64; 3],
    pub best_value: f64,
    pub bloch_radius: f64,
    pub degenerate: bool,
    /// Best point after the grid, then after each refinement iteration.
    pub trajectory: Vec<([f64; 3], f64)>,
}

fn project(v: [f64; 3]) -> [f64; 3] {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r > 1.0 {
        [v[0] / r, v[1] / r, v[2] / r]
    } else {
        v
    }
}

fn value_at(cell: &MemoryCell, obj: ProbeObjective, v: [f64; 3]) -> Result<f64> {
    evaluate_objective(cell, &ProbeState::new(project(v))?, obj)
}

/// Points of a `g×g×g` grid on `[-1,1]³` that lie in the closed ball.
pub fn ball_grid(g: usize) -> Vec<[f64; 3]> {
    let step = 2.0 / (g - 1) as f64;
    let coord = |k: usize| -1.0 + step * k as f64;
    let mut pts = Vec::new();
    for i in 0..g {
        for j in 0..g {
            for k in 0..g {
                let v = [coord(i), coord(j), coord(k)];
                if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-12 {
                    pts.push(project(v));
                }
            }
        }
    }
    pts
}

/// Grid search over the ball followed by projected Nelder–Mead refinement.
pub fn optimize_probe(
    cell: &MemoryCell,
    obj: ProbeObjective,
    grid_per_axis: usize,
    refine_iters: usize,
    seed: u64,
) -> Result<ProbeOptimum> {
    if grid_per_axis < 3 {
        return Err(invalid("grid_per_axis", format!("{grid_per_axis} < 3")));
    }
    if is_degenerate(cell)? {
        let v = ProbeState::zero().bloch();
        return Ok(ProbeOptimum {
            objective: obj,
            best_bloch: v,
            best_value: 0.0,
            bloch_radius: 1.0,
            degenerate: true,
            trajectory: vec![(v, 0.0)],
        });
    }
    let pts = ball_grid(grid_per_axis);
    let values = pts
        .par_iter()
        .map(|&v| value_at(cell, obj, v))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, &val) in values.iter().enumerate() {
        if val > values[best] {
            best = k;
        }
    }
    let mut trajectory = vec![(pts[best], values[best])];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 2.0 / (grid_per_axis - 1) as f64;
    let mut simplex: Vec<([f64; 3], f64)> = vec![(pts[best], values[best])];
    for axis in 0..3 {
        let mut v = pts[best];
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        v[axis] += sign * step;
        let v = project(v);
        simplex.push((v, value_at(cell, obj, v)?));
    }
    // maximize: keep the simplex sorted by decreasing value
    let sort = |s: &mut Vec<([f64; 3], f64)>| s.sort_by(|a, b| b.1.total_cmp(&a.1));
    sort(&mut simplex);
    for _ in 0..refine_iters {
        let spread = simplex[0].1 - simplex[3].1;
        let size = simplex[1..]
            .iter()
            .map(|(v, _)| (0..3).map(|k| (v[k] - simplex[0].0[k]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < 1e-10 && size < 1e-10 {
            break;
        }
        let mut centroid = [0.0; 3];
        for (v, _) in &simplex[..3] {
            for k in 0..3 {
                centroid[k] += v[k] / 3.0;
            }
        }
        let worst = simplex[3];
        let along = |t: f64| {
            project([
                centroid[0] + t * (worst.0[0] - centroid[0]),
                centroid[1] + t * (worst.0[1] - centroid[1]),
                centroid[2] + t * (worst.0[2] - centroid[2]),
            ])
        };
        let xr = along(-1.0);
        let fr = value_at(cell, obj, xr)?;
        if fr > simplex[0].1 {
            let xe = along(-2.0);
            let fe = value_at(cell, obj, xe)?;
            simplex[3] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let xc = along(0.5);
            let fc = value_at(cell, obj, xc)?;
            if fc > worst.1 {
                simplex[3] = (xc, fc);
            } else {
                let b = simplex[0].0;
                for vertex in simplex.iter_mut().skip(1) {
                    let v = project([
                        b[0] + 0.5 * (vertex.0[0] - b[0]),
                        b[1] + 0.5 * (vertex.0[1] - b[1]),
                        b[2] + 0.5 * (vertex.0[2] - b[2]),
                    ]);
                    *vertex = (v, value_at(cell, obj, v)?);
                }
            }
        }
        sort(&mut simplex);
        trajectory.push(simplex[0]);
    }
    let (best_bloch, best_value) = simplex[0];
    let probe = ProbeState::new(best_bloch)?;
    Ok(ProbeOptimum {
        objective: obj,
        best_bloch,
        best_value,
        bloch_radius: probe.radius(),
        degenerate: false,
        trajectory,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `(0, 0, z)` for `z` from −1 to 1.
    Z,
    /// `(x, 0, z)` on a square grid, restricted to the disk.
    XzPlane,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
    pub objective_value: f64,
}

pub fn probe_sweep(
    cell: &MemoryCell,
    obj: ProbeObjective,
    axis: SweepAxis,
    samples: usize,
) -> Result<Vec<SweepPoint>> {
    if samples < 2 {
        return Err(invalid("samples", format!("{samples} < 2")));
    }
    let coord = |k: usize| -1.0 + 2.0 * k as f64 / (samples - 1) as f64;
    let pts: Vec<[f64; 3]> = match axis {
        SweepAxis::Z => (0..samples).map(|k| [0.0, 0.0, coord(k)]).collect(),
        SweepAxis::XzPlane => (0..samples)
            .flat_map(|i| (0..samples).map(move |k| [coord(i), 0.0, coord(k)]))
            .filter(|v| v[0] * v[0] + v[2] * v[2] <= 1.0 + 1e-12)
            .map(project)
            .collect(),
    };
    pts.par_iter()
        .map(|&v| {
            Ok(SweepPoint {
                rx: v[0],
                ry: v[1],
                rz: v[2],
                objective_value: value_at(cell, obj, v)?,
            })
        })
        .collect()
}

/// Writes `rx,ry,rz,objective_value`.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
