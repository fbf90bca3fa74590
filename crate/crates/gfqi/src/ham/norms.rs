//! Oscillation-based norms of Hamiltonians, estimated on sampling grids.

use super::HamiltonianSpec;
use crate::{Error, Result};
use rayon::prelude::*;

/// Uniform sampling grid on `[-radius, radius]^{2n} x [0, 1]`.
///
/// `per_axis` is rounded up to an odd count so the spatial grid always contains
/// the origin; for compactly supported Hamiltonians the grid radius exceeds the
/// support radius, so the sampled minimum and maximum bracket 0 as they must.
#[derive(Clone, Copy, Debug)]
pub struct SupportGrid {
    pub radius: f64,
    pub per_axis: usize,
    pub time_samples: usize,
}

impl SupportGrid {
    pub fn new(radius: f64, per_axis: usize, time_samples: usize) -> Self {
        let per_axis = if per_axis % 2 == 0 { per_axis + 1 } else { per_axis };
        Self {
            radius,
            per_axis: per_axis.max(3),
            time_samples: time_samples.max(2),
        }
    }

    /// Grid slightly larger than the support of `spec`.
    pub fn covering(spec: &HamiltonianSpec, per_axis: usize, time_samples: usize) -> Result<Self> {
        let r = spec.support_radius();
        if !r.is_finite() {
            return Err(Error::Config(
                "oscillation norms need a compactly supported Hamiltonian".into(),
            ));
        }
        Ok(Self::new(r.max(1e-6) * 1.05, per_axis, time_samples))
    }

    fn refined(&self) -> Self {
        Self::new(self.radius, self.per_axis * 2, self.time_samples * 2)
    }

    /// All spatial sample points for dimension `dim`.
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let m = self.per_axis;
        let step = 2.0 * self.radius / (m - 1) as f64;
        let total = m.pow(dim as u32);
        (0..total)
            .map(|mut idx| {
                (0..dim)
                    .map(|_| {
                        let k = idx % m;
                        idx /= m;
                        -self.radius + step * k as f64
                    })
                    .collect()
            })
            .collect()
    }

    /// Time sample points, endpoints included.
    pub fn times(&self) -> Vec<f64> {
        let k = self.time_samples;
        (0..k).map(|j| j as f64 / (k - 1) as f64).collect()
    }
}

/// Result of a grid oscillation-norm estimate.
#[derive(Clone, Copy, Debug)]
pub struct HoferEstimate {
    /// Estimate on the refined grid.
    pub value: f64,
    /// Change from the coarse to the refined grid; a convergence indicator.
    pub refinement_delta: f64,
}

/// `int_0^1 (max_x H(t, .) - min_x H(t, .)) dt`, by trapezoid rule in `t` over
/// grid extrema in `x`, evaluated on `grid` and once more on a refined grid.
pub fn hofer_norm(spec: &HamiltonianSpec, grid: SupportGrid) -> Result<HoferEstimate> {
    let coarse = hofer_once(spec, grid)?;
    let refined = hofer_once(spec, grid.refined())?;
    Ok(HoferEstimate {
        value: refined,
        refinement_delta: (refined - coarse).abs(),
    })
}

fn hofer_once(spec: &HamiltonianSpec, grid: SupportGrid) -> Result<f64> {
    let points = grid.points(spec.dim());
    let times = grid.times();
    let oscs: Vec<f64> = times
        .par_iter()
        .map(|&t| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                let v = spec.eval(t, x);
                (lo.min(v), hi.max(v))
            });
            hi - lo
        })
        .collect();
    let dt = 1.0 / (times.len() - 1) as f64;
    let mut total = 0.0;
    for j in 0..times.len() - 1 {
        total += 0.5 * (oscs[j] + oscs[j + 1]) * dt;
    }
    Ok(total)
}

/// `sup_{t, x not excluded} |H1(t, x) - H2(t, x)|` over the grid.
pub fn sup_difference_outside(
    h1: &HamiltonianSpec,
    h2: &HamiltonianSpec,
    excluded: &(dyn Fn(&[f64]) -> bool + Sync),
    grid: SupportGrid,
) -> Result<f64> {
    if h1.dim() != h2.dim() {
        return Err(Error::Dimension(format!(
            "comparison needs equal dimensions, got {} and {}",
            h1.dim(),
            h2.dim()
        )));
    }
    let points: Vec<Vec<f64>> = grid
        .points(h1.dim())
        .into_iter()
        .filter(|x| !excluded(x))
        .collect();
    let times = grid.times();
    let sup = points
        .par_iter()
        .map(|x| {
            times
                .iter()
                .map(|&t| (h1.eval(t, x) - h2.eval(t, x)).abs())
                .fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(sup)
}
