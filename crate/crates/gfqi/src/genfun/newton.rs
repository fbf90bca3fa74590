//! Newton polishing of critical points of generating functions.
//!
//! Every reported spectral value must be a genuine critical value; the routines
//! here refine approximate critical points until the full gradient is below
//! [`NEWTON_GRAD_TOL`], using damped Newton steps on the analytic gradient with
//! a finite-difference Hessian (dimensions are tiny, so the dense solve is
//! free) and a gradient-descent fallback when the Hessian is unhelpful.

use super::gfqi_core::Gfqi;
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Absolute gradient norm below which a point counts as critical.
pub const NEWTON_GRAD_TOL: f64 = 1e-8;

/// A polished critical point of a generating function.
#[derive(Clone, Debug)]
pub struct CriticalPoint {
    /// Base coordinates.
    pub x: Vec<f64>,
    /// Diagonalized fiber coordinates.
    pub eta: Vec<f64>,
    /// Critical value `S(x, eta)`.
    pub value: f64,
    /// Achieved gradient norm (<= [`NEWTON_GRAD_TOL`]).
    pub grad_norm: f64,
    /// Covector `dS/dx` at the point (zero for full critical points, generally
    /// nonzero when only the fiber is critical).
    pub covector: Vec<f64>,
}

/// Which variables Newton is allowed to move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scope {
    Full,
    FiberOnly,
}

/// Polishes a critical point of the full gradient `(dS/dx, dS/deta) = 0`.
pub fn newton_critical_point(gf: &Gfqi, x0: &[f64], eta0: &[f64]) -> Result<CriticalPoint> {
    newton_impl(gf, x0, eta0, Scope::Full)
}

/// Polishes a fiber-critical point (`dS/deta = 0`) with the base held fixed;
/// the returned covector is `dS/dx` there.
pub fn newton_fiber_critical(gf: &Gfqi, x: &[f64], eta0: &[f64]) -> Result<CriticalPoint> {
    newton_impl(gf, x, eta0, Scope::FiberOnly)
}

fn newton_impl(gf: &Gfqi, x0: &[f64], eta0: &[f64], scope: Scope) -> Result<CriticalPoint> {
    let m = gf.base_dim();
    let q = gf.fiber_dim();
    if x0.len() != m || eta0.len() != q {
        return Err(Error::Dimension(format!(
            "newton seed dimensions ({}, {}) do not match the generating function ({m}, {q})",
            x0.len(),
            eta0.len()
        )));
    }
    let dim = match scope {
        Scope::Full => m + q,
        Scope::FiberOnly => q,
    };
    let mut z: Vec<f64> = match scope {
        Scope::Full => x0.iter().chain(eta0).copied().collect(),
        Scope::FiberOnly => eta0.to_vec(),
    };
    // Step bound: half the largest box extent, to keep iterates near the box.
    let max_step = 0.5
        * gf.base_radius()
            .max(gf.fiber_half_widths().iter().copied().fold(1.0, f64::max));
    let wander = 3.0 * gf.base_radius().max(gf.fiber_radius());

    let grad_at = |z: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let (x, eta) = split(z, x0, m, scope);
        let (v, gx, ge) = gf.value_gradient(&x, &eta);
        let g = match scope {
            Scope::Full => gx.iter().chain(&ge).copied().collect(),
            Scope::FiberOnly => ge.clone(),
        };
        (v, g, gx)
    };

    let norm = |g: &[f64]| g.iter().map(|c| c * c).sum::<f64>().sqrt();
    let (_, mut g, _) = grad_at(&z);
    let mut gn = norm(&g);
    for _iter in 0..120 {
        if gn <= NEWTON_GRAD_TOL {
            let (v, gfull, gx) = grad_at(&z);
            let (x, eta) = split(&z, x0, m, scope);
            return Ok(CriticalPoint {
                x,
                eta,
                value: v,
                grad_norm: norm(&gfull),
                covector: gx,
            });
        }
        // Finite-difference Hessian of the analytic gradient.
        let scale = z.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let h = 1e-5 * scale;
        let mut hess = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let (_, gp, _) = grad_at(&zp);
            let (_, gm, _) = grad_at(&zm);
            for i in 0..dim {
                hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        // Symmetrize; the gradient is a true gradient field.
        for i in 0..dim {
            for j in (i + 1)..dim {
                let s = 0.5 * (hess[(i, j)] + hess[(j, i)]);
                hess[(i, j)] = s;
                hess[(j, i)] = s;
            }
        }
        // Candidate directions, tried in order until the damped line search
        // accepts one: the pseudo-inverse Newton step (handles Hessians that
        // are singular along flat directions, e.g. on profile plateaus), then
        // `-H g` (a genuine descent direction for the squared gradient norm),
        // then raw steepest descent on S.
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        if let Ok((u, lam)) = super::quadratic::jacobi_eigen(&hess) {
            let lam_max = lam.iter().fold(0.0f64, |a, l| a.max(l.abs()));
            let tol_h = 1e-10 * lam_max.max(1.0);
            let coef: Vec<f64> = (0..dim)
                .map(|j| (0..dim).map(|i| u[(i, j)] * g[i]).sum::<f64>())
                .collect();
            let mut pinv = vec![0.0; dim];
            let mut hg = vec![0.0; dim];
            for j in 0..dim {
                for i in 0..dim {
                    if lam[j].abs() > tol_h {
                        pinv[i] -= coef[j] / lam[j] * u[(i, j)];
                    }
                    hg[i] -= lam[j] * coef[j] * u[(i, j)];
                }
            }
            if pinv.iter().any(|c| c.abs() > 0.0) {
                candidates.push(pinv);
            }
            if hg.iter().any(|c| c.abs() > 0.0) {
                candidates.push(hg);
            }
        }
        candidates.push(g.iter().map(|c| -c).collect());
        let mut accepted = false;
        'outer: for mut dir in candidates {
            let dn = norm(&dir);
            if !dn.is_finite() || dn == 0.0 {
                continue;
            }
            if dn > max_step {
                let f = max_step / dn;
                for d in dir.iter_mut() {
                    *d *= f;
                }
            }
            // Damped update: halve until the gradient norm decreases.
            let mut t = 1.0;
            for _ in 0..30 {
                let znew: Vec<f64> = z.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                if znew.iter().any(|c| c.abs() > wander) {
                    t *= 0.5;
                    continue;
                }
                let (_, gnew, _) = grad_at(&znew);
                let gnn = norm(&gnew);
                if gnn < gn {
                    z = znew;
                    g = gnew;
                    gn = gnn;
                    accepted = true;
                    break 'outer;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            break;
        }
    }
    if gn <= NEWTON_GRAD_TOL {
        let (v, gfull, gx) = grad_at(&z);
        let (x, eta) = split(&z, x0, m, scope);
        return Ok(CriticalPoint {
            x,
            eta,
            value: v,
            grad_norm: norm(&gfull),
            covector: gx,
        });
    }
    Err(Error::Numerics(format!(
        "newton polishing stalled at gradient norm {gn:.3e} (target {NEWTON_GRAD_TOL:.0e}) for {}",
        gf.describe()
    )))
}

fn split(z: &[f64], x_fixed: &[f64], m: usize, scope: Scope) -> (Vec<f64>, Vec<f64>) {
    match scope {
        Scope::Full => (z[..m].to_vec(), z[m..].to_vec()),
        Scope::FiberOnly => (x_fixed.to_vec(), z.to_vec()),
    }
}

/// Scans a coarse seed grid over the truncation box, polishes every seed, and
/// returns the distinct critical values found (sorted ascending, deduplicated
/// at `dedup_tol`). Intended for tests and small examples; cost grows as
/// `seeds_per_axis^(m+q)`.
pub fn collect_critical_values(gf: &Gfqi, seeds_per_axis: usize, dedup_tol: f64) -> Vec<f64> {
    let m = gf.base_dim();
    let q = gf.fiber_dim();
    let dim = m + q;
    let mut values: Vec<f64> = Vec::new();
    let n = seeds_per_axis.max(2);
    let total = n.pow(dim as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![0.0; m];
        let mut eta = vec![0.0; q];
        for (j, xj) in x.iter_mut().enumerate() {
            let i = rem % n;
            rem /= n;
            let r = 0.9 * gf.base_radius();
            *xj = -r + 2.0 * r * (i as f64) / ((n - 1) as f64);
            let _ = j;
        }
        for (j, ej) in eta.iter_mut().enumerate() {
            let i = rem % n;
            rem /= n;
            let r = 0.8 * gf.fiber_half_widths()[j];
            *ej = -r + 2.0 * r * (i as f64) / ((n - 1) as f64);
        }
        if let Ok(cp) = newton_critical_point(gf, &x, &eta) {
            if !values.iter().any(|v| (v - cp.value).abs() <= dedup_tol) {
                values.push(cp.value);
            }
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite critical values"));
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::base_maps::{BaseMap, RadialBaseMap};
    use crate::genfun::gfqi_core::GraphCore;
    use crate::genfun::quadratic::SymmetricQuadratic;
    use crate::ham::profile::BumpProfile;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn newton_finds_graph_critical_values() {
        // Graph of d f for a radial bump: critical values of S are exactly the
        // critical values of f, here 0.7 (plateau) and 0 (outside support).
        let prof = BumpProfile::new(0.7, 0.5, 1.5);
        let f = Arc::new(RadialBaseMap::new(Arc::new(prof), 1, 1.5, "bump").unwrap());
        let g = Gfqi::new(
            Arc::new(GraphCore { f }),
            SymmetricQuadratic::diagonal(&[-1.0], 0).unwrap(),
        )
        .unwrap();
        let cp = newton_critical_point(&g, &[0.2], &[0.05]).unwrap();
        assert_relative_eq!(cp.value, 0.7, epsilon = 1e-9);
        assert!(cp.grad_norm <= NEWTON_GRAD_TOL);
        let vals = collect_critical_values(&g, 7, 1e-6);
        assert!(vals.iter().any(|v| (v - 0.7).abs() < 1e-8));
        assert!(vals.iter().any(|v| v.abs() < 1e-8));
        // Only the two critical levels appear.
        assert!(vals.len() == 2, "values: {vals:?}");
    }

    #[test]
    fn fiber_newton_reports_base_covector() {
        let prof = BumpProfile::new(0.5, 0.4, 1.21);
        let f = Arc::new(RadialBaseMap::new(Arc::new(prof), 1, 1.21, "bump").unwrap());
        let f2 = f.clone();
        let g = Gfqi::new(
            Arc::new(GraphCore { f }),
            SymmetricQuadratic::diagonal(&[-1.0], 0).unwrap(),
        )
        .unwrap();
        // At a point on the falling slope the fiber-critical value is f(x) and
        // the covector is f'(x).
        let x = [0.9];
        let cp = newton_fiber_critical(&g, &x, &[0.3]).unwrap();
        assert_relative_eq!(cp.value, f2.value(&x), epsilon = 1e-10);
        let mut grad = [0.0];
        f2.grad(&x, &mut grad);
        assert_relative_eq!(cp.covector[0], grad[0], epsilon = 1e-8);
    }
}
