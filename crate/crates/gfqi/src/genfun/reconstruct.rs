//! Generating functions reconstructed directly from a Hamiltonian flow.
//!
//! Two families of constructions, each with a closed-form radial path and a
//! tabulated path driven by the flow map itself:
//!
//! * **Graph over the diagonal**: a potential `W` with
//!   `grad W((z + phi(z))/2) = J(phi(z) - z)`, packaged as a graph-type
//!   generating function for the graph of the diffeomorphism `phi`.
//! * **Front over the base**: a potential `u` on the configuration space with
//!   `graph(du) = phi(zero section)`, packaged the same way.
//!
//! Every path certifies that the object it builds is actually graphical
//! (rotation-angle windows, monotone reparametrizations, invertible midpoint
//! localization, integrability of the sampled gradient field) and fails with
//! an actionable message pointing at the broken-geodesic chain construction
//! when the one-step ansatz stops being valid.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::genfun::base_maps::{BicubicTableMap, HermiteTable1D, LineTableMap, RadialTableMap};
use crate::genfun::gfqi_core::{Gfqi, GraphCore};
use crate::genfun::quadratic::SymmetricQuadratic;
use crate::ham::{FlowMap, HamiltonianSpec};
use crate::{Error, Result};

/// Knot count for the closed-form radial tables.
const RADIAL_KNOTS: usize = 2049;
/// Keeps the half-angle tangent of the diagonal potential away from its pole.
const GRAPH_ANGLE_MARGIN: f64 = 0.15;
/// Keeps the full-angle tangent of the front potential away from its pole.
const FRONT_ANGLE_MARGIN: f64 = 0.10;
/// Smallest admissible slope of the monotone reparametrizations.
const MONOTONE_TOL: f64 = 1e-6;
/// Newton residual target for flow-based localizations (bounded below by the
/// integrator's endpoint accuracy).
const SOLVE_TOL: f64 = 1e-9;
/// Admissible potential residue on the outer ring where the flow is the
/// identity, and admissible disagreement between the two integration sweeps.
const CONSISTENCY_TOL: f64 = 1e-5;

// ---------------------------------------------------------------------------
// Closed-form radial constructions
// ---------------------------------------------------------------------------

/// Rotation angles `theta(s) = 2 (t1 - t0) f'(s)` of a radial Hamiltonian
/// `f(|x|^2)`, sampled on a uniform squared-radius grid together with their
/// derivative in `s`.
struct RotationSamples {
    s: Vec<f64>,
    theta: Vec<f64>,
    dtheta: Vec<f64>,
}

fn sample_rotation(spec: &HamiltonianSpec, t0: f64, t1: f64) -> Result<RotationSamples> {
    let profile = spec.radial_profile().ok_or_else(|| {
        Error::Config(format!(
            "closed-form reconstruction needs a Hamiltonian of the form f(|x|^2); got {}",
            spec.describe()
        ))
    })?;
    let t = t1 - t0;
    let s_sup = spec.support_radius().powi(2);
    let n = RADIAL_KNOTS;
    let mut s = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    let mut dtheta = Vec::with_capacity(n);
    for i in 0..n {
        let si = s_sup * (i as f64) / ((n - 1) as f64);
        s.push(si);
        theta.push(2.0 * t * profile.d1(si));
        dtheta.push(2.0 * t * profile.d2(si));
    }
    Ok(RotationSamples { s, theta, dtheta })
}

/// Integrates `dw/dsigma` values (with their exact `sigma`-derivatives) into
/// `w` on the knots, anchored at `w = 0` on the last knot, using the
/// derivative-corrected trapezoid rule on each interval.
fn integrate_inward(sigma: &[f64], wp: &[f64], wpp: &[f64]) -> Vec<f64> {
    let n = sigma.len();
    let mut w = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let h = sigma[i + 1] - sigma[i];
        let seg = 0.5 * h * (wp[i] + wp[i + 1]) - h * h / 12.0 * (wpp[i + 1] - wpp[i]);
        w[i] = w[i + 1] - seg;
    }
    w
}

fn graph_gfqi_from_table(f: Arc<dyn crate::genfun::base_maps::BaseMap>) -> Result<Gfqi> {
    let core = Arc::new(GraphCore { f });
    let quad = SymmetricQuadratic::diagonal(&[-1.0], 0)?;
    Gfqi::new(core, quad)
}

/// Generating function for the graph of the time-`[t0, t1]` flow of a radial
/// Hamiltonian `f(|x|^2)`, built from its exact per-circle rotation angles.
///
/// The circle of squared radius `s` rotates by `theta(s) = 2 (t1 - t0) f'(s)`,
/// and the graph is a potential over the diagonal: `W(x) = w(|x|^2)` with
/// `w'(sigma) = tan(theta/2)` along `sigma = s cos^2(theta/2)`. The
/// construction certifies `|theta| <= pi - margin` and monotonicity of
/// `sigma(s)`; outside those windows the graph folds over the diagonal and the
/// error suggests the broken-geodesic chain instead.
pub(crate) fn radial_graph_gfqi(spec: &HamiltonianSpec, t0: f64, t1: f64) -> Result<Gfqi> {
    let samples = sample_rotation(spec, t0, t1)?;
    let n = samples.s.len();
    let mut sigma = vec![0.0; n];
    let mut wp = vec![0.0; n];
    let mut wpp = vec![0.0; n];
    for i in 0..n {
        let th = samples.theta[i];
        let si = samples.s[i];
        if th.abs() > PI - GRAPH_ANGLE_MARGIN {
            return Err(Error::Numerics(format!(
                "rotation angle {th:.4} at squared radius {si:.4} is too close to a half \
                 turn for a one-step graph; use a broken-geodesic chain"
            )));
        }
        let c = (0.5 * th).cos();
        sigma[i] = si * c * c;
        let dsigma_ds = c * c - 0.5 * si * th.sin() * samples.dtheta[i];
        if dsigma_ds <= MONOTONE_TOL {
            return Err(Error::Numerics(format!(
                "the diagonal projection folds near squared radius {si:.4} \
                 (d sigma / d s = {dsigma_ds:.3e}); use a broken-geodesic chain"
            )));
        }
        wp[i] = (0.5 * th).tan();
        wpp[i] = 0.5 * samples.dtheta[i] / (c * c * dsigma_ds);
    }
    let w = integrate_inward(&sigma, &wp, &wpp);
    let s_sup = *samples.s.last().unwrap();
    let table = HermiteTable1D::new(sigma, w, wp)?;
    let label = format!("diagonal potential of {}", spec.describe());
    let map = RadialTableMap::new(table, spec.dim(), s_sup, &label)?;
    graph_gfqi_from_table(Arc::new(map))
}

/// Generating function for the image of the zero section under the
/// time-`[t0, t1]` flow of a radial Hamiltonian, as a front over the base.
///
/// A base point with squared radius `s` moves to squared radius
/// `sigma_q = s cos^2(theta)` carrying momentum slope `u'(sigma_q) =
/// tan(theta)/2`, with `theta(s) = 2 (t1 - t0) f'(s)`. Certifies
/// `|theta| <= pi/2 - margin` and monotonicity of `sigma_q(s)`; outside those
/// windows the front folds over the base and the error suggests the
/// broken-geodesic chain instead.
pub(crate) fn radial_image_gfqi(spec: &HamiltonianSpec, t0: f64, t1: f64) -> Result<Gfqi> {
    let nbase = spec.dim() / 2;
    if nbase != 1 && nbase != 2 {
        return Err(Error::Dimension(format!(
            "radial front reconstruction supports one or two degrees of freedom; got {}",
            nbase
        )));
    }
    let samples = sample_rotation(spec, t0, t1)?;
    let n = samples.s.len();
    let mut sigma = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut upp = vec![0.0; n];
    for i in 0..n {
        let th = samples.theta[i];
        let si = samples.s[i];
        if th.abs() > 0.5 * PI - FRONT_ANGLE_MARGIN {
            return Err(Error::Numerics(format!(
                "rotation angle {th:.4} at squared radius {si:.4} turns the front \
                 vertical; use a broken-geodesic chain"
            )));
        }
        let c = th.cos();
        sigma[i] = si * c * c;
        let dsigma_ds = c * c - si * (2.0 * th).sin() * samples.dtheta[i];
        if dsigma_ds <= MONOTONE_TOL {
            return Err(Error::Numerics(format!(
                "the front folds over the base near squared radius {si:.4} \
                 (d sigma_q / d s = {dsigma_ds:.3e}); use a broken-geodesic chain"
            )));
        }
        up[i] = 0.5 * th.tan();
        upp[i] = 0.5 * samples.dtheta[i] / (c * c * dsigma_ds);
    }
    let u = integrate_inward(&sigma, &up, &upp);
    let s_sup = *samples.s.last().unwrap();
    let table = HermiteTable1D::new(sigma, u, up)?;
    let label = format!("front potential of {}", spec.describe());
    let map = RadialTableMap::new(table, nbase, s_sup, &label)?;
    graph_gfqi_from_table(Arc::new(map))
}

// ---------------------------------------------------------------------------
// Tabulated constructions driven by the flow map
// ---------------------------------------------------------------------------

/// Solves the midpoint localization `(z + phi(z))/2 = x` by damped Newton with
/// a finite-difference Jacobian, returning `(z, phi(z))`.
fn solve_midpoint(
    flow: &FlowMap,
    t0: f64,
    t1: f64,
    x: [f64; 2],
    z0: [f64; 2],
) -> Result<([f64; 2], [f64; 2])> {
    let stall = |x: [f64; 2]| {
        Error::Numerics(format!(
            "midpoint localization stalled at ({:.3}, {:.3}); the graph is not \
             graphical over the diagonal there; use a broken-geodesic chain",
            x[0], x[1]
        ))
    };
    let scale = 1.0 + x[0].abs() + x[1].abs();
    let mut z = z0;
    let mut fz = {
        let v = flow.flow(t0, t1, &z)?;
        [v[0], v[1]]
    };
    for _ in 0..60 {
        let r = [0.5 * (z[0] + fz[0]) - x[0], 0.5 * (z[1] + fz[1]) - x[1]];
        let rn = r[0].hypot(r[1]);
        if rn <= SOLVE_TOL * scale {
            return Ok((z, fz));
        }
        let fd = 1e-6 * (1.0 + z[0].abs().max(z[1].abs()));
        let mut a = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut zp = z;
            zp[j] += fd;
            let mut zm = z;
            zm[j] -= fd;
            let fp = flow.flow(t0, t1, &zp)?;
            let fm = flow.flow(t0, t1, &zm)?;
            for i in 0..2 {
                let dphi = (fp[i] - fm[i]) / (2.0 * fd);
                a[i][j] = 0.5 * dphi + if i == j { 0.5 } else { 0.0 };
            }
        }
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() < 1e-12 {
            return Err(stall(x));
        }
        let dz = [
            (a[1][1] * r[0] - a[0][1] * r[1]) / det,
            (a[0][0] * r[1] - a[1][0] * r[0]) / det,
        ];
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let zt = [z[0] - step * dz[0], z[1] - step * dz[1]];
            let ft = flow.flow(t0, t1, &zt)?;
            let rt = [0.5 * (zt[0] + ft[0]) - x[0], 0.5 * (zt[1] + ft[1]) - x[1]];
            if rt[0].hypot(rt[1]) < rn {
                z = zt;
                fz = [ft[0], ft[1]];
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(stall(x));
        }
    }
    let r = [0.5 * (z[0] + fz[0]) - x[0], 0.5 * (z[1] + fz[1]) - x[1]];
    if r[0].hypot(r[1]) <= 10.0 * SOLVE_TOL * scale {
        Ok((z, fz))
    } else {
        Err(stall(x))
    }
}

/// The diagonal-potential gradient at a solved midpoint: `J(phi(z) - z)`.
fn midpoint_gradient(z: &[f64; 2], fz: &[f64; 2]) -> [f64; 2] {
    [fz[1] - z[1], -(fz[0] - z[0])]
}

/// Serpentine node order over an `n x n` grid: rows bottom to top, direction
/// alternating, so consecutive entries are always grid neighbors.
fn serpentine(n: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(n * n);
    for iy in 0..n {
        if iy % 2 == 0 {
            for ix in 0..n {
                order.push((ix, iy));
            }
        } else {
            for ix in (0..n).rev() {
                order.push((ix, iy));
            }
        }
    }
    order
}

/// Integrates the sampled gradient field along a serpentine node order with a
/// Simpson rule per edge, solving the midpoint localization once per edge for
/// the mid-edge gradient. Returns the potential at every node, anchored at 0
/// on the first node of the order.
#[allow(clippy::too_many_arguments)]
fn sweep_potential(
    flow: &FlowMap,
    t0: f64,
    t1: f64,
    lo: f64,
    h: f64,
    n: usize,
    order: &[(usize, usize)],
    zs: &[[f64; 2]],
    grads: &[[f64; 2]],
) -> Result<Vec<f64>> {
    let mut w = vec![0.0; n * n];
    for pair in order.windows(2) {
        let (ax, ay) = pair[0];
        let (bx, by) = pair[1];
        let ai = ay * n + ax;
        let bi = by * n + bx;
        let xa = [lo + ax as f64 * h, lo + ay as f64 * h];
        let xb = [lo + bx as f64 * h, lo + by as f64 * h];
        let xm = [0.5 * (xa[0] + xb[0]), 0.5 * (xa[1] + xb[1])];
        let (zm, fzm) = solve_midpoint(flow, t0, t1, xm, zs[ai])?;
        let gm = midpoint_gradient(&zm, &fzm);
        // The edge is axis-aligned; pick the matching gradient component.
        let axis = usize::from(bx == ax);
        let delta = xb[axis] - xa[axis];
        w[bi] = w[ai] + delta / 6.0 * (grads[ai][axis] + 4.0 * gm[axis] + grads[bi][axis]);
    }
    Ok(w)
}

/// Generating function for the graph of the time-`[t0, t1]` flow of a
/// one-degree-of-freedom Hamiltonian, tabulated on a uniform grid over the
/// diagonal.
///
/// Each grid node `x` is localized by solving `(z + phi(z))/2 = x`, giving the
/// exact potential gradient `J(phi(z) - z)`; the potential itself is recovered
/// by Simpson integration along a serpentine sweep. Certificates: the
/// localization must converge everywhere (the midpoint map must be
/// invertible), row-wise and column-wise sweeps must agree (the gradient field
/// must be integrable), and the potential must settle back to zero on the
/// outer ring where the flow is the identity. Failures suggest the
/// broken-geodesic chain instead.
pub(crate) fn tabulated_graph_gfqi(
    spec: &HamiltonianSpec,
    t0: f64,
    t1: f64,
    nodes_per_axis: usize,
) -> Result<Gfqi> {
    if spec.dim() != 2 {
        return Err(Error::Dimension(format!(
            "tabulated graph reconstruction works in one degree of freedom \
             (phase space R^2); got R^{}",
            spec.dim()
        )));
    }
    let n = nodes_per_axis;
    if n < 8 {
        return Err(Error::Dimension(format!(
            "tabulated graph reconstruction needs at least 8 nodes per axis, got {n}"
        )));
    }
    let flow = spec.flow_map();
    let r_supp = spec.support_radius();
    let half = r_supp + 0.5;
    let lo = -half;
    let h = 2.0 * half / ((n - 1) as f64);

    // Localize every node, serpentine order, warm-starting from the previous
    // solution shifted by the node displacement.
    let order = serpentine(n);
    let mut zs = vec![[0.0; 2]; n * n];
    let mut grads = vec![[0.0; 2]; n * n];
    let mut prev: Option<([f64; 2], [f64; 2])> = None;
    for &(ix, iy) in &order {
        let x = [lo + ix as f64 * h, lo + iy as f64 * h];
        let z0 = match prev {
            Some((xp, zp)) => [zp[0] + x[0] - xp[0], zp[1] + x[1] - xp[1]],
            None => x,
        };
        let (z, fz) = solve_midpoint(&flow, t0, t1, x, z0)?;
        let idx = iy * n + ix;
        zs[idx] = z;
        grads[idx] = midpoint_gradient(&z, &fz);
        prev = Some((x, z));
    }

    // Two independent sweeps; their disagreement measures how far the sampled
    // field is from being a gradient.
    let row_order = order;
    let col_order: Vec<(usize, usize)> = serpentine(n).iter().map(|&(a, b)| (b, a)).collect();
    let mut w = sweep_potential(&flow, t0, t1, lo, h, n, &row_order, &zs, &grads)?;
    let w_cols = sweep_potential(&flow, t0, t1, lo, h, n, &col_order, &zs, &grads)?;
    let scale = 1.0 + w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut path_defect = 0.0f64;
    for (a, b) in w.iter().zip(&w_cols) {
        path_defect = path_defect.max((a - b).abs());
    }
    if path_defect > CONSISTENCY_TOL * scale {
        return Err(Error::Numerics(format!(
            "the sampled gradient field is not integrable (sweep disagreement \
             {path_defect:.3e}); refine the grid or use a broken-geodesic chain"
        )));
    }

    // Outside the support the flow is the identity and the potential must
    // vanish; certify the residue there, then snap it to an exact zero so the
    // table honors the compact-support contract.
    let snap_r = r_supp + h;
    let mut wx = vec![0.0; n * n];
    let mut wy = vec![0.0; n * n];
    let mut ring_residue = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            let x = [lo + ix as f64 * h, lo + iy as f64 * h];
            wx[idx] = grads[idx][0];
            wy[idx] = grads[idx][1];
            if x[0].hypot(x[1]) >= snap_r {
                ring_residue = ring_residue
                    .max(w[idx].abs())
                    .max(wx[idx].abs())
                    .max(wy[idx].abs());
                w[idx] = 0.0;
                wx[idx] = 0.0;
                wy[idx] = 0.0;
            }
        }
    }
    if ring_residue > CONSISTENCY_TOL * scale {
        return Err(Error::Numerics(format!(
            "the reconstructed potential does not settle to zero off the support \
             (residue {ring_residue:.3e}); refine the grid or use a broken-geodesic chain"
        )));
    }

    let label = format!("tabulated diagonal potential of {}", spec.describe());
    let map = BicubicTableMap::new(lo, h, n, w, wx, wy, 2.0f64.sqrt() * half, &label)?;
    graph_gfqi_from_table(Arc::new(map))
}

/// Solves `(phi(q, 0))_q = x` for `q` by damped 1D Newton with a
/// finite-difference slope, returning `(q, phi(q, 0))`.
fn solve_front(flow: &FlowMap, t0: f64, t1: f64, x: f64, q0: f64) -> Result<(f64, [f64; 2])> {
    let stall = |x: f64| {
        Error::Numerics(format!(
            "front localization stalled at x = {x:.3}; the front is not graphical \
             over the base there; use a broken-geodesic chain"
        ))
    };
    let scale = 1.0 + x.abs();
    let mut q = q0;
    let mut fq = {
        let v = flow.flow(t0, t1, &[q, 0.0])?;
        [v[0], v[1]]
    };
    for _ in 0..60 {
        let r = fq[0] - x;
        if r.abs() <= SOLVE_TOL * scale {
            return Ok((q, fq));
        }
        let fd = 1e-6 * (1.0 + q.abs());
        let fp = flow.flow(t0, t1, &[q + fd, 0.0])?;
        let fm = flow.flow(t0, t1, &[q - fd, 0.0])?;
        let slope = (fp[0] - fm[0]) / (2.0 * fd);
        if slope.abs() < 1e-12 {
            return Err(stall(x));
        }
        let dq = r / slope;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let qt = q - step * dq;
            let ft = flow.flow(t0, t1, &[qt, 0.0])?;
            if (ft[0] - x).abs() < r.abs() {
                q = qt;
                fq = [ft[0], ft[1]];
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(stall(x));
        }
    }
    if (fq[0] - x).abs() <= 10.0 * SOLVE_TOL * scale {
        Ok((q, fq))
    } else {
        Err(stall(x))
    }
}

/// Generating function for the image of the zero section under the
/// time-`[t0, t1]` flow of a one-degree-of-freedom Hamiltonian, tabulated as a
/// front over the base line.
///
/// Each grid point `x` is localized by solving `(phi(q, 0))_q = x`; the slope
/// of the front potential there is the transported momentum `(phi(q, 0))_p`,
/// and the potential is recovered by Simpson integration from the left, where
/// the flow is the identity. Certificates: the localization must converge, the
/// solved base points must be strictly increasing (no fold over the base), and
/// the potential must settle back to zero past the right edge of the support.
/// Failures suggest the broken-geodesic chain instead.
pub(crate) fn tabulated_image_gfqi(
    spec: &HamiltonianSpec,
    t0: f64,
    t1: f64,
    nodes: usize,
) -> Result<Gfqi> {
    if spec.dim() != 2 {
        return Err(Error::Dimension(format!(
            "tabulated front reconstruction works in one degree of freedom \
             (phase space R^2); got R^{}",
            spec.dim()
        )));
    }
    let n = nodes;
    if n < 8 {
        return Err(Error::Dimension(format!(
            "tabulated front reconstruction needs at least 8 nodes, got {n}"
        )));
    }
    let flow = spec.flow_map();
    let r_supp = spec.support_radius();
    let half = r_supp + 0.5;
    let lo = -half;
    let h = 2.0 * half / ((n - 1) as f64);

    let mut qs = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut warm = lo;
    for i in 0..n {
        let x = lo + i as f64 * h;
        let (q, fq) = solve_front(&flow, t0, t1, x, warm)?;
        qs[i] = q;
        up[i] = fq[1];
        warm = q + h;
    }
    for i in 1..n {
        if qs[i] <= qs[i - 1] + MONOTONE_TOL * h {
            return Err(Error::Numerics(format!(
                "the front folds over the base between x = {:.3} and x = {:.3}; \
                 use a broken-geodesic chain",
                lo + (i - 1) as f64 * h,
                lo + i as f64 * h
            )));
        }
    }

    // Simpson integration from the left edge, one extra localization per
    // interval for the mid-edge slope.
    let mut u = vec![0.0; n];
    for i in 0..n - 1 {
        let xm = lo + (i as f64 + 0.5) * h;
        let (_, fm) = solve_front(&flow, t0, t1, xm, qs[i])?;
        u[i + 1] = u[i] + h / 6.0 * (up[i] + 4.0 * fm[1] + up[i + 1]);
    }

    // Certify the identity region on both edges and snap it to exact zeros.
    let snap_r = r_supp + h;
    let scale = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut ring_residue = 0.0f64;
    for i in 0..n {
        let x = lo + i as f64 * h;
        if x.abs() >= snap_r {
            ring_residue = ring_residue.max(u[i].abs()).max(up[i].abs());
            u[i] = 0.0;
            up[i] = 0.0;
        }
    }
    if ring_residue > CONSISTENCY_TOL * scale {
        return Err(Error::Numerics(format!(
            "the reconstructed front potential does not settle to zero off the \
             support (residue {ring_residue:.3e}); refine the grid or use a \
             broken-geodesic chain"
        )));
    }

    let knots: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let table = HermiteTable1D::new(knots, u, up)?;
    let label = format!("tabulated front potential of {}", spec.describe());
    let map = LineTableMap::new(table, half, &label)?;
    graph_gfqi_from_table(Arc::new(map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::newton::newton_fiber_critical;
    use crate::geometry::j_apply;
    use crate::ham::profile::BumpProfile;
    use approx::assert_abs_diff_eq;

    fn radial_spec(height: f64, s_in: f64, s_out: f64, dim: usize) -> HamiltonianSpec {
        HamiltonianSpec::from_radial_profile(
            Arc::new(BumpProfile::new(height, s_in, s_out)),
            dim,
            s_out,
            format!("bump({height}, {s_in}, {s_out})"),
        )
        .unwrap()
    }

    #[test]
    fn radial_graph_matches_the_exact_rotation() {
        // This profile folds the diagonal projection from t ~ 0.475 on; stay
        // well inside the graphical window.
        let spec = radial_spec(0.5, 0.4, 1.3, 2);
        let g = radial_graph_gfqi(&spec, 0.0, 0.3).unwrap();
        assert_eq!(g.index(), 1);
        assert_eq!(g.fiber_dim(), 1);
        let flow = spec.flow_map();
        for z in [[0.3, 0.1], [-0.5, 0.4], [0.7, -0.6], [0.05, 0.0], [0.9, 0.55]] {
            let fz = flow.flow(0.0, 0.3, &z).unwrap();
            let x = [0.5 * (z[0] + fz[0]), 0.5 * (z[1] + fz[1])];
            let expect = j_apply(&[fz[0] - z[0], fz[1] - z[1]]);
            let cp = newton_fiber_critical(&g, &x, &[0.0]).unwrap();
            assert_abs_diff_eq!(cp.covector[0], expect[0], epsilon = 1e-8);
            assert_abs_diff_eq!(cp.covector[1], expect[1], epsilon = 1e-8);
        }
        // The center is a fixed point whose potential value is the action of
        // its constant trajectory: (t1 - t0) * f(0).
        assert_abs_diff_eq!(g.value(&[0.0, 0.0], &[0.0]), 0.15, epsilon = 1e-9);
        // Off the support the potential is identically zero.
        assert_abs_diff_eq!(g.value(&[2.0, 0.0], &[0.0]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_graph_covers_two_degrees_of_freedom() {
        let spec = radial_spec(0.5, 0.4, 1.3, 4);
        let g = radial_graph_gfqi(&spec, 0.0, 0.3).unwrap();
        let flow = spec.flow_map();
        for z in [
            [0.4, -0.3, 0.25, 0.5],
            [0.1, 0.2, -0.15, 0.05],
            [-0.6, 0.3, 0.4, -0.2],
        ] {
            let fz = flow.flow(0.0, 0.3, &z).unwrap();
            let x: Vec<f64> = z.iter().zip(&fz).map(|(a, b)| 0.5 * (a + b)).collect();
            let disp: Vec<f64> = fz.iter().zip(&z).map(|(b, a)| b - a).collect();
            let expect = j_apply(&disp);
            let cp = newton_fiber_critical(&g, &x, &[0.0]).unwrap();
            for k in 0..4 {
                assert_abs_diff_eq!(cp.covector[k], expect[k], epsilon = 1e-8);
            }
        }
        assert_abs_diff_eq!(g.value(&[0.0; 4], &[0.0]), 0.15, epsilon = 1e-9);
    }

    #[test]
    fn radial_graph_rejects_a_half_turn() {
        let spec = radial_spec(1.5, 0.2, 0.9, 2);
        let err = radial_graph_gfqi(&spec, 0.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("broken-geodesic chain"));
    }

    #[test]
    fn radial_front_matches_the_flown_section_and_its_line_integral() {
        let t = 0.5;
        let spec = radial_spec(0.25, 0.4, 1.6, 2);
        let g = radial_image_gfqi(&spec, 0.0, t).unwrap();
        assert_eq!(g.index(), 1);
        let prof = BumpProfile::new(0.25, 0.4, 1.6);
        // Slope of the front at the transported base point is the transported
        // momentum.
        for q in [0.15, 0.5, 0.9, 1.1, 1.25] {
            let s: f64 = q * q;
            let th = 2.0 * t * prof.d1(s);
            let x = q * th.cos();
            let p = q * th.sin();
            let cp = newton_fiber_critical(&g, &[x], &[0.0]).unwrap();
            assert_abs_diff_eq!(cp.covector[0], p, epsilon = 1e-8);
        }
        // Center value against an independent line integral of p dq along the
        // front, parametrized by the original radius.
        let rmax = 1.6f64.sqrt();
        let m = 4000;
        let dr = rmax / m as f64;
        let integrand = |r: f64| {
            let s = r * r;
            let th = 2.0 * t * prof.d1(s);
            let dth = 2.0 * t * prof.d2(s);
            let p = r * th.sin();
            let dq = th.cos() - 2.0 * r * r * th.sin() * dth;
            p * dq
        };
        let mut acc = 0.0;
        for i in 0..m {
            let a = i as f64 * dr;
            acc += dr / 6.0
                * (integrand(a) + 4.0 * integrand(a + 0.5 * dr) + integrand(a + dr));
        }
        // u(0) = -int_0^R p dq'/dr dr, with the outer anchor u = 0.
        assert_abs_diff_eq!(g.value(&[0.0], &[0.0]), -acc, epsilon = 1e-7);
        // Flat off the support.
        assert_abs_diff_eq!(g.value(&[1.5], &[0.0]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_front_rejects_a_vertical_tangent() {
        let spec = radial_spec(0.5, 0.4, 1.3, 2);
        let err = radial_image_gfqi(&spec, 0.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("broken-geodesic chain"));
    }

    #[test]
    fn tabulated_graph_matches_the_closed_form() {
        // This profile folds the diagonal projection from t ~ 0.5 on.
        let spec = radial_spec(0.4, 0.4, 1.2, 2);
        let closed = radial_graph_gfqi(&spec, 0.0, 0.35).unwrap();
        let tab = tabulated_graph_gfqi(&spec, 0.0, 0.35, 161).unwrap();
        assert_eq!(tab.index(), 1);
        let probes = [
            [0.0, 0.0],
            [0.3, 0.2],
            [-0.45, 0.6],
            [0.8, -0.1],
            [-0.2, -0.85],
            [0.55, 0.55],
            [1.0, 0.2],
            [-1.05, -0.3],
            [1.5, 0.9],
        ];
        for x in probes {
            let a = closed.value(&x, &[0.25]);
            let b = tab.value(&x, &[0.25]);
            assert_abs_diff_eq!(a, b, epsilon = 5e-4);
            if x[0].hypot(x[1]) < 1.05 {
                let ca = newton_fiber_critical(&closed, &x, &[0.0]).unwrap();
                let cb = newton_fiber_critical(&tab, &x, &[0.0]).unwrap();
                assert_abs_diff_eq!(ca.covector[0], cb.covector[0], epsilon = 1e-3);
                assert_abs_diff_eq!(ca.covector[1], cb.covector[1], epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn tabulated_graph_rejects_a_folding_flow() {
        let spec = radial_spec(2.0, 0.2, 0.9, 2);
        let err = tabulated_graph_gfqi(&spec, 0.0, 1.0, 41).unwrap_err();
        assert!(err.to_string().contains("broken-geodesic chain"));
    }

    #[test]
    fn tabulated_front_matches_the_closed_form() {
        let spec = radial_spec(0.25, 0.4, 1.6, 2);
        let closed = radial_image_gfqi(&spec, 0.0, 0.5).unwrap();
        let tab = tabulated_image_gfqi(&spec, 0.0, 0.5, 401).unwrap();
        for x in [-1.2, -0.8, -0.3, 0.0, 0.2, 0.7, 1.0, 1.25] {
            let a = closed.value(&[x], &[0.15]);
            let b = tab.value(&[x], &[0.15]);
            assert_abs_diff_eq!(a, b, epsilon = 1e-5);
            let ca = newton_fiber_critical(&closed, &[x], &[0.0]).unwrap();
            let cb = newton_fiber_critical(&tab, &[x], &[0.0]).unwrap();
            assert_abs_diff_eq!(ca.covector[0], cb.covector[0], epsilon = 1e-4);
        }
        assert_abs_diff_eq!(tab.value(&[1.9], &[0.0]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tabulated_front_rejects_a_folded_front() {
        let spec = radial_spec(0.5, 0.4, 1.3, 2);
        let err = tabulated_image_gfqi(&spec, 0.0, 1.0, 81).unwrap_err();
        assert!(err.to_string().contains("broken-geodesic chain"));
    }
}

