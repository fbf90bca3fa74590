//! Broken-trajectory generating functions for Hamiltonian flows.
//!
//! Two chain constructions, one per target:
//!
//! - [`FlowChainCore`] generates the image of the zero section (optionally of
//!   the graph of an exact differential) under the time-`t1` flow. The time
//!   interval is split into `N` substeps; each substep carries a mixed-variable
//!   generating function `W_j(q_start, p_end)` evaluated by a shooting solve of
//!   the substep boundary problem over a fixed-step implicit-midpoint
//!   micro-integration. The identities `dW/dq = p_start`, `dW/dP = q_end` hold
//!   exactly for the discrete micro-flow, so chain gradients come from the
//!   solve byproducts at no extra cost.
//!
//! - [`MidpointChainCore`] generates the graph of the time-`t1` map over the
//!   diagonal. One implicit-midpoint step of width `eps` is generated exactly
//!   (in the diagonal-chart convention of [`crate::geometry`]) by the
//!   closed-form function `eps * H(t_mid, .)`; compositions are chained with
//!   the symplectic coupling `2 omega(u - x, v - x)` between consecutive
//!   factors, which adds one hyperbolic block of fiber variables per
//!   composition.
//!
//! Both cores vanish identically (bit-exactly) once every relevant phase-space
//! point sits outside the Hamiltonian's support ball, which is what makes the
//! surrounding truncation machinery exact.

use super::base_maps::BaseMapRef;
use super::gfqi_core::{EvalCost, GfCore};
use super::quadratic::SymmetricQuadratic;
use crate::geometry::{j_apply, omega};
use crate::ham::{FlowMap, HamiltonianSpec};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Flow-image chain
// ---------------------------------------------------------------------------

/// Result of one substep boundary solve.
struct SubstepSolve {
    /// Start momentum `p_start` solving the boundary problem (`= dW/dq`).
    p_start: Vec<f64>,
    /// End position of the solved trajectory (`= dW/dP`).
    q_end: Vec<f64>,
    /// Substep generating-function value `W(q_start, p_end)`.
    w: f64,
}

/// Generating function of the flow image of the zero section (or of the graph
/// of `d initial`), as a broken chain of mixed-variable substep functions.
///
/// Fiber layout (blocks of the configuration dimension `n`, `N` substeps,
/// positions stored relative to the base point `x`):
/// `xi = [q0 - x, P_1, Q_1 - x, P_2, ..., Q_{N-1} - x, P_N]`, dimension `2 n N`.
pub(crate) struct FlowChainCore {
    spec: HamiltonianSpec,
    flow: FlowMap,
    /// Configuration dimension (base dimension of the generating function).
    n: usize,
    substeps: usize,
    t0: f64,
    t1: f64,
    /// Micro integration step counts, one per substep.
    micro: Vec<usize>,
    /// Optional initial function: the chain then starts on the graph of its
    /// differential instead of the zero section.
    initial: Option<BaseMapRef>,
    /// Sampled bound used by the fiber extent hint.
    reach: f64,
}

impl FlowChainCore {
    pub fn new(
        spec: HamiltonianSpec,
        substeps: usize,
        t0: f64,
        t1: f64,
        micro_target_dt: f64,
        initial: Option<BaseMapRef>,
    ) -> Result<Self> {
        let n = spec.n();
        if !(n == 1 || n == 2) {
            return Err(Error::Dimension(format!(
                "flow-image chains support configuration dimensions 1 and 2, got {n}"
            )));
        }
        if substeps == 0 {
            return Err(Error::OutOfRange("chain needs at least one substep".into()));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::OutOfRange(format!(
                "invalid chain time span [{t0}, {t1}]"
            )));
        }
        if !spec.support_radius().is_finite() {
            return Err(Error::OutOfRange(
                "flow chains need a compactly supported Hamiltonian".into(),
            ));
        }
        if let Some(f) = &initial {
            if f.dim() != n {
                return Err(Error::Dimension(format!(
                    "initial function dimension {} does not match configuration dimension {n}",
                    f.dim()
                )));
            }
            if !f.support_radius().is_finite() {
                return Err(Error::OutOfRange(
                    "initial function must be compactly supported".into(),
                ));
            }
        }
        if !(micro_target_dt > 0.0) {
            return Err(Error::OutOfRange(
                "micro integration step target must be positive".into(),
            ));
        }
        let eps = (t1 - t0) / substeps as f64;
        let k = ((eps / micro_target_dt).ceil() as usize).clamp(2, 256);
        let micro = vec![k; substeps];
        let flow = spec.flow_map();

        // Reach estimate for the fiber extent hint: trajectories from the zero
        // section (or the initial graph) stay inside the support ball or are
        // frozen, so intermediate data is bounded by the supports plus the
        // initial slope.
        let mut reach = spec.support_radius() + 1.0;
        if let Some(f) = &initial {
            let mut rng = ChaCha8Rng::seed_from_u64(0x51ee_7e11);
            let mut slope: f64 = 0.0;
            let mut g = vec![0.0; n];
            let r = f.support_radius().max(0.5);
            for _ in 0..200 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-r..r)).collect();
                f.grad(&x, &mut g);
                slope = slope.max(g.iter().map(|c| c * c).sum::<f64>().sqrt());
            }
            reach = reach.max(f.support_radius() + slope + 1.0);
        }

        let core = Self {
            spec,
            flow,
            n,
            substeps,
            t0,
            t1,
            micro,
            initial,
            reach,
        };
        core.certify_twist()?;
        Ok(core)
    }

    fn substep_time(&self, j: usize) -> (f64, f64) {
        let w = (self.t1 - self.t0) / self.substeps as f64;
        (self.t0 + w * j as f64, self.t0 + w * (j + 1) as f64)
    }

    /// Micro-integrates the substep `j` trajectory from `(q, p0)` and returns
    /// the sequence of states.
    fn run_micro(&self, j: usize, q: &[f64], p0: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (a, b) = self.substep_time(j);
        let k = self.micro[j];
        let h = (b - a) / k as f64;
        let mut states = Vec::with_capacity(k + 1);
        let mut z: Vec<f64> = q.iter().chain(p0).copied().collect();
        states.push(z.clone());
        for step in 0..k {
            let t = a + h * step as f64;
            z = self.flow.midpoint_step(t, h, &z).map_err(|e| {
                Error::Numerics(format!(
                    "substep micro-integration failed ({e}); double the number of chain substeps"
                ))
            })?;
            states.push(z.clone());
        }
        Ok(states)
    }

    /// Solves the substep boundary problem `p_end(q, p_start) = p_target` by a
    /// damped Newton shooting iteration and returns the generating-function
    /// value with its gradient byproducts.
    fn solve_substep(&self, j: usize, q: &[f64], p_target: &[f64]) -> Result<SubstepSolve> {
        let n = self.n;
        let tol = 1e-11 * (1.0 + p_target.iter().fold(0.0f64, |m, c| m.max(c.abs())));
        let mut p0 = p_target.to_vec();
        let mut states = self.run_micro(j, q, &p0)?;
        let residual = |states: &[Vec<f64>]| -> Vec<f64> {
            let last = states.last().expect("nonempty trajectory");
            (0..n).map(|i| last[n + i] - p_target[i]).collect()
        };
        let norm = |r: &[f64]| r.iter().map(|c| c * c).sum::<f64>().sqrt();
        let mut r = residual(&states);
        let mut rn = norm(&r);
        let mut converged = rn <= tol;
        for _iter in 0..30 {
            if converged {
                break;
            }
            // Finite-difference shooting Jacobian d p_end / d p_start.
            let fd = 1e-6 * (1.0 + p0.iter().fold(0.0f64, |m, c| m.max(c.abs())));
            let mut jac = vec![vec![0.0; n]; n];
            for col in 0..n {
                let mut pp = p0.clone();
                pp[col] += fd;
                let pert = self.run_micro(j, q, &pp)?;
                let rp = residual(&pert);
                for (row, jr) in jac.iter_mut().enumerate() {
                    jr[col] = (rp[row] - r[row]) / fd;
                }
            }
            let delta = solve_small(&jac, &r).ok_or_else(|| {
                Error::Numerics(
                    "substep boundary solve has a singular shooting matrix; \
                     double the number of chain substeps"
                        .to_string(),
                )
            })?;
            // Damped update: halve until the residual decreases.
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..25 {
                let cand: Vec<f64> = p0.iter().zip(&delta).map(|(p, d)| p - t * d).collect();
                let cand_states = self.run_micro(j, q, &cand)?;
                let cand_r = residual(&cand_states);
                let cand_rn = norm(&cand_r);
                if cand_rn < rn {
                    p0 = cand;
                    states = cand_states;
                    r = cand_r;
                    rn = cand_rn;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            converged = rn <= tol;
        }
        if !converged {
            return Err(Error::Numerics(format!(
                "substep boundary solve stalled at residual {rn:.3e}; \
                 double the number of chain substeps"
            )));
        }

        // Discrete generating-function value: for micro states z_0..z_K,
        //   W = (q_0.p_0 + q_K.p_K)/2 + sum_k (q_k.p_{k+1} - q_{k+1}.p_k)/2
        //       - sum_k h * H(t_mid_k, (z_k + z_{k+1})/2),
        // which is the exact mixed-variable generating function of the
        // composed implicit-midpoint micro-steps.
        let (a, b) = self.substep_time(j);
        let k = self.micro[j];
        let h = (b - a) / k as f64;
        let first = &states[0];
        let last = states.last().expect("nonempty trajectory");
        let mut w = 0.5 * (dot(&first[..n], &first[n..]) + dot(&last[..n], &last[n..]));
        for step in 0..k {
            let z0 = &states[step];
            let z1 = &states[step + 1];
            w += 0.5 * (dot(&z0[..n], &z1[n..]) - dot(&z1[..n], &z0[n..]));
            let mid: Vec<f64> = z0.iter().zip(z1).map(|(u, v)| 0.5 * (u + v)).collect();
            w -= h * self.spec.eval(a + h * (step as f64 + 0.5), &mid);
        }
        Ok(SubstepSolve {
            p_start: p0,
            q_end: last[..n].to_vec(),
            w,
        })
    }

    /// Construction-time certificate: the substep boundary problem must be
    /// solvable (invertible shooting matrix, converging Newton) on a sample of
    /// boundary data covering the support.
    fn certify_twist(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7157_ce27);
        let r = self.spec.support_radius() + 0.5;
        for _ in 0..40 {
            let q: Vec<f64> = (0..self.n).map(|_| rng.random_range(-r..r)).collect();
            let p: Vec<f64> = (0..self.n).map(|_| rng.random_range(-r..r)).collect();
            for j in 0..self.substeps {
                self.solve_substep(j, &q, &p)?;
            }
        }
        Ok(())
    }

    /// The quadratic form at infinity: with shifted positions, all base terms
    /// cancel and
    /// `Q = -(q0-x).P_1 + sum_j [P_j.(Q_j-x) - (Q_j-x).P_{j+1}]`.
    pub fn quadratic_form(&self) -> Result<SymmetricQuadratic> {
        let n = self.n;
        let nn = self.fiber_dim();
        let mut m = DMatrix::zeros(nn, nn);
        let off_p = |j: usize| (2 * j - 1) * n;
        let off_q = |j: usize| 2 * j * n;
        for i in 0..n {
            // -(q0 - x) . P_1
            let a = i;
            let b = off_p(1) + i;
            m[(a, b)] -= 0.5;
            m[(b, a)] -= 0.5;
            for j in 1..self.substeps {
                // + P_j . (Q_j - x)
                let a = off_p(j) + i;
                let b = off_q(j) + i;
                m[(a, b)] += 0.5;
                m[(b, a)] += 0.5;
                // - (Q_j - x) . P_{j+1}
                let a = off_q(j) + i;
                let b = off_p(j + 1) + i;
                m[(a, b)] -= 0.5;
                m[(b, a)] -= 0.5;
            }
        }
        SymmetricQuadratic::from_matrix(m, 0)
    }

    /// Shared assembly: substep solves, value, and (optionally) gradients.
    fn assemble(&self, x: &[f64], xi: &[f64], want_grad: bool) -> (f64, Vec<f64>, Vec<f64>) {
        let n = self.n;
        let nsub = self.substeps;
        let q0_rel = &xi[0..n];
        let p_block = |j: usize| &xi[(2 * j - 1) * n..(2 * j) * n];
        let q_block = |j: usize| &xi[(2 * j) * n..(2 * j + 1) * n];

        let mut solves = Vec::with_capacity(nsub);
        for j in 1..=nsub {
            let rel = if j == 1 { q0_rel } else { q_block(j - 1) };
            let q_start: Vec<f64> = x.iter().zip(rel).map(|(a, b)| a + b).collect();
            let solve = self
                .solve_substep(j - 1, &q_start, p_block(j))
                .unwrap_or_else(|e| panic!("chain evaluation failed: {e}"));
            solves.push(solve);
        }

        let p_n = p_block(nsub);
        let mut s = dot(x, p_n);
        for solve in &solves {
            s -= solve.w;
        }
        for j in 1..nsub {
            let qj: Vec<f64> = x.iter().zip(q_block(j)).map(|(a, b)| a + b).collect();
            s += dot(p_block(j), &qj);
        }
        let q0_abs: Vec<f64> = x.iter().zip(q0_rel).map(|(a, b)| a + b).collect();
        let mut dphi = vec![0.0; n];
        if let Some(f) = &self.initial {
            s += f.value(&q0_abs);
            if want_grad {
                f.grad(&q0_abs, &mut dphi);
            }
        }

        if !want_grad {
            return (s, Vec::new(), Vec::new());
        }

        // d/dx = P_N - sum_j p_start^j + sum_{j<N} P_j  (+ d initial).
        let mut gx = vec![0.0; n];
        for i in 0..n {
            gx[i] = p_n[i] + dphi[i];
            for solve in &solves {
                gx[i] -= solve.p_start[i];
            }
            for j in 1..nsub {
                gx[i] += p_block(j)[i];
            }
        }
        let mut gxi = vec![0.0; xi.len()];
        // d/d(q0 - x) = -p_start^1 (+ d initial).
        for i in 0..n {
            gxi[i] = dphi[i] - solves[0].p_start[i];
        }
        for j in 1..nsub {
            // d/d(Q_j - x) = P_j - p_start^{j+1}.
            for i in 0..n {
                gxi[2 * j * n + i] = p_block(j)[i] - solves[j].p_start[i];
            }
            // d/dP_j = (x + Q_j - x) - q_end^j.
            for i in 0..n {
                gxi[(2 * j - 1) * n + i] = x[i] + q_block(j)[i] - solves[j - 1].q_end[i];
            }
        }
        // d/dP_N = x - q_end^N.
        for i in 0..n {
            gxi[(2 * nsub - 1) * n + i] = x[i] - solves[nsub - 1].q_end[i];
        }
        (s, gx, gxi)
    }
}

impl GfCore for FlowChainCore {
    fn base_dim(&self) -> usize {
        self.n
    }
    fn fiber_dim(&self) -> usize {
        2 * self.n * self.substeps
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.assemble(x, xi, false).0
    }
    fn value_grad(&self, x: &[f64], xi: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        self.assemble(x, xi, true)
    }
    fn base_vanish_radius(&self, fiber_radius: f64) -> f64 {
        let r_init = self
            .initial
            .as_ref()
            .map(|f| f.support_radius())
            .unwrap_or(0.0);
        self.spec.support_radius().max(r_init) + fiber_radius + 0.25
    }
    fn fiber_extent_hint(&self) -> f64 {
        (self.fiber_dim() as f64).sqrt() * 2.0 * self.reach
    }
    fn eval_cost(&self) -> EvalCost {
        EvalCost::Expensive
    }
    fn describe(&self) -> String {
        format!(
            "broken-trajectory chain ({} substeps, {} micro-steps each) for the flow image {}of {}",
            self.substeps,
            self.micro[0],
            if self.initial.is_some() {
                "of an initial graph "
            } else {
                ""
            },
            self.spec.describe()
        )
    }
}

/// Solves the small (1x1 or 2x2) linear system `A d = r`; `None` if singular.
fn solve_small(a: &[Vec<f64>], r: &[f64]) -> Option<Vec<f64>> {
    match r.len() {
        1 => {
            if a[0][0].abs() < 1e-12 {
                None
            } else {
                Some(vec![r[0] / a[0][0]])
            }
        }
        2 => {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-12 {
                None
            } else {
                Some(vec![
                    (r[0] * a[1][1] - r[1] * a[0][1]) / det,
                    (r[1] * a[0][0] - r[0] * a[1][0]) / det,
                ])
            }
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Graph chain over the diagonal
// ---------------------------------------------------------------------------

/// Generating function of the graph of the time-`t1` map over the diagonal,
/// composed from closed-form substep functions `eps * H(t_mid, .)` with the
/// symplectic coupling `2 omega(u - x, v - x)` per composition.
///
/// Fiber layout (blocks of the phase-space dimension `d`):
/// `xi = [(u_1 - x, v_1 - x), ..., (u_{N-1} - x, v_{N-1} - x)]`; level `N-1` is
/// the outermost composition. Requires `N >= 2`; a single substep is an
/// ordinary graph generating function and is handled by the caller.
pub(crate) struct MidpointChainCore {
    spec: HamiltonianSpec,
    /// Phase-space dimension = base dimension of the generating function.
    d: usize,
    substeps: usize,
    eps: f64,
    /// Substep midpoint times.
    t_mid: Vec<f64>,
}

impl MidpointChainCore {
    pub fn new(spec: HamiltonianSpec, substeps: usize, t0: f64, t1: f64) -> Result<Self> {
        let d = spec.dim();
        if !(d == 2 || d == 4) {
            return Err(Error::Dimension(format!(
                "graph chains support phase-space dimensions 2 and 4, got {d}"
            )));
        }
        if substeps < 2 {
            return Err(Error::OutOfRange(
                "graph chain needs at least two substeps; a single substep is a plain graph"
                    .into(),
            ));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::OutOfRange(format!(
                "invalid chain time span [{t0}, {t1}]"
            )));
        }
        if !spec.support_radius().is_finite() {
            return Err(Error::OutOfRange(
                "graph chains need a compactly supported Hamiltonian".into(),
            ));
        }
        let eps = (t1 - t0) / substeps as f64;
        let t_mid: Vec<f64> = (0..substeps)
            .map(|j| t0 + eps * (j as f64 + 0.5))
            .collect();

        // Certificate: each substep function eps * H must be C^2-small enough
        // that the implicit-midpoint correspondence behind it is a graph over
        // the diagonal. Sample the Hessian spectral norm over the support.
        let mut rng = ChaCha8Rng::seed_from_u64(0x9a0c_41d7);
        let r = spec.support_radius() + 0.5;
        let fd = 1e-4;
        let mut sup_hess: f64 = 0.0;
        for &t in &t_mid {
            for _ in 0..120 {
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-r..r)).collect();
                let mut hess = DMatrix::zeros(d, d);
                for c in 0..d {
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[c] += fd;
                    ym[c] -= fd;
                    let gp = spec.grad(t, &yp);
                    let gm = spec.grad(t, &ym);
                    for rrow in 0..d {
                        hess[(rrow, c)] = (gp[rrow] - gm[rrow]) / (2.0 * fd);
                    }
                }
                for i in 0..d {
                    for jc in (i + 1)..d {
                        let s = 0.5 * (hess[(i, jc)] + hess[(jc, i)]);
                        hess[(i, jc)] = s;
                        hess[(jc, i)] = s;
                    }
                }
                if let Ok((_, lam)) = super::quadratic::jacobi_eigen(&hess) {
                    sup_hess = sup_hess.max(lam.iter().fold(0.0f64, |m, l| m.max(l.abs())));
                }
            }
        }
        if eps * sup_hess > 1.5 {
            return Err(Error::Numerics(format!(
                "substep width {eps:.3} times the sampled Hessian bound {sup_hess:.3} exceeds \
                 the graph certificate threshold 1.5; double the number of chain substeps"
            )));
        }

        Ok(Self {
            spec,
            d,
            substeps,
            eps,
            t_mid,
        })
    }

    /// Substep generating function `V_j(y) = eps * H(t_mid_j, y)`, 1-indexed.
    fn v(&self, j: usize, y: &[f64]) -> f64 {
        self.eps * self.spec.eval(self.t_mid[j - 1], y)
    }

    fn v_grad(&self, j: usize, y: &[f64]) -> Vec<f64> {
        let mut g = self.spec.grad(self.t_mid[j - 1], y);
        for c in g.iter_mut() {
            *c *= self.eps;
        }
        g
    }

    /// Block offsets of level `k` (1-indexed): `(u_k, v_k)`.
    fn level_offsets(&self, k: usize) -> (usize, usize) {
        (2 * self.d * (k - 1), 2 * self.d * (k - 1) + self.d)
    }

    /// The quadratic form at infinity: the direct sum over levels of the
    /// hyperbolic coupling `2 omega(u, v)`, eigenvalues all plus or minus one.
    pub fn quadratic_form(&self) -> Result<SymmetricQuadratic> {
        let d = self.d;
        let n = d / 2;
        let nn = self.fiber_dim();
        let mut m = DMatrix::zeros(nn, nn);
        for k in 1..self.substeps {
            let (ou, ov) = self.level_offsets(k);
            for i in 0..n {
                // 2 omega(u, v) = 2 sum_i (u_{p_i} v_{q_i} - u_{q_i} v_{p_i}).
                m[(ou + n + i, ov + i)] += 1.0;
                m[(ov + i, ou + n + i)] += 1.0;
                m[(ou + i, ov + n + i)] -= 1.0;
                m[(ov + n + i, ou + i)] -= 1.0;
            }
        }
        SymmetricQuadratic::from_matrix(m, 0)
    }
}

impl GfCore for MidpointChainCore {
    fn base_dim(&self) -> usize {
        self.d
    }
    fn fiber_dim(&self) -> usize {
        2 * self.d * (self.substeps - 1)
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        let d = self.d;
        let mut b = x.to_vec();
        let mut s = 0.0;
        for k in (1..self.substeps).rev() {
            let (ou, ov) = self.level_offsets(k);
            let u = &xi[ou..ou + d];
            let v = &xi[ov..ov + d];
            let y: Vec<f64> = b.iter().zip(v).map(|(a, c)| a + c).collect();
            s += self.v(k + 1, &y) + 2.0 * omega(u, v);
            for (bi, ui) in b.iter_mut().zip(u) {
                *bi += ui;
            }
        }
        s + self.v(1, &b)
    }
    fn value_grad(&self, x: &[f64], xi: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let d = self.d;
        let nsub = self.substeps;
        let mut s = 0.0;
        // Forward pass (outermost level first): accumulate the value and the
        // substep gradient of each level, then the innermost factor.
        let mut b = x.to_vec();
        let mut level_grad: Vec<Vec<f64>> = vec![Vec::new(); nsub];
        for k in (1..nsub).rev() {
            let (ou, ov) = self.level_offsets(k);
            let u = &xi[ou..ou + d];
            let v = &xi[ov..ov + d];
            let y: Vec<f64> = b.iter().zip(v).map(|(a, c)| a + c).collect();
            s += self.v(k + 1, &y) + 2.0 * omega(u, v);
            level_grad[k] = self.v_grad(k + 1, &y);
            for (bi, ui) in b.iter_mut().zip(u) {
                *bi += ui;
            }
        }
        s += self.v(1, &b);
        level_grad[0] = self.v_grad(1, &b);

        // d/d(u_k) = [grad V_1 + sum_{j<k} grad V_{j+1}] - 2 J v_k;
        // d/d(v_k) = grad V_{k+1} + 2 J u_k;  d/dx = sum of all grad V terms.
        let mut gxi = vec![0.0; xi.len()];
        let mut prefix = level_grad[0].clone();
        for k in 1..nsub {
            let (ou, ov) = self.level_offsets(k);
            let u = &xi[ou..ou + d];
            let v = &xi[ov..ov + d];
            let ju = j_apply(u);
            let jv = j_apply(v);
            for i in 0..d {
                gxi[ou + i] = prefix[i] - 2.0 * jv[i];
                gxi[ov + i] = level_grad[k][i] + 2.0 * ju[i];
            }
            for (p, g) in prefix.iter_mut().zip(&level_grad[k]) {
                *p += g;
            }
        }
        (s, prefix, gxi)
    }
    fn base_vanish_radius(&self, fiber_radius: f64) -> f64 {
        self.spec.support_radius() + fiber_radius + 0.25
    }
    fn fiber_extent_hint(&self) -> f64 {
        (self.fiber_dim() as f64).sqrt() * 2.0 * (self.spec.support_radius() + 1.0)
    }
    fn describe(&self) -> String {
        format!(
            "diagonal graph chain ({} substeps) for the time-one map of {}",
            self.substeps,
            self.spec.describe()
        )
    }
}
