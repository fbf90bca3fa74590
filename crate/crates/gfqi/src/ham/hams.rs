//! Concrete Hamiltonian implementations behind [`HamiltonianSpec`].

use super::expr::{Ast, Var};
use super::flow::FlowMap;
use super::profile::{ProfileRef, ScaledProfile};
use super::{HamImpl, HamiltonianSpec, TimeRate};
use crate::Result;
use std::sync::Arc;

/// Rotate every `(q_i, p_i)` pair of `x` counterclockwise by `theta`.
pub(crate) fn rotate_pairs(x: &[f64], theta: f64) -> Vec<f64> {
    let n = x.len() / 2;
    let (s, c) = theta.sin_cos();
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        let q = x[i];
        let p = x[n + i];
        out[i] = q * c - p * s;
        out[n + i] = q * s + p * c;
    }
    out
}

// ---------------------------------------------------------------------------

pub(crate) struct ZeroHam {
    pub dim: usize,
}

impl HamImpl for ZeroHam {
    fn dim(&self) -> usize {
        self.dim
    }
    fn support_radius(&self) -> f64 {
        0.0
    }
    fn eval(&self, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }
    fn grad(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn is_autonomous(&self) -> bool {
        true
    }
    fn exact_flow(&self, _t0: f64, _t1: f64, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.to_vec())
    }
    fn describe(&self) -> String {
        "zero".into()
    }
}

// ---------------------------------------------------------------------------

/// `H(x) = f(|x|^2)`; all pairs rotate together at rate `2 f'(|x|^2)`.
pub(crate) struct RadialHam {
    pub profile: ProfileRef,
    pub dim: usize,
    pub s_support: f64,
    pub label: String,
}

impl HamImpl for RadialHam {
    fn dim(&self) -> usize {
        self.dim
    }
    fn support_radius(&self) -> f64 {
        self.s_support.sqrt()
    }
    fn eval(&self, _t: f64, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|c| c * c).sum();
        self.profile.v(s)
    }
    fn grad(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let s: f64 = x.iter().map(|c| c * c).sum();
        let d = 2.0 * self.profile.d1(s);
        for (o, c) in out.iter_mut().zip(x) {
            *o = d * c;
        }
    }
    fn is_autonomous(&self) -> bool {
        true
    }
    fn exact_flow(&self, t0: f64, t1: f64, x: &[f64]) -> Option<Vec<f64>> {
        let s: f64 = x.iter().map(|c| c * c).sum();
        let theta = 2.0 * self.profile.d1(s) * (t1 - t0);
        Some(rotate_pairs(x, theta))
    }
    fn radial_profile(&self) -> Option<ProfileRef> {
        Some(self.profile.clone())
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}

// ---------------------------------------------------------------------------

/// `H(x) = f(|x_1|^2) g(|x_2|^2)` on `R^4` with `x = (q_1, q_2, p_1, p_2)`.
/// Both plane radii are conserved, so the flow rotates plane 1 at rate
/// `2 f'(s_1) g(s_2)` and plane 2 at rate `2 f(s_1) g'(s_2)`.
pub(crate) struct BiradialHam {
    pub f: ProfileRef,
    pub g: ProfileRef,
    pub f_s_support: f64,
    pub g_s_support: f64,
    pub label: String,
}

impl BiradialHam {
    fn radii(x: &[f64]) -> (f64, f64) {
        let s1 = x[0] * x[0] + x[2] * x[2];
        let s2 = x[1] * x[1] + x[3] * x[3];
        (s1, s2)
    }
}

impl HamImpl for BiradialHam {
    fn dim(&self) -> usize {
        4
    }
    fn support_radius(&self) -> f64 {
        if self.f_s_support.is_finite() && self.g_s_support.is_finite() {
            (self.f_s_support + self.g_s_support).sqrt()
        } else {
            f64::INFINITY
        }
    }
    fn eval(&self, _t: f64, x: &[f64]) -> f64 {
        let (s1, s2) = Self::radii(x);
        self.f.v(s1) * self.g.v(s2)
    }
    fn grad(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let (s1, s2) = Self::radii(x);
        let d1 = 2.0 * self.f.d1(s1) * self.g.v(s2);
        let d2 = 2.0 * self.f.v(s1) * self.g.d1(s2);
        out[0] = d1 * x[0];
        out[2] = d1 * x[2];
        out[1] = d2 * x[1];
        out[3] = d2 * x[3];
    }
    fn is_autonomous(&self) -> bool {
        true
    }
    fn exact_flow(&self, t0: f64, t1: f64, x: &[f64]) -> Option<Vec<f64>> {
        let (s1, s2) = Self::radii(x);
        let dt = t1 - t0;
        let th1 = 2.0 * self.f.d1(s1) * self.g.v(s2) * dt;
        let th2 = 2.0 * self.f.v(s1) * self.g.d1(s2) * dt;
        let (sn1, cs1) = th1.sin_cos();
        let (sn2, cs2) = th2.sin_cos();
        Some(vec![
            x[0] * cs1 - x[2] * sn1,
            x[1] * cs2 - x[3] * sn2,
            x[0] * sn1 + x[2] * cs1,
            x[1] * sn2 + x[3] * cs2,
        ])
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}

// ---------------------------------------------------------------------------

/// Parsed expression with precomputed analytic gradient.
pub(crate) struct ExprHam {
    ast: Ast,
    grads: Vec<Ast>,
    dim: usize,
    support: f64,
    source: String,
    autonomous: bool,
}

impl ExprHam {
    pub fn new(ast: Ast, dim: usize, support: f64, source: String) -> Result<Self> {
        let n = dim / 2;
        let mut grads = Vec::with_capacity(dim);
        for i in 1..=n {
            grads.push(ast.partial(Var::Q(i))?);
        }
        for i in 1..=n {
            grads.push(ast.partial(Var::P(i))?);
        }
        let autonomous = !ast.uses_time();
        Ok(Self {
            ast,
            grads,
            dim,
            support,
            source,
            autonomous,
        })
    }
}

impl HamImpl for ExprHam {
    fn dim(&self) -> usize {
        self.dim
    }
    fn support_radius(&self) -> f64 {
        self.support
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.ast.eval(t, x)
    }
    fn grad(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for (o, g) in out.iter_mut().zip(&self.grads) {
            *o = g.eval(t, x);
        }
    }
    fn is_autonomous(&self) -> bool {
        self.autonomous
    }
    fn describe(&self) -> String {
        self.source.clone()
    }
}

// ---------------------------------------------------------------------------

/// `c * H`. For autonomous `H` the flow is the reparametrized flow of `H`.
pub(crate) struct ScaledHam {
    pub c: f64,
    pub inner: HamiltonianSpec,
}

impl HamImpl for ScaledHam {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn support_radius(&self) -> f64 {
        self.inner.support_radius()
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.c * self.inner.eval(t, x)
    }
    fn grad(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let g = self.inner.grad(t, x);
        for (o, gi) in out.iter_mut().zip(g) {
            *o = self.c * gi;
        }
    }
    fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }
    fn exact_flow(&self, t0: f64, t1: f64, x: &[f64]) -> Option<Vec<f64>> {
        if self.inner.is_autonomous() {
            // X_{cH} = c X_H, so running for duration dt equals running H for c*dt.
            self.inner.exact_flow(0.0, self.c * (t1 - t0), x)
        } else {
            None
        }
    }
    fn radial_profile(&self) -> Option<ProfileRef> {
        self.inner.radial_profile().map(|p| {
            Arc::new(ScaledProfile {
                factor: self.c,
                inner: p,
            }) as ProfileRef
        })
    }
    fn describe(&self) -> String {
        format!("{} * ({})", self.c, self.inner.describe())
    }
}

// ---------------------------------------------------------------------------

/// `a(t) * H(x)` for autonomous `H`; flow = flow of `H` for duration
/// `int_{t0}^{t1} a`.
pub(crate) struct TimeScaledHam {
    pub rate: TimeRate,
    pub inner: HamiltonianSpec,
}

impl HamImpl for TimeScaledHam {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn support_radius(&self) -> f64 {
        self.inner.support_radius()
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.rate.eval(t) * self.inner.eval(t, x)
    }
    fn grad(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let a = self.rate.eval(t);
        let g = self.inner.grad(t, x);
        for (o, gi) in out.iter_mut().zip(g) {
            *o = a * gi;
        }
    }
    fn is_autonomous(&self) -> bool {
        matches!(self.rate, TimeRate::Const(_))
    }
    fn exact_flow(&self, t0: f64, t1: f64, x: &[f64]) -> Option<Vec<f64>> {
        let tau = self.rate.integral(t0, t1);
        self.inner.exact_flow(0.0, tau, x)
    }
    fn describe(&self) -> String {
        format!("a(t) * ({})", self.inner.describe())
    }
}

// ---------------------------------------------------------------------------

/// Pointwise sum.
pub(crate) struct SumHam {
    pub a: HamiltonianSpec,
    pub b: HamiltonianSpec,
}

impl HamImpl for SumHam {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn support_radius(&self) -> f64 {
        self.a.support_radius().max(self.b.support_radius())
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.a.eval(t, x) + self.b.eval(t, x)
    }
    fn grad(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let ga = self.a.grad(t, x);
        let gb = self.b.grad(t, x);
        for (o, (u, v)) in out.iter_mut().zip(ga.iter().zip(gb.iter())) {
            *o = u + v;
        }
    }
    fn is_autonomous(&self) -> bool {
        self.a.is_autonomous() && self.b.is_autonomous()
    }
    fn describe(&self) -> String {
        format!("({}) + ({})", self.a.describe(), self.b.describe())
    }
}

// ---------------------------------------------------------------------------

/// `H = coeff * U(q_1) * V(p_1)` on `R^2`.
pub(crate) struct PlateauProductHam {
    pub coeff: f64,
    pub u: ProfileRef,
    pub v: ProfileRef,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub label: String,
}

impl HamImpl for PlateauProductHam {
    fn dim(&self) -> usize {
        2
    }
    fn support_radius(&self) -> f64 {
        let qm = self.u_range.0.abs().max(self.u_range.1.abs());
        let pm = self.v_range.0.abs().max(self.v_range.1.abs());
        (qm * qm + pm * pm).sqrt()
    }
    fn eval(&self, _t: f64, x: &[f64]) -> f64 {
        self.coeff * self.u.v(x[0]) * self.v.v(x[1])
    }
    fn grad(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.coeff * self.u.d1(x[0]) * self.v.v(x[1]);
        out[1] = self.coeff * self.u.v(x[0]) * self.v.d1(x[1]);
    }
    fn is_autonomous(&self) -> bool {
        true
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}

// ---------------------------------------------------------------------------

/// Inverse-flow generator for time-dependent `H`:
/// `bar H(t, x) = -H(t, phi_H^t(x))`.
pub(crate) struct BarHam {
    inner: HamiltonianSpec,
    inner_flow: FlowMap,
}

impl BarHam {
    pub fn new(inner: HamiltonianSpec) -> Self {
        let inner_flow = FlowMap::new(inner.clone());
        Self { inner, inner_flow }
    }
}

impl HamImpl for BarHam {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn support_radius(&self) -> f64 {
        self.inner.support_radius()
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self.inner_flow.flow(0.0, t, x) {
            Ok(y) => -self.inner.eval(t, &y),
            // Signal failure through NaN; the integrator turns it into an error.
            Err(_) => f64::NAN,
        }
    }
    fn is_autonomous(&self) -> bool {
        false
    }
    fn describe(&self) -> String {
        format!("inverse generator of ({})", self.inner.describe())
    }
}

// ---------------------------------------------------------------------------

/// Concatenation generator `H # K (t, x) = H(t, x) + K(t, (phi_H^t)^{-1}(x))`,
/// generating `phi_H^t . phi_K^t`.
pub(crate) struct SharpHam {
    h: HamiltonianSpec,
    k: HamiltonianSpec,
    h_flow: FlowMap,
}

impl SharpHam {
    pub fn new(h: HamiltonianSpec, k: HamiltonianSpec) -> Self {
        let h_flow = FlowMap::new(h.clone());
        Self { h, k, h_flow }
    }
}

impl HamImpl for SharpHam {
    fn dim(&self) -> usize {
        self.h.dim()
    }
    fn support_radius(&self) -> f64 {
        self.h.support_radius().max(self.k.support_radius())
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self.h_flow.flow(t, 0.0, x) {
            Ok(y) => self.h.eval(t, x) + self.k.eval(t, &y),
            Err(_) => f64::NAN,
        }
    }
    fn is_autonomous(&self) -> bool {
        false
    }
    fn describe(&self) -> String {
        format!("({}) # ({})", self.h.describe(), self.k.describe())
    }
}

// ---------------------------------------------------------------------------

/// `H(t, psi^{-1}(x))` where `psi` is the time-1 flow of the conjugator;
/// generates `psi . phi_H^t . psi^{-1}`.
pub(crate) struct ConjugatedHam {
    inner: HamiltonianSpec,
    conj: HamiltonianSpec,
    conj_flow: FlowMap,
}

impl ConjugatedHam {
    pub fn new(inner: HamiltonianSpec, conj: HamiltonianSpec) -> Self {
        let conj_flow = FlowMap::new(conj.clone());
        Self {
            inner,
            conj,
            conj_flow,
        }
    }
}

impl HamImpl for ConjugatedHam {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn support_radius(&self) -> f64 {
        self.inner.support_radius().max(self.conj.support_radius())
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self.conj_flow.flow(1.0, 0.0, x) {
            Ok(y) => self.inner.eval(t, &y),
            Err(_) => f64::NAN,
        }
    }
    fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }
    fn describe(&self) -> String {
        format!(
            "({}) conjugated by time-1 flow of ({})",
            self.inner.describe(),
            self.conj.describe()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ham::profile::{BumpProfile, C2Scalar};

    #[test]
    fn rotation_direction_is_counterclockwise() {
        // Positive rate: e_q rotates toward e_p.
        let out = rotate_pairs(&[1.0, 0.0], std::f64::consts::FRAC_PI_2);
        assert!((out[0]).abs() < 1e-15 && (out[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radial_gradient_and_flow_agree_with_hamilton_equations() {
        let profile = Arc::new(BumpProfile::new(0.8, 1.0, 4.0));
        let ham =
            HamiltonianSpec::from_radial_profile(profile.clone(), 2, 4.0, "test bump").unwrap();
        let x = [1.2, 0.5];
        let s = x[0] * x[0] + x[1] * x[1];
        // dq/dt = -dH/dp = -2 f'(s) p ; dp/dt = +2 f'(s) q.
        let v = ham.vector_field(0.0, &x);
        let rate = 2.0 * profile.d1(s);
        assert!((v[0] + rate * x[1]).abs() < 1e-14);
        assert!((v[1] - rate * x[0]).abs() < 1e-14);
        // Exact flow rotates by 2 f'(s) t and preserves s.
        let y = ham.exact_flow(0.0, 0.7, &x).unwrap();
        let sy = y[0] * y[0] + y[1] * y[1];
        assert!((sy - s).abs() < 1e-13);
        let angle = (x[1].atan2(x[0]) - y[1].atan2(y[0])).rem_euclid(2.0 * std::f64::consts::PI);
        let expect = (-rate * 0.7).rem_euclid(2.0 * std::f64::consts::PI);
        assert!((angle - expect).abs() < 1e-10, "{angle} vs {expect}");
    }

    #[test]
    fn biradial_flow_preserves_both_plane_radii() {
        let f = Arc::new(BumpProfile::new(1.0, 0.5, 2.0));
        let g = Arc::new(BumpProfile::new(0.7, 1.0, 3.0));
        let ham = HamiltonianSpec::biradial_product(f, 2.0, g, 3.0, "biradial test");
        let x = [0.6, 0.4, -0.2, 0.9];
        let y = ham.exact_flow(0.0, 1.0, &x).unwrap();
        let s1 = |z: &[f64]| z[0] * z[0] + z[2] * z[2];
        let s2 = |z: &[f64]| z[1] * z[1] + z[3] * z[3];
        assert!((s1(&x) - s1(&y)).abs() < 1e-13);
        assert!((s2(&x) - s2(&y)).abs() < 1e-13);
        // Value is conserved along the flow.
        assert!((ham.eval(0.0, &x) - ham.eval(0.0, &y)).abs() < 1e-12);
    }

    #[test]
    fn scaled_autonomous_flow_reparametrizes_time() {
        let profile = Arc::new(BumpProfile::new(0.8, 1.0, 4.0));
        let ham = HamiltonianSpec::from_radial_profile(profile, 2, 4.0, "bump").unwrap();
        let doubled = ham.scaled(2.0);
        let x = [0.9, -0.3];
        let a = doubled.exact_flow(0.0, 0.5, &x).unwrap();
        let b = ham.exact_flow(0.0, 1.0, &x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-14);
        }
    }
}
