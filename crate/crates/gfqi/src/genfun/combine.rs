//! Wrapper constructions on finished generating functions: fiberwise sums and
//! differences, conjugation, stabilization, and the two reduction modes
//! (fixing a base factor at a point / demoting a base factor to the fiber).
//!
//! Every wrapper here evaluates an inner truncated object in the inner
//! object's own diagonalized fiber coordinates, so the wrapper's "original"
//! fiber coordinates are concatenations of inner diagonal coordinates (plus
//! any demoted base coordinates). Because the inner objects are already
//! truncated, the wrapped `B = S - Q` is compactly supported from the start;
//! the outer sizing pass re-certifies the combined object on its own box.

use super::gfqi_core::{EvalCost, GfCore, Gfqi};
use super::quadratic::SymmetricQuadratic;
use crate::{Error, Result};
use std::sync::Arc;

/// Half-widths of the declared zero-mode axes of `g`, in the order the axes
/// appear among its (ascending) eigenvalues.
fn zero_widths_of(g: &Gfqi) -> Vec<f64> {
    g.fiber_half_widths()
        .iter()
        .zip(g.nondegenerate_axes())
        .filter(|(_, nd)| !**nd)
        .map(|(w, _)| *w)
        .collect()
}

fn worst_cost(a: EvalCost, b: EvalCost) -> EvalCost {
    if a == EvalCost::Expensive || b == EvalCost::Expensive {
        EvalCost::Expensive
    } else {
        EvalCost::Cheap
    }
}

// ---------------------------------------------------------------------------
// Fiberwise combination
// ---------------------------------------------------------------------------

/// `S(x; xi_a, xi_b) = S_a(x, xi_a) + sign * S_b(x, xi_b)`.
struct CombineCore {
    a: Gfqi,
    b: Gfqi,
    sign: f64,
}

impl GfCore for CombineCore {
    fn base_dim(&self) -> usize {
        self.a.base_dim()
    }
    fn fiber_dim(&self) -> usize {
        self.a.fiber_dim() + self.b.fiber_dim()
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        let qa = self.a.fiber_dim();
        self.a.value(x, &xi[..qa]) + self.sign * self.b.value(x, &xi[qa..])
    }
    fn value_grad(&self, x: &[f64], xi: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let qa = self.a.fiber_dim();
        let (va, gxa, gea) = self.a.value_gradient(x, &xi[..qa]);
        let (vb, gxb, geb) = self.b.value_gradient(x, &xi[qa..]);
        let gx = gxa
            .iter()
            .zip(&gxb)
            .map(|(p, q)| p + self.sign * q)
            .collect();
        let ge = gea
            .into_iter()
            .chain(geb.into_iter().map(|g| self.sign * g))
            .collect();
        (va + self.sign * vb, gx, ge)
    }
    fn base_vanish_radius(&self, _fiber_radius: f64) -> f64 {
        self.a.base_radius().max(self.b.base_radius())
    }
    fn fiber_extent_hint(&self) -> f64 {
        let ra = self.a.fiber_radius();
        let rb = self.b.fiber_radius();
        (ra * ra + rb * rb).sqrt()
    }
    fn zero_mode_half_widths(&self) -> Vec<f64> {
        let mut w = zero_widths_of(&self.a);
        w.extend(zero_widths_of(&self.b));
        w
    }
    fn eval_cost(&self) -> EvalCost {
        worst_cost(self.a.eval_cost(), self.b.eval_cost())
    }
    fn describe(&self) -> String {
        format!(
            "fiberwise {} of ({}) and ({})",
            if self.sign > 0.0 { "sum" } else { "difference" },
            self.a.describe(),
            self.b.describe()
        )
    }
}

/// Fiberwise combination `S_a +/- S_b` over a shared base. For the difference
/// the second summand enters with the conjugate convention, so the combined
/// form is `Q_a (+) (-Q_b)` and stays nondegenerate (blockwise spectra are
/// preserved, so no cancellation between the blocks can occur).
pub(crate) fn fiberwise_combine_gfqi(a: &Gfqi, b: &Gfqi, negate_second: bool) -> Result<Gfqi> {
    if a.base_dim() != b.base_dim() {
        return Err(Error::Dimension(format!(
            "fiberwise combination needs equal base dimensions, got {} and {}",
            a.base_dim(),
            b.base_dim()
        )));
    }
    let sign = if negate_second { -1.0 } else { 1.0 };
    let entries: Vec<f64> = a
        .eigenvalues()
        .iter()
        .copied()
        .chain(b.eigenvalues().iter().map(|l| sign * l))
        .collect();
    let declared = a.zero_modes() + b.zero_modes();
    let quad = SymmetricQuadratic::diagonal(&entries, declared)?;
    let core = CombineCore {
        a: a.clone(),
        b: b.clone(),
        sign,
    };
    Gfqi::new(Arc::new(core), quad)
}

// ---------------------------------------------------------------------------
// Conjugation
// ---------------------------------------------------------------------------

/// `S_bar(x, xi) = -S(x, xi)`: the generating function of the conjugate
/// Lagrangian (momenta negated), used by the duality between the lower and
/// upper spectral values.
struct NegatedCore {
    inner: Gfqi,
}

impl GfCore for NegatedCore {
    fn base_dim(&self) -> usize {
        self.inner.base_dim()
    }
    fn fiber_dim(&self) -> usize {
        self.inner.fiber_dim()
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        -self.inner.value(x, xi)
    }
    fn value_grad(&self, x: &[f64], xi: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let (v, gx, ge) = self.inner.value_gradient(x, xi);
        (
            -v,
            gx.into_iter().map(|g| -g).collect(),
            ge.into_iter().map(|g| -g).collect(),
        )
    }
    fn base_vanish_radius(&self, _fiber_radius: f64) -> f64 {
        self.inner.base_radius()
    }
    fn fiber_extent_hint(&self) -> f64 {
        self.inner.fiber_radius()
    }
    fn zero_mode_half_widths(&self) -> Vec<f64> {
        zero_widths_of(&self.inner)
    }
    fn eval_cost(&self) -> EvalCost {
        self.inner.eval_cost()
    }
    fn describe(&self) -> String {
        format!("conjugate of ({})", self.inner.describe())
    }
}

/// The conjugate generating function `-S` with form `-Q`.
pub(crate) fn conjugate_gfqi(g: &Gfqi) -> Result<Gfqi> {
    let entries: Vec<f64> = g.eigenvalues().iter().map(|l| -l).collect();
    let quad = SymmetricQuadratic::diagonal(&entries, g.zero_modes())?;
    Gfqi::new(Arc::new(NegatedCore { inner: g.clone() }), quad)
}

// ---------------------------------------------------------------------------
// Stabilization
// ---------------------------------------------------------------------------

/// `S(x; xi, zeta) = S_inner(x, xi) + sum_i sign_i * zeta_i^2`.
struct StabilizedCore {
    inner: Gfqi,
    signs: Vec<f64>,
}

impl GfCore for StabilizedCore {
    fn base_dim(&self) -> usize {
        self.inner.base_dim()
    }
    fn fiber_dim(&self) -> usize {
        self.inner.fiber_dim() + self.signs.len()
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        let q = self.inner.fiber_dim();
        let extra: f64 = self
            .signs
            .iter()
            .zip(&xi[q..])
            .map(|(s, z)| s * z * z)
            .sum();
        self.inner.value(x, &xi[..q]) + extra
    }
    fn value_grad(&self, x: &[f64], xi: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let q = self.inner.fiber_dim();
        let (v, gx, mut ge) = self.inner.value_gradient(x, &xi[..q]);
        let mut extra = 0.0;
        for (s, z) in self.signs.iter().zip(&xi[q..]) {
            extra += s * z * z;
            ge.push(2.0 * s * z);
        }
        (v + extra, gx, ge)
    }
    fn base_vanish_radius(&self, _fiber_radius: f64) -> f64 {
        self.inner.base_radius()
    }
    fn fiber_extent_hint(&self) -> f64 {
        self.inner.fiber_radius()
    }
    fn zero_mode_half_widths(&self) -> Vec<f64> {
        zero_widths_of(&self.inner)
    }
    fn eval_cost(&self) -> EvalCost {
        self.inner.eval_cost()
    }
    fn describe(&self) -> String {
        format!(
            "stabilization of ({}) by {} fiber direction(s)",
            self.inner.describe(),
            self.signs.len()
        )
    }
}

/// Adds `+/- zeta^2` fiber directions; the generated Lagrangian and all
/// critical values are unchanged, only the index bookkeeping shifts.
pub(crate) fn stabilize_gfqi(g: &Gfqi, signs: &[i8]) -> Result<Gfqi> {
    if signs.is_empty() {
        return Err(Error::Config(
            "stabilization needs at least one fiber direction".into(),
        ));
    }
    if signs.iter().any(|s| *s == 0) {
        return Err(Error::Config("stabilizer signs must be +1 or -1".into()));
    }
    let signs: Vec<f64> = signs.iter().map(|s| f64::from(s.signum())).collect();
    let entries: Vec<f64> = g
        .eigenvalues()
        .iter()
        .copied()
        .chain(signs.iter().copied())
        .collect();
    let quad = SymmetricQuadratic::diagonal(&entries, g.zero_modes())?;
    let core = StabilizedCore {
        inner: g.clone(),
        signs,
    };
    Gfqi::new(Arc::new(core), quad)
}

// ---------------------------------------------------------------------------
// Reduction, mode 1: fix the second base factor at a point
// ---------------------------------------------------------------------------

/// `S_X(v; xi) = S(v, x0; xi)`: restriction of the base to `B x {x0}`. The
/// fiber is untouched, so the form and its index carry over verbatim.
struct FixedBaseCore {
    inner: Gfqi,
    tail: Vec<f64>,
    keep: usize,
}

impl FixedBaseCore {
    fn full(&self, x: &[f64]) -> Vec<f64> {
        x.iter().chain(&self.tail).copied().collect()
    }
}

impl GfCore for FixedBaseCore {
    fn base_dim(&self) -> usize {
        self.keep
    }
    fn fiber_dim(&self) -> usize {
        self.inner.fiber_dim()
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.inner.value(&self.full(x), xi)
    }
    fn value_grad(&self, x: &[f64], xi: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let (v, gx, ge) = self.inner.value_gradient(&self.full(x), xi);
        (v, gx[..self.keep].to_vec(), ge)
    }
    fn base_vanish_radius(&self, _fiber_radius: f64) -> f64 {
        let r = self.inner.base_radius();
        let t2: f64 = self.tail.iter().map(|c| c * c).sum();
        (r * r - t2).max(0.0).sqrt()
    }
    fn fiber_extent_hint(&self) -> f64 {
        self.inner.fiber_radius()
    }
    fn zero_mode_half_widths(&self) -> Vec<f64> {
        zero_widths_of(&self.inner)
    }
    fn eval_cost(&self) -> EvalCost {
        self.inner.eval_cost()
    }
    fn describe(&self) -> String {
        format!(
            "restriction of ({}) to the base slice at {:?}",
            self.inner.describe(),
            self.tail
        )
    }
}

/// Reduction by the coisotropic `T*B x {x0} x R^k`: fixes the trailing base
/// factor at `x0` and keeps the first `keep` base coordinates.
pub(crate) fn fix_base_point_gfqi(g: &Gfqi, keep: usize, x0: &[f64]) -> Result<Gfqi> {
    check_split(g, keep, x0.len())?;
    if x0.iter().any(|c| !c.is_finite()) {
        return Err(Error::OutOfRange(
            "base point of the fixed factor must be finite".into(),
        ));
    }
    let entries = g.eigenvalues().to_vec();
    let quad = SymmetricQuadratic::diagonal(&entries, g.zero_modes())?;
    let core = FixedBaseCore {
        inner: g.clone(),
        tail: x0.to_vec(),
        keep,
    };
    Gfqi::new(Arc::new(core), quad)
}

// ---------------------------------------------------------------------------
// Reduction, mode 2: demote the second base factor to the fiber
// ---------------------------------------------------------------------------

/// `S_Y(v; y, xi) = S(v, y; xi)`: the trailing base coordinates become fiber
/// variables. They do not appear in the quadratic form, so the form gains
/// `k` declared zero modes whose box half-widths are inherited from the inner
/// base radius (the demoted coordinates only matter inside the inner base
/// box).
struct DropToFiberCore {
    inner: Gfqi,
    keep: usize,
    k: usize,
}

impl GfCore for DropToFiberCore {
    fn base_dim(&self) -> usize {
        self.keep
    }
    fn fiber_dim(&self) -> usize {
        self.k + self.inner.fiber_dim()
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        let full: Vec<f64> = x.iter().chain(&xi[..self.k]).copied().collect();
        self.inner.value(&full, &xi[self.k..])
    }
    fn value_grad(&self, x: &[f64], xi: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let full: Vec<f64> = x.iter().chain(&xi[..self.k]).copied().collect();
        let (v, gfull, ge) = self.inner.value_gradient(&full, &xi[self.k..]);
        let gx = gfull[..self.keep].to_vec();
        let gxi: Vec<f64> = gfull[self.keep..].iter().copied().chain(ge).collect();
        (v, gx, gxi)
    }
    fn base_vanish_radius(&self, _fiber_radius: f64) -> f64 {
        self.inner.base_radius()
    }
    fn fiber_extent_hint(&self) -> f64 {
        self.inner.fiber_radius()
    }
    fn zero_mode_half_widths(&self) -> Vec<f64> {
        let mut w = vec![self.inner.base_radius() + 0.5; self.k];
        w.extend(zero_widths_of(&self.inner));
        w
    }
    fn eval_cost(&self) -> EvalCost {
        self.inner.eval_cost()
    }
    fn describe(&self) -> String {
        format!(
            "reduction of ({}) demoting {} base coordinate(s) to the fiber",
            self.inner.describe(),
            self.k
        )
    }
}

/// Reduction by the coisotropic `T*B x R^k x {0}`: keeps the first `keep`
/// base coordinates and turns the trailing `k` into fiber variables.
pub(crate) fn drop_to_fiber_gfqi(g: &Gfqi, keep: usize) -> Result<Gfqi> {
    let k = g.base_dim().saturating_sub(keep);
    check_split(g, keep, k)?;
    let entries: Vec<f64> = std::iter::repeat(0.0)
        .take(k)
        .chain(g.eigenvalues().iter().copied())
        .collect();
    let quad = SymmetricQuadratic::diagonal(&entries, k + g.zero_modes())?;
    let core = DropToFiberCore {
        inner: g.clone(),
        keep,
        k,
    };
    Gfqi::new(Arc::new(core), quad)
}

fn check_split(g: &Gfqi, keep: usize, second: usize) -> Result<()> {
    if keep == 0 || second == 0 || keep + second != g.base_dim() {
        return Err(Error::Dimension(format!(
            "base split {} + {} does not match base dimension {}",
            keep,
            second,
            g.base_dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::base_maps::{BaseMap, RadialBaseMap, ZeroBaseMap};
    use crate::genfun::gfqi_core::GraphCore;
    use crate::genfun::newton::{collect_critical_values, newton_fiber_critical};
    use crate::ham::profile::{BumpProfile, C2Scalar};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn graph_of(f: super::super::base_maps::BaseMapRef) -> Gfqi {
        let core = Arc::new(GraphCore { f });
        let quad = SymmetricQuadratic::diagonal(&[-1.0], 0).unwrap();
        Gfqi::new(core, quad).unwrap()
    }

    fn bump_graph_1d(height: f64) -> Gfqi {
        let prof = BumpProfile::new(height, 0.5, 1.5);
        graph_of(Arc::new(
            RadialBaseMap::new(Arc::new(prof), 1, 1.5, "bump").unwrap(),
        ))
    }

    fn zero_section_1d() -> Gfqi {
        graph_of(Arc::new(ZeroBaseMap { dim: 1 }))
    }

    /// Two bumps localized in separate coordinates, each windowed by a wide
    /// plateau in the other coordinate so the whole function has compact
    /// support: `F(x1, x2) = f(x1^2) w(x2^2) + g(x2^2) u(x1^2)`.
    struct TwoFactorMap {
        f: BumpProfile,
        g: BumpProfile,
        window: BumpProfile,
    }

    impl TwoFactorMap {
        fn new() -> Self {
            Self {
                f: BumpProfile::new(0.6, 0.4, 1.2),
                g: BumpProfile::new(0.35, 0.3, 0.9),
                window: BumpProfile::new(1.0, 2.0, 9.0),
            }
        }
    }

    impl BaseMap for TwoFactorMap {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            let s1 = x[0] * x[0];
            let s2 = x[1] * x[1];
            self.f.v(s1) * self.window.v(s2) + self.g.v(s2) * self.window.v(s1)
        }
        fn grad(&self, x: &[f64], out: &mut [f64]) {
            let s1 = x[0] * x[0];
            let s2 = x[1] * x[1];
            out[0] = (self.f.d1(s1) * self.window.v(s2) + self.g.v(s2) * self.window.d1(s1))
                * 2.0
                * x[0];
            out[1] = (self.f.v(s1) * self.window.d1(s2) + self.g.d1(s2) * self.window.v(s1))
                * 2.0
                * x[1];
        }
        fn support_radius(&self) -> f64 {
            (1.2f64 + 9.0).sqrt()
        }
        fn describe(&self) -> String {
            "two-factor windowed bumps".into()
        }
    }

    fn assert_value_set(values: &[f64], expected: &[f64], tol: f64) {
        for v in values {
            assert!(
                expected.iter().any(|e| (v - e).abs() <= tol),
                "unexpected critical value {v}; expected one of {expected:?} (all: {values:?})"
            );
        }
        for e in expected {
            assert!(
                values.iter().any(|v| (v - e).abs() <= tol),
                "missing critical value {e}; got {values:?}"
            );
        }
    }

    #[test]
    fn combine_minus_self_collapses_critical_values_to_zero() {
        let l = bump_graph_1d(0.7);
        let d = fiberwise_combine_gfqi(&l, &l, true).unwrap();
        assert_eq!(d.base_dim(), 1);
        assert_eq!(d.fiber_dim(), 2);
        assert_eq!(d.index(), 1); // eigenvalues -1 and +1
        let values = collect_critical_values(&d, 5, 1e-6);
        assert!(!values.is_empty());
        assert_value_set(&values, &[0.0], 1e-9);
        d.verify_quadratic_outside(1000, 11).unwrap();
    }

    #[test]
    fn combine_of_graph_and_zero_section_spans_the_function_range() {
        let l = bump_graph_1d(0.7);
        let z = zero_section_1d();
        let d = fiberwise_combine_gfqi(&l, &z, true).unwrap();
        let values = collect_critical_values(&d, 5, 1e-6);
        // Critical values of f: the plateau value and the flat tail.
        assert_value_set(&values, &[0.0, 0.7], 1e-9);
        // The sum behaves the same way here (the zero section contributes 0).
        let s = fiberwise_combine_gfqi(&l, &z, false).unwrap();
        let values = collect_critical_values(&s, 5, 1e-6);
        assert_value_set(&values, &[0.0, 0.7], 1e-9);
    }

    #[test]
    fn combine_requires_equal_base_dimensions() {
        let a = bump_graph_1d(0.5);
        let b = graph_of(Arc::new(ZeroBaseMap { dim: 2 }));
        let err = fiberwise_combine_gfqi(&a, &b, false).unwrap_err();
        assert!(format!("{err}").contains("equal base dimensions"));
    }

    #[test]
    fn conjugate_negates_critical_values() {
        let l = bump_graph_1d(0.7);
        let c = conjugate_gfqi(&l).unwrap();
        assert_eq!(c.index(), 0); // -(-1) = +1
        let values = collect_critical_values(&c, 5, 1e-6);
        assert_value_set(&values, &[0.0, -0.7], 1e-9);
        // An involution: conjugating twice restores the critical values.
        let cc = conjugate_gfqi(&c).unwrap();
        let values = collect_critical_values(&cc, 5, 1e-6);
        assert_value_set(&values, &[0.0, 0.7], 1e-9);
    }

    #[test]
    fn stabilization_preserves_critical_values_and_shifts_index() {
        let l = bump_graph_1d(0.7);
        let base_values = collect_critical_values(&l, 5, 1e-6);
        assert_value_set(&base_values, &[0.0, 0.7], 1e-9);
        let plus = stabilize_gfqi(&l, &[1]).unwrap();
        assert_eq!(plus.index(), 1);
        assert_value_set(&collect_critical_values(&plus, 5, 1e-6), &[0.0, 0.7], 1e-9);
        let both = stabilize_gfqi(&l, &[-1, 1]).unwrap();
        assert_eq!(both.index(), 2);
        assert_value_set(&collect_critical_values(&both, 5, 1e-6), &[0.0, 0.7], 1e-9);
        both.verify_quadratic_outside(1000, 23).unwrap();
        assert!(stabilize_gfqi(&l, &[]).is_err());
        assert!(stabilize_gfqi(&l, &[0]).is_err());
    }

    #[test]
    fn fix_base_point_restricts_the_base() {
        let map = Arc::new(TwoFactorMap::new());
        let map2 = map.clone();
        let inner = graph_of(map);
        // Fix x2 = 0.5: inside g's plateau (s2 = 0.25 < 0.3) and the window.
        let reduced = fix_base_point_gfqi(&inner, 1, &[0.5]).unwrap();
        assert_eq!(reduced.base_dim(), 1);
        assert_eq!(reduced.fiber_dim(), 1);
        assert_eq!(reduced.index(), 1);
        // Values agree with the inner object on the untruncated region.
        for &(v, e) in &[(0.3, 0.2), (-0.7, -0.4), (0.9, 0.0)] {
            assert_relative_eq!(
                reduced.value(&[v], &[e]),
                inner.value(&[v, 0.5], &[e]),
                epsilon = 1e-12
            );
        }
        // Fiber-critical point over a slope point of f: the covector is the
        // partial derivative of the restricted function.
        let v = 0.8;
        let cp = newton_fiber_critical(&reduced, &[v], &[0.0]).unwrap();
        let mut df = [0.0, 0.0];
        map2.grad(&[v, 0.5], &mut df);
        assert!(cp.grad_norm <= 1e-8);
        assert_relative_eq!(cp.covector[0], df[0], epsilon = 1e-8);
        assert_relative_eq!(cp.value, map2.value(&[v, 0.5]), epsilon = 1e-10);
        reduced.verify_quadratic_outside(1000, 31).unwrap();
    }

    #[test]
    fn drop_to_fiber_creates_zero_modes_and_keeps_the_graph() {
        let map = Arc::new(TwoFactorMap::new());
        let map2 = map.clone();
        let inner = graph_of(map);
        let reduced = drop_to_fiber_gfqi(&inner, 1).unwrap();
        assert_eq!(reduced.base_dim(), 1);
        assert_eq!(reduced.fiber_dim(), 2);
        assert_eq!(reduced.zero_modes(), 1);
        assert_eq!(reduced.index(), 1);
        reduced.verify_quadratic_outside(1000, 41).unwrap();

        // Over a slope point of f, both critical sheets (x2 on the plateau of
        // g / x2 in the flat tail of g) generate the same covector df(v); the
        // critical values differ by the constant height of g.
        let v = 0.8;
        let mut df = [0.0, 0.0];
        map2.grad(&[v, 0.0], &mut df);

        // Sheet 1: x2 = 0 (plateau of g). Original fiber coords: (x2, eta).
        let seed1 = reduced.fiber_to_diagonal(&[0.0, 0.0]);
        let cp1 = newton_fiber_critical(&reduced, &[v], &seed1).unwrap();
        assert!(cp1.grad_norm <= 1e-8);
        assert_relative_eq!(cp1.covector[0], df[0], epsilon = 1e-8);
        assert_relative_eq!(cp1.value, map2.value(&[v, 0.0]), epsilon = 1e-10);

        // Sheet 2: x2 = 1.2 (tail of g, inside the window).
        let seed2 = reduced.fiber_to_diagonal(&[1.2, 0.0]);
        let cp2 = newton_fiber_critical(&reduced, &[v], &seed2).unwrap();
        assert!(cp2.grad_norm <= 1e-8);
        assert_relative_eq!(cp2.covector[0], df[0], epsilon = 1e-8);
        assert_relative_eq!(cp2.value, map2.value(&[v, 1.2]), epsilon = 1e-10);

        // The two sheets are the same graph up to the constant g-height.
        assert_relative_eq!(cp1.value - cp2.value, 0.35, epsilon = 1e-9);

        // Gradients (including the zero-mode direction) match finite
        // differences.
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..25 {
            let x = vec![rng.random_range(-1.5..1.5)];
            let eta: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
            let (_, gx, ge) = reduced.value_gradient(&x, &eta);
            let h = 1e-6;
            let fd = (reduced.value(&[x[0] + h], &eta) - reduced.value(&[x[0] - h], &eta))
                / (2.0 * h);
            assert_relative_eq!(gx[0], fd, epsilon = 1e-5, max_relative = 1e-5);
            for i in 0..2 {
                let mut ep = eta.clone();
                let mut em = eta.clone();
                ep[i] += h;
                em[i] -= h;
                let fd = (reduced.value(&x, &ep) - reduced.value(&x, &em)) / (2.0 * h);
                assert_relative_eq!(ge[i], fd, epsilon = 1e-5, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn reduction_of_the_zero_section_in_both_modes() {
        let inner = graph_of(Arc::new(ZeroBaseMap { dim: 2 }));
        let fixed = fix_base_point_gfqi(&inner, 1, &[0.3]).unwrap();
        assert_value_set(&collect_critical_values(&fixed, 5, 1e-6), &[0.0], 1e-10);
        let dropped = drop_to_fiber_gfqi(&inner, 1).unwrap();
        assert_eq!(dropped.zero_modes(), 1);
        assert_value_set(&collect_critical_values(&dropped, 4, 1e-6), &[0.0], 1e-10);
        // Split validation.
        assert!(fix_base_point_gfqi(&inner, 2, &[]).is_err());
        assert!(fix_base_point_gfqi(&inner, 0, &[0.1, 0.2]).is_err());
        assert!(drop_to_fiber_gfqi(&inner, 2).is_err());
    }
}
