//! Scalar functions on the base of a generating function.
//!
//! Graph-type generating functions have the shape `S(x, xi) = f(x) + Q(xi)`;
//! everything that can play the role of `f` implements [`BaseMap`]: closed-form
//! radial profiles, parsed expressions, frozen-time Hamiltonian slices, and the
//! C^1 interpolation tables produced by the flow-reconstruction routines.

use crate::ham::expr::{parse_expression, Ast, Var};
use crate::ham::profile::ProfileRef;
use crate::ham::HamiltonianSpec;
use crate::{Error, Result};
use std::sync::Arc;

/// A C^1 scalar function on `R^m` with compact support, used as the base part
/// of a graph-type generating function.
pub trait BaseMap: Send + Sync {
    /// Base dimension `m`.
    fn dim(&self) -> usize;
    /// Function value.
    fn value(&self, x: &[f64]) -> f64;
    /// Gradient, written into `out` (length `m`).
    fn grad(&self, x: &[f64], out: &mut [f64]);
    /// Radius beyond which the function vanishes identically.
    fn support_radius(&self) -> f64;
    /// Short human-readable description.
    fn describe(&self) -> String;
}

/// Shared handle to a base map.
pub type BaseMapRef = Arc<dyn BaseMap>;

/// The zero function (base of the zero-section generating function).
pub struct ZeroBaseMap {
    pub dim: usize,
}

impl BaseMap for ZeroBaseMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn grad(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn support_radius(&self) -> f64 {
        0.0
    }
    fn describe(&self) -> String {
        format!("zero function on R^{}", self.dim)
    }
}

/// Radial function `f(x) = profile(|x|^2)`.
pub struct RadialBaseMap {
    profile: ProfileRef,
    dim: usize,
    /// Support threshold in the squared-radius variable.
    s_support: f64,
    label: String,
}

impl RadialBaseMap {
    pub fn new(profile: ProfileRef, dim: usize, s_support: f64, label: &str) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("radial base map needs dim >= 1".into()));
        }
        if !(s_support.is_finite() && s_support >= 0.0) {
            return Err(Error::Config(format!(
                "radial base map needs a finite nonnegative squared support, got {s_support}"
            )));
        }
        Ok(Self {
            profile,
            dim,
            s_support,
            label: label.to_string(),
        })
    }
}

impl BaseMap for RadialBaseMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|c| c * c).sum();
        self.profile.v(s)
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let s: f64 = x.iter().map(|c| c * c).sum();
        let d = 2.0 * self.profile.d1(s);
        for (o, c) in out.iter_mut().zip(x) {
            *o = d * c;
        }
    }
    fn support_radius(&self) -> f64 {
        self.s_support.sqrt()
    }
    fn describe(&self) -> String {
        format!("radial function {} on R^{}", self.label, self.dim)
    }
}

/// Base map parsed from an expression in the variables `q1..qm`.
pub struct ExprBaseMap {
    ast: Ast,
    partials: Vec<Ast>,
    dim: usize,
    support_radius: f64,
    source: String,
}

impl ExprBaseMap {
    /// Parses `src` as a function of `q1..qdim`. Momentum variables and time are
    /// rejected; the support radius is inferred from the expression structure
    /// unless `declared_support` overrides it.
    pub fn new(src: &str, dim: usize, declared_support: Option<f64>) -> Result<Self> {
        let ast = parse_expression(src)?;
        if ast.uses_momentum() {
            return Err(Error::Config(format!(
                "base function '{src}' may only use q1..q{dim}, found a momentum variable"
            )));
        }
        if ast.uses_time() {
            return Err(Error::Config(format!(
                "base function '{src}' may not depend on time"
            )));
        }
        let k = ast.max_coordinate_index();
        if k > dim {
            return Err(Error::Config(format!(
                "base function '{src}' references q{k}, but the base dimension is {dim}"
            )));
        }
        let support_radius = match declared_support {
            Some(r) if r.is_finite() && r >= 0.0 => r,
            Some(r) => {
                return Err(Error::Config(format!(
                    "declared support radius {r} must be finite and nonnegative"
                )))
            }
            None => ast.inferred_support_radius().ok_or_else(|| {
                Error::Config(format!(
                    "cannot infer a compact support radius for '{src}'; pass one explicitly"
                ))
            })?,
        };
        let mut partials = Vec::with_capacity(dim);
        for i in 1..=dim {
            partials.push(ast.partial(Var::Q(i))?);
        }
        Ok(Self {
            ast,
            partials,
            dim,
            support_radius,
            source: src.to_string(),
        })
    }
}

impl BaseMap for ExprBaseMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        // Only q-variables are referenced, so the bare base slice is a valid
        // evaluation environment.
        self.ast.eval(0.0, x)
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.partials) {
            *o = p.eval(0.0, x);
        }
    }
    fn support_radius(&self) -> f64 {
        self.support_radius
    }
    fn describe(&self) -> String {
        format!("expression {}", self.source)
    }
}

/// A Hamiltonian frozen at one time and scaled: `x -> c * H(t0, x)`.
///
/// This is the substep generating function of the implicit midpoint scheme, and
/// doubles as the base map of single-step graph generating functions.
pub struct HamSliceMap {
    spec: HamiltonianSpec,
    t0: f64,
    factor: f64,
}

impl HamSliceMap {
    pub fn new(spec: &HamiltonianSpec, t0: f64, factor: f64) -> Result<Self> {
        if !spec.support_radius().is_finite() {
            return Err(Error::Config(
                "graph construction needs a compactly supported Hamiltonian".into(),
            ));
        }
        Ok(Self {
            spec: spec.clone(),
            t0,
            factor,
        })
    }
}

impl BaseMap for HamSliceMap {
    fn dim(&self) -> usize {
        self.spec.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.factor * self.spec.eval(self.t0, x)
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let g = self.spec.grad(self.t0, x);
        for (o, gi) in out.iter_mut().zip(&g) {
            *o = self.factor * gi;
        }
    }
    fn support_radius(&self) -> f64 {
        self.spec.support_radius()
    }
    fn describe(&self) -> String {
        format!(
            "{} x Hamiltonian slice at t = {} of {}",
            self.factor,
            self.t0,
            self.spec.describe()
        )
    }
}

/// Pointwise sum of two base maps of equal dimension.
pub struct SumBaseMap {
    a: BaseMapRef,
    b: BaseMapRef,
}

impl SumBaseMap {
    pub fn new(a: BaseMapRef, b: BaseMapRef) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension(format!(
                "cannot add base maps of dimensions {} and {}",
                a.dim(),
                b.dim()
            )));
        }
        Ok(Self { a, b })
    }
}

impl BaseMap for SumBaseMap {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.a.value(x) + self.b.value(x)
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        self.a.grad(x, out);
        let mut tmp = vec![0.0; out.len()];
        self.b.grad(x, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += t;
        }
    }
    fn support_radius(&self) -> f64 {
        self.a.support_radius().max(self.b.support_radius())
    }
    fn describe(&self) -> String {
        format!("({}) + ({})", self.a.describe(), self.b.describe())
    }
}

/// Scalar multiple of a base map.
pub struct ScaledBaseMap {
    pub factor: f64,
    pub inner: BaseMapRef,
}

impl BaseMap for ScaledBaseMap {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.factor * self.inner.value(x)
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        self.inner.grad(x, out);
        for o in out.iter_mut() {
            *o *= self.factor;
        }
    }
    fn support_radius(&self) -> f64 {
        self.inner.support_radius()
    }
    fn describe(&self) -> String {
        format!("{} x ({})", self.factor, self.inner.describe())
    }
}

// ---------------------------------------------------------------------------
// C^1 interpolation tables
// ---------------------------------------------------------------------------

/// Cubic Hermite interpolation through `(knot, value, derivative)` triples with
/// strictly increasing knots. Evaluation outside the knot range clamps to the
/// boundary value with zero slope (tables are built with explicit zero tails,
/// so the clamp only guards against roundoff at the edges).
#[derive(Clone, Debug)]
pub struct HermiteTable1D {
    knots: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl HermiteTable1D {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() || knots.len() != derivs.len() {
            return Err(Error::Dimension(format!(
                "Hermite table needs matching knot/value/derivative lists of length >= 2, got {}/{}/{}",
                knots.len(),
                values.len(),
                derivs.len()
            )));
        }
        for w in knots.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Numerics(
                    "Hermite table knots must be strictly increasing".into(),
                ));
            }
        }
        for v in values.iter().chain(&derivs).chain(&knots) {
            if !v.is_finite() {
                return Err(Error::Numerics("Hermite table entries must be finite".into()));
            }
        }
        Ok(Self {
            knots,
            values,
            derivs,
        })
    }

    /// Value and derivative at `s`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let n = self.knots.len();
        if s <= self.knots[0] {
            return (self.values[0], 0.0);
        }
        if s >= self.knots[n - 1] {
            return (self.values[n - 1], 0.0);
        }
        // Binary search for the cell with knots[i] <= s < knots[i+1].
        let i = match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&s).expect("finite knots"))
        {
            Ok(exact) => exact.min(n - 2),
            Err(ins) => ins - 1,
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let t = (s - x0) / h;
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivs[i], self.derivs[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let value = h00 * v0 + h10 * h * d0 + h01 * v1 + h11 * h * d1;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let deriv = dh00 * v0 + dh10 * d0 + dh01 * v1 + dh11 * d1;
        (value, deriv)
    }
}

/// Radial base map `f(x) = table(|x|^2)`, with the table carrying exact node
/// derivatives. Used for closed-form rotation graphs and their images.
pub struct RadialTableMap {
    table: HermiteTable1D,
    dim: usize,
    /// Squared radius beyond which the map vanishes.
    s_support: f64,
    label: String,
}

impl RadialTableMap {
    pub fn new(table: HermiteTable1D, dim: usize, s_support: f64, label: &str) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("radial table map needs dim >= 1".into()));
        }
        Ok(Self {
            table,
            dim,
            s_support,
            label: label.to_string(),
        })
    }
}

impl BaseMap for RadialTableMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|c| c * c).sum();
        if s >= self.s_support {
            return 0.0;
        }
        self.table.eval(s).0
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let s: f64 = x.iter().map(|c| c * c).sum();
        if s >= self.s_support {
            out.fill(0.0);
            return;
        }
        let (_, d) = self.table.eval(s);
        for (o, c) in out.iter_mut().zip(x) {
            *o = 2.0 * d * c;
        }
    }
    fn support_radius(&self) -> f64 {
        self.s_support.sqrt()
    }
    fn describe(&self) -> String {
        format!("radial table {} on R^{}", self.label, self.dim)
    }
}

/// One-dimensional base map `f(x) = table(x)` of the coordinate itself (not
/// the squared radius), vanishing identically for `|x| >= support_radius`.
/// Used for tabulated fronts over a line.
pub struct LineTableMap {
    table: HermiteTable1D,
    support_radius: f64,
    label: String,
}

impl LineTableMap {
    pub fn new(table: HermiteTable1D, support_radius: f64, label: &str) -> Result<Self> {
        if !(support_radius > 0.0) {
            return Err(Error::Numerics(
                "line table map needs a positive support radius".into(),
            ));
        }
        Ok(Self {
            table,
            support_radius,
            label: label.to_string(),
        })
    }
}

impl BaseMap for LineTableMap {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64]) -> f64 {
        if x[0].abs() >= self.support_radius {
            return 0.0;
        }
        self.table.eval(x[0]).0
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        if x[0].abs() >= self.support_radius {
            out[0] = 0.0;
            return;
        }
        out[0] = self.table.eval(x[0]).1;
    }
    fn support_radius(&self) -> f64 {
        self.support_radius
    }
    fn describe(&self) -> String {
        format!("line table {}", self.label)
    }
}

/// Bicubic Hermite interpolation on a uniform 2D grid, with prescribed node
/// values, node gradients, and cross derivatives. C^1 everywhere; identically
/// zero (value and gradient) outside the grid square.
pub struct BicubicTableMap {
    /// Lower corner of the grid square (both axes).
    lo: f64,
    /// Grid spacing.
    h: f64,
    /// Number of nodes per axis.
    n: usize,
    /// Node data, row-major (index `iy * n + ix`): value, d/dx, d/dy, d2/dxdy.
    w: Vec<f64>,
    wx: Vec<f64>,
    wy: Vec<f64>,
    wxy: Vec<f64>,
    support_radius: f64,
    label: String,
}

impl BicubicTableMap {
    /// Builds the table from node values and gradients on a uniform grid over
    /// `[lo, lo + h*(n-1)]^2`; cross derivatives are formed by central
    /// differences of the prescribed `d/dx` data in the `y` direction.
    pub fn new(
        lo: f64,
        h: f64,
        n: usize,
        w: Vec<f64>,
        wx: Vec<f64>,
        wy: Vec<f64>,
        support_radius: f64,
        label: &str,
    ) -> Result<Self> {
        if n < 4 {
            return Err(Error::Dimension(format!(
                "bicubic table needs at least 4 nodes per axis, got {n}"
            )));
        }
        let expect = n * n;
        if w.len() != expect || wx.len() != expect || wy.len() != expect {
            return Err(Error::Dimension(format!(
                "bicubic table needs {expect} node values per field, got {}/{}/{}",
                w.len(),
                wx.len(),
                wy.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Numerics(format!("bicubic grid spacing {h} invalid")));
        }
        let mut wxy = vec![0.0; expect];
        for iy in 0..n {
            for ix in 0..n {
                let up = if iy + 1 < n { wx[(iy + 1) * n + ix] } else { wx[iy * n + ix] };
                let dn = if iy > 0 { wx[(iy - 1) * n + ix] } else { wx[iy * n + ix] };
                let span = if iy + 1 < n && iy > 0 { 2.0 * h } else { h };
                wxy[iy * n + ix] = (up - dn) / span;
            }
        }
        Ok(Self {
            lo,
            h,
            n,
            w,
            wx,
            wy,
            wxy,
            support_radius,
            label: label.to_string(),
        })
    }

    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let n = self.n;
        let hi = self.lo + self.h * (n - 1) as f64;
        if x <= self.lo || x >= hi || y <= self.lo || y >= hi {
            return (0.0, 0.0, 0.0);
        }
        let fx = (x - self.lo) / self.h;
        let fy = (y - self.lo) / self.h;
        let ix = (fx.floor() as usize).min(n - 2);
        let iy = (fy.floor() as usize).min(n - 2);
        let u = fx - ix as f64;
        let v = fy - iy as f64;
        // Hermite basis and derivatives in one axis.
        fn basis(t: f64) -> ([f64; 4], [f64; 4]) {
            let t2 = t * t;
            let t3 = t2 * t;
            (
                [
                    2.0 * t3 - 3.0 * t2 + 1.0,
                    t3 - 2.0 * t2 + t,
                    -2.0 * t3 + 3.0 * t2,
                    t3 - t2,
                ],
                [
                    6.0 * t2 - 6.0 * t,
                    3.0 * t2 - 4.0 * t + 1.0,
                    -6.0 * t2 + 6.0 * t,
                    3.0 * t2 - 2.0 * t,
                ],
            )
        }
        let (bu, dbu) = basis(u);
        let (bv, dbv) = basis(v);
        let h = self.h;
        // Corner data index helper: corners (0,0), (1,0), (0,1), (1,1).
        let idx = |dx: usize, dy: usize| (iy + dy) * n + (ix + dx);
        // Assemble the 4x4 coefficient layout of the Hermite patch:
        // rows index the x-basis slot (value0, slope0, value1, slope1),
        // columns the y-basis slot; slopes are scaled by the spacing.
        let mut c = [[0.0f64; 4]; 4];
        for dx in 0..2 {
            for dy in 0..2 {
                let k = idx(dx, dy);
                c[2 * dx][2 * dy] = self.w[k];
                c[2 * dx + 1][2 * dy] = h * self.wx[k];
                c[2 * dx][2 * dy + 1] = h * self.wy[k];
                c[2 * dx + 1][2 * dy + 1] = h * h * self.wxy[k];
            }
        }
        let mut val = 0.0;
        let mut dvx = 0.0;
        let mut dvy = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                val += c[a][b] * bu[a] * bv[b];
                dvx += c[a][b] * dbu[a] * bv[b];
                dvy += c[a][b] * bu[a] * dbv[b];
            }
        }
        (val, dvx / h, dvy / h)
    }
}

impl BaseMap for BicubicTableMap {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x[0], x[1]).0
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let (_, gx, gy) = self.eval(x[0], x[1]);
        out[0] = gx;
        out[1] = gy;
    }
    fn support_radius(&self) -> f64 {
        self.support_radius
    }
    fn describe(&self) -> String {
        format!("bicubic table {} ({} nodes/axis)", self.label, self.n)
    }
}
