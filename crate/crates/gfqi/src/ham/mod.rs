//! Time-dependent Hamiltonians on `R^{2n}` and their flows.
//!
//! The symplectic form is `omega(v, w) = sum_i (v_{p_i} w_{q_i} - v_{q_i} w_{p_i})`,
//! so Hamilton's equations read `dq/dt = -dH/dp`, `dp/dt = +dH/dq`, and a radial
//! Hamiltonian `H = f(|x|^2)` rotates every `(q_i, p_i)` pair counterclockwise at
//! angular speed `2 f'(|x|^2)`.
//!
//! A [`HamiltonianSpec`] couples an evaluator (with analytic gradient where the
//! construction provides one) with a support radius and a description of how it
//! was built: by catalog name, from an expression, from a radial profile, or as
//! a composite of other Hamiltonians. Flows are computed by [`FlowMap`], which
//! dispatches to closed-form solutions when the structure provides them and to
//! a fixed-step implicit midpoint integrator with step-count doubling otherwise.
//!
//! Time is always normalized to `[0, 1]`.

pub mod catalog;
pub mod expr;
mod flow;
mod hams;
mod norms;
pub mod profile;

pub use catalog::{build_catalog, catalog_entries, CatalogEntry, ParamSpec};
pub use flow::{FlowMap, IntegratorSettings};
pub use norms::{hofer_norm, sup_difference_outside, HoferEstimate, SupportGrid};

use crate::{Error, Result};
use profile::ProfileRef;
use std::sync::Arc;

/// Behavior every Hamiltonian implementation provides.
///
/// `eval`/`grad` are total on `R^{2n}`; `exact_flow` returns `None` when no
/// closed-form flow is available and the integrator takes over.
pub trait HamImpl: Send + Sync {
    /// Phase-space dimension `2n`.
    fn dim(&self) -> usize;

    /// Radius beyond which the Hamiltonian vanishes for all times
    /// (`f64::INFINITY` when it is not compactly supported).
    fn support_radius(&self) -> f64;

    /// Value `H(t, x)`.
    fn eval(&self, t: f64, x: &[f64]) -> f64;

    /// Spatial gradient, written into `out` (length `2n`). The default uses
    /// central differences with step `1e-5 * max(1, |x|_inf)` per axis.
    fn grad(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let scale = x.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let h = 1e-5 * scale;
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            probe[i] = x[i] + h;
            let hi = self.eval(t, &probe);
            probe[i] = x[i] - h;
            let lo = self.eval(t, &probe);
            probe[i] = x[i];
            out[i] = (hi - lo) / (2.0 * h);
        }
    }

    /// Time-independence of the evaluator.
    fn is_autonomous(&self) -> bool;

    /// Closed-form flow from time `t0` to `t1`, when the structure admits one.
    fn exact_flow(&self, _t0: f64, _t1: f64, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// The radial profile `f` when `H(t, x) = f(|x|^2)`.
    fn radial_profile(&self) -> Option<ProfileRef> {
        None
    }

    /// Human-readable description for reports.
    fn describe(&self) -> String;
}

/// How a Hamiltonian was constructed.
#[derive(Clone, Debug)]
pub enum HamKind {
    /// Built from the named catalog family with the given parameters.
    Catalog {
        name: String,
        params: Vec<(String, f64)>,
    },
    /// Parsed from expression text.
    Expression { source: String },
    /// Built directly from a radial profile in `s = |x|^2`.
    Radial { label: String },
    /// Assembled from other Hamiltonians (inverse generator, concatenation,
    /// time scaling, conjugation, ...).
    Composite { label: String },
}

impl HamKind {
    /// Short tag for reports: `catalog`, `expression`, `radial`, `composite`.
    pub fn tag(&self) -> &'static str {
        match self {
            HamKind::Catalog { .. } => "catalog",
            HamKind::Expression { .. } => "expression",
            HamKind::Radial { .. } => "radial",
            HamKind::Composite { .. } => "composite",
        }
    }
}

/// A time-dependent Hamiltonian `H(t, x)` on `R^{2n}`, `t` in `[0, 1]`.
#[derive(Clone)]
pub struct HamiltonianSpec {
    imp: Arc<dyn HamImpl>,
    kind: HamKind,
}

impl std::fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("kind", &self.kind.tag())
            .field("dim", &self.dim())
            .field("support_radius", &self.support_radius())
            .field("describe", &self.describe())
            .finish()
    }
}

impl HamiltonianSpec {
    /// Wrap an implementation with its construction record.
    pub fn from_impl(imp: Arc<dyn HamImpl>, kind: HamKind) -> Self {
        Self { imp, kind }
    }

    /// The zero Hamiltonian on `R^{dim}` (identity flow).
    pub fn zero(dim: usize) -> Self {
        Self::from_impl(
            Arc::new(hams::ZeroHam { dim }),
            HamKind::Catalog {
                name: "zero".into(),
                params: vec![("dim".into(), dim as f64)],
            },
        )
    }

    /// Radial Hamiltonian `H(x) = f(|x|^2)` with `f` supported in
    /// `[0, s_support]`. Pass `s_support = f64::INFINITY` for unbounded support.
    pub fn from_radial_profile(
        profile: ProfileRef,
        dim: usize,
        s_support: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Dimension(format!(
                "phase-space dimension must be even and positive, got {dim}"
            )));
        }
        let label = label.into();
        Ok(Self::from_impl(
            Arc::new(hams::RadialHam {
                profile,
                dim,
                s_support,
                label: label.clone(),
            }),
            HamKind::Radial { label },
        ))
    }

    /// Parse an expression Hamiltonian. The support radius is inferred from the
    /// multiplicative `bump` structure when possible, otherwise
    /// `declared_support` is required (`f64::INFINITY` is allowed and marks a
    /// non-compactly-supported Hamiltonian).
    pub fn from_expression(src: &str, dim: usize, declared_support: Option<f64>) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Dimension(format!(
                "phase-space dimension must be even and positive, got {dim}"
            )));
        }
        let ast = expr::parse_expression(src)?;
        let n = dim / 2;
        let max_idx = ast.max_coordinate_index();
        if max_idx > n {
            return Err(Error::Dimension(format!(
                "expression uses coordinate index {max_idx} but dimension {dim} has only {n} pairs"
            )));
        }
        let support = match (ast.inferred_support_radius(), declared_support) {
            (_, Some(r)) => r,
            (Some(r), None) => r,
            (None, None) => {
                return Err(Error::Config(format!(
                    "no support radius is visible in '{src}'; declare one explicitly"
                )))
            }
        };
        let imp = hams::ExprHam::new(ast, dim, support, src.to_string())?;
        Ok(Self::from_impl(
            Arc::new(imp),
            HamKind::Expression {
                source: src.to_string(),
            },
        ))
    }

    /// Product of radial factors in the two coordinate planes of `R^4`:
    /// `H(x) = f(|x_1|^2) * g(|x_2|^2)` with `x = (q_1, q_2, p_1, p_2)`,
    /// `x_1 = (q_1, p_1)`, `x_2 = (q_2, p_2)`. Its flow is exactly solvable:
    /// both plane radii are conserved and each plane rotates at a constant rate.
    pub fn biradial_product(
        f: ProfileRef,
        f_s_support: f64,
        g: ProfileRef,
        g_s_support: f64,
        label: impl Into<String>,
    ) -> Self {
        let label = label.into();
        Self::from_impl(
            Arc::new(hams::BiradialHam {
                f,
                g,
                f_s_support,
                g_s_support,
                label: label.clone(),
            }),
            HamKind::Radial { label },
        )
    }

    /// Product of one window in `q_1` and one window in `p_1` on `R^2`:
    /// `H = coeff * U(q_1) * V(p_1)`, supported in the product box. Generates
    /// the translation flows used for displacement witnesses.
    pub fn plateau_product(
        coeff: f64,
        u: ProfileRef,
        u_range: (f64, f64),
        v: ProfileRef,
        v_range: (f64, f64),
        label: impl Into<String>,
    ) -> Self {
        let label = label.into();
        Self::from_impl(
            Arc::new(hams::PlateauProductHam {
                coeff,
                u,
                v,
                u_range,
                v_range,
                label: label.clone(),
            }),
            HamKind::Composite { label },
        )
    }

    /// Phase-space dimension `2n`.
    pub fn dim(&self) -> usize {
        self.imp.dim()
    }

    /// Number of degrees of freedom `n`.
    pub fn n(&self) -> usize {
        self.imp.dim() / 2
    }

    /// Support radius (possibly infinite).
    pub fn support_radius(&self) -> f64 {
        self.imp.support_radius()
    }

    /// Construction record.
    pub fn kind(&self) -> &HamKind {
        &self.kind
    }

    /// Value `H(t, x)`.
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.imp.eval(t, x)
    }

    /// Spatial gradient as a fresh vector.
    pub fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.imp.grad(t, x, &mut out);
        out
    }

    /// Hamiltonian vector field `X_H = (-dH/dp, +dH/dq)`.
    pub fn vector_field(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let g = self.grad(t, x);
        let n = self.n();
        let mut xdot = vec![0.0; 2 * n];
        for i in 0..n {
            xdot[i] = -g[n + i];
            xdot[n + i] = g[i];
        }
        xdot
    }

    /// Whether the evaluator ignores `t`.
    pub fn is_autonomous(&self) -> bool {
        self.imp.is_autonomous()
    }

    /// The radial profile when this Hamiltonian is `f(|x|^2)`.
    pub fn radial_profile(&self) -> Option<ProfileRef> {
        self.imp.radial_profile()
    }

    /// Closed-form flow when available (used by [`FlowMap`]).
    pub(crate) fn exact_flow(&self, t0: f64, t1: f64, x: &[f64]) -> Option<Vec<f64>> {
        self.imp.exact_flow(t0, t1, x)
    }

    /// Human-readable description.
    pub fn describe(&self) -> String {
        self.imp.describe()
    }

    /// Time-1 flow map with default integrator settings.
    pub fn flow_map(&self) -> FlowMap {
        FlowMap::new(self.clone())
    }

    /// `c * H`, with the reparametrized exact flow when `H` is autonomous.
    pub fn scaled(&self, c: f64) -> Self {
        let label = format!("{c} * ({})", self.describe());
        Self::from_impl(
            Arc::new(hams::ScaledHam {
                c,
                inner: self.clone(),
            }),
            HamKind::Composite { label },
        )
    }

    /// `a(t) * H(x)` for autonomous `H`; the flow reuses the exact flow of `H`
    /// run for the effective duration `int_{t0}^{t1} a`.
    pub fn time_scaled(&self, rate: TimeRate) -> Result<Self> {
        if !self.is_autonomous() {
            return Err(Error::Config(
                "time scaling expects an autonomous Hamiltonian".into(),
            ));
        }
        let label = format!("a(t) * ({})", self.describe());
        Ok(Self::from_impl(
            Arc::new(hams::TimeScaledHam {
                rate,
                inner: self.clone(),
            }),
            HamKind::Composite { label },
        ))
    }

    /// Generator of the inverse flow: `bar H(t, x) = -H(t, phi_H^t(x))`, so
    /// that its flow is `(phi_H^t)^{-1}`. For autonomous `H` this is exactly
    /// `-H` (energy is conserved along the flow).
    pub fn conjugate_inverse(&self) -> Self {
        if self.is_autonomous() {
            return self.scaled(-1.0);
        }
        let label = format!("inverse generator of ({})", self.describe());
        Self::from_impl(
            Arc::new(hams::BarHam::new(self.clone())),
            HamKind::Composite { label },
        )
    }

    /// Concatenation generator `H # K (t, x) = H(t, x) + K(t, (phi_H^t)^{-1}(x))`,
    /// whose flow is `phi_H^t . phi_K^t`.
    pub fn sharp(&self, other: &HamiltonianSpec) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "concatenation needs equal dimensions, got {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let label = format!("({}) # ({})", self.describe(), other.describe());
        Ok(Self::from_impl(
            Arc::new(hams::SharpHam::new(self.clone(), other.clone())),
            HamKind::Composite { label },
        ))
    }

    /// Pointwise sum `H + K` (generates the product of flows only when they
    /// commute; used for building profiles, not for concatenation).
    pub fn sum(&self, other: &HamiltonianSpec) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "sum needs equal dimensions, got {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let label = format!("({}) + ({})", self.describe(), other.describe());
        Ok(Self::from_impl(
            Arc::new(hams::SumHam {
                a: self.clone(),
                b: other.clone(),
            }),
            HamKind::Composite { label },
        ))
    }

    /// Conjugated Hamiltonian `H(t, psi^{-1}(x))` where `psi` is the time-1
    /// flow of `conjugator`; generates `psi . phi_H^t . psi^{-1}`.
    pub fn conjugated_by(&self, conjugator: &HamiltonianSpec) -> Result<Self> {
        if self.dim() != conjugator.dim() {
            return Err(Error::Dimension(format!(
                "conjugation needs equal dimensions, got {} and {}",
                self.dim(),
                conjugator.dim()
            )));
        }
        let label = format!(
            "({}) conjugated by time-1 flow of ({})",
            self.describe(),
            conjugator.describe()
        );
        Ok(Self::from_impl(
            Arc::new(hams::ConjugatedHam::new(self.clone(), conjugator.clone())),
            HamKind::Composite { label },
        ))
    }
}

/// Time-rate profile `a(t)` for time-scaled Hamiltonians.
#[derive(Clone)]
pub enum TimeRate {
    Const(f64),
    /// Polynomial in `t`: `coeffs[0] + coeffs[1] t + ...` (exact integral).
    Poly(Vec<f64>),
    /// Arbitrary smooth profile (integrated by adaptive quadrature).
    Profile(ProfileRef),
}

impl TimeRate {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeRate::Const(c) => *c,
            TimeRate::Poly(coeffs) => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            TimeRate::Profile(p) => p.v(t),
        }
    }

    /// `int_{t0}^{t1} a(t) dt`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        match self {
            TimeRate::Const(c) => c * (t1 - t0),
            TimeRate::Poly(coeffs) => {
                let anti = |t: f64| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * t.powi(k as i32 + 1) / (k as f64 + 1.0))
                        .sum::<f64>()
                };
                anti(t1) - anti(t0)
            }
            TimeRate::Profile(p) => profile::adaptive_simpson(&|t| p.v(t), t0, t1, 1e-12),
        }
    }
}
