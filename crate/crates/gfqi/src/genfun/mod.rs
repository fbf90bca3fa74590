//! Generating functions quadratic at infinity and the Lagrangian fronts they
//! describe.
//!
//! A front is represented by a function `S(x, eta) = Q(eta) + B(x, eta)`
//! ([`Gfqi`]) whose fiber quadratic form `Q` is diagonal in the published
//! coordinates and whose compactly supported part `B` is wrapped in smooth
//! cutoffs, so that `S` equals `Q` exactly outside an explicit truncation box.
//! The front itself is the set `{(x, dS/dx) : dS/deta = 0}`.
//!
//! Constructions: the zero section, graphs of differentials, flow images of the
//! zero section under a compactly supported Hamiltonian flow (broken-geodesic
//! chains with exact substep generating functions), graphs of Hamiltonian
//! diffeomorphisms over the diagonal (implicit-midpoint substep chains, exact
//! radial rotations, and grid reconstruction of the time-one map), fiberwise
//! sums and differences, reductions, and stabilizations.

mod base_maps;
mod chains;
mod combine;
mod gfqi_core;
mod newton;
mod quadratic;
mod reconstruct;

pub use base_maps::{
    BaseMap, BaseMapRef, BicubicTableMap, ExprBaseMap, HamSliceMap, HermiteTable1D, LineTableMap,
    RadialBaseMap, RadialTableMap, ScaledBaseMap, SumBaseMap, ZeroBaseMap,
};
pub use gfqi_core::{EvalCost, Gfqi, SUPPORTED_BASE_DIMS};
pub use newton::{
    collect_critical_values, newton_critical_point, newton_fiber_critical, CriticalPoint,
    NEWTON_GRAD_TOL,
};
pub use quadratic::{jacobi_eigen, SymmetricQuadratic, EIGEN_DEGENERACY_TOL};

use crate::ham::HamiltonianSpec;
use crate::Result;
use std::sync::Arc;

/// How a front's generating function was constructed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// The zero section itself.
    ZeroSection,
    /// Graph of the differential of a compactly supported function.
    GraphOfDf,
    /// Image of the zero section under a compactly supported Hamiltonian
    /// flow, built from `steps` composed substeps (1 = direct one-step).
    FlowImage { steps: usize },
    /// Graph of a compactly supported Hamiltonian diffeomorphism over the
    /// diagonal, built from `steps` composed substeps (1 = direct one-step).
    GraphDiffeo { steps: usize },
    /// Fiberwise sum (or difference, with the conjugate convention on the
    /// second summand) of two fronts over the same base.
    FiberwiseCombination { negate_second: bool },
    /// Symplectic reduction of a front over a product base.
    Reduced,
}

/// Which object a broken-geodesic chain generates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainTarget {
    /// The image of the zero section under the time-one flow.
    FlowImageOfZeroSection,
    /// The graph of the time-one map over the diagonal.
    GraphDiffeo,
}

/// How to reduce a front whose base splits as `B x R^k`: the leading `keep`
/// coordinates stay the base of the result, the trailing block is either
/// pinned to a point or demoted to fiber variables.
#[derive(Clone, Debug, PartialEq)]
pub enum ReduceMode {
    /// Restrict the trailing base block to the given point.
    FixBasePoint(Vec<f64>),
    /// Demote the trailing base block to fiber variables (zero modes of the
    /// extended quadratic form).
    DropFiberDirection,
}

/// A Lagrangian front: a generating function quadratic at infinity together
/// with a record of how it was built.
#[derive(Clone)]
pub struct LagrangianSpec {
    pub gf: Gfqi,
    pub provenance: Provenance,
    pub label: String,
}

impl LagrangianSpec {
    /// Base dimension of the underlying generating function.
    pub fn base_dim(&self) -> usize {
        self.gf.base_dim()
    }
}

impl std::fmt::Debug for LagrangianSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianSpec")
            .field("label", &self.label)
            .field("provenance", &self.provenance)
            .field("base_dim", &self.gf.base_dim())
            .field("fiber_dim", &self.gf.fiber_dim())
            .finish()
    }
}

fn graph_core_gfqi(f: BaseMapRef) -> Result<Gfqi> {
    let core = Arc::new(gfqi_core::GraphCore { f });
    let quad = SymmetricQuadratic::diagonal(&[-1.0], 0)?;
    Gfqi::new(core, quad)
}

/// Generating function of the zero section over `R^base_dim`.
pub fn zero_section_gf(base_dim: usize) -> Result<LagrangianSpec> {
    let gf = graph_core_gfqi(Arc::new(ZeroBaseMap { dim: base_dim }))?;
    Ok(LagrangianSpec {
        gf,
        provenance: Provenance::ZeroSection,
        label: format!("zero section over R^{base_dim}"),
    })
}

/// Generating function of `graph(df)` for a compactly supported function `f`
/// on the base: `S(x, eta) = f(x) - eta^2`.
pub fn graph_gf(f: BaseMapRef) -> Result<LagrangianSpec> {
    let label = format!("graph of the differential of {}", f.describe());
    let gf = graph_core_gfqi(f)?;
    Ok(LagrangianSpec {
        gf,
        provenance: Provenance::GraphOfDf,
        label,
    })
}

/// Broken-geodesic generating function for the time-one flow of `h`, composed
/// from `steps` substeps.
///
/// For [`ChainTarget::FlowImageOfZeroSection`] each substep carries a
/// mixed-variable generating function solved by certified Newton shooting; for
/// [`ChainTarget::GraphDiffeo`] the substeps are implicit-midpoint generating
/// functions coupled through the symplectic pairing (this target needs
/// `steps >= 2`; for a single step use [`radial_graph_diffeo_gf`] or
/// [`reconstructed_graph_gf`]). Both targets certify their substep width and
/// ask for more substeps when the certificate fails.
pub fn broken_geodesic_gf(
    h: &HamiltonianSpec,
    steps: usize,
    target: ChainTarget,
) -> Result<LagrangianSpec> {
    match target {
        ChainTarget::FlowImageOfZeroSection => {
            let core = chains::FlowChainCore::new(h.clone(), steps, 0.0, 1.0, 0.02, None)?;
            let quad = core.quadratic_form()?;
            let gf = Gfqi::new(Arc::new(core), quad)?;
            Ok(LagrangianSpec {
                gf,
                provenance: Provenance::FlowImage { steps },
                label: format!(
                    "time-one image of the zero section under {} ({steps}-step chain)",
                    h.describe()
                ),
            })
        }
        ChainTarget::GraphDiffeo => {
            let core = chains::MidpointChainCore::new(h.clone(), steps, 0.0, 1.0)?;
            let quad = core.quadratic_form()?;
            let gf = Gfqi::new(Arc::new(core), quad)?;
            Ok(LagrangianSpec {
                gf,
                provenance: Provenance::GraphDiffeo { steps },
                label: format!(
                    "time-one graph of {} over the diagonal ({steps}-step chain)",
                    h.describe()
                ),
            })
        }
    }
}

/// One-step closed-form generating function for the graph of the
/// time-`[t0, t1]` flow of a radial Hamiltonian over the diagonal.
pub fn radial_graph_diffeo_gf(h: &HamiltonianSpec, t0: f64, t1: f64) -> Result<LagrangianSpec> {
    let gf = reconstruct::radial_graph_gfqi(h, t0, t1)?;
    Ok(LagrangianSpec {
        gf,
        provenance: Provenance::GraphDiffeo { steps: 1 },
        label: format!("graph of the [{t0}, {t1}] flow of {}", h.describe()),
    })
}

/// One-step closed-form generating function for the image of the zero section
/// under the time-`[t0, t1]` flow of a radial Hamiltonian.
pub fn radial_image_gf(h: &HamiltonianSpec, t0: f64, t1: f64) -> Result<LagrangianSpec> {
    let gf = reconstruct::radial_image_gfqi(h, t0, t1)?;
    Ok(LagrangianSpec {
        gf,
        provenance: Provenance::FlowImage { steps: 1 },
        label: format!(
            "image of the zero section under the [{t0}, {t1}] flow of {}",
            h.describe()
        ),
    })
}

/// One-step generating function for the graph of the time-`[t0, t1]` flow of
/// a one-degree-of-freedom Hamiltonian, tabulated on a
/// `nodes_per_axis`-squared grid over the diagonal.
pub fn reconstructed_graph_gf(
    h: &HamiltonianSpec,
    t0: f64,
    t1: f64,
    nodes_per_axis: usize,
) -> Result<LagrangianSpec> {
    let gf = reconstruct::tabulated_graph_gfqi(h, t0, t1, nodes_per_axis)?;
    Ok(LagrangianSpec {
        gf,
        provenance: Provenance::GraphDiffeo { steps: 1 },
        label: format!(
            "tabulated graph of the [{t0}, {t1}] flow of {}",
            h.describe()
        ),
    })
}

/// One-step generating function for the image of the zero section under the
/// time-`[t0, t1]` flow of a one-degree-of-freedom Hamiltonian, tabulated on
/// `nodes` grid points of the base line.
pub fn reconstructed_image_gf(
    h: &HamiltonianSpec,
    t0: f64,
    t1: f64,
    nodes: usize,
) -> Result<LagrangianSpec> {
    let gf = reconstruct::tabulated_image_gfqi(h, t0, t1, nodes)?;
    Ok(LagrangianSpec {
        gf,
        provenance: Provenance::FlowImage { steps: 1 },
        label: format!(
            "tabulated image of the zero section under the [{t0}, {t1}] flow of {}",
            h.describe()
        ),
    })
}

/// Fiberwise sum (`negate_second = false`) or difference
/// (`negate_second = true`, conjugate convention on the second summand) of two
/// fronts over the same base:
/// `S(x; xi1, xi2) = S1(x, xi1) +/- S2(x, xi2)`.
pub fn fiberwise_combine(
    a: &LagrangianSpec,
    b: &LagrangianSpec,
    negate_second: bool,
) -> Result<LagrangianSpec> {
    let gf = combine::fiberwise_combine_gfqi(&a.gf, &b.gf, negate_second)?;
    let op = if negate_second { "-" } else { "+" };
    Ok(LagrangianSpec {
        gf,
        provenance: Provenance::FiberwiseCombination { negate_second },
        label: format!("({}) {op} ({})", a.label, b.label),
    })
}

/// The conjugate front `{(q, -p)}`: negates the generating function and its
/// fiber quadratic form.
pub fn conjugate_gf(l: &LagrangianSpec) -> Result<LagrangianSpec> {
    let gf = combine::conjugate_gfqi(&l.gf)?;
    Ok(LagrangianSpec {
        gf,
        provenance: l.provenance.clone(),
        label: format!("conjugate of {}", l.label),
    })
}

/// Stabilization: appends one `+eta^2` (sign `+1`) or `-eta^2` (sign `-1`)
/// fiber direction per entry, leaving the generated front unchanged.
pub fn stabilize_gf(l: &LagrangianSpec, signs: &[i8]) -> Result<LagrangianSpec> {
    let gf = combine::stabilize_gfqi(&l.gf, signs)?;
    Ok(LagrangianSpec {
        gf,
        provenance: l.provenance.clone(),
        label: format!("stabilization of {}", l.label),
    })
}

/// Symplectic reduction of a front whose base splits as `B x R^k`, with
/// `keep = dim B`: either restrict the trailing block to a point or demote it
/// to fiber variables. The result is a front over `B`.
pub fn reduce_gf(l: &LagrangianSpec, keep: usize, mode: ReduceMode) -> Result<LagrangianSpec> {
    let (gf, how) = match &mode {
        ReduceMode::FixBasePoint(x0) => (
            combine::fix_base_point_gfqi(&l.gf, keep, x0)?,
            "restricted-base",
        ),
        ReduceMode::DropFiberDirection => {
            (combine::drop_to_fiber_gfqi(&l.gf, keep)?, "demoted-base")
        }
    };
    Ok(LagrangianSpec {
        gf,
        provenance: Provenance::Reduced,
        label: format!("{how} reduction of {}", l.label),
    })
}

/// Value of the generating function at `(x, xi)`.
pub fn evaluate_gf(l: &LagrangianSpec, x: &[f64], xi: &[f64]) -> f64 {
    l.gf.value(x, xi)
}

/// Base and fiber gradients of the generating function at `(x, xi)`.
pub fn gradient_gf(l: &LagrangianSpec, x: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (_, gx, ge) = l.gf.value_gradient(x, xi);
    (gx, ge)
}

#[cfg(test)]
mod api_tests {
    use super::*;
    use crate::ham::profile::BumpProfile;
    use approx::assert_abs_diff_eq;

    #[test]
    fn public_zero_section_graph_and_stabilization() {
        let zs = zero_section_gf(1).unwrap();
        assert_eq!(zs.provenance, Provenance::ZeroSection);
        // S(x, eta) = -eta^2 everywhere; value at the fiber-critical point 0.
        assert_eq!(evaluate_gf(&zs, &[0.7], &[0.3]), -0.09);
        assert_eq!(evaluate_gf(&zs, &[0.7], &[0.0]), 0.0);

        let f: BaseMapRef = Arc::new(
            RadialBaseMap::new(Arc::new(BumpProfile::new(1.0, 0.5, 1.5)), 1, 1.5, "bump")
                .unwrap(),
        );
        let l = graph_gf(f.clone()).unwrap();
        assert_eq!(l.provenance, Provenance::GraphOfDf);
        // The fiberwise critical value over eta at fixed x is f(x), and the
        // base gradient there is df(x).
        for x in [0.0, 0.45, 0.8, 1.1, 1.6] {
            assert_abs_diff_eq!(evaluate_gf(&l, &[x], &[0.0]), f.value(&[x]), epsilon = 1e-12);
            let (gx, ge) = gradient_gf(&l, &[x], &[0.0]);
            let mut df = [0.0];
            f.grad(&[x], &mut df);
            assert_abs_diff_eq!(gx[0], df[0], epsilon = 1e-12);
            assert_abs_diff_eq!(ge[0], 0.0, epsilon = 1e-12);
        }

        // Stabilizing with an extra fiber direction leaves the front alone:
        // same fiber-critical covector over sampled base points.
        let st = stabilize_gf(&l, &[1]).unwrap();
        assert_eq!(st.gf.fiber_dim(), l.gf.fiber_dim() + 1);
        assert_eq!(st.provenance, Provenance::GraphOfDf);
        for x in [0.3, 0.9] {
            let a = newton_fiber_critical(&l.gf, &[x], &[0.0]).unwrap();
            let b = newton_fiber_critical(&st.gf, &[x], &[0.0, 0.0]).unwrap();
            assert_abs_diff_eq!(a.covector[0], b.covector[0], epsilon = 1e-9);
            assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-10);
        }
    }

    #[test]
    fn public_small_time_graph_chain_recovers_scaled_critical_values() {
        // For a C^1-small Hamiltonian eps * H, the graph generating function's
        // critical values approach eps * {critical values of H}: here {0,
        // eps * height} for a bump, up to O(eps^2).
        let eps = 0.01;
        let height = 0.8;
        let spec = HamiltonianSpec::from_radial_profile(
            Arc::new(BumpProfile::new(height, 0.5, 1.4)),
            2,
            1.4,
            "bump",
        )
        .unwrap()
        .scaled(eps);
        let l = broken_geodesic_gf(&spec, 2, ChainTarget::GraphDiffeo).unwrap();
        assert_eq!(l.provenance, Provenance::GraphDiffeo { steps: 2 });
        // Fixed point at the center: action eps * height.
        let fiber = l.gf.fiber_dim();
        let center = newton_critical_point(&l.gf, &[0.0, 0.0], &vec![0.0; fiber]).unwrap();
        assert_abs_diff_eq!(center.value, eps * height, epsilon = 2.0 * eps * eps);
        // Fixed points outside the support: action 0.
        let outside = newton_critical_point(&l.gf, &[1.5, 0.7], &vec![0.0; fiber]).unwrap();
        assert_abs_diff_eq!(outside.value, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn public_combine_and_reduce_plumbing() {
        let f: BaseMapRef = Arc::new(
            RadialBaseMap::new(Arc::new(BumpProfile::new(0.6, 0.4, 1.2)), 2, 1.2, "bump")
                .unwrap(),
        );
        let l = graph_gf(f).unwrap();
        let zs = zero_section_gf(2).unwrap();
        let diff = fiberwise_combine(&l, &zs, true).unwrap();
        assert_eq!(
            diff.provenance,
            Provenance::FiberwiseCombination {
                negate_second: true
            }
        );
        // S_diff(x; xi1, xi2) = S_l(x, xi1) - S_zs(x, xi2).
        let v = evaluate_gf(&diff, &[0.1, 0.2], &[0.3, 0.4]);
        let a = evaluate_gf(&l, &[0.1, 0.2], &[0.3]);
        let b = evaluate_gf(&zs, &[0.1, 0.2], &[0.4]);
        assert_abs_diff_eq!(v, a - b, epsilon = 1e-12);

        let conj = conjugate_gf(&l).unwrap();
        assert_abs_diff_eq!(
            evaluate_gf(&conj, &[0.1, 0.2], &[0.3]),
            -a,
            epsilon = 1e-12
        );

        // Reduction of the zero section over R^2 is the zero section over R.
        let fixed = reduce_gf(&zs, 1, ReduceMode::FixBasePoint(vec![0.4])).unwrap();
        assert_eq!(fixed.provenance, Provenance::Reduced);
        assert_eq!(fixed.base_dim(), 1);
        assert_eq!(evaluate_gf(&fixed, &[0.2], &[0.0]), 0.0);
        let dropped = reduce_gf(&zs, 1, ReduceMode::DropFiberDirection).unwrap();
        assert_eq!(dropped.base_dim(), 1);
        assert_eq!(dropped.gf.fiber_dim(), 2);
        // Published fiber coordinates are eigenvalue-sorted: the -1 direction
        // first, the promoted base coordinate (zero mode) second.
        assert_eq!(evaluate_gf(&dropped, &[0.2], &[0.0, 0.7]), 0.0);
        assert_eq!(evaluate_gf(&dropped, &[0.2], &[0.5, 0.0]), -0.25);
    }
}
