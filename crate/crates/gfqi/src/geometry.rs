//! Symplectic linear algebra on the standard phase space `R^{2n}`.
//!
//! Coordinates are blocked as `(q_1..q_n, p_1..p_n)`. The symplectic form is fixed
//! once, globally, as
//!
//! ```text
//! omega(v, w) = sum_i ( v_{p_i} w_{q_i} - v_{q_i} w_{p_i} )
//! ```
//!
//! i.e. the bilinear form of `dp ∧ dq`. All sign-sensitive code in the crate
//! (Hamiltonian vector fields, generating-function gradients, minimax orientations)
//! derives from this one definition, which is pinned by a sign test below.
//!
//! The module provides:
//! - the form [`omega`] and the compatible linear maps [`j_apply`] / [`j_inv_apply`],
//! - the affine identification of a pair of phase points with a cotangent vector
//!   over the diagonal ([`identify_graph_point`] / [`split_graph_point`]),
//! - subspace calculus ([`LinearSubspace`]): symplectic orthogonals, isotropy /
//!   coisotropy / Lagrangian predicates,
//! - the constructive decomposition of phase space adapted to a coisotropic
//!   subspace and a reference Lagrangian ([`coisotropic_decompose`]).

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold for all rank decisions in this module.
pub const RANK_TOL: f64 = 1e-10;

/// Absolute tolerance for "omega vanishes" checks on orthonormalized bases.
const OMEGA_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// The symplectic form and its compatible complex structure
// ---------------------------------------------------------------------------

/// The standard symplectic form `omega(v, w) = sum_i (v_{p_i} w_{q_i} - v_{q_i} w_{p_i})`.
///
/// Panics if the slices have different or odd lengths; phase vectors are validated
/// at API boundaries.
pub fn omega(v: &[f64], w: &[f64]) -> f64 {
    assert_eq!(v.len(), w.len(), "omega: mismatched phase dimensions");
    assert_eq!(v.len() % 2, 0, "omega: odd phase dimension");
    let n = v.len() / 2;
    let mut acc = 0.0;
    for i in 0..n {
        acc += v[n + i] * w[i] - v[i] * w[n + i];
    }
    acc
}

/// The linear map `J` with `omega(y, z) = <J y, z>`: `(q, p) -> (p, -q)`.
pub fn j_apply(v: &[f64]) -> Vec<f64> {
    assert_eq!(v.len() % 2, 0, "j_apply: odd phase dimension");
    let n = v.len() / 2;
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        out[i] = v[n + i];
        out[n + i] = -v[i];
    }
    out
}

/// The inverse map `J^{-1} = -J`: `(q, p) -> (-p, q)`.
///
/// This is the map that converts a cotangent gradient into a phase-space
/// displacement in the graph description of a diffeomorphism.
pub fn j_inv_apply(v: &[f64]) -> Vec<f64> {
    assert_eq!(v.len() % 2, 0, "j_inv_apply: odd phase dimension");
    let n = v.len() / 2;
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        out[i] = -v[n + i];
        out[n + i] = v[i];
    }
    out
}

// ---------------------------------------------------------------------------
// Phase points and the graph identification
// ---------------------------------------------------------------------------

/// A point of the standard phase space `R^{2n}`, blocked as `(q_1..q_n, p_1..p_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    coords: Vec<f64>,
}

impl PhasePoint {
    /// Validates even length and finite entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "phase point needs even length, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerics("phase point with non-finite entry".into()));
        }
        Ok(Self { coords })
    }

    /// Number of position (equivalently momentum) coordinates.
    pub fn n(&self) -> usize {
        self.coords.len() / 2
    }

    /// Full coordinate slice `(q, p)`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Position block.
    pub fn q(&self) -> &[f64] {
        &self.coords[..self.n()]
    }

    /// Momentum block.
    pub fn p(&self) -> &[f64] {
        &self.coords[self.n()..]
    }
}

/// A cotangent vector: a base point together with a covector at that base.
#[derive(Clone, Debug, PartialEq)]
pub struct CotangentPoint {
    /// Base-point coordinates.
    pub base: Vec<f64>,
    /// Covector coordinates (same length as `base`).
    pub covector: Vec<f64>,
}

/// Identifies the pair of phase points `z = (q, p)`, `Z = (Q, P)` with a cotangent
/// vector over the diagonal:
///
/// ```text
/// (q, p, Q, P)  ->  base = ((q+Q)/2, (p+P)/2),  covector = (P-p, q-Q).
/// ```
///
/// The covector equals `J(Z - z)` with [`j_apply`], the unique sign for which the
/// graph of every symplectic map becomes a Lagrangian submanifold of the cotangent
/// space over the diagonal (pairing the covector against `d(base)` pulls back to
/// `(omega - omega)/1` on the graph). With the opposite ordering `(P-p, Q-q)` the
/// pullback does not vanish for maps that mix coordinate pairs, which only shows
/// up in dimension four and higher; a regression test pins this down.
///
/// Fixed points of a map (`Z = z`) land exactly on the zero covector.
pub fn identify_graph_point(q: &[f64], p: &[f64], qq: &[f64], pp: &[f64]) -> Result<CotangentPoint> {
    let n = q.len();
    if p.len() != n || qq.len() != n || pp.len() != n {
        return Err(Error::Dimension(format!(
            "identify_graph_point: block lengths {}, {}, {}, {} differ",
            q.len(),
            p.len(),
            qq.len(),
            pp.len()
        )));
    }
    let mut base = Vec::with_capacity(2 * n);
    let mut covector = Vec::with_capacity(2 * n);
    for i in 0..n {
        base.push(0.5 * (q[i] + qq[i]));
    }
    for i in 0..n {
        base.push(0.5 * (p[i] + pp[i]));
    }
    for i in 0..n {
        covector.push(pp[i] - p[i]);
    }
    for i in 0..n {
        covector.push(q[i] - qq[i]);
    }
    Ok(CotangentPoint { base, covector })
}

/// Inverse of [`identify_graph_point`]: recovers `(q, p, Q, P)` from a cotangent
/// vector over the diagonal.
pub fn split_graph_point(
    base: &[f64],
    covector: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    if base.len() != covector.len() || base.len() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "split_graph_point: base/covector lengths {}, {}",
            base.len(),
            covector.len()
        )));
    }
    let n = base.len() / 2;
    let (a, b) = base.split_at(n);
    let (u, v) = covector.split_at(n);
    let q: Vec<f64> = (0..n).map(|i| a[i] + 0.5 * v[i]).collect();
    let qq: Vec<f64> = (0..n).map(|i| a[i] - 0.5 * v[i]).collect();
    let p: Vec<f64> = (0..n).map(|i| b[i] - 0.5 * u[i]).collect();
    let pp: Vec<f64> = (0..n).map(|i| b[i] + 0.5 * u[i]).collect();
    Ok((q, p, qq, pp))
}

// ---------------------------------------------------------------------------
// Linear subspaces
// ---------------------------------------------------------------------------

/// A linear subspace of `R^{2n}`, stored as a list of linearly independent
/// basis columns. The zero subspace has an empty basis.
#[derive(Clone, Debug)]
pub struct LinearSubspace {
    ambient_dim: usize,
    /// `ambient_dim x dim` matrix whose columns span the subspace.
    basis: DMatrix<f64>,
}

impl LinearSubspace {
    /// Builds a subspace from basis vectors, checking ambient evenness, lengths,
    /// and linear independence (relative singular-value threshold [`RANK_TOL`]).
    pub fn new(ambient_dim: usize, basis: Vec<Vec<f64>>) -> Result<Self> {
        if ambient_dim % 2 != 0 {
            return Err(Error::Dimension(format!(
                "ambient dimension {ambient_dim} is odd"
            )));
        }
        for (k, v) in basis.iter().enumerate() {
            if v.len() != ambient_dim {
                return Err(Error::Dimension(format!(
                    "basis vector {k} has length {}, ambient is {ambient_dim}",
                    v.len()
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Numerics(format!("basis vector {k} is non-finite")));
            }
        }
        if basis.len() > ambient_dim {
            return Err(Error::Dimension(format!(
                "{} vectors cannot be independent in dimension {ambient_dim}",
                basis.len()
            )));
        }
        let m = if basis.is_empty() {
            DMatrix::zeros(ambient_dim, 0)
        } else {
            DMatrix::from_fn(ambient_dim, basis.len(), |r, c| basis[c][r])
        };
        if matrix_rank(&m) != basis.len() {
            return Err(Error::Dimension(
                "degenerate basis: vectors are linearly dependent".into(),
            ));
        }
        Ok(Self {
            ambient_dim,
            basis: m,
        })
    }

    /// The zero subspace.
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    /// All of `R^{ambient_dim}`.
    pub fn full(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: DMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Span of a set of (not necessarily independent) vectors.
    pub fn span(ambient_dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        if ambient_dim % 2 != 0 {
            return Err(Error::Dimension(format!(
                "ambient dimension {ambient_dim} is odd"
            )));
        }
        let m = if vectors.is_empty() {
            DMatrix::zeros(ambient_dim, 0)
        } else {
            for v in vectors {
                if v.len() != ambient_dim {
                    return Err(Error::Dimension("span: vector length mismatch".into()));
                }
            }
            DMatrix::from_fn(ambient_dim, vectors.len(), |r, c| vectors[c][r])
        };
        Ok(Self {
            ambient_dim,
            basis: orthonormal_columns(&m),
        })
    }

    /// Dimension of the subspace.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Dimension of the ambient space.
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Basis columns as vectors.
    pub fn basis_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|c| self.basis.column(c).iter().copied().collect())
            .collect()
    }

    /// An orthonormal basis matrix for the subspace.
    pub fn orthonormal(&self) -> DMatrix<f64> {
        orthonormal_columns(&self.basis)
    }

    /// Whether `v` lies in the subspace (residual after orthogonal projection,
    /// relative to `1 + |v|`).
    pub fn contains_vector(&self, v: &[f64]) -> bool {
        assert_eq!(v.len(), self.ambient_dim);
        let on = self.orthonormal();
        let x = DVector::from_column_slice(v);
        let residual = &x - &on * (on.transpose() * &x);
        residual.norm() <= OMEGA_TOL * (1.0 + x.norm())
    }

    /// Whether every basis vector of `other` lies in `self`.
    pub fn contains_subspace(&self, other: &LinearSubspace) -> bool {
        other
            .basis_vectors()
            .iter()
            .all(|v| self.contains_vector(v))
    }

    /// Subspace equality (mutual containment).
    pub fn equals(&self, other: &LinearSubspace) -> bool {
        self.dim() == other.dim() && self.contains_subspace(other)
    }

    /// Span of the union of the two subspaces.
    pub fn sum(&self, other: &LinearSubspace) -> LinearSubspace {
        assert_eq!(self.ambient_dim, other.ambient_dim);
        let m = hcat(&self.basis, &other.basis);
        LinearSubspace {
            ambient_dim: self.ambient_dim,
            basis: orthonormal_columns(&m),
        }
    }

    /// Intersection of the two subspaces.
    pub fn intersect(&self, other: &LinearSubspace) -> LinearSubspace {
        assert_eq!(self.ambient_dim, other.ambient_dim);
        if self.dim() == 0 || other.dim() == 0 {
            return LinearSubspace::zero(self.ambient_dim);
        }
        // Solve [B_self | -B_other] (a; b) = 0; intersection vectors are B_self a.
        let mut m = hcat(&self.basis, &other.basis);
        for c in self.dim()..m.ncols() {
            for r in 0..m.nrows() {
                m[(r, c)] = -m[(r, c)];
            }
        }
        let ns = nullspace(&m);
        if ns.ncols() == 0 {
            return LinearSubspace::zero(self.ambient_dim);
        }
        let alphas = ns.rows(0, self.dim()).into_owned();
        let vectors = &self.basis * alphas;
        LinearSubspace {
            ambient_dim: self.ambient_dim,
            basis: orthonormal_columns(&vectors),
        }
    }

    /// Euclidean-orthogonal complement of `self` inside `within` (requires
    /// `self ⊂ within`); the choice is deterministic given the bases.
    pub fn complement_within(&self, within: &LinearSubspace) -> Result<LinearSubspace> {
        assert_eq!(self.ambient_dim, within.ambient_dim);
        let expected = within.dim().checked_sub(self.dim()).ok_or_else(|| {
            Error::Dimension("complement_within: container is smaller than subspace".into())
        })?;
        if expected == 0 {
            return Ok(LinearSubspace::zero(self.ambient_dim));
        }
        let inner = self.orthonormal();
        let outer = within.orthonormal();
        // Project the container's basis onto the orthogonal complement of `self`.
        let residual = &outer - &inner * (inner.transpose() * &outer);
        let comp = orthonormal_columns(&residual);
        if comp.ncols() != expected {
            return Err(Error::Numerics(format!(
                "complement_within: expected dimension {expected}, found {} \
                 (is the subspace contained in the container?)",
                comp.ncols()
            )));
        }
        Ok(LinearSubspace {
            ambient_dim: self.ambient_dim,
            basis: comp,
        })
    }

    /// Symplectic orthogonal `W^omega = { v : omega(v, w) = 0 for all w in W }`,
    /// computed as `J^{-1}` applied to the Euclidean orthogonal complement.
    pub fn symplectic_orthogonal(&self) -> LinearSubspace {
        let on = self.orthonormal();
        // Euclidean complement of the column space.
        let full = DMatrix::<f64>::identity(self.ambient_dim, self.ambient_dim);
        let residual = &full - &on * (on.transpose() * &full);
        let perp = orthonormal_columns(&residual);
        // omega(v, w) = <J v, w>, so v in W^omega iff J v ⟂ W iff v in J^{-1}(W^⊥).
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(perp.ncols());
        for c in 0..perp.ncols() {
            let col: Vec<f64> = perp.column(c).iter().copied().collect();
            cols.push(DVector::from_vec(j_inv_apply(&col)));
        }
        let m = if cols.is_empty() {
            DMatrix::zeros(self.ambient_dim, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        LinearSubspace {
            ambient_dim: self.ambient_dim,
            basis: orthonormal_columns(&m),
        }
    }

    /// The Gram matrix of `omega` on an orthonormal basis of the subspace.
    fn omega_gram(&self) -> DMatrix<f64> {
        let on = self.orthonormal();
        let d = on.ncols();
        DMatrix::from_fn(d, d, |i, j| {
            let vi: Vec<f64> = on.column(i).iter().copied().collect();
            let vj: Vec<f64> = on.column(j).iter().copied().collect();
            omega(&vi, &vj)
        })
    }

    /// Whether `omega` vanishes identically on the subspace.
    pub fn is_isotropic(&self) -> bool {
        self.omega_gram().iter().all(|x| x.abs() <= OMEGA_TOL)
    }

    /// Whether `omega` is nondegenerate on the subspace.
    pub fn is_symplectic(&self) -> bool {
        matrix_rank(&self.omega_gram()) == self.dim()
    }

    /// Whether the subspace is coisotropic (`W^omega ⊂ W`).
    pub fn is_coisotropic(&self) -> bool {
        self.contains_subspace(&self.symplectic_orthogonal())
    }

    /// Whether the subspace is Lagrangian (isotropic of dimension `n`).
    pub fn is_lagrangian(&self) -> bool {
        2 * self.dim() == self.ambient_dim && self.is_isotropic()
    }
}

/// Free-function form of [`LinearSubspace::symplectic_orthogonal`].
pub fn symplectic_orthogonal(w: &LinearSubspace) -> LinearSubspace {
    w.symplectic_orthogonal()
}

// ---------------------------------------------------------------------------
// Coisotropic decomposition
// ---------------------------------------------------------------------------

/// A decomposition of `R^{2n}` into six isotropic pieces adapted to a coisotropic
/// subspace `W` and a reference Lagrangian `N`:
///
/// - the six parts are pairwise transverse and direct-sum to `R^{2n}`;
/// - `N = N1 ⊕ N2 ⊕ N3`;
/// - each `Ni ⊕ Vi` is a symplectic subspace;
/// - `W = N1 ⊕ V1 ⊕ N2 ⊕ V3` and `W^omega = N2 ⊕ V3`.
#[derive(Clone, Debug)]
pub struct IsotropicDecomposition {
    pub n1: LinearSubspace,
    pub v1: LinearSubspace,
    pub n2: LinearSubspace,
    pub v2: LinearSubspace,
    pub n3: LinearSubspace,
    pub v3: LinearSubspace,
}

impl IsotropicDecomposition {
    /// All six parts in the order `N1, V1, N2, V2, N3, V3`.
    pub fn parts(&self) -> [&LinearSubspace; 6] {
        [&self.n1, &self.v1, &self.n2, &self.v2, &self.n3, &self.v3]
    }

    /// Checks every structural invariant against the inputs; returns an error
    /// describing the first violated property.
    pub fn verify(&self, w: &LinearSubspace, n: &LinearSubspace) -> Result<()> {
        let ambient = w.ambient_dim();
        let total: usize = self.parts().iter().map(|s| s.dim()).sum();
        if total != ambient {
            return Err(Error::Numerics(format!(
                "decomposition dimensions sum to {total}, ambient is {ambient}"
            )));
        }
        let all = self
            .parts()
            .iter()
            .fold(LinearSubspace::zero(ambient), |acc, s| acc.sum(s));
        if all.dim() != ambient {
            return Err(Error::Numerics(
                "decomposition parts do not span the ambient space".into(),
            ));
        }
        for (name, part) in ["N1", "V1", "N2", "V2", "N3", "V3"]
            .iter()
            .zip(self.parts())
        {
            if !part.is_isotropic() {
                return Err(Error::Numerics(format!("part {name} is not isotropic")));
            }
        }
        let n_sum = self.n1.sum(&self.n2).sum(&self.n3);
        if !n_sum.equals(n) {
            return Err(Error::Numerics(
                "N1 ⊕ N2 ⊕ N3 differs from the reference Lagrangian".into(),
            ));
        }
        for (name, (ni, vi)) in ["1", "2", "3"].iter().zip([
            (&self.n1, &self.v1),
            (&self.n2, &self.v2),
            (&self.n3, &self.v3),
        ]) {
            if ni.dim() != vi.dim() {
                return Err(Error::Numerics(format!(
                    "N{name} and V{name} have different dimensions"
                )));
            }
            if !ni.sum(vi).is_symplectic() {
                return Err(Error::Numerics(format!("N{name} ⊕ V{name} is not symplectic")));
            }
        }
        let w_sum = self.n1.sum(&self.v1).sum(&self.n2).sum(&self.v3);
        if !w_sum.equals(w) {
            let miss: Vec<String> = w_sum
                .basis_vectors()
                .iter()
                .map(|v| format!("{}", if w.contains_vector(v) { 1 } else { 0 }))
                .collect();
            return Err(Error::Numerics(format!(
                "N1 ⊕ V1 ⊕ N2 ⊕ V3 (dim {} vs {}; contained: {}) differs from the coisotropic input",
                w_sum.dim(),
                w.dim(),
                miss.join(",")
            )));
        }
        Ok(())
    }
}

/// Constructs the adapted decomposition for a coisotropic `W` and Lagrangian `N`.
///
/// Construction order: `N2 = W^omega ∩ N` first; then `N1` (complement of `N2`
/// in `W ∩ N`), the symplectic piece `F1` (complement of `W^omega` in `W`
/// containing `N1`) with `V1` a Lagrangian complement of `N1` in `F1`; then
/// `V3` (complement of `N2` in `W^omega`), `N3` (complement of `W ∩ N` in `N`);
/// finally `F2 = (F1 ⊕ N3 ⊕ V3)^omega` with `V2` a Lagrangian complement of `N2`
/// in `F2`. Complements are Euclidean-orthogonal within the relevant space, then
/// corrected to Lagrangian complements where required; the output is therefore
/// deterministic given the input bases.
pub fn coisotropic_decompose(
    w: &LinearSubspace,
    n: &LinearSubspace,
) -> Result<IsotropicDecomposition> {
    if w.ambient_dim() != n.ambient_dim() {
        return Err(Error::Dimension(format!(
            "ambient dimensions differ: {} vs {}",
            w.ambient_dim(),
            n.ambient_dim()
        )));
    }
    if !w.is_coisotropic() {
        return Err(Error::Dimension(
            "coisotropic_decompose: W is not coisotropic".into(),
        ));
    }
    if !n.is_lagrangian() {
        return Err(Error::Dimension(
            "coisotropic_decompose: N is not Lagrangian".into(),
        ));
    }

    let w_omega = w.symplectic_orthogonal();
    let n2 = w_omega.intersect(n);
    let w_cap_n = w.intersect(n);
    let n1 = n2.complement_within(&w_cap_n)?;

    // F1: complement of W^omega in W containing N1.
    let seeded = w_omega.sum(&n1);
    let rest = seeded.complement_within(w)?;
    let f1 = n1.sum(&rest);
    let v1 = lagrangian_complement(&f1, &n1)?;

    let v3 = n2.complement_within(&w_omega)?;
    let n3 = w_cap_n.complement_within(n)?;

    let f2 = symplectic_orthogonal(&f1.sum(&n3).sum(&v3));
    let v2 = lagrangian_complement(&f2, &n2)?;

    let dec = IsotropicDecomposition {
        n1,
        v1,
        n2,
        v2,
        n3,
        v3,
    };
    dec.verify(w, n)?;
    Ok(dec)
}

/// Inside a symplectic subspace `F`, finds a Lagrangian complement `V` of a given
/// Lagrangian-in-`F` subspace `N0` (so `F = N0 ⊕ V`, `V` isotropic).
///
/// Starts from the Euclidean complement `C` of `N0` in `F`, rescales it to a dual
/// basis (`omega(n_i, c'_j) = delta_ij`), then removes the isotropy defect with the
/// correction `v_j = c'_j - (1/2) sum_l omega(c'_j, c'_l) n_l`, which leaves the
/// pairing with `N0` untouched.
fn lagrangian_complement(f: &LinearSubspace, n0: &LinearSubspace) -> Result<LinearSubspace> {
    let d = n0.dim();
    if f.dim() != 2 * d {
        return Err(Error::Numerics(format!(
            "lagrangian_complement: F has dimension {}, expected {}",
            f.dim(),
            2 * d
        )));
    }
    if d == 0 {
        return Ok(LinearSubspace::zero(f.ambient_dim()));
    }
    let c = n0.complement_within(f)?;
    let n_basis = n0.orthonormal();
    let c_basis = c.orthonormal();
    let col = |m: &DMatrix<f64>, j: usize| -> Vec<f64> { m.column(j).iter().copied().collect() };

    // Pairing matrix P_ij = omega(n_i, c_j); provably invertible.
    let pmat = DMatrix::from_fn(d, d, |i, j| omega(&col(&n_basis, i), &col(&c_basis, j)));
    let pinv = pmat.clone().try_inverse().ok_or_else(|| {
        Error::Numerics("lagrangian_complement: degenerate pairing between N and its complement".into())
    })?;
    // Dual basis c'_j = sum_k c_k (P^{-1})_{kj}.
    let cprime = &c_basis * pinv;

    // Isotropy defect A_ij = omega(c'_i, c'_j), removed by the N-direction shift.
    let amat = DMatrix::from_fn(d, d, |i, j| omega(&col(&cprime, i), &col(&cprime, j)));
    let mut v_cols: Vec<DVector<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut vj = DVector::from_vec(col(&cprime, j));
        for l in 0..d {
            let coeff = 0.5 * amat[(j, l)];
            vj -= coeff * DVector::from_vec(col(&n_basis, l));
        }
        v_cols.push(vj);
    }
    let vmat = DMatrix::from_columns(&v_cols);
    Ok(LinearSubspace {
        ambient_dim: f.ambient_dim(),
        basis: orthonormal_columns(&vmat),
    })
}

// ---------------------------------------------------------------------------
// Small dense linear-algebra helpers (rank, nullspace, orthonormalization)
// ---------------------------------------------------------------------------

/// Pivoted modified Gram-Schmidt with one reorthogonalization pass, optionally
/// seeded with an already-orthonormal prefix that is projected out but not
/// returned. Returns the newly accepted orthonormal columns. A candidate is
/// accepted while its residual norm exceeds `RANK_TOL * max(1, largest input
/// column norm)`. Deterministic: at each step the remaining column of largest
/// residual is taken (ties broken by lowest index).
///
/// Hand-rolled because the general-purpose SVD available to us returns visibly
/// inaccurate singular directions on some small well-conditioned inputs, while
/// reorthogonalized Gram-Schmidt is provably accurate at these sizes.
fn pivoted_mgs(seed: &[DVector<f64>], m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let mut residuals: Vec<DVector<f64>> = (0..m.ncols()).map(|c| m.column(c).into_owned()).collect();
    let scale = residuals
        .iter()
        .map(|c| c.norm())
        .fold(1.0f64, f64::max);
    let cutoff = RANK_TOL * scale;
    // Project out the seed once up front (seed is orthonormal).
    for r in residuals.iter_mut() {
        for s in seed {
            let coeff = s.dot(r);
            *r -= coeff * s;
        }
        // Second pass for accuracy.
        for s in seed {
            let coeff = s.dot(r);
            *r -= coeff * s;
        }
    }
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut alive: Vec<bool> = vec![true; residuals.len()];
    loop {
        // Pick the remaining column with the largest residual.
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in residuals.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let nrm = r.norm();
            if best.map_or(true, |(_, bn)| nrm > bn) {
                best = Some((i, nrm));
            }
        }
        let Some((idx, nrm)) = best else { break };
        if nrm <= cutoff {
            break;
        }
        let mut q = residuals[idx].clone() / nrm;
        // Reorthogonalize against everything accepted so far (and the seed).
        for s in seed.iter().chain(basis.iter()) {
            let coeff = s.dot(&q);
            q -= coeff * s;
        }
        let qn = q.norm();
        if qn <= 0.5 {
            // The direction collapsed under reorthogonalization: treat as dependent.
            alive[idx] = false;
            continue;
        }
        q /= qn;
        alive[idx] = false;
        // Deflate all remaining residuals by the new direction.
        for (i, r) in residuals.iter_mut().enumerate() {
            if alive[i] {
                let coeff = q.dot(r);
                *r -= coeff * &q;
            }
        }
        basis.push(q);
    }
    basis
}

/// Rank via pivoted Gram-Schmidt with the module-wide threshold. The reference
/// scale is floored at 1 so that all-noise matrices (residuals of projections
/// whose true value is zero) read as rank 0; all meaningful bases in this module
/// are orthonormalized, hence have O(1) column norms.
pub(crate) fn matrix_rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    pivoted_mgs(&[], m).len()
}

/// Orthonormal basis for the column space (deterministic pivoted Gram-Schmidt
/// order).
pub(crate) fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let basis = pivoted_mgs(&[], m);
    if basis.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// Orthonormal basis of the (right) nullspace of `m`: the orthogonal complement
/// of the row space, found by extending the row-space basis with coordinate
/// directions.
pub(crate) fn nullspace(m: &DMatrix<f64>) -> DMatrix<f64> {
    let ncols = m.ncols();
    if ncols == 0 {
        return DMatrix::zeros(0, 0);
    }
    let row_space = pivoted_mgs(&[], &m.transpose());
    let identity = DMatrix::<f64>::identity(ncols, ncols);
    let comp = pivoted_mgs(&row_space, &identity);
    if comp.is_empty() {
        DMatrix::zeros(ncols, 0)
    } else {
        DMatrix::from_columns(&comp)
    }
}

/// Horizontal concatenation.
fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    m.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    m
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
