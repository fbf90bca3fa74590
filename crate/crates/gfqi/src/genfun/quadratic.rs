//! Symmetric quadratic forms on the fiber of a generating function.
//!
//! A form is stored both as its symmetric matrix `M` (value `xi^T M xi`) and as
//! its spectral data `M = U diag(lambda) U^T`, computed by a cyclic Jacobi
//! iteration. The spectral data fixes the axis-aligned coordinates used by the
//! sublevel machinery: in rotated coordinates `eta` (with `xi = U eta`) the form
//! is exactly diagonal, every box facet normal is an eigenvector, and the
//! negative cone is a union of coordinate directions.

use crate::{Error, Result};
use nalgebra::DMatrix;

/// Threshold below which an eigenvalue counts as a zero mode of the form.
pub const EIGEN_DEGENERACY_TOL: f64 = 1e-8;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns `(u, lambda)` with `m = u * diag(lambda) * u^T`, `u` orthogonal.
/// Eigenpairs are sorted by ascending eigenvalue. Sizes here are tiny (fiber
/// dimensions of generating functions), so the quadratically convergent sweep
/// is both fast and numerically watertight.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let sym_defect = (m - m.transpose()).abs().max();
    let scale = m.abs().max().max(1e-300);
    if sym_defect > 1e-10 * scale {
        return Err(Error::Numerics(format!(
            "quadratic form matrix is not symmetric (defect {sym_defect:.3e})"
        )));
    }
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // Symmetrize exactly so the sweep preserves symmetry bit-for-bit.
            a[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    let mut u = DMatrix::<f64>::identity(n, n);
    let off = |a: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let tol = 1e-15 * scale * (n as f64);
    for _sweep in 0..60 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol / (n as f64).max(1.0) {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Classical Jacobi rotation annihilating a[(p, q)].
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let ukp = u[(k, p)];
                    let ukq = u[(k, q)];
                    u[(k, p)] = c * ukp - s * ukq;
                    u[(k, q)] = s * ukp + c * ukq;
                }
            }
        }
    }
    if off(&a) > 1e-12 * scale * (n as f64) {
        return Err(Error::Numerics(format!(
            "Jacobi sweep failed to converge (off-diagonal {:.3e})",
            off(&a)
        )));
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)], i)).collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite eigenvalues"));
    let lambda: Vec<f64> = pairs.iter().map(|&(l, _)| l).collect();
    let mut u_sorted = DMatrix::zeros(n, n);
    for (new_col, &(_, old_col)) in pairs.iter().enumerate() {
        for r in 0..n {
            u_sorted[(r, new_col)] = u[(r, old_col)];
        }
    }
    Ok((u_sorted, lambda))
}

/// A symmetric quadratic form together with its spectral decomposition.
#[derive(Clone, Debug)]
pub struct SymmetricQuadratic {
    matrix: DMatrix<f64>,
    /// Orthogonal eigenbasis; `None` when the matrix is already diagonal.
    rotation: Option<DMatrix<f64>>,
    /// Ascending eigenvalues.
    lambda: Vec<f64>,
    /// Number of eigenvalues below the degeneracy threshold in magnitude.
    zero_modes: usize,
}

impl SymmetricQuadratic {
    /// Builds the form from its symmetric matrix, allowing `declared_zero_modes`
    /// near-zero eigenvalues (reductions create genuine zero modes); every other
    /// eigenvalue must exceed [`EIGEN_DEGENERACY_TOL`] in magnitude.
    pub fn from_matrix(matrix: DMatrix<f64>, declared_zero_modes: usize) -> Result<Self> {
        let (u, lambda) = jacobi_eigen(&matrix)?;
        let zero_modes = lambda
            .iter()
            .filter(|l| l.abs() < EIGEN_DEGENERACY_TOL)
            .count();
        if zero_modes != declared_zero_modes {
            return Err(Error::Numerics(format!(
                "fiber quadratic form has {zero_modes} zero modes (|lambda| < {EIGEN_DEGENERACY_TOL:.0e}), expected {declared_zero_modes}; eigenvalues {lambda:?}"
            )));
        }
        let n = matrix.nrows();
        let mut is_diag_sorted = true;
        'outer: for i in 0..n {
            for j in 0..n {
                let expect = if i == j { lambda[i] } else { 0.0 };
                if (matrix[(i, j)] - expect).abs() > 0.0 {
                    is_diag_sorted = false;
                    break 'outer;
                }
            }
        }
        let rotation = if is_diag_sorted { None } else { Some(u) };
        Ok(Self {
            matrix,
            rotation,
            lambda,
            zero_modes,
        })
    }

    /// Diagonal form with the given entries (kept in the given order if already
    /// ascending; otherwise sorted by the decomposition).
    pub fn diagonal(entries: &[f64], declared_zero_modes: usize) -> Result<Self> {
        let n = entries.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        Self::from_matrix(m, declared_zero_modes)
    }

    /// Direct sum of two forms (block diagonal), optionally negating the second.
    pub fn direct_sum(&self, other: &Self, negate_second: bool) -> Result<Self> {
        let (na, nb) = (self.dim(), other.dim());
        let mut m = DMatrix::zeros(na + nb, na + nb);
        for i in 0..na {
            for j in 0..na {
                m[(i, j)] = self.matrix[(i, j)];
            }
        }
        let sign = if negate_second { -1.0 } else { 1.0 };
        for i in 0..nb {
            for j in 0..nb {
                m[(na + i, na + j)] = sign * other.matrix[(i, j)];
            }
        }
        Self::from_matrix(m, self.zero_modes + other.zero_modes)
    }

    /// The form `-Q`, used by duality (the conjugate generating function).
    pub fn negated(&self) -> Self {
        let matrix = -&self.matrix;
        let rotation = self.rotation.clone();
        // Negation reverses the eigenvalue order.
        let mut lambda: Vec<f64> = self.lambda.iter().map(|l| -l).collect();
        lambda.reverse();
        let rotation = rotation.map(|u| {
            let n = u.ncols();
            let mut rev = DMatrix::zeros(n, n);
            for c in 0..n {
                for r in 0..n {
                    rev[(r, c)] = u[(r, n - 1 - c)];
                }
            }
            rev
        });
        Self {
            matrix,
            rotation,
            lambda,
            zero_modes: self.zero_modes,
        }
    }

    /// Extends the form by extra diagonal stabilizer directions `+1`/`-1`.
    pub fn stabilized(&self, signs: &[i8]) -> Result<Self> {
        let extra: Vec<f64> = signs.iter().map(|&s| f64::from(s.signum())).collect();
        if extra.iter().any(|e| *e == 0.0) {
            return Err(Error::Config(
                "stabilizer signs must be +1 or -1".to_string(),
            ));
        }
        let other = Self::diagonal(&extra, 0)?;
        self.direct_sum(&other, false)
    }

    /// Prepends declared zero-mode directions (used when base coordinates are
    /// demoted to fiber coordinates by a reduction).
    pub fn with_leading_zero_modes(&self, k: usize) -> Result<Self> {
        let n = self.dim();
        let mut m = DMatrix::zeros(k + n, k + n);
        for i in 0..n {
            for j in 0..n {
                m[(k + i, k + j)] = self.matrix[(i, j)];
            }
        }
        Self::from_matrix(m, self.zero_modes + k)
    }

    /// Fiber dimension of the form.
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Ascending eigenvalues (zero modes are the near-zero entries).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    /// Number of declared zero modes.
    pub fn zero_modes(&self) -> usize {
        self.zero_modes
    }

    /// Morse index: the number of strictly negative eigenvalues.
    pub fn index(&self) -> usize {
        self.lambda
            .iter()
            .filter(|l| **l < -EIGEN_DEGENERACY_TOL)
            .count()
    }

    /// Smallest magnitude among non-zero-mode eigenvalues.
    pub fn min_abs_nonzero_eigenvalue(&self) -> f64 {
        self.lambda
            .iter()
            .map(|l| l.abs())
            .filter(|a| *a >= EIGEN_DEGENERACY_TOL)
            .fold(f64::INFINITY, f64::min)
    }

    /// Value in diagonalized coordinates: `sum_i lambda_i eta_i^2`.
    pub fn value_diag(&self, eta: &[f64]) -> f64 {
        debug_assert_eq!(eta.len(), self.dim());
        let mut s = 0.0;
        for (l, e) in self.lambda.iter().zip(eta) {
            s += l * e * e;
        }
        s
    }

    /// Gradient in diagonalized coordinates.
    pub fn grad_diag(&self, eta: &[f64], out: &mut [f64]) {
        for ((o, l), e) in out.iter_mut().zip(&self.lambda).zip(eta) {
            *o = 2.0 * l * e;
        }
    }

    /// Maps diagonalized coordinates `eta` to the original fiber coordinates.
    pub fn to_original(&self, eta: &[f64]) -> Vec<f64> {
        match &self.rotation {
            None => eta.to_vec(),
            Some(u) => {
                let n = self.dim();
                let mut xi = vec![0.0; n];
                for (r, x) in xi.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for c in 0..n {
                        acc += u[(r, c)] * eta[c];
                    }
                    *x = acc;
                }
                xi
            }
        }
    }

    /// Pulls a gradient in original coordinates back to diagonalized ones
    /// (`U^T grad`).
    pub fn grad_to_diag(&self, grad_xi: &[f64]) -> Vec<f64> {
        match &self.rotation {
            None => grad_xi.to_vec(),
            Some(u) => {
                let n = self.dim();
                let mut g = vec![0.0; n];
                for (c, gc) in g.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for r in 0..n {
                        acc += u[(r, c)] * grad_xi[r];
                    }
                    *gc = acc;
                }
                g
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (u, l) = jacobi_eigen(&m).unwrap();
        assert_relative_eq!(l[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(l[1], 3.0, epsilon = 1e-12);
        // Reconstruction and orthogonality.
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(l.clone()));
        let rec = &u * d * u.transpose();
        assert!((rec - &m).abs().max() < 1e-12);
        let orth = (&u * u.transpose() - DMatrix::<f64>::identity(2, 2)).abs().max();
        assert!(orth < 1e-12);
    }

    #[test]
    fn jacobi_handles_hyperbolic_coupling_blocks() {
        // The coupling form -a*b (matrix [[0, -1/2], [-1/2, 0]]) has eigenvalues
        // -1/2 and +1/2: one negative direction per coupled pair.
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, -0.5, 0.0]);
        let q = SymmetricQuadratic::from_matrix(m, 0).unwrap();
        assert_relative_eq!(q.eigenvalues()[0], -0.5, epsilon = 1e-12);
        assert_relative_eq!(q.eigenvalues()[1], 0.5, epsilon = 1e-12);
        assert_eq!(q.index(), 1);
        // Diagonal value matches the original form through the rotation.
        let eta = [0.7, -0.3];
        let xi = q.to_original(&eta);
        let orig = -xi[0] * xi[1]; // xi^T M xi with M as above
        assert_relative_eq!(q.value_diag(&eta), orig, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_forms_are_rejected_unless_declared() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(SymmetricQuadratic::from_matrix(m.clone(), 0).is_err());
        let q = SymmetricQuadratic::from_matrix(m, 1).unwrap();
        assert_eq!(q.zero_modes(), 1);
        assert_eq!(q.index(), 0);
    }

    #[test]
    fn negation_flips_index_and_keeps_values() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, -2.0, 0.1, 0.0, 0.1, 0.5]);
        let q = SymmetricQuadratic::from_matrix(m, 0).unwrap();
        let nq = q.negated();
        assert_eq!(q.index() + nq.index(), 3);
        // Rebuild from the negated matrix and compare spectra.
        let q2 = SymmetricQuadratic::from_matrix(-DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.2, 0.0, 0.2, -2.0, 0.1, 0.0, 0.1, 0.5],
        ), 0)
        .unwrap();
        for (a, b) in nq.eigenvalues().iter().zip(q2.eigenvalues()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        // Diagonal evaluation agrees with the rotated original for the negation.
        let eta = [0.3, -0.8, 0.45];
        let xi = nq.to_original(&eta);
        let mut orig = 0.0;
        let mm = -DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, -2.0, 0.1, 0.0, 0.1, 0.5]);
        for i in 0..3 {
            for j in 0..3 {
                orig += xi[i] * mm[(i, j)] * xi[j];
            }
        }
        assert_relative_eq!(nq.value_diag(&eta), orig, epsilon = 1e-12);
    }

    #[test]
    fn direct_sum_and_stabilization_bookkeeping() {
        let a = SymmetricQuadratic::diagonal(&[-1.0], 0).unwrap();
        let b = SymmetricQuadratic::diagonal(&[2.0, -3.0], 0).unwrap();
        let s = a.direct_sum(&b, false).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.index(), 2);
        let sm = a.direct_sum(&b, true).unwrap();
        assert_eq!(sm.index(), 2); // -1 and -2 after negating the second block
        let st = s.stabilized(&[1, -1]).unwrap();
        assert_eq!(st.dim(), 5);
        assert_eq!(st.index(), 3);
        assert!(st.stabilized(&[0]).is_err());
    }
}
