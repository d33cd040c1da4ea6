//! Small dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Eigen-decompositions returned here are deterministic: eigenvalues come out
//! in descending order, and inside a (numerically) degenerate eigenspace the
//! basis is the Gram-Schmidt orthonormalization of the projector applied to
//! the standard basis vectors in index order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::TOL;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Eigenvalues closer than this are treated as one degenerate cluster.
const CLUSTER_TOL: f64 = 1e-10;

/// Residual norm below which a candidate basis vector is rejected during completion.
const PIVOT_TOL: f64 = 1e-4;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Outer product |v><w|.
pub fn outer(v: &CVector, w: &CVector) -> CMatrix {
    v * w.adjoint()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(values.len(), values.len());
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = real(v);
    }
    m
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Frobenius-norm distance between two matrices.
pub fn distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

/// Hermitian eigen-decomposition with descending eigenvalues and a canonical
/// basis inside degenerate eigenspaces.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let herm = hermitian_part(m);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors: Vec<CVector> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end - 1] - values[end] <= CLUSTER_TOL {
            end += 1;
        }
        if end - start > 1 {
            let canon = canonical_basis(&vectors[start..end], n);
            vectors.splice(start..end, canon);
        } else {
            fix_phase(&mut vectors[start]);
        }
        start = end;
    }
    (values, columns_to_matrix(&vectors, n))
}

/// Canonical orthonormal basis for span(vectors): the projector applied to
/// e_0, e_1, ... in order, orthonormalized, keeping the first `k` survivors.
pub(crate) fn canonical_basis(vectors: &[CVector], dim: usize) -> Vec<CVector> {
    let k = vectors.len();
    let mut projector = CMatrix::zeros(dim, dim);
    for v in vectors {
        projector += outer(v, v);
    }
    let mut out: Vec<CVector> = Vec::with_capacity(k);
    for i in 0..dim {
        if out.len() == k {
            break;
        }
        let mut w: CVector = projector.column(i).into_owned();
        for u in &out {
            let proj = u.dotc(&w);
            w -= u * proj;
        }
        let norm = w.norm();
        if norm > PIVOT_TOL {
            out.push(w / real(norm));
        }
    }
    // Fallback for pathological clusters: keep the solver's vectors.
    if out.len() < k {
        return vectors.to_vec();
    }
    out
}

/// Rotate the global phase so the first non-negligible component is real positive.
pub(crate) fn fix_phase(v: &mut CVector) {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8).copied() {
        let phase = z.conj() / real(z.norm());
        *v *= phase;
    }
}

pub(crate) fn columns_to_matrix(cols: &[CVector], nrows: usize) -> CMatrix {
    let mut m = CMatrix::zeros(nrows, cols.len());
    for (j, col) in cols.iter().enumerate() {
        m.set_column(j, col);
    }
    m
}

/// Extend orthonormal columns to a full unitary using standard basis vectors in order.
pub fn complete_unitary(cols: &[CVector], dim: usize) -> CMatrix {
    let mut basis: Vec<CVector> = cols.to_vec();
    let mut i = 0;
    while basis.len() < dim && i < dim {
        let mut w = CVector::zeros(dim);
        w[i] = ONE;
        for _ in 0..2 {
            for u in &basis {
                let proj = u.dotc(&w);
                w -= u * proj;
            }
        }
        let norm = w.norm();
        if norm > PIVOT_TOL {
            basis.push(w / real(norm));
        }
        i += 1;
    }
    columns_to_matrix(&basis, dim)
}

/// PSD square root via eigen-decomposition, clipping eigenvalues in [-TOL, 0).
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = eigh(m);
    if let Some(&min) = values.last() {
        if min < -TOL {
            return Err(Error::NotPsd(min));
        }
    }
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    Ok(&vectors * diag_real(&roots) * vectors.adjoint())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(hermitian_part(m));
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Descending eigenvalues of a Hermitian matrix (no eigenvectors).
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    if n == 1 {
        return vec![m[(0, 0)].re];
    }
    if n == 2 {
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let b = m[(0, 1)];
        let mean = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let r = (half * half + b.norm_sqr()).sqrt();
        return vec![mean + r, mean - r];
    }
    let mut values: Vec<f64> = SymmetricEigen::new(hermitian_part(m)).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im)
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Orthonormalize columns (modified Gram-Schmidt). Columns must be independent.
pub fn orthonormalize_columns(m: &CMatrix) -> CMatrix {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for i in 0..j {
            let qi = q.column(i).into_owned();
            let proj = qi.dotc(&q.column(j));
            let mut col = q.column_mut(j);
            col -= qi * proj;
        }
        let norm = q.column(j).norm();
        q.column_mut(j).unscale_mut(norm);
    }
    q
}

/// Haar-random isometry with the given shape (rows >= cols).
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    orthonormalize_columns(&ginibre(rows, cols, rng))
}

pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    random_isometry(dim, dim, rng)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest deviation of W^dagger W from the identity.
pub fn isometry_error(w: &CMatrix) -> f64 {
    let g = w.adjoint() * w;
    max_abs(&(g - identity(w.ncols())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_reconstructs_and_sorts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = ginibre(4, 4, &mut rng);
        let h = &g * g.adjoint();
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let back = &vecs * diag_real(&vals) * vecs.adjoint();
        assert!(distance(&back, &h) < 1e-10);
        assert!(isometry_error(&vecs) < 1e-12);
    }

    #[test]
    fn degenerate_cluster_gets_lexicographic_basis() {
        // span{|0>, (|1>+|2>)/sqrt2} rotated arbitrarily inside the eigenspace
        let s = 0.5f64.sqrt();
        let a = CVector::from_vec(vec![ONE, ZERO, ZERO]);
        let b = CVector::from_vec(vec![ZERO, real(s), real(s)]);
        let u = (&a + &b) * real(s);
        let v = (&a - &b) * real(s);
        let canon = canonical_basis(&[u, v], 3);
        assert!((canon[0].clone() - a).norm() < 1e-12);
        assert!((canon[1].clone() - b).norm() < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form_matches_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = ginibre(2, 2, &mut rng);
        let h = &g * g.adjoint();
        let fast = eigvalsh(&h);
        let (slow, _) = eigh(&h);
        assert!((fast[0] - slow[0]).abs() < 1e-12 && (fast[1] - slow[1]).abs() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_negative_matrix() {
        let m = diag_real(&[1.0, -0.5]);
        assert!(matches!(psd_sqrt(&m), Err(Error::NotPsd(_))));
    }

    #[test]
    fn completion_is_unitary() {
        let s = 0.5f64.sqrt();
        let v = CVector::from_vec(vec![real(s), real(s), ZERO]);
        let u = complete_unitary(&[v], 3);
        assert!(isometry_error(&u) < 1e-12);
    }
}
