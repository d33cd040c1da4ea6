//! Bipartite pure and mixed states, Schmidt decomposition, reduced states,
//! square-root fidelity and the isometric parameterization of ensembles.
//!
//! Amplitudes are stored in row-major `a ⊗ b` order: index `a * d_B + b`.

use nalgebra::SVD;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{self, real, CMatrix, CVector, ONE, ZERO};
use crate::majorization::SchmidtVector;
use crate::TOL;

/// Eigenvalues at or below this count as zero when taking ranks of density matrices.
pub const RANK_TOL: f64 = 1e-12;

/// Relative size below which a Schmidt weight is treated as exactly zero.
pub const SCHMIDT_ZERO: f64 = 1e-14;

/// Local dimensions `(d_A, d_B)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Dims(pub usize, pub usize);

impl From<[usize; 2]> for Dims {
    fn from(d: [usize; 2]) -> Self {
        Dims(d[0], d[1])
    }
}

impl From<Dims> for [usize; 2] {
    fn from(d: Dims) -> Self {
        [d.0, d.1]
    }
}

impl Dims {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::InvalidDims(a, b));
        }
        Ok(Dims(a, b))
    }

    pub fn total(&self) -> usize {
        self.0 * self.1
    }

    /// Length of Schmidt vectors: `min(d_A, d_B)`.
    pub fn schmidt_len(&self) -> usize {
        self.0.min(self.1)
    }

    pub fn party(&self, party: Party) -> usize {
        match party {
            Party::A => self.0,
            Party::B => self.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

/// Bipartite state vector with squared norm in `(0, 1]`.
///
/// Vectors with squared norm below `1 - TOL` carry the `subnormalized` flag;
/// they appear as unnormalized ensemble members `sqrt(p_i) |psi_i>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "io::PureStateWire", into = "io::PureStateWire")]
pub struct PureState {
    amplitudes: CVector,
    dims: Dims,
    subnormalized: bool,
}

impl PureState {
    pub fn new(dims: Dims, amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::from_vector(dims, CVector::from_vec(amplitudes))
    }

    pub fn from_vector(dims: Dims, amplitudes: CVector) -> Result<Self> {
        let dims = Dims::new(dims.0, dims.1)?;
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                what: "amplitude count",
                expected: dims.total(),
                got: amplitudes.len(),
            });
        }
        let norm_sqr = amplitudes.norm_squared();
        if norm_sqr == 0.0 || !norm_sqr.is_finite() {
            return Err(Error::ZeroState);
        }
        if norm_sqr > 1.0 + TOL {
            return Err(Error::NormTooLarge(norm_sqr));
        }
        Ok(PureState {
            amplitudes,
            dims,
            subnormalized: norm_sqr < 1.0 - TOL,
        })
    }

    /// Scales any nonzero vector to unit norm.
    pub fn normalized(dims: Dims, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroState);
        }
        Self::from_vector(dims, amplitudes / real(norm))
    }

    /// Computational basis product state `|a>|b>`.
    pub fn basis(dims: Dims, a: usize, b: usize) -> Result<Self> {
        if a >= dims.0 || b >= dims.1 {
            return Err(Error::DimensionMismatch {
                what: "basis index",
                expected: dims.total(),
                got: a * dims.1 + b,
            });
        }
        let mut v = CVector::zeros(dims.total());
        v[a * dims.1 + b] = ONE;
        Self::from_vector(dims, v)
    }

    /// `sum_k sqrt(lambda_k) |k>|k>` on the given dimensions.
    pub fn standard_form(dims: Dims, lambda: &SchmidtVector) -> Result<Self> {
        let n = dims.schmidt_len();
        if lambda.values()[n.min(lambda.len())..].iter().any(|&v| v > TOL) {
            return Err(Error::DimensionMismatch {
                what: "Schmidt rank",
                expected: n,
                got: lambda.rank(),
            });
        }
        let mut v = CVector::zeros(dims.total());
        for (k, &l) in lambda.values().iter().take(n).enumerate() {
            v[k * dims.1 + k] = real(l.sqrt());
        }
        Self::normalized(dims, v)
    }

    /// `sum_k sqrt(coeffs_k) a_k ⊗ b_k` using the columns of the given bases.
    pub fn from_schmidt(coeffs: &[f64], basis_a: &CMatrix, basis_b: &CMatrix) -> Result<Self> {
        let dims = Dims::new(basis_a.nrows(), basis_b.nrows())?;
        let mut m = CMatrix::zeros(dims.0, dims.1);
        for (k, &l) in coeffs.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            m += basis_a.column(k) * basis_b.column(k).transpose() * real(l.sqrt());
        }
        Self::from_matrix(&m)
    }

    /// State whose coefficient matrix is `m` (`d_A x d_B`).
    pub fn from_matrix(m: &CMatrix) -> Result<Self> {
        let dims = Dims::new(m.nrows(), m.ncols())?;
        let v = CVector::from_iterator(dims.total(), m.transpose().iter().copied());
        Self::from_vector(dims, v)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn is_subnormalized(&self) -> bool {
        self.subnormalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// The unit-norm version and the original norm.
    pub fn normalize(&self) -> (PureState, f64) {
        let norm = self.amplitudes.norm();
        let state = PureState {
            amplitudes: &self.amplitudes / real(norm),
            dims: self.dims,
            subnormalized: false,
        };
        (state, norm)
    }

    /// Coefficient matrix `M[a, b] = psi[a * d_B + b]`.
    pub fn coefficient_matrix(&self) -> CMatrix {
        CMatrix::from_row_slice(self.dims.0, self.dims.1, self.amplitudes.as_slice())
    }

    pub fn projector(&self) -> CMatrix {
        linalg::outer(&self.amplitudes, &self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|<self|other>|`.
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.inner(other).norm()
    }

    /// Schmidt coefficients of the normalized state, descending.
    pub fn schmidt_vector(&self) -> Result<SchmidtVector> {
        let values = schmidt_weights(&self.coefficient_matrix());
        SchmidtVector::normalized(values)
    }

    /// `(A ⊗ B) |psi>` as an unnormalized vector.
    pub fn apply_local(&self, a: &CMatrix, b: &CMatrix) -> CVector {
        let m = a * self.coefficient_matrix() * b.transpose();
        CVector::from_iterator(self.dims.total(), m.transpose().iter().copied())
    }

    /// Applies an operator on one party, identity on the other.
    pub fn apply_on(&self, party: Party, op: &CMatrix) -> CVector {
        match party {
            Party::A => self.apply_local(op, &linalg::identity(self.dims.1)),
            Party::B => self.apply_local(&linalg::identity(self.dims.0), op),
        }
    }
}

/// Unnormalized Schmidt weights: eigenvalues of `M M^dagger` on the smaller side, descending.
pub(crate) fn schmidt_weights(m: &CMatrix) -> Vec<f64> {
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let values = linalg::eigvalsh(&gram);
    let scale: f64 = values.iter().map(|v| v.max(0.0)).sum();
    values
        .into_iter()
        .map(|v| if v > SCHMIDT_ZERO * scale { v } else { 0.0 })
        .collect()
}

/// Hermitian, positive semidefinite, unit-trace bipartite operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "io::DensityMatrixWire", into = "io::DensityMatrixWire")]
pub struct DensityMatrix {
    matrix: CMatrix,
    dims: Dims,
}

impl DensityMatrix {
    pub fn new(dims: Dims, matrix: CMatrix) -> Result<Self> {
        let dims = Dims::new(dims.0, dims.1)?;
        let d = dims.total();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                what: "density matrix size",
                expected: d,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        let herm = linalg::hermiticity_error(&matrix);
        if herm > TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = linalg::trace(&matrix);
        if (tr.re - 1.0).abs() > TOL || tr.im.abs() > TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let min = linalg::min_eigenvalue(&matrix);
        if min < -TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(DensityMatrix {
            matrix: linalg::hermitian_part(&matrix),
            dims,
        })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let (unit, _) = psi.normalize();
        DensityMatrix {
            matrix: unit.projector(),
            dims: psi.dims,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Descending eigenvalues and matching eigenvectors (canonical within degenerate clusters).
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        linalg::eigh(&self.matrix)
    }

    pub fn rank(&self) -> usize {
        linalg::eigvalsh(&self.matrix).iter().filter(|&&v| v > RANK_TOL).count()
    }

    /// The factor `X = V_r diag(sqrt(eps))` with `rho = X X^dagger`, one column per nonzero eigenvalue.
    pub fn factor(&self) -> CMatrix {
        let (values, vectors) = self.eigen();
        let r = values.iter().filter(|&&v| v > RANK_TOL).count().max(1);
        let mut x = CMatrix::zeros(self.dims.total(), r);
        for (k, v) in values.iter().take(r).enumerate() {
            x.set_column(k, &(vectors.column(k) * real(v.max(0.0).sqrt())));
        }
        x
    }
}

/// Borrowed view on either kind of state.
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a PureState> for StateRef<'a> {
    fn from(p: &'a PureState) -> Self {
        StateRef::Pure(p)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(r: &'a DensityMatrix) -> Self {
        StateRef::Mixed(r)
    }
}

/// Reduced density matrix of `party`, normalized to unit trace.
pub fn reduced_state<'a>(state: impl Into<StateRef<'a>>, party: Party) -> CMatrix {
    let (reduced, tr) = match state.into() {
        StateRef::Pure(psi) => {
            let m = psi.coefficient_matrix();
            let r = match party {
                Party::A => &m * m.adjoint(),
                Party::B => m.transpose() * m.conjugate(),
            };
            (r, psi.norm_sqr())
        }
        StateRef::Mixed(rho) => {
            let Dims(da, db) = rho.dims;
            let m = &rho.matrix;
            let r = match party {
                Party::A => CMatrix::from_fn(da, da, |a, a2| (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()),
                Party::B => CMatrix::from_fn(db, db, |b, b2| (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()),
            };
            let tr = linalg::trace(&r).re;
            (r, tr)
        }
    };
    reduced / real(tr)
}

/// Schmidt coefficients with full local bases whose columns carry the Schmidt vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtDecomposition {
    pub coefficients: SchmidtVector,
    #[serde(with = "crate::io::cmatrix")]
    pub basis_a: CMatrix,
    #[serde(with = "crate::io::cmatrix")]
    pub basis_b: CMatrix,
    /// Norm of the input before normalization.
    pub norm: f64,
}

impl SchmidtDecomposition {
    /// `sum_k sqrt(lambda_k) a_k ⊗ b_k` (unit norm).
    pub fn reconstruct(&self) -> Result<PureState> {
        PureState::from_schmidt(self.coefficients.values(), &self.basis_a, &self.basis_b)
    }
}

/// Schmidt decomposition of the normalized input.
///
/// Degenerate coefficients get the canonical basis from
/// [`linalg::eigh`]'s convention, so equal inputs give equal bases.
pub fn schmidt_decompose(psi: &PureState) -> Result<SchmidtDecomposition> {
    let (unit, norm) = psi.normalize();
    let Dims(da, db) = unit.dims;
    let n = da.min(db);
    let m = unit.coefficient_matrix();
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.as_ref().expect("requested U");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let significant: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&k| svd.singular_values[k].powi(2) > SCHMIDT_ZERO)
        .collect();

    // group numerically equal weights and canonicalize the A-side vectors within each group
    let weights: Vec<f64> = significant.iter().map(|&k| svd.singular_values[k].powi(2)).collect();
    let mut a_vecs: Vec<CVector> = Vec::with_capacity(significant.len());
    let mut start = 0;
    while start < significant.len() {
        let mut end = start + 1;
        while end < significant.len() && weights[end - 1] - weights[end] <= 1e-11 {
            end += 1;
        }
        let group: Vec<CVector> = significant[start..end].iter().map(|&k| u.column(k).into_owned()).collect();
        if group.len() > 1 {
            a_vecs.extend(linalg::canonical_basis(&group, da));
        } else {
            let mut v = group.into_iter().next().expect("nonempty group");
            linalg::fix_phase(&mut v);
            a_vecs.push(v);
        }
        start = end;
    }

    // B-side partner of each A vector: b = (a^dagger M)^T / s
    let mut triples: Vec<(f64, CVector, CVector)> = a_vecs
        .into_iter()
        .map(|a| {
            let w: CVector = (a.adjoint() * &m).transpose();
            let s = w.norm();
            (s * s, a, w / real(s))
        })
        .collect();
    triples.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut coeffs: Vec<f64> = triples.iter().map(|t| t.0).collect();
    coeffs.resize(n, 0.0);
    let a_cols: Vec<CVector> = triples.iter().map(|t| t.1.clone()).collect();
    let b_cols: Vec<CVector> = triples.iter().map(|t| t.2.clone()).collect();
    Ok(SchmidtDecomposition {
        coefficients: SchmidtVector::normalized(coeffs)?,
        basis_a: linalg::complete_unitary(&a_cols, da),
        basis_b: linalg::complete_unitary(&b_cols, db),
        norm,
    })
}

/// `F(rho, sigma) = Tr sqrt(sqrt(rho) sigma sqrt(rho))`, clamped to `[0, 1]`.
pub fn sqrt_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dims != sigma.dims {
        return Err(Error::DimensionMismatch {
            what: "fidelity operands",
            expected: rho.dims.total(),
            got: sigma.dims.total(),
        });
    }
    let root = linalg::psd_sqrt(&rho.matrix)?;
    let inner = &root * &sigma.matrix * &root;
    let values = linalg::eigvalsh(&inner);
    if let Some(&min) = values.last() {
        if min < -TOL {
            return Err(Error::NotPsd(min));
        }
    }
    Ok(values.iter().map(|v| v.max(0.0).sqrt()).sum::<f64>().clamp(0.0, 1.0))
}

/// Weighted list of unit-norm pure states; weights are nonnegative with unit sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "io::EnsembleWire", into = "io::EnsembleWire")]
pub struct Ensemble {
    members: Vec<(f64, PureState)>,
}

impl Ensemble {
    pub fn new(members: Vec<(f64, PureState)>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        let dims = first.1.dims;
        let mut total = 0.0;
        let mut out = Vec::with_capacity(members.len());
        for (w, psi) in members {
            if !w.is_finite() || w < -TOL {
                return Err(Error::InvalidProbability(w));
            }
            if psi.dims != dims {
                return Err(Error::DimensionMismatch {
                    what: "ensemble member dims",
                    expected: dims.total(),
                    got: psi.dims.total(),
                });
            }
            total += w;
            let (unit, _) = psi.normalize();
            out.push((w.max(0.0), unit));
        }
        if (total - 1.0).abs() > TOL {
            return Err(Error::WeightSum(total));
        }
        Ok(Ensemble { members: out })
    }

    /// Builds an ensemble from unnormalized vectors `sqrt(p_i) |psi_i>`;
    /// members with squared norm below `min_weight` are dropped.
    pub fn from_unnormalized(dims: Dims, vectors: &[CVector], min_weight: f64) -> Result<Self> {
        let mut members = Vec::new();
        for v in vectors {
            let w = v.norm_squared();
            if w > min_weight {
                members.push((w, PureState::normalized(dims, v.clone())?));
            }
        }
        let total: f64 = members.iter().map(|m| m.0).sum();
        if (total - 1.0).abs() > TOL {
            return Err(Error::WeightSum(total));
        }
        // absorb the dropped mass so weights sum to one exactly
        members.iter_mut().for_each(|m| m.0 /= total);
        Ensemble::new(members)
    }

    pub fn members(&self) -> &[(f64, PureState)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dims(&self) -> Dims {
        self.members[0].1.dims
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.0).collect()
    }
}

/// `rho = sum_i p_i |psi_i><psi_i|`.
pub fn assemble(ensemble: &Ensemble) -> Result<DensityMatrix> {
    let d = ensemble.dims().total();
    let mut m = CMatrix::zeros(d, d);
    for (w, psi) in ensemble.members() {
        m += psi.projector() * real(*w);
    }
    DensityMatrix::new(ensemble.dims(), m)
}

/// Ensemble obtained by mixing the eigen-decomposition of `rho` with an
/// isometry `mixer` (`size x rank`): member `i` is `sum_k W_ik sqrt(eps_k) |e_k>`.
///
/// Every ensemble of at most `size` members realizing `rho` arises this way.
pub fn enumerate_decompositions(rho: &DensityMatrix, size: usize, mixer: &CMatrix) -> Result<Ensemble> {
    let x = rho.factor();
    let rank = x.ncols();
    if size < rank {
        return Err(Error::EnsembleTooSmall { size, rank });
    }
    if mixer.nrows() != size || mixer.ncols() != rank {
        return Err(Error::DimensionMismatch {
            what: "mixer shape (rows x rank)",
            expected: size * rank,
            got: mixer.nrows() * mixer.ncols(),
        });
    }
    let dev = linalg::isometry_error(mixer);
    if dev > TOL {
        return Err(Error::NonIsometricMixer(dev));
    }
    let vectors = mixed_vectors(&x, mixer);
    Ensemble::from_unnormalized(rho.dims, &vectors, 1e-15)
}

/// Rows of `W X^T`: unnormalized ensemble vectors for the factor `X` and mixer `W`.
pub(crate) fn mixed_vectors(x: &CMatrix, mixer: &CMatrix) -> Vec<CVector> {
    let rows = mixer * x.transpose();
    (0..rows.nrows()).map(|i| rows.row(i).transpose()).collect()
}

/// The mixer `[I_r; 0]` selecting the eigen-decomposition itself.
pub fn identity_mixer(size: usize, rank: usize) -> CMatrix {
    CMatrix::from_fn(size, rank, |i, j| if i == j { ONE } else { ZERO })
}

pub fn random_pure_with<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Result<PureState> {
    let dims = Dims::new(dims.0, dims.1)?;
    let v = linalg::ginibre(dims.total(), 1, rng).column(0).into_owned();
    PureState::normalized(dims, v)
}

/// Haar-random pure state, deterministic in `seed`.
pub fn random_pure(dims: Dims, seed: u64) -> Result<PureState> {
    random_pure_with(dims, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Induced-measure random state `G G^dagger / Tr` with a `D x rank` Ginibre `G`.
pub fn random_density_with<R: Rng + ?Sized>(dims: Dims, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    let dims = Dims::new(dims.0, dims.1)?;
    if rank == 0 || rank > dims.total() {
        return Err(Error::IndexOutOfRange {
            index: rank,
            max: dims.total(),
        });
    }
    let g = linalg::ginibre(dims.total(), rank, rng);
    let m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    DensityMatrix::new(dims, m / real(tr))
}

pub fn random_density(dims: Dims, rank: usize, seed: u64) -> Result<DensityMatrix> {
    random_density_with(dims, rank, &mut ChaCha8Rng::seed_from_u64(seed))
}
