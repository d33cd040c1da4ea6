//! Hermiticity-preserving maps and sampled positivity checks on the pure
//! states whose Schmidt vectors majorize a given `mu`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bipartite::{DensityMatrix, Dims, PureState};
use crate::error::{Error, Result};
use crate::io::{matrix_from_wire, matrix_to_wire, WireMatrix};
use crate::linalg::{self, real, CMatrix};
use crate::majorization::{majorizes, SchmidtVector};
use crate::parallel;
use crate::TOL;

/// Linear map on `n x n` matrices stored through its Choi matrix, whose
/// `(i, j)` block of size `n` is `L(E_ij)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapWire", into = "MapWire")]
pub struct HermitianPreservingMap {
    n: usize,
    choi: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct MapWire {
    dims: [usize; 2],
    matrix: WireMatrix,
}

impl TryFrom<MapWire> for HermitianPreservingMap {
    type Error = Error;
    fn try_from(w: MapWire) -> Result<Self> {
        if w.dims[0] != w.dims[1] {
            return Err(Error::InvalidDims(w.dims[0], w.dims[1]));
        }
        HermitianPreservingMap::from_choi(w.dims[0], matrix_from_wire(&w.matrix)?)
    }
}

impl From<HermitianPreservingMap> for MapWire {
    fn from(m: HermitianPreservingMap) -> Self {
        MapWire {
            dims: [m.n, m.n],
            matrix: matrix_to_wire(&m.choi),
        }
    }
}

fn unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut e = CMatrix::zeros(n, n);
    e[(i, j)] = real(1.0);
    e
}

impl HermitianPreservingMap {
    pub fn from_choi(n: usize, choi: CMatrix) -> Result<Self> {
        if choi.nrows() != n * n || choi.ncols() != n * n {
            return Err(Error::DimensionMismatch {
                what: "Choi matrix size",
                expected: n * n,
                got: choi.nrows(),
            });
        }
        let err = linalg::hermiticity_error(&choi);
        if err > TOL {
            return Err(Error::NotHermitian(err));
        }
        Ok(HermitianPreservingMap { n, choi })
    }

    /// Map given by its action on matrix units.
    pub fn from_fn(n: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        let mut choi = CMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                choi.view_mut((i * n, j * n), (n, n)).copy_from(&f(&unit(n, i, j)));
            }
        }
        Self::from_choi(n, choi)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    fn image_of_unit(&self, i: usize, j: usize) -> CMatrix {
        self.choi.view((i * self.n, j * self.n), (self.n, self.n)).into_owned()
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |x| x.clone()).expect("identity is Hermiticity preserving")
    }

    pub fn transpose(n: usize) -> Self {
        Self::from_fn(n, |x| x.transpose()).expect("transpose is Hermiticity preserving")
    }

    /// `X -> Tr(X) I / n`.
    pub fn trace_map(n: usize) -> Self {
        Self::from_fn(n, |x| linalg::identity(n) * (linalg::trace(x) / real(n as f64))).expect("valid")
    }

    /// `X -> Tr(X) I - X`.
    pub fn reduction(n: usize) -> Self {
        Self::from_fn(n, |x| linalg::identity(n) * linalg::trace(x) - x).expect("valid")
    }

    /// `X -> 2 Tr(X) I / n - X`.
    pub fn scaled_reduction(n: usize) -> Self {
        Self::from_fn(n, |x| linalg::identity(n) * (linalg::trace(x) * real(2.0 / n as f64)) - x).expect("valid")
    }

    /// The five maps used by the implication suite, on `n x n` matrices.
    pub fn standard_suite(n: usize) -> Vec<(&'static str, Self)> {
        vec![
            ("identity", Self::identity(n)),
            ("transpose", Self::transpose(n)),
            ("trace", Self::trace_map(n)),
            ("reduction", Self::reduction(n)),
            ("scaled_reduction", Self::scaled_reduction(n)),
        ]
    }
}

/// `L(X) = sum_ij X_ij L(E_ij)`.
pub fn apply_map(map: &HermitianPreservingMap, x: &CMatrix) -> Result<CMatrix> {
    let n = map.n;
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "map input size",
            expected: n,
            got: x.nrows(),
        });
    }
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if x[(i, j)].norm_sqr() > 0.0 {
                out += map.image_of_unit(i, j) * x[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `(1 ⊗ L)(X)` for an operator on `C^dA ⊗ C^n`, applied blockwise.
pub fn apply_extended_matrix(map: &HermitianPreservingMap, dims: Dims, x: &CMatrix) -> Result<CMatrix> {
    if dims.1 != map.n {
        return Err(Error::DimensionMismatch {
            what: "second party vs map dimension",
            expected: map.n,
            got: dims.1,
        });
    }
    let (da, n) = (dims.0, dims.1);
    let mut out = CMatrix::zeros(da * n, da * n);
    for a in 0..da {
        for b in 0..da {
            let block = x.view((a * n, b * n), (n, n)).into_owned();
            out.view_mut((a * n, b * n), (n, n)).copy_from(&apply_map(map, &block)?);
        }
    }
    Ok(out)
}

pub fn apply_extended(map: &HermitianPreservingMap, rho: &DensityMatrix) -> Result<CMatrix> {
    apply_extended_matrix(map, rho.dims(), rho.matrix())
}

/// Smallest eigenvalue of `(1 ⊗ L)(|psi><psi|)`.
pub fn extended_min_eigenvalue(map: &HermitianPreservingMap, psi: &PureState) -> Result<f64> {
    let image = apply_extended_matrix(map, psi.dims(), &psi.projector())?;
    Ok(linalg::min_eigenvalue(&linalg::hermitian_part(&image)))
}

fn uniform_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x.sort_by(|a, b| b.total_cmp(a));
    x
}

const REJECTION_TRIES: usize = 16;

/// Descending vector majorizing `mu`: uniform by rejection on the face of
/// the simplex spanned by the first `rank(mu)` coordinates (every majorizing
/// vector lives there); if every try fails, the last draw is moved along the
/// segment toward `(1, 0, ..., 0)` to the boundary of the majorizing set.
pub fn sample_majorizing<R: Rng + ?Sized>(mu: &[f64], rng: &mut R) -> Vec<f64> {
    let n = mu.len();
    let r = mu.iter().filter(|&&v| v > TOL).count().max(1);
    let target: Vec<f64> = mu[..r]
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let mut x = Vec::new();
    let mut accepted = false;
    for _ in 0..REJECTION_TRIES {
        x = uniform_simplex(r, rng);
        let mut acc = 0.0;
        accepted = x.iter().zip(&target).all(|(v, m)| {
            acc += v;
            acc >= m - TOL
        });
        if accepted {
            break;
        }
    }
    if !accepted {
        let mut acc = 0.0;
        let mut s = 1.0f64;
        for (v, m) in x.iter().zip(&target) {
            acc += v;
            if acc < *m && acc < 1.0 {
                s = s.min((1.0 - m) / (1.0 - acc));
            }
        }
        let s = s.clamp(0.0, 1.0);
        x.iter_mut().for_each(|v| *v *= s);
        x[0] += 1.0 - s;
    }
    x.resize(n, 0.0);
    x
}

/// Pure state on `C^n ⊗ C^n` with Schmidt vector `nu` and Haar-random local bases.
pub fn random_state_with_schmidt<R: Rng + ?Sized>(nu: &[f64], n: usize, rng: &mut R) -> Result<PureState> {
    let u = linalg::random_unitary(n, rng);
    let v = linalg::random_unitary(n, rng);
    PureState::from_schmidt(nu, &u, &v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub state: PureState,
    pub eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityStatus {
    Pass,
    Violation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub status: PositivityStatus,
    pub samples: usize,
    /// Smallest eigenvalue seen over all samples.
    pub min_eigenvalue: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl PositivityReport {
    pub fn passed(&self) -> bool {
        self.status == PositivityStatus::Pass
    }
}

const CHUNKS: usize = 16;

/// Smallest-eigenvalue search over states drawn by `draw`, split over fixed
/// chunks with independent random streams and reduced by minimum (lowest
/// chunk wins ties).
fn sampled_check<F>(map: &HermitianPreservingMap, samples: usize, seed: u64, parallel: bool, draw: F) -> Result<PositivityReport>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<PureState> + Sync,
{
    if samples == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let chunks = parallel::map_indexed(CHUNKS, parallel, |chunk| -> Result<Option<(f64, PureState)>> {
        let mut rng = parallel::stream_rng(seed, chunk as u64);
        let count = samples / CHUNKS + usize::from(chunk < samples % CHUNKS);
        let mut best: Option<(f64, PureState)> = None;
        for _ in 0..count {
            let psi = draw(&mut rng)?;
            let e = extended_min_eigenvalue(map, &psi)?;
            if best.as_ref().is_none_or(|b| e < b.0) {
                best = Some((e, psi));
            }
        }
        Ok(best)
    });
    let mut best: Option<(f64, PureState)> = None;
    for c in chunks {
        if let Some(candidate) = c? {
            if best.as_ref().is_none_or(|b| candidate.0 < b.0) {
                best = Some(candidate);
            }
        }
    }
    let (min_eigenvalue, state) = best.expect("at least one sample");
    let violated = min_eigenvalue < -TOL;
    Ok(PositivityReport {
        status: if violated {
            PositivityStatus::Violation
        } else {
            PositivityStatus::Pass
        },
        samples,
        min_eigenvalue,
        witness: violated.then_some(Witness {
            state,
            eigenvalue: min_eigenvalue,
        }),
    })
}

fn padded_mu(map: &HermitianPreservingMap, mu: &SchmidtVector) -> Result<Vec<f64>> {
    let n = map.n;
    if mu.values()[n.min(mu.len())..].iter().any(|&v| v > TOL) {
        return Err(Error::DimensionMismatch {
            what: "Schmidt rank of mu vs map dimension",
            expected: n,
            got: mu.rank(),
        });
    }
    let mut v = mu.padded(n);
    v.truncate(n);
    Ok(v)
}

/// Samples the extreme points of the set generated by `mu`: pure states on
/// `C^n ⊗ C^n` with Schmidt vector majorizing `mu` and Haar-random local bases.
pub fn mu_positivity_check_with(
    map: &HermitianPreservingMap,
    mu: &SchmidtVector,
    samples: usize,
    seed: u64,
    parallel: bool,
) -> Result<PositivityReport> {
    let m = padded_mu(map, mu)?;
    let n = map.n;
    sampled_check(map, samples, seed, parallel, |rng| {
        let nu = sample_majorizing(&m, rng);
        random_state_with_schmidt(&nu, n, rng)
    })
}

pub fn mu_positivity_check(
    map: &HermitianPreservingMap,
    mu: &SchmidtVector,
    samples: usize,
    seed: u64,
) -> Result<PositivityReport> {
    mu_positivity_check_with(map, mu, samples, seed, true)
}

/// Samples pure states of Schmidt rank at most `k` on `C^n ⊗ C^n`.
pub fn k_positivity_check(map: &HermitianPreservingMap, k: usize, samples: usize, seed: u64) -> Result<PositivityReport> {
    let n = map.n;
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { index: k, max: n });
    }
    sampled_check(map, samples, seed, true, |rng| {
        let mut nu = uniform_simplex(k, rng);
        nu.resize(n, 0.0);
        random_state_with_schmidt(&nu, n, rng)
    })
}

/// Checks the implication "positive on the `mu` set, hence `k`-positive for
/// `k = rank(mu)`" on samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicationReport {
    pub k: usize,
    pub mu_check: PositivityReport,
    pub k_check: PositivityReport,
    /// False when the `mu` check passed but a rank-`k` violation was found.
    pub consistent: bool,
}

pub fn k_positivity_implication_check(
    map: &HermitianPreservingMap,
    mu: &SchmidtVector,
    samples: usize,
    seed: u64,
) -> Result<ImplicationReport> {
    let k = mu.rank().max(1);
    let mu_check = mu_positivity_check(map, mu, samples, seed)?;
    let k_check = k_positivity_check(map, k, samples, seed.wrapping_add(1))?;
    let consistent = !(mu_check.passed() && !k_check.passed());
    Ok(ImplicationReport {
        k,
        mu_check,
        k_check,
        consistent,
    })
}

/// Recomputes a witness from scratch: negative eigenvalue and a Schmidt vector majorizing `mu`.
pub fn witness_is_valid(map: &HermitianPreservingMap, mu: &SchmidtVector, witness: &Witness) -> Result<bool> {
    let e = extended_min_eigenvalue(map, &witness.state)?;
    Ok(e < -TOL && majorizes(&witness.state.schmidt_vector()?, mu))
}
