//! Two-qubit closed forms: concurrence, entanglement of formation, and the
//! exact, probabilistic and approximate reachable sets, which for two qubits
//! are all of the form `{rho : min_mu2(rho) <= mu2}`.

use nalgebra::Schur;
use serde::{Deserialize, Serialize};

use crate::bipartite::{DensityMatrix, Dims};
use crate::error::{Error, Result};
use crate::linalg::{c, kron, real, CMatrix};
use crate::majorization::{binary_entropy, SchmidtVector};
use crate::TOL;

/// Source Schmidt vector `(1 - mu2, mu2)` described by its smaller entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitMu {
    pub mu2: f64,
}

impl TwoQubitMu {
    pub fn new(mu2: f64) -> Result<Self> {
        if !(-TOL..=0.5 + TOL).contains(&mu2) {
            return Err(Error::InvalidSchmidtVector(format!("mu2 = {mu2} outside [0, 1/2]")));
        }
        Ok(TwoQubitMu { mu2: mu2.clamp(0.0, 0.5) })
    }

    pub fn from_vector(mu: &SchmidtVector) -> Result<Self> {
        if mu.values()[2.min(mu.len())..].iter().any(|&v| v > TOL) {
            return Err(Error::InvalidSchmidtVector("more than two nonzero entries".into()));
        }
        Self::new(mu.values().get(1).copied().unwrap_or(0.0))
    }

    pub fn mu1(&self) -> f64 {
        1.0 - self.mu2
    }

    pub fn vector(&self) -> SchmidtVector {
        SchmidtVector::new(vec![self.mu1(), self.mu2]).expect("valid by construction")
    }
}

fn check_two_qubit(rho: &DensityMatrix) -> Result<()> {
    match rho.dims() {
        Dims(2, 2) => Ok(()),
        Dims(a, b) => Err(Error::NotTwoQubit(a, b)),
    }
}

/// `(sigma_y ⊗ sigma_y) rho^* (sigma_y ⊗ sigma_y)`.
pub fn spin_flip(rho: &DensityMatrix) -> Result<CMatrix> {
    check_two_qubit(rho)?;
    let sy = CMatrix::from_row_slice(2, 2, &[real(0.0), c(0.0, -1.0), c(0.0, 1.0), real(0.0)]);
    let yy = kron(&sy, &sy);
    Ok(&yy * rho.matrix().conjugate() * &yy)
}

/// Eigenvalues of `rho * flip(rho)` below this are rounding noise.
const SPECTRUM_ZERO: f64 = 1e-13;

/// Square roots of the eigenvalues of `rho * flip(rho)`, descending.
pub fn spin_flip_spectrum(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let product = rho.matrix() * spin_flip(rho)?;
    let (_, t) = Schur::new(product).unpack();
    let mut roots: Vec<f64> = (0..4)
        .map(|i| t[(i, i)].re)
        .map(|v| if v > SPECTRUM_ZERO { v.sqrt() } else { 0.0 })
        .collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok(roots)
}

/// Wootters concurrence `max(0, s1 - s2 - s3 - s4)`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let s = spin_flip_spectrum(rho)?;
    Ok((s[0] - s[1] - s[2] - s[3]).clamp(0.0, 1.0))
}

/// Smallest `mu2` whose reachable set contains `rho`: `(1 - sqrt(1 - C^2)) / 2`.
pub fn min_mu2(rho: &DensityMatrix) -> Result<f64> {
    Ok(min_mu2_from_concurrence(concurrence(rho)?))
}

pub fn min_mu2_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    // written as C^2 / (2 (1 + sqrt(1 - C^2))) to avoid cancellation at small C
    c * c / (2.0 * (1.0 + (1.0 - c * c).sqrt()))
}

/// Entanglement of formation in bits.
pub fn eof(rho: &DensityMatrix) -> Result<f64> {
    Ok(binary_entropy(min_mu2(rho)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitPairReport {
    #[serde(rename = "C")]
    pub concurrence: f64,
    #[serde(rename = "EoF")]
    pub eof: f64,
    pub min_mu2: f64,
}

pub fn report(rho: &DensityMatrix) -> Result<QubitPairReport> {
    let c = concurrence(rho)?;
    let m = min_mu2_from_concurrence(c);
    Ok(QubitPairReport {
        concurrence: c,
        eof: binary_entropy(m),
        min_mu2: m,
    })
}

/// Deterministic reachability of `rho` from a source with parameter `mu`.
pub fn membership_exact_2q(rho: &DensityMatrix, mu: TwoQubitMu) -> Result<bool> {
    Ok(min_mu2(rho)? <= mu.mu2 + TOL)
}

/// Reachability with probability at least `q`: every state when
/// `q <= 2 mu2`, otherwise exact reachability from `mu2 / q`.
pub fn membership_prob_2q(rho: &DensityMatrix, mu: TwoQubitMu, q: f64) -> Result<bool> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidProbability(q));
    }
    check_two_qubit(rho)?;
    if q <= 2.0 * mu.mu2 {
        return Ok(true);
    }
    membership_exact_2q(rho, TwoQubitMu::new(mu.mu2 / q)?)
}

/// Pure-state approximation fidelity `sqrt(alpha mu1) + sqrt((1 - alpha) mu2)`
/// for a target with largest Schmidt coefficient `alpha`.
pub fn approx_profile(mu: TwoQubitMu, alpha: f64) -> f64 {
    (alpha * mu.mu1()).sqrt() + ((1.0 - alpha) * mu.mu2).sqrt()
}

/// Threshold `mu1'`: states whose optimal decompositions have largest
/// coefficient at least `mu1'` are approximable to fidelity `f`.
///
/// The profile increases on `[1/2, mu1]` up to 1; the threshold is found by
/// bisection to `1e-12` and is `1/2` when the profile already reaches `f` there.
pub fn approx_threshold(mu: TwoQubitMu, f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::InvalidProbability(f));
    }
    let (mut lo, mut hi) = (0.5, mu.mu1());
    if approx_profile(mu, lo) >= f {
        return Ok(0.5);
    }
    if f >= 1.0 {
        return Ok(hi);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if approx_profile(mu, mid) >= f {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Approximability of `rho` to square-root fidelity `f`: exact reachability
/// from `mu2' = 1 - mu1'`.
pub fn membership_approx_2q(rho: &DensityMatrix, mu: TwoQubitMu, f: f64) -> Result<bool> {
    let mu1p = approx_threshold(mu, f)?;
    membership_exact_2q(rho, TwoQubitMu::new(1.0 - mu1p)?)
}
