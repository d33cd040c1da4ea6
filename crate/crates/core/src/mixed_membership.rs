//! Mixed-state targets: membership in the sets reachable from a pure source
//! (exactly, with probability `p`, or approximately), Vidal-type tail
//! monotones, and the approximation fidelity `f_max`.
//!
//! All searches are semi-decisions: a `member` verdict carries a certificate
//! that is re-validated from scratch, while `not_found` only reports the best
//! violation seen.

use serde::{Deserialize, Serialize};

use crate::bipartite::{assemble, schmidt_decompose, sqrt_fidelity, DensityMatrix, Ensemble, PureState};
use crate::error::{Error, Result};
use crate::linalg::{real, CMatrix};
use crate::majorization::{
    average_schmidt_vector, deficit_of, majorization_deficit, majorizes, tail_sums, weakly_supermajorized,
    SchmidtVector,
};
use crate::pure_protocols::block_intermediate;
use crate::search::{search, Landscape, Objective, SearchConfig, SearchOutcome, MIN_MEMBER_WEIGHT};
use crate::TOL;

/// Softmax temperature smoothing the max over prefix (or tail) indices.
const SMOOTHING: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipStatus {
    Member,
    NotFound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub status: MembershipStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Ensemble>,
    /// Best violation found, clipped at zero; zero for members.
    pub violation: f64,
    pub evaluations: u64,
}

impl MembershipVerdict {
    pub fn is_member(&self) -> bool {
        self.status == MembershipStatus::Member
    }

    fn member(certificate: Ensemble, evaluations: u64) -> Self {
        MembershipVerdict {
            status: MembershipStatus::Member,
            certificate: Some(certificate),
            violation: 0.0,
            evaluations,
        }
    }

    fn not_found(violation: f64, evaluations: u64) -> Self {
        MembershipVerdict {
            status: MembershipStatus::NotFound,
            certificate: None,
            violation: violation.max(0.0),
            evaluations,
        }
    }
}

fn soft_max(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + SMOOTHING * values.map(|v| ((v - top) / SMOOTHING).exp()).sum::<f64>().ln()
}

fn normalized_sum(sum: &[f64]) -> Vec<f64> {
    let total: f64 = sum.iter().sum();
    sum.iter().map(|x| x / total).collect()
}

fn padded(mu: &SchmidtVector, n: usize) -> Vec<f64> {
    mu.padded(n)
}

/// Prefix deficits of `mu` over the ensemble average.
struct SplusObjective {
    mu: Vec<f64>,
}

impl SplusObjective {
    fn deficits(&self, sum: &[f64]) -> impl Iterator<Item = f64> + Clone + '_ {
        let avg = normalized_sum(sum);
        let n = self.mu.len();
        let mut pa = 0.0;
        let mut pm = 0.0;
        let diffs: Vec<f64> = (0..n.saturating_sub(1))
            .map(|k| {
                pa += avg.get(k).copied().unwrap_or(0.0);
                pm += self.mu[k];
                pm - pa
            })
            .collect();
        diffs.into_iter()
    }
}

impl Objective for SplusObjective {
    fn merit(&self, _members: &[Vec<f64>], sum: &[f64]) -> f64 {
        if self.mu.len() < 2 {
            return 0.0;
        }
        soft_max(self.deficits(sum))
    }

    fn solved(&self, _members: &[Vec<f64>], sum: &[f64]) -> bool {
        self.deficits(sum).fold(0.0, f64::max) <= TOL
    }
}

/// Per-member prefix deficits: every member must majorize `mu` on its own.
struct HullObjective {
    mu: Vec<f64>,
}

impl HullObjective {
    fn member_deficits<'a>(&'a self, members: &'a [Vec<f64>]) -> impl Iterator<Item = (f64, f64)> + 'a {
        members.iter().filter_map(move |w| {
            let p: f64 = w.iter().sum();
            if p <= MIN_MEMBER_WEIGHT {
                return None;
            }
            let mut lambda: Vec<f64> = w.iter().map(|x| x / p).collect();
            lambda.resize(self.mu.len().max(lambda.len()), 0.0);
            let mut mu = self.mu.clone();
            mu.resize(lambda.len(), 0.0);
            Some((p, deficit_of(&lambda, &mu).0.max(0.0)))
        })
    }
}

impl Objective for HullObjective {
    fn merit(&self, members: &[Vec<f64>], _sum: &[f64]) -> f64 {
        let (worst, mass) = self
            .member_deficits(members)
            .fold((0.0f64, 0.0), |(w, m), (p, d)| (w.max(d), m + p * d));
        worst + mass
    }

    fn solved(&self, members: &[Vec<f64>], _sum: &[f64]) -> bool {
        self.member_deficits(members).all(|(_, d)| d <= TOL)
    }
}

/// Tail violations of `p * average` against `mu`.
struct ProbObjective {
    mu_tails: Vec<f64>,
    mu: SchmidtVector,
    p: f64,
}

impl ProbObjective {
    fn violations(&self, sum: &[f64]) -> impl Iterator<Item = f64> + Clone + '_ {
        let mut avg = normalized_sum(sum);
        avg.resize(self.mu_tails.len() - 1, 0.0);
        let tails = tail_sums(&avg);
        (1..self.mu_tails.len() - 1)
            .map(|l| self.p * tails[l] - self.mu_tails[l])
            .collect::<Vec<_>>()
            .into_iter()
    }
}

impl Objective for ProbObjective {
    fn merit(&self, _members: &[Vec<f64>], sum: &[f64]) -> f64 {
        if self.mu_tails.len() <= 2 {
            return 0.0;
        }
        soft_max(self.violations(sum))
    }

    fn solved(&self, _members: &[Vec<f64>], sum: &[f64]) -> bool {
        SchmidtVector::normalized(sum.to_vec()).is_ok_and(|avg| weakly_supermajorized(self.p, &avg, &self.mu))
    }
}

/// Average tail sum `E_l` of the decomposition.
struct TailObjective {
    l: usize,
}

impl Objective for TailObjective {
    fn merit(&self, _members: &[Vec<f64>], sum: &[f64]) -> f64 {
        let total: f64 = sum.iter().sum();
        sum[self.l - 1..].iter().sum::<f64>() / total
    }
}

/// Negated optimal overlap of the precursor with states majorizing `mu`.
struct FidelityObjective {
    mu: Vec<f64>,
}

impl Objective for FidelityObjective {
    fn merit(&self, _members: &[Vec<f64>], sum: &[f64]) -> f64 {
        -block_intermediate(&self.mu, &normalized_sum(sum)).fidelity
    }

    fn solved(&self, _members: &[Vec<f64>], sum: &[f64]) -> bool {
        let avg = normalized_sum(sum);
        let mut mu = self.mu.clone();
        mu.resize(avg.len().max(mu.len()), 0.0);
        let mut a = avg;
        a.resize(mu.len(), 0.0);
        deficit_of(&a, &mu).0 <= TOL
    }
}

fn working_len(rho: &DensityMatrix, mu: &SchmidtVector) -> usize {
    rho.dims().schmidt_len().max(mu.len())
}

/// Best prefix deficit of `mu` over the average of `ensemble`.
fn splus_violation(ensemble: &Ensemble, mu: &SchmidtVector) -> Result<f64> {
    Ok(majorization_deficit(&average_schmidt_vector(ensemble)?, mu).0.max(0.0))
}

/// Whether `rho` lies in the set reachable from a pure state with Schmidt
/// vector `mu` by a single commuting measurement: some decomposition has an
/// average Schmidt vector majorizing `mu`.
pub fn membership_splus(rho: &DensityMatrix, mu: &SchmidtVector, cfg: &SearchConfig) -> Result<MembershipVerdict> {
    let land = Landscape::new(rho);
    let obj = SplusObjective {
        mu: padded(mu, working_len(rho, mu)),
    };
    let out = search(&land, &obj, cfg, true)?;
    let cert = land.ensemble(&out.best.mixer)?;
    if majorizes(&average_schmidt_vector(&cert)?, mu) {
        return Ok(MembershipVerdict::member(cert, out.evaluations));
    }
    Ok(MembershipVerdict::not_found(splus_violation(&cert, mu)?, out.evaluations))
}

/// Whether `rho` is a mixture of pure states that each majorize `mu`.
pub fn membership_hull(rho: &DensityMatrix, mu: &SchmidtVector, cfg: &SearchConfig) -> Result<MembershipVerdict> {
    let land = Landscape::new(rho);
    let obj = HullObjective {
        mu: padded(mu, working_len(rho, mu)),
    };
    let out = search(&land, &obj, cfg, true)?;
    let cert = land.ensemble(&out.best.mixer)?;
    let worst = cert
        .members()
        .iter()
        .map(|(_, s)| Ok(majorization_deficit(&s.schmidt_vector()?, mu).0))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if worst <= TOL {
        return Ok(MembershipVerdict::member(cert, out.evaluations));
    }
    Ok(MembershipVerdict::not_found(worst, out.evaluations))
}

/// Certifies that the worked mixture `(1 - eps)|00><00| + eps |psi12><psi12|`,
/// `psi12 = (|11> + |22>)/sqrt2`, is not a mixture of pure states each
/// majorizing `mu = (1 - eps/2, eps/2, 0)`.
///
/// Every pure state in the support of `rho` is `a|00> + b|psi12>`, with
/// Schmidt vector the sorted `(r, s/2, s/2)`, `r = |a|^2`, `s = |b|^2 = 1 - r`.
/// The function determines the admissible `s` (those whose Schmidt vector
/// majorizes `mu`) and checks that mixing admissible elements cannot give the
/// `psi12` weight `<psi12|rho|psi12> = eps`.
pub fn example1_structural_check(epsilon: f64) -> Result<bool> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let mu = [1.0 - epsilon / 2.0, epsilon / 2.0, 0.0];
    // Largest two entries of the sorted vector sum to max(1 - s/2, s); the
    // second prefix constraint needs this to reach mu_1 + mu_2 = 1, which
    // forces s = 0 or s = 1.
    let second_prefix = mu[0] + mu[1];
    let mut admissible = Vec::new();
    for s in [0.0f64, 1.0] {
        let r = 1.0 - s;
        let mut lambda = [r, s / 2.0, s / 2.0];
        lambda.sort_by(|a, b| b.total_cmp(a));
        let ok = lambda[0] >= mu[0] - TOL && lambda[0] + lambda[1] >= second_prefix - TOL;
        if ok {
            admissible.push(s);
        }
    }
    // any mixture of admissible elements has psi12 weight in the hull of `admissible`
    let lo = admissible.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = admissible.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(admissible.is_empty() || epsilon < lo || epsilon > hi)
}

/// Whether `rho` can be reached with probability at least `p`: some
/// decomposition's average, scaled by `p`, weakly supermajorizes `mu`.
pub fn membership_prob(rho: &DensityMatrix, mu: &SchmidtVector, p: f64, cfg: &SearchConfig) -> Result<MembershipVerdict> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let land = Landscape::new(rho);
    let n = working_len(rho, mu);
    let obj = ProbObjective {
        mu_tails: tail_sums(&padded(mu, n)),
        mu: mu.clone(),
        p,
    };
    let out = search(&land, &obj, cfg, true)?;
    let cert = land.ensemble(&out.best.mixer)?;
    let avg = average_schmidt_vector(&cert)?;
    if weakly_supermajorized(p, &avg, mu) {
        return Ok(MembershipVerdict::member(cert, out.evaluations));
    }
    let ta = tail_sums(&avg.padded(n));
    let tm = tail_sums(&padded(mu, n));
    let violation = (1..n).map(|l| p * ta[l] - tm[l]).fold(0.0, f64::max);
    Ok(MembershipVerdict::not_found(violation, out.evaluations))
}

/// Approximation certificate: a decomposition of `rho` and a paired
/// subnormalized family whose mixture lies in the reachable set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub f_max: f64,
    /// Decomposition `{p_i, psi_i}` of `rho`.
    pub certificate: Ensemble,
    /// Approximating ensemble `{q_i, psi'_i}`, index-aligned with `certificate`.
    pub approximation: Ensemble,
    pub evaluations: u64,
}

/// Builds the approximating ensemble for a decomposition: member `i` is
/// `sum_k sqrt(nu_k p_i lambda_ik / lambdabar_k) a_ik b_ik`, where `nu` is the
/// optimal vector majorizing `mu` for the average `lambdabar`. Its average
/// Schmidt vector is `nu` and the summed overlaps equal the optimal fidelity.
pub fn approximating_ensemble(decomposition: &Ensemble, mu: &SchmidtVector) -> Result<(f64, Ensemble)> {
    let avg = average_schmidt_vector(decomposition)?;
    let n = avg.len().max(mu.len());
    let lbar = avg.padded(n);
    let inter = block_intermediate(&mu.padded(n), &lbar);
    let mut members = Vec::with_capacity(decomposition.len());
    for (p, psi) in decomposition.members() {
        let dec = schmidt_decompose(psi)?;
        let lambda = dec.coefficients.values();
        let coeffs: Vec<f64> = (0..lambda.len())
            .map(|k| {
                if lbar[k] > 0.0 {
                    inter.nu[k] * p * lambda[k] / lbar[k]
                } else {
                    0.0
                }
            })
            .collect();
        let weight: f64 = coeffs.iter().sum();
        if weight <= 0.0 {
            members.push((0.0, psi.clone()));
            continue;
        }
        let unit: Vec<f64> = coeffs.iter().map(|x| x / weight).collect();
        members.push((weight, PureState::from_schmidt(&unit, &dec.basis_a, &dec.basis_b)?));
    }
    let total: f64 = members.iter().map(|m| m.0).sum();
    let members = members.into_iter().map(|(w, s)| (w / total, s)).collect();
    Ok((inter.fidelity, Ensemble::new(members)?))
}

fn fidelity_search(rho: &DensityMatrix, mu: &SchmidtVector, cfg: &SearchConfig) -> Result<(Landscape, SearchOutcome)> {
    let land = Landscape::new(rho);
    let obj = FidelityObjective {
        mu: padded(mu, working_len(rho, mu)),
    };
    let out = search(&land, &obj, cfg, true)?;
    Ok((land, out))
}

/// Largest achievable approximation fidelity over decompositions of `rho`.
pub fn approx_fidelity_fmax(rho: &DensityMatrix, mu: &SchmidtVector, cfg: &SearchConfig) -> Result<FidelityEstimate> {
    let (land, out) = fidelity_search(rho, mu, cfg)?;
    let certificate = land.ensemble(&out.best.mixer)?;
    let (f_max, approximation) = approximating_ensemble(&certificate, mu)?;
    Ok(FidelityEstimate {
        f_max,
        certificate,
        approximation,
        evaluations: out.evaluations,
    })
}

/// Lower bound on the square-root fidelity between `rho` and the reachable
/// set: the best `F(rho, sigma)` over the approximating mixtures of every restart.
pub fn fmax_lower_bound(rho: &DensityMatrix, mu: &SchmidtVector, cfg: &SearchConfig) -> Result<f64> {
    let (land, out) = fidelity_search(rho, mu, cfg)?;
    let mut best = 0.0f64;
    for restart in &out.restarts {
        let decomposition = land.ensemble(&restart.mixer)?;
        let (_, approximation) = approximating_ensemble(&decomposition, mu)?;
        best = best.max(sqrt_fidelity(rho, &assemble(&approximation)?)?);
    }
    Ok(best)
}

/// Convex-roof estimate of a tail monotone with its minimizing decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneEstimate {
    pub l: usize,
    pub value: f64,
    pub certificate: Ensemble,
    pub evaluations: u64,
}

/// `E_l(rho) = min over decompositions of sum_i p_i E_l(psi_i)` (an upper
/// bound from search; exact for `l = 1` and `l = n + 1`).
pub fn vidal_monotone(rho: &DensityMatrix, l: usize, cfg: &SearchConfig) -> Result<MonotoneEstimate> {
    let n = rho.dims().schmidt_len();
    if l == 0 || l > n + 1 {
        return Err(Error::IndexOutOfRange { index: l, max: n + 1 });
    }
    let land = Landscape::new(rho);
    if l == 1 || l == n + 1 {
        let certificate = land.ensemble(&crate::bipartite::identity_mixer(land.rank, land.rank))?;
        return Ok(MonotoneEstimate {
            l,
            value: if l == 1 { 1.0 } else { 0.0 },
            certificate,
            evaluations: 0,
        });
    }
    let out = search(&land, &TailObjective { l }, cfg, false)?;
    let certificate = land.ensemble(&out.best.mixer)?;
    let value = certificate
        .members()
        .iter()
        .map(|(p, s)| Ok(p * s.schmidt_vector()?.values()[l - 1..].iter().sum::<f64>()))
        .sum::<Result<f64>>()?;
    Ok(MonotoneEstimate {
        l,
        value: value.clamp(0.0, 1.0),
        certificate,
        evaluations: out.evaluations,
    })
}

/// `f_max` for a maximally entangled source of rank `m`: `sqrt(1 - E_{m+1}(rho))`.
pub fn fmax_from_maxent(rho: &DensityMatrix, m: usize, cfg: &SearchConfig) -> Result<f64> {
    let n = rho.dims().schmidt_len();
    if m == 0 || m > n {
        return Err(Error::IndexOutOfRange { index: m, max: n });
    }
    Ok((1.0 - vidal_monotone(rho, m + 1, cfg)?.value).max(0.0).sqrt())
}

/// Strict upper bound `p / p1` on the second-stage probability of a
/// two-stage conversion whose first stage succeeds with `p1`.
pub fn probability_bound(p: f64, p1: f64) -> Result<f64> {
    if !(p1 > 0.0 && p1 <= 1.0) {
        return Err(Error::InvalidProbability(p1));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(p / p1)
}

/// `sum_i |<psi_i|psi'_i>|` for index-aligned subnormalized families, with
/// the shorter list padded by zero vectors.
pub fn paired_overlap(first: &[(f64, PureState)], second: &[(f64, PureState)]) -> f64 {
    first
        .iter()
        .zip(second)
        .map(|((p, a), (q, b))| (p * q).sqrt() * a.overlap(b))
        .sum()
}

/// Weighted entanglement entropy `sum_i p_i H(lambda_i)` of an ensemble.
pub fn average_entropy(ensemble: &Ensemble) -> Result<f64> {
    ensemble
        .members()
        .iter()
        .map(|(p, s)| Ok(p * crate::majorization::shannon_entropy(&s.schmidt_vector()?)))
        .sum()
}

/// Mixture of two density matrices on the same space.
pub fn mix(rho: &DensityMatrix, sigma: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let m: CMatrix = rho.matrix() * real(t) + sigma.matrix() * real(1.0 - t);
    DensityMatrix::new(rho.dims(), m)
}
