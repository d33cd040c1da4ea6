//! LOCC protocol certificates and their executor.
//!
//! A [`Protocol`] is a list of one-party measurement steps. Each step lists
//! Kraus operators acting on one party, and per outcome a pair of local
//! correction unitaries applied afterwards on both sides. The executor
//! enumerates every outcome branch exhaustively, or samples trajectories.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bipartite::{Dims, Party, PureState};
use crate::error::{Error, Result};
use crate::io::cmatrix;
use crate::linalg::{self, CMatrix};
use crate::parallel;
use crate::TOL;

/// Branches with probability at or below this are recorded but not continued.
pub const BRANCH_CUTOFF: f64 = 1e-15;

/// Outcome-conditioned local unitaries `U ⊗ V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    #[serde(rename = "U", with = "cmatrix")]
    pub u: CMatrix,
    #[serde(rename = "V", with = "cmatrix")]
    pub v: CMatrix,
}

impl Correction {
    pub fn identity(dims: Dims) -> Self {
        Correction {
            u: linalg::identity(dims.0),
            v: linalg::identity(dims.1),
        }
    }
}

mod cmatrix_list {
    use super::*;
    use crate::io::{matrix_from_wire, matrix_to_wire, WireMatrix};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(matrix_to_wire).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMatrix>, D::Error> {
        Vec::<WireMatrix>::deserialize(d)?
            .iter()
            .map(|w| matrix_from_wire(w).map_err(serde::de::Error::custom))
            .collect()
    }
}

mod optional_cmatrix {
    use super::*;
    use crate::io::{matrix_from_wire, matrix_to_wire, WireMatrix};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<CMatrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(matrix_to_wire).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<CMatrix>, D::Error> {
        Option::<WireMatrix>::deserialize(d)?
            .map(|w| matrix_from_wire(&w).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// One measurement by a single party followed by outcome-dependent corrections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalProtocolStep {
    pub party: Party,
    #[serde(with = "cmatrix_list")]
    pub kraus: Vec<CMatrix>,
    pub corrections: Vec<Correction>,
    pub labels: Vec<String>,
    /// Unitary whose columns diagonalize every Kraus operator, when the step
    /// certifies a commuting (one-way, single measurement) operation.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "optional_cmatrix")]
    pub diagonal_basis: Option<CMatrix>,
}

impl LocalProtocolStep {
    pub fn new(party: Party, kraus: Vec<CMatrix>, corrections: Vec<Correction>, labels: Vec<String>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::Domain("measurement step without outcomes".into()));
        }
        if corrections.len() != kraus.len() || labels.len() != kraus.len() {
            return Err(Error::DimensionMismatch {
                what: "corrections/labels per Kraus operator",
                expected: kraus.len(),
                got: corrections.len().min(labels.len()),
            });
        }
        let d = kraus[0].nrows();
        if let Some(k) = kraus.iter().find(|k| k.nrows() != d || k.ncols() != d) {
            return Err(Error::DimensionMismatch {
                what: "Kraus operator size",
                expected: d,
                got: k.nrows().max(k.ncols()),
            });
        }
        Ok(LocalProtocolStep {
            party,
            kraus,
            corrections,
            labels,
            diagonal_basis: None,
        })
    }

    /// Single-outcome step applying local unitaries only.
    pub fn unitary(dims: Dims, correction: Correction, label: &str) -> Self {
        LocalProtocolStep {
            party: Party::A,
            kraus: vec![linalg::identity(dims.0)],
            corrections: vec![correction],
            labels: vec![label.to_string()],
            diagonal_basis: None,
        }
    }

    pub fn with_diagonal_basis(mut self, basis: CMatrix) -> Self {
        self.diagonal_basis = Some(basis);
        self
    }

    pub fn outcomes(&self) -> usize {
        self.kraus.len()
    }

    /// Largest entry of `sum_i K_i^dagger K_i - I`.
    pub fn completeness_error(&self) -> f64 {
        let d = self.kraus[0].nrows();
        let mut sum = CMatrix::zeros(d, d);
        for k in &self.kraus {
            sum += k.adjoint() * k;
        }
        linalg::max_abs(&(sum - linalg::identity(d)))
    }

    pub fn check_complete(&self) -> Result<()> {
        let err = self.completeness_error();
        if err > TOL {
            return Err(Error::IncompleteKraus(err));
        }
        Ok(())
    }

    /// Largest off-diagonal entry of `B^dagger K B` over all Kraus operators, for the stated basis.
    pub fn diagonality_error(&self) -> Option<f64> {
        let basis = self.diagonal_basis.as_ref()?;
        let mut worst = 0.0f64;
        for k in &self.kraus {
            let d = basis.adjoint() * k * basis;
            for i in 0..d.nrows() {
                for j in 0..d.ncols() {
                    if i != j {
                        worst = worst.max(d[(i, j)].norm());
                    }
                }
            }
        }
        Some(worst)
    }

    /// Largest entry of any commutator `[K_i, K_j]`.
    pub fn commutator_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.kraus.iter().enumerate() {
            for b in &self.kraus[i + 1..] {
                worst = worst.max(linalg::max_abs(&(a * b - b * a)));
            }
        }
        worst
    }

    fn check_dims(&self, dims: Dims) -> Result<()> {
        let d = dims.party(self.party);
        if self.kraus[0].nrows() != d {
            return Err(Error::DimensionMismatch {
                what: "Kraus operator vs party dimension",
                expected: d,
                got: self.kraus[0].nrows(),
            });
        }
        for c in &self.corrections {
            if c.u.nrows() != dims.0 || c.v.nrows() != dims.1 {
                return Err(Error::DimensionMismatch {
                    what: "correction unitary size",
                    expected: dims.0,
                    got: c.u.nrows(),
                });
            }
        }
        Ok(())
    }

    /// Every outcome: probability and (for non-negligible branches) the
    /// normalized, corrected post-measurement state.
    pub fn branches(&self, state: &PureState) -> Result<Vec<(f64, Option<PureState>)>> {
        self.check_dims(state.dims())?;
        let (unit, _) = state.normalize();
        self.kraus
            .iter()
            .zip(&self.corrections)
            .map(|(k, corr)| {
                let v = unit.apply_on(self.party, k);
                let p = v.norm_squared();
                if p <= BRANCH_CUTOFF {
                    return Ok((p, None));
                }
                let measured = PureState::normalized(unit.dims(), v)?;
                let corrected = measured.apply_local(&corr.u, &corr.v);
                Ok((p, Some(PureState::normalized(unit.dims(), corrected)?)))
            })
            .collect()
    }
}

/// What a protocol claims to produce. `label: None` covers every branch;
/// otherwise the branches whose last outcome carries `label`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclaredOutcome {
    pub label: Option<String>,
    pub probability: f64,
    pub state: PureState,
}

/// LOCC certificate: steps plus the declared outcome map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub source: PureState,
    pub steps: Vec<LocalProtocolStep>,
    pub declared: Vec<DeclaredOutcome>,
}

impl Protocol {
    /// Appends `other`'s steps and adopts its declared outcomes.
    pub fn then(mut self, other: Protocol) -> Protocol {
        self.steps.extend(other.steps);
        self.declared = other.declared;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeNode {
    pub label: Option<String>,
    /// Probability of reaching this node from the root.
    pub probability: f64,
    /// Absent for branches whose probability is below [`BRANCH_CUTOFF`].
    pub state: Option<PureState>,
    pub children: Vec<OutcomeNode>,
}

/// Exhaustive branch enumeration of a protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTree {
    pub root: OutcomeNode,
}

/// A root-to-leaf path of the outcome tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub labels: Vec<String>,
    pub probability: f64,
    pub state: Option<PureState>,
}

impl OutcomeTree {
    pub fn leaves(&self) -> Vec<Branch> {
        fn walk(node: &OutcomeNode, path: &mut Vec<String>, out: &mut Vec<Branch>) {
            if let Some(l) = &node.label {
                path.push(l.clone());
            }
            if node.children.is_empty() {
                out.push(Branch {
                    labels: path.clone(),
                    probability: node.probability,
                    state: node.state.clone(),
                });
            } else {
                for child in &node.children {
                    walk(child, path, out);
                }
            }
            if node.label.is_some() {
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    pub fn total_probability(&self) -> f64 {
        self.leaves().iter().map(|b| b.probability).sum()
    }
}

/// Runs `steps` on `source`, enumerating every branch.
pub fn execute_steps(steps: &[LocalProtocolStep], source: &PureState) -> Result<OutcomeTree> {
    fn grow(node: &mut OutcomeNode, steps: &[LocalProtocolStep]) -> Result<()> {
        let Some((step, rest)) = steps.split_first() else {
            return Ok(());
        };
        let Some(state) = node.state.as_ref() else {
            return Ok(());
        };
        for ((p, post), label) in step.branches(state)?.into_iter().zip(&step.labels) {
            let mut child = OutcomeNode {
                label: Some(label.clone()),
                probability: node.probability * p,
                state: post,
                children: Vec::new(),
            };
            grow(&mut child, rest)?;
            node.children.push(child);
        }
        Ok(())
    }
    for step in steps {
        step.check_complete()?;
    }
    let (unit, _) = source.normalize();
    let mut root = OutcomeNode {
        label: None,
        probability: 1.0,
        state: Some(unit),
        children: Vec::new(),
    };
    grow(&mut root, steps)?;
    Ok(OutcomeTree { root })
}

pub fn execute(protocol: &Protocol, source: &PureState) -> Result<OutcomeTree> {
    execute_steps(&protocol.steps, source)
}

/// One sampled run: outcome indices, labels and the final state.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub outcomes: Vec<usize>,
    pub labels: Vec<String>,
    pub state: PureState,
}

pub fn sample_with<R: Rng + ?Sized>(protocol: &Protocol, source: &PureState, rng: &mut R) -> Result<Trajectory> {
    let (mut state, _) = source.normalize();
    let mut outcomes = Vec::with_capacity(protocol.steps.len());
    let mut labels = Vec::with_capacity(protocol.steps.len());
    for step in &protocol.steps {
        let branches = step.branches(&state)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, (p, _)) in branches.iter().enumerate() {
            acc += p;
            if u < acc && branches[i].1.is_some() {
                chosen = Some(i);
                break;
            }
        }
        // round-off can leave u just above the accumulated total
        let i = chosen.unwrap_or_else(|| branches.iter().rposition(|b| b.1.is_some()).unwrap_or(0));
        state = branches[i].1.clone().ok_or(Error::IncompleteKraus(1.0 - acc))?;
        outcomes.push(i);
        labels.push(step.labels[i].clone());
    }
    Ok(Trajectory { outcomes, labels, state })
}

/// A single trajectory, deterministic in `seed`.
pub fn sample(protocol: &Protocol, source: &PureState, seed: u64) -> Result<Trajectory> {
    sample_with(protocol, source, &mut parallel::stream_rng(seed, 0))
}

/// Number of samples whose final label equals each label of the last step.
///
/// Samples are split over fixed chunks with their own random streams and the
/// counts are summed, so results do not depend on `parallel`.
pub fn sample_final_counts(
    protocol: &Protocol,
    source: &PureState,
    samples: usize,
    seed: u64,
    parallel: bool,
) -> Result<Vec<(String, usize)>> {
    const CHUNKS: usize = 64;
    let labels: Vec<String> = protocol.steps.last().map(|s| s.labels.clone()).unwrap_or_default();
    let per_chunk = parallel::map_indexed(CHUNKS, parallel, |chunk| -> Result<Vec<usize>> {
        let mut rng = parallel::stream_rng(seed, chunk as u64 + 1);
        let n = samples / CHUNKS + usize::from(chunk < samples % CHUNKS);
        let mut counts = vec![0usize; labels.len()];
        for _ in 0..n {
            let t = sample_with(protocol, source, &mut rng)?;
            if let Some(&last) = t.outcomes.last() {
                counts[last] += 1;
            }
        }
        Ok(counts)
    });
    let mut total = vec![0usize; labels.len()];
    for counts in per_chunk {
        for (t, c) in total.iter_mut().zip(counts?) {
            *t += c;
        }
    }
    Ok(labels.into_iter().zip(total).collect())
}

/// Check of one declared outcome against the exhaustive execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclaredCheck {
    pub label: Option<String>,
    pub declared_probability: f64,
    pub observed_probability: f64,
    /// Smallest overlap with the declared state over matching branches.
    pub min_overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub total_probability: f64,
    pub max_completeness_error: f64,
    pub checks: Vec<DeclaredCheck>,
}

impl VerificationReport {
    pub fn passed(&self, probability_tol: f64, overlap_tol: f64) -> bool {
        (self.total_probability - 1.0).abs() <= probability_tol
            && self.max_completeness_error <= TOL
            && self.checks.iter().all(|c| {
                (c.declared_probability - c.observed_probability).abs() <= probability_tol
                    && c.min_overlap >= 1.0 - overlap_tol
            })
    }
}

/// Executes the protocol on its declared source and compares with the declared outcomes.
pub fn verify(protocol: &Protocol) -> Result<VerificationReport> {
    let tree = execute(protocol, &protocol.source)?;
    let leaves = tree.leaves();
    let checks = protocol
        .declared
        .iter()
        .map(|d| {
            let matching: Vec<&Branch> = leaves
                .iter()
                .filter(|b| match &d.label {
                    None => true,
                    Some(l) => b.labels.last() == Some(l),
                })
                .collect();
            let observed: f64 = matching.iter().map(|b| b.probability).sum();
            let min_overlap = matching
                .iter()
                .filter_map(|b| b.state.as_ref())
                .map(|s| s.overlap(&d.state))
                .fold(1.0f64, f64::min);
            DeclaredCheck {
                label: d.label.clone(),
                declared_probability: d.probability,
                observed_probability: observed,
                min_overlap,
            }
        })
        .collect();
    Ok(VerificationReport {
        total_probability: tree.total_probability(),
        max_completeness_error: protocol
            .steps
            .iter()
            .map(LocalProtocolStep::completeness_error)
            .fold(0.0, f64::max),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, real, ZERO};

    fn bell() -> PureState {
        let s = 0.5f64.sqrt();
        PureState::new(Dims(2, 2), vec![real(s), ZERO, ZERO, real(s)]).unwrap()
    }

    fn dephasing(dims: Dims) -> LocalProtocolStep {
        LocalProtocolStep::new(
            Party::A,
            vec![diag_real(&[1.0, 0.0]), diag_real(&[0.0, 1.0])],
            vec![Correction::identity(dims), Correction::identity(dims)],
            vec!["0".into(), "1".into()],
        )
        .unwrap()
    }

    #[test]
    fn empty_protocol_returns_source() {
        let p = Protocol {
            source: bell(),
            steps: vec![],
            declared: vec![DeclaredOutcome {
                label: None,
                probability: 1.0,
                state: bell(),
            }],
        };
        let leaves = execute(&p, &bell()).unwrap().leaves();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].probability, 1.0);
        assert!(verify(&p).unwrap().passed(1e-12, 1e-12));
    }

    #[test]
    fn projective_step_branches() {
        let step = dephasing(Dims(2, 2));
        let b = step.branches(&bell()).unwrap();
        assert!((b[0].0 - 0.5).abs() < 1e-15);
        let s0 = b[0].1.as_ref().unwrap();
        assert!(s0.overlap(&PureState::basis(Dims(2, 2), 0, 0).unwrap()) > 1.0 - 1e-15);
        assert!(step.commutator_error() < 1e-15);
    }

    #[test]
    fn incomplete_steps_are_rejected() {
        let mut step = dephasing(Dims(2, 2));
        step.kraus[1] = diag_real(&[0.0, 0.5]);
        assert!(matches!(execute_steps(&[step], &bell()), Err(Error::IncompleteKraus(_))));
    }

    #[test]
    fn wrong_dimensions_are_rejected() {
        let step = dephasing(Dims(2, 2));
        let psi = PureState::basis(Dims(3, 2), 0, 0).unwrap();
        assert!(matches!(step.branches(&psi), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sampling_is_seeded_and_matches_branches() {
        let p = Protocol {
            source: bell(),
            steps: vec![dephasing(Dims(2, 2))],
            declared: vec![],
        };
        assert_eq!(sample(&p, &bell(), 3).unwrap(), sample(&p, &bell(), 3).unwrap());
        let counts = sample_final_counts(&p, &bell(), 20_000, 9, true).unwrap();
        assert_eq!(counts, sample_final_counts(&p, &bell(), 20_000, 9, false).unwrap());
        let frac = counts[0].1 as f64 / 20_000.0;
        // 3 binomial sigma at n = 2e4
        assert!((frac - 0.5).abs() < 3.0 * (0.25f64 / 20_000.0).sqrt());
    }

    #[test]
    fn step_json_uses_documented_keys() {
        let json = serde_json::to_value(dephasing(Dims(2, 2))).unwrap();
        assert_eq!(json["party"], "A");
        assert!(json["corrections"][0]["U"].is_array());
        assert_eq!(json["labels"][1], "1");
        let back: LocalProtocolStep = serde_json::from_value(json).unwrap();
        assert_eq!(back, dephasing(Dims(2, 2)));
    }
}
