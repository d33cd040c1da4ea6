//! Pure-to-ensemble conversions: an exact step to the precursor state, then
//! one commuting measurement whose branches are the ensemble members.

use crate::bipartite::{schmidt_decompose, Ensemble, Party, PureState};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::majorization::{average_schmidt_vector, majorization_deficit, majorizes, SchmidtVector};
use crate::protocol::{Correction, DeclaredOutcome, LocalProtocolStep, Protocol};
use crate::pure_protocols::synthesize_exact;
use crate::TOL;

/// Whether a source with Schmidt vector `mu` can be converted into `ensemble`.
pub fn ensemble_reachable(mu: &SchmidtVector, ensemble: &Ensemble) -> Result<bool> {
    Ok(majorizes(&average_schmidt_vector(ensemble)?, mu))
}

/// Standard-form state whose Schmidt vector is the ensemble's average.
pub fn precursor_state(ensemble: &Ensemble) -> Result<PureState> {
    PureState::standard_form(ensemble.dims(), &average_schmidt_vector(ensemble)?)
}

/// The single measurement taking `psibar` to the ensemble.
///
/// Kraus operators are diagonal in the Schmidt basis of `psibar` on the
/// measuring party, `K_j = diag(sqrt(p_j lambda_j^i / lambdabar_i))`, and
/// each outcome is rotated onto the Schmidt bases of its member. Directions
/// outside the support of `psibar` go to outcome 0, so the set is complete on
/// the whole local space.
pub fn synthesize_locc1a(psibar: &PureState, ensemble: &Ensemble, party: Party) -> Result<LocalProtocolStep> {
    let dims = ensemble.dims();
    if psibar.dims() != dims {
        return Err(Error::DimensionMismatch {
            what: "precursor vs ensemble total dimension",
            expected: dims.total(),
            got: psibar.dims().total(),
        });
    }
    let bar = schmidt_decompose(psibar)?;
    let n = dims.schmidt_len();
    let lbar = bar.coefficients.padded(n);
    let average = average_schmidt_vector(ensemble)?.padded(n);
    let residuals: Vec<f64> = lbar.iter().zip(&average).map(|(a, b)| a - b).collect();
    if residuals.iter().any(|r| r.abs() > TOL) {
        return Err(Error::AverageMismatch(residuals));
    }

    let basis = match party {
        Party::A => &bar.basis_a,
        Party::B => &bar.basis_b,
    };
    let d = dims.party(party);
    let mut kraus = Vec::with_capacity(ensemble.len());
    let mut corrections = Vec::with_capacity(ensemble.len());
    let mut labels = Vec::with_capacity(ensemble.len());
    for (j, (p, member)) in ensemble.members().iter().enumerate() {
        let dec = schmidt_decompose(member)?;
        let lambda = dec.coefficients.padded(n);
        let diag: Vec<f64> = (0..d)
            .map(|i| {
                if i < n && lbar[i] > 0.0 {
                    (p * lambda[i] / lbar[i]).clamp(0.0, 1.0).sqrt()
                } else if j == 0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        kraus.push(basis * linalg::diag_real(&diag) * basis.adjoint());
        corrections.push(Correction {
            u: &dec.basis_a * bar.basis_a.adjoint(),
            v: &dec.basis_b * bar.basis_b.adjoint(),
        });
        labels.push(format!("member-{j}"));
    }
    let step = LocalProtocolStep::new(party, kraus, corrections, labels)?.with_diagonal_basis(basis.clone());
    step.check_complete()?;
    Ok(step)
}

/// Exact conversion `source -> psibar` followed by [`synthesize_locc1a`] on `party`.
pub fn convert_to_ensemble_with(source: &PureState, ensemble: &Ensemble, party: Party) -> Result<Protocol> {
    let mu = source.schmidt_vector()?;
    let average = average_schmidt_vector(ensemble)?;
    let (deficit, index) = majorization_deficit(&average, &mu);
    if deficit > TOL {
        return Err(Error::NotReachable { index, deficit });
    }
    let psibar = precursor_state(ensemble)?;
    let mut protocol = synthesize_exact(source, &psibar)?;
    protocol.steps.push(synthesize_locc1a(&psibar, ensemble, party)?);
    protocol.declared = ensemble
        .members()
        .iter()
        .enumerate()
        .map(|(j, (p, s))| DeclaredOutcome {
            label: Some(format!("member-{j}")),
            probability: *p,
            state: s.clone(),
        })
        .collect();
    Ok(protocol)
}

pub fn convert_to_ensemble(source: &PureState, ensemble: &Ensemble) -> Result<Protocol> {
    convert_to_ensemble_with(source, ensemble, Party::A)
}

/// Largest commutator entry and largest off-diagonal entry in the stated basis.
pub fn commutativity_error(step: &LocalProtocolStep) -> f64 {
    step.commutator_error().max(step.diagonality_error().unwrap_or(0.0))
}

/// Kraus operators of `step` expressed in its stated diagonal basis.
pub fn diagonal_form(step: &LocalProtocolStep) -> Option<Vec<CMatrix>> {
    let b = step.diagonal_basis.as_ref()?;
    Some(step.kraus.iter().map(|k| b.adjoint() * k * b).collect())
}
