//! Pure-to-pure conversions: exact, probabilistic and approximate.

use crate::bipartite::{schmidt_decompose, Dims, Ensemble, Party, PureState, SchmidtDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::majorization::{
    common_len, majorization_deficit, majorizes, t_transform_chain, tail_sums, SchmidtVector, TTransform,
};
use crate::protocol::{Correction, DeclaredOutcome, LocalProtocolStep, Protocol};
use crate::TOL;

/// Overlap above which two states are treated as equal when deciding
/// whether a conversion needs any operation at all.
const SAME_STATE: f64 = 1.0 - 1e-12;

/// Exact convertibility: the target's Schmidt vector majorizes the source's.
pub fn can_convert_exact(source_mu: &SchmidtVector, target_lambda: &SchmidtVector) -> bool {
    majorizes(target_lambda, source_mu)
}

fn check_same_dims(source: &PureState, target: &PureState) -> Result<Dims> {
    if source.dims() != target.dims() {
        return Err(Error::DimensionMismatch {
            what: "source vs target total dimension",
            expected: source.dims().total(),
            got: target.dims().total(),
        });
    }
    Ok(source.dims())
}

/// `A diag(d) A^dagger` padded with `fill` beyond `d.len()`.
fn in_basis(basis: &CMatrix, d: &[f64], fill: f64) -> CMatrix {
    let mut full = vec![fill; basis.nrows()];
    full[..d.len()].copy_from_slice(d);
    basis * linalg::diag_real(&full) * basis.adjoint()
}

/// Unitary exchanging basis vectors `i` and `j` of `basis`.
fn swap_in_basis(basis: &CMatrix, i: usize, j: usize) -> CMatrix {
    let mut perm = linalg::identity(basis.nrows());
    perm.swap_columns(i, j);
    basis * perm * basis.adjoint()
}

/// Two-outcome step that turns Schmidt vector `t(v)` into `v`, both in the
/// Schmidt bases `(a, b)`.
fn t_step(a: &CMatrix, b: &CMatrix, v: &[f64], step: &TTransform) -> Result<LocalProtocolStep> {
    let mut w = v.to_vec();
    step.apply(&mut w);
    let mut pv = v.to_vec();
    pv.swap(step.i, step.j);
    let mut k1 = Vec::with_capacity(v.len());
    let mut k2 = Vec::with_capacity(v.len());
    for k in 0..v.len() {
        if w[k] > 0.0 {
            k1.push((step.t * v[k] / w[k]).clamp(0.0, 1.0).sqrt());
            k2.push(((1.0 - step.t) * pv[k] / w[k]).clamp(0.0, 1.0).sqrt());
        } else {
            k1.push(1.0);
            k2.push(0.0);
        }
    }
    let dims = Dims(a.nrows(), b.nrows());
    LocalProtocolStep::new(
        Party::A,
        vec![in_basis(a, &k1, 1.0), in_basis(a, &k2, 0.0)],
        vec![
            Correction::identity(dims),
            Correction {
                u: swap_in_basis(a, step.i, step.j),
                v: swap_in_basis(b, step.i, step.j),
            },
        ],
        vec!["direct".into(), "swapped".into()],
    )
    .map(|s| s.with_diagonal_basis(a.clone()))
}

/// Deterministic LOCC protocol converting `source` into `target`.
///
/// One two-outcome measurement by Alice per T-transform, at most `n - 1`
/// steps; the last step's corrections also rotate into the target's Schmidt bases.
pub fn synthesize_exact(source: &PureState, target: &PureState) -> Result<Protocol> {
    let dims = check_same_dims(source, target)?;
    let src = schmidt_decompose(source)?;
    let tgt = schmidt_decompose(target)?;
    let (deficit, index) = majorization_deficit(&tgt.coefficients, &src.coefficients);
    if deficit > TOL {
        return Err(Error::NotMajorized { index, deficit });
    }
    let (unit_source, _) = source.normalize();
    let (unit_target, _) = target.normalize();
    let declared = vec![DeclaredOutcome {
        label: None,
        probability: 1.0,
        state: unit_target.clone(),
    }];

    let chain = t_transform_chain(&tgt.coefficients, &src.coefficients)?;
    let rotate = Correction {
        u: &tgt.basis_a * src.basis_a.adjoint(),
        v: &tgt.basis_b * src.basis_b.adjoint(),
    };
    let mut steps = Vec::with_capacity(chain.len());
    if chain.is_empty() {
        if unit_source.overlap(&unit_target) < SAME_STATE {
            steps.push(LocalProtocolStep::unitary(dims, rotate, "rotate"));
        }
    } else {
        // chain maps target -> source; run it backwards
        let trajectory = chain.trajectory(&tgt.coefficients.padded(dims.schmidt_len()));
        for (s, step) in chain.steps.iter().enumerate().rev() {
            steps.push(t_step(&src.basis_a, &src.basis_b, &trajectory[s], step)?);
        }
        let last = steps.last_mut().expect("nonempty chain");
        for corr in &mut last.corrections {
            corr.u = &rotate.u * &corr.u;
            corr.v = &rotate.v * &corr.v;
        }
    }
    Ok(Protocol {
        source: unit_source,
        steps,
        declared,
    })
}

/// Optimizer of `sum_k sqrt(nu_k beta_k)` over descending `nu` majorizing `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct Intermediate {
    pub nu: Vec<f64>,
    /// `min_l E_l(mu) / E_l(beta)`: the optimal conversion probability.
    pub ratio: f64,
    pub fidelity: f64,
}

/// Block construction: `nu` is proportional to `beta` on maximal blocks,
/// with the majorization constraints tight at every block boundary.
///
/// The tail block uses the smallest ratio `E_l(mu) / E_l(beta)`; the head is
/// solved recursively with the remaining mass, and ratios grow toward the head.
pub fn block_intermediate(mu: &[f64], beta: &[f64]) -> Intermediate {
    let n = mu.len().max(beta.len());
    let mut m = mu.to_vec();
    m.resize(n, 0.0);
    let mut b = beta.to_vec();
    b.resize(n, 0.0);
    let tm = tail_sums(&m);
    let tb = tail_sums(&b);
    let support = b.iter().rposition(|&x| x > 0.0).map_or(0, |i| i + 1);

    let mut nu = vec![0.0; n];
    let mut hi = support;
    let mut consumed = 0.0;
    let mut top_ratio = None;
    while hi > 0 {
        let mut best = (f64::INFINITY, 0);
        for l in 0..hi {
            let num = (tm[l] - consumed).max(0.0);
            let den = tb[l] - tb[hi];
            if den <= 0.0 {
                continue;
            }
            let r = num / den;
            if r < best.0 - 1e-15 {
                best = (r, l);
            }
        }
        let (r, lo) = best;
        for k in lo..hi {
            nu[k] = r * b[k];
        }
        top_ratio.get_or_insert(r);
        consumed = tm[lo];
        hi = lo;
    }
    let fidelity = nu.iter().zip(&b).map(|(x, y)| (x * y).sqrt()).sum::<f64>().min(1.0);
    Intermediate {
        nu,
        ratio: top_ratio.unwrap_or(1.0).clamp(0.0, 1.0),
        fidelity,
    }
}

/// Outcome of [`optimal_probability`].
#[derive(Clone, Debug)]
pub struct ProbabilisticConversion {
    pub p_max: f64,
    /// Intermediate state reached exactly, in the target's Schmidt bases.
    pub xi: PureState,
    /// Exact conversion to `xi`, then Alice's success/failure filter.
    pub protocol: Protocol,
}

fn xi_state(tgt: &SchmidtDecomposition, nu: &[f64]) -> Result<PureState> {
    PureState::from_schmidt(nu, &tgt.basis_a, &tgt.basis_b)
}

/// Optimal probability of converting `source` into `target`, the
/// intermediate state and the two-stage protocol achieving it.
pub fn optimal_probability(source: &PureState, target: &PureState) -> Result<ProbabilisticConversion> {
    let dims = check_same_dims(source, target)?;
    let mu = source.schmidt_vector()?;
    let tgt = schmidt_decompose(target)?;
    let beta = tgt.coefficients.values();
    let n = dims.schmidt_len();
    let inter = block_intermediate(&mu.padded(n), beta);
    let p = inter.ratio;
    let xi = xi_state(&tgt, &inter.nu)?;

    let mut ks = Vec::with_capacity(n);
    let mut kf = Vec::with_capacity(n);
    for k in 0..n {
        let s = if inter.nu[k] > 0.0 {
            (p * beta.get(k).copied().unwrap_or(0.0) / inter.nu[k]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ks.push(s.sqrt());
        kf.push((1.0 - s).sqrt());
    }
    let filter = LocalProtocolStep::new(
        Party::A,
        vec![in_basis(&tgt.basis_a, &ks, 0.0), in_basis(&tgt.basis_a, &kf, 1.0)],
        vec![Correction::identity(dims), Correction::identity(dims)],
        vec!["success".into(), "failure".into()],
    )?
    .with_diagonal_basis(tgt.basis_a.clone());

    let mut protocol = synthesize_exact(source, &xi)?;
    protocol.steps.push(filter);
    protocol.declared = vec![DeclaredOutcome {
        label: Some("success".into()),
        probability: p,
        state: target.normalize().0,
    }];
    Ok(ProbabilisticConversion {
        p_max: p,
        xi,
        protocol,
    })
}

/// Best overlap `max_{nu majorizing mu} sum_k sqrt(nu_k beta_k)` reachable
/// from a source with Schmidt vector `mu`, and the optimal `nu`.
pub fn optimal_fidelity_vectors(beta: &SchmidtVector, mu: &SchmidtVector) -> (f64, SchmidtVector) {
    let n = common_len(beta, mu);
    let inter = block_intermediate(&mu.padded(n), &beta.padded(n));
    let nu = SchmidtVector::normalized(inter.nu).unwrap_or_else(|_| SchmidtVector::product(n));
    (inter.fidelity, nu)
}

/// Optimal square-root fidelity of approximating `target` from a source with Schmidt vector `mu`.
pub fn optimal_pure_fidelity(target: &PureState, source_mu: &SchmidtVector) -> Result<(f64, SchmidtVector)> {
    Ok(optimal_fidelity_vectors(&target.schmidt_vector()?, source_mu))
}

/// Splits a step's mixed output into its pure outcome branches, with
/// weights `q_i = ||K_i psi||^2`. Zero-weight branches are dropped.
pub fn fine_grain(step: &LocalProtocolStep, state: &PureState) -> Result<Ensemble> {
    step.check_complete()?;
    let members = step
        .branches(state)?
        .into_iter()
        .filter_map(|(p, s)| s.map(|s| (p, s)))
        .collect::<Vec<_>>();
    let total: f64 = members.iter().map(|m| m.0).sum();
    Ensemble::new(members.into_iter().map(|(p, s)| (p / total, s)).collect())
}

/// The step's averaged output `sum_i (U_i K_i ⊗ V_i) |psi><psi| (...)^dagger`.
pub fn step_output(step: &LocalProtocolStep, state: &PureState) -> Result<CMatrix> {
    let (unit, _) = state.normalize();
    let d = unit.dims().total();
    let mut out = CMatrix::zeros(d, d);
    for (k, corr) in step.kraus.iter().zip(&step.corrections) {
        let measured = unit.apply_on(step.party, k);
        if measured.norm_squared() == 0.0 {
            continue;
        }
        let branch = PureState::from_vector(unit.dims(), measured)?;
        let v = branch.apply_local(&corr.u, &corr.v);
        out += linalg::outer(&v, &v);
    }
    Ok(out)
}
