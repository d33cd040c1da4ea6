//! Order-theoretic machinery on Schmidt vectors: majorization, weak
//! supermajorization, tail sums, averages, entropies and T-transform chains.
//!
//! Vectors of different lengths are compared after zero-padding to the longer
//! length. Prefix-sum comparisons accept a slack of [`TOL`].

use serde::{Deserialize, Serialize};

use crate::bipartite::Ensemble;
use crate::error::{Error, Result};
use crate::TOL;

/// Descending, nonnegative, unit-sum vector of Schmidt coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchmidtVectorWire", into = "SchmidtVectorWire")]
pub struct SchmidtVector(Vec<f64>);

#[derive(Serialize, Deserialize)]
struct SchmidtVectorWire {
    values: Vec<f64>,
}

impl TryFrom<SchmidtVectorWire> for SchmidtVector {
    type Error = Error;
    fn try_from(w: SchmidtVectorWire) -> Result<Self> {
        SchmidtVector::new(w.values)
    }
}

impl From<SchmidtVector> for SchmidtVectorWire {
    fn from(v: SchmidtVector) -> Self {
        SchmidtVectorWire { values: v.0 }
    }
}

impl SchmidtVector {
    /// Validates ordering, sign and normalization (each within [`TOL`]) and
    /// then snaps the vector onto the exact constraint set.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSchmidtVector("empty vector".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSchmidtVector(format!("non-finite entry {bad}")));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v < -TOL) {
            return Err(Error::InvalidSchmidtVector(format!("negative entry {v} at index {i}")));
        }
        if let Some(i) = (1..values.len()).find(|&i| values[i] > values[i - 1] + TOL) {
            return Err(Error::InvalidSchmidtVector(format!("not descending at index {i}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > TOL {
            return Err(Error::InvalidSchmidtVector(format!("sum is {sum}")));
        }
        Ok(Self::snap(values))
    }

    /// Sorts and validates; entries must still be nonnegative with unit sum.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    /// Scales a nonnegative vector to unit sum, then sorts it.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if sum.is_nan() || sum <= 0.0 || values.iter().any(|v| *v < -TOL) {
            return Err(Error::InvalidSchmidtVector("cannot normalize".into()));
        }
        Self::from_unsorted(values.into_iter().map(|v| v / sum).collect())
    }

    fn snap(values: Vec<f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().map(|x| x.max(0.0)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let sum: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= sum);
        SchmidtVector(v)
    }

    /// Schmidt vector of the maximally entangled state of rank `m`, padded to `n`.
    pub fn maximally_entangled(m: usize, n: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::IndexOutOfRange { index: m, max: n });
        }
        let mut v = vec![0.0; n];
        v[..m].iter_mut().for_each(|x| *x = 1.0 / m as f64);
        Ok(SchmidtVector(v))
    }

    /// The product-state vector (1, 0, ..., 0) of length `n`.
    pub fn product(n: usize) -> Self {
        let mut v = vec![0.0; n.max(1)];
        v[0] = 1.0;
        SchmidtVector(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of entries above [`TOL`].
    pub fn rank(&self) -> usize {
        self.0.iter().filter(|&&v| v > TOL).count()
    }

    pub fn padded(&self, n: usize) -> Vec<f64> {
        let mut v = self.0.clone();
        v.resize(n.max(v.len()), 0.0);
        v
    }

    pub fn padded_to(&self, n: usize) -> SchmidtVector {
        SchmidtVector(self.padded(n))
    }
}

pub(crate) fn common_len(a: &SchmidtVector, b: &SchmidtVector) -> usize {
    a.len().max(b.len())
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Suffix sums: `tails[l] = sum_{i >= l} v[i]` (0-based), with `tails[n] = 0`.
pub(crate) fn tail_sums(v: &[f64]) -> Vec<f64> {
    let mut tails = vec![0.0; v.len() + 1];
    for i in (0..v.len()).rev() {
        tails[i] = tails[i + 1] + v[i];
    }
    tails
}

/// Largest prefix-sum shortfall `max_k (sum_{i<=k} mu - sum_{i<=k} lambda)` and
/// the 1-based index where it occurs. Nonpositive iff `lambda` majorizes `mu`.
pub fn majorization_deficit(lambda: &SchmidtVector, mu: &SchmidtVector) -> (f64, usize) {
    let n = common_len(lambda, mu);
    deficit_of(&lambda.padded(n), &mu.padded(n))
}

pub(crate) fn deficit_of(lambda: &[f64], mu: &[f64]) -> (f64, usize) {
    let pl = prefix_sums(lambda);
    let pm = prefix_sums(mu);
    let mut worst = (f64::NEG_INFINITY, 1);
    // the last prefix sum is 1 on both sides
    for k in 0..pl.len().saturating_sub(1) {
        let d = pm[k] - pl[k];
        if d > worst.0 {
            worst = (d, k + 1);
        }
    }
    if worst.0 == f64::NEG_INFINITY {
        worst.0 = 0.0;
    }
    worst
}

/// `lambda` majorizes `mu`: every prefix sum of `lambda` dominates that of `mu`.
pub fn majorizes(lambda: &SchmidtVector, mu: &SchmidtVector) -> bool {
    majorization_deficit(lambda, mu).0 <= TOL
}

/// `mu` is weakly supermajorized by `p * lambda`: `p * tail(lambda, l) <= tail(mu, l)` for all `l`.
///
/// The slack scales with `tail(lambda, l)` (equal to [`TOL`] at `l = 1`) so the
/// verdict stays sharp at small tails.
pub fn weakly_supermajorized(p: f64, lambda: &SchmidtVector, mu: &SchmidtVector) -> bool {
    let n = common_len(lambda, mu);
    let tl = tail_sums(&lambda.padded(n));
    let tm = tail_sums(&mu.padded(n));
    (0..n).all(|l| p * tl[l] - tm[l] <= TOL * tl[l])
}

/// Largest `p` with `p * lambda` weakly supermajorizing `mu`: the optimal
/// probability of turning a source with Schmidt vector `mu` into `lambda`.
pub fn max_probability(lambda: &SchmidtVector, mu: &SchmidtVector) -> f64 {
    let n = common_len(lambda, mu);
    let tl = tail_sums(&lambda.padded(n));
    let tm = tail_sums(&mu.padded(n));
    let mut p = 1.0f64;
    for l in 1..n {
        if tl[l] <= 0.0 {
            continue;
        }
        if tm[l] <= 0.0 {
            return 0.0;
        }
        p = p.min(tm[l] / tl[l]);
    }
    p.clamp(0.0, 1.0)
}

/// `E_l(v) = sum_{k >= l} v_k` for 1-based `l` in `1..=n+1`.
pub fn tail_sum(v: &SchmidtVector, l: usize) -> Result<f64> {
    let n = v.len();
    if l == 0 || l > n + 1 {
        return Err(Error::IndexOutOfRange { index: l, max: n + 1 });
    }
    Ok(v.values()[l - 1..].iter().sum())
}

/// Positional weighted average of Schmidt vectors, all padded to a common length.
pub fn weighted_average(weights: &[f64], vectors: &[SchmidtVector]) -> Result<SchmidtVector> {
    if vectors.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = vectors.iter().map(SchmidtVector::len).max().unwrap_or(1);
    let mut avg = vec![0.0; n];
    for (w, v) in weights.iter().zip(vectors) {
        for (a, x) in avg.iter_mut().zip(v.padded(n)) {
            *a += w * x;
        }
    }
    SchmidtVector::new(avg)
}

/// `sum_j p_j lambda_{psi_j}`, the Schmidt vector of the precursor state.
pub fn average_schmidt_vector(ensemble: &Ensemble) -> Result<SchmidtVector> {
    let (weights, vectors): (Vec<f64>, Vec<SchmidtVector>) = ensemble
        .members()
        .iter()
        .map(|(w, s)| Ok((*w, s.schmidt_vector()?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    weighted_average(&weights, &vectors)
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn shannon_entropy(mu: &SchmidtVector) -> f64 {
    mu.values()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Binary entropy `H_2(x)` in bits.
pub fn binary_entropy(x: f64) -> f64 {
    shannon_entropy(&SchmidtVector::snap(vec![x, 1.0 - x]))
}

/// One T-transform `x -> t x + (1 - t) P_{ij} x` mixing entries `i` and `j` (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTransform {
    pub i: usize,
    pub j: usize,
    pub t: f64,
}

impl TTransform {
    pub fn apply(&self, x: &mut [f64]) {
        let (a, b) = (x[self.i], x[self.j]);
        x[self.i] = self.t * a + (1.0 - self.t) * b;
        x[self.j] = self.t * b + (1.0 - self.t) * a;
    }
}

/// Sequence of T-transforms carrying a majorizing vector onto a majorized one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TTransformChain {
    pub steps: Vec<TTransform>,
}

impl TTransformChain {
    /// Every vector along the chain, starting with `start` itself.
    pub fn trajectory(&self, start: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![start.to_vec()];
        let mut x = start.to_vec();
        for step in &self.steps {
            step.apply(&mut x);
            out.push(x.clone());
        }
        out
    }

    pub fn apply(&self, start: &[f64]) -> Vec<f64> {
        self.trajectory(start).pop().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Builds `mu = T_m ... T_1 lambda` with at most `n - 1` T-transforms.
///
/// Each step takes the largest index `j` where the current vector exceeds
/// `mu`, the smallest `k > j` where it falls short, and moves
/// `min(x_j - mu_j, mu_k - x_k)` from `j` to `k`. Every step pins at least one
/// more coordinate to its final value, and the current vector stays sorted.
pub fn t_transform_chain(lambda: &SchmidtVector, mu: &SchmidtVector) -> Result<TTransformChain> {
    let (deficit, index) = majorization_deficit(lambda, mu);
    if deficit > TOL {
        return Err(Error::NotMajorized { index, deficit });
    }
    let n = common_len(lambda, mu);
    let mut x = lambda.padded(n);
    let target = mu.padded(n);
    let eps = 1e-15;
    let mut chain = TTransformChain::default();
    for _ in 0..2 * n {
        let Some(j) = (0..n).rev().find(|&j| x[j] > target[j] + eps) else {
            break;
        };
        let Some(k) = (j + 1..n).find(|&k| x[k] < target[k] - eps) else {
            break;
        };
        let gap = x[j] - x[k];
        let over = x[j] - target[j];
        let under = target[k] - x[k];
        let delta = over.min(under);
        let step = TTransform {
            i: j,
            j: k,
            t: 1.0 - delta / gap,
        };
        step.apply(&mut x);
        if over <= under {
            x[j] = target[j];
        }
        if under <= over {
            x[k] = target[k];
        }
        chain.steps.push(step);
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> SchmidtVector {
        SchmidtVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_malformed_vectors() {
        assert!(SchmidtVector::new(vec![]).is_err());
        assert!(SchmidtVector::new(vec![0.4, 0.6]).is_err());
        assert!(SchmidtVector::new(vec![0.7, 0.2]).is_err());
        assert!(SchmidtVector::new(vec![1.1, -0.1]).is_err());
        assert_eq!(SchmidtVector::normalized(vec![1.0, 3.0]).unwrap().values(), &[0.75, 0.25]);
    }

    #[test]
    fn majorization_examples() {
        assert!(majorizes(&sv(&[1.0, 0.0]), &sv(&[0.5, 0.5])));
        assert!(!majorizes(&sv(&[0.5, 0.5]), &sv(&[1.0, 0.0])));
        // prefix sums 0.75 >= 0.5, 1.0 >= 0.75
        assert!(majorizes(&sv(&[0.75, 0.25, 0.0]), &sv(&[0.5, 0.25, 0.25])));
        // zero padding across lengths
        assert!(majorizes(&sv(&[0.75, 0.25]), &sv(&[0.5, 0.25, 0.25])));
    }

    #[test]
    fn weak_supermajorization_examples() {
        let bell = sv(&[0.5, 0.5]);
        let mu = sv(&[0.8, 0.2]);
        assert!(weakly_supermajorized(1.0, &mu, &mu));
        assert!(weakly_supermajorized(0.4, &bell, &mu));
        assert!(!weakly_supermajorized(0.41, &bell, &mu));
        assert!(weakly_supermajorized(1.0, &sv(&[1.0, 0.0]), &sv(&[0.6, 0.4])));
    }

    #[test]
    fn max_probability_examples() {
        let mu = sv(&[0.8, 0.2]);
        assert_eq!(max_probability(&mu, &mu), 1.0);
        assert!((max_probability(&sv(&[0.5, 0.5]), &mu) - 0.4).abs() < 1e-15);
        assert_eq!(max_probability(&sv(&[0.5, 0.5]), &sv(&[1.0, 0.0])), 0.0);
    }

    #[test]
    fn tail_sum_examples() {
        let v = sv(&[0.5, 0.3, 0.2]);
        assert!((tail_sum(&v, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((tail_sum(&sv(&[0.8, 0.2]), 2).unwrap() - 0.2).abs() < 1e-15);
        assert!((tail_sum(&v, 3).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(tail_sum(&v, 4).unwrap(), 0.0);
        assert!(tail_sum(&v, 0).is_err());
        assert!(tail_sum(&v, 5).is_err());
    }

    #[test]
    fn averages_positionally() {
        let avg = weighted_average(&[0.5, 0.5], &[sv(&[1.0, 0.0]), sv(&[0.5, 0.5])]).unwrap();
        assert_eq!(avg.values(), &[0.75, 0.25]);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&sv(&[1.0, 0.0])), 0.0);
        assert!((shannon_entropy(&sv(&[0.5, 0.5])) - 1.0).abs() < 1e-15);
        // -0.75 log2 0.75 - 0.25 log2 0.25
        let direct = -0.75 * 0.75f64.log2() - 0.25 * 0.25f64.log2();
        assert!((shannon_entropy(&sv(&[0.75, 0.25])) - direct).abs() < 1e-15);
        assert!((direct - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn chain_examples() {
        let mu = sv(&[0.5, 0.25, 0.25]);
        assert!(t_transform_chain(&mu, &mu).unwrap().is_empty());

        let chain = t_transform_chain(&sv(&[1.0, 0.0]), &sv(&[0.5, 0.5])).unwrap();
        assert_eq!(chain.steps, vec![TTransform { i: 0, j: 1, t: 0.5 }]);

        let lambda = sv(&[0.75, 0.25, 0.0]);
        let chain = t_transform_chain(&lambda, &mu).unwrap();
        assert!(chain.len() <= 2);
        let end = chain.apply(lambda.values());
        for (a, b) in end.iter().zip(mu.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_handles_equal_adjacent_entries() {
        // adjacent-pair mixing cannot move mass between the two equal tail entries
        let lambda = sv(&[0.6, 0.2, 0.2]);
        let mu = sv(&[0.4, 0.3, 0.3]);
        let chain = t_transform_chain(&lambda, &mu).unwrap();
        let end = chain.apply(lambda.values());
        assert!(end.iter().zip(mu.values()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn chain_rejects_non_majorizing_input() {
        match t_transform_chain(&sv(&[0.5, 0.5]), &sv(&[0.8, 0.2])) {
            Err(Error::NotMajorized { index, deficit }) => {
                assert_eq!(index, 1);
                assert!((deficit - 0.3).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_vector(n: usize) -> impl Strategy<Value = SchmidtVector> {
        proptest::collection::vec(0.0f64..1.0, n).prop_filter_map("nonzero", |v| {
            if v.iter().sum::<f64>() > 1e-3 {
                SchmidtVector::normalized(v).ok()
            } else {
                None
            }
        })
    }

    fn arb_pair() -> impl Strategy<Value = (SchmidtVector, SchmidtVector)> {
        (2usize..=6).prop_flat_map(|n| (arb_vector(n), arb_vector(n)))
    }

    proptest! {
        #[test]
        fn majorization_is_reflexive_and_transitive(
            (a, b) in arb_pair(), c in arb_vector(6)
        ) {
            prop_assert!(majorizes(&a, &a));
            if majorizes(&a, &b) && majorizes(&b, &c) {
                prop_assert!(majorizes(&a, &c));
            }
            if majorizes(&a, &b) && majorizes(&b, &a) {
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!((x - y).abs() < 1e-8);
                }
            }
        }

        #[test]
        fn majorization_implies_unit_weak_supermajorization((a, b) in arb_pair()) {
            if majorizes(&a, &b) {
                prop_assert!(weakly_supermajorized(1.0, &a, &b));
            }
        }

        #[test]
        fn max_probability_is_tight((a, b) in arb_pair()) {
            let p = max_probability(&a, &b);
            for l in 1..=a.len() {
                prop_assert!(p * tail_sum(&a, l).unwrap() <= tail_sum(&b, l).unwrap() + 1e-15);
            }
            prop_assert!(weakly_supermajorized(p, &a, &b));
            if p < 1.0 {
                prop_assert!(!weakly_supermajorized(p + 1e-6, &a, &b));
            }
            prop_assert_eq!(p == 1.0, majorizes(&a, &b));
        }

        #[test]
        fn average_prefix_sums_are_averaged(
            (a, b) in arb_pair(), w in 0.0f64..1.0
        ) {
            let avg = weighted_average(&[w, 1.0 - w], &[a.clone(), b.clone()]).unwrap();
            let (pa, pb, pv) = (prefix_sums(a.values()), prefix_sums(b.values()), prefix_sums(avg.values()));
            for k in 0..pv.len() {
                prop_assert!((pv[k] - (w * pa[k] + (1.0 - w) * pb[k])).abs() < 1e-12);
            }
        }

        #[test]
        fn chain_reproduces_target((a, b) in arb_pair()) {
            let (lambda, mu) = if majorizes(&a, &b) { (a, b) } else if majorizes(&b, &a) { (b, a) } else {
                // the sorted average with the top vector is always majorized by it
                let top = SchmidtVector::product(a.len());
                (top, a)
            };
            let chain = t_transform_chain(&lambda, &mu).unwrap();
            prop_assert!(chain.len() < lambda.len().max(mu.len()));
            for x in chain.trajectory(lambda.values()) {
                let x = SchmidtVector::from_unsorted(x).unwrap();
                prop_assert!(majorizes(&lambda, &x));
                prop_assert!(majorizes(&x, &mu));
            }
            let end = chain.apply(lambda.values());
            for (x, y) in end.iter().zip(mu.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
