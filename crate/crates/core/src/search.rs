//! Local search over the decompositions of a density matrix.
//!
//! A decomposition with `N` members is a point `W` of the Stiefel manifold of
//! `N x r` isometries: member `i` is row `i` of `W X^T`, where `X` is the
//! scaled eigenvector factor of `rho`. The search applies random 2x2 unitary
//! rotations to pairs of rows, which keeps `W` isometric exactly and changes
//! only two members per move. Step sizes adapt by the one-fifth success rule.
//! Restarts are independent: restart 0 starts from the eigen-decomposition,
//! the others from Haar-random isometries, each with its own random stream.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bipartite::{identity_mixer, mixed_vectors, schmidt_weights, DensityMatrix, Dims, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::parallel;

/// Members lighter than this are dropped from certificates and ignored by
/// per-member objectives.
pub const MIN_MEMBER_WEIGHT: f64 = 1e-12;

/// Restarts run in batches of this size; the search stops after the first
/// batch containing a solved restart. Fixed so results do not depend on the
/// number of worker threads.
const BATCH: usize = 8;

const INITIAL_STEP: f64 = 0.3;
const MAX_STEP: f64 = 1.5;
const GROW: f64 = 1.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Members per decomposition; `None` means `rank(rho)^2`.
    pub max_ensemble_size: Option<usize>,
    pub restarts: usize,
    /// Proposed moves per restart.
    pub max_iterations: usize,
    /// A restart ends once its step size falls below this.
    pub tolerance: f64,
    pub seed: u64,
    /// Run restarts concurrently when the `parallel` feature is enabled.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_ensemble_size: None,
            restarts: 32,
            max_iterations: 4000,
            tolerance: 1e-7,
            seed: 0,
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    /// Member count for a state of the given rank, after validation.
    pub fn ensemble_size(&self, rank: usize) -> Result<usize> {
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(Error::Domain("restarts and max_iterations must be positive".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Domain(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        let size = self.max_ensemble_size.unwrap_or(rank * rank);
        if size < rank {
            return Err(Error::EnsembleTooSmall { size, rank });
        }
        Ok(size)
    }
}

/// Precomputed data for evaluating members of decompositions of one state.
pub(crate) struct Landscape {
    pub dims: Dims,
    pub rank: usize,
    factor: CMatrix,
    /// Coefficient matrices of the factor columns.
    blocks: Vec<CMatrix>,
}

impl Landscape {
    pub fn new(rho: &DensityMatrix) -> Self {
        let dims = rho.dims();
        let factor = rho.factor();
        let blocks = (0..factor.ncols())
            .map(|k| CMatrix::from_fn(dims.0, dims.1, |a, b| factor[(a * dims.1 + b, k)]))
            .collect();
        Landscape {
            dims,
            rank: factor.ncols(),
            factor,
            blocks,
        }
    }

    /// Unnormalized Schmidt weights `p_i lambda_i` of member `i`.
    fn member_weights(&self, mixer: &CMatrix, i: usize) -> Vec<f64> {
        let mut m = CMatrix::zeros(self.dims.0, self.dims.1);
        for (k, block) in self.blocks.iter().enumerate() {
            let w = mixer[(i, k)];
            if w.norm_sqr() > 0.0 {
                m += block * w;
            }
        }
        schmidt_weights(&m)
    }

    pub fn vectors(&self, mixer: &CMatrix) -> Vec<CVector> {
        mixed_vectors(&self.factor, mixer)
    }

    pub fn ensemble(&self, mixer: &CMatrix) -> Result<Ensemble> {
        Ensemble::from_unnormalized(self.dims, &self.vectors(mixer), MIN_MEMBER_WEIGHT)
    }
}

/// Function of the per-member weights `p_i lambda_i` and their positional sum.
pub(crate) trait Objective: Sync {
    /// Search merit; lower is better.
    fn merit(&self, members: &[Vec<f64>], sum: &[f64]) -> f64;

    /// Exact success test.
    fn solved(&self, _members: &[Vec<f64>], _sum: &[f64]) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub(crate) struct RestartOutcome {
    pub index: usize,
    pub mixer: CMatrix,
    pub merit: f64,
    pub solved: bool,
    pub evaluations: u64,
}

#[derive(Clone, Debug)]
pub(crate) struct SearchOutcome {
    pub best: RestartOutcome,
    pub restarts: Vec<RestartOutcome>,
    pub evaluations: u64,
}

fn positional_sum(members: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut sum = vec![0.0; n];
    for m in members {
        for (s, x) in sum.iter_mut().zip(m) {
            *s += x;
        }
    }
    sum
}

/// Random element of SU(2) at angle `~ step` from the identity.
fn random_rotation<R: Rng + ?Sized>(step: f64, rng: &mut R) -> [[num_complex::Complex64; 2]; 2] {
    let a: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt().max(1e-300);
    let theta = step * norm;
    let (s, co) = theta.sin_cos();
    let (nx, ny, nz) = (a[0] / norm, a[1] / norm, a[2] / norm);
    [[c(co, s * nz), c(s * ny, s * nx)], [c(-s * ny, s * nx), c(co, -s * nz)]]
}

fn rotate_rows(mixer: &mut CMatrix, i: usize, j: usize, g: &[[num_complex::Complex64; 2]; 2]) {
    for k in 0..mixer.ncols() {
        let (x, y) = (mixer[(i, k)], mixer[(j, k)]);
        mixer[(i, k)] = g[0][0] * x + g[0][1] * y;
        mixer[(j, k)] = g[1][0] * x + g[1][1] * y;
    }
}

fn run_restart<O: Objective>(
    land: &Landscape,
    obj: &O,
    cfg: &SearchConfig,
    size: usize,
    index: usize,
    stop_when_solved: bool,
) -> RestartOutcome {
    let mut rng = parallel::stream_rng(cfg.seed, index as u64);
    let mut mixer = if index == 0 {
        identity_mixer(size, land.rank)
    } else {
        linalg::random_isometry(size, land.rank, &mut rng)
    };
    let n = land.dims.schmidt_len();
    let mut members: Vec<Vec<f64>> = (0..size).map(|i| land.member_weights(&mixer, i)).collect();
    let mut sum = positional_sum(&members, n);
    let mut merit = obj.merit(&members, &sum);
    let mut solved = obj.solved(&members, &sum);
    let mut evaluations = 1u64;
    let mut step = INITIAL_STEP;

    if size >= 2 {
        for _ in 0..cfg.max_iterations {
            if (solved && stop_when_solved) || step < cfg.tolerance {
                break;
            }
            let i = rng.random_range(0..size);
            let mut j = rng.random_range(0..size - 1);
            if j >= i {
                j += 1;
            }
            let g = random_rotation(step, &mut rng);
            let saved = (mixer.row(i).into_owned(), mixer.row(j).into_owned());
            rotate_rows(&mut mixer, i, j, &g);
            let old_i = std::mem::replace(&mut members[i], land.member_weights(&mixer, i));
            let old_j = std::mem::replace(&mut members[j], land.member_weights(&mixer, j));
            let trial_sum = positional_sum(&members, n);
            let trial = obj.merit(&members, &trial_sum);
            evaluations += 1;
            if trial <= merit {
                merit = trial;
                sum = trial_sum;
                solved = obj.solved(&members, &sum);
                step = (step * GROW).min(MAX_STEP);
            } else {
                mixer.set_row(i, &saved.0);
                mixer.set_row(j, &saved.1);
                members[i] = old_i;
                members[j] = old_j;
                step *= GROW.powf(-0.25);
            }
        }
    }
    // re-orthonormalize away accumulated rounding before building certificates
    let mixer = linalg::orthonormalize_columns(&mixer);
    RestartOutcome {
        index,
        mixer,
        merit,
        solved,
        evaluations,
    }
}

/// Runs all restarts (or stops after the first batch with a solved restart
/// when `stop_when_solved`), returning the best by (solved, merit, index).
pub(crate) fn search<O: Objective>(
    land: &Landscape,
    obj: &O,
    cfg: &SearchConfig,
    stop_when_solved: bool,
) -> Result<SearchOutcome> {
    let size = cfg.ensemble_size(land.rank)?;
    let mut restarts: Vec<RestartOutcome> = Vec::with_capacity(cfg.restarts);
    let mut start = 0;
    while start < cfg.restarts {
        let count = BATCH.min(cfg.restarts - start);
        let batch = parallel::map_indexed(count, cfg.parallel, |k| {
            run_restart(land, obj, cfg, size, start + k, stop_when_solved)
        });
        let any_solved = batch.iter().any(|r| r.solved);
        restarts.extend(batch);
        start += count;
        if stop_when_solved && any_solved {
            break;
        }
    }
    let best = restarts
        .iter()
        .min_by(|a, b| {
            b.solved
                .cmp(&a.solved)
                .then(a.merit.total_cmp(&b.merit))
                .then(a.index.cmp(&b.index))
        })
        .cloned()
        .expect("at least one restart");
    let evaluations = restarts.iter().map(|r| r.evaluations).sum();
    Ok(SearchOutcome {
        best,
        restarts,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::{assemble, random_density};

    struct TailTwo;

    impl Objective for TailTwo {
        fn merit(&self, _members: &[Vec<f64>], sum: &[f64]) -> f64 {
            sum[1..].iter().sum()
        }
    }

    #[test]
    fn rotations_are_unitary() {
        let mut rng = parallel::stream_rng(1, 0);
        let g = random_rotation(0.7, &mut rng);
        let m = CMatrix::from_row_slice(2, 2, &[g[0][0], g[0][1], g[1][0], g[1][1]]);
        assert!(linalg::isometry_error(&m) < 1e-14);
    }

    #[test]
    fn search_keeps_decompositions_valid() {
        let rho = random_density(Dims(2, 2), 3, 2).unwrap();
        let land = Landscape::new(&rho);
        let cfg = SearchConfig::default().with_restarts(3);
        let out = search(&land, &TailTwo, &cfg, false).unwrap();
        assert!(linalg::isometry_error(&out.best.mixer) < 1e-12);
        let e = land.ensemble(&out.best.mixer).unwrap();
        assert!(linalg::max_abs(&(assemble(&e).unwrap().matrix() - rho.matrix())) < 1e-9);
        // the search only accepts improvements over the eigen-decomposition start
        let start = TailTwo.merit(&[], &{
            let mut s = vec![0.0; 2];
            for i in 0..land.rank {
                let w = land.member_weights(&identity_mixer(9, land.rank), i);
                s[0] += w[0];
                s[1] += w[1];
            }
            s
        });
        assert!(out.restarts[0].merit <= start + 1e-15);
    }

    #[test]
    fn results_do_not_depend_on_parallelism() {
        let rho = random_density(Dims(2, 3), 4, 3).unwrap();
        let land = Landscape::new(&rho);
        let cfg = SearchConfig {
            restarts: 10,
            max_iterations: 300,
            ..SearchConfig::default()
        };
        let seq = search(&land, &TailTwo, &SearchConfig { parallel: false, ..cfg.clone() }, false).unwrap();
        let par = search(&land, &TailTwo, &cfg, false).unwrap();
        assert_eq!(seq.best.index, par.best.index);
        assert_eq!(seq.best.merit, par.best.merit);
        assert_eq!(seq.evaluations, par.evaluations);
    }

    #[test]
    fn undersized_ensembles_are_rejected() {
        let rho = random_density(Dims(2, 2), 3, 2).unwrap();
        let cfg = SearchConfig {
            max_ensemble_size: Some(2),
            ..SearchConfig::default()
        };
        assert!(matches!(
            search(&Landscape::new(&rho), &TailTwo, &cfg, false),
            Err(Error::EnsembleTooSmall { size: 2, rank: 3 })
        ));
    }
}
