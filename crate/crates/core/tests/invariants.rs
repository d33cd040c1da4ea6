use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use locc_core::bipartite::{
    assemble, enumerate_decompositions, random_density, random_pure, reduced_state, schmidt_decompose, sqrt_fidelity,
};
use locc_core::ensemble_protocols::{convert_to_ensemble, ensemble_reachable};
use locc_core::linalg::{self, c, eigvalsh, random_isometry, CMatrix};
use locc_core::majorization::{average_schmidt_vector, majorizes, shannon_entropy};
use locc_core::mixed_membership::{
    approx_fidelity_fmax, approximating_ensemble, average_entropy, membership_prob, membership_splus, paired_overlap,
};
use locc_core::positivity_maps::{k_positivity_implication_check, witness_is_valid, HermitianPreservingMap};
use locc_core::protocol::execute;
use locc_core::pure_protocols::synthesize_exact;
use locc_core::search::SearchConfig;
use locc_core::{DensityMatrix, Dims, Ensemble, Party, PureState, SchmidtVector};

fn quick(seed: u64) -> SearchConfig {
    SearchConfig {
        restarts: 8,
        max_iterations: 1500,
        seed,
        ..SearchConfig::default()
    }
}

fn toward_uniform(mu: &SchmidtVector, n: usize, t: f64) -> SchmidtVector {
    let v = mu.padded(n).iter().map(|x| t * x + (1.0 - t) / n as f64).collect();
    SchmidtVector::new(v).unwrap()
}

fn random_ensemble(dims: Dims, size: usize, rng: &mut ChaCha8Rng) -> Ensemble {
    let raw: Vec<f64> = (0..size).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    Ensemble::new(
        raw.iter()
            .map(|w| (w / total, locc_core::bipartite::random_pure_with(dims, rng).unwrap()))
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schmidt_coefficients_are_reduced_spectra(seed in 0u64..10_000, da in 1usize..5, db in 1usize..5) {
        let psi = random_pure(Dims(da, db), seed).unwrap();
        let coeffs = schmidt_decompose(&psi).unwrap().coefficients.padded(da.max(db));
        for party in [Party::A, Party::B] {
            let mut spectrum = eigvalsh(&reduced_state(&psi, party));
            spectrum.sort_by(|a, b| b.total_cmp(a));
            for (k, e) in spectrum.iter().enumerate() {
                prop_assert!((coeffs[k] - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fidelity_is_bounded_and_one_on_equal_states(seed in 0u64..10_000, rank in 1usize..5) {
        let rho = random_density(Dims(2, 2), rank, seed).unwrap();
        let sigma = random_density(Dims(2, 2), 4, seed + 1).unwrap();
        let f = sqrt_fidelity(&rho, &sigma).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((sqrt_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decompositions_reassemble(seed in 0u64..10_000, rank in 1usize..4, extra in 0usize..4) {
        let rho = random_density(Dims(2, 3), rank, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mixer = random_isometry(rank + extra, rank, &mut rng);
        let e = enumerate_decompositions(&rho, rank + extra, &mixer).unwrap();
        let back = assemble(&e).unwrap();
        prop_assert!(linalg::max_abs(&(back.matrix() - rho.matrix())) < 1e-9);
    }

    #[test]
    fn exact_protocols_ignore_global_phase(seed in 0u64..10_000, theta in 0.0f64..std::f64::consts::TAU) {
        let psi = random_pure(Dims(3, 3), seed).unwrap();
        let phased = PureState::from_vector(psi.dims(), psi.amplitudes() * c(theta.cos(), theta.sin())).unwrap();
        let protocol = synthesize_exact(&psi, &phased).unwrap();
        for leaf in execute(&protocol, &psi).unwrap().leaves() {
            prop_assert!(leaf.state.unwrap().overlap(&phased) > 1.0 - 1e-9);
        }
    }

    #[test]
    fn ensemble_reachability_survives_more_entangled_sources(seed in 0u64..10_000, size in 1usize..4, t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_ensemble(Dims(3, 3), size, &mut rng);
        let mu = average_schmidt_vector(&e).unwrap();
        prop_assert!(ensemble_reachable(&mu, &e).unwrap());
        prop_assert!(ensemble_reachable(&toward_uniform(&mu, 3, t), &e).unwrap());
    }

    #[test]
    fn executed_ensemble_reassembles(seed in 0u64..10_000, size in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = Dims(2, 3);
        let e = random_ensemble(dims, size, &mut rng);
        let mu = toward_uniform(&average_schmidt_vector(&e).unwrap(), 2, 0.5);
        let source = PureState::standard_form(dims, &mu).unwrap();
        let protocol = convert_to_ensemble(&source, &e).unwrap();
        let leaves = execute(&protocol, &source).unwrap().leaves();
        let mut m = CMatrix::zeros(6, 6);
        for b in leaves {
            if let Some(s) = b.state {
                m += s.projector() * linalg::real(b.probability);
            }
        }
        prop_assert!(linalg::max_abs(&(m - assemble(&e).unwrap().matrix())) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn membership_certificates_are_sound_and_transfer(seed in 0u64..10_000, rank in 1usize..4, t in 0.0f64..1.0) {
        let rho = random_density(Dims(3, 3), rank, seed).unwrap();
        let mu = SchmidtVector::new(vec![0.6, 0.3, 0.1]).unwrap();
        let v = membership_splus(&rho, &mu, &quick(seed)).unwrap();
        if let Some(cert) = &v.certificate {
            prop_assert!(linalg::max_abs(&(assemble(cert).unwrap().matrix() - rho.matrix())) < 1e-9);
            prop_assert!(ensemble_reachable(&mu, cert).unwrap());
            prop_assert!(ensemble_reachable(&toward_uniform(&mu, 3, t), cert).unwrap());
            prop_assert!(average_entropy(cert).unwrap() <= shannon_entropy(&mu) + 1e-6);
        } else {
            prop_assert!(v.violation > 0.0);
        }
    }

    #[test]
    fn small_probabilities_reach_every_two_qubit_state(seed in 0u64..10_000, rank in 1usize..5, mu2 in 0.05f64..0.5, s in 0.05f64..1.0) {
        let rho = random_density(Dims(2, 2), rank, seed).unwrap();
        let mu = SchmidtVector::new(vec![1.0 - mu2, mu2]).unwrap();
        let v = membership_prob(&rho, &mu, s * 2.0 * mu2, &quick(seed)).unwrap();
        prop_assert!(v.is_member(), "violation {}", v.violation);
    }

    #[test]
    fn fmax_is_jointly_concave_on_combined_certificates(seed in 0u64..10_000, p in 0.1f64..0.9, q in 0.1f64..0.9) {
        let dims = Dims(2, 2);
        let rho1 = random_density(dims, 2, seed).unwrap();
        let rho2 = random_density(dims, 3, seed + 7).unwrap();
        let mu1 = SchmidtVector::new(vec![0.9, 0.1]).unwrap();
        let mu2 = SchmidtVector::new(vec![0.7, 0.3]).unwrap();
        let e1 = approx_fidelity_fmax(&rho1, &mu1, &quick(seed)).unwrap();
        let e2 = approx_fidelity_fmax(&rho2, &mu2, &quick(seed)).unwrap();

        let scale = |e: &Ensemble, w: f64| e.members().iter().map(|(x, s)| (w * x, s.clone())).collect::<Vec<_>>();
        let decomposition = Ensemble::new([scale(&e1.certificate, p), scale(&e2.certificate, 1.0 - p)].concat()).unwrap();
        let approximation = Ensemble::new([scale(&e1.approximation, q), scale(&e2.approximation, 1.0 - q)].concat()).unwrap();
        let mu = SchmidtVector::new(
            mu1.values().iter().zip(mu2.values()).map(|(a, b)| q * a + (1.0 - q) * b).collect(),
        )
        .unwrap();
        prop_assert!(majorizes(&average_schmidt_vector(&approximation).unwrap(), &mu));
        let combined = paired_overlap(decomposition.members(), approximation.members());
        let bound = (p * q).sqrt() * e1.f_max + ((1.0 - p) * (1.0 - q)).sqrt() * e2.f_max;
        prop_assert!((combined - bound).abs() < 1e-9);
        prop_assert!(linalg::max_abs(&(assemble(&decomposition).unwrap().matrix() - (rho1.matrix() * linalg::real(p) + rho2.matrix() * linalg::real(1.0 - p)))) < 1e-9);
        let (best, _) = approximating_ensemble(&decomposition, &mu).unwrap();
        prop_assert!(best >= bound - 1e-9);
    }

    #[test]
    fn random_maps_never_break_the_implication(seed in 0u64..10_000, signs in 0u8..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops: Vec<(f64, CMatrix)> = (0..3)
            .map(|i| (if signs >> i & 1 == 1 { -1.0 } else { 1.0 }, linalg::ginibre(3, 3, &mut rng)))
            .collect();
        let map = HermitianPreservingMap::from_fn(3, |x| {
            ops.iter().fold(CMatrix::zeros(3, 3), |acc, (s, a)| acc + a * x * a.adjoint() * linalg::real(*s))
        })
        .unwrap();
        let mu = SchmidtVector::new(vec![0.7, 0.3, 0.0]).unwrap();
        let r = k_positivity_implication_check(&map, &mu, 400, seed).unwrap();
        prop_assert!(r.consistent);
        if let Some(w) = &r.mu_check.witness {
            prop_assert!(witness_is_valid(&map, &mu, w).unwrap());
        }
    }
}

#[test]
fn density_round_trip_through_json() {
    let rho = random_density(Dims(3, 2), 2, 5).unwrap();
    let text = serde_json::to_string(&rho).unwrap();
    let back: DensityMatrix = serde_json::from_str(&text).unwrap();
    assert_eq!(back, rho);
}
