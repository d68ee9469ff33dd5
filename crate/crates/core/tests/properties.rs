use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rare_switch::analysis::{check_claim1, check_lemma12_ordering, find_counterexample, SearchMode};
use rare_switch::linalg::{gen_rayleigh_max, gen_rayleigh_top, loewner_dominates, SpdMatrix, SymMatrix, Vector};
use rare_switch::noise::{sample_noise, NoiseBudget, NoiseKind, NoiseModel};
use rare_switch::sampling;
use rare_switch::switching::{run_stream, update_count_bound, RuleKind, StreamConfig, SwitchRule};

fn stream(
    dim: usize,
    horizon: usize,
    kind: RuleKind,
    alpha: f64,
    noise: NoiseKind,
    eta: f64,
    seed: u64,
) -> StreamConfig {
    StreamConfig::new(
        dim,
        horizon,
        1.0,
        SwitchRule::new(kind, alpha).unwrap(),
        NoiseModel::new(noise, 1.0, seed).unwrap(),
        NoiseBudget::new(eta, 1.0).unwrap(),
    )
    .unwrap()
}

fn actions(seed: u64, dim: usize, n: usize) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sampling::in_ball(&mut rng, dim, 1.0)).collect()
}

fn spd(seed: u64, dim: usize) -> SpdMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpdMatrix::new(sampling::random_design(&mut rng, dim, 0.5, 1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rayleigh_max_dominates_every_quotient(seed in any::<u64>(), dim in 1usize..6) {
        let a = spd(seed, dim);
        let b = spd(seed ^ 0x5555, dim);
        let g = gen_rayleigh_max(a.as_sym(), &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        for _ in 0..50 {
            let x = sampling::unit_vector(&mut rng, dim);
            let q = a.as_sym().quadratic_form(&x).unwrap() / b.as_sym().quadratic_form(&x).unwrap();
            prop_assert!(q <= g * (1.0 + 1e-10));
        }
        let top = gen_rayleigh_top(a.as_sym(), &b).unwrap();
        let q = a.as_sym().quadratic_form(&top.vector).unwrap() / b.as_sym().quadratic_form(&top.vector).unwrap();
        prop_assert!((q - g).abs() <= 1e-9 * g);
    }

    #[test]
    fn rayleigh_max_matches_dense_eigen_oracle(seed in any::<u64>(), dim in 1usize..6) {
        let a = spd(seed, dim);
        let b = spd(seed ^ 0xabc, dim);
        let binv = b.as_sym().as_matrix().clone().try_inverse().unwrap();
        // eigenvalues of B^{-1}A are real and equal those of the reduced form
        let m: DMatrix<f64> = &binv * a.as_sym().as_matrix();
        let oracle = m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::MIN, f64::max);
        let g = gen_rayleigh_max(a.as_sym(), &b).unwrap();
        prop_assert!((g - oracle).abs() <= 1e-8 * oracle.abs().max(1.0));
    }

    #[test]
    fn log_det_follows_determinant_lemma(seed in any::<u64>(), dim in 1usize..7) {
        let v = spd(seed, dim);
        let x = actions(seed ^ 7, dim, 1).remove(0);
        let updated = v.rank_one_update(&x).unwrap();
        let inv = v.as_sym().as_matrix().clone().try_inverse().unwrap();
        let expected = (1.0 + (x.transpose() * inv * &x)[(0, 0)]).ln();
        prop_assert!((updated.log_det() - v.log_det() - expected).abs() < 1e-10);
        let dense = SpdMatrix::new(v.as_sym().add(&SymMatrix::outer(&x)).unwrap()).unwrap();
        prop_assert!((dense.log_det() - updated.log_det()).abs() < 1e-10);
    }

    #[test]
    fn noise_respects_budget_and_is_reproducible(seed in any::<u64>(), t in 1u64..10_000, dim in 1usize..9,
                                                   sigma in 0.0f64..5.0, eta in 0.0f64..0.5) {
        let budget = NoiseBudget::new(eta, 1.0).unwrap();
        for kind in [NoiseKind::GaussianOrthogonalRescaled, NoiseKind::AdversarialDiagonal, NoiseKind::None] {
            let model = NoiseModel::new(kind, sigma, seed).unwrap();
            let e = sample_noise(&model, &budget, t, dim);
            prop_assert!(e.spectral_norm() <= eta * (1.0 + 1e-12) + 1e-300);
            prop_assert_eq!(e.to_row_major(), sample_noise(&model, &budget, t, dim).to_row_major());
            for i in 0..dim {
                for j in 0..dim {
                    prop_assert_eq!(e.get(i, j), e.get(j, i));
                }
            }
        }
    }

    #[test]
    fn rayleigh_and_loewner_forms_agree(seed in any::<u64>(), dim in 1usize..5, alpha in 1.05f64..6.0, eta in 0.0f64..0.5) {
        let xs = actions(seed, dim, 120);
        let noise = if eta > 0.0 { NoiseKind::GaussianOrthogonalRescaled } else { NoiseKind::None };
        let r = run_stream(&stream(dim, 120, RuleKind::Rayleigh, alpha, noise, eta, seed), &xs).unwrap();
        let l = run_stream(&stream(dim, 120, RuleKind::RayleighLoewnerForm, alpha, noise, eta, seed), &xs).unwrap();
        prop_assert_eq!(r.update_times, l.update_times);
    }

    #[test]
    fn rayleigh_never_switches_more_than_determinant_without_noise(seed in any::<u64>(), dim in 1usize..6, alpha in 1.05f64..8.0) {
        let xs = actions(seed, dim, 200);
        let r = run_stream(&stream(dim, 200, RuleKind::Rayleigh, alpha, NoiseKind::None, 0.0, 0), &xs).unwrap();
        let d = run_stream(&stream(dim, 200, RuleKind::Determinant, alpha, NoiseKind::None, 0.0, 0), &xs).unwrap();
        prop_assert!(r.m <= d.m, "m_R = {} > m_D = {}", r.m, d.m);
    }

    #[test]
    fn traces_satisfy_invariants_and_bound(seed in any::<u64>(), dim in 1usize..5, alpha in 3.2f64..9.0) {
        let cfg = stream(dim, 300, RuleKind::Rayleigh, alpha, NoiseKind::GaussianOrthogonalRescaled, 0.5, seed);
        let trace = run_stream(&cfg, &actions(seed, dim, 300)).unwrap();
        prop_assert!(trace.check_invariants(Some(&cfg.rule)).is_ok());
        let bound = update_count_bound(&cfg).unwrap();
        prop_assert!(trace.m as f64 <= bound + 1.0);
    }

    #[test]
    fn sandwich_holds_on_random_instances(seed in any::<u64>(), dim in 1usize..6, rho in 0.0f64..=0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budget = NoiseBudget::new(rho, 1.0).unwrap();
        let va = sampling::random_design(&mut rng, dim, 1.0, 1.0);
        let (vb, _) = sampling::extend_design(&mut rng, &va, 1.0);
        let clamp = |e: SymMatrix| {
            let n = e.spectral_norm();
            if n > rho { e.scale(rho / n) } else { e }
        };
        let ea = clamp(sampling::signed_orthogonal_noise(&mut rng, dim, rho));
        let eb = clamp(sampling::signed_orthogonal_noise(&mut rng, dim, rho));
        let entry = check_claim1(&SpdMatrix::new(va).unwrap(), &SpdMatrix::new(vb).unwrap(), &ea, &eb, &budget).unwrap();
        prop_assert!(entry.pass, "{entry:?}");
    }

    #[test]
    fn monotone_pairs_order_rayleigh_below_det_ratio(seed in any::<u64>(), dim in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = sampling::random_design(&mut rng, dim, 1.0, 1.0);
        let (a, _) = sampling::extend_design(&mut rng, &b, 1.0);
        prop_assert!(loewner_dominates(&a, &b, 1e-12).unwrap());
        let check = check_lemma12_ordering(&SpdMatrix::new(a).unwrap(), &SpdMatrix::new(b).unwrap()).unwrap();
        prop_assert!(check.ok, "{check:?}");
    }

    #[test]
    fn counterexamples_exist_whenever_noise_is_present(alpha in 1.01f64..20.0, rho in 0.01f64..=0.5, lambda in 0.1f64..10.0) {
        let budget = NoiseBudget::new(rho * lambda, lambda).unwrap();
        let c = find_counterexample(alpha, &budget, SearchMode::Analytic).unwrap();
        prop_assert!(c.verify().is_ok());
        prop_assert!(c.det_ratio <= alpha);
        prop_assert!(c.width_inflation > alpha.sqrt());
    }
}
