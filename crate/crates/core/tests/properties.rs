mod common;

use adc_core::diagnostics::{global_q, max_backslide, quasi_mono_monitor};
use adc_core::game::{build_effective_game, exploration_kernel, validate_game, GameClass};
use adc_core::mdp::{best_response_value, policy_evaluation, StrategyProfile};
use adc_core::{ExactGame, ExactProfile, Rational};
use num_traits::FromPrimitive;
use proptest::prelude::*;
use rand::Rng;

fn rational(x: f64) -> Rational {
    Rational::from_f64(x).expect("finite")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_rows_are_distributions(eps in 1e-6f64..1.0, m in 1usize..6, a in 0usize..6) {
        let a = a % m;
        let row = exploration_kernel(&eps, m, a).unwrap();
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        prop_assert!(row.iter().all(|&p| p >= eps / m as f64 - 1e-15));
        prop_assert_eq!(adc_core::scalar::argmax(&row), Some(a));
    }

    #[test]
    fn effective_game_is_linear_in_rewards(seed in any::<u64>(), eps in 1e-6f64..0.9, c in -3.0f64..3.0) {
        let mut rng = common::rng(seed);
        let g = common::random_game(&mut rng, 3, 3);
        let r1 = g.rewards_flat().to_vec();
        let r2: Vec<f64> = (0..r1.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mixed: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a + c * b).collect();
        let e = |r: Vec<f64>| build_effective_game(&g.with_rewards(r, GameClass::General).unwrap(), &eps).unwrap();
        let (e1, e2, em) = (e(r1), e(r2), e(mixed));
        for ((x, y), z) in e1.rewards_flat().iter().zip(e2.rewards_flat()).zip(em.rewards_flat()) {
            prop_assert!((x + c * y - z).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_game_keeps_reachability(seed in any::<u64>(), eps in 1e-6f64..0.9) {
        let mut rng = common::rng(seed);
        let g = common::random_game(&mut rng, 4, 3);
        let e = build_effective_game(&g, &eps).unwrap();
        let min = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(min(e.transitions_flat()) >= min(g.transitions_flat()) - 1e-15);
        prop_assert!(validate_game(&e).unwrap().passed);
    }

    #[test]
    fn global_q_is_affine_in_v(seed in any::<u64>(), c in -2.0f64..2.0) {
        let mut rng = common::rng(seed);
        let g = common::random_game(&mut rng, 3, 3);
        let n = g.n_states();
        let v1: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let v2: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let vm: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + c * b).collect();
        let zero = vec![0.0; n];
        let (q0, q1, q2, qm) = (
            global_q(&g, 0, &zero).unwrap(),
            global_q(&g, 0, &v1).unwrap(),
            global_q(&g, 0, &v2).unwrap(),
            global_q(&g, 0, &vm).unwrap(),
        );
        for e in 0..q0.len() {
            let expect = q1[e] + c * (q2[e] - q0[e]);
            prop_assert!((qm[e] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn backslide_is_nonincreasing(history in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 2..30)) {
        let b = quasi_mono_monitor(&history).unwrap();
        for w in b.windows(2) {
            for (x, y) in w[0].iter().zip(&w[1]) {
                prop_assert!(x >= y);
                prop_assert!(*y >= 0.0);
            }
        }
        let m = max_backslide(&b);
        prop_assert!(m.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn best_response_dominates_and_is_bounded(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let g = common::random_game(&mut rng, 3, 3);
        let profile = common::random_profile(&mut rng, &g);
        let bound = g.max_abs_reward() / (1.0 - g.gamma());
        for i in 0..g.n_agents() {
            let (br, _) = best_response_value(&g, i, &profile, 1e-12).unwrap();
            let deviation: Vec<Vec<f64>> = (0..g.n_states()).map(|_| common::random_simplex(&mut rng, g.n_actions(i))).collect();
            for p in [&profile, &profile.with_agent(i, deviation)] {
                let u = policy_evaluation(&g, i, p).unwrap();
                for (b, x) in br.values.iter().zip(&u.values) {
                    prop_assert!(b + 1e-9 >= *x);
                    prop_assert!(x.abs() <= bound + 1e-9);
                }
            }
        }
    }
}

#[test]
fn generated_transition_floor_holds() {
    use adc_core::game::{generate_random_game, GameSpec};
    for seed in 0..100 {
        let spec = GameSpec::new(vec![3, 3], 3, 0.8, GameClass::ZeroSum);
        let g: adc_core::Game = generate_random_game(&spec, seed).unwrap();
        let min = g.transitions_flat().iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min >= spec.transition_floor - 1e-15, "seed {seed}: {min}");
    }
}

#[test]
fn effective_equivalence_is_exact_in_rationals() {
    let mut rng = common::rng(11);
    for _ in 0..5 {
        let g = common::random_game(&mut rng, 3, 2);
        let mu = common::random_profile(&mut rng, &g);
        let exact: ExactGame = g.map_scalar(|x| rational(*x));
        let mu: ExactProfile = StrategyProfile::new(
            mu.strategies
                .iter()
                .map(|rows| {
                    rows.iter()
                        .map(|row| {
                            let mut r: Vec<Rational> = row.iter().map(|x| rational(*x)).collect();
                            let head: Rational = r[..r.len() - 1].iter().cloned().sum();
                            *r.last_mut().unwrap() = Rational::from_integer(1.into()) - head;
                            r
                        })
                        .collect()
                })
                .collect(),
        );
        let eps = Rational::new(1.into(), 50.into());
        let effective = build_effective_game(&exact, &eps).unwrap();
        let pi = mu.perturbed(&eps);
        for i in 0..exact.n_agents() {
            let u = policy_evaluation(&exact, i, &pi).unwrap().values;
            let u_eps = policy_evaluation(&effective, i, &mu).unwrap().values;
            assert_eq!(u, u_eps);
        }
    }
}
