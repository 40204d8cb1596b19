use amrt_core::engine::{plan, PlannerConfig};
use amrt_core::evaluation::{evaluate_full, evaluate_incremental};
use amrt_core::fixture::{self, gen::random_model};
use amrt_core::objectives::utility;
use amrt_core::purity;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn planning_leaves_the_model_untouched(seed in any::<u64>(), depth in 1usize..4, beam in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = random_model(&mut rng, 8);
        let bundle = fixture::shop_bundle();
        let results = evaluate_full(&model, &bundle.conditions, 1);
        let before = model.digest();
        let snapshot = model.clone();
        let cfg = PlannerConfig { max_depth: depth, beam_width: Some(beam), ..Default::default() };
        let p = plan(&mut model, &bundle, &results, &cfg).unwrap();
        prop_assert_eq!(model.digest(), before);
        prop_assert!(model.same_content(&snapshot));
        prop_assert!(!model.has_open_transaction());
        prop_assert!(p.steps.len() <= depth);
        prop_assert!(p.score + 1e-12 >= p.current_utility, "never worse than doing nothing");
    }

    #[test]
    fn utility_is_a_unit_interval_value(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, 12);
        let b = fixture::shop_bundle();
        let u: f64 = utility(&model, &b.qualities, &b.preferences).unwrap();
        prop_assert!((0.0..=1.0).contains(&u));
        let u32: f32 = utility(&model, &b.qualities, &b.preferences).unwrap();
        prop_assert!((u - u32 as f64).abs() < 1e-5);
    }

    #[test]
    fn evaluation_is_read_only(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, 12);
        let b = fixture::shop_bundle();
        let before = model.digest();
        let checks = purity::checks_performed();
        let full = evaluate_full(&model, &b.conditions, 3);
        let _ = evaluate_incremental(&model, &b.conditions, &[], 3);
        prop_assert_eq!(model.digest(), before);
        prop_assert!(full.windows(2).all(|w| w[0].priority >= w[1].priority));
        if cfg!(debug_assertions) {
            prop_assert!(purity::checks_performed() > checks);
        }
    }
}
