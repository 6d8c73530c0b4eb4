//! Warm start and progressive rounds against the synthetic oracle.

use groupnas::evaluation::{BaselineScores, CacheHeader, EvaluationCache, SyntheticOracle, SyntheticOracleConfig};
use groupnas::rng::rng_from_seed;
use groupnas::sampler::{
    acquisition_value, argmax, score_combination, AcquisitionVariant, GroundTruth, Sampler, SamplerConfig, SearchState,
    SigmaMode,
};
use groupnas::space::{SearchPoint, SearchSpaceConfig, TaskCombination, TaskId};
use groupnas::surrogate::{init_params, SurrogateConfig, SurrogateParams, TrainConfig};
use proptest::prelude::*;

fn sampler(n: usize, p: usize, cfg: SamplerConfig) -> Sampler<SyntheticOracle> {
    let space = SearchSpaceConfig::new(n, p);
    let oracle = SyntheticOracle::new(SyntheticOracleConfig::default(), &space, BaselineScores::backbone(n)).unwrap();
    let truth = GroundTruth::new(oracle, EvaluationCache::in_memory(CacheHeader::new("c", "b")), 2);
    let train = TrainConfig {
        learning_rate: 1e-3,
        epochs_per_update: 10,
        ..TrainConfig::default()
    };
    Sampler::new(space.clone(), SurrogateConfig::for_space(&space, 8), train, cfg, truth).unwrap()
}

fn small_cfg() -> SamplerConfig {
    SamplerConfig {
        warm_start_size: 6,
        archs_per_combination: 8,
        top_archs: 3,
        rounds: 3,
        ..SamplerConfig::default()
    }
}

#[test]
fn warm_start_uses_the_full_task_set_and_distinct_architectures() {
    let mut s = sampler(5, 2, small_cfg());
    let state = s.warm_start(rng_from_seed(1)).unwrap();
    assert_eq!(state.dataset.len(), 6);
    let full = TaskCombination::full(5);
    for sample in &state.dataset {
        assert_eq!(sample.point.combination, full);
        assert_eq!(sample.gains.len(), 5);
    }
    let mut archs: Vec<_> = state.dataset.iter().map(|s| s.point.architecture.clone()).collect();
    archs.sort_by_key(|a| a.ops().iter().map(|o| o.index()).collect::<Vec<_>>());
    archs.dedup();
    assert_eq!(archs.len(), 6);
    assert_eq!(state.counters.evaluations, 6);
    assert_eq!(state.round_index, 0);
}

#[test]
fn each_round_adds_one_anchored_sample_per_task() {
    let mut s = sampler(5, 2, small_cfg());
    let mut state = s.warm_start(rng_from_seed(2)).unwrap();
    for r in 1..=3 {
        let before = state.dataset.len();
        s.progressive_round(&mut state).unwrap();
        assert_eq!(state.round_index, r);
        if state.counters.cache_hits == 0 {
            assert_eq!(state.dataset.len(), 6 + r * 5);
        }
        for (task, sample) in state.dataset[before..].iter().enumerate() {
            if state.counters.cache_hits == 0 {
                assert!(sample.point.combination.contains(TaskId(task)));
            }
        }
        assert!(state.counters.evaluations <= 6 + r * 5);
    }
    assert_eq!(s.truth.cache().len(), state.counters.evaluations);
}

#[test]
fn zero_rounds_return_the_warm_start_state() {
    let cfg = SamplerConfig {
        rounds: 0,
        ..small_cfg()
    };
    let mut a = sampler(4, 1, cfg.clone());
    let mut b = sampler(4, 1, cfg);
    let ran = a.run(rng_from_seed(3), None, None).unwrap();
    let warm = b.warm_start(rng_from_seed(3)).unwrap();
    assert_eq!(ran.dataset, warm.dataset);
    assert_eq!(ran.params, warm.params);
    assert_eq!(ran.history, warm.history);
}

fn zero_surrogate_state(s: &Sampler<SyntheticOracle>, seed: u64) -> SearchState {
    SearchState {
        dataset: Vec::new(),
        params: SurrogateParams::zeros(&s.surrogate),
        round_index: 0,
        rng: rng_from_seed(seed),
        counters: Default::default(),
        history: Vec::new(),
    }
}

#[test]
fn constant_surrogate_makes_mu_and_mu_plus_sigma_select_alike() {
    let pick = |variant| {
        let mut s = sampler(5, 2, SamplerConfig { variant, ..small_cfg() });
        let mut state = zero_surrogate_state(&s, 4);
        s.progressive_round(&mut state).unwrap();
        state
            .dataset
            .iter()
            .map(|d| d.point.clone())
            .collect::<Vec<SearchPoint>>()
    };
    let mu = pick(AcquisitionVariant::MuOnly);
    assert_eq!(mu.len(), 5);
    assert_eq!(mu, pick(AcquisitionVariant::MuPlusSigma));
}

#[test]
fn equal_sizes_keep_every_sampled_architecture() {
    let space = SearchSpaceConfig::new(4, 2);
    let params = init_params(&SurrogateConfig::for_space(&space, 8), &mut rng_from_seed(5));
    let comb = TaskCombination::from_tasks([TaskId(1), TaskId(2)]).unwrap();
    let score = score_combination(
        &params,
        &space,
        comb,
        TaskId(1),
        7,
        7,
        SigmaMode::Std,
        &mut rng_from_seed(6),
    );
    assert_eq!(score.top.len(), 7);
    let var = score_combination(
        &params,
        &space,
        comb,
        TaskId(1),
        7,
        7,
        SigmaMode::Var,
        &mut rng_from_seed(6),
    );
    assert_eq!(var.top, score.top);
    assert!((var.sigma - score.sigma * score.sigma).abs() < 1e-15);
}

proptest! {
    #[test]
    fn increasing_affine_maps_keep_the_argmax(
        raw in prop::collection::vec(-1000i32..1000, 1..40),
        scale in 1i32..50,
        shift in -100i32..100,
    ) {
        let values: Vec<f64> = raw.iter().map(|&v| f64::from(v) / 1000.0).collect();
        let mapped: Vec<f64> = values.iter().map(|v| f64::from(scale) * v + f64::from(shift)).collect();
        prop_assert_eq!(argmax(&values), argmax(&mapped));
    }

    #[test]
    fn acquisition_is_monotone_in_mu_and_sigma(mu in -1.0f64..1.0, sigma in 0.0f64..1.0, d in 0.0f64..1.0) {
        for v in [AcquisitionVariant::MuPlusSigma, AcquisitionVariant::MuOnly, AcquisitionVariant::SigmaOnly] {
            prop_assert!(acquisition_value(mu + d, sigma, 0.5, v) >= acquisition_value(mu, sigma, 0.5, v));
            prop_assert!(acquisition_value(mu, sigma + d, 0.5, v) >= acquisition_value(mu, sigma, 0.5, v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn budget_and_anchor_containment_hold(seed in 0u64..1000, n in 2usize..5, rounds in 0usize..4) {
        let cfg = SamplerConfig { rounds, ..small_cfg() };
        let budget = cfg.evaluation_budget(n);
        let mut s = sampler(n, 1, cfg);
        let mut state = s.warm_start(rng_from_seed(seed)).unwrap();
        for _ in 0..rounds {
            let known = state.dataset.len();
            let hits = state.counters.cache_hits;
            s.progressive_round(&mut state).unwrap();
            if state.counters.cache_hits == hits {
                for (task, sample) in state.dataset[known..].iter().enumerate() {
                    prop_assert!(sample.point.combination.contains(TaskId(task)));
                }
            }
        }
        prop_assert!(state.counters.evaluations <= budget);
        prop_assert_eq!(s.truth.cache().len(), state.counters.evaluations);
    }
}
