//! Warm start plus upper-confidence-bound rounds, one new sample per task
//! per round, with every acquisition variant.
//!
//! cargo run --release --example progressive_sampling

use groupnas::evaluation::{BaselineScores, CacheHeader, EvaluationCache, SyntheticOracle, SyntheticOracleConfig};
use groupnas::rng::stage_rng;
use groupnas::sampler::{AcquisitionVariant, GroundTruth, Sampler, SamplerConfig};
use groupnas::space::SearchSpaceConfig;
use groupnas::surrogate::{SurrogateConfig, TrainConfig};

fn main() -> groupnas::Result<()> {
    let space = SearchSpaceConfig::new(6, 2);
    let oracle = SyntheticOracle::new(SyntheticOracleConfig::default(), &space, BaselineScores::backbone(6))?;
    let train = TrainConfig {
        learning_rate: 2e-3,
        ..TrainConfig::default()
    };

    for variant in [
        AcquisitionVariant::MuPlusSigma,
        AcquisitionVariant::MuOnly,
        AcquisitionVariant::SigmaOnly,
    ] {
        let cfg = SamplerConfig {
            warm_start_size: 20,
            rounds: 5,
            variant,
            retrain_from_scratch: true,
            ..SamplerConfig::default()
        };
        let truth = GroundTruth::new(
            oracle.clone(),
            EvaluationCache::in_memory(CacheHeader::new("-", "-")),
            2,
        );
        let mut sampler = Sampler::new(
            space.clone(),
            SurrogateConfig::for_space(&space, 16),
            train.clone(),
            cfg,
            truth,
        )?;
        let state = sampler.run(stage_rng(0, "sampler"), None, None)?;

        println!("variant {variant}");
        println!("round  |D|  evaluations  cache hits  train MAE");
        for r in &state.history {
            println!(
                "{:>5}  {:>3}  {:>11}  {:>10}  {:.5}",
                r.round, r.dataset_size, r.evaluations, r.cache_hits, r.train_mae
            );
        }
        let best = state
            .dataset
            .iter()
            .max_by(|a, b| mean(&a.gains).total_cmp(&mean(&b.gains)))
            .expect("dataset is never empty");
        println!(
            "best sampled point {} (mean gain {:+.4})\n",
            best.point,
            mean(&best.gains)
        );
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
