//! Fits the gain surrogate to oracle samples and checks it on held-out points.
//!
//! cargo run --release --example surrogate_training

use groupnas::evaluation::{BaselineScores, SyntheticOracle, SyntheticOracleConfig};
use groupnas::rng::rng_from_seed;
use groupnas::space::{random_point, SearchSpaceConfig};
use groupnas::surrogate::{
    dataset_mae, init_params, predict_gains, save_checkpoint, train, SurrogateConfig, TrainConfig, TrainingSample,
};

fn main() -> groupnas::Result<()> {
    let space = SearchSpaceConfig::new(6, 2);
    let oracle = SyntheticOracle::new(SyntheticOracleConfig::default(), &space, BaselineScores::backbone(6))?;
    let mut rng = rng_from_seed(1);
    let samples: Vec<TrainingSample> = (0..300)
        .map(|_| {
            let p = random_point(&mut rng, &space);
            let g = oracle.true_gains(&p);
            TrainingSample::new(p, g)
        })
        .collect::<groupnas::Result<_>>()?;
    let (fit, held) = samples.split_at(200);

    let cfg = SurrogateConfig::for_space(&space, 16);
    let mut params = init_params(&cfg, &mut rng);
    println!("{} parameters", params.num_parameters());
    let tc = TrainConfig {
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    for stage in 1..=4 {
        let report = train(&mut params, fit, &tc, &mut rng)?;
        println!(
            "after {:>3} epochs: train MAE {:.5}, held-out MAE {:.5}",
            stage * tc.epochs_per_update,
            report.final_mae,
            dataset_mae(&params, held)
        );
    }

    let probe = &held[0];
    println!("\n{}", probe.point);
    for ((t, truth), pred) in probe
        .point
        .combination
        .members()
        .zip(&probe.gains)
        .zip(predict_gains(&params, &probe.point))
    {
        println!("  {t}: true {truth:+.4}  predicted {pred:+.4}");
    }

    let dir = std::env::temp_dir().join("groupnas-surrogate-example");
    save_checkpoint(&params, &dir)?;
    println!("\ncheckpoint written to {}", dir.display());
    Ok(())
}
