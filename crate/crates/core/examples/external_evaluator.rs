//! Ground truth from a child process over the line-delimited JSON protocol,
//! using the echo evaluator in `examples/evaluators/`.
//!
//! cargo run --example external_evaluator

use std::path::PathBuf;
use std::time::Duration;

use groupnas::evaluation::{BaselineScores, Evaluator, ExternalEvaluator};
use groupnas::rng::rng_from_seed;
use groupnas::space::{random_point, SearchSpaceConfig};

fn main() -> groupnas::Result<()> {
    let space = SearchSpaceConfig::new(5, 2);
    let baselines = BaselineScores::backbone(5);
    let dir = std::env::temp_dir().join("groupnas-external-example");
    std::fs::create_dir_all(&dir)?;
    let baselines_path = dir.join("baselines.json");
    baselines.save(&baselines_path)?;

    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/evaluators/echo_evaluator.py");
    let command = format!("python3 {} {}", script.display(), baselines_path.display());
    let mut evaluator = ExternalEvaluator::spawn(&command, baselines, 42, Duration::from_secs(60))?;

    let mut rng = rng_from_seed(3);
    let points: Vec<_> = (0..4).map(|_| random_point(&mut rng, &space)).collect();
    for outcome in evaluator.evaluate(&points)? {
        match outcome {
            Ok(rec) => println!("{:<44} gains {:?}", rec.point.to_string(), rec.gain_list()),
            Err(msg) => println!("failed: {msg}"),
        }
    }
    let status = evaluator.shutdown()?;
    println!("evaluator exited with {status}");
    Ok(())
}
