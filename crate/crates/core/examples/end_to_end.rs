//! Search, derivation and final evaluation in memory, compared with the
//! exact optimum. Pass a seed as the first argument.
//!
//! cargo run --release --example end_to_end -- 3

use groupnas::run::{bruteforce, run_synthetic, RunConfig};

fn main() -> groupnas::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(Ok(0), |s| s.parse())
        .expect("seed must be an integer");
    let mut cfg = RunConfig::from_json_str(
        r#"{
            "space": {"num_tasks": 6, "num_nodes": 2},
            "surrogate": {"hidden_dim": 16},
            "train": {"learning_rate": 0.002},
            "sampler": {"warm_start_size": 20, "rounds": 20, "retrain_from_scratch": true},
            "derivation": {"budget": 6}
        }"#,
    )?;
    cfg.seed = seed;

    let optimum = bruteforce(&cfg, None)?.optimum_gain;
    let outcome = run_synthetic(&cfg)?;
    println!(
        "evaluations spent   {} of {}",
        outcome.evaluations,
        cfg.sampler.evaluation_budget(6)
    );
    println!("predicted G         {:.6}", outcome.derivation.predicted_gain);
    println!("realized G          {:.6}", outcome.realized_gain);
    println!("optimum G*          {optimum:.6}");
    println!("realized / optimum  {:.3}", outcome.realized_gain / optimum);
    println!("population:");
    for rec in &outcome.records {
        println!("  {}", rec.point);
    }
    Ok(())
}
