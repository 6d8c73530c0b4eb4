//! The persistent workflow behind the `groupnas` binary: an interrupted
//! search resumed from its checkpoint, then derive, evaluate and report.
//!
//! cargo run --release --example run_directory

use groupnas::run::{derive, evaluate, report, search, DerivationOverrides, EvaluateOptions, RunConfig, SearchOptions};

fn main() -> groupnas::Result<()> {
    let root = std::env::temp_dir().join("groupnas-run-example");
    let run = root.join("run");
    let mut cfg = RunConfig::from_json_str(
        r#"{"seed": 5, "surrogate": {"hidden_dim": 16}, "train": {"learning_rate": 0.001}, "sampler": {"rounds": 6}}"#,
    )?;
    cfg.output_dir = Some(run.clone());

    let partial = search(
        &cfg,
        &run,
        &SearchOptions {
            force: true,
            stop_after_round: Some(3),
            ..Default::default()
        },
    )?;
    println!(
        "stopped after round {} with |D| = {}",
        partial.round_index,
        partial.dataset.len()
    );
    let done = search(
        &cfg,
        &run,
        &SearchOptions {
            resume: true,
            ..Default::default()
        },
    )?;
    println!(
        "resumed to round {}, {} evaluations",
        done.round_index, done.counters.evaluations
    );

    let (_, text) = derive(&run, &DerivationOverrides::default(), None, true)?;
    print!("\n{text}");
    let fin = evaluate(
        &run,
        &EvaluateOptions {
            force: true,
            ..Default::default()
        },
    )?;
    println!("\nrealized G {:.6}", fin.realized_gain);

    let notes = report(std::slice::from_ref(&run), &root.join("summary"), true)?;
    for n in notes {
        println!("note: {n}");
    }
    println!("files in {}:", run.display());
    let mut names: Vec<String> = std::fs::read_dir(&run)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    println!("  {}", names.join("  "));
    Ok(())
}
