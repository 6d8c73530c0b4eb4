//! Ground truth from the synthetic oracle and its exact optimum.
//!
//! cargo run --release --example synthetic_oracle

use groupnas::derivation::brute_force_best;
use groupnas::evaluation::{overall_gain, BaselineScores, SyntheticOracle, SyntheticOracleConfig};
use groupnas::space::{SearchPoint, SearchSpaceConfig};

fn main() -> groupnas::Result<()> {
    let space = SearchSpaceConfig::new(6, 2);
    let oracle = SyntheticOracle::new(SyntheticOracleConfig::default(), &space, BaselineScores::backbone(6))?;

    for text in [
        "tasks=0|P=2|ops=ffn,ffn,ffn",
        "tasks=0,1,2|P=2|ops=rnn,attention,ffn",
        "tasks=0,1,2,3,4,5|P=2|ops=rnn,rnn,rnn",
    ] {
        let point = SearchPoint::decode(text, &space)?;
        let rec = oracle.evaluate_point(&point);
        let gains: Vec<String> = rec
            .gains
            .per_task
            .iter()
            .map(|(t, g)| format!("T{t} {g:+.4}"))
            .collect();
        println!("{text:<44} {}", gains.join("  "));
    }

    for budget in [1, 2, 6] {
        let (population, g) = brute_force_best(&oracle, &space, budget)?;
        let records: Vec<_> = population.members.iter().map(|p| oracle.evaluate_point(p)).collect();
        assert_eq!(overall_gain(&records, 6)?, g);
        println!("\nbest population with B={budget}: G = {g:.6}");
        for m in &population.members {
            println!("  {m}");
        }
    }
    Ok(())
}
