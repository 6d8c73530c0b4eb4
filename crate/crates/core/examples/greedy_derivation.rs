//! Budgeted population search: greedy mutation with restarts against the
//! exhaustive optimum, scored by the oracle itself.
//!
//! cargo run --release --example greedy_derivation

use groupnas::derivation::{brute_force_best, greedy_search, render_report, DerivationConfig};
use groupnas::evaluation::{BaselineScores, SyntheticOracle, SyntheticOracleConfig};
use groupnas::space::SearchSpaceConfig;

fn main() -> groupnas::Result<()> {
    let space = SearchSpaceConfig::new(6, 2);
    let oracle = SyntheticOracle::new(SyntheticOracleConfig::default(), &space, BaselineScores::backbone(6))?;

    for budget in [1, 2, 3, 6] {
        let cfg = DerivationConfig {
            budget,
            iterations: 1000,
            restarts: 8,
            seed: 42,
        };
        let result = greedy_search(&oracle, &cfg, &space)?;
        let exact = brute_force_best(&oracle, &space, budget).ok().map(|(_, g)| g);
        let accepted: usize = result.restarts.iter().map(|t| t.accepted.len() - 1).sum();
        let rejected: usize = result
            .restarts
            .iter()
            .map(|t| t.rejected_coverage + t.rejected_duplicate)
            .sum();
        println!(
            "B={budget}: greedy G {:.6}, exact {}, {accepted} accepted / {rejected} rejected mutations",
            result.predicted_gain,
            exact.map_or("not enumerable".to_string(), |g| format!("{g:.6}"))
        );
        if budget == 3 {
            print!("{}", render_report(&oracle, &result.population, budget, 6)?);
        }
    }
    Ok(())
}
