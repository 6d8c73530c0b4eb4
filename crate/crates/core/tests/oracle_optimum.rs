//! The synthetic oracle's true optimum for N=6, P=2, reached by two
//! independent routes and frozen.

use groupnas::derivation::{brute_force_best, predicted_overall_gain};
use groupnas::evaluation::{BaselineScores, SyntheticOracle, SyntheticOracleConfig};
use groupnas::run::{bruteforce, RunConfig};
use groupnas::space::{all_architectures, all_combinations, SearchPoint, SearchSpaceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FROZEN_OPTIMUM: f64 = 0.06192261146988005;
const N: usize = 6;
const OPS: usize = 5;

/// Redraws the pair and operation tables straight from the seeded stream
/// and maximises each task's gain in closed form: the pair/crowding part
/// depends only on the group and the operation part only on the edges, so a
/// task's best gain is the best group term plus its best single operation
/// placed on every edge.
fn analytic_optimum(cfg: &SyntheticOracleConfig) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |scale: f64| scale * (2.0 * rng.random::<f64>() - 1.0);
    let mut b = [[0.0f64; N]; N];
    for i in 0..N {
        for j in i + 1..N {
            let v = draw(cfg.pair_affinity_scale);
            b[i][j] = v;
            b[j][i] = v;
        }
    }
    let mut v = [[0.0f64; N]; OPS];
    for row in v.iter_mut() {
        for cell in row.iter_mut() {
            *cell = draw(cfg.op_affinity_scale);
        }
    }

    let mut total = 0.0;
    for n in 0..N {
        let mut best_group = f64::NEG_INFINITY;
        for mask in 1u32..(1 << N) {
            if mask & (1 << n) == 0 {
                continue;
            }
            let size = mask.count_ones() as usize;
            let pair = if size == 1 {
                0.0
            } else {
                (0..N)
                    .filter(|&t| t != n && mask & (1 << t) != 0)
                    .map(|t| b[n][t])
                    .sum::<f64>()
                    / (size - 1) as f64
            };
            let over = size.saturating_sub(cfg.crowding_knee) as f64;
            best_group = best_group.max(pair - cfg.crowding_coeff * over * over);
        }
        let best_op = (0..OPS).map(|o| v[o][n]).fold(f64::NEG_INFINITY, f64::max);
        total += best_group + best_op;
    }
    total / N as f64
}

/// Mean over tasks of the best true gain seen anywhere in the 7,875 points.
fn enumerated_optimum(oracle: &SyntheticOracle, space: &SearchSpaceConfig) -> (usize, f64) {
    let mut best = [f64::NEG_INFINITY; N];
    let mut points = 0;
    for comb in all_combinations(space) {
        for arch in all_architectures(space) {
            let p = SearchPoint::new(comb, arch);
            for (t, g) in comb.members().zip(oracle.true_gains(&p)) {
                best[t.index()] = best[t.index()].max(g);
            }
            points += 1;
        }
    }
    (points, best.iter().sum::<f64>() / N as f64)
}

#[test]
fn true_optimum_for_six_tasks_two_nodes() {
    let space = SearchSpaceConfig::new(N, 2);
    let cfg = SyntheticOracleConfig::default();
    let oracle = SyntheticOracle::new(cfg.clone(), &space, BaselineScores::backbone(N)).unwrap();

    let analytic = analytic_optimum(&cfg);
    let (points, enumerated) = enumerated_optimum(&oracle, &space);
    assert_eq!(points, 7875);
    assert!((analytic - enumerated).abs() < 1e-15, "{analytic} vs {enumerated}");
    assert!((enumerated - FROZEN_OPTIMUM).abs() < 1e-15, "{enumerated}");

    let (population, g) = brute_force_best(&oracle, &space, N).unwrap();
    assert!((g - FROZEN_OPTIMUM).abs() < 1e-15);
    assert!(population.covers(N));
    let rescored = predicted_overall_gain(&oracle, &population, N).unwrap();
    assert!((rescored - FROZEN_OPTIMUM).abs() < 1e-15);
}

#[test]
fn bruteforce_entry_point_reports_the_frozen_optimum() {
    let cfg = RunConfig::from_json_str(r#"{"space":{"num_tasks":6,"num_nodes":2}}"#).unwrap();
    let report = bruteforce(&cfg, Some(6)).unwrap();
    assert_eq!(report.points, 7875);
    assert!((report.optimum_gain - FROZEN_OPTIMUM).abs() < 1e-15);
    assert!(report.text.starts_with("points 7875\n"));
}
