//! Deterministic stand-in for the multi-task training procedure.
//!
//! For task `n` in combination `C` with architecture `A`:
//!
//! ```text
//! g_n = mean_{t ∈ C \ {n}} B[n,t]          (0 when |C| = 1)
//!     + mean_{edges e} V[op(e), n]
//!     - c · max(0, |C| - k)²
//!     + ε,   ε ~ Normal(0, noise_std²)
//! ```
//!
//! `B` is symmetric with zero diagonal and entries uniform in `(-a, a)`; `V`
//! has entries uniform in `(-b, b)`. Both are drawn once from a ChaCha8
//! stream seeded with `seed`: first the upper triangle of `B` row by row,
//! then `V` row by row (operation-major). A uniform draw is
//! `scale · (2u - 1)` with `u` the 53-bit float of the next 64-bit word.
//! Noise uses a separate stream seeded from `seed` and the point's canonical
//! encoding, so a point's record does not depend on evaluation order.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BaselineScores, EvaluationRecord, EvaluationSource, Evaluator, GainVector, PointOutcome};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, rng_from_seed};
use crate::space::{SearchPoint, SearchSpaceConfig, TaskId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticOracleConfig {
    pub seed: u64,
    pub pair_affinity_scale: f64,
    pub op_affinity_scale: f64,
    pub crowding_coeff: f64,
    pub crowding_knee: usize,
    pub noise_std: f64,
}

impl Default for SyntheticOracleConfig {
    fn default() -> Self {
        SyntheticOracleConfig {
            seed: 0,
            pair_affinity_scale: 0.05,
            op_affinity_scale: 0.03,
            crowding_coeff: 0.01,
            crowding_knee: 3,
            noise_std: 0.0,
        }
    }
}

impl SyntheticOracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pair_affinity_scale < 0.0 || self.op_affinity_scale < 0.0 || self.crowding_coeff < 0.0 {
            return Err(Error::config("synthetic oracle scales must be non-negative"));
        }
        if self.crowding_knee < 1 {
            return Err(Error::config("crowding_knee must be at least 1"));
        }
        if self.noise_std < 0.0 {
            return Err(Error::config("noise_std must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    cfg: SyntheticOracleConfig,
    space: SearchSpaceConfig,
    baselines: BaselineScores,
    pair: Vec<f64>,
    op_affinity: Vec<f64>,
    evaluations: usize,
}

fn symmetric_uniform<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    scale * (2.0 * rng.random::<f64>() - 1.0)
}

impl SyntheticOracle {
    pub fn new(cfg: SyntheticOracleConfig, space: &SearchSpaceConfig, baselines: BaselineScores) -> Result<Self> {
        cfg.validate()?;
        space.validate()?;
        baselines.validate()?;
        if baselines.num_tasks() != space.num_tasks {
            return Err(Error::config(format!(
                "baselines cover {} tasks, space has {}",
                baselines.num_tasks(),
                space.num_tasks
            )));
        }
        let n = space.num_tasks;
        let mut rng = rng_from_seed(cfg.seed);
        let mut pair = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = symmetric_uniform(&mut rng, cfg.pair_affinity_scale);
                pair[i * n + j] = v;
                pair[j * n + i] = v;
            }
        }
        let op_affinity = (0..space.operations.len() * n)
            .map(|_| symmetric_uniform(&mut rng, cfg.op_affinity_scale))
            .collect();
        Ok(SyntheticOracle {
            cfg,
            space: space.clone(),
            baselines,
            pair,
            op_affinity,
            evaluations: 0,
        })
    }

    pub fn config(&self) -> &SyntheticOracleConfig {
        &self.cfg
    }

    pub fn space(&self) -> &SearchSpaceConfig {
        &self.space
    }

    /// Number of points evaluated through the [`Evaluator`] interface.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// `B[n, t]`.
    pub fn pair_affinity(&self, n: usize, t: usize) -> f64 {
        self.pair[n * self.space.num_tasks + t]
    }

    /// `V[op_slot, n]` where `op_slot` indexes the space's operation list.
    pub fn op_affinity(&self, op_slot: usize, n: usize) -> f64 {
        self.op_affinity[op_slot * self.space.num_tasks + n]
    }

    /// Gains in ascending member order.
    pub fn true_gains(&self, point: &SearchPoint) -> Vec<f64> {
        let comb = point.combination;
        let size = comb.len();
        let crowding = self.cfg.crowding_coeff * (size.saturating_sub(self.cfg.crowding_knee) as f64).powi(2);
        let slots: Vec<usize> = point
            .architecture
            .ops()
            .iter()
            .map(|op| {
                self.space
                    .operations
                    .iter()
                    .position(|o| o == op)
                    .expect("operation outside the oracle's space")
            })
            .collect();
        let mut noise = (self.cfg.noise_std > 0.0).then(|| {
            let seed = self.cfg.seed ^ fnv1a(point.encode().as_bytes());
            (rng_from_seed(seed), Normal::new(0.0, self.cfg.noise_std).unwrap())
        });

        comb.members()
            .map(|TaskId(n)| {
                let pair_term = if size == 1 {
                    0.0
                } else {
                    comb.members()
                        .filter(|t| t.0 != n)
                        .map(|t| self.pair_affinity(n, t.0))
                        .sum::<f64>()
                        / (size - 1) as f64
                };
                let op_term = slots.iter().map(|&s| self.op_affinity(s, n)).sum::<f64>() / slots.len() as f64;
                let eps = noise.as_mut().map_or(0.0, |(rng, dist)| dist.sample(rng));
                pair_term + op_term - crowding + eps
            })
            .collect()
    }

    pub fn evaluate_point(&self, point: &SearchPoint) -> EvaluationRecord {
        let gains = self.true_gains(point);
        let mut metrics = BTreeMap::new();
        let mut per_task = BTreeMap::new();
        for (t, g) in point.combination.members().zip(gains) {
            let s = self.baselines.scores[t.index()];
            metrics.insert(t.index(), s * (1.0 + g));
            per_task.insert(t.index(), g);
        }
        EvaluationRecord {
            point: point.clone(),
            metrics,
            gains: GainVector { per_task },
            source: EvaluationSource::Synthetic,
            timestamp: 0,
        }
    }
}

impl Evaluator for SyntheticOracle {
    fn evaluate(&mut self, points: &[SearchPoint]) -> Result<Vec<PointOutcome>> {
        self.evaluations += points.len();
        Ok(points
            .iter()
            .map(|p| {
                self.space.check_point(p).map_err(|e| e.to_string())?;
                Ok(self.evaluate_point(p))
            })
            .collect())
    }

    fn baselines(&self) -> &BaselineScores {
        &self.baselines
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{random_architecture, Architecture, OperationKind, TaskCombination};

    fn oracle(cfg: SyntheticOracleConfig, n: usize, p: usize) -> SyntheticOracle {
        let space = SearchSpaceConfig::new(n, p);
        SyntheticOracle::new(cfg, &space, BaselineScores::backbone(n)).unwrap()
    }

    #[test]
    fn singleton_without_op_affinity_is_neutral() {
        let o = oracle(
            SyntheticOracleConfig {
                op_affinity_scale: 0.0,
                ..Default::default()
            },
            5,
            2,
        );
        let arch = random_architecture(&mut rng_from_seed(1), o.space());
        let rec = o.evaluate_point(&SearchPoint::new(TaskCombination::singleton(TaskId(3)), arch));
        assert_eq!(rec.gain_list(), vec![0.0]);
        assert_eq!(rec.metrics[&3], o.baselines.scores[3]);
    }

    #[test]
    fn pair_matrix_is_symmetric_with_zero_diagonal() {
        let o = oracle(SyntheticOracleConfig::default(), 6, 1);
        for i in 0..6 {
            assert_eq!(o.pair_affinity(i, i), 0.0);
            for j in 0..6 {
                assert_eq!(o.pair_affinity(i, j), o.pair_affinity(j, i));
                assert!(o.pair_affinity(i, j).abs() < 0.05);
            }
        }
    }

    #[test]
    fn pair_term_is_symmetric_between_partners() {
        let o = oracle(
            SyntheticOracleConfig {
                op_affinity_scale: 0.0,
                ..Default::default()
            },
            6,
            1,
        );
        let arch = Architecture::new(1, vec![OperationKind::Rnn]).unwrap();
        let rec = o.evaluate_point(&SearchPoint::new(
            TaskCombination::from_tasks([TaskId(1), TaskId(4)]).unwrap(),
            arch,
        ));
        let g = rec.gain_list();
        assert_eq!(g[0], g[1]);
        assert_eq!(g[0], o.pair_affinity(1, 4));
    }

    #[test]
    fn crowding_penalty_kicks_in_past_knee() {
        let o = oracle(
            SyntheticOracleConfig {
                pair_affinity_scale: 0.0,
                op_affinity_scale: 0.0,
                ..Default::default()
            },
            6,
            1,
        );
        let arch = Architecture::new(1, vec![OperationKind::Zero]).unwrap();
        let g3 = o.true_gains(&SearchPoint::new(TaskCombination::full(3), arch.clone()));
        let g5 = o.true_gains(&SearchPoint::new(TaskCombination::full(5), arch));
        assert!(g3.iter().all(|&g| g == 0.0));
        assert!(g5.iter().all(|&g| (g + 0.04).abs() < 1e-15));
    }

    #[test]
    fn noise_is_a_function_of_the_point() {
        let cfg = SyntheticOracleConfig {
            noise_std: 0.01,
            ..Default::default()
        };
        let a = oracle(cfg.clone(), 5, 2);
        let b = oracle(cfg, 5, 2);
        let mut rng = rng_from_seed(3);
        let p1 = crate::space::random_point(&mut rng, a.space());
        let p2 = crate::space::random_point(&mut rng, a.space());
        let first = a.true_gains(&p1);
        let _ = b.true_gains(&p2);
        assert_eq!(first, b.true_gains(&p1));
    }
}
