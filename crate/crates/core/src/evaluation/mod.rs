//! Ground truth: gain arithmetic, evaluators and the evaluation cache.

mod cache;
mod external;
mod gains;
mod synthetic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::space::SearchPoint;

pub use cache::{CacheHeader, EvaluationCache};
pub use external::{ExternalEvaluator, PROTOCOL_VERSION};
pub use gains::{compute_gains, overall_gain, per_task_best, BaselineScores, GainVector, TaskBest, BACKBONE_AVP};
pub use synthetic::{SyntheticOracle, SyntheticOracleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationSource {
    Synthetic,
    External,
}

/// Outcome of one multi-task training run on `(C, A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub point: SearchPoint,
    /// Raw metric per member task.
    pub metrics: BTreeMap<usize, f64>,
    pub gains: GainVector,
    pub source: EvaluationSource,
    /// Logical clock: position in the evaluation log.
    pub timestamp: u64,
}

impl EvaluationRecord {
    /// Gains in ascending task order of the combination.
    pub fn gain_list(&self) -> Vec<f64> {
        self.point
            .combination
            .members()
            .map(|t| self.gains.per_task[&t.index()])
            .collect()
    }
}

/// Per-point result of an evaluator call; `Err` carries the evaluator's message.
pub type PointOutcome = std::result::Result<EvaluationRecord, String>;

/// Anything that can run the multi-task procedure on a batch of points.
///
/// Results come back in request order.
pub trait Evaluator {
    fn evaluate(&mut self, points: &[SearchPoint]) -> Result<Vec<PointOutcome>>;

    fn baselines(&self) -> &BaselineScores;
}

/// Failed points after the retry budget was spent.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedPoint {
    pub point: SearchPoint,
    pub message: String,
    pub attempts: usize,
}

/// Evaluates `points`, retrying failed ones up to `retries` extra times.
///
/// Transport errors abort immediately. The first vector is aligned with
/// `points`; `None` marks a point that failed every attempt.
pub fn evaluate_with_retries<E: Evaluator + ?Sized>(
    evaluator: &mut E,
    points: &[SearchPoint],
    retries: usize,
) -> Result<(Vec<Option<EvaluationRecord>>, Vec<FailedPoint>)> {
    let mut results: Vec<Option<EvaluationRecord>> = vec![None; points.len()];
    let mut last_error: Vec<String> = vec![String::new(); points.len()];
    let mut pending: Vec<usize> = (0..points.len()).collect();
    let mut attempts = 0;
    while !pending.is_empty() && attempts <= retries {
        attempts += 1;
        let batch: Vec<SearchPoint> = pending.iter().map(|&i| points[i].clone()).collect();
        let outcomes = evaluator.evaluate(&batch)?;
        let mut still = Vec::new();
        for (&i, outcome) in pending.iter().zip(outcomes) {
            match outcome {
                Ok(rec) => results[i] = Some(rec),
                Err(msg) => {
                    log::warn!("evaluation of {} failed (attempt {attempts}): {msg}", points[i]);
                    last_error[i] = msg;
                    still.push(i);
                }
            }
        }
        pending = still;
    }
    let failed = pending
        .into_iter()
        .map(|i| FailedPoint {
            point: points[i].clone(),
            message: std::mem::take(&mut last_error[i]),
            attempts,
        })
        .collect();
    Ok((results, failed))
}
