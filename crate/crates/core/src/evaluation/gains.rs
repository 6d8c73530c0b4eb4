use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::EvaluationRecord;
use crate::error::{Error, Result};
use crate::space::{TaskCombination, TaskId};

/// Single-task AVP of the recurrent backbone on 25 clinical prediction tasks.
/// Used as default reference scores for the synthetic oracle.
pub const BACKBONE_AVP: [f64; 25] = [
    0.5647, 0.4578, 0.1761, 0.5168, 0.4383, 0.2689, 0.4045, 0.1880, 0.5129, 0.5589, 0.5559, 0.3355, 0.5816, 0.5258,
    0.6129, 0.1281, 0.4243, 0.2303, 0.1417, 0.2228, 0.1417, 0.3786, 0.5497, 0.4866, 0.5574,
];

/// Single-task reference score `s_i` for every task.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineScores {
    pub metric_name: String,
    pub scores: Vec<f64>,
}

impl BaselineScores {
    pub fn new(metric_name: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        let b = BaselineScores {
            metric_name: metric_name.into(),
            scores,
        };
        b.validate()?;
        Ok(b)
    }

    /// Backbone AVP values for the first `num_tasks` tasks (cycled past 25).
    pub fn backbone(num_tasks: usize) -> Self {
        BaselineScores {
            metric_name: "avp".into(),
            scores: (0..num_tasks).map(|i| BACKBONE_AVP[i % BACKBONE_AVP.len()]).collect(),
        }
    }

    pub fn num_tasks(&self) -> usize {
        self.scores.len()
    }

    pub fn score(&self, task: usize) -> Option<f64> {
        self.scores.get(task).copied()
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::config("baselines list no tasks"));
        }
        for (i, &s) in self.scores.iter().enumerate() {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::config(format!(
                    "baseline score of task {i} must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        map.insert("metric".into(), Value::from(self.metric_name.clone()));
        for (i, &s) in self.scores.iter().enumerate() {
            map.insert(i.to_string(), Value::from(s));
        }
        Value::Object(map)
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::config("baselines file must hold a JSON object"))?;
        let metric = obj
            .get("metric")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::config("baselines file lacks a `metric` name"))?;
        let mut by_task = BTreeMap::new();
        for (k, v) in obj {
            if k == "metric" {
                continue;
            }
            let idx: usize = k
                .parse()
                .map_err(|_| Error::config(format!("baselines key `{k}` is not a task index")))?;
            let s = v
                .as_f64()
                .ok_or_else(|| Error::config(format!("baseline for task {idx} is not a number")))?;
            by_task.insert(idx, s);
        }
        let n = by_task.len();
        if by_task.keys().copied().ne(0..n) {
            return Err(Error::config("baselines must list tasks 0..N without gaps"));
        }
        BaselineScores::new(metric, by_task.into_values().collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.to_json())? + "\n")?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        hex_digest(self.to_json().to_string().as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Relative gain per task, keyed by task index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GainVector {
    pub per_task: BTreeMap<usize, f64>,
}

/// `g_i = (m_i - s_i) / s_i` for every task with a metric.
pub fn compute_gains(metrics: &BTreeMap<usize, f64>, baselines: &BaselineScores) -> Result<GainVector> {
    let mut per_task = BTreeMap::new();
    for (&task, &m) in metrics {
        let s = baselines
            .score(task)
            .ok_or_else(|| Error::config(format!("no baseline score for task {task}")))?;
        if s.is_nan() || s <= 0.0 {
            return Err(Error::config(format!("baseline score of task {task} must be positive")));
        }
        per_task.insert(task, (m - s) / s);
    }
    Ok(GainVector { per_task })
}

/// Which member supplies the best gain of a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskBest {
    pub task: TaskId,
    pub gain: f64,
    /// Index into the scored item list.
    pub member: usize,
}

/// Best gain per task over all items containing it; ties go to the earlier item.
///
/// Each item pairs a combination with gains in ascending member order.
pub fn per_task_best<'a, I>(num_tasks: usize, items: I) -> Result<Vec<TaskBest>>
where
    I: IntoIterator<Item = (TaskCombination, &'a [f64])>,
{
    let mut best: Vec<Option<TaskBest>> = vec![None; num_tasks];
    for (idx, (comb, gains)) in items.into_iter().enumerate() {
        for (task, &g) in comb.members().zip(gains) {
            let Some(slot) = best.get_mut(task.index()) else {
                continue;
            };
            if slot.is_none_or(|b| g > b.gain) {
                *slot = Some(TaskBest {
                    task,
                    gain: g,
                    member: idx,
                });
            }
        }
    }
    best.into_iter()
        .enumerate()
        .map(|(t, b)| b.ok_or(Error::Coverage(t)))
        .collect()
}

/// Mean over tasks of each task's best gain across the records.
pub fn overall_gain(records: &[EvaluationRecord], num_tasks: usize) -> Result<f64> {
    let lists: Vec<(TaskCombination, Vec<f64>)> =
        records.iter().map(|r| (r.point.combination, r.gain_list())).collect();
    let best = per_task_best(num_tasks, lists.iter().map(|(c, g)| (*c, g.as_slice())))?;
    Ok(best.iter().map(|b| b.gain).sum::<f64>() / num_tasks as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(pairs: &[(usize, f64)]) -> BTreeMap<usize, f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn gain_examples() {
        let b = BaselineScores::new("avp", vec![0.5, 0.5647]).unwrap();
        let g = compute_gains(&metrics(&[(0, 0.55)]), &b).unwrap();
        assert!((g.per_task[&0] - 0.1).abs() < 1e-12);
        let g = compute_gains(&metrics(&[(0, 0.5), (1, 0.5647)]), &b).unwrap();
        assert_eq!(g.per_task[&0], 0.0);
        assert_eq!(g.per_task[&1], 0.0);
        let g = compute_gains(&metrics(&[(1, 0.6212)]), &b).unwrap();
        assert!((g.per_task[&1] - 0.10005312555339117).abs() < 1e-12);
    }

    #[test]
    fn missing_or_bad_baseline() {
        let b = BaselineScores::backbone(2);
        assert!(compute_gains(&metrics(&[(5, 0.3)]), &b).is_err());
        assert!(BaselineScores::new("avp", vec![0.3, 0.0]).is_err());
    }

    #[test]
    fn baselines_json_round_trip() {
        let b = BaselineScores::backbone(12);
        assert_eq!(BaselineScores::from_json(&b.to_json()).unwrap(), b);
        let gap = serde_json::json!({"metric": "avp", "0": 0.5, "2": 0.4});
        assert!(BaselineScores::from_json(&gap).is_err());
    }

    #[test]
    fn max_then_mean() {
        let c0 = TaskCombination::singleton(TaskId(0));
        let c01 = TaskCombination::full(2);
        let items = [(c0, vec![0.1]), (c01, vec![0.2, 0.05])];
        let best = per_task_best(2, items.iter().map(|(c, g)| (*c, g.as_slice()))).unwrap();
        assert_eq!(best[0].gain, 0.2);
        assert_eq!(best[0].member, 1);
        let g = best.iter().map(|b| b.gain).sum::<f64>() / 2.0;
        assert!((g - 0.125).abs() < 1e-15);

        let only0 = [(c0, vec![0.1])];
        assert!(matches!(
            per_task_best(2, only0.iter().map(|(c, g)| (*c, g.as_slice()))),
            Err(Error::Coverage(1))
        ));
    }
}
