//! Builds the surrogate's training set.
//!
//! A warm start evaluates `Q0` random architectures on the full task set.
//! Each later round visits every task `n`: candidate combinations containing
//! `n` are scored by sampling `Q1` architectures, keeping the `Q2` with the
//! highest predicted gain for `n`, and summarising them by mean `μ` and
//! spread `σ`. The combination with the best acquisition value wins, one of
//! its top architectures is drawn at random, and that point is evaluated.
//! The surrogate is retrained on the full dataset at the end of the round.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{evaluate_with_retries, EvaluationCache, EvaluationRecord, Evaluator, FailedPoint};
use crate::rng::{EngineRng, RngSnapshot};
use crate::space::{
    architecture_count, combinations_containing, random_architecture, Architecture, SearchPoint, SearchSpaceConfig,
    TaskCombination, TaskId, DEFAULT_CANDIDATE_CAP,
};
use crate::surrogate::{
    dataset_mae, encode_architecture, encode_combination, head_output, init_params, load_checkpoint, save_checkpoint,
    train, SurrogateConfig, SurrogateParams, TrainConfig, TrainingSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionVariant {
    #[serde(rename = "mu+sigma")]
    MuPlusSigma,
    #[serde(rename = "mu")]
    MuOnly,
    #[serde(rename = "sigma")]
    SigmaOnly,
}

impl fmt::Display for AcquisitionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AcquisitionVariant::MuPlusSigma => "mu+sigma",
            AcquisitionVariant::MuOnly => "mu",
            AcquisitionVariant::SigmaOnly => "sigma",
        })
    }
}

impl FromStr for AcquisitionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu+sigma" => Ok(AcquisitionVariant::MuPlusSigma),
            "mu" => Ok(AcquisitionVariant::MuOnly),
            "sigma" => Ok(AcquisitionVariant::SigmaOnly),
            _ => Err(Error::config(format!(
                "unknown acquisition variant `{s}` (mu+sigma|mu|sigma)"
            ))),
        }
    }
}

/// How the spread of the top-`Q2` predictions is summarised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    /// Sample standard deviation.
    #[default]
    Std,
    /// Sample variance.
    Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// `Q0`
    pub warm_start_size: usize,
    /// `Q1`
    pub archs_per_combination: usize,
    /// `Q2`
    pub top_archs: usize,
    pub lambda: f64,
    /// `K1`
    pub rounds: usize,
    pub variant: AcquisitionVariant,
    pub candidate_cap: usize,
    pub sigma_mode: SigmaMode,
    pub retrain_from_scratch: bool,
    /// Extra attempts for a point whose evaluation failed.
    pub max_retries: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            warm_start_size: 10,
            archs_per_combination: 50,
            top_archs: 10,
            lambda: 0.5,
            rounds: 20,
            variant: AcquisitionVariant::MuPlusSigma,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            sigma_mode: SigmaMode::Std,
            retrain_from_scratch: false,
            max_retries: 2,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_archs == 0 || self.archs_per_combination < self.top_archs {
            return Err(Error::config("sampler needs Q1 >= Q2 >= 1"));
        }
        if self.warm_start_size == 0 {
            return Err(Error::config("warm start needs at least one evaluation (Q0 >= 1)"));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::config("lambda must be non-negative"));
        }
        if self.candidate_cap < 2 {
            return Err(Error::config("candidate_cap must be at least 2"));
        }
        Ok(())
    }

    /// Upper bound on ground-truth evaluations: `Q0 + K1·N`.
    pub fn evaluation_budget(&self, num_tasks: usize) -> usize {
        self.warm_start_size + self.rounds * num_tasks
    }
}

pub fn acquisition_value(mu: f64, sigma: f64, lambda: f64, variant: AcquisitionVariant) -> f64 {
    match variant {
        AcquisitionVariant::MuPlusSigma => mu + lambda * sigma,
        AcquisitionVariant::MuOnly => mu,
        AcquisitionVariant::SigmaOnly => sigma,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationScore {
    pub combination: TaskCombination,
    pub mu: f64,
    pub sigma: f64,
    /// Top architectures, best first; ties keep sampling order.
    pub top: Vec<Architecture>,
}

/// Samples `q1` architectures and summarises the best `q2` predicted gains of `anchor`.
pub fn score_combination(
    params: &SurrogateParams,
    space: &SearchSpaceConfig,
    comb: TaskCombination,
    anchor: TaskId,
    q1: usize,
    q2: usize,
    sigma_mode: SigmaMode,
    rng: &mut EngineRng,
) -> CombinationScore {
    assert!(comb.contains(anchor), "anchor {anchor} not in {comb}");
    let z = encode_combination(params, comb);
    let u = params.task_embedding(anchor.index());
    let scored: Vec<(Architecture, f64)> = (0..q1)
        .map(|_| {
            let arch = random_architecture(rng, space);
            let h = encode_architecture(params, &arch);
            let g = head_output(params, &h, &z, u);
            (arch, g)
        })
        .collect();
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1));
    order.truncate(q2);

    let gains: Vec<f64> = order.iter().map(|&i| scored[i].1).collect();
    let (mu, sigma) = summarise(&gains, sigma_mode);
    CombinationScore {
        combination: comb,
        mu,
        sigma,
        top: order.into_iter().map(|i| scored[i].0.clone()).collect(),
    }
}

fn summarise(values: &[f64], mode: SigmaMode) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    match mode {
        SigmaMode::Std => (mean, var.sqrt()),
        SigmaMode::Var => (mean, var),
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Cache-backed access to an evaluator.
pub struct GroundTruth<E> {
    evaluator: E,
    cache: EvaluationCache,
    retries: usize,
    evaluations: usize,
    failures: Vec<FailedPoint>,
}

impl<E: Evaluator> GroundTruth<E> {
    pub fn new(evaluator: E, cache: EvaluationCache, retries: usize) -> Self {
        GroundTruth {
            evaluator,
            cache,
            retries,
            evaluations: 0,
            failures: Vec::new(),
        }
    }

    pub fn cache(&self) -> &EvaluationCache {
        &self.cache
    }

    pub fn cache_mut(&mut self) -> &mut EvaluationCache {
        &mut self.cache
    }

    pub fn evaluator(&self) -> &E {
        &self.evaluator
    }

    pub fn into_parts(self) -> (E, EvaluationCache) {
        (self.evaluator, self.cache)
    }

    /// Points sent to the evaluator so far (cache hits excluded).
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn failures(&self) -> &[FailedPoint] {
        &self.failures
    }

    /// Records for `points`, evaluating only those not cached.
    ///
    /// `None` marks a point that failed every retry; it is reported in
    /// [`failures`](Self::failures).
    pub fn fetch(&mut self, points: &[SearchPoint]) -> Result<Vec<Option<EvaluationRecord>>> {
        let mut todo: Vec<SearchPoint> = Vec::new();
        for p in points {
            if !self.cache.contains(p) && !todo.contains(p) {
                todo.push(p.clone());
            }
        }
        if !todo.is_empty() {
            let (results, failed) = evaluate_with_retries(&mut self.evaluator, &todo, self.retries)?;
            self.evaluations += todo.len();
            for rec in results.into_iter().flatten() {
                self.cache.store(rec)?;
            }
            self.failures.extend(failed);
        }
        Ok(points.iter().map(|p| self.cache.lookup(p).cloned()).collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Ground-truth evaluations requested by this search.
    pub evaluations: usize,
    /// Selections that landed on an already known point.
    pub cache_hits: usize,
    /// Points dropped after exhausting their retries.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub dataset_size: usize,
    pub evaluations: usize,
    pub cache_hits: usize,
    pub failed: usize,
    pub train_mae: f64,
}

/// `(D, Θ)` plus bookkeeping.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub dataset: Vec<TrainingSample>,
    pub params: SurrogateParams,
    pub round_index: usize,
    pub rng: EngineRng,
    pub counters: Counters,
    pub history: Vec<RoundSummary>,
}

fn sample_from_record(rec: &EvaluationRecord) -> Result<TrainingSample> {
    TrainingSample::new(rec.point.clone(), rec.gain_list())
}

pub struct Sampler<E> {
    pub space: SearchSpaceConfig,
    pub surrogate: SurrogateConfig,
    pub train: TrainConfig,
    pub config: SamplerConfig,
    pub truth: GroundTruth<E>,
}

impl<E: Evaluator> Sampler<E> {
    pub fn new(
        space: SearchSpaceConfig,
        surrogate: SurrogateConfig,
        train: TrainConfig,
        config: SamplerConfig,
        truth: GroundTruth<E>,
    ) -> Result<Self> {
        space.validate()?;
        surrogate.validate()?;
        surrogate.check_space(&space)?;
        train.validate()?;
        config.validate()?;
        Ok(Sampler {
            space,
            surrogate,
            train,
            config,
            truth,
        })
    }

    /// Evaluates `Q0` distinct random architectures on the full task set and
    /// trains a fresh surrogate on them.
    pub fn warm_start(&mut self, mut rng: EngineRng) -> Result<SearchState> {
        let full = self.space.full_combination();
        let wanted = match architecture_count(&self.space) {
            Some(total) if total < self.config.warm_start_size as u128 => total as usize,
            _ => self.config.warm_start_size,
        };
        let mut archs: Vec<Architecture> = Vec::with_capacity(wanted);
        let mut seen = HashSet::new();
        while archs.len() < wanted {
            let a = random_architecture(&mut rng, &self.space);
            if seen.insert(a.clone()) {
                archs.push(a);
            }
        }
        let points: Vec<SearchPoint> = archs.into_iter().map(|a| SearchPoint::new(full, a)).collect();
        let before = self.truth.evaluations();
        let records = self.truth.fetch(&points)?;
        let mut dataset = Vec::with_capacity(points.len());
        for (p, rec) in points.iter().zip(records) {
            let rec = rec.ok_or_else(|| Error::EvaluationFailed {
                point: p.encode(),
                message: "warm-start evaluation failed after all retries".into(),
            })?;
            dataset.push(sample_from_record(&rec)?);
        }

        let mut params = init_params(&self.surrogate, &mut rng);
        let report = train(&mut params, &dataset, &self.train, &mut rng)?;
        let counters = Counters {
            evaluations: self.truth.evaluations() - before,
            cache_hits: 0,
            failed: 0,
        };
        let summary = RoundSummary {
            round: 0,
            dataset_size: dataset.len(),
            evaluations: counters.evaluations,
            cache_hits: 0,
            failed: 0,
            train_mae: report.final_mae,
        };
        log::info!(
            "warm start: |D| = {}, evaluations = {}, training MAE = {:.5}",
            dataset.len(),
            counters.evaluations,
            report.final_mae
        );
        Ok(SearchState {
            dataset,
            params,
            round_index: 0,
            rng,
            counters,
            history: vec![summary],
        })
    }

    /// The acquisition winner for `anchor`, plus, when the winner is already
    /// known, the next-best unknown pair (`Some(None)` if there is none).
    fn select_for_task(
        &self,
        state: &mut SearchState,
        anchor: TaskId,
        known: &HashSet<SearchPoint>,
    ) -> (SearchPoint, Option<Option<SearchPoint>>) {
        let cfg = &self.config;
        let candidates = combinations_containing(anchor, &self.space, cfg.candidate_cap, &mut state.rng);
        let scores: Vec<CombinationScore> = candidates
            .into_iter()
            .map(|c| {
                score_combination(
                    &state.params,
                    &self.space,
                    c,
                    anchor,
                    cfg.archs_per_combination,
                    cfg.top_archs,
                    cfg.sigma_mode,
                    &mut state.rng,
                )
            })
            .collect();
        let values: Vec<f64> = scores
            .iter()
            .map(|s| acquisition_value(s.mu, s.sigma, cfg.lambda, cfg.variant))
            .collect();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

        let winner = &scores[order[0]];
        let chosen = winner.top.choose(&mut state.rng).expect("Q2 >= 1").clone();
        let first = SearchPoint::new(winner.combination, chosen.clone());
        if !known.contains(&first) {
            return (first, None);
        }
        // Fall back to the next-best unevaluated pair.
        let scores = &scores;
        let next = winner
            .top
            .iter()
            .filter(|a| **a != chosen)
            .map(|a| SearchPoint::new(winner.combination, a.clone()))
            .chain(order[1..].iter().flat_map(|&i| {
                scores[i]
                    .top
                    .iter()
                    .map(move |a| SearchPoint::new(scores[i].combination, a.clone()))
            }))
            .find(|p| !known.contains(p));
        (first, Some(next))
    }

    /// One pass over all tasks followed by a surrogate update.
    pub fn progressive_round(&mut self, state: &mut SearchState) -> Result<()> {
        let mut known: HashSet<SearchPoint> = self.truth.cache().records().iter().map(|r| r.point.clone()).collect();
        let mut in_dataset: HashSet<SearchPoint> = state.dataset.iter().map(|s| s.point.clone()).collect();
        let mut working = state.clone();
        let mut reused: Vec<TrainingSample> = Vec::new();
        let mut selected: Vec<SearchPoint> = Vec::new();

        for anchor in self.space.tasks() {
            let (first, fallback) = self.select_for_task(&mut working, anchor, &known);
            if let Some(p) = fallback {
                working.counters.cache_hits += 1;
                // A cached record from outside this run still joins D.
                if !in_dataset.contains(&first) && !selected.contains(&first) {
                    selected.push(first);
                }
                if let Some(p) = p {
                    known.insert(p.clone());
                    selected.push(p);
                }
            } else {
                known.insert(first.clone());
                selected.push(first);
            }
        }

        let before = self.truth.evaluations();
        let failures_before = self.truth.failures().len();
        let records = self.truth.fetch(&selected)?;
        working.counters.evaluations += self.truth.evaluations() - before;
        working.counters.failed += self.truth.failures().len() - failures_before;
        for rec in records.into_iter().flatten() {
            if in_dataset.insert(rec.point.clone()) {
                reused.push(sample_from_record(&rec)?);
            }
        }
        working.dataset.extend(reused);

        if self.config.retrain_from_scratch {
            working.params = init_params(&self.surrogate, &mut working.rng);
        }
        let report = train(&mut working.params, &working.dataset, &self.train, &mut working.rng)?;
        working.round_index += 1;
        let summary = RoundSummary {
            round: working.round_index,
            dataset_size: working.dataset.len(),
            evaluations: working.counters.evaluations,
            cache_hits: working.counters.cache_hits,
            failed: working.counters.failed,
            train_mae: report.final_mae,
        };
        log::info!(
            "round {}: |D| = {}, evaluations = {}, training MAE = {:.5}",
            summary.round,
            summary.dataset_size,
            summary.evaluations,
            summary.train_mae
        );
        working.history.push(summary);
        *state = working;
        Ok(())
    }

    /// Warm start (unless resuming) and rounds up to `K1`, checkpointing into
    /// `checkpoint_dir` after every round when given.
    pub fn run(
        &mut self,
        rng: EngineRng,
        resume: Option<SearchState>,
        checkpoint_dir: Option<&Path>,
    ) -> Result<SearchState> {
        let mut state = match resume {
            Some(s) => s,
            None => {
                let s = self.warm_start(rng)?;
                if let Some(dir) = checkpoint_dir {
                    save_state(dir, &s, self.truth.cache())?;
                }
                s
            }
        };
        while state.round_index < self.config.rounds {
            self.progressive_round(&mut state)?;
            if let Some(dir) = checkpoint_dir {
                save_state(dir, &state, self.truth.cache())?;
            }
        }
        Ok(state)
    }
}

pub const STATE_FILE: &str = "state.json";

/// Contents of `state.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateManifest {
    pub round_index: usize,
    pub surrogate_dir: String,
    pub cache_len: usize,
    /// Canonical encodings of `D`, in insertion order.
    pub dataset: Vec<String>,
    pub rng: RngSnapshot,
    pub counters: Counters,
    pub history: Vec<RoundSummary>,
}

pub fn read_manifest(dir: &Path) -> Result<StateManifest> {
    let path = dir.join(STATE_FILE);
    let text =
        fs::read_to_string(&path).map_err(|e| Error::checkpoint(&path, format!("cannot read state manifest: {e}")))?;
    serde_json::from_str(&text).map_err(|e| Error::checkpoint(&path, e.to_string()))
}

/// The surrogate saved with the last checkpointed round.
pub fn load_surrogate(dir: &Path, surrogate: &SurrogateConfig) -> Result<SurrogateParams> {
    let manifest = read_manifest(dir)?;
    load_checkpoint(&dir.join(manifest.surrogate_dir), Some(surrogate))
}

/// Writes the surrogate and the state manifest for the current round.
///
/// The manifest is replaced atomically, so a crash leaves the previous round
/// loadable.
pub fn save_state(dir: &Path, state: &SearchState, cache: &EvaluationCache) -> Result<()> {
    let surrogate_dir = format!("surrogate-r{:04}", state.round_index);
    save_checkpoint(&state.params, &dir.join(&surrogate_dir))?;
    let manifest = StateManifest {
        round_index: state.round_index,
        surrogate_dir: surrogate_dir.clone(),
        cache_len: cache.len(),
        dataset: state.dataset.iter().map(|s| s.point.encode()).collect(),
        rng: RngSnapshot::capture(&state.rng),
        counters: state.counters.clone(),
        history: state.history.clone(),
    };
    let tmp = dir.join(format!("{STATE_FILE}.tmp"));
    fs::write(&tmp, serde_json::to_string_pretty(&manifest)? + "\n")?;
    fs::rename(&tmp, dir.join(STATE_FILE))?;
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("surrogate-r") && name != surrogate_dir && entry.path().is_dir() {
            fs::remove_dir_all(entry.path())?;
        }
    }
    Ok(())
}

/// Restores the last checkpointed state, trimming cache entries written
/// after it.
pub fn load_state(
    dir: &Path,
    space: &SearchSpaceConfig,
    surrogate: &SurrogateConfig,
    cache: &mut EvaluationCache,
) -> Result<SearchState> {
    let path = dir.join(STATE_FILE);
    let manifest = read_manifest(dir)?;
    if cache.len() < manifest.cache_len {
        return Err(Error::checkpoint(
            &path,
            format!(
                "cache log holds {} records, state expects {}",
                cache.len(),
                manifest.cache_len
            ),
        ));
    }
    cache.truncate(manifest.cache_len)?;
    let params = load_checkpoint(&dir.join(&manifest.surrogate_dir), Some(surrogate))?;
    let dataset = manifest
        .dataset
        .iter()
        .map(|text| {
            let point = SearchPoint::decode(text, space)?;
            let rec = cache
                .lookup(&point)
                .ok_or_else(|| Error::checkpoint(&path, format!("dataset point {text} missing from cache")))?;
            sample_from_record(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchState {
        dataset,
        params,
        round_index: manifest.round_index,
        rng: manifest.rng.restore(),
        counters: manifest.counters,
        history: manifest.history,
    })
}

/// Training MAE of the state's surrogate on its own dataset.
pub fn state_mae(state: &SearchState) -> f64 {
    dataset_mae(&state.params, &state.dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{BaselineScores, CacheHeader, SyntheticOracle, SyntheticOracleConfig};
    use crate::rng::rng_from_seed;
    use crate::surrogate::Matrix;

    #[test]
    fn acquisition_variants() {
        assert!((acquisition_value(0.10, 0.04, 0.5, AcquisitionVariant::MuPlusSigma) - 0.12).abs() < 1e-15);
        assert_eq!(acquisition_value(0.10, 0.04, 0.5, AcquisitionVariant::MuOnly), 0.10);
        assert_eq!(acquisition_value(0.10, 0.04, 0.5, AcquisitionVariant::SigmaOnly), 0.04);
        assert_eq!(
            "mu+sigma".parse::<AcquisitionVariant>().unwrap(),
            AcquisitionVariant::MuPlusSigma
        );
        assert!("ei".parse::<AcquisitionVariant>().is_err());
    }

    #[test]
    fn summary_statistics() {
        let (m, s) = summarise(&[1.0, 2.0, 3.0, 4.0], SigmaMode::Std);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let (_, v) = summarise(&[1.0, 2.0, 3.0, 4.0], SigmaMode::Var);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(summarise(&[0.7], SigmaMode::Std), (0.7, 0.0));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.3, 0.3, -1.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    fn constant_params(space: &SearchSpaceConfig, value: f64) -> SurrogateParams {
        let cfg = SurrogateConfig::for_space(space, 4);
        let mut p = init_params(&cfg, &mut rng_from_seed(0));
        p.head_out.iter_mut().for_each(|w| *w = 0.0);
        p.head_out_bias[0] = value;
        p
    }

    #[test]
    fn constant_surrogate_has_zero_spread() {
        let space = SearchSpaceConfig::new(4, 2);
        let params = constant_params(&space, 0.07);
        let comb = TaskCombination::from_tasks([TaskId(0), TaskId(2)]).unwrap();
        let mut rng = rng_from_seed(1);
        let s = score_combination(&params, &space, comb, TaskId(2), 20, 5, SigmaMode::Std, &mut rng);
        assert_eq!(s.mu, 0.07);
        assert_eq!(s.sigma, 0.0);
        assert_eq!(s.top.len(), 5);
        let all = score_combination(&params, &space, comb, TaskId(0), 7, 7, SigmaMode::Std, &mut rng);
        assert_eq!(all.top.len(), 7);
    }

    #[test]
    fn top_set_is_sorted_by_prediction() {
        let space = SearchSpaceConfig::new(3, 2);
        let cfg = SurrogateConfig::for_space(&space, 6);
        let params = init_params(&cfg, &mut rng_from_seed(3));
        let comb = TaskCombination::full(3);
        let s = score_combination(
            &params,
            &space,
            comb,
            TaskId(1),
            30,
            6,
            SigmaMode::Std,
            &mut rng_from_seed(4),
        );
        let z = encode_combination(&params, comb);
        let preds: Vec<f64> = s
            .top
            .iter()
            .map(|a| head_output(&params, &encode_architecture(&params, a), &z, params.task_embedding(1)))
            .collect();
        assert!(preds.windows(2).all(|w| w[0] >= w[1]));
        assert!((s.mu - preds.iter().sum::<f64>() / 6.0).abs() < 1e-15);
    }

    fn small_sampler(rounds: usize) -> Sampler<SyntheticOracle> {
        let space = SearchSpaceConfig::new(3, 1);
        let oracle =
            SyntheticOracle::new(SyntheticOracleConfig::default(), &space, BaselineScores::backbone(3)).unwrap();
        let cache = EvaluationCache::in_memory(CacheHeader::new("t", "t"));
        let mut surrogate = SurrogateConfig::for_space(&space, 4);
        surrogate.head_hidden_dim = 4;
        Sampler::new(
            space,
            surrogate,
            TrainConfig {
                epochs_per_update: 3,
                ..TrainConfig::default()
            },
            SamplerConfig {
                warm_start_size: 3,
                archs_per_combination: 4,
                top_archs: 2,
                rounds,
                ..SamplerConfig::default()
            },
            GroundTruth::new(oracle, cache, 2),
        )
        .unwrap()
    }

    #[test]
    fn exhausted_space_adds_nothing() {
        // 7 combinations x 5 architectures = 35 points; 20 rounds of 3 tasks must run dry.
        let mut s = small_sampler(20);
        let state = s.run(rng_from_seed(1), None, None).unwrap();
        assert!(state.counters.evaluations <= 35);
        assert!(state.counters.evaluations <= s.config.evaluation_budget(3));
        let unique: HashSet<_> = state.dataset.iter().map(|d| &d.point).collect();
        assert_eq!(unique.len(), state.dataset.len());
        assert_eq!(s.truth.evaluator().evaluations(), s.truth.cache().len());
    }

    #[test]
    fn identity_ops_keep_linear_dag_finite() {
        let space = SearchSpaceConfig::new(2, 1);
        let cfg = SurrogateConfig::for_space(&space, 3);
        let mut p = init_params(&cfg, &mut rng_from_seed(0));
        p.op_matrices = vec![Matrix::identity(3); cfg.operations.len()];
        let arch = random_architecture(&mut rng_from_seed(1), &space);
        assert!(encode_architecture(&p, &arch).iter().all(|v| v.is_finite()));
    }
}
