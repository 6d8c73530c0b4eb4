//! Run configuration and the operations behind each command-line subcommand.
//!
//! A run directory holds everything one search produced:
//!
//! ```text
//! config.json        resolved configuration
//! baselines.json     reference scores used for every gain
//! cache.log          evaluation log
//! state.json         sampler state after the last finished round
//! surrogate-rNNNN/   surrogate checkpoint of that round
//! rounds.csv         per-round summary
//! report.txt         derivation report (derive)
//! final.json         realized gains of the reported points (evaluate)
//! per_task.csv       one row per task (evaluate)
//! ```
//!
//! Sub-seeds are `master ⊕ fnv1a(tag)` with tags `sampler`, `derive` and
//! `evaluator`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::derivation::{
    brute_force_best, greedy_search, parse_report, render_report, task_assignment, DerivationConfig, DerivationResult,
    Population,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_with_retries, overall_gain, BaselineScores, CacheHeader, EvaluationCache, EvaluationRecord, Evaluator,
    ExternalEvaluator, PointOutcome, SyntheticOracle, SyntheticOracleConfig, TaskBest,
};
use crate::rng::{stage_rng, sub_seed};
use crate::sampler::{
    load_state, load_surrogate, read_manifest, GroundTruth, RoundSummary, Sampler, SamplerConfig, SearchState,
    STATE_FILE,
};
use crate::space::{architecture_count, combination_count, SearchPoint, SearchSpaceConfig};
use crate::surrogate::{DagActivation, SurrogateConfig, TrainConfig};

pub const CONFIG_FILE: &str = "config.json";
pub const BASELINES_FILE: &str = "baselines.json";
pub const CACHE_FILE: &str = "cache.log";
pub const ROUNDS_CSV: &str = "rounds.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const FINAL_FILE: &str = "final.json";
pub const PER_TASK_CSV: &str = "per_task.csv";
pub const VARIANTS_CSV: &str = "variants.csv";
pub const SUMMARY_FILE: &str = "summary.md";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultsProfile {
    Task5,
    Task10,
    Task25,
}

impl FromStr for DefaultsProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "task5" => Ok(DefaultsProfile::Task5),
            "task10" => Ok(DefaultsProfile::Task10),
            "task25" => Ok(DefaultsProfile::Task25),
            _ => Err(Error::config(format!(
                "unknown defaults_profile `{s}` (task5|task10|task25)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorSpec {
    Synthetic(SyntheticOracleConfig),
    External {
        command: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_timeout_secs() -> u64 {
    3600
}

impl Default for EvaluatorSpec {
    fn default() -> Self {
        EvaluatorSpec::Synthetic(SyntheticOracleConfig::default())
    }
}

impl FromStr for EvaluatorSpec {
    type Err = Error;

    /// `synthetic` or `external:<command>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "synthetic" {
            return Ok(EvaluatorSpec::default());
        }
        match s.strip_prefix("external:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(EvaluatorSpec::External {
                command: cmd.trim().to_string(),
                timeout_secs: default_timeout_secs(),
            }),
            _ => Err(Error::config(format!(
                "evaluator must be `synthetic` or `external:<command>`, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSettings {
    /// `d_s`
    pub hidden_dim: usize,
    /// Width of the per-task head; `d_s` when absent.
    #[serde(default)]
    pub head_hidden_dim: Option<usize>,
    #[serde(default)]
    pub activation: DagActivation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub defaults_profile: Option<DefaultsProfile>,
    pub seed: u64,
    pub space: SearchSpaceConfig,
    pub surrogate: SurrogateSettings,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub derivation: DerivationConfig,
    pub evaluator: EvaluatorSpec,
    /// Baselines file; the backbone table is used when absent.
    #[serde(default)]
    pub baselines: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Hyperparameter defaults of the three reference settings.
    pub fn profile(profile: DefaultsProfile) -> Self {
        let (n, p, q0, q1, q2, k1, b) = match profile {
            DefaultsProfile::Task5 => (5, 2, 10, 50, 10, 20, 3),
            DefaultsProfile::Task10 => (10, 2, 10, 100, 20, 30, 5),
            DefaultsProfile::Task25 => (25, 3, 20, 100, 20, 25, 10),
        };
        RunConfig {
            defaults_profile: Some(profile),
            seed: 0,
            space: SearchSpaceConfig::new(n, p),
            surrogate: SurrogateSettings {
                hidden_dim: 64,
                head_hidden_dim: None,
                activation: DagActivation::Tanh,
            },
            train: TrainConfig::default(),
            sampler: SamplerConfig {
                warm_start_size: q0,
                archs_per_combination: q1,
                top_archs: q2,
                lambda: 0.5,
                rounds: k1,
                ..SamplerConfig::default()
            },
            derivation: DerivationConfig {
                budget: b,
                iterations: 1000,
                ..DerivationConfig::default()
            },
            evaluator: EvaluatorSpec::default(),
            baselines: None,
            output_dir: None,
        }
    }

    /// Parses a config document; explicit fields override the profile's
    /// defaults (`task5` when no profile is named).
    pub fn from_json_str(text: &str) -> Result<Self> {
        let user: Value =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config is not valid JSON: {e}")))?;
        let profile = match user.get("defaults_profile") {
            None | Some(Value::Null) => DefaultsProfile::Task5,
            Some(Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::config(format!("defaults_profile must be a string, got {other}"))),
        };
        let mut merged = serde_json::to_value(RunConfig::profile(profile))?;
        merge(&mut merged, user);
        let cfg: RunConfig = serde_json::from_value(merged).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail") + "\n"
    }

    pub fn surrogate_config(&self) -> SurrogateConfig {
        SurrogateConfig {
            hidden_dim: self.surrogate.hidden_dim,
            head_hidden_dim: self.surrogate.head_hidden_dim.unwrap_or(self.surrogate.hidden_dim),
            num_tasks: self.space.num_tasks,
            num_nodes: self.space.num_nodes,
            operations: self.space.operations.clone(),
            activation: self.surrogate.activation,
        }
    }

    /// Derivation settings with the seed taken from the master seed.
    pub fn derivation_config(&self) -> DerivationConfig {
        DerivationConfig {
            seed: sub_seed(self.seed, "derive"),
            ..self.derivation.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.surrogate_config().validate()?;
        self.train.validate()?;
        self.sampler.validate()?;
        self.derivation.validate()?;
        if let EvaluatorSpec::Synthetic(s) = &self.evaluator {
            s.validate()?;
        }
        Ok(())
    }

    /// Digest of everything that determines a point's ground truth.
    pub fn fingerprint(&self) -> String {
        let v = serde_json::json!({ "space": self.space, "evaluator": self.evaluator });
        Sha256::digest(v.to_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn load_baselines(&self) -> Result<BaselineScores> {
        let b = match &self.baselines {
            Some(path) => BaselineScores::load(path)?,
            None => BaselineScores::backbone(self.space.num_tasks),
        };
        if b.num_tasks() != self.space.num_tasks {
            return Err(Error::config(format!(
                "baselines cover {} tasks, space has {}",
                b.num_tasks(),
                self.space.num_tasks
            )));
        }
        Ok(b)
    }

    pub fn build_evaluator(&self, baselines: BaselineScores) -> Result<AnyEvaluator> {
        match &self.evaluator {
            EvaluatorSpec::Synthetic(cfg) => Ok(AnyEvaluator::Synthetic(SyntheticOracle::new(
                cfg.clone(),
                &self.space,
                baselines,
            )?)),
            EvaluatorSpec::External { command, timeout_secs } => Ok(AnyEvaluator::External(ExternalEvaluator::spawn(
                command,
                baselines,
                sub_seed(self.seed, "evaluator"),
                Duration::from_secs(*timeout_secs),
            )?)),
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // Replacing the evaluator kind must not keep the old kind's fields.
                    Some(slot) if k != "evaluator" => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub enum AnyEvaluator {
    Synthetic(SyntheticOracle),
    External(ExternalEvaluator),
}

impl Evaluator for AnyEvaluator {
    fn evaluate(&mut self, points: &[SearchPoint]) -> Result<Vec<PointOutcome>> {
        match self {
            AnyEvaluator::Synthetic(e) => e.evaluate(points),
            AnyEvaluator::External(e) => e.evaluate(points),
        }
    }

    fn baselines(&self) -> &BaselineScores {
        match self {
            AnyEvaluator::Synthetic(e) => e.baselines(),
            AnyEvaluator::External(e) => e.baselines(),
        }
    }
}

/// Exclusive ownership of a run directory; released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => Error::config(format!(
                    "{} is in use by another invocation (delete {} if it is stale)",
                    dir.display(),
                    path.display()
                )),
                _ => Error::Io(e),
            })?;
        Ok(RunLock { path })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Creates `dir`, refusing to reuse a nonempty one unless `force`.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let nonempty = fs::read_dir(dir)?.next().is_some();
        if nonempty && !force {
            return Err(Error::OutputExists(dir.to_path_buf()));
        }
        if nonempty {
            fs::remove_dir_all(dir)?;
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_new(path: &Path, contents: &str, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::OutputExists(path.to_path_buf()));
    }
    fs::write(path, contents)?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct SearchOptions {
    pub resume: bool,
    pub force: bool,
    /// Stop after this many progressive rounds, as if interrupted.
    pub stop_after_round: Option<usize>,
}

/// Runs (or resumes) the sampler into `dir`.
pub fn search(cfg: &RunConfig, dir: &Path, opts: &SearchOptions) -> Result<SearchState> {
    cfg.validate()?;
    let resuming = opts.resume && dir.join(CONFIG_FILE).exists();
    let baselines = if resuming {
        let saved = RunConfig::load(&dir.join(CONFIG_FILE))?;
        if !same_run(&saved, cfg) {
            return Err(Error::config(format!(
                "configuration differs from the run stored in {}",
                dir.display()
            )));
        }
        BaselineScores::load(&dir.join(BASELINES_FILE))?
    } else {
        if opts.resume {
            log::warn!("nothing to resume in {}; starting a new run", dir.display());
        }
        prepare_output_dir(dir, opts.force)?;
        let b = cfg.load_baselines()?;
        fs::write(dir.join(CONFIG_FILE), cfg.to_json_string())?;
        b.save(&dir.join(BASELINES_FILE))?;
        b
    };
    let _lock = RunLock::acquire(dir)?;

    let header = CacheHeader::new(cfg.fingerprint(), baselines.fingerprint());
    let mut cache = EvaluationCache::open(&dir.join(CACHE_FILE), header, &cfg.space)?;
    let surrogate = cfg.surrogate_config();
    let resume_state = if resuming && dir.join(STATE_FILE).exists() {
        let state = load_state(dir, &cfg.space, &surrogate, &mut cache)?;
        log::info!("resuming {} after round {}", dir.display(), state.round_index);
        Some(state)
    } else {
        None
    };

    let mut sampler_cfg = cfg.sampler.clone();
    if let Some(stop) = opts.stop_after_round {
        sampler_cfg.rounds = sampler_cfg.rounds.min(stop);
    }
    let evaluator = cfg.build_evaluator(baselines)?;
    let truth = GroundTruth::new(evaluator, cache, cfg.sampler.max_retries);
    let mut sampler = Sampler::new(cfg.space.clone(), surrogate, cfg.train.clone(), sampler_cfg, truth)?;
    let state = sampler.run(stage_rng(cfg.seed, "sampler"), resume_state, Some(dir))?;
    fs::write(
        dir.join(ROUNDS_CSV),
        rounds_csv(&state.history, cfg.sampler.evaluation_budget(cfg.space.num_tasks)),
    )?;
    if let (AnyEvaluator::External(ext), _) = sampler.truth.into_parts() {
        ext.shutdown()?;
    }
    Ok(state)
}

fn same_run(a: &RunConfig, b: &RunConfig) -> bool {
    let strip = |c: &RunConfig| RunConfig {
        output_dir: None,
        ..c.clone()
    };
    strip(a) == strip(b)
}

fn rounds_csv(history: &[RoundSummary], budget: usize) -> String {
    let mut out = String::from("round,dataset_size,evaluations,cache_hits,failed,train_mae,budget\n");
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round, r.dataset_size, r.evaluations, r.cache_hits, r.failed, r.train_mae, budget
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct DerivationOverrides {
    pub budget: Option<usize>,
    pub iterations: Option<usize>,
    pub restarts: Option<usize>,
}

/// Greedy derivation from the run's frozen surrogate; writes the report.
pub fn derive(
    dir: &Path,
    overrides: &DerivationOverrides,
    report_path: Option<&Path>,
    force: bool,
) -> Result<(DerivationResult, String)> {
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let _lock = RunLock::acquire(dir)?;
    let params = load_surrogate(dir, &cfg.surrogate_config())?;
    let mut dcfg = cfg.derivation_config();
    dcfg.budget = overrides.budget.unwrap_or(dcfg.budget);
    dcfg.iterations = overrides.iterations.unwrap_or(dcfg.iterations);
    dcfg.restarts = overrides.restarts.unwrap_or(dcfg.restarts);
    let result = greedy_search(&params, &dcfg, &cfg.space)?;
    let text = render_report(&params, &result.population, dcfg.budget, cfg.space.num_tasks)?;
    let path = report_path.map_or_else(|| dir.join(REPORT_FILE), Path::to_path_buf);
    write_new(&path, &text, force)?;
    Ok((result, text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberResult {
    pub point: String,
    pub metrics: std::collections::BTreeMap<usize, f64>,
    pub gains: std::collections::BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task: usize,
    pub member: usize,
    pub baseline: f64,
    pub metric: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEvaluation {
    pub realized_gain: f64,
    pub members: Vec<MemberResult>,
    pub per_task: Vec<TaskRow>,
}

impl FinalEvaluation {
    pub fn from_records(records: &[EvaluationRecord], baselines: &BaselineScores) -> Result<Self> {
        let n = baselines.num_tasks();
        let realized_gain = overall_gain(records, n)?;
        let lists: Vec<_> = records.iter().map(|r| (r.point.combination, r.gain_list())).collect();
        let best: Vec<TaskBest> = crate::evaluation::per_task_best(n, lists.iter().map(|(c, g)| (*c, g.as_slice())))?;
        Ok(FinalEvaluation {
            realized_gain,
            members: records
                .iter()
                .map(|r| MemberResult {
                    point: r.point.encode(),
                    metrics: r.metrics.clone(),
                    gains: r.gains.per_task.clone(),
                })
                .collect(),
            per_task: best
                .iter()
                .map(|b| TaskRow {
                    task: b.task.index(),
                    member: b.member,
                    baseline: baselines.scores[b.task.index()],
                    metric: records[b.member].metrics[&b.task.index()],
                    gain: b.gain,
                })
                .collect(),
        })
    }

    pub fn per_task_csv(&self) -> String {
        let mut out = String::from("task,baseline,metric,gain\n");
        for r in &self.per_task {
            writeln!(out, "{},{},{},{}", r.task, r.baseline, r.metric, r.gain).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub report: Option<PathBuf>,
    /// Re-run ground truth even for cached points; results bypass the cache.
    pub fresh: bool,
    pub force: bool,
    pub evaluator: Option<EvaluatorSpec>,
}

/// Ground truth for the points of a derivation report.
pub fn evaluate(dir: &Path, opts: &EvaluateOptions) -> Result<FinalEvaluation> {
    let mut cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let _lock = RunLock::acquire(dir)?;
    let baselines = BaselineScores::load(&dir.join(BASELINES_FILE))?;
    let report_path = opts.report.clone().unwrap_or_else(|| dir.join(REPORT_FILE));
    let text = fs::read_to_string(&report_path)
        .map_err(|e| Error::config(format!("cannot read derivation report {}: {e}", report_path.display())))?;
    let population = parse_report(&text, &cfg.space)?;
    let cache_fingerprint = cfg.fingerprint();
    if let Some(spec) = &opts.evaluator {
        cfg.evaluator = spec.clone();
    }
    let mut evaluator = cfg.build_evaluator(baselines.clone())?;

    let outcomes: Vec<Option<EvaluationRecord>> = if opts.fresh || cfg.fingerprint() != cache_fingerprint {
        let (results, failed) = evaluate_with_retries(&mut evaluator, &population.members, cfg.sampler.max_retries)?;
        report_failures(&failed);
        results
    } else {
        let header = CacheHeader::new(cache_fingerprint, baselines.fingerprint());
        let cache = EvaluationCache::open(&dir.join(CACHE_FILE), header, &cfg.space)?;
        let mut truth = GroundTruth::new(evaluator, cache, cfg.sampler.max_retries);
        let results = truth.fetch(&population.members)?;
        report_failures(truth.failures());
        let (ev, _) = truth.into_parts();
        evaluator = ev;
        results
    };
    if let AnyEvaluator::External(ext) = evaluator {
        ext.shutdown()?;
    }
    let records: Vec<EvaluationRecord> = outcomes.into_iter().flatten().collect();
    let result = FinalEvaluation::from_records(&records, &baselines)?;
    write_new(
        &dir.join(FINAL_FILE),
        &(serde_json::to_string_pretty(&result)? + "\n"),
        opts.force,
    )?;
    fs::write(dir.join(PER_TASK_CSV), result.per_task_csv())?;
    Ok(result)
}

fn report_failures(failed: &[crate::evaluation::FailedPoint]) {
    for f in failed {
        log::error!("{} failed after {} attempts: {}", f.point, f.attempts, f.message);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceReport {
    pub points: u128,
    pub budget: usize,
    pub population: Population,
    pub optimum_gain: f64,
    pub per_task: Vec<TaskBest>,
    pub text: String,
}

/// Exact optimum under the synthetic oracle; `budget` defaults to `N`.
pub fn bruteforce(cfg: &RunConfig, budget: Option<usize>) -> Result<BruteForceReport> {
    let EvaluatorSpec::Synthetic(ocfg) = &cfg.evaluator else {
        return Err(Error::config("bruteforce needs the synthetic evaluator"));
    };
    let oracle = SyntheticOracle::new(ocfg.clone(), &cfg.space, cfg.load_baselines()?)?;
    let budget = budget.unwrap_or(cfg.space.num_tasks);
    let (population, optimum_gain) = brute_force_best(&oracle, &cfg.space, budget)?;
    let per_task = task_assignment(&oracle, &population, cfg.space.num_tasks)?;
    let points = combination_count(&cfg.space) * architecture_count(&cfg.space).unwrap_or(0);
    let mut text = format!("points {points}\n");
    text.push_str(&render_report(&oracle, &population, budget, cfg.space.num_tasks)?);
    Ok(BruteForceReport {
        points,
        budget,
        population,
        optimum_gain,
        per_task,
        text,
    })
}

fn predicted_gain_of(report: &str) -> Option<f64> {
    report
        .lines()
        .find_map(|l| l.strip_prefix("predicted_gain "))
        .and_then(|v| v.trim().parse().ok())
}

/// Writes CSV and markdown summaries of one or more run directories into
/// `out`; returns notes about missing artifacts.
pub fn report(run_dirs: &[PathBuf], out: &Path, force: bool) -> Result<Vec<String>> {
    if run_dirs.is_empty() {
        return Err(Error::config("report needs at least one run directory"));
    }
    prepare_output_dir(out, force)?;
    let mut notes = Vec::new();
    let mut rounds = String::from("run,round,dataset_size,evaluations,cache_hits,failed,train_mae,budget\n");
    let mut variants = String::from("run,variant,seed,evaluations,budget,predicted_gain,realized_gain\n");
    let mut summary = String::from("| run | variant | seed | evaluations | budget | predicted G | realized G |\n");
    summary.push_str("|---|---|---|---|---|---|---|\n");

    for (i, dir) in run_dirs.iter().enumerate() {
        let name = dir
            .file_name()
            .map_or_else(|| i.to_string(), |n| n.to_string_lossy().into_owned());
        let cfg = match RunConfig::load(&dir.join(CONFIG_FILE)) {
            Ok(c) => c,
            Err(e) => {
                notes.push(format!("{name}: skipped, no readable config ({e})"));
                continue;
            }
        };
        let budget = cfg.sampler.evaluation_budget(cfg.space.num_tasks);
        let evaluations = match read_manifest(dir) {
            Ok(m) => {
                for r in &m.history {
                    writeln!(
                        rounds,
                        "{name},{},{},{},{},{},{},{budget}",
                        r.round, r.dataset_size, r.evaluations, r.cache_hits, r.failed, r.train_mae
                    )
                    .unwrap();
                }
                Some(m.counters.evaluations)
            }
            Err(_) => {
                notes.push(format!("{name}: no sampler state, rounds omitted"));
                None
            }
        };
        let predicted = fs::read_to_string(dir.join(REPORT_FILE))
            .ok()
            .and_then(|t| predicted_gain_of(&t));
        if predicted.is_none() {
            notes.push(format!("{name}: no derivation report"));
        }
        let realized = match fs::read_to_string(dir.join(FINAL_FILE)) {
            Ok(text) => {
                let fin: FinalEvaluation = serde_json::from_str(&text)?;
                let csv_name = if run_dirs.len() == 1 {
                    PER_TASK_CSV.to_string()
                } else {
                    format!("per_task_{name}.csv")
                };
                fs::write(out.join(csv_name), fin.per_task_csv())?;
                Some(fin.realized_gain)
            }
            Err(_) => {
                notes.push(format!("{name}: no final evaluation, per-task table omitted"));
                None
            }
        };
        let show = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let show_n = |v: Option<usize>| v.map_or_else(String::new, |x| x.to_string());
        writeln!(
            variants,
            "{name},{},{},{},{budget},{},{}",
            cfg.sampler.variant,
            cfg.seed,
            show_n(evaluations),
            show(predicted),
            show(realized)
        )
        .unwrap();
        writeln!(
            summary,
            "| {name} | {} | {} | {} | {budget} | {} | {} |",
            cfg.sampler.variant,
            cfg.seed,
            show_n(evaluations),
            show(predicted),
            show(realized)
        )
        .unwrap();
    }

    fs::write(out.join(ROUNDS_CSV), rounds)?;
    if run_dirs.len() > 1 {
        fs::write(out.join(VARIANTS_CSV), variants)?;
    }
    if !notes.is_empty() {
        summary.push_str("\nNotes:\n\n");
        for n in &notes {
            writeln!(summary, "- {n}").unwrap();
        }
    }
    fs::write(out.join(SUMMARY_FILE), summary)?;
    Ok(notes)
}

/// Result of [`run_synthetic`].
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub state: SearchState,
    pub derivation: DerivationResult,
    pub records: Vec<EvaluationRecord>,
    pub realized_gain: f64,
    /// Ground-truth evaluations spent by the sampler.
    pub evaluations: usize,
}

/// Search, derivation and final evaluation against the synthetic oracle,
/// entirely in memory.
pub fn run_synthetic(cfg: &RunConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let EvaluatorSpec::Synthetic(ocfg) = &cfg.evaluator else {
        return Err(Error::config("run_synthetic needs the synthetic evaluator"));
    };
    let baselines = cfg.load_baselines()?;
    let oracle = SyntheticOracle::new(ocfg.clone(), &cfg.space, baselines.clone())?;
    let cache = EvaluationCache::in_memory(CacheHeader::new(cfg.fingerprint(), baselines.fingerprint()));
    let truth = GroundTruth::new(oracle.clone(), cache, cfg.sampler.max_retries);
    let mut sampler = Sampler::new(
        cfg.space.clone(),
        cfg.surrogate_config(),
        cfg.train.clone(),
        cfg.sampler.clone(),
        truth,
    )?;
    let state = sampler.run(stage_rng(cfg.seed, "sampler"), None, None)?;
    let evaluations = state.counters.evaluations;
    let derivation = greedy_search(&state.params, &cfg.derivation_config(), &cfg.space)?;
    let records: Vec<EvaluationRecord> = derivation
        .population
        .members
        .iter()
        .map(|p| oracle.evaluate_point(p))
        .collect();
    let realized_gain = overall_gain(&records, cfg.space.num_tasks)?;
    Ok(PipelineOutcome {
        state,
        derivation,
        records,
        realized_gain,
        evaluations,
    })
}
