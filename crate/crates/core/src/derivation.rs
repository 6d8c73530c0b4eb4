//! Picks the final `B` (combination, architecture) pairs from a frozen scorer.
//!
//! The objective is the overall gain `G`: each task takes its best predicted
//! gain over the members that contain it, then the maxima are averaged.
//! [`greedy_search`] hill-climbs on `G` by mutating one member at a time;
//! [`brute_force_best`] solves tiny instances exactly for reference.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{per_task_best, SyntheticOracle, TaskBest};
use crate::rng::{rng_from_seed, sub_seed, EngineRng};
use crate::space::{
    all_architectures, all_combinations, architecture_count, combination_count, mutate_point, random_architecture,
    random_point, SearchPoint, SearchSpaceConfig, TaskCombination,
};
use crate::surrogate::{predict_gains, SurrogateParams};

/// Redraws of a random population before coverage is forced.
pub const INIT_ATTEMPTS: usize = 1000;

/// Largest space [`brute_force_best`] will enumerate.
pub const BRUTE_FORCE_POINT_LIMIT: u128 = 10_000;

/// Gains for every member of a point's combination, ascending member order.
pub trait GainScorer {
    fn score(&self, point: &SearchPoint) -> Vec<f64>;
}

impl GainScorer for SurrogateParams {
    fn score(&self, point: &SearchPoint) -> Vec<f64> {
        predict_gains(self, point)
    }
}

impl GainScorer for SyntheticOracle {
    fn score(&self, point: &SearchPoint) -> Vec<f64> {
        self.true_gains(point)
    }
}

/// Memoizes another scorer by point.
pub struct CachedScorer<'a, S: ?Sized> {
    inner: &'a S,
    memo: RefCell<HashMap<SearchPoint, Vec<f64>>>,
}

impl<'a, S: GainScorer + ?Sized> CachedScorer<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        CachedScorer {
            inner,
            memo: RefCell::new(HashMap::new()),
        }
    }
}

impl<S: GainScorer + ?Sized> GainScorer for CachedScorer<'_, S> {
    fn score(&self, point: &SearchPoint) -> Vec<f64> {
        if let Some(g) = self.memo.borrow().get(point) {
            return g.clone();
        }
        let g = self.inner.score(point);
        self.memo.borrow_mut().insert(point.clone(), g.clone());
        g
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Population {
    pub members: Vec<SearchPoint>,
}

impl Population {
    pub fn new(members: Vec<SearchPoint>) -> Self {
        Population { members }
    }

    pub fn covers(&self, num_tasks: usize) -> bool {
        let mask = self.members.iter().fold(0u64, |m, p| m | p.combination.mask());
        mask == TaskCombination::full(num_tasks).mask()
    }

    pub fn has_duplicates(&self) -> bool {
        let mut seen = HashSet::new();
        !self.members.iter().all(|m| seen.insert(m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DerivationConfig {
    /// `B`
    pub budget: usize,
    /// `K2`
    pub iterations: usize,
    /// `R`
    pub restarts: usize,
    /// Set from the master seed in a full run, so not read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for DerivationConfig {
    fn default() -> Self {
        DerivationConfig {
            budget: 3,
            iterations: 1000,
            restarts: 8,
            seed: 0,
        }
    }
}

impl DerivationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("derivation budget B must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::config("derivation needs at least one restart"));
        }
        Ok(())
    }
}

fn scored_members<S: GainScorer + ?Sized>(scorer: &S, pop: &Population) -> Vec<(TaskCombination, Vec<f64>)> {
    pop.members.iter().map(|m| (m.combination, scorer.score(m))).collect()
}

/// Per-task best member under `scorer`.
pub fn task_assignment<S: GainScorer + ?Sized>(
    scorer: &S,
    pop: &Population,
    num_tasks: usize,
) -> Result<Vec<TaskBest>> {
    let scored = scored_members(scorer, pop);
    per_task_best(num_tasks, scored.iter().map(|(c, g)| (*c, g.as_slice())))
}

/// Mean over tasks of the best predicted gain among members containing the task.
pub fn predicted_overall_gain<S: GainScorer + ?Sized>(scorer: &S, pop: &Population, num_tasks: usize) -> Result<f64> {
    let best = task_assignment(scorer, pop, num_tasks)?;
    Ok(best.iter().map(|b| b.gain).sum::<f64>() / num_tasks as f64)
}

/// `B` distinct random points covering every task.
pub fn init_population(budget: usize, space: &SearchSpaceConfig, rng: &mut EngineRng) -> Population {
    let total = combination_count(space).saturating_mul(architecture_count(space).unwrap_or(u128::MAX));
    let budget = (budget as u128).min(total) as usize;
    let draw = |rng: &mut EngineRng| {
        let mut members: Vec<SearchPoint> = Vec::with_capacity(budget);
        while members.len() < budget {
            let p = random_point(rng, space);
            if !members.contains(&p) {
                members.push(p);
            }
        }
        Population::new(members)
    };
    let mut pop = draw(rng);
    for _ in 1..INIT_ATTEMPTS {
        if pop.covers(space.num_tasks) {
            return pop;
        }
        pop = draw(rng);
    }
    if !pop.covers(space.num_tasks) {
        let full = space.full_combination();
        let last = pop.members.len() - 1;
        loop {
            let candidate = SearchPoint::new(full, random_architecture(rng, space));
            if !pop.members[..last].contains(&candidate) {
                pop.members[last] = candidate;
                break;
            }
        }
    }
    pop
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartTrace {
    pub seed: u64,
    pub initial_gain: f64,
    /// `G` after each accepted mutation, starting with the initial value.
    pub accepted: Vec<f64>,
    pub rejected_coverage: usize,
    pub rejected_duplicate: usize,
    pub population: Population,
}

impl RestartTrace {
    pub fn final_gain(&self) -> f64 {
        *self.accepted.last().expect("trajectory starts with the initial value")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivationResult {
    pub population: Population,
    pub predicted_gain: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartTrace>,
}

pub fn restart_seed(seed: u64, restart: usize) -> u64 {
    sub_seed(seed, &format!("restart-{restart}"))
}

fn climb<S: GainScorer + ?Sized>(
    scorer: &S,
    cfg: &DerivationConfig,
    space: &SearchSpaceConfig,
    seed: u64,
) -> Result<RestartTrace> {
    let n = space.num_tasks;
    let mut rng = rng_from_seed(seed);
    let mut pop = init_population(cfg.budget, space, &mut rng);
    let mut value = predicted_overall_gain(scorer, &pop, n)?;
    let mut trace = RestartTrace {
        seed,
        initial_gain: value,
        accepted: vec![value],
        rejected_coverage: 0,
        rejected_duplicate: 0,
        population: pop.clone(),
    };
    for _ in 0..cfg.iterations {
        let idx = rng.random_range(0..pop.members.len());
        let mutated = mutate_point(&mut rng, &pop.members[idx], space);
        if pop.members.iter().enumerate().any(|(i, m)| i != idx && *m == mutated) {
            trace.rejected_duplicate += 1;
            continue;
        }
        let mut next = pop.clone();
        next.members[idx] = mutated;
        if !next.covers(n) {
            trace.rejected_coverage += 1;
            continue;
        }
        let v = predicted_overall_gain(scorer, &next, n)?;
        if v > value {
            value = v;
            pop = next;
            trace.accepted.push(v);
        }
    }
    trace.population = pop;
    Ok(trace)
}

/// Greedy mutation search with `R` independent restarts; the best final
/// population wins (ties to the lowest restart).
pub fn greedy_search<S: GainScorer + ?Sized>(
    scorer: &S,
    cfg: &DerivationConfig,
    space: &SearchSpaceConfig,
) -> Result<DerivationResult> {
    cfg.validate()?;
    space.validate()?;
    let cached = CachedScorer::new(scorer);
    let restarts = (0..cfg.restarts)
        .map(|r| climb(&cached, cfg, space, restart_seed(cfg.seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (r, t) in restarts.iter().enumerate() {
        if t.final_gain() > restarts[best].final_gain() {
            best = r;
        }
    }
    Ok(DerivationResult {
        population: restarts[best].population.clone(),
        predicted_gain: restarts[best].final_gain(),
        best_restart: best,
        restarts,
    })
}

/// Exact optimum of `scorer` over populations of at most `budget` members.
///
/// Enumerates singletons and pairs when `budget <= 2`. When `budget >= N`
/// every task can keep its own best point, so the optimum is the per-task
/// maximum over the whole space. Other budgets, and spaces above
/// [`BRUTE_FORCE_POINT_LIMIT`] points, are refused.
pub fn brute_force_best<S: GainScorer + ?Sized>(
    scorer: &S,
    space: &SearchSpaceConfig,
    budget: usize,
) -> Result<(Population, f64)> {
    space.validate()?;
    let n = space.num_tasks;
    let points = architecture_count(space).and_then(|a| a.checked_mul(combination_count(space)));
    match points {
        Some(p) if p <= BRUTE_FORCE_POINT_LIMIT => {}
        _ => {
            return Err(Error::GuardRefusal(format!(
                "space has {} points (N={n}, P={}, |O|={}); brute force is limited to {BRUTE_FORCE_POINT_LIMIT}",
                points.map_or_else(|| "more than 2^128".to_string(), |p| p.to_string()),
                space.num_nodes,
                space.operations.len()
            )))
        }
    }
    if budget == 0 || (budget > 2 && budget < n) {
        return Err(Error::GuardRefusal(format!(
            "exhaustive population search supports B <= 2 or B >= N; got B={budget}, N={n}"
        )));
    }

    let archs: Vec<_> = all_architectures(space).collect();
    let mut table: Vec<(SearchPoint, Vec<f64>)> = Vec::new();
    for comb in all_combinations(space) {
        for arch in &archs {
            let point = SearchPoint::new(comb, arch.clone());
            let mut dense = vec![f64::NEG_INFINITY; n];
            for (t, g) in comb.members().zip(scorer.score(&point)) {
                dense[t.index()] = g;
            }
            table.push((point, dense));
        }
    }

    if budget > 2 {
        let mut winners: Vec<usize> = Vec::new();
        let mut total = 0.0;
        for t in 0..n {
            let mut best = 0;
            for (i, (_, g)) in table.iter().enumerate() {
                if g[t] > table[best].1[t] {
                    best = i;
                }
            }
            total += table[best].1[t];
            if !winners.contains(&best) {
                winners.push(best);
            }
        }
        let pop = Population::new(winners.into_iter().map(|i| table[i].0.clone()).collect());
        return Ok((pop, total / n as f64));
    }

    let mean_of_max = |a: &[f64], b: Option<&[f64]>| -> f64 {
        let mut s = 0.0;
        for t in 0..n {
            s += b.map_or(a[t], |b| a[t].max(b[t]));
        }
        s / n as f64
    };
    let full = space.full_combination();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (i, (p, g)) in table.iter().enumerate() {
        if p.combination == full {
            let v = mean_of_max(g, None);
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((vec![i], v));
            }
        }
    }
    if budget >= 2 {
        for i in 0..table.len() {
            for j in i + 1..table.len() {
                if table[i].0.combination.mask() | table[j].0.combination.mask() != full.mask() {
                    continue;
                }
                let v = mean_of_max(&table[i].1, Some(&table[j].1));
                if best.as_ref().is_none_or(|(_, b)| v > *b) {
                    best = Some((vec![i, j], v));
                }
            }
        }
    }
    let (idx, value) = best.expect("the full combination always covers");
    Ok((
        Population::new(idx.into_iter().map(|i| table[i].0.clone()).collect()),
        value,
    ))
}

/// Plain-text report: members, per-task assignment and predicted `G`.
///
/// ```text
/// budget 2
/// predicted_gain 0.0123
/// member 0 tasks=0,1|P=1|ops=rnn
/// member 1 tasks=1,2,3|P=1|ops=ffn
/// task 0 member 0 gain 0.0201
/// ...
/// ```
pub fn render_report<S: GainScorer + ?Sized>(
    scorer: &S,
    pop: &Population,
    budget: usize,
    num_tasks: usize,
) -> Result<String> {
    let best = task_assignment(scorer, pop, num_tasks)?;
    let g = best.iter().map(|b| b.gain).sum::<f64>() / num_tasks as f64;
    let mut out = String::new();
    writeln!(out, "budget {budget}").unwrap();
    writeln!(out, "predicted_gain {g}").unwrap();
    for (i, m) in pop.members.iter().enumerate() {
        writeln!(out, "member {i} {}", m.encode()).unwrap();
    }
    for b in &best {
        writeln!(out, "task {} member {} gain {}", b.task.index(), b.member, b.gain).unwrap();
    }
    Ok(out)
}

/// Members listed in a report produced by [`render_report`].
pub fn parse_report(text: &str, space: &SearchSpaceConfig) -> Result<Population> {
    let mut members = Vec::new();
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("member") {
            continue;
        }
        let (Some(idx), Some(enc)) = (parts.next(), parts.next()) else {
            return Err(Error::config(format!("malformed report line `{line}`")));
        };
        if idx.parse::<usize>().ok() != Some(members.len()) {
            return Err(Error::config(format!("report members out of order at `{line}`")));
        }
        members.push(SearchPoint::decode(enc, space)?);
    }
    if members.is_empty() {
        return Err(Error::config("report lists no members"));
    }
    Ok(Population::new(members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{BaselineScores, SyntheticOracleConfig};
    use crate::space::{Architecture, OperationKind, TaskId};
    use crate::surrogate::{init_params, SurrogateConfig};
    use proptest::prelude::*;

    /// Gain of task `t` is `weights[t]` times the number of members, with a
    /// bonus for `rnn` on the first edge.
    struct Toy;

    impl GainScorer for Toy {
        fn score(&self, p: &SearchPoint) -> Vec<f64> {
            let bonus = if p.architecture.ops()[0] == OperationKind::Rnn {
                0.1
            } else {
                0.0
            };
            p.combination
                .members()
                .map(|t| 0.01 * (t.index() + 1) as f64 / p.combination.len() as f64 + bonus)
                .collect()
        }
    }

    fn pt(tasks: &[usize], op: OperationKind) -> SearchPoint {
        SearchPoint::new(
            TaskCombination::from_tasks(tasks.iter().map(|&t| TaskId(t))).unwrap(),
            Architecture::new(1, vec![op]).unwrap(),
        )
    }

    #[test]
    fn overall_gain_of_a_population() {
        let pop = Population::new(vec![pt(&[0, 1, 2], OperationKind::Ffn)]);
        let g = predicted_overall_gain(&Toy, &pop, 3).unwrap();
        assert!((g - 0.02 / 3.0).abs() < 1e-15);
        let more = Population::new(vec![pt(&[0, 1, 2], OperationKind::Ffn), pt(&[2], OperationKind::Rnn)]);
        let g2 = predicted_overall_gain(&Toy, &more, 3).unwrap();
        assert!((g2 - (0.01 / 3.0 + 0.02 / 3.0 + 0.13) / 3.0).abs() < 1e-15);
        let gap = Population::new(vec![pt(&[0, 1], OperationKind::Ffn)]);
        assert!(matches!(predicted_overall_gain(&Toy, &gap, 3), Err(Error::Coverage(2))));
    }

    #[test]
    fn budget_one_forces_full_set() {
        let space = SearchSpaceConfig::new(6, 1);
        for seed in 0..20 {
            let pop = init_population(1, &space, &mut rng_from_seed(seed));
            assert_eq!(pop.members.len(), 1);
            assert_eq!(pop.members[0].combination, space.full_combination());
        }
    }

    #[test]
    fn zero_iterations_keep_best_initial() {
        let space = SearchSpaceConfig::new(4, 1);
        let cfg = DerivationConfig {
            budget: 2,
            iterations: 0,
            restarts: 5,
            seed: 3,
        };
        let r = greedy_search(&Toy, &cfg, &space).unwrap();
        let initial: Vec<f64> = r.restarts.iter().map(|t| t.initial_gain).collect();
        let top = initial.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.predicted_gain, top);
        assert_eq!(r.best_restart, initial.iter().position(|&g| g == top).unwrap());
    }

    #[test]
    fn greedy_finds_toy_optimum() {
        let space = SearchSpaceConfig::new(3, 1);
        let cfg = DerivationConfig {
            budget: 3,
            iterations: 3000,
            restarts: 2,
            seed: 0,
        };
        let r = greedy_search(&Toy, &cfg, &space).unwrap();
        // Each task alone with rnn.
        let expected = (0.01 + 0.02 + 0.03) / 3.0 + 0.1;
        assert!((r.predicted_gain - expected).abs() < 1e-12);
        let (_, exact) = brute_force_best(&Toy, &space, 3).unwrap();
        assert!((exact - expected).abs() < 1e-12);
    }

    #[test]
    fn brute_force_pairs_agree_with_enumeration() {
        let space = SearchSpaceConfig::new(3, 1);
        let (pop, v) = brute_force_best(&Toy, &space, 2).unwrap();
        assert!(pop.covers(3));
        // Singletons and pairs of an rnn point for task 2 with an rnn cover of {0,1}.
        let expected = (0.01 / 2.0 + 0.02 / 2.0 + 0.03) / 3.0 + 0.1;
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        let (single, v1) = brute_force_best(&Toy, &space, 1).unwrap();
        assert_eq!(single.members.len(), 1);
        assert!((v1 - (0.06 / 3.0 / 3.0 + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn guard_refusals() {
        let big = SearchSpaceConfig::new(25, 2);
        assert!(matches!(brute_force_best(&Toy, &big, 10), Err(Error::GuardRefusal(_))));
        let mid = SearchSpaceConfig::new(4, 1);
        assert!(matches!(brute_force_best(&Toy, &mid, 3), Err(Error::GuardRefusal(_))));
    }

    #[test]
    fn report_round_trip() {
        let space = SearchSpaceConfig::new(3, 1);
        let pop = Population::new(vec![pt(&[0, 1], OperationKind::Ffn), pt(&[2], OperationKind::Rnn)]);
        let text = render_report(&Toy, &pop, 2, 3).unwrap();
        assert!(text.contains("member 1 tasks=2|P=1|ops=rnn"));
        assert!(text.contains("task 2 member 1 gain"));
        assert_eq!(parse_report(&text, &space).unwrap(), pop);
    }

    #[test]
    fn surrogate_and_oracle_are_scorers() {
        let space = SearchSpaceConfig::new(4, 2);
        let params = init_params(&SurrogateConfig::for_space(&space, 4), &mut rng_from_seed(0));
        let oracle =
            SyntheticOracle::new(SyntheticOracleConfig::default(), &space, BaselineScores::backbone(4)).unwrap();
        let p = random_point(&mut rng_from_seed(1), &space);
        assert_eq!(params.score(&p), predict_gains(&params, &p));
        assert_eq!(oracle.score(&p), oracle.true_gains(&p));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn accepted_values_never_decrease(seed in any::<u64>(), budget in 1usize..5) {
            let space = SearchSpaceConfig::new(5, 2);
            let params = init_params(&SurrogateConfig::for_space(&space, 4), &mut rng_from_seed(seed));
            let cfg = DerivationConfig { budget, iterations: 60, restarts: 2, seed };
            let r = greedy_search(&params, &cfg, &space).unwrap();
            prop_assert!(r.population.covers(5));
            prop_assert!(!r.population.has_duplicates());
            prop_assert!(r.population.members.len() == budget);
            for t in &r.restarts {
                prop_assert!(t.accepted.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(t.final_gain() >= t.initial_gain);
                prop_assert!(r.predicted_gain >= t.initial_gain);
            }
        }

        #[test]
        fn adding_a_member_never_hurts(seed in any::<u64>()) {
            let space = SearchSpaceConfig::new(5, 2);
            let params = init_params(&SurrogateConfig::for_space(&space, 4), &mut rng_from_seed(seed));
            let mut rng = rng_from_seed(seed ^ 1);
            let mut pop = init_population(2, &space, &mut rng);
            let before = predicted_overall_gain(&params, &pop, 5).unwrap();
            pop.members.push(random_point(&mut rng, &space));
            prop_assert!(predicted_overall_gain(&params, &pop, 5).unwrap() >= before);
        }
    }
}
