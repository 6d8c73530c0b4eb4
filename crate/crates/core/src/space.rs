//! The joint search space of task combinations and DAG encoders.
//!
//! A [`TaskCombination`] is a nonempty subset of the `N` tasks, stored as a
//! bit mask so that equality, ordering and hashing are canonical. An
//! [`Architecture`] is a DAG over `P` computation nodes plus the input node 0;
//! every pair `i < p` is connected and each edge carries one
//! [`OperationKind`]. Edges are kept in lexicographic `(src, dst)` order.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported task count (one bit per task).
pub const MAX_TASKS: usize = 64;

/// Default cap on the candidate list built by [`combinations_containing`].
pub const DEFAULT_CANDIDATE_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId(pub usize);

impl TaskId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

/// Candidate operation on a DAG edge, in fixed declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperationKind {
    Identity,
    Zero,
    Ffn,
    Rnn,
    Attention,
}

impl OperationKind {
    pub const ALL: [OperationKind; 5] = [
        OperationKind::Identity,
        OperationKind::Zero,
        OperationKind::Ffn,
        OperationKind::Rnn,
        OperationKind::Attention,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            OperationKind::Identity => "identity",
            OperationKind::Zero => "zero",
            OperationKind::Ffn => "ffn",
            OperationKind::Rnn => "rnn",
            OperationKind::Attention => "attention",
        }
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OperationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        OperationKind::ALL
            .iter()
            .copied()
            .find(|op| op.label() == s)
            .ok_or_else(|| format!("unknown operation label `{s}`"))
    }
}

/// Nonempty set of tasks trained together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskCombination {
    mask: u64,
}

impl TaskCombination {
    pub fn from_mask(mask: u64) -> Result<Self> {
        if mask == 0 {
            return Err(Error::config("task combination must be nonempty"));
        }
        Ok(TaskCombination { mask })
    }

    pub fn from_tasks<I: IntoIterator<Item = TaskId>>(tasks: I) -> Result<Self> {
        let mut mask = 0u64;
        for t in tasks {
            if t.0 >= MAX_TASKS {
                return Err(Error::config(format!("task index {} exceeds {MAX_TASKS}", t.0)));
            }
            mask |= 1 << t.0;
        }
        Self::from_mask(mask)
    }

    pub fn singleton(task: TaskId) -> Self {
        TaskCombination { mask: 1 << task.0 }
    }

    pub fn full(num_tasks: usize) -> Self {
        TaskCombination {
            mask: full_mask(num_tasks),
        }
    }

    pub fn mask(self) -> u64 {
        self.mask
    }

    pub fn len(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn contains(self, task: TaskId) -> bool {
        task.0 < MAX_TASKS && self.mask & (1 << task.0) != 0
    }

    /// Members in ascending order.
    pub fn members(self) -> impl Iterator<Item = TaskId> {
        mask_members(self.mask)
    }

    /// Position of `task` among the ascending members.
    pub fn position(self, task: TaskId) -> Option<usize> {
        if !self.contains(task) {
            return None;
        }
        let below = self.mask & ((1u64 << task.0) - 1);
        Some(below.count_ones() as usize)
    }

    pub fn max_task(self) -> TaskId {
        TaskId(63 - self.mask.leading_zeros() as usize)
    }
}

impl fmt::Display for TaskCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.members().map(|t| t.0.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

fn mask_members(mask: u64) -> impl Iterator<Item = TaskId> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let t = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(TaskId(t))
        }
    })
}

fn full_mask(num_tasks: usize) -> u64 {
    if num_tasks >= 64 {
        u64::MAX
    } else {
        (1u64 << num_tasks) - 1
    }
}

/// Number of edges in a fully connected DAG over `num_nodes` computation nodes.
pub fn edge_count(num_nodes: usize) -> usize {
    num_nodes * (num_nodes + 1) / 2
}

/// All edges `(src, dst)` with `0 <= src < dst <= num_nodes`, lexicographic.
pub fn edges(num_nodes: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..num_nodes).flat_map(move |s| (s + 1..=num_nodes).map(move |d| (s, d)))
}

/// Index of edge `(src, dst)` in lexicographic order.
pub fn edge_index(num_nodes: usize, src: usize, dst: usize) -> usize {
    debug_assert!(src < dst && dst <= num_nodes);
    src * num_nodes - src * src.saturating_sub(1) / 2 + (dst - src - 1)
}

/// Shared encoder: one operation per DAG edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Architecture {
    num_nodes: usize,
    ops: Vec<OperationKind>,
}

impl Architecture {
    /// Builds an architecture from operations listed in lexicographic edge order.
    pub fn new(num_nodes: usize, ops: Vec<OperationKind>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::config("architecture needs at least one computation node"));
        }
        if ops.len() != edge_count(num_nodes) {
            return Err(Error::config(format!(
                "expected {} edge operations for P={num_nodes}, got {}",
                edge_count(num_nodes),
                ops.len()
            )));
        }
        Ok(Architecture { num_nodes, ops })
    }

    /// Builds an architecture from `(src, dst, op)` triples in any order.
    pub fn from_edges<I>(num_nodes: usize, edge_ops: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, OperationKind)>,
    {
        if num_nodes == 0 {
            return Err(Error::config("architecture needs at least one computation node"));
        }
        let mut slots: Vec<Option<OperationKind>> = vec![None; edge_count(num_nodes)];
        for (s, d, op) in edge_ops {
            if s >= d || d > num_nodes {
                return Err(Error::config(format!("edge ({s},{d}) is not valid for P={num_nodes}")));
            }
            let slot = &mut slots[edge_index(num_nodes, s, d)];
            if slot.is_some() {
                return Err(Error::config(format!("edge ({s},{d}) given twice")));
            }
            *slot = Some(op);
        }
        let ops = slots
            .into_iter()
            .zip(edges(num_nodes))
            .map(|(op, (s, d))| op.ok_or_else(|| Error::config(format!("edge ({s},{d}) is missing"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Architecture { num_nodes, ops })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Operations in lexicographic edge order.
    pub fn ops(&self) -> &[OperationKind] {
        &self.ops
    }

    pub fn op(&self, src: usize, dst: usize) -> OperationKind {
        self.ops[edge_index(self.num_nodes, src, dst)]
    }

    pub fn edge_ops(&self) -> impl Iterator<Item = ((usize, usize), OperationKind)> + '_ {
        edges(self.num_nodes).zip(self.ops.iter().copied())
    }

    pub(crate) fn set_op(&mut self, edge: usize, op: OperationKind) {
        self.ops[edge] = op;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpaceConfig {
    pub num_tasks: usize,
    pub num_nodes: usize,
    #[serde(default = "default_operations")]
    pub operations: Vec<OperationKind>,
}

fn default_operations() -> Vec<OperationKind> {
    OperationKind::ALL.to_vec()
}

impl SearchSpaceConfig {
    pub fn new(num_tasks: usize, num_nodes: usize) -> Self {
        SearchSpaceConfig {
            num_tasks,
            num_nodes,
            operations: default_operations(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 || self.num_tasks > MAX_TASKS {
            return Err(Error::config(format!("num_tasks must be in 1..={MAX_TASKS}")));
        }
        if self.num_nodes == 0 {
            return Err(Error::config("num_nodes must be at least 1"));
        }
        if self.operations.is_empty() {
            return Err(Error::config("operation set is empty"));
        }
        let unique: HashSet<_> = self.operations.iter().collect();
        if unique.len() != self.operations.len() {
            return Err(Error::config("operation labels must be unique"));
        }
        if self.num_tasks == 1 && self.operations.len() == 1 {
            return Err(Error::config("search space has a single point; nothing to search"));
        }
        Ok(())
    }

    pub fn tasks(&self) -> impl Iterator<Item = TaskId> {
        (0..self.num_tasks).map(TaskId)
    }

    pub fn full_combination(&self) -> TaskCombination {
        TaskCombination::full(self.num_tasks)
    }

    pub fn check_combination(&self, comb: TaskCombination) -> Result<()> {
        if comb.mask() & !full_mask(self.num_tasks) != 0 {
            return Err(Error::config(format!(
                "combination {comb} references tasks outside 0..{}",
                self.num_tasks
            )));
        }
        Ok(())
    }

    pub fn check_architecture(&self, arch: &Architecture) -> Result<()> {
        if arch.num_nodes() != self.num_nodes {
            return Err(Error::config(format!(
                "architecture has P={}, space expects P={}",
                arch.num_nodes(),
                self.num_nodes
            )));
        }
        if let Some(op) = arch.ops().iter().find(|op| !self.operations.contains(op)) {
            return Err(Error::config(format!("operation `{op}` is not in the candidate set")));
        }
        Ok(())
    }

    pub fn check_point(&self, point: &SearchPoint) -> Result<()> {
        self.check_combination(point.combination)?;
        self.check_architecture(&point.architecture)
    }
}

/// One `(C, A)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SearchPoint {
    pub combination: TaskCombination,
    pub architecture: Architecture,
}

impl SearchPoint {
    pub fn new(combination: TaskCombination, architecture: Architecture) -> Self {
        SearchPoint {
            combination,
            architecture,
        }
    }

    /// Canonical text form, e.g. `tasks=0,3,4|P=2|ops=rnn,ffn,attention`.
    pub fn encode(&self) -> String {
        let tasks: Vec<String> = self.combination.members().map(|t| t.0.to_string()).collect();
        let ops: Vec<&str> = self.architecture.ops().iter().map(|op| op.label()).collect();
        format!(
            "tasks={}|P={}|ops={}",
            tasks.join(","),
            self.architecture.num_nodes(),
            ops.join(",")
        )
    }

    pub fn decode(text: &str, config: &SearchSpaceConfig) -> Result<Self> {
        let fail = |reason: String| Error::Decode {
            text: text.to_string(),
            reason,
        };
        let fields: Vec<&str> = text.trim().split('|').collect();
        let [tasks, nodes, ops] = fields.as_slice() else {
            return Err(fail("expected three `|`-separated fields".into()));
        };
        let tasks = tasks
            .strip_prefix("tasks=")
            .ok_or_else(|| fail("missing `tasks=` field".into()))?;
        let nodes = nodes
            .strip_prefix("P=")
            .ok_or_else(|| fail("missing `P=` field".into()))?;
        let ops = ops
            .strip_prefix("ops=")
            .ok_or_else(|| fail("missing `ops=` field".into()))?;

        let mut members = Vec::new();
        for part in tasks.split(',') {
            let idx: usize = part.parse().map_err(|_| fail(format!("bad task index `{part}`")))?;
            if idx >= config.num_tasks {
                return Err(fail(format!("task {idx} out of range for N={}", config.num_tasks)));
            }
            members.push(TaskId(idx));
        }
        let combination = TaskCombination::from_tasks(members).map_err(|e| fail(e.to_string()))?;

        let num_nodes: usize = nodes.parse().map_err(|_| fail(format!("bad node count `{nodes}`")))?;
        if num_nodes != config.num_nodes {
            return Err(fail(format!("P={num_nodes} but space has P={}", config.num_nodes)));
        }
        let ops = ops
            .split(',')
            .map(|s| s.parse::<OperationKind>().map_err(fail))
            .collect::<Result<Vec<_>>>()?;
        let architecture = Architecture::new(num_nodes, ops).map_err(|e| fail(e.to_string()))?;
        config
            .check_architecture(&architecture)
            .map_err(|e| fail(e.to_string()))?;
        Ok(SearchPoint::new(combination, architecture))
    }
}

impl fmt::Display for SearchPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

/// `2^N - 1`.
pub fn combination_count(config: &SearchSpaceConfig) -> u128 {
    (1u128 << config.num_tasks) - 1
}

/// `|O|^(P(P+1)/2)`, or `None` when it does not fit in 128 bits.
pub fn architecture_count(config: &SearchSpaceConfig) -> Option<u128> {
    let edges = u32::try_from(edge_count(config.num_nodes)).ok()?;
    (config.operations.len() as u128).checked_pow(edges)
}

/// Every combination in ascending mask order.
pub fn all_combinations(config: &SearchSpaceConfig) -> impl Iterator<Item = TaskCombination> {
    (1..=full_mask(config.num_tasks)).map(|mask| TaskCombination { mask })
}

/// Every architecture, lexicographic in the edge-op sequence (operations in
/// the space's listed order).
pub fn all_architectures(config: &SearchSpaceConfig) -> impl Iterator<Item = Architecture> + '_ {
    let e = edge_count(config.num_nodes);
    let radix = config.operations.len();
    let mut digits: Option<Vec<usize>> = Some(vec![0; e]);
    std::iter::from_fn(move || {
        let current = digits.clone()?;
        let arch = Architecture {
            num_nodes: config.num_nodes,
            ops: current.iter().map(|&d| config.operations[d]).collect(),
        };
        let next = digits.as_mut().unwrap();
        let mut i = e;
        loop {
            if i == 0 {
                digits = None;
                break;
            }
            i -= 1;
            next[i] += 1;
            if next[i] < radix {
                break;
            }
            next[i] = 0;
        }
        Some(arch)
    })
}

/// Uniform nonempty subset, optionally conditioned on containing `must_include`.
pub fn random_combination<R: Rng + ?Sized>(
    rng: &mut R,
    config: &SearchSpaceConfig,
    must_include: Option<TaskId>,
) -> TaskCombination {
    let full = full_mask(config.num_tasks);
    match must_include {
        Some(anchor) => {
            let mask = rng.random::<u64>() & full;
            TaskCombination {
                mask: mask | (1 << anchor.0),
            }
        }
        None => loop {
            let mask = rng.random::<u64>() & full;
            if mask != 0 {
                break TaskCombination { mask };
            }
        },
    }
}

/// Independent uniform operation on every edge.
pub fn random_architecture<R: Rng + ?Sized>(rng: &mut R, config: &SearchSpaceConfig) -> Architecture {
    let ops = (0..edge_count(config.num_nodes))
        .map(|_| *config.operations.choose(rng).expect("operation set is nonempty"))
        .collect();
    Architecture {
        num_nodes: config.num_nodes,
        ops,
    }
}

pub fn random_point<R: Rng + ?Sized>(rng: &mut R, config: &SearchSpaceConfig) -> SearchPoint {
    let combination = random_combination(rng, config, None);
    SearchPoint::new(combination, random_architecture(rng, config))
}

/// Candidate combinations containing `task`.
///
/// Enumerates all `2^(N-1)` of them in ascending mask order when that fits in
/// `cap`. Otherwise returns `cap` distinct ones: the singleton, the full set,
/// then uniform draws without replacement.
pub fn combinations_containing<R: Rng + ?Sized>(
    task: TaskId,
    config: &SearchSpaceConfig,
    cap: usize,
    rng: &mut R,
) -> Vec<TaskCombination> {
    let cap = cap.max(2);
    let others = config.num_tasks - 1;
    let anchor_bit = 1u64 << task.0;
    let full = full_mask(config.num_tasks);

    if others < 63 && (1usize << others) <= cap {
        return (1..=full)
            .filter(|m| m & anchor_bit != 0)
            .map(|mask| TaskCombination { mask })
            .collect();
    }

    let singleton = TaskCombination { mask: anchor_bit };
    let everything = TaskCombination { mask: full };
    let mut seen: HashSet<u64> = [singleton.mask, everything.mask].into_iter().collect();
    let mut out = vec![singleton, everything];
    while out.len() < cap {
        let mask = (rng.random::<u64>() & full) | anchor_bit;
        if seen.insert(mask) {
            out.push(TaskCombination { mask });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CombinationMove {
    Add,
    Remove,
    Swap,
}

/// Changes one task of the combination or one edge operation.
///
/// A fair coin picks between the two kinds when both are possible. Within a
/// combination move, add / remove / swap is drawn uniformly and re-drawn while
/// infeasible. The result always differs from the input.
pub fn mutate_point<R: Rng + ?Sized>(rng: &mut R, point: &SearchPoint, config: &SearchSpaceConfig) -> SearchPoint {
    let comb = point.combination;
    let can_mutate_tasks = config.num_tasks > 1;
    let can_mutate_ops = config.operations.len() > 1;
    let mutate_tasks = match (can_mutate_tasks, can_mutate_ops) {
        (true, true) => rng.random_bool(0.5),
        (true, false) => true,
        (false, true) => false,
        (false, false) => panic!("search space has a single point"),
    };

    let mut out = point.clone();
    if mutate_tasks {
        let full = full_mask(config.num_tasks);
        let present: Vec<TaskId> = comb.members().collect();
        let absent: Vec<TaskId> = mask_members(full & !comb.mask).collect();
        let mv = loop {
            let mv = [CombinationMove::Add, CombinationMove::Remove, CombinationMove::Swap][rng.random_range(0..3)];
            let feasible = match mv {
                CombinationMove::Add | CombinationMove::Swap => !absent.is_empty(),
                CombinationMove::Remove => present.len() > 1,
            };
            if feasible {
                break mv;
            }
        };
        let mut mask = comb.mask;
        match mv {
            CombinationMove::Add => mask |= 1 << absent.choose(rng).unwrap().0,
            CombinationMove::Remove => mask &= !(1 << present.choose(rng).unwrap().0),
            CombinationMove::Swap => {
                mask &= !(1 << present.choose(rng).unwrap().0);
                mask |= 1 << absent.choose(rng).unwrap().0;
            }
        }
        out.combination = TaskCombination { mask };
    } else {
        let edge = rng.random_range(0..point.architecture.ops().len());
        let current = point.architecture.ops()[edge];
        let alternatives: Vec<OperationKind> = config.operations.iter().copied().filter(|&op| op != current).collect();
        out.architecture.set_op(edge, *alternatives.choose(rng).unwrap());
    }
    out
}
