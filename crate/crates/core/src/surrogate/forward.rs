use super::linalg::{axpy, dot};
use super::{DagActivation, SurrogateParams};
use crate::space::{Architecture, SearchPoint, TaskCombination, TaskId};

/// Node states `h_0 … h_P` of one DAG encoding pass.
pub(crate) struct DagTrace {
    pub nodes: Vec<Vec<f64>>,
}

pub(crate) fn dag_forward(params: &SurrogateParams, arch: &Architecture) -> DagTrace {
    let d = params.config.hidden_dim;
    let p_total = arch.num_nodes();
    let mut nodes: Vec<Vec<f64>> = Vec::with_capacity(p_total + 1);
    nodes.push(params.input_node.clone());
    let mut tmp = vec![0.0; d];
    for p in 1..=p_total {
        let mut acc = vec![0.0; d];
        for (i, h_i) in nodes.iter().enumerate() {
            let w = &params.op_matrices[params.config.op_slot(arch.op(i, p))];
            w.matvec_into(h_i, &mut tmp);
            axpy(1.0, &tmp, &mut acc);
        }
        let inv = 1.0 / p as f64;
        for a in acc.iter_mut() {
            *a *= inv;
            if params.config.activation == DagActivation::Tanh {
                *a = a.tanh();
            }
        }
        nodes.push(acc);
    }
    DagTrace { nodes }
}

/// Intermediates of the task-set self-attention.
pub(crate) struct AttentionTrace {
    pub tasks: Vec<usize>,
    pub queries: Vec<Vec<f64>>,
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    /// Row `i` holds the softmax weights of token `i` over all keys.
    pub weights: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
}

pub(crate) fn attention_forward(params: &SurrogateParams, comb: TaskCombination) -> AttentionTrace {
    let d = params.config.hidden_dim;
    let tasks: Vec<usize> = comb.members().map(TaskId::index).collect();
    let project =
        |m: &super::Matrix| -> Vec<Vec<f64>> { tasks.iter().map(|&t| m.matvec(params.task_embedding(t))).collect() };
    let queries = project(&params.query);
    let keys = project(&params.key);
    let values = project(&params.value);
    let scale = 1.0 / (d as f64).sqrt();
    let m = tasks.len();

    let mut weights = Vec::with_capacity(m);
    let mut pooled = vec![0.0; d];
    for q in &queries {
        let scores: Vec<f64> = keys.iter().map(|k| dot(q, k) * scale).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let row: Vec<f64> = exps.iter().map(|e| e / total).collect();
        for (a, v) in row.iter().zip(&values) {
            axpy(a / m as f64, v, &mut pooled);
        }
        weights.push(row);
    }
    AttentionTrace {
        tasks,
        queries,
        keys,
        values,
        weights,
        pooled,
    }
}

/// Pre-activation of the head's hidden layer for input `[h; z; u]`.
pub(crate) fn head_preactivation(params: &SurrogateParams, h: &[f64], z: &[f64], u: &[f64]) -> Vec<f64> {
    let d = params.config.hidden_dim;
    let w = &params.head_hidden;
    (0..w.rows)
        .map(|r| {
            let row = w.row(r);
            dot(&row[..d], h) + dot(&row[d..2 * d], z) + dot(&row[2 * d..], u) + params.head_hidden_bias[r]
        })
        .collect()
}

pub fn head_output(params: &SurrogateParams, h: &[f64], z: &[f64], u: &[f64]) -> f64 {
    let pre = head_preactivation(params, h, z, u);
    pre.iter()
        .zip(&params.head_out)
        .map(|(p, w)| p.max(0.0) * w)
        .sum::<f64>()
        + params.head_out_bias[0]
}

/// Final node state `h_P` of the DAG encoder.
pub fn encode_architecture(params: &SurrogateParams, arch: &Architecture) -> Vec<f64> {
    dag_forward(params, arch).nodes.pop().expect("at least one node")
}

/// Mean-pooled self-attention over the combination's task embeddings.
pub fn encode_combination(params: &SurrogateParams, comb: TaskCombination) -> Vec<f64> {
    attention_forward(params, comb).pooled
}

/// Predicted gain for every task of the point, in ascending task order.
pub fn predict_gains(params: &SurrogateParams, point: &SearchPoint) -> Vec<f64> {
    let h = encode_architecture(params, &point.architecture);
    let z = encode_combination(params, point.combination);
    point
        .combination
        .members()
        .map(|t| head_output(params, &h, &z, params.task_embedding(t.index())))
        .collect()
}

/// Predicted gain of a single member task.
pub fn predict_task_gain(params: &SurrogateParams, point: &SearchPoint, task: TaskId) -> f64 {
    assert!(
        point.combination.contains(task),
        "{task} is not a member of {}",
        point.combination
    );
    let h = encode_architecture(params, &point.architecture);
    let z = encode_combination(params, point.combination);
    head_output(params, &h, &z, params.task_embedding(task.index()))
}
