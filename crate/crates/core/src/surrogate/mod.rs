//! Learned gain predictor `F(C, A) -> g`.
//!
//! Three sub-networks:
//!
//! * a DAG encoder that walks the computation nodes in order, averaging
//!   `W_op · h_i` over the incoming edges of each node and squashing with
//!   `tanh` (or nothing, in [`DagActivation::Linear`] mode);
//! * a single-head self-attention encoder over the task embeddings of the
//!   combination, mean-pooled into `z`;
//! * a per-task head `w₂ · relu(W₁ [h_P; z; u_t] + b₁) + b₂`.
//!
//! Gradients are derived by hand in [`backward`]; training uses Adam.

mod backward;
mod checkpoint;
mod forward;
pub(crate) mod linalg;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{OperationKind, SearchPoint, SearchSpaceConfig};

pub use backward::{gradients, sample_loss};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use forward::{encode_architecture, encode_combination, head_output, predict_gains, predict_task_gain};
pub use linalg::Matrix;
pub use train::{dataset_mae, train, TrainReport};

/// Nonlinearity applied after each DAG aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DagActivation {
    #[default]
    Tanh,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub hidden_dim: usize,
    pub head_hidden_dim: usize,
    pub num_tasks: usize,
    pub num_nodes: usize,
    pub operations: Vec<OperationKind>,
    #[serde(default)]
    pub activation: DagActivation,
}

impl SurrogateConfig {
    pub fn for_space(space: &SearchSpaceConfig, hidden_dim: usize) -> Self {
        SurrogateConfig {
            hidden_dim,
            head_hidden_dim: hidden_dim,
            num_tasks: space.num_tasks,
            num_nodes: space.num_nodes,
            operations: space.operations.clone(),
            activation: DagActivation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.head_hidden_dim == 0 {
            return Err(Error::config("surrogate dimensions must be at least 1"));
        }
        if self.num_tasks == 0 || self.operations.is_empty() {
            return Err(Error::config("surrogate needs at least one task and one operation"));
        }
        Ok(())
    }

    pub fn check_space(&self, space: &SearchSpaceConfig) -> Result<()> {
        if self.num_tasks != space.num_tasks || self.num_nodes != space.num_nodes || self.operations != space.operations
        {
            return Err(Error::config(
                "surrogate configuration disagrees with the search space (N, P or operations)",
            ));
        }
        Ok(())
    }

    /// Slot of `op` in the per-operation matrix list.
    pub fn op_slot(&self, op: OperationKind) -> usize {
        self.operations
            .iter()
            .position(|&o| o == op)
            .unwrap_or_else(|| panic!("operation `{op}` not in surrogate configuration"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl BlockSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Every learnable tensor of the surrogate. Also used as the gradient bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateParams {
    pub config: SurrogateConfig,
    pub input_node: Vec<f64>,
    pub op_matrices: Vec<Matrix>,
    pub task_embeddings: Matrix,
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
    pub head_hidden: Matrix,
    pub head_hidden_bias: Vec<f64>,
    pub head_out: Vec<f64>,
    pub head_out_bias: Vec<f64>,
}

impl SurrogateParams {
    pub fn zeros(config: &SurrogateConfig) -> Self {
        let d = config.hidden_dim;
        let hh = config.head_hidden_dim;
        SurrogateParams {
            config: config.clone(),
            input_node: vec![0.0; d],
            op_matrices: vec![Matrix::zeros(d, d); config.operations.len()],
            task_embeddings: Matrix::zeros(config.num_tasks, d),
            query: Matrix::zeros(d, d),
            key: Matrix::zeros(d, d),
            value: Matrix::zeros(d, d),
            head_hidden: Matrix::zeros(hh, 3 * d),
            head_hidden_bias: vec![0.0; hh],
            head_out: vec![0.0; hh],
            head_out_bias: vec![0.0],
        }
    }

    /// Block names and shapes in storage order.
    pub fn layout(config: &SurrogateConfig) -> Vec<BlockSpec> {
        let d = config.hidden_dim;
        let hh = config.head_hidden_dim;
        let spec = |name: String, rows, cols| BlockSpec { name, rows, cols };
        let mut out = vec![spec("input_node".into(), d, 1)];
        for op in &config.operations {
            out.push(spec(format!("op.{}", op.label()), d, d));
        }
        out.push(spec("task_embeddings".into(), config.num_tasks, d));
        out.push(spec("attn.query".into(), d, d));
        out.push(spec("attn.key".into(), d, d));
        out.push(spec("attn.value".into(), d, d));
        out.push(spec("head.hidden.weight".into(), hh, 3 * d));
        out.push(spec("head.hidden.bias".into(), hh, 1));
        out.push(spec("head.out.weight".into(), 1, hh));
        out.push(spec("head.out.bias".into(), 1, 1));
        out
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.input_node];
        out.extend(self.op_matrices.iter().map(|m| m.data.as_slice()));
        out.push(&self.task_embeddings.data);
        out.push(&self.query.data);
        out.push(&self.key.data);
        out.push(&self.value.data);
        out.push(&self.head_hidden.data);
        out.push(&self.head_hidden_bias);
        out.push(&self.head_out);
        out.push(&self.head_out_bias);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.input_node];
        out.extend(self.op_matrices.iter_mut().map(|m| m.data.as_mut_slice()));
        out.push(&mut self.task_embeddings.data);
        out.push(&mut self.query.data);
        out.push(&mut self.key.data);
        out.push(&mut self.value.data);
        out.push(&mut self.head_hidden.data);
        out.push(&mut self.head_hidden_bias);
        out.push(&mut self.head_out);
        out.push(&mut self.head_out_bias);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// First block holding a non-finite value.
    pub fn non_finite_block(&self) -> Option<String> {
        Self::layout(&self.config)
            .into_iter()
            .zip(self.blocks())
            .find(|(_, data)| data.iter().any(|v| !v.is_finite()))
            .map(|(spec, _)| spec.name)
    }

    pub fn task_embedding(&self, task: usize) -> &[f64] {
        self.task_embeddings.row(task)
    }
}

/// Matrices and embeddings uniform in `±1/√d_s`, biases zero.
pub fn init_params<R: Rng + ?Sized>(config: &SurrogateConfig, rng: &mut R) -> SurrogateParams {
    let mut params = SurrogateParams::zeros(config);
    let bound = 1.0 / (config.hidden_dim as f64).sqrt();
    let layout = SurrogateParams::layout(config);
    for (spec, block) in layout.iter().zip(params.blocks_mut()) {
        if spec.name.ends_with(".bias") {
            continue;
        }
        for v in block.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
    }
    params
}

/// A ground-truth sample: gains listed in ascending task order of the combination.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub point: SearchPoint,
    pub gains: Vec<f64>,
}

impl TrainingSample {
    pub fn new(point: SearchPoint, gains: Vec<f64>) -> Result<Self> {
        if gains.len() != point.combination.len() {
            return Err(Error::config(format!(
                "sample for {} has {} gains, expected {}",
                point,
                gains.len(),
                point.combination.len()
            )));
        }
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gains of {point}")));
        }
        Ok(TrainingSample { point, gains })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs_per_update: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            batch_size: 5,
            epochs_per_update: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Mean absolute error, averaged over components.
pub fn loss(predicted: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(predicted.len(), truth.len(), "loss called with mismatched lengths");
    assert!(!predicted.is_empty(), "loss called on empty vectors");
    predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / predicted.len() as f64
}
