//! Reverse-mode gradients of the batch-mean absolute error.
//!
//! The derivative of `|x|` at `x = 0` is taken as 0.

use super::forward::{attention_forward, dag_forward, head_preactivation, AttentionTrace, DagTrace};
use super::linalg::{axpy, dot};
use super::{DagActivation, SurrogateParams, TrainingSample};
use crate::error::{Error, Result};

/// Mean absolute error of one sample under the current parameters.
pub fn sample_loss(params: &SurrogateParams, sample: &TrainingSample) -> f64 {
    super::loss(&super::predict_gains(params, &sample.point), &sample.gains)
}

/// Mean batch loss and its gradient with respect to every parameter block.
pub fn gradients(params: &SurrogateParams, batch: &[TrainingSample]) -> Result<(f64, SurrogateParams)> {
    assert!(!batch.is_empty(), "gradients called on an empty batch");
    let mut grads = SurrogateParams::zeros(&params.config);
    let d = params.config.hidden_dim;
    let batch_scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;

    for sample in batch {
        let dag = dag_forward(params, &sample.point.architecture);
        let att = attention_forward(params, sample.point.combination);
        let h = dag.nodes.last().unwrap();
        let z = &att.pooled;
        let m = att.tasks.len();
        let out_scale = batch_scale / m as f64;

        let mut dh = vec![0.0; d];
        let mut dz = vec![0.0; d];
        let mut sample_loss = 0.0;
        for (k, &task) in att.tasks.iter().enumerate() {
            let u = params.task_embedding(task);
            let pre = head_preactivation(params, h, z, u);
            let y: f64 = pre
                .iter()
                .zip(&params.head_out)
                .map(|(p, w)| p.max(0.0) * w)
                .sum::<f64>()
                + params.head_out_bias[0];
            let diff = y - sample.gains[k];
            sample_loss += diff.abs();
            let dy = if diff > 0.0 {
                out_scale
            } else if diff < 0.0 {
                -out_scale
            } else {
                0.0
            };
            if dy == 0.0 {
                continue;
            }
            grads.head_out_bias[0] += dy;
            let mut du = vec![0.0; d];
            for (r, &p) in pre.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                grads.head_out[r] += dy * p;
                let dpre = dy * params.head_out[r];
                grads.head_hidden_bias[r] += dpre;
                let row = params.head_hidden.row(r);
                let grow = grads.head_hidden.row_mut(r);
                axpy(dpre, h, &mut grow[..d]);
                axpy(dpre, z, &mut grow[d..2 * d]);
                axpy(dpre, u, &mut grow[2 * d..]);
                axpy(dpre, &row[..d], &mut dh);
                axpy(dpre, &row[d..2 * d], &mut dz);
                axpy(dpre, &row[2 * d..], &mut du);
            }
            axpy(1.0, &du, grads.task_embeddings.row_mut(task));
        }
        total += sample_loss / m as f64 * batch_scale;

        attention_backward(params, &att, &dz, &mut grads);
        dag_backward(params, &sample.point.architecture, &dag, dh, &mut grads);
    }

    let layout = SurrogateParams::layout(&params.config);
    for (spec, block) in layout.iter().zip(grads.blocks()) {
        if block.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(spec.name.clone()));
        }
    }
    Ok((total, grads))
}

fn attention_backward(params: &SurrogateParams, att: &AttentionTrace, dz: &[f64], grads: &mut SurrogateParams) {
    let d = params.config.hidden_dim;
    let m = att.tasks.len();
    let inv_m = 1.0 / m as f64;
    let scale = 1.0 / (d as f64).sqrt();

    // Every token output receives dz / m from the mean pool.
    let dz_dot_v: Vec<f64> = att.values.iter().map(|v| dot(dz, v) * inv_m).collect();
    let mut dq = vec![vec![0.0; d]; m];
    let mut dk = vec![vec![0.0; d]; m];
    let mut dv = vec![vec![0.0; d]; m];

    for i in 0..m {
        let a = &att.weights[i];
        let mean_da: f64 = a.iter().zip(&dz_dot_v).map(|(w, g)| w * g).sum();
        for j in 0..m {
            axpy(a[j] * inv_m, dz, &mut dv[j]);
            let ds = a[j] * (dz_dot_v[j] - mean_da) * scale;
            if ds != 0.0 {
                axpy(ds, &att.keys[j], &mut dq[i]);
                axpy(ds, &att.queries[i], &mut dk[j]);
            }
        }
    }

    for (idx, &task) in att.tasks.iter().enumerate() {
        let u = params.task_embedding(task).to_vec();
        grads.query.add_outer(1.0, &dq[idx], &u);
        grads.key.add_outer(1.0, &dk[idx], &u);
        grads.value.add_outer(1.0, &dv[idx], &u);
        let du = grads.task_embeddings.row_mut(task);
        params.query.matvec_t_acc(&dq[idx], 1.0, du);
        params.key.matvec_t_acc(&dk[idx], 1.0, du);
        params.value.matvec_t_acc(&dv[idx], 1.0, du);
    }
}

fn dag_backward(
    params: &SurrogateParams,
    arch: &crate::space::Architecture,
    dag: &DagTrace,
    dh_last: Vec<f64>,
    grads: &mut SurrogateParams,
) {
    let p_total = arch.num_nodes();
    let d = params.config.hidden_dim;
    let mut dnodes = vec![vec![0.0; d]; p_total + 1];
    dnodes[p_total] = dh_last;

    for p in (1..=p_total).rev() {
        let h_p = &dag.nodes[p];
        let inv = 1.0 / p as f64;
        let dacc: Vec<f64> = match params.config.activation {
            DagActivation::Tanh => dnodes[p]
                .iter()
                .zip(h_p)
                .map(|(g, h)| g * (1.0 - h * h) * inv)
                .collect(),
            DagActivation::Linear => dnodes[p].iter().map(|g| g * inv).collect(),
        };
        for i in 0..p {
            let slot = params.config.op_slot(arch.op(i, p));
            grads.op_matrices[slot].add_outer(1.0, &dacc, &dag.nodes[i]);
            params.op_matrices[slot].matvec_t_acc(&dacc, 1.0, &mut dnodes[i]);
        }
    }
    axpy(1.0, &dnodes[0], &mut grads.input_node);
}
