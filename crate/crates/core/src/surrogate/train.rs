use rand::seq::SliceRandom;
use rand::Rng;

use super::backward::{gradients, sample_loss};
use super::{SurrogateParams, TrainConfig, TrainingSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub steps: usize,
    /// Dataset MAE before the first update.
    pub initial_mae: f64,
    /// Dataset MAE after the last update.
    pub final_mae: f64,
}

/// Mean over samples of the per-sample absolute error.
pub fn dataset_mae(params: &SurrogateParams, dataset: &[TrainingSample]) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    dataset.iter().map(|s| sample_loss(params, s)).sum::<f64>() / dataset.len() as f64
}

struct Adam {
    first: SurrogateParams,
    second: SurrogateParams,
    step: i32,
}

impl Adam {
    fn new(params: &SurrogateParams) -> Self {
        Adam {
            first: SurrogateParams::zeros(&params.config),
            second: SurrogateParams::zeros(&params.config),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut SurrogateParams, grads: &SurrogateParams, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        let blocks = params
            .blocks_mut()
            .into_iter()
            .zip(grads.blocks())
            .zip(self.first.blocks_mut())
            .zip(self.second.blocks_mut());
        for (((p, g), m), v) in blocks {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Shuffled mini-batch Adam, continuing from the incoming parameters.
///
/// Moment estimates start fresh on every call.
pub fn train<R: Rng + ?Sized>(
    params: &mut SurrogateParams,
    dataset: &[TrainingSample],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::config("cannot train the surrogate on an empty dataset"));
    }
    let initial_mae = dataset_mae(params, dataset);
    let mut adam = Adam::new(params);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut batch: Vec<TrainingSample> = Vec::with_capacity(cfg.batch_size);
    let mut steps = 0;

    for epoch in 0..cfg.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset[i].clone()));
            let (loss, grads) = gradients(params, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            adam.update(params, &grads, cfg);
            steps += 1;
        }
        if let Some(block) = params.non_finite_block() {
            return Err(Error::NonFinite(block));
        }
    }

    Ok(TrainReport {
        epochs: cfg.epochs_per_update,
        steps,
        initial_mae,
        final_mae: dataset_mae(params, dataset),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::space::{random_point, SearchSpaceConfig};
    use crate::surrogate::{init_params, SurrogateConfig};

    fn toy_dataset(space: &SearchSpaceConfig, n: usize, seed: u64) -> Vec<TrainingSample> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let p = random_point(&mut rng, space);
                let gains = p
                    .combination
                    .members()
                    .map(|t| 0.05 * (t.index() as f64) - 0.02 * p.combination.len() as f64)
                    .collect();
                TrainingSample::new(p, gains).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_epochs_leaves_params_alone() {
        let space = SearchSpaceConfig::new(4, 2);
        let cfg = SurrogateConfig::for_space(&space, 8);
        let mut params = init_params(&cfg, &mut rng_from_seed(0));
        let before = params.clone();
        let data = toy_dataset(&space, 10, 1);
        let tc = TrainConfig {
            epochs_per_update: 0,
            ..TrainConfig::default()
        };
        train(&mut params, &data, &tc, &mut rng_from_seed(2)).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let space = SearchSpaceConfig::new(4, 2);
        let cfg = SurrogateConfig::for_space(&space, 8);
        let data = toy_dataset(&space, 20, 1);
        let tc = TrainConfig {
            epochs_per_update: 5,
            ..TrainConfig::default()
        };
        let run = || {
            let mut p = init_params(&cfg, &mut rng_from_seed(0));
            train(&mut p, &data, &tc, &mut rng_from_seed(9)).unwrap();
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let space = SearchSpaceConfig::new(2, 1);
        let cfg = SurrogateConfig::for_space(&space, 4);
        let mut p = init_params(&cfg, &mut rng_from_seed(0));
        assert!(train(&mut p, &[], &TrainConfig::default(), &mut rng_from_seed(0)).is_err());
    }
}
