#![allow(dead_code)]

use groupnas::rng::rng_from_seed;
use groupnas::space::{random_point, SearchSpaceConfig};
use groupnas::surrogate::{gradients, SurrogateParams, TrainingSample};
use rand::Rng;

/// Central finite-difference gradient of the batch-mean MAE, one coordinate at a time.
pub fn finite_difference(params: &SurrogateParams, batch: &[TrainingSample], h: f64) -> Vec<Vec<f64>> {
    let mean_loss = |p: &SurrogateParams| -> f64 {
        batch
            .iter()
            .map(|s| {
                let pred = groupnas::surrogate::predict_gains(p, &s.point);
                pred.iter().zip(&s.gains).map(|(a, b)| (a - b).abs()).sum::<f64>() / pred.len() as f64
            })
            .sum::<f64>()
            / batch.len() as f64
    };
    let mut probe = params.clone();
    let sizes: Vec<usize> = params.blocks().iter().map(|b| b.len()).collect();
    let mut out = Vec::new();
    for (b, &len) in sizes.iter().enumerate() {
        let mut grad = vec![0.0; len];
        for i in 0..len {
            let orig = probe.blocks()[b][i];
            probe.blocks_mut()[b][i] = orig + h;
            let up = mean_loss(&probe);
            probe.blocks_mut()[b][i] = orig - h;
            let down = mean_loss(&probe);
            probe.blocks_mut()[b][i] = orig;
            grad[i] = (up - down) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

/// Random samples whose combinations have at most `max_size` tasks.
pub fn random_batch(space: &SearchSpaceConfig, count: usize, max_size: usize, seed: u64) -> Vec<TrainingSample> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let p = random_point(&mut rng, space);
        if p.combination.len() > max_size {
            continue;
        }
        let gains = (0..p.combination.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        out.push(TrainingSample::new(p, gains).unwrap());
    }
    out
}

/// Median of a slice of finite values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)` over
/// every parameter, for the batch-mean MAE of `batch`.
pub fn max_relative_error(params: &SurrogateParams, batch: &[TrainingSample]) -> f64 {
    let (_, analytic) = gradients(params, batch).unwrap();
    let numeric = finite_difference(params, batch, 1e-5);
    let mut worst: f64 = 0.0;
    for (a_block, n_block) in analytic.blocks().iter().zip(&numeric) {
        for (a, n) in a_block.iter().zip(n_block) {
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        }
    }
    worst
}
