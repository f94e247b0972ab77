#![allow(dead_code)]

use lfbc::channel::{make_channel, ChannelModel};
use lfbc::intermittent::IntermittentConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian upper tail by composite Simpson on the density.
pub fn q_oracle(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - q_oracle(-x);
    }
    let upper = x + if x > 5.0 { 60.0 / x } else { 12.0 };
    let steps = 20_000;
    let h = (upper - x) / steps as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(x) + f(upper);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(x + i as f64 * h);
    }
    s * h / 3.0
}

/// The 50 channels shared by the bound criteria.
pub fn random_channels(count: usize, seed: u64) -> Vec<ChannelModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let k = rng.random_range(2..=8);
            let p = 10f64.powf(rng.random_range(-1.0..2.0));
            let vars: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..10.0)).collect();
            make_channel(p, &vars).unwrap()
        })
        .collect()
}

/// Harmonic effective noises computed straight from the sorted variances.
pub fn harmonic(vars: &[f64]) -> Vec<f64> {
    (1..=vars.len())
        .map(|k| 1.0 / vars[..k].iter().map(|s| 1.0 / s).sum::<f64>())
        .collect()
}

pub fn reference_config(power: f64) -> IntermittentConfig {
    IntermittentConfig {
        phases: 2,
        n: 120,
        epsilon: 0.25,
        message_count: 64,
        power_budget: power,
        fb_rate: 64f64.ln() / 120.0,
        gamma: vec![1.0, 1.0],
        codebook_seeds: vec![],
    }
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
