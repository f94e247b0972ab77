//! Memoryless Gaussian broadcast channel: each receiver sees the common
//! input plus its own i.i.d. centered Gaussian noise.
//!
//! Noise is drawn from a ChaCha8 stream (`rand_chacha` 0.9) seeded with
//! `seed_from_u64`, converted with the `rand_distr` 0.5 ziggurat
//! `StandardNormal`, row by row (receiver 1 first). Changing any of these
//! changes every Monte Carlo fixture.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power budget and per-receiver noise variances, sorted so that receiver 1
/// is the noisiest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    power_budget: f64,
    noise_variances: Vec<f64>,
    /// `permutation[k]` is the caller's (1-based) index of stored receiver `k`.
    permutation: Vec<usize>,
}

impl ChannelModel {
    /// Builds a channel, sorting the variances into nonincreasing order.
    pub fn new(power: f64, variances: &[f64]) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::NonPositive {
                what: "power",
                index: 0,
                value: power,
            });
        }
        if variances.is_empty() {
            return Err(Error::Validation("at least one receiver is required".into()));
        }
        for (i, &v) in variances.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositive {
                    what: "noise variance",
                    index: i,
                    value: v,
                });
            }
        }
        let mut order: Vec<usize> = (0..variances.len()).collect();
        // stable: equal variances keep the caller's order
        order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]));
        Ok(ChannelModel {
            power_budget: power,
            noise_variances: order.iter().map(|&i| variances[i]).collect(),
            permutation: order.iter().map(|&i| i + 1).collect(),
        })
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    pub fn noise_variance(&self, k: usize) -> f64 {
        self.noise_variances[k]
    }

    pub fn num_receivers(&self) -> usize {
        self.noise_variances.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Same variances, different power budget.
    pub fn with_power(&self, power: f64) -> Result<Self> {
        let mut ch = ChannelModel::new(power, &self.noise_variances)?;
        ch.permutation = self.permutation.clone();
        Ok(ch)
    }
}

/// Convenience wrapper matching the free-function style used by the CLI.
pub fn make_channel(power: f64, variances: &[f64]) -> Result<ChannelModel> {
    ChannelModel::new(power, variances)
}

/// A K x n block of noise samples, row k holding receiver k's noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlock {
    samples: DMatrix<f64>,
    seed: u64,
}

impl NoiseBlock {
    /// Wraps explicit samples, e.g. forced noise in tests.
    pub fn from_samples(samples: DMatrix<f64>) -> Self {
        NoiseBlock { samples, seed: 0 }
    }

    pub fn zeros(k: usize, n: usize) -> Self {
        Self::from_samples(DMatrix::zeros(k, n))
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_receivers(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.samples[(k, i)]
    }

    /// Row `k` as an owned vector.
    pub fn row(&self, k: usize) -> Vec<f64> {
        self.samples.row(k).iter().copied().collect()
    }
}

/// Draws an i.i.d. noise block; entry (k, i) ~ N(0, sigma_k^2).
pub fn sample_noise(ch: &ChannelModel, n: usize, seed: u64) -> Result<NoiseBlock> {
    if n == 0 {
        return Err(Error::Validation("noise block length must be >= 1".into()));
    }
    let k = ch.num_receivers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = DMatrix::zeros(k, n);
    for r in 0..k {
        let sd = ch.noise_variance(r).sqrt();
        for i in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            samples[(r, i)] = sd * z;
        }
    }
    Ok(NoiseBlock { samples, seed })
}

/// Channel outputs: row k is `x + noise row k`.
pub fn transmit(x: &[f64], noise: &NoiseBlock) -> Result<DMatrix<f64>> {
    if x.len() != noise.len() {
        return Err(Error::Dimension(format!(
            "input has {} symbols, noise block has {}",
            x.len(),
            noise.len()
        )));
    }
    let mut out = noise.samples.clone();
    for mut row in out.row_iter_mut() {
        for (y, xi) in row.iter_mut().zip(x) {
            *y += xi;
        }
    }
    Ok(out)
}

/// Empirical average power (1/n) sum x_i^2.
pub fn average_power(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Validation("cannot take the power of an empty block".into()));
    }
    Ok(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_variances_kept() {
        let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
        assert_eq!(ch.num_receivers(), 2);
        assert_eq!(ch.noise_variances(), &[1.0, 1.0]);
        assert_eq!(ch.permutation(), &[1, 2]);
    }

    #[test]
    fn unsorted_variances_are_sorted() {
        let ch = make_channel(10.0, &[0.5, 2.0]).unwrap();
        assert_eq!(ch.noise_variances(), &[2.0, 0.5]);
        assert_eq!(ch.permutation(), &[2, 1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            make_channel(-1.0, &[1.0]),
            Err(Error::NonPositive { what: "power", .. })
        ));
        match make_channel(1.0, &[1.0, 0.0, 2.0]) {
            Err(Error::NonPositive { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(make_channel(1.0, &[]).is_err());
    }

    #[test]
    fn noise_is_deterministic() {
        let ch = make_channel(1.0, &[2.0, 1.0]).unwrap();
        let a = sample_noise(&ch, 64, 7).unwrap();
        let b = sample_noise(&ch, 64, 7).unwrap();
        let c = sample_noise(&ch, 64, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples(), c.samples());
        assert_eq!((a.num_receivers(), a.len()), (2, 64));
        assert!(sample_noise(&ch, 0, 1).is_err());
    }

    #[test]
    fn transmit_adds() {
        let noise = NoiseBlock::from_samples(DMatrix::from_row_slice(1, 2, &[0.5, -0.5]));
        let y = transmit(&[1.0, 2.0], &noise).unwrap();
        assert_eq!(y.row(0).iter().copied().collect::<Vec<_>>(), vec![1.5, 1.5]);

        let zero = NoiseBlock::zeros(3, 2);
        let y = transmit(&[4.0, -1.0], &zero).unwrap();
        for k in 0..3 {
            assert_eq!(y[(k, 0)], 4.0);
            assert_eq!(y[(k, 1)], -1.0);
        }
        assert!(transmit(&[1.0], &zero).is_err());
    }

    #[test]
    fn power_of_blocks() {
        assert_eq!(average_power(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(average_power(&[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(average_power(&[3.0]).unwrap(), 9.0);
        assert!(average_power(&[]).is_err());
    }
}
