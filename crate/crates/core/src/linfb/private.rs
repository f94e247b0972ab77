//! Private-message scheme built from a common-message linear-feedback scheme.
//!
//! Blocklength n + 2K. Slots are ordered: K initialization slots (labels
//! 1-K, ..., 0) carrying the scaled message points, then regular slots
//! 1..n, with the extra slot ~j_k inserted right after regular slot j_k.
//! Regular slots replay the base scheme's feedback combination with
//! Z_{k,j_k} swapped for Z_{k,~j_k}; extra slot ~j_k resends X_{j_k} plus the
//! initialization noise Z_{k,1-k}, which only receiver k cares about.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{check_strictly_lower, check_unit, LinearFeedbackScheme};
use crate::channel::{sample_noise, ChannelModel, NoiseBlock};
use crate::error::{Error, Result};
use crate::montecarlo::{wilson_interval, RunningMean};
use crate::special::q;

/// Default power back-off delta as a fraction of P.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.05;

// Keeps message draws independent of the noise stream for the same seed.
const MESSAGE_STREAM: u64 = 0x6d65_7373_6167_6573;

/// Uniform lattice of message points `1/2 - m/N`, m = 0..N-1, in (-1/2, 1/2].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MessageLattice {
    count: u64,
}

impl MessageLattice {
    pub fn new(count: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Validation("message set must be nonempty".into()));
        }
        Ok(MessageLattice { count })
    }

    /// `floor(exp(blocklength * rate))` messages.
    pub fn from_rate(rate: f64, blocklength: usize) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::Validation(format!("rate must be finite and >= 0, got {rate}")));
        }
        let raw = (blocklength as f64 * rate).exp();
        if raw >= u64::MAX as f64 {
            return Err(Error::Validation(format!("rate {rate} gives too many messages")));
        }
        // absorb exp/ln round trip error so rate = ln(N)/len yields exactly N
        Self::new((raw * (1.0 + 1e-12)).floor() as u64)
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn point(&self, m: u64) -> f64 {
        0.5 - m as f64 / self.count as f64
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.count as f64
    }

    pub fn mean(&self) -> f64 {
        0.5 / self.count as f64
    }

    /// Exact variance of a uniform draw from the lattice, (N^2 - 1) / (12 N^2).
    pub fn variance(&self) -> f64 {
        let n = self.count as f64;
        (n * n - 1.0) / (12.0 * n * n)
    }

    /// Nearest lattice point; exact ties go to the smaller index.
    pub fn nearest(&self, theta: f64) -> u64 {
        let n = self.count as f64;
        let approx = ((0.5 - theta) * n).round().clamp(0.0, n - 1.0) as u64;
        let lo = approx.saturating_sub(1);
        let hi = (approx + 1).min(self.count - 1);
        let mut best = lo;
        let mut best_dist = (theta - self.point(lo)).abs();
        for m in lo + 1..=hi {
            let dist = (theta - self.point(m)).abs();
            if dist < best_dist {
                best = m;
                best_dist = dist;
            }
        }
        best
    }
}

/// Linear MMSE estimate of a scalar from a vector observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LmmseEstimate {
    pub estimate: f64,
    pub error_variance: f64,
    pub mutual_info: f64,
    /// Set when the observation covariance needed a ridge to factor.
    pub regularized: bool,
}

#[derive(Debug, Clone)]
struct LmmseFilter {
    weights: DVector<f64>,
    error_variance: f64,
    mutual_info: f64,
    regularized: bool,
}

impl LmmseFilter {
    fn new(obs_cov: &DMatrix<f64>, cross_cov: &DVector<f64>, prior_var: f64) -> Result<Self> {
        let n = obs_cov.nrows();
        let mut regularized = false;
        let chol = match obs_cov.clone().cholesky() {
            Some(c) => c,
            None => {
                regularized = true;
                let ridge = 1e-12 * obs_cov.trace().max(f64::MIN_POSITIVE) / n as f64;
                let bumped = obs_cov + DMatrix::identity(n, n) * ridge;
                bumped.cholesky().ok_or_else(|| {
                    Error::Validation("observation covariance is not positive semidefinite".into())
                })?
            }
        };
        let weights = chol.solve(cross_cov);
        let raw = (prior_var - cross_cov.dot(&weights)).max(prior_var * f64::EPSILON);
        let mutual_info = 0.5 * (prior_var / raw).ln();
        Ok(LmmseFilter {
            weights,
            error_variance: prior_var * (-2.0 * mutual_info).exp(),
            mutual_info,
            regularized,
        })
    }

    fn apply(&self, y: &DVector<f64>) -> LmmseEstimate {
        LmmseEstimate {
            estimate: self.weights.dot(y),
            error_variance: self.error_variance,
            mutual_info: self.mutual_info,
            regularized: self.regularized,
        }
    }
}

/// Solves the normal equations `obs_cov * w = cross_cov` and applies `w` to `y`.
pub fn lmmse(
    obs_cov: &DMatrix<f64>,
    cross_cov: &DVector<f64>,
    prior_var: f64,
    y: &DVector<f64>,
) -> Result<LmmseEstimate> {
    let n = obs_cov.nrows();
    if obs_cov.ncols() != n || cross_cov.len() != n || y.len() != n {
        return Err(Error::Dimension("LMMSE operands disagree in size".into()));
    }
    Ok(LmmseFilter::new(obs_cov, cross_cov, prior_var)?.apply(y))
}

/// Position of a transmission slot in the n + 2K schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Slot {
    /// Carries receiver `receiver`'s message point; label `1 - k` (1-based k).
    Init { receiver: usize },
    /// Regular slot `index` (0-based; label `index + 1`).
    Regular { index: usize },
    /// Extra slot following regular slot `j_k` for receiver `receiver`.
    Extra { receiver: usize },
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Init { receiver } => write!(f, "{}", -(*receiver as i64)),
            Slot::Regular { index } => write!(f, "{}", index + 1),
            Slot::Extra { receiver } => write!(f, "~j{}", receiver + 1),
        }
    }
}

/// Expected energy per slot class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBreakdown {
    pub init: f64,
    pub regular: f64,
    pub extra: f64,
    /// `E|X_{j_k}|^2` for each receiver.
    pub replayed: Vec<f64>,
    pub total: f64,
}

/// Fully specified blocklength-(n + 2K) private-message encoder and decoders.
#[derive(Debug, Clone)]
pub struct PrivateScheme {
    channel: ChannelModel,
    base: Vec<DMatrix<f64>>,
    v: Vec<DVector<f64>>,
    j: Vec<usize>,
    rates: Vec<f64>,
    lattices: Vec<MessageLattice>,
    layout: Vec<Slot>,
    init_pos: Vec<usize>,
    regular_pos: Vec<usize>,
    extra_pos: Vec<usize>,
    /// noise_gain[k][(r, c)]: weight of Z_k at slot c in the input at slot r
    noise_gain: Vec<DMatrix<f64>>,
    /// sqrt(P / Var theta_k), zero for a single-message lattice
    point_gain: Vec<f64>,
    filters: Vec<LmmseFilter>,
}

impl PrivateScheme {
    /// Builds the construction from base matrices `A_k`, unit combining
    /// vectors `v_k`, sorted 0-based slot indices `j_k` and rates (nats).
    pub fn new(
        base: &[DMatrix<f64>],
        v: Vec<DVector<f64>>,
        j: Vec<usize>,
        ch: &ChannelModel,
        rates: &[f64],
    ) -> Result<Self> {
        let k_count = ch.num_receivers();
        if base.len() != k_count || v.len() != k_count || j.len() != k_count || rates.len() != k_count {
            return Err(Error::Dimension(format!(
                "need {k_count} matrices, vectors, indices and rates; got {}, {}, {}, {}",
                base.len(),
                v.len(),
                j.len(),
                rates.len()
            )));
        }
        let n = base[0].nrows();
        if n == 0 {
            return Err(Error::Dimension("base blocklength must be >= 1".into()));
        }
        for (k, a) in base.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::Dimension(format!("A[{k}] is not {n}x{n}")));
            }
        }
        check_strictly_lower(base)?;
        for (k, vk) in v.iter().enumerate() {
            if vk.len() != n {
                return Err(Error::Dimension(format!("v[{k}] has length {}, expected {n}", vk.len())));
            }
            check_unit(vk, k)?;
        }
        if let Some(k) = j.iter().position(|&jk| jk >= n) {
            return Err(Error::Dimension(format!("j[{k}] = {} outside 0..{n}", j[k])));
        }
        if j.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Validation(format!("slot indices must be nondecreasing, got {j:?}")));
        }
        let total = n + 2 * k_count;
        let lattices = rates
            .iter()
            .map(|&r| MessageLattice::from_rate(r, total))
            .collect::<Result<Vec<_>>>()?;

        let mut layout = Vec::with_capacity(total);
        for pos in 0..k_count {
            layout.push(Slot::Init { receiver: k_count - 1 - pos });
        }
        for i in 0..n {
            layout.push(Slot::Regular { index: i });
            for (k, &jk) in j.iter().enumerate() {
                if jk == i {
                    layout.push(Slot::Extra { receiver: k });
                }
            }
        }
        let mut init_pos = vec![0; k_count];
        let mut regular_pos = vec![0; n];
        let mut extra_pos = vec![0; k_count];
        for (pos, slot) in layout.iter().enumerate() {
            match *slot {
                Slot::Init { receiver } => init_pos[receiver] = pos,
                Slot::Regular { index } => regular_pos[index] = pos,
                Slot::Extra { receiver } => extra_pos[receiver] = pos,
            }
        }

        let mut noise_gain = vec![DMatrix::zeros(total, total); k_count];
        for i in 0..n {
            let row = regular_pos[i];
            for (k, a) in base.iter().enumerate() {
                for past in 0..i {
                    let coef = a[(i, past)];
                    if coef != 0.0 {
                        let col = if past == j[k] { extra_pos[k] } else { regular_pos[past] };
                        noise_gain[k][(row, col)] += coef;
                    }
                }
            }
        }
        for k in 0..k_count {
            let row = extra_pos[k];
            let src = regular_pos[j[k]];
            for gain in noise_gain.iter_mut() {
                let copied = gain.row(src).clone_owned();
                gain.set_row(row, &copied);
            }
            noise_gain[k][(row, init_pos[k])] += 1.0;
        }

        let p = ch.power_budget();
        let point_gain = lattices
            .iter()
            .map(|l| if l.count() > 1 { (p / l.variance()).sqrt() } else { 0.0 })
            .collect();

        let mut scheme = PrivateScheme {
            channel: ch.clone(),
            base: base.to_vec(),
            v,
            j,
            rates: rates.to_vec(),
            lattices,
            layout,
            init_pos,
            regular_pos,
            extra_pos,
            noise_gain,
            point_gain,
            filters: Vec::new(),
        };
        scheme.filters = (0..k_count)
            .map(|k| {
                let (cov, cross) = scheme.observation_covariance(k);
                LmmseFilter::new(&cov, &cross, ch.noise_variance(k))
            })
            .collect::<Result<_>>()?;
        Ok(scheme)
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn base_blocklength(&self) -> usize {
        self.regular_pos.len()
    }

    pub fn total_blocklength(&self) -> usize {
        self.layout.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.channel.num_receivers()
    }

    pub fn slot_layout(&self) -> &[Slot] {
        &self.layout
    }

    pub fn v(&self) -> &[DVector<f64>] {
        &self.v
    }

    pub fn j(&self) -> &[usize] {
        &self.j
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn lattice(&self, k: usize) -> MessageLattice {
        self.lattices[k]
    }

    pub fn init_position(&self, k: usize) -> usize {
        self.init_pos[k]
    }

    pub fn extra_position(&self, k: usize) -> usize {
        self.extra_pos[k]
    }

    pub fn regular_position(&self, i: usize) -> usize {
        self.regular_pos[i]
    }

    /// Weight of receiver k's noise at each slot in each input.
    pub fn noise_gain(&self, k: usize) -> &DMatrix<f64> {
        &self.noise_gain[k]
    }

    pub fn point_gain(&self, k: usize) -> f64 {
        self.point_gain[k]
    }

    /// Covariance of receiver k's observation vector Y~_k and its
    /// cross-covariance with Z_{k,1-k}:
    /// `sum_{k' != k} s_k'^2 A A^T + s_k^2 (I + A_k)(I + A_k)^T + s_k^2 e e^T`.
    pub fn observation_covariance(&self, k: usize) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.base_blocklength();
        let s2 = self.channel.noise_variances();
        let mut cov = DMatrix::zeros(n, n);
        for (kk, a) in self.base.iter().enumerate() {
            if kk == k {
                let ia = a + DMatrix::identity(n, n);
                cov += &ia * ia.transpose() * s2[k];
            } else {
                cov += a * a.transpose() * s2[kk];
            }
        }
        cov[(self.j[k], self.j[k])] += s2[k];
        let mut cross = DVector::zeros(n);
        cross[self.j[k]] = s2[k];
        (cov, cross)
    }

    /// Inputs for all n + 2K slots, given 0-based messages and a K x (n + 2K)
    /// noise block.
    pub fn encode(&self, messages: &[u64], noise: &NoiseBlock) -> Result<Vec<f64>> {
        let total = self.total_blocklength();
        let k_count = self.num_receivers();
        if messages.len() != k_count {
            return Err(Error::Dimension(format!("{} messages for {k_count} receivers", messages.len())));
        }
        if noise.num_receivers() != k_count || noise.len() != total {
            return Err(Error::Dimension(format!(
                "noise block is {}x{}, scheme needs {k_count}x{total}",
                noise.num_receivers(),
                noise.len()
            )));
        }
        let mut x = DVector::zeros(total);
        for k in 0..k_count {
            let lat = self.lattices[k];
            if messages[k] >= lat.count() {
                return Err(Error::Validation(format!(
                    "message {} outside 0..{} for receiver {k}",
                    messages[k],
                    lat.count()
                )));
            }
            let z = DVector::from_iterator(total, noise.samples().row(k).iter().copied());
            x += &self.noise_gain[k] * z;
            x[self.init_pos[k]] += self.point_gain[k] * (lat.point(messages[k]) - lat.mean());
        }
        Ok(x.iter().copied().collect())
    }

    /// Receiver k's n-length observation vector from its full output row.
    pub fn observation(&self, k: usize, outputs: &[f64]) -> Result<DVector<f64>> {
        if outputs.len() != self.total_blocklength() {
            return Err(Error::Dimension(format!(
                "{} outputs, expected {}",
                outputs.len(),
                self.total_blocklength()
            )));
        }
        let n = self.base_blocklength();
        Ok(DVector::from_fn(n, |i, _| {
            if i == self.j[k] {
                outputs[self.extra_pos[k]]
            } else {
                outputs[self.regular_pos[i]]
            }
        }))
    }

    /// LMMSE estimate of Z_{k,1-k} from the observation vector.
    pub fn lmmse_noise_estimate(&self, k: usize, y_tilde: &DVector<f64>) -> Result<LmmseEstimate> {
        if y_tilde.len() != self.base_blocklength() {
            return Err(Error::Dimension("observation vector has wrong length".into()));
        }
        Ok(self.filters[k].apply(y_tilde))
    }

    /// Analytic `I(Z_{k,1-k}; Y~_k)` in nats.
    pub fn mutual_info(&self, k: usize) -> f64 {
        self.filters[k].mutual_info
    }

    /// Analytic variance of `Z_{k,1-k} - Z^_{k,1-k}`.
    pub fn error_variance(&self, k: usize) -> f64 {
        self.filters[k].error_variance
    }

    pub fn regularized(&self, k: usize) -> bool {
        self.filters[k].regularized
    }

    /// Receiver k's estimate of its message point from its output row.
    pub fn theta_estimate(&self, k: usize, outputs: &[f64]) -> Result<f64> {
        let lat = self.lattices[k];
        if lat.count() == 1 {
            return Ok(lat.point(0));
        }
        let obs = self.observation(k, outputs)?;
        let z_hat = self.filters[k].apply(&obs).estimate;
        let scale = (lat.variance() / self.channel.power_budget()).sqrt();
        Ok(scale * (outputs[self.init_pos[k]] - z_hat) + lat.mean())
    }

    /// Nearest-neighbour decision on the estimated message point.
    pub fn decode(&self, k: usize, outputs: &[f64]) -> Result<u64> {
        let theta = self.theta_estimate(k, outputs)?;
        Ok(self.lattices[k].nearest(theta))
    }

    /// `2 Q(e^I / (2N) * sqrt(P / (Var theta_k sigma_k^2)))`, an upper bound
    /// on receiver k's message error probability.
    pub fn error_bound(&self, k: usize) -> f64 {
        let lat = self.lattices[k];
        if lat.count() == 1 {
            return 0.0;
        }
        let s2 = self.channel.noise_variance(k);
        let arg = self.mutual_info(k).exp() / (2.0 * lat.count() as f64)
            * (self.channel.power_budget() / (lat.variance() * s2)).sqrt();
        (2.0 * q(arg)).min(1.0)
    }

    /// `(sigma_k^2 ||v_k (I + A_k)||^2 + sum_{k' != k} sigma_k'^2 ||v_k A_k'||^2) / sigma_k^2`:
    /// the noise power seen by the projection `v_k . Y~_k`, relative to the
    /// signal power of Z_{k,1-k} in it.
    pub fn projected_noise(&self, k: usize) -> f64 {
        let vk = &self.v[k];
        let s2 = self.channel.noise_variances();
        let mut total = 0.0;
        for (kk, a) in self.base.iter().enumerate() {
            let proj = a.transpose() * vk;
            if kk == k {
                total += s2[k] * (vk + proj).norm_squared();
            } else {
                total += s2[kk] * proj.norm_squared();
            }
        }
        total / s2[k]
    }

    /// Expected energy per slot class, computed from the encoder matrices.
    pub fn expected_power(&self) -> PowerBreakdown {
        let s2 = self.channel.noise_variances();
        let slot_energy = |row: usize| -> f64 {
            self.noise_gain
                .iter()
                .zip(s2)
                .map(|(g, s)| s * g.row(row).norm_squared())
                .sum()
        };
        let mut init = 0.0;
        for k in 0..self.num_receivers() {
            let g = self.point_gain[k];
            init += g * g * self.lattices[k].variance() + slot_energy(self.init_pos[k]);
        }
        let regular: f64 = self.regular_pos.iter().map(|&r| slot_energy(r)).sum();
        let extra: f64 = self.extra_pos.iter().map(|&r| slot_energy(r)).sum();
        let replayed = self.j.iter().map(|&jk| slot_energy(self.regular_pos[jk])).collect();
        PowerBreakdown {
            init,
            regular,
            extra,
            replayed,
            total: init + regular + extra,
        }
    }

    /// `K P + n (P - delta) + sum_k E|X_{j_k}|^2 + sum_k sigma_k^2`.
    pub fn power_bound(&self, delta: f64) -> f64 {
        let p = self.channel.power_budget();
        let k = self.num_receivers() as f64;
        let n = self.base_blocklength() as f64;
        let replayed: f64 = self.expected_power().replayed.iter().sum();
        let noise: f64 = self.channel.noise_variances().iter().sum();
        k * p + n * (p - delta) + replayed + noise
    }

    /// Whether the base matrices respect the backed-off budget n (P - delta).
    pub fn base_fits(&self, delta: f64) -> bool {
        let used: f64 = self
            .base
            .iter()
            .zip(self.channel.noise_variances())
            .map(|(a, s)| s * a.norm_squared())
            .sum();
        used <= self.base_blocklength() as f64 * (self.channel.power_budget() - delta) * (1.0 + 1e-12)
    }

    /// One end-to-end transmission with explicit messages and noise.
    pub fn run_trial(&self, messages: &[u64], noise: &NoiseBlock) -> Result<PrivateTrial> {
        let x = self.encode(messages, noise)?;
        let k_count = self.num_receivers();
        let mut decoded = Vec::with_capacity(k_count);
        let mut noise_error = Vec::with_capacity(k_count);
        let mut observations = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let row: Vec<f64> = x.iter().enumerate().map(|(i, xi)| xi + noise.get(k, i)).collect();
            let obs = self.observation(k, &row)?;
            let z_hat = self.filters[k].apply(&obs).estimate;
            noise_error.push(noise.get(k, self.init_pos[k]) - z_hat);
            decoded.push(self.decode(k, &row)?);
            observations.push(obs.iter().copied().collect());
        }
        let energy = x.iter().map(|v| v * v).sum();
        Ok(PrivateTrial {
            messages: messages.to_vec(),
            decoded,
            noise_error,
            observations,
            energy,
        })
    }

    /// Seeded trial: uniform messages and fresh noise.
    pub fn run_seeded(&self, seed: u64) -> Result<PrivateTrial> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ MESSAGE_STREAM);
        let messages: Vec<u64> = self
            .lattices
            .iter()
            .map(|l| rng.random_range(0..l.count()))
            .collect();
        let noise = sample_noise(&self.channel, self.total_blocklength(), seed)?;
        self.run_trial(&messages, &noise)
    }

    /// Monte Carlo over `trials` seeds starting at `seed_base`.
    pub fn simulate(&self, trials: u64, seed_base: u64) -> Result<PrivateSimReport> {
        let outcomes: Vec<PrivateTrial> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let seed = seed_base.wrapping_add(t);
                self.run_seeded(seed).map_err(|e| Error::Trial {
                    seed,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        let k_count = self.num_receivers();
        let mut receivers = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let errors = outcomes.iter().filter(|o| o.decoded[k] != o.messages[k]).count() as u64;
            let mut mse = RunningMean::default();
            for o in &outcomes {
                mse.push(o.noise_error[k] * o.noise_error[k]);
            }
            let (ci_low, ci_high) = wilson_interval(errors, trials);
            receivers.push(ReceiverReport {
                receiver: k,
                messages: self.lattices[k].count(),
                errors,
                p_hat: errors as f64 / trials as f64,
                ci_low,
                ci_high,
                error_bound: self.error_bound(k),
                mutual_info: self.mutual_info(k),
                analytic_error_variance: self.error_variance(k),
                empirical_mse: mse.mean(),
                mse_stderr: mse.stderr(),
            });
        }
        let mut power = RunningMean::default();
        for o in &outcomes {
            power.push(o.energy / self.total_blocklength() as f64);
        }
        Ok(PrivateSimReport {
            trials,
            seed_base,
            mean_power: power.mean(),
            power_stderr: power.stderr(),
            receivers,
        })
    }
}

/// Transcript of one private-message transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateTrial {
    pub messages: Vec<u64>,
    pub decoded: Vec<u64>,
    /// `Z_{k,1-k} - Z^_{k,1-k}` per receiver.
    pub noise_error: Vec<f64>,
    pub observations: Vec<Vec<f64>>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverReport {
    pub receiver: usize,
    pub messages: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub error_bound: f64,
    pub mutual_info: f64,
    pub analytic_error_variance: f64,
    pub empirical_mse: f64,
    pub mse_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivateSimReport {
    pub trials: u64,
    pub seed_base: u64,
    pub mean_power: f64,
    pub power_stderr: f64,
    pub receivers: Vec<ReceiverReport>,
}

/// Pragmatic choice of combining vectors for a common-message scheme: v_k is
/// the unit-norm LMMSE combiner of receiver k's outputs for the message point
/// and j_k the index of its largest-magnitude entry.
pub fn default_combining_vectors(
    scheme: &LinearFeedbackScheme,
    ch: &ChannelModel,
) -> Result<(Vec<DVector<f64>>, Vec<usize>)> {
    let n = scheme.blocklength();
    let k_count = ch.num_receivers();
    if scheme.num_receivers() != k_count {
        return Err(Error::Dimension("scheme and channel disagree on K".into()));
    }
    let s2 = ch.noise_variances();
    let mut vs = Vec::with_capacity(k_count);
    let mut js = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut cov = DMatrix::zeros(n, n);
        for (kk, a) in scheme.a_mats().iter().enumerate() {
            if kk == k {
                let ia = a + DMatrix::identity(n, n);
                cov += &ia * ia.transpose() * s2[k];
            } else {
                cov += a * a.transpose() * s2[kk];
            }
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Validation(format!("noise covariance of receiver {k} is singular")))?;
        let w = chol.solve(scheme.d());
        let norm = w.norm();
        if !(norm > 0.0) {
            return Err(Error::Validation(
                "message direction d is zero; no combining vector exists".into(),
            ));
        }
        let v = w / norm;
        let j = v
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) })
            .0;
        vs.push(v);
        js.push(j);
    }
    Ok((vs, js))
}
