//! Multi-phase retransmission protocol with intermittent feedback.
//!
//! Phase 1 sends a random Gaussian codeword over n_1 = (1 - eps) n slots and
//! every receiver feeds back its guess. Each later phase starts with an
//! error-signal slot; if some guess was wrong the transmitter sends
//! sqrt(P / gamma_{l-1}) there and retransmits with a stronger codebook,
//! otherwise it stays silent. Receivers redecode only when the signal slot
//! crosses half the signal amplitude.

mod analysis;
mod analytic;

pub use analysis::{
    calibrate_gammas, calibrate_power, classify_error_events, feedback_budget, threshold_statistics,
    trial_outcome, FeedbackBudget, PhaseEvents, ThresholdStat,
};
pub use analytic::{
    decay_order_diagnostic, decay_order_diagnostic_deep, gamma_recursion, gamma_recursion_log, shannon_exponent, shannon_rate_limit,
    AnalyticModel, DecayPoint, DecayReport, DeepDecayPoint,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_noise, ChannelModel, NoiseBlock};
use crate::error::{Error, Result};

/// Base for codebook seeds when the config does not list them.
pub const DEFAULT_CODEBOOK_SEED: u64 = 0x0c0d_eb00_c000_0001;

// Separates the message draw from the noise stream of the same trial seed.
const MESSAGE_STREAM: u64 = 0x6d73_675f_6472_6177;

// Largest codebook (entries) the simulator will allocate.
const MAX_CODEBOOK_ENTRIES: u64 = 1 << 27;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntermittentConfig {
    #[serde(rename = "L")]
    pub phases: usize,
    pub n: usize,
    pub epsilon: f64,
    pub message_count: u64,
    pub power_budget: f64,
    pub fb_rate: f64,
    /// gamma_1..gamma_L; only the first L - 1 set signal amplitudes.
    pub gamma: Vec<f64>,
    /// One seed per phase codebook; derived from `DEFAULT_CODEBOOK_SEED` when empty.
    #[serde(default, alias = "seeds")]
    pub codebook_seeds: Vec<u64>,
}

impl IntermittentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: IntermittentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Smallest feedback rate that carries L - 1 guesses of log M nats.
    pub fn min_fb_rate(&self) -> f64 {
        (self.phases.saturating_sub(1)) as f64 * (self.message_count as f64).ln() / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        self.validate_gamma()
    }

    fn validate_shape(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.phases < 1 {
            return bad("L must be >= 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.message_count < 2 {
            return bad(format!("message_count must be >= 2, got {}", self.message_count));
        }
        if !(self.power_budget > 0.0) || !self.power_budget.is_finite() {
            return bad(format!("power_budget must be finite and > 0, got {}", self.power_budget));
        }
        if !(self.fb_rate >= 0.0) || !self.fb_rate.is_finite() {
            return bad(format!("fb_rate must be finite and >= 0, got {}", self.fb_rate));
        }
        if self.fb_rate < self.min_fb_rate() * (1.0 - 1e-12) {
            return bad(format!(
                "fb_rate {} is below (L-1) ln(M) / n = {}",
                self.fb_rate,
                self.min_fb_rate()
            ));
        }
        if self.gamma.len() != self.phases {
            return bad(format!("gamma needs {} entries, got {}", self.phases, self.gamma.len()));
        }
        if !self.codebook_seeds.is_empty() && self.codebook_seeds.len() != self.phases {
            return bad(format!(
                "codebook_seeds needs {} entries (or none), got {}",
                self.phases,
                self.codebook_seeds.len()
            ));
        }
        phase_schedule(self.n, self.epsilon, self.phases)?;
        Ok(())
    }

    fn validate_gamma(&self) -> Result<()> {
        if let Some(g) = self.gamma.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(Error::Config(format!("gamma values must lie in (0, 1], got {g}")));
        }
        let used = &self.gamma[..self.phases - 1];
        if used.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "gamma_1..gamma_(L-1) must be strictly decreasing, got {used:?}"
            )));
        }
        Ok(())
    }

    pub fn codebook_seed(&self, phase: usize) -> u64 {
        match self.codebook_seeds.get(phase - 1) {
            Some(&s) => s,
            None => DEFAULT_CODEBOOK_SEED.wrapping_add(phase as u64),
        }
    }

    /// Single-phase configuration at the same blocklength, size and power.
    pub fn baseline(&self) -> IntermittentConfig {
        IntermittentConfig {
            phases: 1,
            gamma: vec![1.0],
            codebook_seeds: self.codebook_seeds.first().map(|&s| vec![s]).unwrap_or_default(),
            ..self.clone()
        }
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Phase end points n_1..n_L, with n_1 = (1 - eps) n and the remaining eps n
/// split evenly; each value is rounded to nearest (ties up) and n_L = n.
pub fn phase_schedule(n: usize, epsilon: f64, phases: usize) -> Result<Vec<usize>> {
    if phases < 1 {
        return Err(Error::Config("L must be >= 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if phases == 1 {
        if n < 2 {
            return Err(Error::Config(format!("blocklength {n} is shorter than 2 symbols")));
        }
        return Ok(vec![n]);
    }
    let nf = n as f64;
    let n1 = (1.0 - epsilon) * nf;
    let step = epsilon * nf / (phases - 1) as f64;
    let mut bounds: Vec<usize> = (0..phases).map(|l| round_half_up(n1 + step * l as f64)).collect();
    bounds[phases - 1] = n;
    let mut prev = 0;
    for (l, &b) in bounds.iter().enumerate() {
        if b < prev + 2 {
            return Err(Error::Config(format!(
                "phase {} has {} symbols; every phase needs at least 2 (n={n}, epsilon={epsilon}, L={phases})",
                l + 1,
                b.saturating_sub(prev)
            )));
        }
        prev = b;
    }
    Ok(bounds)
}

/// Length of the retransmission codebooks: floor(eps n / (L - 1)) - 1.
pub fn retransmission_length(n: usize, epsilon: f64, phases: usize) -> usize {
    if phases < 2 {
        return 0;
    }
    ((epsilon * n as f64 / (phases - 1) as f64 + 1e-9).floor() as usize).saturating_sub(1)
}

/// Random Gaussian codebook, each codeword scaled to average power exactly `power`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    codewords: Vec<f64>,
    count: usize,
    len: usize,
    power: f64,
    seed: u64,
}

impl Codebook {
    /// Codebook from explicit codewords; `power` is their mean average power.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        if rows.len() < 2 || len == 0 || rows.iter().any(|r| r.len() != len) {
            return Err(Error::Dimension("need >= 2 codewords of one nonzero length".into()));
        }
        let codewords: Vec<f64> = rows.concat();
        let power = codewords.iter().map(|v| v * v).sum::<f64>() / codewords.len() as f64;
        Ok(Codebook {
            codewords,
            count: rows.len(),
            len,
            power,
            seed: 0,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn codeword(&self, m: usize) -> &[f64] {
        &self.codewords[m * self.len..(m + 1) * self.len]
    }
}

pub fn build_codebook(count: u64, len: usize, power: f64, seed: u64) -> Result<Codebook> {
    if count < 2 {
        return Err(Error::Config(format!("codebook needs >= 2 codewords, got {count}")));
    }
    if len < 1 {
        return Err(Error::Config("codeword length must be >= 1".into()));
    }
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::Config(format!("codebook power must be finite and > 0, got {power}")));
    }
    if count.saturating_mul(len as u64) > MAX_CODEBOOK_ENTRIES {
        return Err(Error::Config(format!("codebook {count}x{len} is too large to simulate")));
    }
    let count = count as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut codewords = Vec::with_capacity(count * len);
    for _ in 0..count {
        let start = codewords.len();
        codewords.extend((0..len).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let row = &mut codewords[start..];
        let energy: f64 = row.iter().map(|v| v * v).sum();
        let scale = (power * len as f64 / energy).sqrt();
        row.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(Codebook {
        codewords,
        count,
        len,
        power,
        seed,
    })
}

/// Minimum-distance decoding; ties go to the smaller index.
pub fn nearest_codeword(cb: &Codebook, y: &[f64]) -> Result<usize> {
    if y.len() != cb.len {
        return Err(Error::Dimension(format!("received {} symbols, codewords have {}", y.len(), cb.len)));
    }
    Ok(nearest_unchecked(cb, y))
}

fn nearest_unchecked(cb: &Codebook, y: &[f64]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for m in 0..cb.count {
        let dist: f64 = cb.codeword(m).iter().zip(y).map(|(c, v)| (v - c) * (v - c)).sum();
        if dist < best_dist {
            best = m;
            best_dist = dist;
        }
    }
    best
}

/// Uniform message index derived from a trial seed.
pub fn message_for_seed(seed: u64, count: u64) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ MESSAGE_STREAM).random_range(0..count)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTrace {
    /// 1-based phase number.
    pub phase: usize,
    /// First slot of the phase (0-based) and one past its last slot.
    pub start: usize,
    pub end: usize,
    pub transmitted: Vec<f64>,
    /// outputs[k] = receiver k's outputs over the phase.
    pub outputs: Vec<Vec<f64>>,
    /// Some fed-back phase-(l-1) guess was wrong, so the error signal was sent.
    pub retransmit: bool,
    pub signal_amplitude: f64,
    /// T_{l-1}; absent in phase 1.
    pub threshold: Option<f64>,
    /// Per receiver: signal slot output >= threshold.
    pub fired: Vec<bool>,
    /// Guess from decoding this phase's codeword, for receivers that decoded.
    pub decoded: Vec<Option<u64>>,
    /// Temporary guesses after this phase.
    pub guesses: Vec<u64>,
    /// V_{k, n_l}: the guess fed back at the phase end (none after phase L).
    pub feedback: Vec<Option<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolTrace {
    pub message: u64,
    pub phases: Vec<PhaseTrace>,
    pub energy: f64,
    pub blocklength: usize,
    /// Feedback entropy spent per receiver, in nats.
    pub feedback_nats: Vec<f64>,
    pub final_guesses: Vec<u64>,
}

impl ProtocolTrace {
    pub fn error(&self) -> bool {
        self.final_guesses.iter().any(|&g| g != self.message)
    }

    pub fn phase_error(&self, phase: usize) -> bool {
        self.phases[phase - 1].guesses.iter().any(|&g| g != self.message)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Validated configuration with its codebooks prebuilt.
#[derive(Debug, Clone)]
pub struct Protocol {
    cfg: IntermittentConfig,
    channel: ChannelModel,
    schedule: Vec<usize>,
    codebooks: Vec<Codebook>,
}

impl Protocol {
    pub fn new(cfg: &IntermittentConfig, ch: &ChannelModel) -> Result<Self> {
        cfg.validate_gamma()?;
        Self::build(cfg, ch)
    }

    // Skips the gamma ordering check; calibration runs with partial gammas.
    fn build(cfg: &IntermittentConfig, ch: &ChannelModel) -> Result<Self> {
        cfg.validate_shape()?;
        if let Some(g) = cfg.gamma.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(Error::Config(format!("gamma values must lie in (0, 1], got {g}")));
        }
        let channel = ch.with_power(cfg.power_budget)?;
        let schedule = phase_schedule(cfg.n, cfg.epsilon, cfg.phases)?;
        let p = cfg.power_budget;
        let mut codebooks = vec![build_codebook(cfg.message_count, schedule[0], p, cfg.codebook_seed(1))?];
        let retx = retransmission_length(cfg.n, cfg.epsilon, cfg.phases);
        for l in 2..=cfg.phases {
            let room = schedule[l - 1] - schedule[l - 2] - 1;
            let len = retx.min(room);
            let power = p / cfg.gamma[l - 2];
            codebooks.push(build_codebook(cfg.message_count, len, power, cfg.codebook_seed(l))?);
        }
        Ok(Protocol {
            cfg: cfg.clone(),
            channel,
            schedule,
            codebooks,
        })
    }

    pub fn config(&self) -> &IntermittentConfig {
        &self.cfg
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    /// Codebook of a 1-based phase.
    pub fn codebook(&self, phase: usize) -> &Codebook {
        &self.codebooks[phase - 1]
    }

    pub fn signal_amplitude(&self, phase: usize) -> f64 {
        (self.cfg.power_budget / self.cfg.gamma[phase - 2]).sqrt()
    }

    pub fn threshold(&self, phase: usize) -> f64 {
        0.5 * self.signal_amplitude(phase)
    }

    /// Trial with the message and noise both derived from `seed`.
    pub fn run_seeded(&self, seed: u64) -> Result<ProtocolTrace> {
        let message = message_for_seed(seed, self.cfg.message_count);
        self.run(message, seed)
    }

    pub fn run(&self, message: u64, seed: u64) -> Result<ProtocolTrace> {
        let noise = sample_noise(&self.channel, self.cfg.n, seed)?;
        self.run_with_noise(message, &noise)
    }

    pub fn run_with_noise(&self, message: u64, noise: &NoiseBlock) -> Result<ProtocolTrace> {
        let k_count = self.channel.num_receivers();
        if message >= self.cfg.message_count {
            return Err(Error::Validation(format!(
                "message {message} outside 0..{}",
                self.cfg.message_count
            )));
        }
        if noise.num_receivers() != k_count || noise.len() != self.cfg.n {
            return Err(Error::Dimension(format!(
                "noise block is {}x{}, protocol needs {k_count}x{}",
                noise.num_receivers(),
                noise.len(),
                self.cfg.n
            )));
        }
        let m = message as usize;
        let log_m = (self.cfg.message_count as f64).ln();
        let last = self.cfg.phases;
        let mut phases = Vec::with_capacity(last);
        let mut guesses = vec![0u64; k_count];
        let mut energy = 0.0;
        let mut feedback_nats = vec![0.0; k_count];

        for l in 1..=last {
            let start = if l == 1 { 0 } else { self.schedule[l - 2] };
            let end = self.schedule[l - 1];
            let cb = &self.codebooks[l - 1];
            let mut x = vec![0.0; end - start];
            let (retransmit, amplitude, threshold, code_at) = if l == 1 {
                x[..cb.len()].copy_from_slice(cb.codeword(m));
                (true, 0.0, None, 0)
            } else {
                let wrong = guesses.iter().any(|&g| g != message);
                let amp = self.signal_amplitude(l);
                if wrong {
                    x[0] = amp;
                    x[1..1 + cb.len()].copy_from_slice(cb.codeword(m));
                }
                (wrong, if wrong { amp } else { 0.0 }, Some(0.5 * amp), 1)
            };
            energy += x.iter().map(|v| v * v).sum::<f64>();

            let mut outputs = Vec::with_capacity(k_count);
            let mut fired = Vec::with_capacity(k_count);
            let mut decoded = Vec::with_capacity(k_count);
            for k in 0..k_count {
                let y: Vec<f64> = x.iter().enumerate().map(|(i, xi)| xi + noise.get(k, start + i)).collect();
                let redecode = match threshold {
                    None => true,
                    Some(t) => y[0] >= t,
                };
                if threshold.is_some() {
                    fired.push(redecode);
                }
                if redecode {
                    let g = nearest_unchecked(cb, &y[code_at..code_at + cb.len()]) as u64;
                    guesses[k] = g;
                    decoded.push(Some(g));
                } else {
                    decoded.push(None);
                }
                outputs.push(y);
            }
            let feedback = if l < last {
                feedback_nats.iter_mut().for_each(|f| *f += log_m);
                guesses.iter().map(|&g| Some(g)).collect()
            } else {
                vec![None; k_count]
            };
            phases.push(PhaseTrace {
                phase: l,
                start,
                end,
                transmitted: x,
                outputs,
                retransmit,
                signal_amplitude: amplitude,
                threshold,
                fired,
                decoded,
                guesses: guesses.clone(),
                feedback,
            });
        }
        Ok(ProtocolTrace {
            message,
            phases,
            energy,
            blocklength: self.cfg.n,
            feedback_nats,
            final_guesses: guesses,
        })
    }
}

/// One protocol run from scratch; prefer `Protocol` when running many trials.
pub fn run_protocol(cfg: &IntermittentConfig, message: u64, ch: &ChannelModel, seed: u64) -> Result<ProtocolTrace> {
    Protocol::new(cfg, ch)?.run(message, seed)
}
