//! Error-event tagging, threshold statistics, feedback accounting and
//! empirical calibration of the protocol parameters.

use rayon::prelude::*;
use serde::Serialize;

use super::{IntermittentConfig, Protocol, ProtocolTrace};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::montecarlo::{TrialOutcome, MIN_TRIALS};
use crate::special::q;

/// Events of phase l >= 2 on one trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseEvents {
    pub phase: usize,
    /// Every phase-(l-1) guess correct, yet some receiver's threshold fired.
    pub e1: bool,
    /// Some receiver guessed wrong in phase l-1 and its threshold stayed quiet.
    pub e2: bool,
    /// Some guess was wrong and a receiver that redecoded got it wrong.
    pub e3: bool,
}

impl PhaseEvents {
    pub fn any(&self) -> bool {
        self.e1 || self.e2 || self.e3
    }
}

/// Tags for phases 2..L (empty when L = 1).
pub fn classify_error_events(trace: &ProtocolTrace, message: u64) -> Vec<PhaseEvents> {
    trace
        .phases
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let wrong: Vec<bool> = prev.guesses.iter().map(|&g| g != message).collect();
            let some_wrong = wrong.iter().any(|&b| b);
            let e1 = !some_wrong && cur.fired.iter().any(|&f| f);
            let e2 = wrong.iter().zip(&cur.fired).any(|(&w, &f)| w && !f);
            let e3 = some_wrong
                && cur
                    .fired
                    .iter()
                    .zip(&cur.decoded)
                    .any(|(&f, d)| f && d.is_some_and(|g| g != message));
            PhaseEvents {
                phase: cur.phase,
                e1,
                e2,
                e3,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackBudget {
    /// Nats fed back by each receiver, counted as ln(alphabet size) per guess.
    pub used: Vec<f64>,
    pub limit: f64,
    pub pass: bool,
}

pub fn feedback_budget(trace: &ProtocolTrace, cfg: &IntermittentConfig) -> FeedbackBudget {
    let limit = cfg.n as f64 * cfg.fb_rate;
    let pass = trace.feedback_nats.iter().all(|&u| u <= limit * (1.0 + 1e-12));
    FeedbackBudget {
        used: trace.feedback_nats.clone(),
        limit,
        pass,
    }
}

/// Harness summary of a trace; events are those of the last phase.
pub fn trial_outcome(trace: &ProtocolTrace) -> TrialOutcome {
    let last = classify_error_events(trace, trace.message).pop().unwrap_or_default();
    TrialOutcome {
        error: trace.error(),
        power: trace.energy / trace.blocklength as f64,
        fb_nats: trace.feedback_nats.iter().copied().fold(0.0, f64::max),
        e1: last.e1,
        e2: last.e2,
        e3: last.e3,
    }
}

/// Signal-slot detector counts for one receiver in one phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdStat {
    pub phase: usize,
    pub receiver: usize,
    pub threshold: f64,
    /// Q(T / sigma_k): both the false-alarm and the miss probability.
    pub predicted: f64,
    pub silent: u64,
    pub false_alarms: u64,
    pub signaled: u64,
    pub misses: u64,
}

fn z_score(hits: u64, total: u64, p: f64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let se = (p * (1.0 - p) / n).sqrt();
    (hits as f64 / n - p) / se
}

impl ThresholdStat {
    pub fn false_alarm_rate(&self) -> f64 {
        self.false_alarms as f64 / self.silent.max(1) as f64
    }

    pub fn miss_rate(&self) -> f64 {
        self.misses as f64 / self.signaled.max(1) as f64
    }

    /// Deviation of the false-alarm rate from `predicted`, in standard errors.
    pub fn false_alarm_z(&self) -> f64 {
        z_score(self.false_alarms, self.silent, self.predicted)
    }

    pub fn miss_z(&self) -> f64 {
        z_score(self.misses, self.signaled, self.predicted)
    }
}

/// Pools signal-slot decisions over traces, per phase and receiver.
pub fn threshold_statistics(traces: &[ProtocolTrace], ch: &ChannelModel) -> Vec<ThresholdStat> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    let mut stats = Vec::new();
    for (idx, phase) in first.phases.iter().enumerate().skip(1) {
        let t = phase.threshold.unwrap_or(0.0);
        for k in 0..ch.num_receivers() {
            let mut s = ThresholdStat {
                phase: phase.phase,
                receiver: k,
                threshold: t,
                predicted: q(t / ch.noise_variance(k).sqrt()),
                silent: 0,
                false_alarms: 0,
                signaled: 0,
                misses: 0,
            };
            for tr in traces {
                let ph = &tr.phases[idx];
                if ph.retransmit {
                    s.signaled += 1;
                    s.misses += u64::from(!ph.fired[k]);
                } else {
                    s.silent += 1;
                    s.false_alarms += u64::from(ph.fired[k]);
                }
            }
            stats.push(s);
        }
    }
    stats
}

fn phase_error_rate(protocol: &Protocol, phase: usize, trials: u64, seed: u64) -> Result<f64> {
    let errors: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seed.wrapping_add(t);
            protocol
                .run_seeded(s)
                .map(|tr| u64::from(tr.phase_error(phase)))
                .map_err(|e| Error::Trial {
                    seed: s,
                    source: Box::new(e),
                })
        })
        .sum::<Result<u64>>()?;
    Ok(errors as f64 / trials as f64)
}

/// Empirical gammas: gamma_l is the measured probability that some receiver's
/// guess is wrong after phase l, with the thresholds of phases <= l set from
/// the gammas already measured. A phase with no observed error is floored at
/// 0.5 / trials.
pub fn calibrate_gammas(cfg: &IntermittentConfig, ch: &ChannelModel, trials: u64, seed: u64) -> Result<Vec<f64>> {
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!("need at least {MIN_TRIALS} calibration trials")));
    }
    let mut work = cfg.clone();
    work.gamma = vec![1.0; cfg.phases];
    for l in 1..=cfg.phases {
        let protocol = Protocol::build(&work, ch)?;
        let rate = phase_error_rate(&protocol, l, trials, seed)?;
        work.gamma[l - 1] = rate.max(0.5 / trials as f64);
    }
    Ok(work.gamma)
}

/// Power at which the single-phase baseline of `cfg` has error rate `target`,
/// found by bisection in log P with common random numbers across steps.
pub fn calibrate_power(
    cfg: &IntermittentConfig,
    ch: &ChannelModel,
    target: f64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config(format!("target error rate must lie in (0, 1), got {target}")));
    }
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!("need at least {MIN_TRIALS} calibration trials")));
    }
    let rate_at = |log_p: f64| -> Result<f64> {
        let mut base = cfg.baseline();
        base.power_budget = log_p.exp();
        phase_error_rate(&Protocol::build(&base, ch)?, 1, trials, seed)
    };
    let (mut lo, mut hi) = (1e-4f64.ln(), 1e4f64.ln());
    if rate_at(lo)? < target || rate_at(hi)? > target {
        return Err(Error::Config(format!("target error rate {target} not reachable for P in [1e-4, 1e4]")));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_channel, NoiseBlock};
    use crate::intermittent::Protocol;

    fn cfg(phases: usize, m: u64) -> IntermittentConfig {
        IntermittentConfig {
            phases,
            n: 60,
            epsilon: 0.3,
            message_count: m,
            power_budget: 1.0,
            fb_rate: (phases - 1) as f64 * (m as f64).ln() / 60.0,
            gamma: (1..=phases).map(|l| 0.1f64.powi(l as i32)).collect(),
            codebook_seeds: vec![],
        }
    }

    #[test]
    fn noiseless_trace_is_clean() {
        let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
        let p = Protocol::new(&cfg(3, 16), &ch).unwrap();
        let tr = p.run_with_noise(5, &NoiseBlock::zeros(2, 60)).unwrap();
        assert!(classify_error_events(&tr, 5).iter().all(|e| !e.any()));
        let fb = feedback_budget(&tr, p.config());
        assert!(fb.pass);
        for u in fb.used {
            assert!((u - 2.0 * 16f64.ln()).abs() < 1e-12);
        }
        let out = trial_outcome(&tr);
        assert!(!out.error);
        assert!((out.power - 42.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn single_phase_uses_no_feedback() {
        let ch = make_channel(1.0, &[1.0]).unwrap();
        let p = Protocol::new(&cfg(1, 8), &ch).unwrap();
        let tr = p.run(3, 11).unwrap();
        assert_eq!(feedback_budget(&tr, p.config()).used, vec![0.0]);
        assert!(classify_error_events(&tr, 3).is_empty());
    }

    #[test]
    fn forced_false_alarm_is_e1_only() {
        let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
        let p = Protocol::new(&cfg(2, 16), &ch).unwrap();
        let mut noise = NoiseBlock::zeros(2, 60);
        noise.samples_mut()[(1, p.schedule()[0])] = 10.0 * p.threshold(2);
        let tr = p.run_with_noise(4, &noise).unwrap();
        let ev = classify_error_events(&tr, 4);
        assert_eq!(ev, vec![PhaseEvents { phase: 2, e1: true, e2: false, e3: false }]);
        assert!(tr.phases[1].fired[1] && !tr.phases[1].fired[0]);
        assert!(tr.phases[1].transmitted.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gamma_calibration_floors_zero_rates() {
        let ch = make_channel(1.0, &[0.01]).unwrap();
        let g = calibrate_gammas(&cfg(2, 4), &ch, 200, 1).unwrap();
        assert_eq!(g, vec![0.0025, 0.0025]);
    }
}
