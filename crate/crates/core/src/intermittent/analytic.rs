//! Analytic gamma model: the random-coding exponent, the gamma recursion in
//! linear and log form, and the iterated-log decay diagnostic.

use serde::Serialize;

use super::{phase_schedule, retransmission_length};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::special::{log_add_exp, log_q, q};

/// `snr/4 * (1 - sqrt(1 - e^{-2 rate}))`, rate in nats.
pub fn shannon_exponent(rate: f64, snr: f64) -> f64 {
    let one_minus = -(-2.0 * rate).exp_m1();
    0.25 * snr * (1.0 - one_minus.sqrt())
}

/// Largest rate for which the exponent bound holds,
/// `1/2 ln((2 + sqrt(snr^2 + 4)) / 4)`.
pub fn shannon_rate_limit(snr: f64) -> f64 {
    log_rate_limit(snr.ln())
}

fn log_rate_limit(log_snr: f64) -> f64 {
    if log_snr > 300.0 {
        return 0.5 * (log_snr - 4f64.ln());
    }
    let snr = log_snr.exp();
    0.5 * ((2.0 + (snr * snr + 4.0).sqrt()) / 4.0).ln()
}

// ln(K exp(-n E(rate, snr))) capped at 0, with snr given by its log. Rates
// outside the exponent's region fall back to the trivial bound rho = 1.
fn log_rho(k: usize, n_tilde: f64, rate: f64, log_snr: f64) -> f64 {
    if !(n_tilde > 0.0) || rate >= log_rate_limit(log_snr) {
        return 0.0;
    }
    let c = 1.0 - (-(-2.0 * rate).exp_m1()).sqrt();
    let log_exponent = n_tilde.ln() + log_snr + (0.25 * c).ln();
    ((k as f64).ln() - log_exponent.exp()).min(0.0)
}

fn check_channel_rho(len: usize, ch: &ChannelModel, p: f64) -> Result<()> {
    if len == 0 {
        return Err(Error::Validation("rho must have at least one entry".into()));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Validation(format!("power must be finite and > 0, got {p}")));
    }
    if ch.num_receivers() == 0 {
        return Err(Error::Validation("channel has no receivers".into()));
    }
    Ok(())
}

// ln(2 sum_k Q(sqrt(P/gamma) / (2 sigma_k))) given ln gamma.
fn log_signal_term(log_gamma: f64, ch: &ChannelModel, p: f64) -> f64 {
    ch.noise_variances().iter().fold(f64::NEG_INFINITY, |acc, &s2| {
        let log_arg = 0.5 * (p.ln() - log_gamma) - 2f64.ln() - 0.5 * s2.ln();
        log_add_exp(acc, 2f64.ln() + log_q(log_arg.exp()))
    })
}

/// gamma_1 = rho_1, gamma_l = rho_l + 2 sum_k Q(sqrt(P/gamma_{l-1}) / (2 sigma_k)).
/// A zero gamma_{l-1} leaves gamma_l = rho_l. Entries are not capped at 1.
pub fn gamma_recursion(rho: &[f64], ch: &ChannelModel, p: f64) -> Result<Vec<f64>> {
    check_channel_rho(rho.len(), ch, p)?;
    if let Some(r) = rho.iter().find(|r| !(**r >= 0.0 && **r <= 1.0)) {
        return Err(Error::Validation(format!("rho values must lie in [0, 1], got {r}")));
    }
    let mut out = Vec::with_capacity(rho.len());
    out.push(rho[0]);
    for &r in &rho[1..] {
        let prev = *out.last().unwrap_or(&0.0);
        let next = if prev == 0.0 {
            r
        } else {
            let amp = (p / prev).sqrt();
            r + 2.0 * ch.noise_variances().iter().map(|s2| q(amp / (2.0 * s2.sqrt()))).sum::<f64>()
        };
        out.push(next);
    }
    Ok(out)
}

/// Log-domain `gamma_recursion`; takes and returns ln rho / ln gamma so the
/// doubly-exponential tails stay representable.
pub fn gamma_recursion_log(log_rho: &[f64], ch: &ChannelModel, p: f64) -> Result<Vec<f64>> {
    check_channel_rho(log_rho.len(), ch, p)?;
    if let Some(r) = log_rho.iter().find(|r| r.is_nan() || **r > 0.0) {
        return Err(Error::Validation(format!("ln rho must lie in [-inf, 0], got {r}")));
    }
    let mut out = Vec::with_capacity(log_rho.len());
    out.push(log_rho[0]);
    for &lr in &log_rho[1..] {
        let prev = *out.last().unwrap_or(&f64::NEG_INFINITY);
        let next = if prev == f64::NEG_INFINITY {
            lr
        } else {
            log_add_exp(lr, log_signal_term(prev, ch, p))
        };
        out.push(next);
    }
    Ok(out)
}

/// Analytic gammas of the L-phase protocol at rate R (nats) and blocklength n,
/// using the random-coding exponent against the weakest receiver for every
/// rho_l (no slack term).
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    pub channel: ChannelModel,
    pub rate: f64,
    pub epsilon: f64,
    pub phases: usize,
}

impl AnalyticModel {
    pub fn new(channel: ChannelModel, rate: f64, epsilon: f64, phases: usize) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Config(format!("rate must be finite and > 0, got {rate}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) || phases < 1 {
            return Err(Error::Config("need epsilon in (0, 1) and L >= 1".into()));
        }
        Ok(AnalyticModel {
            channel,
            rate,
            epsilon,
            phases,
        })
    }

    /// ln rho_1 at blocklength n: phase 1 runs at rate nR/n_1 over n_1 symbols.
    pub fn log_rho1(&self, n: usize) -> Result<f64> {
        let n1 = phase_schedule(n, self.epsilon, self.phases)?[0] as f64;
        let log_snr = (self.channel.power_budget() / self.channel.noise_variance(0)).ln();
        Ok(log_rho(self.channel.num_receivers(), n1, self.rate * n as f64 / n1, log_snr))
    }

    /// ln gamma_1..ln gamma_L at blocklength n; `log_rho1` overrides the
    /// phase-1 error exponent when given.
    pub fn log_gammas(&self, n: usize, log_rho1: Option<f64>) -> Result<Vec<f64>> {
        let lr1 = match log_rho1 {
            Some(v) => v,
            None => self.log_rho1(n)?,
        };
        let mut out = vec![lr1];
        if self.phases == 1 {
            return Ok(out);
        }
        phase_schedule(n, self.epsilon, self.phases)?;
        let l1 = (self.phases - 1) as f64;
        let n_tilde = self.epsilon * n as f64 / l1 - 1.0;
        let rate_tilde = self.rate * l1 / (self.epsilon - l1 / n as f64);
        let p = self.channel.power_budget();
        let log_s1 = self.channel.noise_variance(0).ln();
        for _ in 2..=self.phases {
            let prev = *out.last().unwrap_or(&0.0);
            let lr = log_rho(self.channel.num_receivers(), n_tilde, rate_tilde, p.ln() - prev - log_s1);
            let step = gamma_recursion_log(&[prev, lr], &self.channel, p)?;
            out.push(step[1]);
        }
        Ok(out)
    }

    /// ln(-ln gamma_l) for l = 1..L. Where ln gamma_l itself underflows, the
    /// value comes from the dominant term of the recursion: the rho_l
    /// exponent or the weakest receiver's Q tail, whichever is larger. An
    /// entry is +inf once even this level overflows.
    pub fn log_neg_log_gammas(&self, n: usize, log_rho1: Option<f64>) -> Result<Vec<f64>> {
        let lg = self.log_gammas(n, log_rho1)?;
        let l1 = (self.phases.max(2) - 1) as f64;
        let n_tilde = self.epsilon * n as f64 / l1 - 1.0;
        let rate_tilde = self.rate * l1 / (self.epsilon - l1 / n as f64);
        let log_p = self.channel.power_budget().ln();
        let log_s1 = self.channel.noise_variance(0).ln();
        let mut out: Vec<f64> = Vec::with_capacity(lg.len());
        for (l, &g) in lg.iter().enumerate() {
            if g < 0.0 && g.is_finite() {
                out.push((-g).ln());
                continue;
            }
            if g >= 0.0 || l == 0 {
                out.push(f64::NEG_INFINITY);
                continue;
            }
            let neg_prev = out[l - 1].exp();
            if !neg_prev.is_finite() {
                out.push(f64::INFINITY);
                continue;
            }
            // -ln 2Q(x) ~ x^2 / 2 with x = sqrt(P / gamma) / (2 sigma_1)
            let log_snr = log_p + neg_prev - log_s1;
            let signal = log_snr - 8f64.ln();
            let c = 1.0 - (-(-2.0 * rate_tilde).exp_m1()).sqrt();
            let coding = if n_tilde > 0.0 && rate_tilde < log_rate_limit(log_snr) {
                n_tilde.ln() + log_snr + (0.25 * c).ln()
            } else {
                f64::NEG_INFINITY
            };
            out.push(signal.min(coding));
        }
        Ok(out)
    }

    /// Integer retransmission codebook length at n.
    pub fn retransmission_length(&self, n: usize) -> usize {
        retransmission_length(n, self.epsilon, self.phases)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub n: f64,
    /// ln gamma_L(n).
    pub log_gamma: f64,
}

/// A point carrying ln(-ln gamma_L(n)), for gammas too small for `DecayPoint`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeepDecayPoint {
    pub n: f64,
    pub log_neg_log_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub phases: usize,
    /// (n, log^(L-1)(-ln gamma)) for each usable point.
    pub transformed: Vec<(f64, f64)>,
    pub usable: Vec<bool>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// R^2 of the same values regressed on ln n.
    pub log_n_r_squared: f64,
    /// Growth looks logarithmic rather than linear in n, i.e. the decay is of
    /// lower order than L.
    pub sub_order: bool,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Applies ln L-1 times to -ln gamma and fits a line against n. Points whose
/// gamma is not in (0, 1) or whose intermediate logs leave (0, inf) are
/// marked unusable.
pub fn decay_order_diagnostic(points: &[DecayPoint], phases: usize) -> Result<DecayReport> {
    check_diagnostic(points.len(), phases)?;
    let seeds: Vec<(f64, Option<f64>)> = points
        .iter()
        .map(|pt| (pt.n, (pt.log_gamma < 0.0 && pt.log_gamma.is_finite()).then(|| -pt.log_gamma)))
        .collect();
    diagnose(&seeds, phases - 1, phases)
}

/// Same diagnostic for points given as ln(-ln gamma_L), the form returned by
/// [`AnalyticModel::log_neg_log_gammas`]; ln is applied L-2 more times.
pub fn decay_order_diagnostic_deep(points: &[DeepDecayPoint], phases: usize) -> Result<DecayReport> {
    check_diagnostic(points.len(), phases)?;
    if phases < 2 {
        return Err(Error::Validation("ln(-ln gamma) points need L >= 2".into()));
    }
    let seeds: Vec<(f64, Option<f64>)> = points
        .iter()
        .map(|pt| (pt.n, pt.log_neg_log_gamma.is_finite().then_some(pt.log_neg_log_gamma)))
        .collect();
    diagnose(&seeds, phases - 2, phases)
}

fn check_diagnostic(len: usize, phases: usize) -> Result<()> {
    if len < 4 {
        return Err(Error::Validation(format!("need at least 4 points, got {len}")));
    }
    if phases < 1 {
        return Err(Error::Validation("L must be >= 1".into()));
    }
    Ok(())
}

fn diagnose(seeds: &[(f64, Option<f64>)], logs: usize, phases: usize) -> Result<DecayReport> {
    let mut usable = Vec::with_capacity(seeds.len());
    let mut transformed = Vec::new();
    for &(n, seed) in seeds {
        let mut v = seed.unwrap_or(f64::NAN);
        let mut ok = seed.is_some();
        for _ in 0..logs {
            if !(ok && v > 0.0) {
                ok = false;
                break;
            }
            v = v.ln();
        }
        ok = ok && v.is_finite();
        usable.push(ok);
        if ok {
            transformed.push((n, v));
        }
    }
    if transformed.len() < 2 {
        return Err(Error::Validation("fewer than 2 usable points".into()));
    }
    let xs: Vec<f64> = transformed.iter().map(|t| t.0).collect();
    let ys: Vec<f64> = transformed.iter().map(|t| t.1).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    let log_xs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let (_, _, log_n_r_squared) = linear_fit(&log_xs, &ys);
    Ok(DecayReport {
        phases,
        transformed,
        usable,
        slope,
        intercept,
        r_squared,
        log_n_r_squared,
        sub_order: log_n_r_squared > r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_channel;

    #[test]
    fn exponent_examples() {
        assert_eq!(shannon_exponent(0.0, 3.0), 0.75);
        assert!(shannon_exponent(50.0, 3.0) < 1e-40);
        let v = shannon_exponent(0.5 * 2f64.ln(), 4.0);
        assert!((v - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
        assert!((shannon_rate_limit(2.0) - 0.5 * ((2.0 + 8f64.sqrt()) / 4.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn recursion_examples() {
        let ch = make_channel(1.0, &[1.0]).unwrap();
        let g = gamma_recursion(&[0.1, 0.0], &ch, 1.0).unwrap();
        assert_eq!(g[0], 0.1);
        let want = 2.0 * q(10f64.sqrt() / 2.0);
        assert!((g[1] - want).abs() < 1e-15 * want.max(1.0));
        assert_eq!(gamma_recursion(&[0.0, 0.0, 0.0], &ch, 1.0).unwrap(), vec![0.0; 3]);
        let looser = gamma_recursion(&[0.2, 0.0], &ch, 1.0).unwrap()[1];
        assert!(looser > g[1]);
        assert!(gamma_recursion(&[1.5], &ch, 1.0).is_err());
    }

    #[test]
    fn log_recursion_survives_underflow() {
        let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
        let lg = gamma_recursion_log(&[-40.0, f64::NEG_INFINITY], &ch, 1.0).unwrap();
        // -ln gamma_2 ~ e^40 / 8
        assert!(lg[1].is_finite());
        assert!((-lg[1] / (40f64.exp() / 8.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn diagnostic_synthetic_forms() {
        let pts: Vec<DecayPoint> = (1..=8)
            .map(|i| {
                let n = 10.0 * i as f64;
                DecayPoint { n, log_gamma: -(0.1 * n).exp() }
            })
            .collect();
        let r = decay_order_diagnostic(&pts, 2).unwrap();
        assert!((r.slope - 0.1).abs() < 1e-12);
        assert!(r.r_squared > 1.0 - 1e-12);
        assert!(!r.sub_order);

        let single: Vec<DecayPoint> = (1..=8).map(|i| DecayPoint { n: 50.0 * i as f64, log_gamma: -50.0 * i as f64 }).collect();
        let r = decay_order_diagnostic(&single, 2).unwrap();
        assert!(r.slope < 0.01);
        assert!(r.sub_order);

        let mut bad = pts.clone();
        bad[0].log_gamma = 0.5;
        bad[1].log_gamma = -0.5;
        let r = decay_order_diagnostic(&bad, 3).unwrap();
        assert_eq!(&r.usable[..2], &[false, false]);
        assert!(decay_order_diagnostic(&pts[..3], 2).is_err());
    }
}
