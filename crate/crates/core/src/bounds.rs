//! Rate bounds for linear-feedback schemes over the Gaussian BC with a
//! common message.
//!
//! The central object is the alpha* system: K power fractions summing to one
//! that equalize the K private-message outer-bound rates. Its common rate
//! upper-bounds every rate a linear-feedback scheme with a message point can
//! reach. All rates are in nats per channel use.

use serde::Serialize;

use crate::channel::ChannelModel;
use crate::error::{Error, Result};

/// Default residual tolerance for [`solve_alpha_star`].
pub const DEFAULT_TOL: f64 = 1e-10;

const SCAN_POINTS: usize = 1000;
const BISECTION_TARGET: f64 = 1e-12;
const MAX_BISECTION_ITERS: usize = 200;

/// Harmonic effective noises N_k = (sum_{k' <= k} 1/sigma_k'^2)^-1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveNoises {
    pub values: Vec<f64>,
}

/// Solution of the rate-equalizing power split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaStar {
    pub alphas: Vec<f64>,
    /// Equalized rate (nats/symbol).
    pub common_rate: f64,
    /// `residuals[0]` is `sum(alphas) - 1`; `residuals[k]` for k >= 1 is
    /// `R_k - R_1` between the outer-bound rates.
    pub residuals: Vec<f64>,
    /// True for K = 1, where the solution sits on the boundary alpha_1 = 1.
    pub degenerate: bool,
    pub bisection_iters: usize,
}

impl AlphaStar {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Point-to-point capacity to the noisiest receiver, 1/2 log(1 + P/sigma_1^2).
pub fn capacity(ch: &ChannelModel) -> f64 {
    0.5 * (ch.power_budget() / ch.noise_variance(0)).ln_1p()
}

pub fn effective_noises(ch: &ChannelModel) -> EffectiveNoises {
    let mut acc = 0.0;
    let values = ch
        .noise_variances()
        .iter()
        .map(|s2| {
            acc += 1.0 / s2;
            1.0 / acc
        })
        .collect();
    EffectiveNoises { values }
}

/// Outer-bound rates R_k = 1/2 log(1 + a_k P / ((1 - a_1 - ... - a_k) P + N_k)).
pub fn private_outer_rates(ch: &ChannelModel, alphas: &[f64]) -> Result<Vec<f64>> {
    let k = ch.num_receivers();
    if alphas.len() != k {
        return Err(Error::Dimension(format!(
            "{} power fractions for {k} receivers",
            alphas.len()
        )));
    }
    let p = ch.power_budget();
    let noises = effective_noises(ch).values;
    let mut partial = 0.0;
    let mut rates = Vec::with_capacity(k);
    for (i, (&a, &nk)) in alphas.iter().zip(&noises).enumerate() {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Validation(format!(
                "alpha[{i}] = {a} outside [0, 1]"
            )));
        }
        partial += a;
        if partial > 1.0 + 1e-12 {
            return Err(Error::Validation(format!(
                "partial sum of alphas reaches {partial} at index {i}"
            )));
        }
        let rest = (1.0 - partial).max(0.0);
        rates.push(0.5 * (a * p / (rest * p + nk)).ln_1p());
    }
    Ok(rates)
}

/// Sequential elimination: given alpha_1, every later alpha_k is fixed by
/// requiring R_k = R_1. Returns the alphas and the leftover fraction beta_K.
fn eliminate(alpha1: f64, p: f64, sigma1_sq: f64, noises: &[f64]) -> (Vec<f64>, f64) {
    let g = alpha1 * p / ((1.0 - alpha1) * p + sigma1_sq);
    let mut alphas = Vec::with_capacity(noises.len());
    alphas.push(alpha1);
    let mut beta = 1.0 - alpha1;
    for &nk in &noises[1..] {
        let a = g * (beta * p + nk) / ((1.0 + g) * p);
        alphas.push(a);
        beta -= a;
    }
    (alphas, beta)
}

fn residuals(ch: &ChannelModel, alphas: &[f64]) -> (Vec<f64>, f64) {
    // Evaluate the rate equations directly, not through the elimination.
    let p = ch.power_budget();
    let noises = effective_noises(ch).values;
    let sum: f64 = alphas.iter().sum();
    let mut partial = 0.0;
    let mut rates = Vec::with_capacity(alphas.len());
    for (&a, &nk) in alphas.iter().zip(&noises) {
        partial += a;
        rates.push(0.5 * (a * p / ((1.0 - partial) * p + nk)).ln_1p());
    }
    let r1 = 0.5 * (alphas[0] * p / ((1.0 - alphas[0]) * p + ch.noise_variance(0))).ln_1p();
    let mut res = vec![sum - 1.0];
    res.extend(rates[1..].iter().map(|r| r - r1));
    (res, r1)
}

/// Solves the alpha* system by a sign-change scan over alpha_1 followed by
/// bisection, then re-checks the raw rate equations against `tol`.
pub fn solve_alpha_star(ch: &ChannelModel, tol: f64) -> Result<AlphaStar> {
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be > 0, got {tol}")));
    }
    let k = ch.num_receivers();
    if k == 1 {
        return Ok(AlphaStar {
            alphas: vec![1.0],
            common_rate: capacity(ch),
            residuals: vec![0.0],
            degenerate: true,
            bisection_iters: 0,
        });
    }

    let p = ch.power_budget();
    let s1 = ch.noise_variance(0);
    let noises = effective_noises(ch).values;
    let beta_k = |a1: f64| eliminate(a1, p, s1, &noises).1;

    let lo = tol;
    let hi = 1.0 - tol;
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut trace = Vec::with_capacity(SCAN_POINTS);
    let mut brackets = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..SCAN_POINTS {
        let a = if i == SCAN_POINTS - 1 { hi } else { lo + i as f64 * step };
        let b = beta_k(a);
        trace.push((a, b));
        if let Some((pa, pb)) = prev {
            if b == 0.0 || pb.signum() != b.signum() && pb != 0.0 {
                brackets.push((pa, a));
            }
        }
        prev = Some((a, b));
    }
    if brackets.is_empty() {
        return Err(Error::Solver {
            reason: "no sign change of the leftover power fraction over alpha_1 in (0, 1)".into(),
            trace,
        });
    }
    if brackets.len() > 1 {
        let list: Vec<String> = brackets
            .iter()
            .map(|(a, b)| format!("[{a:.6}, {b:.6}]"))
            .collect();
        return Err(Error::Solver {
            reason: format!("multiple roots bracketed: {}", list.join(", ")),
            trace,
        });
    }

    let (mut a, mut b) = brackets[0];
    let mut fa = beta_k(a);
    let mut mid = 0.5 * (a + b);
    let mut iters = 0;
    while iters < MAX_BISECTION_ITERS {
        iters += 1;
        mid = 0.5 * (a + b);
        let fm = beta_k(mid);
        if fm.abs() < BISECTION_TARGET || mid == a || mid == b {
            break;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }

    let (alphas, _) = eliminate(mid, p, s1, &noises);
    if let Some((i, bad)) = alphas.iter().enumerate().find(|(_, &x)| !(x > 0.0 && x < 1.0)) {
        return Err(Error::Solver {
            reason: format!("alpha[{i}] = {bad} left the open unit interval"),
            trace,
        });
    }
    let (res, r1) = residuals(ch, &alphas);
    let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if worst >= tol {
        return Err(Error::Accuracy {
            residual: worst,
            tol,
        });
    }
    Ok(AlphaStar {
        alphas,
        common_rate: r1,
        residuals: res,
        degenerate: false,
        bisection_iters: iters,
    })
}

/// Upper bound on the rates of linear-feedback schemes with a message point.
pub fn linfb_upper_bound(ch: &ChannelModel) -> Result<f64> {
    let sol = solve_alpha_star(ch, DEFAULT_TOL)?;
    let a1 = sol.alphas[0];
    let p = ch.power_budget();
    Ok(0.5 * (a1 * p / ((1.0 - a1) * p + ch.noise_variance(0))).ln_1p())
}

/// Looser closed-form envelope 1/2 log(1 + P / sum_k N_k); vanishes as K grows
/// whenever the effective noises are not summable.
pub fn prop2_envelope(ch: &ChannelModel) -> f64 {
    let total: f64 = effective_noises(ch).values.iter().sum();
    0.5 * (ch.power_budget() / total).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_channel;
    use std::f64::consts::LN_2;

    #[test]
    fn capacity_values() {
        assert!((capacity(&make_channel(1.0, &[1.0]).unwrap()) - 0.5 * LN_2).abs() < 1e-15);
        assert!((capacity(&make_channel(3.0, &[1.0, 0.2]).unwrap()) - LN_2).abs() < 1e-15);
        assert!(capacity(&make_channel(1e-300, &[1.0]).unwrap()) < 1e-299);
    }

    #[test]
    fn harmonic_noises() {
        let n = effective_noises(&make_channel(1.0, &[1.0, 1.0, 1.0]).unwrap()).values;
        assert_eq!(n[0], 1.0);
        assert!((n[1] - 0.5).abs() < 1e-15 && (n[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(effective_noises(&make_channel(1.0, &[2.0]).unwrap()).values, vec![2.0]);
        let n = effective_noises(&make_channel(1.0, &[2.0, 1.0]).unwrap()).values;
        assert_eq!(n[0], 2.0);
        assert!((n[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn outer_rates() {
        let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
        assert_eq!(private_outer_rates(&ch, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let r = private_outer_rates(&ch, &[0.5, 0.5]).unwrap();
        assert!((r[0] - 0.5 * (1.0f64 + 0.5 / 1.5).ln()).abs() < 1e-15);
        assert!((r[1] - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!(private_outer_rates(&ch, &[0.7, 0.7]).is_err());
        assert!(private_outer_rates(&ch, &[0.7]).is_err());

        let single = make_channel(2.0, &[0.5]).unwrap();
        let r = private_outer_rates(&single, &[1.0]).unwrap();
        assert!((r[0] - capacity(&single)).abs() < 1e-15);
    }

    #[test]
    fn single_receiver_is_degenerate() {
        let ch = make_channel(5.0, &[2.0]).unwrap();
        let sol = solve_alpha_star(&ch, DEFAULT_TOL).unwrap();
        assert!(sol.degenerate);
        assert_eq!(sol.alphas, vec![1.0]);
        assert_eq!(sol.common_rate, capacity(&ch));
        assert_eq!(linfb_upper_bound(&ch).unwrap(), capacity(&ch));
    }

    #[test]
    fn two_equal_receivers_closed_form() {
        // alpha_1 solves 2a^2 - 7a + 4 = 0 for P = 1, sigma^2 = (1, 1).
        let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
        let sol = solve_alpha_star(&ch, DEFAULT_TOL).unwrap();
        let exact = (7.0 - 17f64.sqrt()) / 4.0;
        assert!((sol.alphas[0] - exact).abs() < 1e-11);
        assert!(sol.max_residual() < DEFAULT_TOL);
        assert!(sol.common_rate < capacity(&ch));
    }

    #[test]
    fn rejects_bad_tolerance() {
        let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
        assert!(solve_alpha_star(&ch, 0.0).is_err());
    }

    #[test]
    fn envelope_values() {
        let ch = make_channel(1.0, &[1.0]).unwrap();
        assert!((prop2_envelope(&ch) - 0.5 * LN_2).abs() < 1e-15);
        let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
        assert!((prop2_envelope(&ch) - 0.5 * (5.0f64 / 3.0).ln()).abs() < 1e-15);
        let many = make_channel(1.0, &vec![1.0; 2000]).unwrap();
        assert!(prop2_envelope(&many) < 0.07);
    }
}
