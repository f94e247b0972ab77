//! Seeded trial runner, Wilson intervals and grid sweeps.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Smallest probability the harness reports as an estimate.
pub const RESOLUTION_FLOOR: f64 = 1e-6;

pub const MIN_TRIALS: u64 = 100;

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    wilson_interval_z(successes, trials, Z95)
}

pub fn wilson_interval_z(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    (lo, hi)
}

/// Neumaier-compensated running sums of x - x_0 and (x - x_0)^2, where x_0
/// is the first sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMean {
    count: u64,
    shift: f64,
    sum: f64,
    sum_c: f64,
    sq: f64,
    sq_c: f64,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.shift = x;
        }
        self.count += 1;
        let d = x - self.shift;
        neumaier(&mut self.sum, &mut self.sum_c, d);
        neumaier(&mut self.sq, &mut self.sq_c, d * d);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.shift + self.shifted_mean()
    }

    fn shifted_mean(&self) -> f64 {
        (self.sum + self.sum_c) / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.shifted_mean();
        (((self.sq + self.sq_c) - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for RunningMean {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = RunningMean::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    #[serde(rename = "E1")]
    pub e1: u64,
    #[serde(rename = "E2")]
    pub e2: u64,
    #[serde(rename = "E3")]
    pub e3: u64,
}

/// What one trial contributes to a report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub error: bool,
    /// Energy divided by blocklength.
    pub power: f64,
    pub fb_nats: f64,
    pub e1: bool,
    pub e2: bool,
    pub e3: bool,
}

impl TrialOutcome {
    pub fn correct() -> Self {
        TrialOutcome::default()
    }

    pub fn wrong() -> Self {
        TrialOutcome {
            error: true,
            ..TrialOutcome::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_power: f64,
    pub power_stderr: f64,
    pub mean_fb_nats: f64,
    pub event_counts: EventCounts,
    pub seed_base: u64,
    /// No errors seen, or the estimate is under the resolution floor.
    pub below_resolution: bool,
}

impl TrialReport {
    /// Aggregates outcomes listed in seed order.
    pub fn from_outcomes(outcomes: &[TrialOutcome], seed_base: u64) -> Self {
        let trials = outcomes.len() as u64;
        let errors = outcomes.iter().filter(|o| o.error).count() as u64;
        let power: RunningMean = outcomes.iter().map(|o| o.power).collect();
        let fb: RunningMean = outcomes.iter().map(|o| o.fb_nats).collect();
        let count = |f: fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
        let (ci_low, ci_high) = wilson_interval(errors, trials);
        let p_hat = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
        TrialReport {
            trials,
            errors,
            p_hat,
            ci_low,
            ci_high,
            mean_power: power.mean(),
            power_stderr: power.stderr(),
            mean_fb_nats: fb.mean(),
            event_counts: EventCounts {
                e1: count(|o| o.e1),
                e2: count(|o| o.e2),
                e3: count(|o| o.e3),
            },
            seed_base,
            below_resolution: errors == 0 || p_hat < RESOLUTION_FLOOR,
        }
    }

    pub fn disjoint_from(&self, other: &TrialReport) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

/// Runs `runner(seed)` for seeds `seed_base..seed_base + trials` in parallel.
/// The first failing seed (in seed order) aborts the run.
pub fn estimate_error<F>(runner: F, trials: u64, seed_base: u64) -> Result<TrialReport>
where
    F: Fn(u64) -> Result<TrialOutcome> + Sync,
{
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = seed_base.wrapping_add(t);
            runner(seed).map_err(|e| Error::Trial {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(TrialReport::from_outcomes(&outcomes, seed_base))
}

/// Seed for a sweep cell: the first 8 bytes of SHA-256 over the base seed
/// and the cell's canonical JSON encoding.
pub fn cell_seed<C: Serialize>(seed_base: u64, cell: &C) -> Result<u64> {
    let json = serde_json::to_vec(cell)?;
    let mut h = Sha256::new();
    h.update(seed_base.to_le_bytes());
    h.update(&json);
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    Ok(u64::from_le_bytes(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow<C> {
    pub config: C,
    pub report: TrialReport,
}

/// One report per grid cell. Each cell's seed depends only on its contents,
/// so permuting the grid permutes the rows without changing them.
pub fn sweep<C, F>(grid: &[C], trials: u64, seed_base: u64, runner: F) -> Result<Vec<SweepRow<C>>>
where
    C: Serialize + Clone + Sync,
    F: Fn(&C, u64) -> Result<TrialOutcome> + Sync,
{
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    grid.iter()
        .enumerate()
        .map(|(i, cell)| {
            let wrap = |e| Error::Cell {
                cell: i,
                source: Box::new(e),
            };
            let seed = cell_seed(seed_base, cell).map_err(wrap)?;
            let report = estimate_error(|s| runner(cell, s), trials, seed).map_err(wrap)?;
            Ok(SweepRow {
                config: cell.clone(),
                report,
            })
        })
        .collect()
}
