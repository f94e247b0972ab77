//! `lfbc` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or JSON error, 2 invalid arguments or
//! configuration, 3 solver failure, 4 simulation failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::bounds::{capacity, effective_noises, linfb_upper_bound, private_outer_rates, prop2_envelope, solve_alpha_star};
use crate::channel::{make_channel, ChannelModel, NoiseBlock};
use crate::error::{Error, Result};
use crate::intermittent::{calibrate_gammas, trial_outcome, IntermittentConfig, Protocol};
use crate::linfb::{default_combining_vectors, LinearFeedbackScheme, PrivateScheme, SchemeDocument, DEFAULT_DELTA_FRACTION};
use crate::montecarlo::{estimate_error, sweep, TrialOutcome, TrialReport};
use crate::report::{fmt_sig, svg_line_plot, CsvTable, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitStatus {
    Success = 0,
    Io = 1,
    Invalid = 2,
    Solver = 3,
    Simulation = 4,
}

impl ExitStatus {
    pub fn of(err: &Error) -> Self {
        match err {
            Error::Io(_) | Error::Json(_) => ExitStatus::Io,
            Error::Solver { .. } | Error::Accuracy { .. } => ExitStatus::Solver,
            Error::Trial { .. } | Error::Cell { .. } => ExitStatus::Simulation,
            _ => ExitStatus::Invalid,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lfbc", version, about = "Linear-feedback bounds and feedback-protocol simulation for the Gaussian broadcast channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Linear-feedback rate bound, envelope and capacity for K = 1..kmax.
    Bound(BoundArgs),
    /// Solve the rate-equalizing power split for one channel.
    Alpha(AlphaArgs),
    /// Monte Carlo of the multi-phase protocol against its single-phase baseline.
    SimulateIntermittent(IntermittentArgs),
    /// Monte Carlo of the private-message construction built on a scheme file.
    SimulateLinfb(LinfbArgs),
    /// Monte Carlo over a JSON list of protocol configurations.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report rates and information in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub power: f64,
    /// Noise variances; a single value is repeated for every K.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    pub kmax: usize,
    /// Also write an SVG plot of the three columns.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub power: f64,
    /// Noise variances, one per receiver.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = crate::bounds::DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct IntermittentArgs {
    /// Protocol configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Noise variances, one per receiver.
    #[arg(long, value_delimiter = ',', default_value = "1,1")]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Replace the configured gammas by measured phase error rates from this many trials.
    #[arg(long)]
    pub calibrate_gamma: Option<u64>,
    /// Debug: run every trial with all noise forced to zero.
    #[arg(long)]
    pub noiseless: bool,
    /// Also write the reports as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the trace of the trial with this seed as JSON.
    #[arg(long, requires = "trace_out")]
    pub trace_seed: Option<u64>,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct LinfbArgs {
    /// Scheme file: {n, K, d, A, theta_variance}, matrices in the caller's receiver order.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub power: f64,
    /// Noise variances, one per receiver.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigma: Vec<f64>,
    /// Private rates in nats per symbol, one per receiver.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rates: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Power back-off delta as a fraction of P.
    #[arg(long, default_value_t = DEFAULT_DELTA_FRACTION)]
    pub delta_fraction: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON array of protocol configurations.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,1")]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli.command, stdout, stderr) {
        Ok(status) => status as i32,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            ExitStatus::of(&e) as i32
        }
    }
}

fn dispatch(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<ExitStatus> {
    match cmd {
        Command::Bound(a) => cmd_bound(a, stdout, stderr),
        Command::Alpha(a) => cmd_alpha(a, stdout),
        Command::SimulateIntermittent(a) => cmd_simulate_intermittent(a, stdout),
        Command::SimulateLinfb(a) => cmd_simulate_linfb(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
    }
}

fn emit(table: &CsvTable, out: &Output, stdout: &mut dyn Write) -> Result<()> {
    let text = table.render();
    match &out.out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn unit(bits: bool) -> f64 {
    if bits {
        std::f64::consts::LN_2
    } else {
        1.0
    }
}

fn unit_name(bits: bool) -> &'static str {
    if bits {
        "bits"
    } else {
        "nats"
    }
}

pub const BOUND_HEADER: [&str; 6] = ["K", "linfb_upper_bound", "prop2_envelope", "capacity", "unit", "status"];

/// Channel with K receivers from a variance list: a single value is
/// repeated, otherwise the first K values are used.
pub fn channel_for_k(power: f64, sigma: &[f64], k: usize) -> Result<ChannelModel> {
    let vars: Vec<f64> = if sigma.len() == 1 {
        vec![sigma[0]; k]
    } else if sigma.len() >= k {
        sigma[..k].to_vec()
    } else {
        return Err(Error::Config(format!("--sigma lists {} variances, K = {k} needs more", sigma.len())));
    };
    make_channel(power, &vars)
}

pub fn cmd_bound(a: &BoundArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<ExitStatus> {
    if a.kmax < 1 {
        return Err(Error::Config("--kmax must be >= 1".into()));
    }
    // fail fast on bad parameters before computing any row
    channel_for_k(a.power, &a.sigma, a.kmax)?;
    let u = unit(a.output.bits);
    let mut table = CsvTable::new(&BOUND_HEADER);
    let mut status = ExitStatus::Success;
    let mut series = vec![Vec::new(), Vec::new(), Vec::new()];
    for k in 1..=a.kmax {
        let ch = channel_for_k(a.power, &a.sigma, k)?;
        let env = prop2_envelope(&ch) / u;
        let cap = capacity(&ch) / u;
        let (bound, note) = match linfb_upper_bound(&ch) {
            Ok(b) => (fmt_sig(b / u), "ok".to_string()),
            Err(e) => {
                let _ = writeln!(stderr, "K={k}: {e}");
                status = ExitStatus::Solver;
                (String::new(), format!("error: {e}"))
            }
        };
        if let Ok(b) = bound.parse::<f64>() {
            series[0].push((k as f64, b));
        }
        series[1].push((k as f64, env));
        series[2].push((k as f64, cap));
        table.push(vec![k.to_string(), bound, fmt_sig(env), fmt_sig(cap), unit_name(a.output.bits).into(), note]);
    }
    emit(&table, &a.output, stdout)?;
    if let Some(path) = &a.svg {
        let names = ["linear-feedback bound", "envelope", "capacity"];
        let series: Vec<Series> = names
            .iter()
            .zip(series)
            .map(|(n, points)| Series { name: n.to_string(), points })
            .collect();
        let title = format!("Rate bounds, P = {}", fmt_sig(a.power));
        let ylabel = format!("rate ({}/symbol)", unit_name(a.output.bits));
        fs::write(path, svg_line_plot(&title, "K", &ylabel, &series))?;
    }
    Ok(status)
}

pub const ALPHA_HEADER: [&str; 8] = ["k", "receiver", "noise_variance", "effective_noise", "alpha", "rate", "residual", "unit"];

pub fn cmd_alpha(a: &AlphaArgs, stdout: &mut dyn Write) -> Result<ExitStatus> {
    let ch = make_channel(a.power, &a.sigma)?;
    let sol = solve_alpha_star(&ch, a.tol)?;
    let rates = private_outer_rates(&ch, &sol.alphas)?;
    let noises = effective_noises(&ch);
    let u = unit(a.output.bits);
    let mut table = CsvTable::new(&ALPHA_HEADER);
    for k in 0..ch.num_receivers() {
        table.push(vec![
            (k + 1).to_string(),
            ch.permutation()[k].to_string(),
            fmt_sig(ch.noise_variance(k)),
            fmt_sig(noises.values[k]),
            fmt_sig(sol.alphas[k]),
            fmt_sig(rates[k] / u),
            fmt_sig(sol.residuals[k]),
            unit_name(a.output.bits).into(),
        ]);
    }
    emit(&table, &a.output, stdout)?;
    Ok(ExitStatus::Success)
}

pub const INTERMITTENT_HEADER: [&str; 20] = [
    "scheme",
    "L",
    "n",
    "message_count",
    "power_budget",
    "trials",
    "errors",
    "p_hat",
    "ci_low",
    "ci_high",
    "mean_power",
    "power_stderr",
    "mean_fb_nats",
    "fb_limit",
    "fb_pass",
    "E1",
    "E2",
    "E3",
    "below_resolution",
    "seed_base",
];

fn intermittent_row(label: &str, cfg: &IntermittentConfig, r: &TrialReport) -> Vec<String> {
    let limit = cfg.n as f64 * cfg.fb_rate;
    vec![
        label.to_string(),
        cfg.phases.to_string(),
        cfg.n.to_string(),
        cfg.message_count.to_string(),
        fmt_sig(cfg.power_budget),
        r.trials.to_string(),
        r.errors.to_string(),
        fmt_sig(r.p_hat),
        fmt_sig(r.ci_low),
        fmt_sig(r.ci_high),
        fmt_sig(r.mean_power),
        fmt_sig(r.power_stderr),
        fmt_sig(r.mean_fb_nats),
        fmt_sig(limit),
        // every trace feeds back the same number of guesses
        (r.mean_fb_nats <= limit * (1.0 + 1e-12)).to_string(),
        r.event_counts.e1.to_string(),
        r.event_counts.e2.to_string(),
        r.event_counts.e3.to_string(),
        r.below_resolution.to_string(),
        r.seed_base.to_string(),
    ]
}

fn protocol_report(p: &Protocol, trials: u64, seed: u64, noiseless: bool) -> Result<TrialReport> {
    let k = p.channel().num_receivers();
    let n = p.config().n;
    let m = p.config().message_count;
    estimate_error(
        |s| -> Result<TrialOutcome> {
            let trace = if noiseless {
                p.run_with_noise(crate::intermittent::message_for_seed(s, m), &NoiseBlock::zeros(k, n))?
            } else {
                p.run_seeded(s)?
            };
            Ok(trial_outcome(&trace))
        },
        trials,
        seed,
    )
}

#[derive(Serialize)]
struct IntermittentJson<'a> {
    config: &'a IntermittentConfig,
    noise_variances: &'a [f64],
    report: &'a TrialReport,
    baseline_config: &'a IntermittentConfig,
    baseline: &'a TrialReport,
}

pub fn cmd_simulate_intermittent(a: &IntermittentArgs, stdout: &mut dyn Write) -> Result<ExitStatus> {
    let mut cfg = IntermittentConfig::from_json(&read(&a.config)?)?;
    let ch = make_channel(cfg.power_budget, &a.sigma)?;
    if let Some(t) = a.calibrate_gamma {
        cfg.gamma = calibrate_gammas(&cfg, &ch, t, a.seed.wrapping_add(a.trials))?;
        cfg.validate()?;
    }
    let base_cfg = cfg.baseline();
    let protocol = Protocol::new(&cfg, &ch)?;
    let baseline = Protocol::new(&base_cfg, &ch)?;
    let report = protocol_report(&protocol, a.trials, a.seed, a.noiseless)?;
    let base_report = protocol_report(&baseline, a.trials, a.seed, a.noiseless)?;
    let mut table = CsvTable::new(&INTERMITTENT_HEADER);
    table.push(intermittent_row("protocol", &cfg, &report));
    table.push(intermittent_row("baseline", &base_cfg, &base_report));
    emit(&table, &a.output, stdout)?;
    if let Some(path) = &a.json {
        write_json(
            path,
            &IntermittentJson {
                config: &cfg,
                noise_variances: &a.sigma,
                report: &report,
                baseline_config: &base_cfg,
                baseline: &base_report,
            },
        )?;
    }
    if let (Some(seed), Some(path)) = (a.trace_seed, &a.trace_out) {
        write_json(path, &protocol.run_seeded(seed)?)?;
    }
    Ok(ExitStatus::Success)
}

pub const LINFB_HEADER: [&str; 15] = [
    "receiver",
    "j",
    "messages",
    "trials",
    "errors",
    "p_hat",
    "ci_low",
    "ci_high",
    "error_bound",
    "bound_ok",
    "mutual_info",
    "analytic_error_variance",
    "empirical_mse",
    "mse_rel_dev",
    "unit",
];

/// Builds the private construction for a scheme file whose matrices are
/// listed in the caller's receiver order.
pub fn private_scheme_from_document(doc: &SchemeDocument, ch: &ChannelModel, rates: &[f64]) -> Result<PrivateScheme> {
    let k = ch.num_receivers();
    if doc.k != k || doc.a.len() != k {
        return Err(Error::Dimension(format!("scheme has K = {}, channel has {k} receivers", doc.k)));
    }
    if rates.len() != k {
        return Err(Error::Dimension(format!("{} rates for {k} receivers", rates.len())));
    }
    let mut sorted = doc.clone();
    sorted.a = ch.permutation().iter().map(|&p| doc.a[p - 1].clone()).collect();
    let sorted_rates: Vec<f64> = ch.permutation().iter().map(|&p| rates[p - 1]).collect();
    let scheme = LinearFeedbackScheme::from_document(&sorted)?;
    let report = scheme.validate(ch)?;
    if !report.power_ok {
        return Err(Error::Validation(format!(
            "scheme uses power {} over budget n P = {}",
            report.power_lhs, report.budget
        )));
    }
    let (v, j) = default_combining_vectors(&scheme, ch)?;
    let mats: Vec<DMatrix<f64>> = scheme.a_mats().to_vec();
    PrivateScheme::new(&mats, v, j, ch, &sorted_rates)
}

pub fn cmd_simulate_linfb(a: &LinfbArgs, stdout: &mut dyn Write) -> Result<ExitStatus> {
    let doc: SchemeDocument = serde_json::from_str(&read(&a.config)?)?;
    let ch = make_channel(a.power, &a.sigma)?;
    let scheme = private_scheme_from_document(&doc, &ch, &a.rates)?;
    let delta = a.delta_fraction * a.power;
    if !scheme.base_fits(delta) {
        return Err(Error::Validation(format!(
            "base matrices exceed the backed-off budget n (P - delta) with delta = {delta}"
        )));
    }
    let rep = scheme.simulate(a.trials, a.seed)?;
    let u = unit(a.output.bits);
    let mut table = CsvTable::new(&LINFB_HEADER);
    for r in &rep.receivers {
        let k = r.receiver;
        let rel = r.empirical_mse / r.analytic_error_variance - 1.0;
        table.push(vec![
            ch.permutation()[k].to_string(),
            (scheme.j()[k] + 1).to_string(),
            r.messages.to_string(),
            rep.trials.to_string(),
            r.errors.to_string(),
            fmt_sig(r.p_hat),
            fmt_sig(r.ci_low),
            fmt_sig(r.ci_high),
            fmt_sig(r.error_bound),
            (r.p_hat <= r.error_bound || r.ci_low <= r.error_bound).to_string(),
            fmt_sig(r.mutual_info / u),
            fmt_sig(r.analytic_error_variance),
            fmt_sig(r.empirical_mse),
            fmt_sig(rel),
            unit_name(a.output.bits).into(),
        ]);
    }
    emit(&table, &a.output, stdout)?;
    Ok(ExitStatus::Success)
}

pub const SWEEP_HEADER: [&str; 20] = [
    "cell",
    "cell_seed",
    "L",
    "n",
    "epsilon",
    "message_count",
    "power_budget",
    "trials",
    "errors",
    "p_hat",
    "ci_low",
    "ci_high",
    "mean_power",
    "power_stderr",
    "mean_fb_nats",
    "fb_limit",
    "E1",
    "E2",
    "E3",
    "below_resolution",
];

// Serializes as its config alone, so the cell seed depends only on the config.
#[derive(Clone)]
struct SweepCell<'a> {
    cfg: &'a IntermittentConfig,
    protocol: &'a Protocol,
}

impl Serialize for SweepCell<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.cfg.serialize(s)
    }
}

pub fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write) -> Result<ExitStatus> {
    let grid: Vec<IntermittentConfig> = serde_json::from_str(&read(&a.config)?)?;
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    // validate everything and build codebooks once, before any trial runs
    let protocols = grid
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            cfg.validate()
                .and_then(|_| make_channel(cfg.power_budget, &a.sigma))
                .and_then(|ch| Protocol::new(cfg, &ch))
                .map_err(|e| Error::Cell { cell: i, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<SweepCell> = grid
        .iter()
        .zip(&protocols)
        .map(|(cfg, protocol)| SweepCell { cfg, protocol })
        .collect();
    let rows = sweep(&cells, a.trials, a.seed, |cell, s| {
        cell.protocol.run_seeded(s).map(|t| trial_outcome(&t))
    })?;
    let mut table = CsvTable::new(&SWEEP_HEADER);
    for (i, row) in rows.iter().enumerate() {
        let (cfg, r, seed) = (row.config.cfg, &row.report, row.report.seed_base);
        table.push(vec![
            i.to_string(),
            seed.to_string(),
            cfg.phases.to_string(),
            cfg.n.to_string(),
            fmt_sig(cfg.epsilon),
            cfg.message_count.to_string(),
            fmt_sig(cfg.power_budget),
            r.trials.to_string(),
            r.errors.to_string(),
            fmt_sig(r.p_hat),
            fmt_sig(r.ci_low),
            fmt_sig(r.ci_high),
            fmt_sig(r.mean_power),
            fmt_sig(r.power_stderr),
            fmt_sig(r.mean_fb_nats),
            fmt_sig(cfg.n as f64 * cfg.fb_rate),
            r.event_counts.e1.to_string(),
            r.event_counts.e2.to_string(),
            r.event_counts.e3.to_string(),
            r.below_resolution.to_string(),
        ]);
    }
    emit(&table, &a.output, stdout)?;
    Ok(ExitStatus::Success)
}
