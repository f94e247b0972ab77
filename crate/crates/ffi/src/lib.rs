//! C ABI over `lfbc`.
//!
//! Every fallible function returns an `LfbcStatus`; on failure a message is
//! available from `lfbc_last_error` on the same thread until the next failing
//! call. Handles are opaque, created by `*_new*` and released by the matching
//! `*_free`. Panics never cross the boundary; they surface as
//! `LFBC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use lfbc::bounds;
use lfbc::channel::ChannelModel;
use lfbc::cli::private_scheme_from_document;
use lfbc::intermittent::{trial_outcome, IntermittentConfig, Protocol};
use lfbc::linfb::{PrivateScheme, SchemeDocument};
use lfbc::montecarlo::estimate_error;
use lfbc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfbcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Solver = 4,
    Simulation = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

impl From<&Error> for LfbcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => LfbcStatus::Dimension,
            Error::Solver { .. } | Error::Accuracy { .. } => LfbcStatus::Solver,
            Error::Trial { .. } | Error::Cell { .. } => LfbcStatus::Simulation,
            Error::Io(_) | Error::Json(_) => LfbcStatus::Io,
            _ => LfbcStatus::InvalidArgument,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: LfbcStatus, msg: &str) -> LfbcStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> Result<(), LfbcStatus>>(f: F) -> LfbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LfbcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(LfbcStatus::Panic, "internal panic"),
    }
}

fn check<T>(r: lfbc::Result<T>) -> Result<T, LfbcStatus> {
    r.map_err(|e| fail(LfbcStatus::from(&e), &e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), LfbcStatus> {
    if p.is_null() {
        Err(fail(LfbcStatus::NullPointer, &format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, LfbcStatus> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LfbcStatus::InvalidArgument, &format!("{what} is not UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], LfbcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(slice::from_raw_parts(p, len))
}

/// Gaussian broadcast channel: power budget and sorted noise variances.
pub struct LfbcChannel {
    inner: ChannelModel,
}

/// Multi-phase protocol with prebuilt codebooks.
pub struct LfbcProtocol {
    inner: Protocol,
}

/// Private-message construction built from a scheme document.
pub struct LfbcPrivateScheme {
    inner: PrivateScheme,
}

/// Monte Carlo summary of a protocol run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LfbcTrialReport {
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_power: f64,
    pub power_stderr: f64,
    pub mean_fb_nats: f64,
    pub e1: u64,
    pub e2: u64,
    pub e3: u64,
}

/// Message of the last failing call on this thread; empty if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn lfbc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Gaussian tail probability Q(x).
#[no_mangle]
pub extern "C" fn lfbc_q(x: f64) -> f64 {
    lfbc::special::q(x)
}

/// # Safety
/// `variances` must point to `k` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_channel_new(
    power: f64,
    variances: *const f64,
    k: usize,
    out: *mut *mut LfbcChannel,
) -> LfbcStatus {
    guard(|| {
        non_null(out, "out")?;
        let vars = read_slice(variances, k, "variances")?;
        let inner = check(ChannelModel::new(power, vars))?;
        *out = Box::into_raw(Box::new(LfbcChannel { inner }));
        Ok(())
    })
}

/// # Safety
/// `ch` must be NULL or a handle from `lfbc_channel_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lfbc_channel_free(ch: *mut LfbcChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// # Safety
/// `ch` must be a live channel handle.
#[no_mangle]
pub unsafe extern "C" fn lfbc_channel_num_receivers(ch: *const LfbcChannel) -> usize {
    if ch.is_null() {
        return 0;
    }
    (*ch).inner.num_receivers()
}

/// # Safety
/// `ch` must be a live channel handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_capacity(ch: *const LfbcChannel, out: *mut f64) -> LfbcStatus {
    guard(|| {
        non_null(ch, "channel")?;
        non_null(out, "out")?;
        *out = bounds::capacity(&(*ch).inner);
        Ok(())
    })
}

/// # Safety
/// `ch` must be a live channel handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_envelope(ch: *const LfbcChannel, out: *mut f64) -> LfbcStatus {
    guard(|| {
        non_null(ch, "channel")?;
        non_null(out, "out")?;
        *out = bounds::prop2_envelope(&(*ch).inner);
        Ok(())
    })
}

/// # Safety
/// `ch` must be a live channel handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_linfb_upper_bound(ch: *const LfbcChannel, out: *mut f64) -> LfbcStatus {
    guard(|| {
        non_null(ch, "channel")?;
        non_null(out, "out")?;
        *out = check(bounds::linfb_upper_bound(&(*ch).inner))?;
        Ok(())
    })
}

/// Writes the K power fractions to `alphas` (capacity `len`, in the
/// channel's sorted order) and the equalized rate to `common_rate`.
///
/// # Safety
/// `ch` must be a live channel handle; `alphas` must hold `len` doubles and
/// `common_rate` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_alpha_star(
    ch: *const LfbcChannel,
    tol: f64,
    alphas: *mut f64,
    len: usize,
    common_rate: *mut f64,
) -> LfbcStatus {
    guard(|| {
        non_null(ch, "channel")?;
        non_null(common_rate, "common_rate")?;
        let k = (*ch).inner.num_receivers();
        if len < k {
            return Err(fail(LfbcStatus::BufferTooSmall, &format!("alphas holds {len}, need {k}")));
        }
        non_null(alphas, "alphas")?;
        let sol = check(bounds::solve_alpha_star(&(*ch).inner, tol))?;
        slice::from_raw_parts_mut(alphas, k).copy_from_slice(&sol.alphas);
        *common_rate = sol.common_rate;
        Ok(())
    })
}

/// Builds a protocol from its JSON configuration; the channel's power is
/// replaced by the configuration's power budget.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `ch` a live channel
/// handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_protocol_new_json(
    config_json: *const c_char,
    ch: *const LfbcChannel,
    out: *mut *mut LfbcProtocol,
) -> LfbcStatus {
    guard(|| {
        non_null(ch, "channel")?;
        non_null(out, "out")?;
        let text = read_str(config_json, "config_json")?;
        let cfg = check(IntermittentConfig::from_json(text))?;
        let inner = check(Protocol::new(&cfg, &(*ch).inner))?;
        *out = Box::into_raw(Box::new(LfbcProtocol { inner }));
        Ok(())
    })
}

/// # Safety
/// `p` must be NULL or a handle from `lfbc_protocol_new_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lfbc_protocol_free(p: *mut LfbcProtocol) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// One transmission of `message` with noise from `seed`. Final guesses go to
/// `guesses` (capacity `len`, one per receiver); `error` is set to 1 if any
/// receiver is wrong.
///
/// # Safety
/// `p` must be a live protocol handle; `guesses` must hold `len` values and
/// `error` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_protocol_run(
    p: *const LfbcProtocol,
    message: u64,
    seed: u64,
    guesses: *mut u64,
    len: usize,
    error: *mut i32,
) -> LfbcStatus {
    guard(|| {
        non_null(p, "protocol")?;
        non_null(error, "error")?;
        let k = (*p).inner.channel().num_receivers();
        if len < k {
            return Err(fail(LfbcStatus::BufferTooSmall, &format!("guesses holds {len}, need {k}")));
        }
        non_null(guesses, "guesses")?;
        let trace = check((*p).inner.run(message, seed))?;
        slice::from_raw_parts_mut(guesses, k).copy_from_slice(&trace.final_guesses);
        *error = i32::from(trace.error());
        Ok(())
    })
}

/// Monte Carlo over seeds `seed..seed + trials` with seed-derived messages.
///
/// # Safety
/// `p` must be a live protocol handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_protocol_estimate(
    p: *const LfbcProtocol,
    trials: u64,
    seed: u64,
    out: *mut LfbcTrialReport,
) -> LfbcStatus {
    guard(|| {
        non_null(p, "protocol")?;
        non_null(out, "out")?;
        let proto = &(*p).inner;
        let r = check(estimate_error(|s| proto.run_seeded(s).map(|t| trial_outcome(&t)), trials, seed))?;
        *out = LfbcTrialReport {
            trials: r.trials,
            errors: r.errors,
            p_hat: r.p_hat,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            mean_power: r.mean_power,
            power_stderr: r.power_stderr,
            mean_fb_nats: r.mean_fb_nats,
            e1: r.event_counts.e1,
            e2: r.event_counts.e2,
            e3: r.event_counts.e3,
        };
        Ok(())
    })
}

/// Private-message construction from a scheme document
/// (`{n, K, d, A, theta_variance}`, matrices in the caller's receiver order)
/// with one rate in nats per receiver.
///
/// # Safety
/// `scheme_json` must be NUL-terminated; `ch` a live channel handle;
/// `rates` must hold `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_private_scheme_new_json(
    scheme_json: *const c_char,
    ch: *const LfbcChannel,
    rates: *const f64,
    len: usize,
    out: *mut *mut LfbcPrivateScheme,
) -> LfbcStatus {
    guard(|| {
        non_null(ch, "channel")?;
        non_null(out, "out")?;
        let text = read_str(scheme_json, "scheme_json")?;
        let rates = read_slice(rates, len, "rates")?;
        let doc: SchemeDocument = check(parse_scheme_document(text))?;
        let inner = check(private_scheme_from_document(&doc, &(*ch).inner, rates))?;
        *out = Box::into_raw(Box::new(LfbcPrivateScheme { inner }));
        Ok(())
    })
}

fn parse_scheme_document(text: &str) -> lfbc::Result<SchemeDocument> {
    lfbc::linfb::LinearFeedbackScheme::from_json(text).map(|s| s.to_document())
}

/// # Safety
/// `s` must be NULL or a handle from `lfbc_private_scheme_new_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lfbc_private_scheme_free(s: *mut LfbcPrivateScheme) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Analytic information about Z_{k,1-k} at receiver `k` (sorted order, 0-based).
///
/// # Safety
/// `s` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_private_scheme_mutual_info(
    s: *const LfbcPrivateScheme,
    k: usize,
    out: *mut f64,
) -> LfbcStatus {
    guard(|| {
        non_null(s, "scheme")?;
        non_null(out, "out")?;
        let inner = &(*s).inner;
        if k >= inner.num_receivers() {
            return Err(fail(LfbcStatus::Dimension, &format!("receiver {k} out of range")));
        }
        *out = inner.mutual_info(k);
        Ok(())
    })
}

/// Upper bound on receiver `k`'s message error probability.
///
/// # Safety
/// `s` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_private_scheme_error_bound(
    s: *const LfbcPrivateScheme,
    k: usize,
    out: *mut f64,
) -> LfbcStatus {
    guard(|| {
        non_null(s, "scheme")?;
        non_null(out, "out")?;
        let inner = &(*s).inner;
        if k >= inner.num_receivers() {
            return Err(fail(LfbcStatus::Dimension, &format!("receiver {k} out of range")));
        }
        *out = inner.error_bound(k);
        Ok(())
    })
}

/// Measured error rate of receiver `k` over `trials` seeded transmissions.
///
/// # Safety
/// `s` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lfbc_private_scheme_error_rate(
    s: *const LfbcPrivateScheme,
    k: usize,
    trials: u64,
    seed: u64,
    out: *mut f64,
) -> LfbcStatus {
    guard(|| {
        non_null(s, "scheme")?;
        non_null(out, "out")?;
        let inner = &(*s).inner;
        if k >= inner.num_receivers() {
            return Err(fail(LfbcStatus::Dimension, &format!("receiver {k} out of range")));
        }
        let rep = check(inner.simulate(trials, seed))?;
        *out = rep.receivers[k].p_hat;
        Ok(())
    })
}
