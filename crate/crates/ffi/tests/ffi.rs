use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lfbc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(lfbc_last_error()) }.to_string_lossy().into_owned()
}

fn channel(power: f64, vars: &[f64]) -> *mut LfbcChannel {
    let mut ch = ptr::null_mut();
    let st = unsafe { lfbc_channel_new(power, vars.as_ptr(), vars.len(), &mut ch) };
    assert_eq!(st, LfbcStatus::Ok, "{}", last_error());
    ch
}

#[test]
fn bounds_through_handles() {
    let ch = channel(1.0, &[1.0, 1.0]);
    unsafe {
        assert_eq!(lfbc_channel_num_receivers(ch), 2);
        let mut cap = 0.0;
        let mut bound = 0.0;
        let mut env = 0.0;
        assert_eq!(lfbc_capacity(ch, &mut cap), LfbcStatus::Ok);
        assert_eq!(lfbc_linfb_upper_bound(ch, &mut bound), LfbcStatus::Ok);
        assert_eq!(lfbc_envelope(ch, &mut env), LfbcStatus::Ok);
        assert!((cap - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!(bound < env && env < cap);
        let mut alphas = [0.0; 2];
        let mut rate = 0.0;
        assert_eq!(lfbc_alpha_star(ch, 1e-10, alphas.as_mut_ptr(), 2, &mut rate), LfbcStatus::Ok);
        assert!((alphas[0] - (7.0 - 17f64.sqrt()) / 4.0).abs() < 1e-10);
        assert_eq!(rate, bound);
        assert_eq!(lfbc_alpha_star(ch, 1e-10, alphas.as_mut_ptr(), 1, &mut rate), LfbcStatus::BufferTooSmall);
        lfbc_channel_free(ch);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut ch = ptr::null_mut();
    let vars = [1.0, -2.0];
    let st = unsafe { lfbc_channel_new(1.0, vars.as_ptr(), 2, &mut ch) };
    assert_eq!(st, LfbcStatus::InvalidArgument);
    assert!(ch.is_null());
    assert!(last_error().contains("noise variance"), "{}", last_error());
    let st = unsafe { lfbc_capacity(ptr::null(), &mut 0.0) };
    assert_eq!(st, LfbcStatus::NullPointer);
    unsafe {
        lfbc_channel_free(ptr::null_mut());
        lfbc_protocol_free(ptr::null_mut());
        lfbc_private_scheme_free(ptr::null_mut());
    }
}

#[test]
fn protocol_round_trip() {
    let ch = channel(1.0, &[0.01, 0.01]);
    let cfg = CString::new(
        r#"{"L":2,"n":40,"epsilon":0.25,"message_count":8,"power_budget":1.0,
            "fb_rate":0.052,"gamma":[0.01,0.001]}"#,
    )
    .unwrap();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(lfbc_protocol_new_json(cfg.as_ptr(), ch, &mut p), LfbcStatus::Ok, "{}", last_error());
        let mut guesses = [0u64; 2];
        let mut err = -1;
        assert_eq!(lfbc_protocol_run(p, 5, 3, guesses.as_mut_ptr(), 2, &mut err), LfbcStatus::Ok);
        assert_eq!((guesses, err), ([5, 5], 0));
        let mut rep = LfbcTrialReport::default();
        assert_eq!(lfbc_protocol_estimate(p, 200, 0, &mut rep), LfbcStatus::Ok);
        assert_eq!(rep.trials, 200);
        assert!(rep.ci_low <= rep.p_hat && rep.p_hat <= rep.ci_high);
        assert!((rep.mean_fb_nats - 8f64.ln()).abs() < 1e-12);
        assert_eq!(lfbc_protocol_estimate(p, 10, 0, &mut rep), LfbcStatus::InvalidArgument);
        lfbc_protocol_free(p);

        let bad = CString::new(r#"{"L":2}"#).unwrap();
        let mut q = ptr::null_mut();
        assert_eq!(lfbc_protocol_new_json(bad.as_ptr(), ch, &mut q), LfbcStatus::Io);
        lfbc_channel_free(ch);
    }
}

#[test]
fn private_scheme_toy() {
    let ch = channel(1.0, &[1.0]);
    let doc = CString::new(r#"{"n":1,"K":1,"d":[1.0],"A":[[[0.0]]],"theta_variance":0.0833}"#).unwrap();
    let rates = [0.3];
    let mut s = ptr::null_mut();
    unsafe {
        let st = lfbc_private_scheme_new_json(doc.as_ptr(), ch, rates.as_ptr(), 1, &mut s);
        assert_eq!(st, LfbcStatus::Ok, "{}", last_error());
        let mut mi = 0.0;
        assert_eq!(lfbc_private_scheme_mutual_info(s, 0, &mut mi), LfbcStatus::Ok);
        assert!((mi - 0.5 * 2f64.ln()).abs() < 1e-15);
        let (mut bound, mut rate) = (0.0, 0.0);
        assert_eq!(lfbc_private_scheme_error_bound(s, 0, &mut bound), LfbcStatus::Ok);
        assert_eq!(lfbc_private_scheme_error_rate(s, 0, 2000, 1, &mut rate), LfbcStatus::Ok);
        assert!(rate <= bound);
        assert_eq!(lfbc_private_scheme_error_bound(s, 1, &mut bound), LfbcStatus::Dimension);
        lfbc_private_scheme_free(s);
        lfbc_channel_free(ch);
    }
}

#[test]
fn q_matches_landmark() {
    assert_eq!(lfbc_q(0.0), 0.5);
    assert!((lfbc_q(1.959963984540054) - 0.025).abs() < 1e-16);
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/lfbc.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["lfbc_channel_new", "lfbc_protocol_estimate", "LFBC_STATUS_OK", "typedef struct LfbcChannel LfbcChannel"] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    let lib = target_dir().join("liblfbc_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "lfbc.h"
int main(void) {
    double vars[2] = {1.0, 1.0};
    LfbcChannel *ch = NULL;
    if (lfbc_channel_new(1.0, vars, 2, &ch) != LFBC_STATUS_OK) return 1;
    double alphas[2], rate, cap;
    if (lfbc_alpha_star(ch, 1e-10, alphas, 2, &rate) != LFBC_STATUS_OK) return 2;
    if (lfbc_capacity(ch, &cap) != LFBC_STATUS_OK) return 3;
    if (!(rate < cap)) return 4;
    if (lfbc_channel_new(1.0, vars, 2, NULL) != LFBC_STATUS_NULL_POINTER) return 5;
    printf("%.12f\n", alphas[0]);
    lfbc_channel_free(ch);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler not runnable");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.719223593595");
}
