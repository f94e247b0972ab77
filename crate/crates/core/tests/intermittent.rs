mod common;

use lfbc::channel::{make_channel, NoiseBlock};
use lfbc::intermittent::{
    build_codebook, calibrate_gammas, classify_error_events, decay_order_diagnostic, decay_order_diagnostic_deep,
    feedback_budget,
    gamma_recursion_log, nearest_codeword, trial_outcome, AnalyticModel, Codebook, DecayPoint, DeepDecayPoint, IntermittentConfig, Protocol,
};
use lfbc::montecarlo::{estimate_error, RunningMean};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{q_oracle, reference_config};

fn two_phase(power: f64, gamma1: f64) -> (IntermittentConfig, Protocol) {
    let mut cfg = reference_config(power);
    cfg.gamma = vec![gamma1, 0.5 * gamma1];
    let ch = make_channel(power, &[1.0, 2.0]).unwrap();
    let p = Protocol::new(&cfg, &ch).unwrap();
    (cfg, p)
}

#[test]
fn noiseless_run_is_silent_after_phase_one() {
    let (cfg, p) = two_phase(1.0, 0.2);
    let n1 = p.schedule()[0];
    for m in [0, 17, 63] {
        let tr = p.run_with_noise(m, &NoiseBlock::zeros(2, cfg.n)).unwrap();
        assert_eq!(tr.phases[0].guesses, vec![m, m]);
        assert!(!tr.phases[1].retransmit);
        assert!(tr.phases[1].transmitted.iter().all(|&x| x == 0.0));
        assert_eq!(tr.phases[1].fired, vec![false, false]);
        assert!((tr.energy - n1 as f64 * cfg.power_budget).abs() < 1e-9);
        assert_eq!(tr.final_guesses, vec![m, m]);
        assert!(classify_error_events(&tr, m).iter().all(|e| !e.any()));
    }
}

#[test]
fn forced_phase_one_error_is_repaired() {
    let (cfg, p) = two_phase(1.0, 0.2);
    let n1 = p.schedule()[0];
    let (m, wrong) = (5u64, 41usize);
    // receiver 1 sees codeword 41 exactly during phase 1, nothing else is noisy
    let cb = p.codebook(1);
    let mut z = DMatrix::zeros(2, cfg.n);
    for i in 0..n1 {
        z[(0, i)] = cb.codeword(wrong)[i] - cb.codeword(m as usize)[i];
    }
    let tr = p.run_with_noise(m, &NoiseBlock::from_samples(z)).unwrap();
    assert_eq!(tr.phases[0].guesses, vec![wrong as u64, m]);
    let ph2 = &tr.phases[1];
    assert!(ph2.retransmit);
    assert_eq!(ph2.transmitted[0], (1.0f64 / 0.2).sqrt());
    assert_eq!(ph2.fired, vec![true, true]);
    assert_eq!(ph2.decoded, vec![Some(m), Some(m)]);
    assert_eq!(tr.final_guesses, vec![m, m]);
    assert!(!tr.error());

    let len = p.codebook(2).len() as f64;
    let want = n1 as f64 * 1.0 + 1.0 / 0.2 + len * 1.0 / 0.2;
    assert!((tr.energy - want).abs() < 1e-9 * want);
    let ev = classify_error_events(&tr, m);
    assert_eq!(ev.len(), 1);
    assert!(!ev[0].any());
}

#[test]
fn forced_signal_slot_noise_is_a_false_alarm() {
    let (cfg, p) = two_phase(1.0, 0.2);
    let n1 = p.schedule()[0];
    let mut z = DMatrix::zeros(2, cfg.n);
    z[(1, n1)] = 10.0;
    let m = 9;
    let tr = p.run_with_noise(m, &NoiseBlock::from_samples(z)).unwrap();
    assert!(!tr.phases[1].retransmit);
    assert_eq!(tr.phases[1].fired, vec![false, true]);
    let ev = classify_error_events(&tr, m)[0];
    assert!(ev.e1 && !ev.e2 && !ev.e3);
    let o = trial_outcome(&tr);
    assert!(o.e1 && !o.e2 && !o.e3);
}

#[test]
fn missed_signal_is_tagged_e2() {
    let (cfg, p) = two_phase(1.0, 0.2);
    let n1 = p.schedule()[0];
    let cb = p.codebook(1);
    let m = 3u64;
    let mut z = DMatrix::zeros(2, cfg.n);
    for i in 0..n1 {
        z[(1, i)] = cb.codeword(0)[i] - cb.codeword(m as usize)[i];
    }
    z[(1, n1)] = -10.0;
    let tr = p.run_with_noise(m, &NoiseBlock::from_samples(z)).unwrap();
    assert!(tr.error());
    let ev = classify_error_events(&tr, m)[0];
    assert!(!ev.e1 && ev.e2 && !ev.e3);
}

#[test]
fn feedback_examples() {
    let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
    let cfg = IntermittentConfig {
        phases: 2,
        n: 400,
        epsilon: 0.25,
        message_count: 64,
        power_budget: 1.0,
        fb_rate: 64f64.ln() / 400.0,
        gamma: vec![0.1, 0.05],
        codebook_seeds: vec![],
    };
    let tr = Protocol::new(&cfg, &ch).unwrap().run_seeded(4).unwrap();
    let fb = feedback_budget(&tr, &cfg);
    assert_eq!(fb.used, vec![64f64.ln(); 2]);
    assert!(fb.pass);
    assert!(tr.phases[0].feedback.iter().all(Option::is_some));
    assert!(tr.phases[1].feedback.iter().all(Option::is_none));

    let base = cfg.baseline();
    let tr = Protocol::new(&base, &ch).unwrap().run_seeded(4).unwrap();
    assert_eq!(feedback_budget(&tr, &base).used, vec![0.0; 2]);

    let three = IntermittentConfig {
        phases: 3,
        message_count: 16,
        fb_rate: 2.0 * 16f64.ln() / 400.0,
        gamma: vec![0.2, 0.1, 0.05],
        ..cfg
    };
    let tr = Protocol::new(&three, &ch).unwrap().run_seeded(4).unwrap();
    let fb = feedback_budget(&tr, &three);
    assert!(fb.used.iter().all(|&u| (u - 2.0 * 16f64.ln()).abs() < 1e-12));
    assert!(fb.pass);
}

#[test]
fn energy_is_the_sum_of_transmitted_squares() {
    let (_, p) = two_phase(0.5, 0.3);
    for seed in 0..200 {
        let tr = p.run_seeded(seed).unwrap();
        let direct: f64 = tr.phases.iter().flat_map(|ph| &ph.transmitted).map(|x| x * x).sum();
        assert!((tr.energy - direct).abs() < 1e-9 * direct);
        for ph in &tr.phases {
            assert_eq!(ph.transmitted.len(), ph.end - ph.start);
        }
    }
}

#[test]
fn seeded_runs_are_reproducible() {
    let (_, p) = two_phase(0.3, 0.4);
    let a = p.run_seeded(77).unwrap();
    let b = p.run_seeded(77).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_ne!(a, p.run_seeded(78).unwrap());
}

#[test]
fn retransmission_codebook_has_boosted_power() {
    let (cfg, p) = two_phase(0.8, 0.25);
    let cb = p.codebook(2);
    assert_eq!(cb.len(), 29);
    assert!((cb.power() - 0.8 / 0.25).abs() < 1e-15);
    assert_eq!(p.threshold(2), 0.5 * (0.8f64 / 0.25).sqrt());
    assert_eq!(p.codebook(1).len(), 90);
    assert_eq!(cfg.baseline().phases, 1);
}

#[test]
fn codebook_ensemble_power() {
    let p = 2.5;
    let mut all = RunningMean::default();
    for seed in 0..1000 {
        let cb = build_codebook(4, 10, p, seed).unwrap();
        for m in 0..4 {
            for x in cb.codeword(m) {
                all.push(x * x);
            }
        }
    }
    assert!((all.mean() - p).abs() < 0.02 * p);
    let a = build_codebook(2, 1, 1.0, 9).unwrap();
    assert_eq!(a.count(), 2);
    assert_eq!(a.len(), 1);
    assert_eq!(a, build_codebook(2, 1, 1.0, 9).unwrap());
}

#[test]
fn nearest_codeword_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..200 {
        let m = rng.random_range(2..40u64);
        let len = rng.random_range(1..12usize);
        let cb = build_codebook(m, len, 1.0, trial).unwrap();
        let y: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let dists: Vec<f64> = (0..m as usize)
            .map(|i| cb.codeword(i).iter().zip(&y).map(|(c, v)| (c - v).powi(2)).sum())
            .collect();
        let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        let want = dists.iter().position(|&d| d == min).unwrap();
        assert_eq!(nearest_codeword(&cb, &y).unwrap(), want);
    }
    let cb = Codebook::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 2.0]]).unwrap();
    assert_eq!(nearest_codeword(&cb, &[0.0, 0.0]).unwrap(), 0);
    assert_eq!(nearest_codeword(&cb, &[0.0, 2.0]).unwrap(), 2);
}

#[test]
fn recursion_over_n_grid_has_positive_decay_slope() {
    let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
    let zeta = 0.02;
    let points: Vec<DecayPoint> = (1..=10)
        .map(|i| {
            let n = 100.0 * i as f64;
            let lg = gamma_recursion_log(&[-zeta * n, f64::NEG_INFINITY], &ch, 1.0).unwrap();
            DecayPoint { n, log_gamma: lg[1] }
        })
        .collect();
    assert!(points.windows(2).all(|w| w[1].log_gamma < w[0].log_gamma));
    let rep = decay_order_diagnostic(&points, 2).unwrap();
    assert!(rep.slope > 0.0);
    assert!(!rep.sub_order);
}

#[test]
fn small_gamma_recursion_matches_q_oracle() {
    let ch = make_channel(1.0, &[1.0]).unwrap();
    let lg = gamma_recursion_log(&[0.1f64.ln(), f64::NEG_INFINITY], &ch, 1.0).unwrap();
    let want = 2.0 * q_oracle(10f64.sqrt() / 2.0);
    assert!((lg[1].exp() - want).abs() < 1e-10 * want);
}

// At n = 40 the phase-1 code is short enough that the error signal is well
// above the noise, and two phases beat one at the same power and length.
#[test]
fn two_phases_help_at_short_blocklength() {
    let ch = make_channel(1.0, &[1.0, 1.0]).unwrap();
    let mut cfg = reference_config(1.0);
    cfg.n = 40;
    cfg.fb_rate = 64f64.ln() / 40.0;
    cfg.gamma = calibrate_gammas(&cfg, &ch, 4000, 1 << 40).unwrap();
    cfg.validate().unwrap();
    let run = |c: &IntermittentConfig| {
        let p = Protocol::new(c, &ch).unwrap();
        estimate_error(|s| Ok(trial_outcome(&p.run_seeded(s)?)), 20_000, 500).unwrap()
    };
    let two = run(&cfg);
    let one = run(&cfg.baseline());
    assert!(two.p_hat < one.p_hat, "{} vs {}", two.p_hat, one.p_hat);
    assert!(two.disjoint_from(&one));
    assert!(two.mean_power <= cfg.power_budget + 2.0 * two.power_stderr);
}

#[test]
fn exponent_seeded_recursion_decays_at_phase_order() {
    let p = 4.0;
    let ch = make_channel(p, &[1.0, 1.0]).unwrap();
    let grid: Vec<usize> = (2..=9).map(|i| 100 * i).collect();

    let two = AnalyticModel::new(ch.clone(), 0.1, 0.25, 2).unwrap();
    let plain: Vec<DecayPoint> = grid
        .iter()
        .map(|&n| DecayPoint { n: n as f64, log_gamma: two.log_gammas(n, None).unwrap()[1] })
        .collect();
    let deep: Vec<DeepDecayPoint> = grid
        .iter()
        .map(|&n| DeepDecayPoint { n: n as f64, log_neg_log_gamma: two.log_neg_log_gammas(n, None).unwrap()[1] })
        .collect();
    let a = decay_order_diagnostic(&plain, 2).unwrap();
    let b = decay_order_diagnostic_deep(&deep, 2).unwrap();
    assert!(a.slope > 0.0 && !a.sub_order);
    assert!((a.slope - b.slope).abs() < 1e-12);

    // ln gamma_3 underflows; its ln(-ln) level is -ln gamma_2 + ln(P / 8)
    let three = AnalyticModel::new(ch, 0.1, 0.25, 3).unwrap();
    let mut points = Vec::new();
    for &n in &grid {
        let u = three.log_neg_log_gammas(n, None).unwrap();
        let lg2 = three.log_gammas(n, None).unwrap()[1];
        assert!(((u[2] - (-lg2 + (p / 8.0).ln())) / u[2]).abs() < 1e-12);
        points.push(DeepDecayPoint { n: n as f64, log_neg_log_gamma: u[2] });
    }
    let rep = decay_order_diagnostic_deep(&points, 3).unwrap();
    assert!(rep.usable.iter().all(|&u| u));
    assert!(rep.slope > 0.0 && rep.r_squared > 0.95 && !rep.sub_order);
}
