use lfbc::bounds::{capacity, effective_noises, linfb_upper_bound, prop2_envelope, solve_alpha_star, DEFAULT_TOL};
use lfbc::channel::make_channel;
use lfbc::intermittent::{build_codebook, phase_schedule};
use lfbc::linfb::MessageLattice;
use lfbc::montecarlo::wilson_interval;
use lfbc::report::fmt_sig;
use lfbc::special::{log_q, q};
use proptest::prelude::*;

fn variances() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..10.0, 1..9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn channel_sorts_and_records_permutation(vars in variances(), p in 0.1f64..100.0) {
        let ch = make_channel(p, &vars).unwrap();
        let sorted = ch.noise_variances();
        prop_assert!(sorted.windows(2).all(|w| w[0] >= w[1]));
        let mut perm = ch.permutation().to_vec();
        for (k, &orig) in perm.iter().enumerate() {
            prop_assert_eq!(sorted[k], vars[orig - 1]);
        }
        perm.sort_unstable();
        prop_assert_eq!(perm, (1..=vars.len()).collect::<Vec<_>>());
    }

    #[test]
    fn effective_noises_shrink(vars in variances()) {
        let ch = make_channel(1.0, &vars).unwrap();
        let n = effective_noises(&ch).values;
        prop_assert!((n[0] - ch.noise_variance(0)).abs() <= 1e-15 * n[0]);
        prop_assert!(n.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn alpha_star_solves_and_orders_bounds(vars in prop::collection::vec(0.1f64..10.0, 2..9), p in 0.1f64..100.0) {
        let ch = make_channel(p, &vars).unwrap();
        let sol = solve_alpha_star(&ch, DEFAULT_TOL).unwrap();
        prop_assert!(sol.max_residual() < 1e-10);
        prop_assert!(sol.alphas.iter().all(|&a| a > 0.0 && a < 1.0));
        let b = linfb_upper_bound(&ch).unwrap();
        prop_assert!(b < capacity(&ch));
        prop_assert!(b <= prop2_envelope(&ch) + 1e-12);
    }

    #[test]
    fn q_is_a_tail_probability(x in -40.0f64..40.0, dx in 0.001f64..5.0) {
        prop_assert!((q(x) + q(-x) - 1.0).abs() < 1e-15);
        prop_assert!(q(x + dx) <= q(x));
        let lq = log_q(x);
        prop_assert!(lq <= 0.0);
        if q(x) > 1e-300 {
            prop_assert!((lq - q(x).ln()).abs() <= 1e-12 * lq.abs().max(1.0));
        }
    }

    #[test]
    fn fmt_sig_keeps_twelve_digits(m in -1.0f64..1.0, e in -30i32..30) {
        let x = m * 10f64.powi(e);
        let back: f64 = fmt_sig(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs());
    }

    #[test]
    fn wilson_brackets_the_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let k = (frac * trials as f64).round() as u64;
        let (lo, hi) = wilson_interval(k, trials);
        let p = k as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }

    #[test]
    fn schedules_cover_the_block(n in 2usize..2000, eps in 0.01f64..0.99, phases in 1usize..6) {
        if let Ok(s) = phase_schedule(n, eps, phases) {
            prop_assert_eq!(s.len(), phases);
            prop_assert_eq!(*s.last().unwrap(), n);
            let mut prev = 0;
            for b in s {
                prop_assert!(b >= prev + 2);
                prev = b;
            }
        }
    }

    #[test]
    fn codewords_have_exact_power(count in 2u64..20, len in 1usize..50, p in 0.01f64..100.0, seed: u64) {
        let cb = build_codebook(count, len, p, seed).unwrap();
        for m in 0..cb.count() {
            let avg = cb.codeword(m).iter().map(|x| x * x).sum::<f64>() / len as f64;
            prop_assert!((avg - p).abs() < 1e-12 * p);
        }
    }

    #[test]
    fn lattice_points_decode_to_themselves(count in 1u64..5000) {
        let lat = MessageLattice::new(count).unwrap();
        for m in [0, count / 2, count - 1] {
            prop_assert_eq!(lat.nearest(lat.point(m)), m);
        }
    }
}
