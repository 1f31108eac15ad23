use num_complex::Complex64;
use proptest::prelude::*;

use irs_core::agent::{build_state, unpack_state, Normalization, ReplayBuffer, MdpAction, MdpState, Transition};
use irs_core::codebook::{dpic_apply, ra_update};
use irs_core::harness::ExperimentConfig;
use irs_core::metaatom::{reflection_coefficient, CapacitanceBounds, CircuitProfile, Codeword};
use irs_core::protocol::{time_overhead, FeedbackScheme, LinkBudget, Timings};
use irs_core::rng::SeedTree;

fn bounds() -> CapacitanceBounds {
    CapacitanceBounds::new(0.4e-12, 2.7e-12).unwrap()
}

proptest! {
    #[test]
    fn config_json_round_trip(
        seed in any::<u64>(),
        n_bs in 1usize..8,
        n_groups in 1usize..12,
        per_group in 1usize..20,
        rho in 0.0f64..=1.0,
        power_dbm in -10.0f64..40.0,
        episodes in 1usize..5000,
        hidden in prop::collection::vec(1usize..512, 1..4),
        decay in 0.5f64..1.0,
    ) {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = seed;
        cfg.n_bs = n_bs;
        cfg.n_groups = n_groups;
        cfg.n_irs = n_groups * per_group;
        cfg.rho = rho;
        cfg.power_dbm = power_dbm;
        cfg.training.episodes = episodes;
        cfg.training.hidden = hidden;
        cfg.training.epsilon_decay = decay;
        let back = ExperimentConfig::from_json_str(&cfg.to_json_string()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn reflection_is_passive(c_pf in 0.4f64..2.7, theta in 0.0f64..=90.0) {
        let profile = CircuitProfile::placeholder(5.195e9);
        let g = reflection_coefficient(c_pf * 1e-12, theta, &profile).unwrap();
        prop_assert!(g.norm() <= 1.0 + 1e-9);
    }

    #[test]
    fn dpic_stays_in_bounds_and_counts_clips(
        q in prop::collection::vec(0.4f64..2.7, 1..10),
        d in prop::collection::vec(-0.6f64..0.6, 10),
    ) {
        let b = bounds();
        let q = Codeword::new(q.iter().map(|v| v * 1e-12).collect());
        let d: Vec<f64> = d[..q.len()].iter().map(|v| v * 1e-12).collect();
        let (next, clipped) = dpic_apply(&q, &d, &b);
        prop_assert!(next.within(&b));
        let outside = q.values().iter().zip(&d).filter(|(c, s)| !b.contains(*c + *s)).count();
        prop_assert_eq!(clipped, outside);
    }

    #[test]
    fn ra_stays_near_the_selected_codeword(
        q in prop::collection::vec(0.4f64..2.7, 1..10),
        delta_pf in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let b = bounds();
        let q = Codeword::new(q.iter().map(|v| v * 1e-12).collect());
        let delta = delta_pf * 1e-12;
        let mut rng = SeedTree::new(seed).stream("ra", 0);
        for next in ra_update(&q, 6, delta, &b, &mut rng) {
            prop_assert!(next.within(&b));
            for (a, c) in next.values().iter().zip(q.values()) {
                prop_assert!((a - c).abs() <= delta * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn overhead_grows_with_codebook_size(m in 1usize..40, bits in 1usize..12) {
        let t = Timings::new(5e-3, 100e-6, 0.1).unwrap();
        for scheme in [FeedbackScheme::RandomAdjacency, FeedbackScheme::Rvq, FeedbackScheme::Dpic { directions: 1 << bits }] {
            let a = time_overhead(scheme, m, &t, 10e6, true);
            let b = time_overhead(scheme, m + 1, &t, 10e6, true);
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!(b > a);
            }
        }
    }

    #[test]
    fn replay_keeps_the_newest(capacity in 1usize..20, pushes in 0usize..60) {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            buf.push(Transition {
                state: MdpState(vec![i as f64, 0.0]),
                action: MdpAction(vec![0.5]),
                reward: i as f64,
                next_state: MdpState(vec![i as f64 + 1.0, 0.0]),
            });
        }
        prop_assert_eq!(buf.len(), pushes.min(capacity));
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        let expected: Vec<f64> = (pushes.saturating_sub(capacity)..pushes).map(|i| i as f64).collect();
        prop_assert_eq!(rewards, expected);
    }

    #[test]
    fn state_normalization_inverts(
        h in prop::collection::vec((-1e-4f64..1e-4, -1e-4f64..1e-4), 1..6),
        q in prop::collection::vec(0.4f64..2.7, 1..10),
    ) {
        let budget = LinkBudget::new(0.1, 1e-11, 10e6).unwrap();
        let h: Vec<Complex64> = h.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        let q = Codeword::new(q.iter().map(|v| v * 1e-12).collect());
        let norm = Normalization::new(&budget, h.len(), q.len());
        let s = build_state(&h, &q, &norm, h.len(), q.len()).unwrap();
        let (h2, q2) = unpack_state(&s, &norm, h.len());
        for (a, b) in h.iter().zip(&h2) {
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }
        for (a, b) in q.values().iter().zip(q2.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }
}
