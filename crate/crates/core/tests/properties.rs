use ain_core::beamforming::{alignment_nodes, independence_report, phase_condition, BeamformerSet};
use ain_core::channel::{to_real_rotation, ChannelModel, ChannelRealization, Field, LinearNetwork, MagnitudeBounds};
use ain_core::linalg::CVec;
use ain_core::metrics::{residual_interference_ratio, sum_rate};
use ain_core::multihop::{effective_matrix, solve_gains, GainAssignment, NeutralizationResidual, SolverOptions};
use ain_core::rational::{
    build_config, chain_estimate, monomial_directions, relay_targets, run_rational_symbols, RationalSetup, RealChannel,
};
use ain_core::relay::isolate;
use ain_core::rng::{complex_gaussian, seeded};
use ain_core::transceiver::{AlignedLink, LinkConfig};
use ain_core::Complex64;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-10.0f64..10.0, -10.0f64..10.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn nonzero_complex() -> impl Strategy<Value = Complex64> {
    (0.05f64..20.0, 0.0..std::f64::consts::TAU).prop_map(|(r, p)| Complex64::from_polar(r, p))
}

fn time_varying(seed: u64, m: usize) -> ChannelRealization {
    ChannelRealization::sample(seed, 2, m, ChannelModel::TimeVarying, MagnitudeBounds::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_magnitudes_stay_in_bounds(
        seed in any::<u64>(),
        hops in 2usize..5,
        slots in 1usize..6,
        lo in 0.01f64..1.0,
        span in 1.0f64..100.0,
        model in prop_oneof![
            Just(ChannelModel::TimeVarying),
            Just(ChannelModel::ConstantComplex),
            Just(ChannelModel::ConstantReal)
        ],
    ) {
        let bounds = MagnitudeBounds::new(lo, lo * span).unwrap();
        let ch = ChannelRealization::sample(seed, hops, slots, model, bounds).unwrap();
        for hop in ch.hops() {
            for rx in 0..2 {
                for tx in 0..2 {
                    for z in hop.sequence(rx, tx) {
                        prop_assert!(z.norm() >= lo * (1.0 - 1e-12) && z.norm() <= lo * span * (1.0 + 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn real_rotation_matches_complex_product(c in nonzero_complex(), x in complex()) {
        let got = to_real_rotation(c).unwrap().apply([x.re, x.im]);
        let want = c * x;
        let err = ((got[0] - want.re).powi(2) + (got[1] - want.im).powi(2)).sqrt();
        prop_assert!(err <= 1e-12 * want.norm().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn time_varying_nodes_are_distinct(seed in any::<u64>(), m in 2usize..9) {
        let ch = time_varying(seed, m);
        let ext = |rx, tx| ch.extend(0, rx, tx).unwrap();
        let nodes = alignment_nodes(&ext(0, 0), &ext(0, 1), &ext(1, 0), &ext(1, 1));
        for j in 0..m {
            for i in 0..j {
                prop_assert!((nodes[i] - nodes[j]).norm() > 1e-12);
            }
        }
    }

    #[test]
    fn beamformers_have_vandermonde_rows(seed in any::<u64>(), m in 1usize..7) {
        let ch = time_varying(seed, m);
        let net = LinearNetwork::symbol_extension(&ch).unwrap();
        let beams = BeamformerSet::design(&net).unwrap();
        for (hop, vectors) in [(0, &beams.v1), (1, &beams.vr1)] {
            let ext = |rx, tx| ch.extend(hop, rx, tx).unwrap();
            let nodes = alignment_nodes(&ext(0, 0), &ext(0, 1), &ext(1, 0), &ext(1, 1));
            for (i, v) in vectors.iter().enumerate() {
                for (row, a) in nodes.iter().enumerate() {
                    let want = a.powu(i as u32);
                    prop_assert!((v[row] - want).norm() <= 1e-12 * want.norm().max(1.0));
                }
            }
        }
        let residuals = beams.alignment_residuals(&net);
        prop_assert!(residuals.iter().all(|r| *r <= 1e-12), "{residuals:?}");
    }

    #[test]
    fn phase_condition_matches_real_independence(seed in any::<u64>(), force in any::<bool>()) {
        let ch = ChannelRealization::sample(seed, 2, 1, ChannelModel::ConstantComplex, MagnitudeBounds::default()).unwrap();
        let mut f = ch.hop(0).matrix(0);
        let g = ch.hop(1).matrix(0);
        if force {
            // make p12 + p21 - p11 - p22 a multiple of pi
            let target = f[0][1].arg() + f[1][0].arg() - f[0][0].arg();
            f[1][1] = Complex64::from_polar(f[1][1].norm(), target);
        }
        let cond = phase_condition(&f, &g).unwrap();
        let net = LinearNetwork::real_rotation(&f, &g).unwrap();
        let beams = BeamformerSet::design(&net).unwrap();
        let report = independence_report(&beams.v1).unwrap();
        prop_assert_eq!(report.independent, cond.first_hop_ok);
        prop_assert_eq!(cond.first_hop_ok, !force);
    }

    #[test]
    fn isolation_is_linear(
        seed in any::<u64>(),
        m in 1usize..6,
        a in complex(),
        b in complex(),
    ) {
        let mut rng = seeded(seed);
        let cols: Vec<CVec> = (0..m).map(|_| CVec::from_fn(m, |_, _| complex_gaussian(&mut rng, 1.0))).collect();
        let y1 = CVec::from_fn(m, |_, _| complex_gaussian(&mut rng, 1.0));
        let y2 = CVec::from_fn(m, |_, _| complex_gaussian(&mut rng, 1.0));
        let Ok((i1, _)) = isolate(&y1, &cols) else { return Ok(()) };
        let (i2, _) = isolate(&y2, &cols).unwrap();
        let (mixed, _) = isolate(&(&y1 * a + &y2 * b), &cols).unwrap();
        let want = &i1 * a + &i2 * b;
        prop_assert!((&mixed - &want).norm() <= 1e-12 * want.norm().max(1.0));
    }

    #[test]
    fn sum_rate_is_monotone(
        sinrs in prop::collection::vec(0.0f64..1e6, 1..10),
        k in any::<prop::sample::Index>(),
        bump in 0.0f64..1e3,
        real in any::<bool>(),
    ) {
        let field = if real { Field::Real } else { Field::Complex };
        let mut higher = sinrs.clone();
        let i = k.index(sinrs.len());
        higher[i] += bump;
        prop_assert!(sum_rate(&higher, sinrs.len(), field) >= sum_rate(&sinrs, sinrs.len(), field));
    }

    #[test]
    fn chain_estimate_inverts_differences(x in prop::collection::vec(-1000i64..1000, 1..10)) {
        let diffs: Vec<i64> = (0..x.len()).map(|i| if i == 0 { x[0] } else { x[i] - x[i - 1] }).collect();
        prop_assert_eq!(chain_estimate(&diffs), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leakage_ignores_second_hop_scale(seed in 0u64..1000, m in 1usize..5, k in nonzero_complex()) {
        let ch = time_varying(seed, m);
        let base = LinearNetwork::symbol_extension(&ch).unwrap();
        let mut scaled = base.clone();
        for row in scaled.second.iter_mut() {
            for mat in row.iter_mut() {
                *mat *= k;
            }
        }
        let cfg = LinkConfig::new(1e4);
        let a = residual_interference_ratio(&AlignedLink::aligned(base, &cfg).unwrap()).unwrap();
        let b = residual_interference_ratio(&AlignedLink::aligned(scaled, &cfg).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn noiseless_rational_trials_are_exact(seed in 0u64..200, m in 1usize..4, draw in any::<u64>()) {
        let ch = ChannelRealization::sample(seed, 2, 1, ChannelModel::ConstantReal, MagnitudeBounds::default()).unwrap();
        let rc = RealChannel::from_realization(&ch).unwrap();
        let dirs = monomial_directions(&rc, m).unwrap();
        let p = 1e6;
        let cfg = build_config(m, 1.0, 0.2, p, &dirs).unwrap();
        let setup = RationalSetup::new(rc, cfg.clone(), 0.0).unwrap();
        let mut rng = seeded(draw);
        let q = cfg.q_max;
        let x1: Vec<i64> = (0..m).map(|_| rand::Rng::random_range(&mut rng, -q..=q)).collect();
        let x2: Vec<i64> = (0..m - 1).map(|_| rand::Rng::random_range(&mut rng, -q..=q)).collect();
        let t = run_rational_symbols(&setup, &x1, &x2, &mut rng).unwrap();
        let targets = relay_targets(&x1, &x2);
        prop_assert_eq!(&t.relay_decisions[0], &targets[0]);
        prop_assert_eq!(&t.relay_decisions[1], &targets[1]);
        prop_assert_eq!(&t.estimates[0], &x1);
        prop_assert_eq!(&t.estimates[1], &x2);
        prop_assert!(t.tx_power.iter().all(|&x| x <= p * (1.0 + 1e-12)));
    }

    #[test]
    fn effective_matrix_is_linear_in_each_gain(seed in any::<u64>(), hops in 3usize..6, pick in any::<prop::sample::Index>()) {
        let ch = ChannelRealization::sample(seed, hops, 1, ChannelModel::ConstantComplex, MagnitudeBounds::default()).unwrap();
        let mut rng = seeded(seed);
        let gains = GainAssignment::generic(hops - 1, &mut rng);
        let slot = pick.index(2 * (hops - 1));
        let at = |t: f64| {
            let mut g = gains.clone();
            g.layers[slot / 2][slot % 2] *= t;
            effective_matrix(&ch, &g).unwrap()
        };
        let (e1, e2, e3) = (at(1.0), at(2.0), at(3.0));
        for r in 0..2 {
            for c in 0..2 {
                let scale = e1[r][c].norm().max(e3[r][c].norm()).max(1e-300);
                prop_assert!(((e3[r][c] - e2[r][c]) - (e2[r][c] - e1[r][c])).norm() <= 1e-10 * scale.max(e2[r][c].norm()));
            }
        }
    }

    #[test]
    fn solver_residual_is_reproducible(seed in 0u64..10_000) {
        let ch = ChannelRealization::sample(seed, 3, 1, ChannelModel::ConstantComplex, MagnitudeBounds::default()).unwrap();
        let rep = solve_gains(&ch, &GainAssignment::unit(2), &SolverOptions { jitter_seed: seed, ..Default::default() }).unwrap();
        let again = NeutralizationResidual::of(&effective_matrix(&ch, &rep.gains).unwrap());
        prop_assert!((again.norm() - rep.residual).abs() <= 1e-12);
    }
}
