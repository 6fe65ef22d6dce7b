mod common;

use bird::bench::{mix_at_snr, nmse};
use bird::dictionary::{Atom, AtomId, SubdictionarySelection};
use bird::io::{load_signal, save_signal, SignalFormat};
use bird::pursuit::{average_estimates, bird, run_single_pursuit, BirdParams, PursuitConfig};
use bird::rng::derive_stream;
use bird::signal::{MultichannelSignal, Signal};
use bird::stopping::{
    erfinv, lambda_threshold, max_order_cdf, NoiseProjectionModel, ThresholdSpec, ThresholdVariant,
};
use bird::structured::{sbird, select_structured, structured_stop_stat};
use common::*;
use proptest::prelude::*;

const SCALE_SETS: [&[usize]; 4] = [&[8], &[16, 32], &[8, 32, 64], &[4, 16, 128]];

fn dict_strategy() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (0..SCALE_SETS.len(), 1usize..=256, 1usize..=9, any::<u64>())
        .prop_filter("signal must fit the largest scale", |(s, n, _, _)| {
            *n >= *SCALE_SETS[*s].iter().max().unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn analysis_matches_brute_force((s, n, g, seed) in dict_strategy()) {
        let d = dict(SCALE_SETS[s], n, g);
        let mut rng = derive_stream(seed, 1);
        let x = gaussian(n, &mut rng);
        let sel = d.draw_subdictionary(&mut rng);
        let table = d.analyze(&sel, &x).unwrap();
        let fast: Vec<f64> = table.iter().map(|(_, c)| c).collect();
        prop_assert_eq!(fast.len(), d.subdictionary_len());
        prop_assert!(rel_err(&fast, &brute_force(&d, &table, &x)) < 1e-10);
    }

    #[test]
    fn synthesis_is_the_adjoint((s, n, g, seed) in dict_strategy()) {
        let d = dict(SCALE_SETS[s], n, g);
        let mut rng = derive_stream(seed, 2);
        let x = gaussian(n, &mut rng);
        let sel = d.draw_subdictionary(&mut rng);
        let table = d.analyze(&sel, &x).unwrap();
        let weights: Vec<(AtomId, f64)> = table
            .iter()
            .map(|(a, _)| (a.id(), StandardNormal.sample(&mut rng)))
            .collect();
        let lhs: f64 = table.iter().zip(&weights).map(|((_, c), (_, w))| c * w).sum();
        let rhs = x.dot(&d.reconstruct(&weights).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn every_shifted_basis_preserves_energy((s, n, g, seed) in dict_strategy()) {
        let d = dict(SCALE_SETS[s], n, g);
        let mut rng = derive_stream(seed, 3);
        let x = gaussian(n, &mut rng);
        let offset = rng.below(g);
        let table = d.analyze(&SubdictionarySelection::uniform(&d, offset), &x).unwrap();
        for scale in 0..d.n_scales() {
            let e: f64 = table.scale_coeffs(scale).iter().map(|c| c * c).sum();
            prop_assert!((e - x.energy()).abs() <= 1e-10 * x.energy());
        }
    }

    #[test]
    fn atom_ids_round_trip(scale_idx in 0usize..256, off in 0usize..65536, frame in 0usize..(1 << 20), bin in 0usize..(1 << 20)) {
        let a = Atom { scale_idx, shift_offset: off, time_index: frame, freq_bin: bin };
        prop_assert_eq!(Atom::from_id(a.id()), a);
    }

    #[test]
    fn energy_decays_by_squared_coefficient(seed in any::<u64>(), threshold in 0.0f64..0.3) {
        let d = dict(&[16, 64], 128, 4);
        let mut rng = derive_stream(seed, 4);
        let y = gaussian(128, &mut rng);
        let cfg = PursuitConfig { threshold, max_iterations: 40, residual_floor: 1e-12 };
        let run = run_single_pursuit(&y, &d, &cfg, &mut rng).unwrap();
        prop_assert_eq!(run.residual_energies.len(), run.iterations + 1);
        for (n, (_, c)) in run.selections.iter().enumerate() {
            let (before, after) = (run.residual_energies[n], run.residual_energies[n + 1]);
            prop_assert!((after - (before - c * c)).abs() <= 1e-10 * before);
            prop_assert!(after <= before);
            prop_assert!((after / before - (1.0 - run.coherences[n].powi(2))).abs() <= 1e-10);
            prop_assert!(run.coherences[n] > threshold);
        }
        let rebuilt = d.reconstruct(&run.selections).unwrap();
        prop_assert!(rel_err(rebuilt.samples(), run.estimate.samples()) <= 1e-10);
    }

    #[test]
    fn bird_is_the_mean_of_its_runs(seed in any::<u64>(), runs in 1usize..6) {
        let d = dict(&[16, 64], 128, 4);
        let y = gaussian_seeded(128, seed);
        let params = BirdParams { runs, master_seed: seed, p: 0.01, ..BirdParams::default() };
        let res = bird(&y, &d, &params).unwrap();
        let n = y.len();
        for i in 0..n {
            let mean = res.runs.iter().map(|r| r.estimate.samples()[i]).sum::<f64>() / runs as f64;
            prop_assert!((res.estimate.samples()[i] - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        }
        let again = average_estimates(res.runs.iter().map(|r| r.estimate.samples()));
        prop_assert_eq!(again, res.estimate);
    }

    #[test]
    fn structured_selection_matches_exhaustive_search(
        (c, k) in (1usize..6).prop_flat_map(|c| (Just(c), 1..=c)),
        slack in 0.0f64..0.99,
        seed in any::<u64>(),
    ) {
        let l = ((k as f64 + slack) / c as f64).min(1.0);
        let d = dict(&[8, 16], 32, 3);
        let mut rng = derive_stream(seed, 5);
        let sel = d.draw_subdictionary(&mut rng);
        let tables: Vec<_> = (0..c)
            .map(|_| d.analyze(&sel, &gaussian(32, &mut rng)).unwrap())
            .collect();
        let (atom, active) = select_structured(&tables, l).unwrap();

        let score = |a: &Atom| {
            let mut p: Vec<f64> = tables.iter().map(|t| t.get(a).unwrap().powi(2)).collect();
            p.sort_by(|x, y| y.total_cmp(x));
            p[..k].iter().sum::<f64>() / k as f64
        };
        let best = tables[0].iter().map(|(a, _)| score(&a)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(score(&atom), best);
        prop_assert_eq!(active.len(), k);
        let power = |ch: usize| tables[ch].get(&atom).unwrap().powi(2);
        let weakest_active = active.iter().map(|&ch| power(ch)).fold(f64::INFINITY, f64::min);
        for ch in (0..c).filter(|ch| !active.contains(ch)) {
            prop_assert!(power(ch) <= weakest_active);
        }
    }

    #[test]
    fn structured_score_is_monotone_in_l(values in proptest::collection::vec(0.0f64..1.0, 1..12)) {
        let c = values.len();
        let mut last = f64::INFINITY;
        for k in 1..=c {
            let stat = structured_stop_stat(&values, k as f64 / c as f64).unwrap();
            prop_assert!(stat <= last + 1e-15);
            last = stat;
        }
        let max = values.iter().cloned().fold(0.0, f64::max);
        prop_assert_eq!(structured_stop_stat(&values, 1.0 / c as f64).unwrap(), max);
    }

    #[test]
    fn one_channel_structured_equals_bird(seed in any::<u64>(), runs in 1usize..5) {
        let d = dict(&[16, 64], 128, 4);
        let y = gaussian_seeded(128, seed);
        let params = BirdParams { runs, master_seed: seed, p: 0.05, ..BirdParams::default() };
        let mono = bird(&y, &d, &params).unwrap();
        let multi = sbird(&MultichannelSignal::mono(y), &d, &params, 1.0).unwrap();
        prop_assert_eq!(multi.estimate.channel(0).samples(), mono.estimate.samples());
    }

    #[test]
    fn raw_and_csv_round_trip(n in 1usize..40, c in 1usize..4, seed in any::<u64>(), header in any::<bool>()) {
        let mut rng = derive_stream(seed, 6);
        let sig = MultichannelSignal::new((0..c).map(|_| gaussian(n, &mut rng)).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (name, fmt) in [("s.bin", SignalFormat::RawF64), ("s.csv", SignalFormat::Csv)] {
            let path = dir.path().join(name);
            save_signal(&sig, &path, fmt, header).unwrap();
            prop_assert_eq!(&load_signal(&path, fmt, header).unwrap(), &sig);
        }
    }

    #[test]
    fn nmse_ignores_common_scaling(seed in any::<u64>(), scale in 1e-6f64..1e6) {
        let mut rng = derive_stream(seed, 7);
        let x = MultichannelSignal::mono(gaussian(50, &mut rng));
        let e = MultichannelSignal::mono(gaussian(50, &mut rng));
        let scaled = |s: &MultichannelSignal| MultichannelSignal::mono(
            Signal::new(s.channel(0).samples().iter().map(|v| v * scale).collect()).unwrap(),
        );
        let a = nmse(&e, &x).unwrap();
        let b = nmse(&scaled(&e), &scaled(&x)).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn mixing_recovers_the_requested_snr(seed in any::<u64>(), snr in -20.0f64..40.0, c in 1usize..4) {
        let mut rng = derive_stream(seed, 8);
        let x = MultichannelSignal::new((0..c).map(|_| gaussian(64, &mut rng)).collect()).unwrap();
        let w = MultichannelSignal::new((0..c).map(|_| gaussian(64, &mut rng)).collect()).unwrap();
        let y = mix_at_snr(&x, &w, snr).unwrap();
        let noise_energy: f64 = y.channels().iter().zip(x.channels())
            .map(|(a, b)| a.samples().iter().zip(b.samples()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
            .sum();
        prop_assert!((10.0 * (x.energy() / noise_energy).log10() - snr).abs() < 1e-9);
    }

    #[test]
    fn order_statistic_cdf_is_a_power(z in 0.0f64..0.5, k in 1usize..40) {
        let one = max_order_cdf(&NoiseProjectionModel::new(64, 1), z);
        let many = max_order_cdf(&NoiseProjectionModel::new(64, k), z);
        prop_assert_eq!(many, one.powi(k as i32));
    }
}

use rand_distr::{Distribution, StandardNormal};

#[test]
fn erfinv_inverts_erf_on_a_grid() {
    for i in 0..1000 {
        let x = -3.0 + 6.0 * i as f64 / 999.0;
        let y = libm::erf(x);
        assert!((erfinv(y).unwrap() - x).abs() < 1e-9, "x = {x}");
    }
}

#[test]
fn thresholds_are_monotone_in_p_and_m() {
    for variant in [
        ThresholdVariant::Printed,
        ThresholdVariant::Quantile,
        ThresholdVariant::Corrected,
    ] {
        let at = |p: f64, m: usize| {
            lambda_threshold(&ThresholdSpec {
                n: 1024,
                m,
                p,
                variant,
            })
            .unwrap()
        };
        let by_p: Vec<f64> = (1..=8).map(|e| at(10f64.powi(-e), 4096)).collect();
        assert!(by_p.windows(2).all(|w| w[1] > w[0]), "{variant:?}");
        let by_m: Vec<f64> = (10..=16).map(|e| at(1e-3, 1 << e)).collect();
        assert!(by_m.windows(2).all(|w| w[1] > w[0]), "{variant:?}");
    }
}

#[test]
fn documented_atom_id_example() {
    let a = Atom {
        scale_idx: 2,
        shift_offset: 5,
        time_index: 3,
        freq_bin: 17,
    };
    assert_eq!(a.id().0, 144120685637140497);
}
