use bird::bench::*;
use bird::dictionary::{Dictionary, DictionarySpec};
use bird::pursuit::{with_jobs, BirdParams};
use bird::rng::derive_stream;
use bird::signal::{MultichannelSignal, Signal};
use bird::structured::sbird;

fn sub(a: &MultichannelSignal, b: &MultichannelSignal) -> MultichannelSignal {
    MultichannelSignal::new(
        a.channels()
            .iter()
            .zip(b.channels())
            .map(|(x, y)| {
                Signal::new(
                    x.samples()
                        .iter()
                        .zip(y.samples())
                        .map(|(u, v)| u - v)
                        .collect(),
                )
                .unwrap()
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn ar_one_has_the_expected_lag_one_correlation() {
    let spec = NoiseSpec::ar(vec![0.9]).unwrap();
    let w = gen_noise(&spec, 100_000, 1, &mut derive_stream(11, 0)).unwrap();
    let x = w.channel(0).samples();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let c1: f64 = x.windows(2).map(|p| (p[0] - mean) * (p[1] - mean)).sum();
    assert!((c1 / c0 / 0.9 - 1.0).abs() < 0.05, "rho = {}", c1 / c0);
}

#[test]
fn evoked_channels_share_one_support() {
    let dict = Dictionary::new(DictionarySpec::with_defaults(512)).unwrap();
    let y = gen_evoked(&dict, 6, 3, &mut derive_stream(5, 0)).unwrap();
    for i in 0..512 {
        let nonzero = y
            .channels()
            .iter()
            .filter(|c| c.samples()[i].abs() > 1e-14)
            .count();
        assert!(
            nonzero == 0 || nonzero == 6,
            "sample {i}: {nonzero} channels active"
        );
    }
    let first = y.channel(0).samples();
    assert!(y.channels()[1..].iter().any(|c| c.samples() != first));
}

#[test]
fn perfect_denoiser_scores_the_test_noise() {
    let clean = MultichannelSignal::mono(gen_doppler(256).unwrap());
    let trials: Vec<_> = (0..8)
        .map(|t| {
            let w = gen_noise(&NoiseSpec::white(), 256, 1, &mut derive_stream(3, t)).unwrap();
            mix_at_snr(&clean, &w, 0.0).unwrap()
        })
        .collect();
    let set = TrialSet::new(trials, 5, 3).unwrap();
    let got = trial_split_eval(&set, |_| Ok(clean.clone())).unwrap();
    let test = set.test_average();
    let direct = 10.0 * (sub(&test, &clean).energy() / test.energy()).log10();
    assert!((got - direct).abs() < 1e-9);
}

#[test]
fn structured_denoising_beats_plain_trial_averaging() {
    let dict = Dictionary::new(DictionarySpec::with_defaults(512)).unwrap();
    let clean = gen_evoked(&dict, 8, 4, &mut derive_stream(21, 0)).unwrap();
    let trials: Vec<_> = (0..10)
        .map(|t| {
            let w =
                gen_noise(&NoiseSpec::white(), 512, 8, &mut derive_stream(21, 100 + t)).unwrap();
            mix_at_snr(&clean, &w, 0.0).unwrap()
        })
        .collect();
    let set = TrialSet::new(trials, 5, 5).unwrap();
    let identity = trial_split_eval(&set, |y| Ok(y.clone())).unwrap();
    let params = BirdParams {
        master_seed: 21,
        ..BirdParams::default()
    };
    let structured =
        trial_split_eval(&set, |y| Ok(sbird(y, &dict, &params, 1.0)?.estimate)).unwrap();
    assert!(
        structured < identity,
        "s-bird {structured} dB vs averaging {identity} dB"
    );
}

#[test]
fn row_count_is_the_product_of_the_sweep() {
    let single = BenchConfig {
        n: 256,
        runs: 2,
        ..BenchConfig::default()
    };
    assert_eq!(run_benchmark(&single, false).unwrap().len(), 1);
    let grid = BenchConfig {
        methods: vec![BenchMethod::Bird, BenchMethod::RssmpOracle],
        snr_db: vec![0.0, 5.0],
        seeds: vec![1, 2, 3],
        ..single
    };
    let rows = run_benchmark(&grid, false).unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!((rows[0].method.as_str(), rows[0].seed), ("bird", 1));
    assert_eq!(
        (rows[11].method.as_str(), rows[11].snr_db, rows[11].seed),
        ("rssmp-oracle", 5.0, 3)
    );
}

#[test]
fn benchmark_rows_do_not_depend_on_worker_count() {
    let cfg = BenchConfig {
        methods: vec![BenchMethod::Bird, BenchMethod::Sbird],
        signals: vec![BenchSignal::Evoked],
        seeds: vec![4, 5],
        n: 256,
        channels: 3,
        runs: 4,
        ..BenchConfig::default()
    };
    let one = with_jobs(Some(1), || run_benchmark(&cfg, false))
        .unwrap()
        .unwrap();
    let four = with_jobs(Some(4), || run_benchmark(&cfg, false))
        .unwrap()
        .unwrap();
    assert_eq!(rows_to_csv(&one), rows_to_csv(&four));
}

#[test]
fn bird_keeps_up_with_noise_informed_smp() {
    let cfg = BenchConfig {
        methods: vec![BenchMethod::Bird, BenchMethod::SmpOracle],
        snr_db: vec![0.0, 5.0, 10.0],
        seeds: (0..10).collect(),
        ..BenchConfig::default()
    };
    let rows = run_benchmark(&cfg, false).unwrap();
    for snr in [0.0, 5.0, 10.0] {
        let mean = |m: &str| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m && r.snr_db == snr)
                .map(|r| r.nmse_db)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let (b, s) = (mean("bird"), mean("smp-oracle"));
        assert!(b <= s + 0.5, "snr {snr}: bird {b:.2} dB, smp {s:.2} dB");
    }
}
