//! Synthetic signals, noise, metrics and benchmark sweeps.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    rssmp_oracle_channel, smp_channel, BaselineConfig, BaselineMethod, StopRule,
};
use crate::dictionary::{Atom, Dictionary, DictionarySpec, DEFAULT_SHIFT_GRANULARITY};
use crate::error::{Error, Result};
use crate::pursuit::{bird_multichannel, default_max_iterations, BirdParams, DEFAULT_SEED};
use crate::rng::{derive_stream, namespace, RandomStream};
use crate::signal::{MultichannelSignal, Signal};
use crate::stopping::ThresholdVariant;
use crate::structured::sbird;

/// NMSE / ANSR floor when the error energy vanishes.
pub const DB_CAP: f64 = -300.0;

/// Order-5 AR coefficients giving a low-pass ("pink-like") spectrum.
pub const DEFAULT_AR_COEFFS: [f64; 5] = [1.2, -0.5, 0.2, -0.1, 0.05];

const BLOCKS_KNOTS: [f64; 11] = [
    0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81,
];
const BLOCKS_HEIGHTS: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];

fn check_length(n: usize) -> Result<()> {
    if n < 16 {
        return Err(Error::param(format!("test signals need n >= 16, got {n}")));
    }
    Ok(())
}

fn unit_norm(mut v: Vec<f64>) -> Signal {
    let norm = crate::signal::energy(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Signal::from_vec_unchecked(v)
}

/// Doppler test signal `sqrt(t(1-t)) sin(2 pi 1.05 / (t + 0.05))`,
/// `t = (i+1)/n`, scaled to unit norm.
pub fn gen_doppler(n: usize) -> Result<Signal> {
    check_length(n)?;
    let v = (0..n)
        .map(|i| {
            let t = (i + 1) as f64 / n as f64;
            (t * (1.0 - t)).sqrt() * (2.0 * std::f64::consts::PI * 1.05 / (t + 0.05)).sin()
        })
        .collect();
    Ok(unit_norm(v))
}

/// Blocks test signal (piecewise constant, 11 jumps), unit norm.
pub fn gen_blocks(n: usize) -> Result<Signal> {
    check_length(n)?;
    let v = (0..n)
        .map(|i| {
            let t = (i + 1) as f64 / n as f64;
            BLOCKS_KNOTS
                .iter()
                .zip(BLOCKS_HEIGHTS)
                .filter(|(&k, _)| t >= k)
                .map(|(_, h)| h)
                .sum()
        })
        .collect();
    Ok(unit_norm(v))
}

/// Sample indices where Blocks jumps for length `n`.
pub fn blocks_knot_indices(n: usize) -> Vec<usize> {
    BLOCKS_KNOTS
        .iter()
        .map(|&k| {
            (0..n)
                .find(|&i| (i + 1) as f64 / n as f64 >= k)
                .unwrap_or(n)
        })
        .collect()
}

/// Signal made of `k` random atoms with shared support across `c` channels
/// and independent Gaussian gains per channel. Atoms are restricted to the
/// lower quarter of each scale's band.
pub fn gen_evoked(
    dict: &Dictionary,
    c: usize,
    k: usize,
    rng: &mut RandomStream,
) -> Result<MultichannelSignal> {
    if c == 0 || k == 0 {
        return Err(Error::param(
            "evoked signals need at least one channel and one atom",
        ));
    }
    let atoms = random_atoms(dict, k, rng);
    let channels = (0..c)
        .map(|_| {
            let sel: Vec<_> = atoms
                .iter()
                .map(|a| {
                    let g: f64 = StandardNormal.sample(&mut *rng);
                    (a.id(), g)
                })
                .collect();
            dict.reconstruct(&sel)
        })
        .collect::<Result<Vec<_>>>()?;
    MultichannelSignal::new(channels)
}

/// `k` distinct random atoms lying entirely inside the signal (no wrap into
/// the padding), from the low-frequency quarter of each scale.
pub fn random_atoms(dict: &Dictionary, k: usize, rng: &mut RandomStream) -> Vec<Atom> {
    let n = dict.signal_length();
    let g = dict.shift_granularity();
    let mut atoms: Vec<Atom> = Vec::with_capacity(k);
    while atoms.len() < k {
        let scale_idx = rng.below(dict.n_scales());
        let len = dict.scale_len(scale_idx);
        let hop = len / 2;
        let shift_offset = rng.below(g);
        let shift = shift_offset * hop / g;
        if shift + len > n {
            continue;
        }
        let a = Atom {
            scale_idx,
            shift_offset,
            time_index: rng.below((n - len - shift) / hop + 1),
            freq_bin: rng.below((hop / 4).max(1)),
        };
        if !atoms.contains(&a) {
            atoms.push(a);
        }
    }
    atoms
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    White,
    Ar,
}

impl FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "white" => Ok(NoiseKind::White),
            "ar" => Ok(NoiseKind::Ar),
            other => Err(format!(
                "unknown noise kind '{other}' (expected white or ar)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// `x_t = sum_k a_k x_{t-k} + e_t`; ignored for white noise.
    #[serde(default = "default_ar")]
    pub ar_coeffs: Vec<f64>,
}

fn default_ar() -> Vec<f64> {
    DEFAULT_AR_COEFFS.to_vec()
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::white()
    }
}

impl NoiseSpec {
    pub fn white() -> Self {
        Self {
            kind: NoiseKind::White,
            ar_coeffs: default_ar(),
        }
    }

    pub fn ar(coeffs: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind: NoiseKind::Ar,
            ar_coeffs: coeffs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == NoiseKind::Ar {
            check_stationary(&self.ar_coeffs)?;
        }
        Ok(())
    }
}

/// Levinson step-down: stationary iff every reflection coefficient has
/// magnitude below one.
pub fn check_stationary(coeffs: &[f64]) -> Result<()> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::UnstableAr("non-finite coefficient".into()));
    }
    let mut a = coeffs.to_vec();
    while let Some(&k) = a.last() {
        if k.abs() >= 1.0 {
            return Err(Error::UnstableAr(format!(
                "{coeffs:?} has a characteristic root on or inside the unit circle"
            )));
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        let reduced: Vec<f64> = (0..m - 1)
            .map(|i| (a[i] + k * a[m - 2 - i]) / denom)
            .collect();
        a = reduced;
    }
    Ok(())
}

/// Independent channels of white or AR Gaussian noise.
pub fn gen_noise(
    spec: &NoiseSpec,
    n: usize,
    c: usize,
    rng: &mut RandomStream,
) -> Result<MultichannelSignal> {
    spec.validate()?;
    if n == 0 || c == 0 {
        return Err(Error::param("noise needs n >= 1 and c >= 1"));
    }
    let channels = (0..c)
        .map(|_| match spec.kind {
            NoiseKind::White => Signal::from_vec_unchecked(
                (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect(),
            ),
            NoiseKind::Ar => {
                let a = &spec.ar_coeffs;
                let burn = 4 * a.len();
                let mut x: Vec<f64> = Vec::with_capacity(n + burn);
                for t in 0..n + burn {
                    let e: f64 = StandardNormal.sample(&mut *rng);
                    let ar: f64 = a
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| t > *k)
                        .map(|(k, ak)| ak * x[t - 1 - k])
                        .sum();
                    x.push(ar + e);
                }
                Signal::from_vec_unchecked(x.split_off(burn))
            }
        })
        .collect();
    MultichannelSignal::new(channels)
}

/// `clean + beta * noise` with the Frobenius SNR equal to `snr_db`.
pub fn mix_at_snr(
    clean: &MultichannelSignal,
    noise: &MultichannelSignal,
    snr_db: f64,
) -> Result<MultichannelSignal> {
    clean.check_same_shape(noise)?;
    if !snr_db.is_finite() {
        return Err(Error::param(format!("snr must be finite, got {snr_db}")));
    }
    let ec = clean.energy();
    let en = noise.energy();
    if ec == 0.0 || en == 0.0 {
        return Err(Error::param(
            "clean and noise signals must have nonzero energy",
        ));
    }
    let beta = (ec / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    let channels = clean
        .channels()
        .iter()
        .zip(noise.channels())
        .map(|(x, w)| {
            Signal::new(
                x.samples()
                    .iter()
                    .zip(w.samples())
                    .map(|(a, b)| a + beta * b)
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    MultichannelSignal::new(channels)
}

fn ratio_db(
    estimate: &MultichannelSignal,
    reference: &MultichannelSignal,
    what: &str,
) -> Result<f64> {
    estimate.check_same_shape(reference)?;
    let den = reference.energy();
    if den == 0.0 {
        return Err(Error::param(format!("{what} has zero energy")));
    }
    let num: f64 = estimate
        .channels()
        .iter()
        .zip(reference.channels())
        .map(|(e, r)| {
            e.samples()
                .iter()
                .zip(r.samples())
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
        })
        .sum();
    if num == 0.0 {
        return Ok(DB_CAP);
    }
    Ok((10.0 * (num / den).log10()).max(DB_CAP))
}

/// `10 log10(||X - Yhat||_F^2 / ||X||_F^2)`, floored at [`DB_CAP`].
pub fn nmse(estimate: &MultichannelSignal, reference: &MultichannelSignal) -> Result<f64> {
    ratio_db(estimate, reference, "reference")
}

/// `10 log10(||Y_test - Yhat_learn||_F^2 / ||Y_test||_F^2)`, floored at [`DB_CAP`].
pub fn ansr(estimate: &MultichannelSignal, y_test: &MultichannelSignal) -> Result<f64> {
    ratio_db(estimate, y_test, "held-out average")
}

#[derive(Debug, Clone)]
pub struct TrialSet {
    trials: Vec<MultichannelSignal>,
    t_learn: usize,
    t_test: usize,
}

impl TrialSet {
    pub fn new(trials: Vec<MultichannelSignal>, t_learn: usize, t_test: usize) -> Result<Self> {
        if t_learn == 0 || t_test == 0 {
            return Err(Error::param("learn and test splits must both be non-empty"));
        }
        if t_learn + t_test > trials.len() {
            return Err(Error::param(format!(
                "split {t_learn} + {t_test} exceeds {} trials",
                trials.len()
            )));
        }
        for t in &trials[1..] {
            trials[0].check_same_shape(t)?;
        }
        Ok(Self {
            trials,
            t_learn,
            t_test,
        })
    }

    /// Average of the first `T_learn` trials.
    pub fn learn_average(&self) -> MultichannelSignal {
        MultichannelSignal::mean(&self.trials[..self.t_learn]).expect("validated split")
    }

    /// Average of the `T_test` trials following the learning set.
    pub fn test_average(&self) -> MultichannelSignal {
        MultichannelSignal::mean(&self.trials[self.t_learn..self.t_learn + self.t_test])
            .expect("validated split")
    }
}

/// Denoise the learning average and score it against the held-out average.
pub fn trial_split_eval<F>(trials: &TrialSet, denoiser: F) -> Result<f64>
where
    F: FnOnce(&MultichannelSignal) -> Result<MultichannelSignal>,
{
    let estimate = denoiser(&trials.learn_average())?;
    ansr(&estimate, &trials.test_average())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    /// BIRD, channel by channel.
    Bird,
    Sbird,
    /// SMP stopped at `||r|| <= ||w||` (noise norm known).
    SmpOracle,
    RssmpOracle,
}

impl BenchMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchMethod::Bird => "bird",
            BenchMethod::Sbird => "sbird",
            BenchMethod::SmpOracle => "smp-oracle",
            BenchMethod::RssmpOracle => "rssmp-oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchSignal {
    Doppler,
    Blocks,
    /// Shared-support multichannel atoms.
    Evoked,
}

impl BenchSignal {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchSignal::Doppler => "doppler",
            BenchSignal::Blocks => "blocks",
            BenchSignal::Evoked => "evoked",
        }
    }
}

impl FromStr for BenchSignal {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "doppler" => Ok(BenchSignal::Doppler),
            "blocks" => Ok(BenchSignal::Blocks),
            "evoked" => Ok(BenchSignal::Evoked),
            other => Err(format!(
                "unknown signal '{other}' (expected doppler, blocks or evoked)"
            )),
        }
    }
}

/// Benchmark sweep: every combination of method, signal, SNR and seed gives
/// one report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub methods: Vec<BenchMethod>,
    pub signals: Vec<BenchSignal>,
    pub snr_db: Vec<f64>,
    pub seeds: Vec<u64>,
    pub n: usize,
    /// Channels for `evoked`; Doppler and Blocks are mono.
    pub channels: usize,
    pub evoked_atoms: usize,
    pub runs: usize,
    pub p: f64,
    pub l: f64,
    pub variant: ThresholdVariant,
    /// Defaults to the standard scales that fit in `n`.
    pub scales: Option<Vec<usize>>,
    pub shift_granularity: usize,
    pub noise: NoiseSpec,
    /// Noise realizations averaged per row.
    pub trials: usize,
    pub max_iterations: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![BenchMethod::Bird],
            signals: vec![BenchSignal::Doppler],
            snr_db: vec![5.0],
            seeds: vec![DEFAULT_SEED],
            n: 2048,
            channels: 20,
            evoked_atoms: 5,
            runs: 30,
            p: 1e-6,
            l: 1.0,
            variant: ThresholdVariant::default(),
            scales: None,
            shift_granularity: DEFAULT_SHIFT_GRANULARITY,
            noise: NoiseSpec::white(),
            trials: 1,
            max_iterations: None,
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: BenchConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty()
            || self.signals.is_empty()
            || self.snr_db.is_empty()
            || self.seeds.is_empty()
        {
            return Err(Error::param(
                "methods, signals, snr_db and seeds must be non-empty",
            ));
        }
        if self.trials == 0 || self.runs == 0 || self.channels == 0 || self.evoked_atoms == 0 {
            return Err(Error::param(
                "trials, runs, channels and evoked_atoms must be >= 1",
            ));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::param("snr values must be finite"));
        }
        check_length(self.n)?;
        self.noise.validate()?;
        self.bird_params(0).validate()
    }

    fn bird_params(&self, seed: u64) -> BirdParams {
        BirdParams {
            runs: self.runs,
            p: self.p,
            variant: self.variant,
            master_seed: seed,
            max_iterations: self.max_iterations,
            ..BirdParams::default()
        }
    }

    pub fn dictionary_spec(&self) -> DictionarySpec {
        match &self.scales {
            Some(s) => DictionarySpec::new(s.clone(), self.n, self.shift_granularity),
            None => DictionarySpec {
                shift_granularity: self.shift_granularity,
                ..DictionarySpec::with_defaults(self.n)
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub signal: String,
    pub snr_db: f64,
    pub seed: u64,
    #[serde(rename = "J")]
    pub j: usize,
    pub p: f64,
    pub l: f64,
    pub nmse_db: f64,
    pub iterations_mean: f64,
    pub wall_time_ms: f64,
}

pub const BENCH_CSV_HEADER: &str =
    "method,signal,snr_db,seed,J,p,l,nmse_db,iterations_mean,wall_time_ms";

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.signal,
            r.snr_db,
            r.seed,
            r.j,
            r.p,
            r.l,
            r.nmse_db,
            r.iterations_mean,
            r.wall_time_ms
        )
        .expect("write to String");
    }
    out
}

/// One noisy instance of a benchmark signal with its clean reference and noise.
#[derive(Debug, Clone)]
pub struct NoisyInstance {
    pub clean: MultichannelSignal,
    pub noise: MultichannelSignal,
    pub noisy: MultichannelSignal,
}

/// What to synthesize: clean signal family, channel count and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub signal: BenchSignal,
    /// Doppler and Blocks are replicated on every channel.
    pub channels: usize,
    /// Number of shared atoms for `evoked`.
    pub evoked_atoms: usize,
    pub noise: NoiseSpec,
    pub snr_db: f64,
}

/// Deterministic noisy instance for `(spec, seed, trial)`. The clean signal
/// and the noise shape do not depend on the SNR.
pub fn simulate(
    spec: &SimulationSpec,
    dict: &Dictionary,
    seed: u64,
    trial: u64,
) -> Result<NoisyInstance> {
    if spec.channels == 0 {
        return Err(Error::param("channels must be >= 1"));
    }
    let n = dict.signal_length();
    let replicate = |s: Signal| MultichannelSignal::new(vec![s; spec.channels]);
    let clean = match spec.signal {
        BenchSignal::Doppler => replicate(gen_doppler(n)?)?,
        BenchSignal::Blocks => replicate(gen_blocks(n)?)?,
        BenchSignal::Evoked => {
            let mut rng = derive_stream(seed, namespace::SIGNAL + trial);
            gen_evoked(dict, spec.channels, spec.evoked_atoms, &mut rng)?
        }
    };
    let mut rng = derive_stream(seed, namespace::NOISE + trial);
    let raw = gen_noise(&spec.noise, n, clean.n_channels(), &mut rng)?;
    let noisy = mix_at_snr(&clean, &raw, spec.snr_db)?;
    let noise = MultichannelSignal::new(
        noisy
            .channels()
            .iter()
            .zip(clean.channels())
            .map(|(y, x)| {
                Signal::new(
                    y.samples()
                        .iter()
                        .zip(x.samples())
                        .map(|(a, b)| a - b)
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    Ok(NoisyInstance {
        clean,
        noise,
        noisy,
    })
}

/// Benchmark instance: Doppler and Blocks are mono, `evoked` uses
/// `config.channels`.
pub fn make_instance(
    signal: BenchSignal,
    dict: &Dictionary,
    config: &BenchConfig,
    snr_db: f64,
    seed: u64,
    trial: u64,
) -> Result<NoisyInstance> {
    let spec = SimulationSpec {
        signal,
        channels: if signal == BenchSignal::Evoked {
            config.channels
        } else {
            1
        },
        evoked_atoms: config.evoked_atoms,
        noise: config.noise.clone(),
        snr_db,
    };
    simulate(&spec, dict, seed, trial)
}

/// Denoised estimate and mean iteration count of `method` on one instance.
pub fn denoise_with(
    method: BenchMethod,
    inst: &NoisyInstance,
    dict: &Dictionary,
    params: &BirdParams,
    l: f64,
) -> Result<(MultichannelSignal, f64)> {
    let y = &inst.noisy;
    match method {
        BenchMethod::Bird => {
            let res = bird_multichannel(y, dict, params)?;
            let iters = mean(res.channels.iter().map(|c| c.mean_iterations()));
            Ok((res.estimate, iters))
        }
        BenchMethod::Sbird => {
            let res = sbird(y, dict, params, l)?;
            let iters = res.mean_iterations();
            Ok((res.estimate, iters))
        }
        BenchMethod::SmpOracle | BenchMethod::RssmpOracle => {
            let cap = params
                .max_iterations
                .unwrap_or_else(|| default_max_iterations(dict.signal_length()));
            let mut channels = Vec::with_capacity(y.n_channels());
            let mut iters = Vec::with_capacity(y.n_channels());
            for c in 0..y.n_channels() {
                let res = if method == BenchMethod::SmpOracle {
                    let mut cfg = BaselineConfig::new(
                        BaselineMethod::Smp,
                        params.runs,
                        StopRule::Residual(inst.noise.channel(c).norm()),
                    );
                    cfg.max_iterations = Some(cap);
                    cfg.master_seed = params.master_seed;
                    smp_channel(y.channel(c), dict, &cfg, c)?
                } else {
                    rssmp_oracle_channel(
                        y.channel(c),
                        inst.clean.channel(c),
                        dict,
                        params.runs,
                        cap,
                        params.master_seed,
                        c,
                    )?
                    .result
                };
                iters.push(res.mean_iterations());
                channels.push(res.estimate);
            }
            Ok((MultichannelSignal::new(channels)?, mean(iters.into_iter())))
        }
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs every cell of the sweep concurrently; rows come back in
/// configuration order. Wall times are recorded only when `timing` is set
/// (otherwise 0) so that reports stay reproducible byte for byte.
pub fn run_benchmark(config: &BenchConfig, timing: bool) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let dict = Dictionary::new(config.dictionary_spec())?;
    let mut cells = Vec::new();
    for &method in &config.methods {
        for &signal in &config.signals {
            for &snr in &config.snr_db {
                for &seed in &config.seeds {
                    cells.push((method, signal, snr, seed));
                }
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(method, signal, snr, seed)| {
            let start = Instant::now();
            let params = config.bird_params(seed);
            let mut scores = Vec::with_capacity(config.trials);
            let mut iters = Vec::with_capacity(config.trials);
            for trial in 0..config.trials as u64 {
                let inst = make_instance(signal, &dict, config, snr, seed, trial)?;
                let (est, it) = denoise_with(method, &inst, &dict, &params, config.l)?;
                scores.push(nmse(&est, &inst.clean)?);
                iters.push(it);
            }
            let wall = if timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            Ok(BenchRow {
                method: method.as_str().into(),
                signal: signal.as_str().into(),
                snr_db: snr,
                seed,
                j: config.runs,
                p: config.p,
                l: config.l,
                nmse_db: mean(scores.into_iter()),
                iterations_mean: mean(iters.into_iter()),
                wall_time_ms: wall,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(v: Vec<f64>) -> MultichannelSignal {
        MultichannelSignal::mono(Signal::new(v).unwrap())
    }

    #[test]
    fn doppler_shape() {
        let d = gen_doppler(1024).unwrap();
        assert!((d.norm() - 1.0).abs() < 1e-12);
        let max = d.samples().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(d.samples()[0].abs() < max);
        assert_eq!(*d.samples().last().unwrap(), 0.0);
        assert!(gen_doppler(8).is_err());
    }

    #[test]
    fn blocks_jumps_only_at_knots() {
        let n = 2048;
        let b = gen_blocks(n).unwrap();
        assert!((b.norm() - 1.0).abs() < 1e-12);
        let knots = blocks_knot_indices(n);
        let jumps: Vec<usize> = b
            .samples()
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] != w[0])
            .map(|(i, _)| i + 1)
            .collect();
        assert_eq!(jumps, knots);
        assert_eq!(jumps.len() + 1, 12);
    }

    #[test]
    fn random_atoms_stay_inside_the_signal() {
        let dict = Dictionary::new(DictionarySpec::with_defaults(128)).unwrap();
        let mut rng = derive_stream(1, 0);
        for a in random_atoms(&dict, 200, &mut rng) {
            let phi = dict.synthesize_atom(&a).unwrap();
            let inside: f64 = phi.samples()[..128].iter().map(|v| v * v).sum();
            assert!((inside - 1.0).abs() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn ar_stationarity() {
        assert!(check_stationary(&[0.9]).is_ok());
        assert!(check_stationary(&DEFAULT_AR_COEFFS).is_ok());
        assert!(check_stationary(&[0.0]).is_ok());
        assert!(check_stationary(&[1.1]).is_err());
        assert!(check_stationary(&[0.5, 0.6]).is_err()); // b1 + b2 > 1
        assert!(check_stationary(&[0.5, 0.4]).is_ok());
        assert!(NoiseSpec::ar(vec![2.0]).is_err());
        let mut rng = derive_stream(0, 0);
        let bad = NoiseSpec {
            kind: NoiseKind::Ar,
            ar_coeffs: vec![-1.0],
        };
        assert!(matches!(
            gen_noise(&bad, 10, 1, &mut rng),
            Err(Error::UnstableAr(_))
        ));
    }

    #[test]
    fn snr_mixing_examples() {
        let clean = mono(vec![1.0, -2.0, 0.5, 3.0]);
        let noise = mono(vec![0.3, 0.1, -0.7, 0.2]);
        for snr in [0.0, 10.0, -3.5] {
            let y = mix_at_snr(&clean, &noise, snr).unwrap();
            let w: f64 = y
                .channel(0)
                .samples()
                .iter()
                .zip(clean.channel(0).samples())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let got = 10.0 * (clean.energy() / w).log10();
            assert!((got - snr).abs() < 1e-9);
        }
        let y = mix_at_snr(&clean, &noise, 300.0).unwrap();
        assert!(nmse(&y, &clean).unwrap() < -250.0);
        assert!(mix_at_snr(&MultichannelSignal::zeros(4, 1), &noise, 0.0).is_err());
        assert!(mix_at_snr(&clean, &MultichannelSignal::zeros(4, 1), 0.0).is_err());
        assert!(mix_at_snr(&clean, &MultichannelSignal::zeros(3, 1), 0.0).is_err());
    }

    #[test]
    fn metric_edge_cases() {
        let x = mono(vec![1.0, 2.0, 3.0]);
        assert_eq!(nmse(&x, &x).unwrap(), DB_CAP);
        assert_eq!(nmse(&MultichannelSignal::zeros(3, 1), &x).unwrap(), 0.0);
        assert!(nmse(&x, &MultichannelSignal::zeros(3, 1)).is_err());
        let twice = mono(vec![2.0, 4.0, 6.0]);
        assert_eq!(ansr(&twice, &x).unwrap(), 0.0);
        assert!(ansr(&x, &MultichannelSignal::zeros(3, 1)).is_err());
    }

    #[test]
    fn trial_split_validation() {
        let t = vec![mono(vec![1.0, 2.0]); 3];
        assert!(TrialSet::new(t.clone(), 2, 2).is_err());
        assert!(TrialSet::new(t.clone(), 0, 1).is_err());
        let set = TrialSet::new(t, 2, 1).unwrap();
        assert_eq!(trial_split_eval(&set, |y| Ok(y.clone())).unwrap(), DB_CAP);
        assert_eq!(
            trial_split_eval(&set, |y| Ok(MultichannelSignal::zeros(y.len(), 1))).unwrap(),
            0.0
        );
    }

    #[test]
    fn bench_config_rejects_unknown_names() {
        assert!(BenchConfig::from_json(r#"{"methods": ["waveshrink"]}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"signals": ["chirp"]}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let cfg =
            BenchConfig::from_json(r#"{"methods": ["bird", "smp-oracle"], "n": 256}"#).unwrap();
        assert_eq!(cfg.methods, vec![BenchMethod::Bird, BenchMethod::SmpOracle]);
    }

    #[test]
    fn csv_header_is_exact() {
        let csv = rows_to_csv(&[]);
        assert_eq!(csv.trim_end(), BENCH_CSV_HEADER);
    }
}
