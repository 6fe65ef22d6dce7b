//! Randomized sequential pursuit with blind stopping, and the BIRD ensemble.
//!
//! One run repeats: draw a subdictionary, take the atom with the largest
//! squared projection on the residual, stop if the normalized coherence over
//! the drawn subdictionary is at or below the threshold (the candidate is then
//! discarded), otherwise add `<r, phi> phi` to the estimate and set
//! `r = y - estimate`. BIRD averages `J` such runs, each on its own stream.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{AtomId, Dictionary, SubdictionarySelection};
use crate::error::{Error, Result};
use crate::rng::{derive_stream, RandomStream};
use crate::signal::{energy, MultichannelSignal, Signal};
use crate::stopping::{lambda_threshold, ThresholdSpec, ThresholdVariant};

pub const DEFAULT_RESIDUAL_FLOOR: f64 = 1e-12;
pub const DEFAULT_SEED: u64 = 20_140_512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PursuitConfig {
    pub threshold: f64,
    pub max_iterations: usize,
    /// Relative to `||y||`.
    pub residual_floor: f64,
}

impl PursuitConfig {
    /// Cap of `N / 4` iterations and the default residual floor.
    pub fn new(threshold: f64, signal_length: usize) -> Self {
        Self {
            threshold,
            max_iterations: default_max_iterations(signal_length),
            residual_floor: DEFAULT_RESIDUAL_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(Error::param(format!(
                "threshold must be >= 0, got {}",
                self.threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be >= 1"));
        }
        if !(self.residual_floor >= 0.0) {
            return Err(Error::param("residual floor must be >= 0"));
        }
        Ok(())
    }
}

pub fn default_max_iterations(signal_length: usize) -> usize {
    (signal_length / 4).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Normalized coherence at or below the threshold.
    Threshold,
    MaxIterations,
    ResidualFloor,
    /// Residual norm reached a target `epsilon`.
    TargetResidual,
    /// Truncated at an oracle-chosen iteration count.
    Oracle,
}

/// Result of one pursuit run.
#[derive(Debug, Clone)]
pub struct SparseApprox {
    /// `(gamma^n, <r^{n-1}, phi>)` in selection order; repeats allowed.
    pub selections: Vec<(AtomId, f64)>,
    /// Estimate truncated to the signal length.
    pub estimate: Signal,
    pub final_residual_norm: f64,
    pub iterations: usize,
    /// `||r^n||^2` for `n = 0..=iterations`, on the padded domain.
    pub residual_energies: Vec<f64>,
    /// Normalized coherence of the selected atom at each iteration.
    pub coherences: Vec<f64>,
    pub stop: StopReason,
}

impl SparseApprox {
    /// Number of distinct atoms.
    pub fn sparsity(&self) -> usize {
        let mut ids: Vec<AtomId> = self.selections.iter().map(|s| s.0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Loop controls shared by the blind pursuit and the baselines.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LoopControl {
    pub threshold: f64,
    pub max_iterations: usize,
    pub residual_floor: f64,
    pub target_residual: Option<f64>,
}

impl From<&PursuitConfig> for LoopControl {
    fn from(cfg: &PursuitConfig) -> Self {
        Self {
            threshold: cfg.threshold,
            max_iterations: cfg.max_iterations,
            residual_floor: cfg.residual_floor,
            target_residual: None,
        }
    }
}

pub(crate) fn padded(dict: &Dictionary, y: &Signal) -> Result<Vec<f64>> {
    if y.len() != dict.signal_length() {
        return Err(Error::Shape(format!(
            "signal length {} does not match dictionary signal length {}",
            y.len(),
            dict.signal_length()
        )));
    }
    let mut buf = y.samples().to_vec();
    buf.resize(dict.padded_len(), 0.0);
    Ok(buf)
}

/// Greedy loop over subdictionaries supplied by `next_selection`.
pub(crate) fn pursue(
    dict: &Dictionary,
    y: &[f64],
    ctl: &LoopControl,
    mut next_selection: impl FnMut() -> SubdictionarySelection,
) -> SparseApprox {
    let p = dict.padded_len();
    let mut estimate = vec![0.0; p];
    let mut residual = y.to_vec();
    let floor = ctl.residual_floor * energy(y).sqrt();
    let mut selections = Vec::new();
    let mut coherences = Vec::new();
    let mut residual_energies = Vec::new();

    let stop = loop {
        let e = energy(&residual);
        residual_energies.push(e);
        let norm = e.sqrt();
        if norm == 0.0 || norm <= floor {
            break StopReason::ResidualFloor;
        }
        if ctl.target_residual.is_some_and(|eps| norm <= eps) {
            break StopReason::TargetResidual;
        }
        if selections.len() >= ctl.max_iterations {
            break StopReason::MaxIterations;
        }
        let sel = next_selection();
        let table = dict.analyze_padded(&sel, &residual);
        let (atom, coeff) = table.argmax();
        let lambda = coeff.abs() / norm;
        if lambda <= ctl.threshold {
            break StopReason::Threshold;
        }
        let (start, values) = dict.atom_values(&atom);
        for (n, v) in values.iter().enumerate() {
            let i = (start + n) % p;
            estimate[i] += coeff * v;
            residual[i] = y[i] - estimate[i];
        }
        selections.push((atom.id(), coeff));
        coherences.push(lambda);
    };

    let final_residual_norm = residual_energies.last().copied().unwrap_or(0.0).sqrt();
    estimate.truncate(dict.signal_length());
    SparseApprox {
        iterations: selections.len(),
        selections,
        estimate: Signal::from_vec_unchecked(estimate),
        final_residual_norm,
        residual_energies,
        coherences,
        stop,
    }
}

/// One randomized sequential pursuit with a fresh subdictionary per iteration.
pub fn run_single_pursuit(
    y: &Signal,
    dict: &Dictionary,
    cfg: &PursuitConfig,
    rng: &mut RandomStream,
) -> Result<SparseApprox> {
    cfg.validate()?;
    let y = padded(dict, y)?;
    Ok(pursue(dict, &y, &cfg.into(), || {
        dict.draw_subdictionary(rng)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirdParams {
    pub runs: usize,
    pub p: f64,
    pub variant: ThresholdVariant,
    pub master_seed: u64,
    /// Defaults to `N / 4`.
    pub max_iterations: Option<usize>,
    pub residual_floor: f64,
    /// Use this threshold instead of the closed form.
    pub threshold_override: Option<f64>,
}

impl Default for BirdParams {
    fn default() -> Self {
        Self {
            runs: 30,
            p: 1e-6,
            variant: ThresholdVariant::default(),
            master_seed: DEFAULT_SEED,
            max_iterations: None,
            residual_floor: DEFAULT_RESIDUAL_FLOOR,
            threshold_override: None,
        }
    }
}

impl BirdParams {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::param("runs (J) must be >= 1"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::param(format!(
                "p must lie in (0, 1), got {}",
                self.p
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::param("max_iterations must be >= 1"));
        }
        Ok(())
    }

    /// Threshold for this dictionary (override or closed form).
    pub fn threshold(&self, dict: &Dictionary) -> Result<f64> {
        if let Some(t) = self.threshold_override {
            return Ok(t);
        }
        lambda_threshold(&ThresholdSpec {
            n: dict.signal_length(),
            m: dict.num_atoms(),
            p: self.p,
            variant: self.variant,
        })
    }

    pub fn pursuit_config(&self, dict: &Dictionary) -> Result<PursuitConfig> {
        let cfg = PursuitConfig {
            threshold: self.threshold(dict)?,
            max_iterations: self
                .max_iterations
                .unwrap_or_else(|| default_max_iterations(dict.signal_length())),
            residual_floor: self.residual_floor,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Averaged estimate plus every run's diagnostics.
#[derive(Debug, Clone)]
pub struct DenoisedResult {
    pub estimate: Signal,
    pub runs: Vec<SparseApprox>,
    /// Coherence threshold actually used (0 for baselines without blind stop).
    pub threshold: f64,
}

impl DenoisedResult {
    pub fn mean_iterations(&self) -> f64 {
        self.runs.iter().map(|r| r.iterations as f64).sum::<f64>() / self.runs.len() as f64
    }
}

/// Stream id of run `run` on channel `channel`.
pub fn run_stream_id(channel: usize, run: usize) -> u64 {
    crate::rng::namespace::RUNS + ((channel as u64) << 32) + run as u64
}

/// BIRD on a single channel.
pub fn bird(y: &Signal, dict: &Dictionary, params: &BirdParams) -> Result<DenoisedResult> {
    bird_channel(y, dict, params, 0)
}

/// BIRD on one channel of a multichannel signal; runs use streams of `channel`.
pub fn bird_channel(
    y: &Signal,
    dict: &Dictionary,
    params: &BirdParams,
    channel: usize,
) -> Result<DenoisedResult> {
    params.validate()?;
    let cfg = params.pursuit_config(dict)?;
    let ypad = padded(dict, y)?;
    let ctl = LoopControl::from(&cfg);
    let runs: Vec<SparseApprox> = (0..params.runs)
        .into_par_iter()
        .map(|j| {
            let mut rng = derive_stream(params.master_seed, run_stream_id(channel, j));
            pursue(dict, &ypad, &ctl, || dict.draw_subdictionary(&mut rng))
        })
        .collect();
    let estimate = average_estimates(runs.iter().map(|r| r.estimate.samples()));
    Ok(DenoisedResult {
        estimate,
        runs,
        threshold: cfg.threshold,
    })
}

/// Channel-by-channel BIRD on a multichannel signal.
#[derive(Debug, Clone)]
pub struct MultichannelResult {
    pub estimate: MultichannelSignal,
    pub channels: Vec<DenoisedResult>,
    pub threshold: f64,
}

/// Applies [`bird_channel`] independently to every channel of `y`.
pub fn bird_multichannel(
    y: &MultichannelSignal,
    dict: &Dictionary,
    params: &BirdParams,
) -> Result<MultichannelResult> {
    let channels = (0..y.n_channels())
        .map(|c| bird_channel(y.channel(c), dict, params, c))
        .collect::<Result<Vec<_>>>()?;
    let threshold = channels[0].threshold;
    let estimate = MultichannelSignal::new(channels.iter().map(|r| r.estimate.clone()).collect())?;
    Ok(MultichannelResult {
        estimate,
        channels,
        threshold,
    })
}

/// Arithmetic mean in fixed order with pairwise summation.
pub fn average_estimates<'a>(estimates: impl Iterator<Item = &'a [f64]>) -> Signal {
    let items: Vec<&[f64]> = estimates.collect();
    assert!(!items.is_empty(), "average of zero estimates");
    let mut sum = pairwise_sum(&items);
    let scale = 1.0 / items.len() as f64;
    sum.iter_mut().for_each(|x| *x *= scale);
    Signal::from_vec_unchecked(sum)
}

fn pairwise_sum(items: &[&[f64]]) -> Vec<f64> {
    match items {
        [one] => one.to_vec(),
        _ => {
            let (a, b) = items.split_at(items.len() / 2);
            let mut left = pairwise_sum(a);
            for (l, r) in left.iter_mut().zip(pairwise_sum(b)) {
                *l += r;
            }
            left
        }
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads (global pool when `None`).
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::param(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
