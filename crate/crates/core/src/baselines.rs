//! Comparison pursuits.
//!
//! * SMP: each run draws one subdictionary up front and keeps it for the whole
//!   decomposition.
//! * Oracle RSSMP: BIRD's re-randomized runs without blind stopping, truncated
//!   at the iteration count that minimizes the ensemble error against a clean
//!   reference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Atom, Dictionary};
use crate::error::{Error, Result};
use crate::pursuit::{
    average_estimates, default_max_iterations, padded, pursue, run_stream_id, DenoisedResult,
    LoopControl, SparseApprox, StopReason, DEFAULT_RESIDUAL_FLOOR, DEFAULT_SEED,
};
use crate::rng::derive_stream;
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Smp,
    RssmpOracle,
}

/// How a baseline run decides to stop. Exactly one rule applies.
#[derive(Debug, Clone, PartialEq)]
pub enum StopRule {
    /// Fixed number of iterations.
    Iterations(usize),
    /// Stop once `||y - Phi alpha||_2 <= epsilon`.
    Residual(f64),
    /// Truncate at the ensemble-error minimizer against this clean reference.
    Oracle(Signal),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub runs: usize,
    pub stop: StopRule,
    /// Safety cap; defaults to `N / 4`.
    pub max_iterations: Option<usize>,
    pub master_seed: u64,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod, runs: usize, stop: StopRule) -> Self {
        Self {
            method,
            runs,
            stop,
            max_iterations: None,
            master_seed: DEFAULT_SEED,
        }
    }

    fn validate(&self, dict: &Dictionary) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::param("runs (J) must be >= 1"));
        }
        match &self.stop {
            StopRule::Iterations(0) => return Err(Error::param("iteration count must be >= 1")),
            StopRule::Residual(eps) if !(*eps >= 0.0) => {
                return Err(Error::param(format!(
                    "target residual must be >= 0, got {eps}"
                )))
            }
            StopRule::Oracle(clean) if clean.len() != dict.signal_length() => {
                return Err(Error::Shape(
                    "clean reference length differs from the signal".into(),
                ))
            }
            _ => {}
        }
        if self.method == BaselineMethod::RssmpOracle && !matches!(self.stop, StopRule::Oracle(_)) {
            return Err(Error::param(
                "rssmp-oracle requires an oracle clean reference",
            ));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::param("max_iterations must be >= 1"));
        }
        Ok(())
    }

    fn cap(&self, dict: &Dictionary) -> usize {
        match self.stop {
            StopRule::Iterations(k) => k,
            _ => self
                .max_iterations
                .unwrap_or_else(|| default_max_iterations(dict.signal_length())),
        }
    }

    fn control(&self, dict: &Dictionary) -> LoopControl {
        LoopControl {
            // Zero threshold: only an exactly orthogonal residual stops the loop.
            threshold: 0.0,
            max_iterations: self.cap(dict),
            residual_floor: DEFAULT_RESIDUAL_FLOOR,
            target_residual: match self.stop {
                StopRule::Residual(eps) => Some(eps),
                _ => None,
            },
        }
    }
}

/// Result of an oracle-truncated ensemble.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_iterations: usize,
    /// `||clean - mean_j yhat_j^(k)||^2` for `k = 0..=K`.
    pub errors: Vec<f64>,
    pub result: DenoisedResult,
}

pub fn run_baseline(y: &Signal, dict: &Dictionary, cfg: &BaselineConfig) -> Result<DenoisedResult> {
    run_baseline_channel(y, dict, cfg, 0)
}

pub fn run_baseline_channel(
    y: &Signal,
    dict: &Dictionary,
    cfg: &BaselineConfig,
    channel: usize,
) -> Result<DenoisedResult> {
    match (cfg.method, &cfg.stop) {
        (BaselineMethod::Smp, _) => smp_channel(y, dict, cfg, channel),
        (BaselineMethod::RssmpOracle, StopRule::Oracle(clean)) => {
            let cap = cfg.cap(dict);
            Ok(
                rssmp_oracle_channel(y, clean, dict, cfg.runs, cap, cfg.master_seed, channel)?
                    .result,
            )
        }
        (BaselineMethod::RssmpOracle, _) => Err(Error::param(
            "rssmp-oracle requires an oracle clean reference",
        )),
    }
}

/// Stochastic MP: one frozen subdictionary per run.
pub fn smp(y: &Signal, dict: &Dictionary, cfg: &BaselineConfig) -> Result<DenoisedResult> {
    smp_channel(y, dict, cfg, 0)
}

pub fn smp_channel(
    y: &Signal,
    dict: &Dictionary,
    cfg: &BaselineConfig,
    channel: usize,
) -> Result<DenoisedResult> {
    cfg.validate(dict)?;
    let ypad = padded(dict, y)?;
    let ctl = cfg.control(dict);
    let runs: Vec<SparseApprox> = (0..cfg.runs)
        .into_par_iter()
        .map(|j| {
            let mut rng = derive_stream(cfg.master_seed, run_stream_id(channel, j));
            let frozen = dict.draw_subdictionary(&mut rng);
            pursue(dict, &ypad, &ctl, || frozen.clone())
        })
        .collect();
    match &cfg.stop {
        StopRule::Oracle(clean) => Ok(truncate_at_oracle(dict, runs, clean)?.result),
        _ => {
            let estimate = average_estimates(runs.iter().map(|r| r.estimate.samples()));
            Ok(DenoisedResult {
                estimate,
                runs,
                threshold: 0.0,
            })
        }
    }
}

/// `J` re-randomized pursuits without blind stopping, truncated at the
/// iteration count minimizing the ensemble error against `clean`.
pub fn rssmp_oracle(
    y: &Signal,
    clean: &Signal,
    dict: &Dictionary,
    runs: usize,
    max_iter: usize,
    master_seed: u64,
) -> Result<OracleResult> {
    rssmp_oracle_channel(y, clean, dict, runs, max_iter, master_seed, 0)
}

pub fn rssmp_oracle_channel(
    y: &Signal,
    clean: &Signal,
    dict: &Dictionary,
    runs: usize,
    max_iter: usize,
    master_seed: u64,
    channel: usize,
) -> Result<OracleResult> {
    if runs == 0 || max_iter == 0 {
        return Err(Error::param("runs and max_iter must be >= 1"));
    }
    if clean.len() != y.len() {
        return Err(Error::Shape(
            "clean reference length differs from the signal".into(),
        ));
    }
    let ypad = padded(dict, y)?;
    let ctl = LoopControl {
        threshold: 0.0,
        max_iterations: max_iter,
        residual_floor: DEFAULT_RESIDUAL_FLOOR,
        target_residual: None,
    };
    let approx: Vec<SparseApprox> = (0..runs)
        .into_par_iter()
        .map(|j| {
            let mut rng = derive_stream(master_seed, run_stream_id(channel, j));
            pursue(dict, &ypad, &ctl, || dict.draw_subdictionary(&mut rng))
        })
        .collect();
    truncate_at_oracle(dict, approx, clean)
}

fn truncate_at_oracle(
    dict: &Dictionary,
    runs: Vec<SparseApprox>,
    clean: &Signal,
) -> Result<OracleResult> {
    let n = dict.signal_length();
    let p = dict.padded_len();
    let j = runs.len() as f64;
    let depth = runs.iter().map(|r| r.iterations).max().unwrap_or(0);
    let clean = clean.samples();
    let mut ensemble = vec![0.0; p];
    let err = |e: &[f64]| -> f64 {
        e[..n]
            .iter()
            .zip(clean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut errors = Vec::with_capacity(depth + 1);
    errors.push(err(&ensemble));
    for k in 0..depth {
        for r in runs.iter().filter(|r| r.iterations > k) {
            let (id, c) = r.selections[k];
            dict.add_atom(&mut ensemble, &Atom::from_id(id), c / j);
        }
        errors.push(err(&ensemble));
    }
    let best = errors
        .iter()
        .enumerate()
        .fold(0, |b, (k, e)| if *e < errors[b] { k } else { b });
    let truncated: Vec<SparseApprox> = runs
        .into_iter()
        .map(|r| truncate_run(dict, r, best))
        .collect::<Result<_>>()?;
    let estimate = average_estimates(truncated.iter().map(|r| r.estimate.samples()));
    Ok(OracleResult {
        best_iterations: best,
        errors,
        result: DenoisedResult {
            estimate,
            runs: truncated,
            threshold: 0.0,
        },
    })
}

fn truncate_run(dict: &Dictionary, mut r: SparseApprox, k: usize) -> Result<SparseApprox> {
    if r.iterations <= k {
        return Ok(r);
    }
    r.selections.truncate(k);
    r.coherences.truncate(k);
    r.residual_energies.truncate(k + 1);
    r.iterations = k;
    r.final_residual_norm = r.residual_energies[k].sqrt();
    r.estimate = dict.reconstruct(&r.selections)?;
    r.stop = StopReason::Oracle;
    Ok(r)
}
