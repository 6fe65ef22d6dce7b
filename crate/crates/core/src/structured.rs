//! Multichannel structured pursuit (S-BIRD).
//!
//! All channels share one subdictionary draw per iteration. An atom is scored
//! by the mean of its `k = floor(l C)` largest squared projections across
//! channels; the winner is added only to those `k` channels, each with its own
//! coefficient. The run stops when the mean of the `k` largest per-channel
//! normalized coherences falls to the threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Atom, AtomId, Dictionary, ProjectionTable, SubdictionarySelection};
use crate::error::{Error, Result};
use crate::pursuit::{average_estimates, padded, run_stream_id, BirdParams, StopReason};
use crate::rng::{derive_stream, RandomStream};
use crate::signal::{energy, MultichannelSignal, Signal};

/// `floor(l C)`, rejecting fractions that leave no channel.
pub fn active_count(l: f64, channels: usize) -> Result<usize> {
    if !(l > 0.0 && l <= 1.0) {
        return Err(Error::param(format!(
            "channel fraction l must lie in (0, 1], got {l}"
        )));
    }
    // Relative nudge so that e.g. 0.29 * 100 counts 29 channels.
    let k = (l * channels as f64 * (1.0 + 1e-12)).floor() as usize;
    if k < 1 {
        return Err(Error::param(format!(
            "floor(l * C) = floor({l} * {channels}) selects no channel"
        )));
    }
    Ok(k.min(channels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredConfig {
    pub l: f64,
    pub threshold: f64,
    pub max_iterations: usize,
    pub residual_floor: f64,
}

impl StructuredConfig {
    pub fn validate(&self, channels: usize) -> Result<()> {
        active_count(self.l, channels)?;
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(Error::param(format!(
                "threshold must be >= 0, got {}",
                self.threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StructuredApprox {
    /// `gamma^n` per iteration.
    pub atoms: Vec<AtomId>,
    /// `Gamma_c^n` per iteration, ascending channel order.
    pub active: Vec<Vec<usize>>,
    /// Coefficients aligned with `active`.
    pub coeffs: Vec<Vec<f64>>,
    /// Per-channel estimates truncated to the signal length.
    pub estimates: MultichannelSignal,
    pub iterations: usize,
    /// `||r_c^n||^2` per iteration `n = 0..=iterations`, per channel.
    pub residual_energies: Vec<Vec<f64>>,
    /// Structured stopping statistic of each accepted iteration.
    pub stop_stats: Vec<f64>,
    pub stop: StopReason,
}

impl StructuredApprox {
    pub fn final_residual_norms(&self) -> Vec<f64> {
        self.residual_energies
            .last()
            .map(|e| e.iter().map(|x| x.sqrt()).collect())
            .unwrap_or_default()
    }

    /// `(atom, coefficient)` pairs that touched channel `c`, in order.
    pub fn channel_selections(&self, c: usize) -> Vec<(AtomId, f64)> {
        self.atoms
            .iter()
            .zip(self.active.iter().zip(&self.coeffs))
            .filter_map(|(id, (act, cs))| act.iter().position(|&a| a == c).map(|i| (*id, cs[i])))
            .collect()
    }
}

/// Atom maximizing the mean of its top-`floor(l C)` squared projections, with
/// its top channel set. Ties go to the lowest atom id, then the lowest channel.
pub fn select_structured(tables: &[ProjectionTable], l: f64) -> Result<(Atom, Vec<usize>)> {
    let first = tables
        .first()
        .ok_or_else(|| Error::param("at least one channel is required"))?;
    if tables[1..]
        .iter()
        .any(|t| t.offsets() != first.offsets() || t.len() != first.len())
    {
        return Err(Error::param(
            "all channels must share the same subdictionary",
        ));
    }
    let c = tables.len();
    let k = active_count(l, c)?;
    let kf = k as f64;
    let mut scratch = vec![0.0; c];
    let mut best = (0usize, 0usize);
    let mut best_score = f64::NEG_INFINITY;
    for s in 0..first.n_scales() {
        let cols: Vec<&[f64]> = tables.iter().map(|t| t.scale_coeffs(s)).collect();
        for i in 0..cols[0].len() {
            let sum = if k == c {
                cols.iter().map(|col| col[i] * col[i]).sum::<f64>()
            } else {
                for (dst, col) in scratch.iter_mut().zip(&cols) {
                    *dst = col[i] * col[i];
                }
                scratch.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
                scratch[..k].iter().sum::<f64>()
            };
            let score = sum / kf;
            if score > best_score {
                best_score = score;
                best = (s, i);
            }
        }
    }
    let (s, i) = best;
    let mut order: Vec<usize> = (0..c).collect();
    let power = |ch: usize| {
        let v = tables[ch].scale_coeffs(s)[i];
        v * v
    };
    order.sort_by(|&a, &b| power(b).total_cmp(&power(a)).then(a.cmp(&b)));
    let mut active = order[..k].to_vec();
    active.sort_unstable();
    Ok((first.atom_at(s, i), active))
}

/// Mean of the `floor(l C)` largest per-channel coherences.
pub fn structured_stop_stat(coherences: &[f64], l: f64) -> Result<f64> {
    if coherences.is_empty() {
        return Err(Error::param("at least one channel is required"));
    }
    let k = active_count(l, coherences.len())?;
    let mut sorted = coherences.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

pub fn run_single_structured_pursuit(
    y: &MultichannelSignal,
    dict: &Dictionary,
    cfg: &StructuredConfig,
    rng: &mut RandomStream,
) -> Result<StructuredApprox> {
    cfg.validate(y.n_channels())?;
    let ys = y
        .channels()
        .iter()
        .map(|ch| padded(dict, ch))
        .collect::<Result<Vec<_>>>()?;
    Ok(structured_pursue(dict, &ys, cfg, || {
        dict.draw_subdictionary(rng)
    }))
}

fn structured_pursue(
    dict: &Dictionary,
    ys: &[Vec<f64>],
    cfg: &StructuredConfig,
    mut next_selection: impl FnMut() -> SubdictionarySelection,
) -> StructuredApprox {
    let p = dict.padded_len();
    let c = ys.len();
    let mut estimates = vec![vec![0.0; p]; c];
    let mut residuals = ys.to_vec();
    let floors: Vec<f64> = ys
        .iter()
        .map(|y| cfg.residual_floor * energy(y).sqrt())
        .collect();
    let mut atoms = Vec::new();
    let mut active_sets = Vec::new();
    let mut coeff_sets = Vec::new();
    let mut residual_energies = Vec::new();
    let mut stop_stats = Vec::new();

    let stop = loop {
        let energies: Vec<f64> = residuals.iter().map(|r| energy(r)).collect();
        let norms: Vec<f64> = energies.iter().map(|e| e.sqrt()).collect();
        residual_energies.push(energies);
        let live: Vec<bool> = norms
            .iter()
            .zip(&floors)
            .map(|(&n, &f)| !(n == 0.0 || n <= f))
            .collect();
        if !live.iter().any(|&b| b) {
            break StopReason::ResidualFloor;
        }
        if atoms.len() >= cfg.max_iterations {
            break StopReason::MaxIterations;
        }
        let sel = next_selection();
        let tables: Vec<ProjectionTable> = residuals
            .par_iter()
            .map(|r| dict.analyze_padded(&sel, r))
            .collect();
        let coherences: Vec<f64> = tables
            .iter()
            .zip(&norms)
            .zip(&live)
            .map(|((t, &n), &ok)| if ok { t.max_abs() / n } else { 0.0 })
            .collect();
        let stat = structured_stop_stat(&coherences, cfg.l).expect("validated l");
        if stat <= cfg.threshold {
            break StopReason::Threshold;
        }
        let (atom, active) = select_structured(&tables, cfg.l).expect("validated l");
        let (start, values) = dict.atom_values(&atom);
        let mut coeffs = Vec::with_capacity(active.len());
        for &ch in &active {
            let coeff = tables[ch]
                .get(&atom)
                .expect("atom from shared subdictionary");
            coeffs.push(coeff);
            if coeff == 0.0 {
                continue;
            }
            let (est, res, y) = (&mut estimates[ch], &mut residuals[ch], &ys[ch]);
            for (n, v) in values.iter().enumerate() {
                let i = (start + n) % p;
                est[i] += coeff * v;
                res[i] = y[i] - est[i];
            }
        }
        atoms.push(atom.id());
        active_sets.push(active);
        coeff_sets.push(coeffs);
        stop_stats.push(stat);
    };

    let n = dict.signal_length();
    let channels = estimates
        .into_iter()
        .map(|mut e| {
            e.truncate(n);
            Signal::from_vec_unchecked(e)
        })
        .collect();
    StructuredApprox {
        iterations: atoms.len(),
        atoms,
        active: active_sets,
        coeffs: coeff_sets,
        estimates: MultichannelSignal::new(channels).expect("equal lengths"),
        residual_energies,
        stop_stats,
        stop,
    }
}

#[derive(Debug, Clone)]
pub struct StructuredResult {
    pub estimate: MultichannelSignal,
    pub runs: Vec<StructuredApprox>,
    pub threshold: f64,
}

impl StructuredResult {
    pub fn mean_iterations(&self) -> f64 {
        self.runs.iter().map(|r| r.iterations as f64).sum::<f64>() / self.runs.len() as f64
    }
}

/// S-BIRD: `J` structured runs averaged channel by channel.
pub fn sbird(
    y: &MultichannelSignal,
    dict: &Dictionary,
    params: &BirdParams,
    l: f64,
) -> Result<StructuredResult> {
    params.validate()?;
    let mono = params.pursuit_config(dict)?;
    let cfg = StructuredConfig {
        l,
        threshold: mono.threshold,
        max_iterations: mono.max_iterations,
        residual_floor: mono.residual_floor,
    };
    cfg.validate(y.n_channels())?;
    let ys = y
        .channels()
        .iter()
        .map(|ch| padded(dict, ch))
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<StructuredApprox> = (0..params.runs)
        .into_par_iter()
        .map(|j| {
            let mut rng = derive_stream(params.master_seed, run_stream_id(0, j));
            structured_pursue(dict, &ys, &cfg, || dict.draw_subdictionary(&mut rng))
        })
        .collect();
    let channels = (0..y.n_channels())
        .map(|c| average_estimates(runs.iter().map(|r| r.estimates.channel(c).samples())))
        .collect();
    Ok(StructuredResult {
        estimate: MultichannelSignal::new(channels)?,
        runs,
        threshold: cfg.threshold,
    })
}
