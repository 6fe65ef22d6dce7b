//! Sample containers shared by every stage of the pipeline.
//!
//! Both containers reject NaN and infinite samples at construction: a single
//! non-finite value would poison every inner product of every pursuit run.

use crate::error::{Error, Result};

/// A single-channel real signal of length `N >= 1` with finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Shape("signal must have at least one sample".into()));
        }
        if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { channel: 0, index });
        }
        Ok(Self { samples })
    }

    /// All-zero signal of length `n` (`n` is clamped to at least one sample).
    pub fn zeros(n: usize) -> Self {
        Self {
            samples: vec![0.0; n.max(1)],
        }
    }

    // Callers guarantee finiteness (e.g. sums of finite atoms).
    pub(crate) fn from_vec_unchecked(samples: Vec<f64>) -> Self {
        debug_assert!(!samples.is_empty());
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn dot(&self, other: &Signal) -> f64 {
        dot(&self.samples, &other.samples)
    }
}

/// `C >= 1` channels of identical length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal {
    channels: Vec<Signal>,
}

impl MultichannelSignal {
    pub fn new(channels: Vec<Signal>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Shape("at least one channel is required".into()))?
            .len();
        if let Some((c, ch)) = channels
            .iter()
            .enumerate()
            .find(|(_, ch)| ch.len() != first)
        {
            return Err(Error::Shape(format!(
                "channel {c} has length {} but channel 0 has length {first}",
                ch.len()
            )));
        }
        Ok(Self { channels })
    }

    /// Builds from column-major (channel-contiguous) data, validating finiteness.
    pub fn from_column_major(data: Vec<f64>, n: usize, c: usize) -> Result<Self> {
        if n == 0 || c == 0 {
            return Err(Error::Shape(format!("invalid shape n={n}, c={c}")));
        }
        if data.len() != n * c {
            return Err(Error::Shape(format!(
                "expected {} values for n={n}, c={c}, found {}",
                n * c,
                data.len()
            )));
        }
        let mut channels = Vec::with_capacity(c);
        for (ci, chunk) in data.chunks_exact(n).enumerate() {
            if let Some(index) = chunk.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { channel: ci, index });
            }
            channels.push(Signal::from_vec_unchecked(chunk.to_vec()));
        }
        Ok(Self { channels })
    }

    pub fn mono(signal: Signal) -> Self {
        Self {
            channels: vec![signal],
        }
    }

    pub fn zeros(n: usize, c: usize) -> Self {
        Self {
            channels: (0..c.max(1)).map(|_| Signal::zeros(n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &Signal {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Signal] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Signal> {
        self.channels
    }

    pub fn to_column_major(&self) -> Vec<f64> {
        self.channels
            .iter()
            .flat_map(|ch| ch.samples().iter().copied())
            .collect()
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.channels.iter().map(Signal::energy).sum()
    }

    pub fn same_shape(&self, other: &MultichannelSignal) -> bool {
        self.len() == other.len() && self.n_channels() == other.n_channels()
    }

    pub(crate) fn check_same_shape(&self, other: &MultichannelSignal) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "({} x {}) vs ({} x {})",
                self.len(),
                self.n_channels(),
                other.len(),
                other.n_channels()
            )))
        }
    }

    /// Element-wise arithmetic mean of same-shaped signals.
    pub fn mean(items: &[MultichannelSignal]) -> Result<MultichannelSignal> {
        let first = items
            .first()
            .ok_or_else(|| Error::Shape("cannot average an empty set".into()))?;
        for it in &items[1..] {
            first.check_same_shape(it)?;
        }
        let scale = 1.0 / items.len() as f64;
        let channels = (0..first.n_channels())
            .map(|c| {
                let mut acc = vec![0.0; first.len()];
                for it in items {
                    for (a, x) in acc.iter_mut().zip(it.channel(c).samples()) {
                        *a += x;
                    }
                }
                acc.iter_mut().for_each(|a| *a *= scale);
                Signal::from_vec_unchecked(acc)
            })
            .collect();
        Ok(MultichannelSignal { channels })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn energy(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}
