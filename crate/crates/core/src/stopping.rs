//! Blind stopping threshold from the order statistics of noise projections.
//!
//! Projections of white noise on unit-norm atoms, normalized by the noise
//! norm, are modelled as i.i.d. half-normal variables with variance `1/N`.
//! The largest of `M` of them has CDF `F(z)^M`, and the threshold is the value
//! exceeded by that maximum with probability `p`.

use std::f64::consts::{FRAC_2_SQRT_PI, PI};
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, ProjectionTable};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Which closed form to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdVariant {
    /// `(sqrt 2 / N) sqrt(1 - 2/pi) erfinv((1-p)^(1/M))`.
    Printed,
    /// `sqrt(2/N) erfinv((1-p)^(1/M))`: the `(1-p)`-quantile of the maximum of
    /// `M` half-normal variables with variance `1/N`.
    Quantile,
    /// `sqrt(2/N) sqrt(1 - 2/pi) erfinv((1-p)^(1/M))`: the printed constant
    /// with the `sqrt(2/N)` noise scale. Used by the denoisers by default.
    #[default]
    Corrected,
}

impl ThresholdVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ThresholdVariant::Printed => "printed",
            ThresholdVariant::Quantile => "quantile",
            ThresholdVariant::Corrected => "corrected",
        }
    }
}

impl FromStr for ThresholdVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "printed" => Ok(ThresholdVariant::Printed),
            "quantile" => Ok(ThresholdVariant::Quantile),
            "corrected" => Ok(ThresholdVariant::Corrected),
            other => Err(format!(
                "unknown variant '{other}' (expected printed, quantile or corrected)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub variant: ThresholdVariant,
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::param(format!(
                "p must lie in (0, 1), got {}",
                self.p
            )));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::param(format!(
                "n and m must be >= 1 (n={}, m={})",
                self.n, self.m
            )));
        }
        Ok(())
    }
}

/// Half-normal projection model with scale `1/sqrt(N)`, maximum over `M` draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProjectionModel {
    pub n: usize,
    pub m: usize,
}

impl NoiseProjectionModel {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }

    fn scaled(&self, z: f64) -> f64 {
        z * (self.n as f64 / 2.0).sqrt()
    }

    /// CDF of a single projection magnitude.
    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            0.0
        } else {
            libm::erf(self.scaled(z))
        }
    }

    /// Density of a single projection magnitude.
    pub fn pdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 0.0;
        }
        let s = (self.n as f64 / 2.0).sqrt();
        FRAC_2_SQRT_PI * s * (-(self.scaled(z)).powi(2)).exp()
    }
}

/// CDF of the largest of `M` i.i.d. projection magnitudes, `F(z)^M`.
pub fn max_order_cdf(model: &NoiseProjectionModel, z: f64) -> f64 {
    let f = model.cdf(z);
    match i32::try_from(model.m) {
        Ok(m) => f.powi(m),
        Err(_) => f.powf(model.m as f64),
    }
}

/// Inverse error function on `(-1, 1)`.
pub fn erfinv(x: f64) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::param(format!(
            "erfinv argument must lie in (-1, 1), got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(x);
    }
    if x.abs() <= 0.5 {
        Ok(refine_erf(initial_guess(x, (1.0 - x) * (1.0 + x)), x))
    } else {
        // Sterbenz: 1 - |x| is exact here.
        let t = 1.0 - x.abs();
        Ok(x.signum() * refine_erfc(initial_guess(1.0 - t, t * (2.0 - t)), t))
    }
}

/// Inverse complementary error function on `(0, 2)`.
pub fn erfcinv(t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 2.0) {
        return Err(Error::param(format!(
            "erfcinv argument must lie in (0, 2), got {t}"
        )));
    }
    if t == 1.0 {
        return Ok(0.0);
    }
    if t > 1.0 {
        return Ok(-erfcinv(2.0 - t)?);
    }
    if t >= 0.5 {
        return erfinv(1.0 - t);
    }
    Ok(refine_erfc(initial_guess(1.0 - t, t * (2.0 - t)), t))
}

/// Giles' single-precision rational approximation; `one_minus_x2 = (1-x)(1+x)`
/// is passed separately so tails keep their precision.
fn initial_guess(x: f64, one_minus_x2: f64) -> f64 {
    let mut w = -one_minus_x2.ln();
    let p = if w < 5.0 {
        w -= 2.5;
        [
            2.810_226_36e-08,
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ]
        .iter()
        .fold(0.0, |acc, &c| acc * w + c)
    } else {
        w = w.sqrt() - 3.0;
        [
            -0.000_200_214_257,
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ]
        .iter()
        .fold(0.0, |acc, &c| acc * w + c)
    };
    p * x
}

// Halley steps on erf(y) - x; d/dy erf = (2/sqrt pi) e^{-y^2}, f'' = -2y f'.
fn refine_erf(mut y: f64, x: f64) -> f64 {
    for _ in 0..4 {
        let f = libm::erf(y) - x;
        let d = FRAC_2_SQRT_PI * (-y * y).exp();
        let step = f / d;
        let step = step / (1.0 + y * step);
        y -= step;
        if step.abs() <= 1e-16 * y.abs() {
            break;
        }
    }
    y
}

// Newton on ln erfc(y) = ln t. ln erfc is concave, so after the first step the
// iterates approach the root monotonically from above.
fn refine_erfc(guess: f64, t: f64) -> f64 {
    let target = t.ln();
    let mut y = if t < 1e-8 {
        // erfc(y) ~ exp(-y^2) / (y sqrt(pi))
        let u = -target;
        (u - 0.5 * u.ln() - 0.5 * PI.ln()).sqrt()
    } else {
        guess
    };
    let mut prev = 0.0;
    for _ in 0..60 {
        let e = libm::erfc(y);
        if e == 0.0 {
            y = 0.5 * (y + prev);
            continue;
        }
        let slope = -FRAC_2_SQRT_PI * (-y * y).exp() / e;
        let step = (e.ln() - target) / slope;
        prev = y;
        y -= step;
        if step.abs() <= 4.0 * f64::EPSILON * y.abs() {
            break;
        }
    }
    y
}

/// `1 - (1-p)^(1/M)`, the per-atom tail probability.
fn per_atom_tail(p: f64, m: usize) -> f64 {
    -((-p).ln_1p() / m as f64).exp_m1()
}

/// Blind threshold on the normalized coherence.
pub fn lambda_threshold(spec: &ThresholdSpec) -> Result<f64> {
    spec.validate()?;
    // erfinv((1-p)^(1/M)) evaluated through its complement for accuracy.
    let e = erfcinv(per_atom_tail(spec.p, spec.m))?;
    let n = spec.n as f64;
    Ok(match spec.variant {
        ThresholdVariant::Quantile => (2.0 / n).sqrt() * e,
        ThresholdVariant::Printed => 2f64.sqrt() / n * (1.0 - 2.0 / PI).sqrt() * e,
        ThresholdVariant::Corrected => (2.0 / n).sqrt() * (1.0 - 2.0 / PI).sqrt() * e,
    })
}

/// `max_m |table[m]| / residual_norm`.
pub fn normalized_coherence(table: &ProjectionTable, residual_norm: f64) -> Result<f64> {
    if !(residual_norm > 1e-12) || !residual_norm.is_finite() {
        return Err(Error::param(format!(
            "residual norm {residual_norm} is degenerate (must exceed 1e-12)"
        )));
    }
    Ok(table.max_abs() / residual_norm)
}

/// Empirical `(1-p)`-quantile of the normalized coherence of white Gaussian
/// noise over the full dictionary.
pub fn calibrate_threshold_mc(
    dict: &Dictionary,
    p: f64,
    trials: usize,
    rng: &mut RandomStream,
) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param(format!("p must lie in (0, 1), got {p}")));
    }
    if trials < 100 {
        return Err(Error::param(format!(
            "at least 100 trials are required, got {trials}"
        )));
    }
    if (p * trials as f64) < 1.0 {
        return Err(Error::param(format!(
            "{trials} trials cannot resolve the {}-quantile",
            1.0 - p
        )));
    }
    let n = dict.signal_length();
    let mut stats: Vec<f64> = (0..trials)
        .map(|_| {
            let mut w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect();
            let norm = crate::signal::energy(&w).sqrt();
            w.resize(dict.padded_len(), 0.0);
            dict.max_abs_projection(&w) / norm
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let k = ((1.0 - p) * trials as f64).ceil() as usize;
    Ok(stats[k.clamp(1, trials) - 1])
}
