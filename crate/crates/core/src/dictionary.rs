//! Multiscale shift-invariant MDCT dictionary.
//!
//! Each scale `L` (window length, even) defines a lapped transform with hop
//! `h = L/2`, `h` frequency bins per frame and the sine window
//! `w[n] = sin(pi (n + 1/2) / L)`. Frames are laid out circularly on the padded
//! length `P`, which is the signal length rounded up to a multiple of twice the
//! largest scale, so every (scale, shift) basis has exactly `P` atoms and is
//! orthonormal on `R^P`.
//!
//! Shift offset `s` in `[0, g)` moves every frame of a scale by
//! `floor(s * h / g)` samples. The full dictionary is the union over scales and
//! offsets, `M = g * S * P` atoms. A subdictionary draw picks one offset per
//! scale and therefore holds `M / g` atoms.
//!
//! Atom `(scale, offset, frame, bin)` has waveform
//!
//! ```text
//! phi[(frame*h + shift + n) mod P] = w[n] sqrt(2/h) cos(pi/h (n + 1/2 + h/2)(bin + 1/2)),  n in 0..L
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::signal::Signal;

pub const DEFAULT_SCALES: [usize; 6] = [32, 64, 128, 256, 512, 1024];
pub const DEFAULT_SHIFT_GRANULARITY: usize = 64;

const BIN_BITS: u32 = 20;
const FRAME_BITS: u32 = 20;
const SHIFT_BITS: u32 = 16;
const SCALE_BITS: u32 = 8;
const FRAME_SHIFT: u32 = BIN_BITS;
const OFFSET_SHIFT: u32 = BIN_BITS + FRAME_BITS;
const SCALE_SHIFT: u32 = BIN_BITS + FRAME_BITS + SHIFT_BITS;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionarySpec {
    /// Window lengths in samples.
    pub scales: Vec<usize>,
    pub signal_length: usize,
    pub shift_granularity: usize,
}

impl DictionarySpec {
    pub fn new(scales: Vec<usize>, signal_length: usize, shift_granularity: usize) -> Self {
        Self {
            scales,
            signal_length,
            shift_granularity,
        }
    }

    /// Default scales restricted to those not exceeding `signal_length`.
    pub fn with_defaults(signal_length: usize) -> Self {
        let scales = DEFAULT_SCALES
            .iter()
            .copied()
            .filter(|&l| l <= signal_length)
            .collect();
        Self::new(scales, signal_length, DEFAULT_SHIFT_GRANULARITY)
    }

    pub fn padded_length(&self) -> usize {
        let block = 2 * self.scales.iter().copied().max().unwrap_or(1);
        self.signal_length.div_ceil(block) * block
    }

    fn validate(&self) -> Result<()> {
        if self.signal_length == 0 {
            return Err(Error::Dictionary("signal length must be positive".into()));
        }
        if self.shift_granularity == 0 {
            return Err(Error::Dictionary("shift granularity must be >= 1".into()));
        }
        if self.shift_granularity > 1 << SHIFT_BITS {
            return Err(Error::Dictionary(format!(
                "shift granularity {} exceeds {}",
                self.shift_granularity,
                1u64 << SHIFT_BITS
            )));
        }
        if self.scales.is_empty() {
            return Err(Error::Dictionary("at least one scale is required".into()));
        }
        if self.scales.len() > 1 << SCALE_BITS {
            return Err(Error::Dictionary("too many scales".into()));
        }
        for (i, &l) in self.scales.iter().enumerate() {
            if l < 2 || l % 2 != 0 {
                return Err(Error::Dictionary(format!(
                    "scale {l} is not an even integer >= 2"
                )));
            }
            if l > self.signal_length {
                return Err(Error::Dictionary(format!(
                    "scale {l} exceeds signal length {}",
                    self.signal_length
                )));
            }
            if self.scales[..i].contains(&l) {
                return Err(Error::Dictionary(format!("duplicate scale {l}")));
            }
        }
        let padded = self.padded_length();
        if padded / (self.scales.iter().min().unwrap() / 2) > 1 << FRAME_BITS {
            return Err(Error::Dictionary(
                "signal too long for the atom id layout".into(),
            ));
        }
        Ok(())
    }
}

/// Packed atom identity.
///
/// Bit layout (most significant first): 8 bits scale index, 16 bits shift
/// offset, 20 bits frame index, 20 bits frequency bin. Ascending ids order
/// atoms by scale, then offset, then frame, then bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomId(pub u64);

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    /// Index into `DictionarySpec::scales`.
    pub scale_idx: usize,
    pub shift_offset: usize,
    pub time_index: usize,
    pub freq_bin: usize,
}

impl Atom {
    pub fn id(&self) -> AtomId {
        AtomId(
            (self.scale_idx as u64) << SCALE_SHIFT
                | (self.shift_offset as u64) << OFFSET_SHIFT
                | (self.time_index as u64) << FRAME_SHIFT
                | self.freq_bin as u64,
        )
    }

    pub fn from_id(id: AtomId) -> Self {
        let field = |shift: u32, bits: u32| ((id.0 >> shift) & ((1u64 << bits) - 1)) as usize;
        Atom {
            scale_idx: field(SCALE_SHIFT, SCALE_BITS),
            shift_offset: field(OFFSET_SHIFT, SHIFT_BITS),
            time_index: field(FRAME_SHIFT, FRAME_BITS),
            freq_bin: field(0, BIN_BITS),
        }
    }
}

/// One shift offset per scale; the implied atom set is `Phi_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubdictionarySelection {
    offsets: Vec<usize>,
}

impl SubdictionarySelection {
    pub fn new(offsets: Vec<usize>) -> Self {
        Self { offsets }
    }

    /// Same offset on every scale.
    pub fn uniform(dict: &Dictionary, offset: usize) -> Self {
        Self {
            offsets: vec![offset; dict.n_scales()],
        }
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.offsets.get(atom.scale_idx) == Some(&atom.shift_offset)
    }
}

/// Inner products of a signal with every atom of one subdictionary.
#[derive(Debug, Clone)]
pub struct ProjectionTable {
    offsets: Vec<usize>,
    hops: Vec<usize>,
    /// Per scale, `frames * hop` coefficients indexed `frame * hop + bin`.
    coeffs: Vec<Vec<f64>>,
    best_scale: usize,
    best_index: usize,
}

impl ProjectionTable {
    fn new(offsets: Vec<usize>, hops: Vec<usize>, coeffs: Vec<Vec<f64>>) -> Self {
        let mut best = (0, 0);
        let mut best_sq = -1.0;
        for (s, cs) in coeffs.iter().enumerate() {
            for (i, &c) in cs.iter().enumerate() {
                let sq = c * c;
                if sq > best_sq {
                    best_sq = sq;
                    best = (s, i);
                }
            }
        }
        Self {
            offsets,
            hops,
            coeffs,
            best_scale: best.0,
            best_index: best.1,
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_scales(&self) -> usize {
        self.coeffs.len()
    }

    pub fn scale_coeffs(&self, scale_idx: usize) -> &[f64] {
        &self.coeffs[scale_idx]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Atom at flat position `index` of scale `scale_idx`.
    pub fn atom_at(&self, scale_idx: usize, index: usize) -> Atom {
        let h = self.hops[scale_idx];
        Atom {
            scale_idx,
            shift_offset: self.offsets[scale_idx],
            time_index: index / h,
            freq_bin: index % h,
        }
    }

    /// Coefficient of `atom`, if it belongs to this subdictionary.
    pub fn get(&self, atom: &Atom) -> Option<f64> {
        if self.offsets.get(atom.scale_idx) != Some(&atom.shift_offset) {
            return None;
        }
        let h = self.hops[atom.scale_idx];
        if atom.freq_bin >= h {
            return None;
        }
        self.coeffs[atom.scale_idx]
            .get(atom.time_index * h + atom.freq_bin)
            .copied()
    }

    /// Atom with the largest squared coefficient (lowest id on ties) and its
    /// signed coefficient.
    pub fn argmax(&self) -> (Atom, f64) {
        (
            self.atom_at(self.best_scale, self.best_index),
            self.coeffs[self.best_scale][self.best_index],
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs[self.best_scale][self.best_index].abs()
    }

    /// `(atom, coefficient)` pairs in ascending atom id order.
    pub fn iter(&self) -> impl Iterator<Item = (Atom, f64)> + '_ {
        self.coeffs.iter().enumerate().flat_map(move |(s, cs)| {
            cs.iter()
                .enumerate()
                .map(move |(i, &c)| (self.atom_at(s, i), c))
        })
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().flatten().map(|c| c * c).sum()
    }
}

struct ScalePlan {
    len: usize,
    hop: usize,
    frames: usize,
    window: Vec<f64>,
    /// Sample shift for each offset index.
    shifts: Vec<usize>,
    dct: DctIv,
}

enum DctIv {
    /// Even hop: half-length complex FFT with pre/post twiddles.
    Fft {
        fft: Arc<dyn Fft<f64>>,
        pre: Vec<Complex64>,
        post: Vec<Complex64>,
    },
    /// Odd hop: direct O(h^2) evaluation.
    Direct { kernel: Vec<f64> },
}

impl DctIv {
    fn new(h: usize, planner: &mut FftPlanner<f64>) -> Self {
        let hf = h as f64;
        if h.is_multiple_of(2) {
            let half = h / 2;
            let pre = (0..half)
                .map(|m| Complex64::from_polar(1.0, -PI * m as f64 / hf))
                .collect();
            let post = (0..half)
                .map(|k| Complex64::from_polar(1.0, -PI * (k as f64 + 0.25) / hf))
                .collect();
            DctIv::Fft {
                fft: planner.plan_fft_forward(half),
                pre,
                post,
            }
        } else {
            let kernel = (0..h * h)
                .map(|i| {
                    let (k, n) = (i / h, i % h);
                    (PI / hf * (n as f64 + 0.5) * (k as f64 + 0.5)).cos()
                })
                .collect();
            DctIv::Direct { kernel }
        }
    }

    /// Unnormalized DCT-IV of each `h`-length block of `u`, in place.
    fn process(&self, u: &mut [f64], h: usize, scratch: &mut Vec<Complex64>) {
        match self {
            DctIv::Fft { fft, pre, post } => {
                let half = h / 2;
                scratch.clear();
                for block in u.chunks_exact(h) {
                    scratch.extend(
                        (0..half)
                            .map(|m| Complex64::new(block[2 * m], block[h - 1 - 2 * m]) * pre[m]),
                    );
                }
                fft.process(scratch);
                for (block, z) in u.chunks_exact_mut(h).zip(scratch.chunks_exact(half)) {
                    for k in 0..half {
                        let c = z[k] * post[k];
                        block[2 * k] = c.re;
                        block[h - 1 - 2 * k] = -c.im;
                    }
                }
            }
            DctIv::Direct { kernel } => {
                let mut out = vec![0.0; h];
                for block in u.chunks_exact_mut(h) {
                    for (k, o) in out.iter_mut().enumerate() {
                        *o = crate::signal::dot(&kernel[k * h..(k + 1) * h], block);
                    }
                    block.copy_from_slice(&out);
                }
            }
        }
    }
}

/// Immutable multiscale MDCT dictionary; shareable across threads.
pub struct Dictionary {
    spec: DictionarySpec,
    padded_len: usize,
    plans: Vec<ScalePlan>,
}

impl fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dictionary")
            .field("spec", &self.spec)
            .field("padded_len", &self.padded_len)
            .field("num_atoms", &self.num_atoms())
            .finish()
    }
}

pub fn build_dictionary(spec: DictionarySpec) -> Result<Dictionary> {
    Dictionary::new(spec)
}

impl Dictionary {
    pub fn new(spec: DictionarySpec) -> Result<Self> {
        spec.validate()?;
        let padded_len = spec.padded_length();
        let g = spec.shift_granularity;
        let mut planner = FftPlanner::new();
        let plans = spec
            .scales
            .iter()
            .map(|&len| {
                let hop = len / 2;
                ScalePlan {
                    len,
                    hop,
                    frames: padded_len / hop,
                    window: (0..len)
                        .map(|n| (PI * (n as f64 + 0.5) / len as f64).sin())
                        .collect(),
                    shifts: (0..g).map(|s| s * hop / g).collect(),
                    dct: DctIv::new(hop, &mut planner),
                }
            })
            .collect();
        Ok(Self {
            spec,
            padded_len,
            plans,
        })
    }

    pub fn spec(&self) -> &DictionarySpec {
        &self.spec
    }

    pub fn signal_length(&self) -> usize {
        self.spec.signal_length
    }

    /// Length of the domain the atoms live on.
    pub fn padded_len(&self) -> usize {
        self.padded_len
    }

    pub fn n_scales(&self) -> usize {
        self.plans.len()
    }

    pub fn shift_granularity(&self) -> usize {
        self.spec.shift_granularity
    }

    pub fn scale_len(&self, scale_idx: usize) -> usize {
        self.plans[scale_idx].len
    }

    /// `M`, counting every (scale, offset) basis.
    pub fn num_atoms(&self) -> usize {
        self.spec.shift_granularity * self.plans.len() * self.padded_len
    }

    /// `|Phi_n| = M / g`.
    pub fn subdictionary_len(&self) -> usize {
        self.plans.len() * self.padded_len
    }

    pub fn validate_atom(&self, atom: &Atom) -> Result<()> {
        let plan = self
            .plans
            .get(atom.scale_idx)
            .ok_or_else(|| Error::param(format!("scale index {} out of range", atom.scale_idx)))?;
        if atom.shift_offset >= self.spec.shift_granularity
            || atom.time_index >= plan.frames
            || atom.freq_bin >= plan.hop
        {
            return Err(Error::param(format!("atom {atom:?} out of range")));
        }
        Ok(())
    }

    pub fn validate_selection(&self, sel: &SubdictionarySelection) -> Result<()> {
        if sel.offsets.len() != self.plans.len()
            || sel
                .offsets
                .iter()
                .any(|&o| o >= self.spec.shift_granularity)
        {
            return Err(Error::param(format!(
                "invalid subdictionary selection {:?}",
                sel.offsets
            )));
        }
        Ok(())
    }

    /// One uniform, independent shift offset per scale.
    pub fn draw_subdictionary(&self, rng: &mut RandomStream) -> SubdictionarySelection {
        let g = self.spec.shift_granularity;
        SubdictionarySelection {
            offsets: (0..self.plans.len()).map(|_| rng.below(g)).collect(),
        }
    }

    /// Projections of `r` (length `N` or `P`; shorter signals are zero padded).
    pub fn analyze(&self, sel: &SubdictionarySelection, r: &Signal) -> Result<ProjectionTable> {
        self.validate_selection(sel)?;
        let n = r.len();
        if n == self.padded_len {
            Ok(self.analyze_padded(sel, r.samples()))
        } else if n == self.spec.signal_length {
            let mut buf = r.samples().to_vec();
            buf.resize(self.padded_len, 0.0);
            Ok(self.analyze_padded(sel, &buf))
        } else {
            Err(Error::Shape(format!(
                "signal length {n} incompatible with dictionary (N={}, padded {})",
                self.spec.signal_length, self.padded_len
            )))
        }
    }

    pub(crate) fn analyze_padded(
        &self,
        sel: &SubdictionarySelection,
        r: &[f64],
    ) -> ProjectionTable {
        debug_assert_eq!(r.len(), self.padded_len);
        let mut scratch = Vec::new();
        let coeffs = self
            .plans
            .iter()
            .zip(&sel.offsets)
            .map(|(plan, &off)| self.analyze_scale(plan, plan.shifts[off], r, &mut scratch))
            .collect();
        ProjectionTable::new(
            sel.offsets.clone(),
            self.plans.iter().map(|p| p.hop).collect(),
            coeffs,
        )
    }

    fn analyze_scale(
        &self,
        plan: &ScalePlan,
        shift: usize,
        r: &[f64],
        scratch: &mut Vec<Complex64>,
    ) -> Vec<f64> {
        let h = plan.hop;
        let p = self.padded_len;
        let mut u = vec![0.0; plan.frames * h];
        if h.is_multiple_of(2) {
            let q = h / 2;
            for (k, block) in u.chunks_exact_mut(h).enumerate() {
                let start = k * h + shift;
                let z = |n: usize| plan.window[n] * r[(start + n) % p];
                for n in 0..q {
                    block[n + q] += z(n);
                }
                for n in q..3 * q {
                    block[3 * q - 1 - n] -= z(n);
                }
                for n in 3 * q..4 * q {
                    block[n - 3 * q] -= z(n);
                }
            }
            plan.dct.process(&mut u, h, scratch);
        } else {
            // Odd hop: evaluate the lapped kernel directly.
            let hf = h as f64;
            for (k, block) in u.chunks_exact_mut(h).enumerate() {
                let start = k * h + shift;
                for (bin, out) in block.iter_mut().enumerate() {
                    *out = (0..plan.len)
                        .map(|n| {
                            plan.window[n]
                                * r[(start + n) % p]
                                * (PI / hf * (n as f64 + 0.5 + hf / 2.0) * (bin as f64 + 0.5)).cos()
                        })
                        .sum();
                }
            }
        }
        let norm = (2.0 / h as f64).sqrt();
        u.iter_mut().for_each(|c| *c *= norm);
        u
    }

    /// Start sample (before wrapping) and the `L` waveform values of an atom.
    pub(crate) fn atom_values(&self, atom: &Atom) -> (usize, Vec<f64>) {
        let plan = &self.plans[atom.scale_idx];
        let hf = plan.hop as f64;
        let norm = (2.0 / hf).sqrt();
        let f = atom.freq_bin as f64 + 0.5;
        let values = (0..plan.len)
            .map(|n| plan.window[n] * norm * (PI / hf * (n as f64 + 0.5 + hf / 2.0) * f).cos())
            .collect();
        (
            atom.time_index * plan.hop + plan.shifts[atom.shift_offset],
            values,
        )
    }

    /// `buf += coeff * phi_atom` on the padded domain.
    pub(crate) fn add_atom(&self, buf: &mut [f64], atom: &Atom, coeff: f64) {
        let (start, values) = self.atom_values(atom);
        let p = self.padded_len;
        for (n, v) in values.iter().enumerate() {
            buf[(start + n) % p] += coeff * v;
        }
    }

    /// Unit-norm waveform on the padded domain (length `P`).
    pub fn synthesize_atom(&self, atom: &Atom) -> Result<Signal> {
        self.validate_atom(atom)?;
        let mut buf = vec![0.0; self.padded_len];
        self.add_atom(&mut buf, atom, 1.0);
        Ok(Signal::from_vec_unchecked(buf))
    }

    /// `sum coeff * phi` on the padded domain.
    pub fn reconstruct_padded(&self, selections: &[(AtomId, f64)]) -> Result<Vec<f64>> {
        let mut buf = vec![0.0; self.padded_len];
        for (id, c) in selections {
            let atom = Atom::from_id(*id);
            self.validate_atom(&atom)?;
            self.add_atom(&mut buf, &atom, *c);
        }
        Ok(buf)
    }

    /// `sum coeff * phi`, truncated to the signal length `N`.
    pub fn reconstruct(&self, selections: &[(AtomId, f64)]) -> Result<Signal> {
        let mut buf = self.reconstruct_padded(selections)?;
        buf.truncate(self.spec.signal_length);
        Ok(Signal::from_vec_unchecked(buf))
    }

    /// Largest `|<r, phi>|` over the whole dictionary (every offset of every scale).
    pub fn max_abs_projection(&self, r: &[f64]) -> f64 {
        debug_assert_eq!(r.len(), self.padded_len);
        let mut scratch = Vec::new();
        let mut best = 0.0f64;
        for plan in &self.plans {
            for &shift in &plan.shifts {
                let cs = self.analyze_scale(plan, shift, r, &mut scratch);
                best = cs.iter().fold(best, |m, c| m.max(c.abs()));
            }
        }
        best
    }

    /// Every atom of the dictionary in ascending id order.
    pub fn atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        let g = self.spec.shift_granularity;
        self.plans.iter().enumerate().flat_map(move |(s, plan)| {
            (0..g).flat_map(move |off| {
                (0..plan.frames).flat_map(move |k| {
                    (0..plan.hop).map(move |b| Atom {
                        scale_idx: s,
                        shift_offset: off,
                        time_index: k,
                        freq_bin: b,
                    })
                })
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use rand_distr::{Distribution, StandardNormal};

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = derive_stream(seed, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn single_basis_count() {
        let d = Dictionary::new(DictionarySpec::new(vec![32], 1024, 1)).unwrap();
        assert_eq!(d.num_atoms(), 1024);
        assert_eq!(d.subdictionary_len(), 1024);
    }

    #[test]
    fn default_scales_count_matches_enumeration() {
        let d = Dictionary::new(DictionarySpec::new(DEFAULT_SCALES.to_vec(), 8192, 8)).unwrap();
        assert_eq!(d.num_atoms(), 393_216);
        assert_eq!(d.atoms().count(), 393_216);
    }

    #[test]
    fn invalid_specs_rejected() {
        for spec in [
            DictionarySpec::new(vec![31], 1024, 1),
            DictionarySpec::new(vec![2048], 1024, 1),
            DictionarySpec::new(vec![32], 1024, 0),
            DictionarySpec::new(vec![], 1024, 1),
            DictionarySpec::new(vec![32, 32], 1024, 1),
        ] {
            assert!(matches!(Dictionary::new(spec), Err(Error::Dictionary(_))));
        }
    }

    #[test]
    fn padding_rounds_to_twice_largest_scale() {
        assert_eq!(
            DictionarySpec::new(vec![32, 64], 1000, 1).padded_length(),
            1024
        );
        assert_eq!(
            DictionarySpec::new(vec![1024], 1024, 1).padded_length(),
            2048
        );
        assert_eq!(DictionarySpec::new(vec![32], 64, 1).padded_length(), 64);
    }

    #[test]
    fn id_round_trip() {
        let a = Atom {
            scale_idx: 5,
            shift_offset: 63,
            time_index: 1000,
            freq_bin: 511,
        };
        assert_eq!(Atom::from_id(a.id()), a);
    }

    #[test]
    fn atoms_are_unit_norm_and_windowed() {
        let d = Dictionary::new(DictionarySpec::new(vec![16, 64], 256, 4)).unwrap();
        for atom in d.atoms().step_by(37) {
            let w = d.synthesize_atom(&atom).unwrap();
            assert!((w.norm() - 1.0).abs() < 1e-12, "{atom:?}");
        }
        let atom = Atom {
            scale_idx: 0,
            shift_offset: 0,
            time_index: 6,
            freq_bin: 0,
        };
        let w = d.synthesize_atom(&atom).unwrap();
        for (i, x) in w.samples().iter().enumerate() {
            if !(48..64).contains(&i) {
                assert_eq!(*x, 0.0);
            }
        }
    }

    #[test]
    fn synthesize_rejects_invalid_atom() {
        let d = Dictionary::new(DictionarySpec::new(vec![16], 64, 2)).unwrap();
        let bad = Atom {
            scale_idx: 0,
            shift_offset: 2,
            time_index: 0,
            freq_bin: 0,
        };
        assert!(d.synthesize_atom(&bad).is_err());
        assert!(d.reconstruct(&[(bad.id(), 1.0)]).is_err());
    }

    #[test]
    fn analyze_self_and_zero() {
        let d = Dictionary::new(DictionarySpec::new(vec![16, 32], 128, 4)).unwrap();
        let atom = Atom {
            scale_idx: 1,
            shift_offset: 3,
            time_index: 2,
            freq_bin: 5,
        };
        let w = d.synthesize_atom(&atom).unwrap();
        let sel = SubdictionarySelection::new(vec![0, 3]);
        let t = d.analyze(&sel, &w).unwrap();
        assert!((t.get(&atom).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(t.argmax().0, atom);
        for (a, c) in t.iter().filter(|(a, _)| a.scale_idx == 1 && *a != atom) {
            assert!(c.abs() < 1e-10, "{a:?} {c}");
        }
        let z = d.analyze(&sel, &Signal::zeros(128)).unwrap();
        assert!(z.iter().all(|(_, c)| c == 0.0));
        assert_eq!(z.len(), d.subdictionary_len());
    }

    #[test]
    fn odd_hop_basis_is_orthonormal() {
        let d = Dictionary::new(DictionarySpec::new(vec![6], 24, 1)).unwrap();
        let x = random_vec(24, 9);
        let t = d
            .analyze(
                &SubdictionarySelection::new(vec![0]),
                &Signal::new(x.clone()).unwrap(),
            )
            .unwrap();
        let e: f64 = x.iter().map(|v| v * v).sum();
        assert!((t.energy() - e).abs() < 1e-10 * e);
        for (a, c) in t.iter() {
            let w = d.synthesize_atom(&a).unwrap();
            assert!((c - crate::signal::dot(w.samples(), &x)).abs() < 1e-10);
        }
    }

    #[test]
    fn analyze_rejects_bad_length() {
        let d = Dictionary::new(DictionarySpec::new(vec![16], 100, 1)).unwrap();
        let sel = SubdictionarySelection::new(vec![0]);
        assert!(d.analyze(&sel, &Signal::zeros(100)).is_ok());
        assert!(d.analyze(&sel, &Signal::zeros(128)).is_ok());
        assert!(matches!(
            d.analyze(&sel, &Signal::zeros(99)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn reconstruct_linearity() {
        let d = Dictionary::new(DictionarySpec::new(vec![16], 64, 2)).unwrap();
        assert!(d
            .reconstruct(&[])
            .unwrap()
            .samples()
            .iter()
            .all(|&x| x == 0.0));
        let a = Atom {
            scale_idx: 0,
            shift_offset: 1,
            time_index: 3,
            freq_bin: 2,
        }
        .id();
        let two = d.reconstruct(&[(a, 2.0)]).unwrap();
        assert!((two.norm() - 2.0).abs() < 1e-12);
        let split = d.reconstruct(&[(a, 0.5), (a, 1.25)]).unwrap();
        let merged = d.reconstruct(&[(a, 1.75)]).unwrap();
        for (x, y) in split.samples().iter().zip(merged.samples()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn draws_are_deterministic_and_full_cover_when_g_is_one() {
        let d1 = Dictionary::new(DictionarySpec::new(vec![16, 32], 64, 1)).unwrap();
        let sel = d1.draw_subdictionary(&mut derive_stream(3, 0));
        assert_eq!(sel.offsets(), &[0, 0]);
        let d8 = Dictionary::new(DictionarySpec::new(vec![16, 32], 64, 8)).unwrap();
        let a = d8.draw_subdictionary(&mut derive_stream(3, 0));
        let b = d8.draw_subdictionary(&mut derive_stream(3, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn offset_frequencies_are_uniform() {
        let g = 8;
        let d = Dictionary::new(DictionarySpec::new(vec![16, 32, 64], 128, g)).unwrap();
        let mut rng = derive_stream(11, 0);
        let draws = 10_000;
        let mut counts = vec![vec![0usize; g]; 3];
        for _ in 0..draws {
            let sel = d.draw_subdictionary(&mut rng);
            for (s, &o) in sel.offsets().iter().enumerate() {
                counts[s][o] += 1;
            }
        }
        let p = 1.0 / g as f64;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for row in &counts {
            for &c in row {
                assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{row:?}");
            }
        }
    }
}
