#![allow(dead_code)]

use bird::dictionary::{Dictionary, DictionarySpec, ProjectionTable};
use bird::rng::{derive_stream, RandomStream};
use bird::signal::Signal;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(n: usize, rng: &mut RandomStream) -> Signal {
    Signal::new((0..n).map(|_| StandardNormal.sample(&mut *rng)).collect()).unwrap()
}

pub fn gaussian_seeded(n: usize, seed: u64) -> Signal {
    gaussian(n, &mut derive_stream(seed, 99))
}

pub fn dict(scales: &[usize], n: usize, g: usize) -> Dictionary {
    Dictionary::new(DictionarySpec::new(scales.to_vec(), n, g)).unwrap()
}

/// Inner products computed one synthesized atom at a time.
pub fn brute_force(dict: &Dictionary, table: &ProjectionTable, x: &Signal) -> Vec<f64> {
    let mut padded = x.samples().to_vec();
    padded.resize(dict.padded_len(), 0.0);
    table
        .iter()
        .map(|(atom, _)| {
            let phi = dict.synthesize_atom(&atom).unwrap();
            phi.samples().iter().zip(&padded).map(|(a, b)| a * b).sum()
        })
        .collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
