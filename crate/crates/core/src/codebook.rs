//! Codebook construction and update rules.

use rand::Rng;

use crate::error::{Error, Result};
use crate::metaatom::{CapacitanceBounds, Codeword};
use crate::rng::{uniform, SeedTree};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    /// Random-adjacency perturbation half-width, farads.
    pub ra: f64,
    /// Direction codebook half-width (and actor output bound), farads.
    pub dpic: f64,
}

impl StepSizes {
    pub fn new(ra: f64, dpic: f64) -> Result<Self> {
        if !(ra > 0.0 && dpic > 0.0) {
            return Err(Error::config("step sizes must be positive"));
        }
        Ok(Self { ra, dpic })
    }

    /// (C_max - C_min)/5 for RA and (C_max - C_min)/4 for DPIC.
    pub fn from_bounds(bounds: &CapacitanceBounds) -> Self {
        Self {
            ra: bounds.width() / 5.0,
            dpic: bounds.width() / 4.0,
        }
    }
}

fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, dims: usize, low: f64, high: f64) -> Vec<f64> {
    (0..dims).map(|_| uniform(rng, low, high)).collect()
}

/// `count` random codewords with i.i.d. Uniform(low, high) entries.
pub fn rvq_codebook<R: Rng + ?Sized>(count: usize, dims: usize, low: f64, high: f64, rng: &mut R) -> Vec<Codeword> {
    (0..count)
        .map(|_| Codeword::new(uniform_vec(rng, dims, low, high)))
        .collect()
}

/// Fixed set of K step vectors shared by the BS and the IRS.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCodebook {
    entries: Vec<Vec<f64>>,
    seed: u64,
    delta: f64,
}

impl DirectionCodebook {
    /// K vectors with entries i.i.d. Uniform(-delta, delta), farads. The
    /// entries depend only on (K, dims, delta, seed).
    pub fn generate(k: usize, dims: usize, delta: f64, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("direction codebook needs K >= 1"));
        }
        let mut rng = SeedTree::new(seed).stream("direction-codebook", 0);
        let entries = (0..k).map(|_| uniform_vec(&mut rng, dims, -delta, delta)).collect();
        Ok(Self { entries, seed, delta })
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.entries[k]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// FNV-1a over the entry bit patterns; constant for the lifetime of the codebook.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.entries.iter().flatten() {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Random adjacency: M perturbations of the selected codeword, clipped to bounds.
pub fn ra_update<R: Rng + ?Sized>(
    q_star: &Codeword,
    count: usize,
    delta: f64,
    bounds: &CapacitanceBounds,
    rng: &mut R,
) -> Vec<Codeword> {
    (0..count)
        .map(|_| {
            Codeword::new(
                q_star
                    .values()
                    .iter()
                    .map(|&c| bounds.clip(c + uniform(rng, -delta, delta)))
                    .collect(),
            )
        })
        .collect()
}

/// clip(q + d, bounds) and the number of entries of q + d strictly outside bounds.
pub fn dpic_apply(q: &Codeword, direction: &[f64], bounds: &CapacitanceBounds) -> (Codeword, usize) {
    assert_eq!(q.len(), direction.len(), "direction dims differ from codeword dims");
    let mut clipped = 0;
    let values = q
        .values()
        .iter()
        .zip(direction)
        .map(|(&c, &d)| {
            let raw = c + d;
            if raw < bounds.c_min || raw > bounds.c_max {
                clipped += 1;
            }
            bounds.clip(raw)
        })
        .collect();
    (Codeword::new(values), clipped)
}
