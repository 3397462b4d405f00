//! Empirical constant brackets and their refinement stability.

use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded generator shared by every randomized routine.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Range `[min, max]` of a set of positive ratios.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Bracket {
    pub fn empty() -> Self {
        Bracket { min: f64::INFINITY, max: f64::NEG_INFINITY, count: 0 }
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut b = Bracket::empty();
        for v in values {
            b.push(v);
        }
        b
    }

    pub fn push(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.count += 1;
    }

    pub fn is_finite(&self) -> bool {
        self.count > 0 && self.min.is_finite() && self.max.is_finite()
    }

    /// `max / min`; infinite when the bracket touches zero.
    pub fn spread(&self) -> f64 {
        if self.min > 0.0 {
            self.max / self.min
        } else {
            f64::INFINITY
        }
    }

    /// Relative change of the spread between two brackets.
    pub fn spread_change(&self, refined: &Bracket) -> f64 {
        relative_change(self.spread(), refined.spread())
    }
}

pub fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
