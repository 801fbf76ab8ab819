//! Probability vectors and weighted sampling without replacement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The PRNG behind every random draw. Its name is recorded in model
/// metadata so a run can be reproduced from the seed alone.
pub type MpRng = rand_chacha::ChaCha8Rng;

pub const RNG_ALGORITHM: &str = "chacha8-rand_chacha-0.9";

const SUM_TOLERANCE: f64 = 1e-9;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityVector {
    weights: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidProbabilities(format!("entry {w} is not a nonnegative real")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidProbabilities("uniform over zero elements".into()));
        }
        Ok(Self {
            weights: vec![1.0 / len as f64; len],
        })
    }

    /// Divides `weights` by their sum, accumulated left to right.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidProbabilities(format!("cannot normalize total {total}")));
        }
        for w in weights.iter_mut() {
            *w /= total;
        }
        Self::new(weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| w == u)
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

/// Draws `draw` distinct indices from `0..probs.len()`.
///
/// The result has the law of successive sampling: pick one index with
/// probability proportional to the remaining weights, remove it, repeat.
/// It is realised with exponential race keys (`E_i / w_i`, smallest first),
/// which produces the same ordered sequence distribution in a single pass.
/// Indices are returned in draw order. Every index consumes exactly one
/// uniform from `rng`, so the stream position after a call depends only on
/// the population size.
pub fn sample_without_replacement<R: Rng + ?Sized>(
    probs: &ProbabilityVector,
    draw: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let population = probs.len();
    let positive = probs.as_slice().iter().filter(|&&w| w > 0.0).count();
    if draw > population || draw > positive {
        return Err(Error::InsufficientSupport {
            draw,
            positive,
            population,
        });
    }

    let mut keyed: Vec<(f64, usize)> = probs
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            // 1 - u lies in (0, 1], so the exponential variate is finite.
            let e = -(1.0 - rng.random::<f64>()).ln();
            (if w > 0.0 { e / w } else { f64::INFINITY }, i)
        })
        .collect();
    if draw == 0 {
        return Ok(Vec::new());
    }
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if draw < population {
        keyed.select_nth_unstable_by(draw - 1, by_key);
        keyed.truncate(draw);
    }
    keyed.sort_unstable_by(by_key);
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}
