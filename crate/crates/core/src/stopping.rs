//! Out-of-patch stopping rule.
//!
//! Keeps the `k` largest out-of-patch accuracies seen so far and halts once
//! more than `k` consecutive iterations fail to beat `gamma` times the
//! smallest of them. The four steps of [`StoppingState::observe`] run in a
//! fixed order; reordering them shifts the halt by one iteration.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Continue,
    Halt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingState {
    gamma: f64,
    k: usize,
    stalled: usize,
    top: Vec<f64>,
    best_iteration: usize,
    last_iteration: usize,
    t_max: usize,
}

impl StoppingState {
    /// `gamma = 1 + ln(patch_rows) / n_rows`, `k = max(1, ceil(ln n_rows))`.
    pub fn new(patch_rows: usize, n_rows: usize, t_max: usize) -> Self {
        let n_rows = n_rows.max(1);
        let gamma = 1.0 + (patch_rows.max(1) as f64).ln() / n_rows as f64;
        let k = ((n_rows as f64).ln().ceil() as usize).max(1);
        Self::with_params(gamma, k, t_max)
    }

    pub fn with_params(gamma: f64, k: usize, t_max: usize) -> Self {
        Self {
            gamma,
            k,
            stalled: 0,
            top: vec![0.0; k.max(1)],
            best_iteration: 0,
            last_iteration: 0,
            t_max,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Consecutive iterations without sufficient progress.
    pub fn stalled(&self) -> usize {
        self.stalled
    }

    /// The `k` largest values seen (zeros until filled), unordered.
    pub fn top_values(&self) -> &[f64] {
        &self.top
    }

    /// Iteration of the first maximum of the observed sequence; 0 before any
    /// value above zero has been seen.
    pub fn best_iteration(&self) -> usize {
        self.best_iteration
    }

    fn min_slot(&self) -> (usize, f64) {
        self.top
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
    }

    fn max_top(&self) -> f64 {
        self.top.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Feeds the out-of-patch accuracy of iteration `t` (1-based, strictly
    /// increasing by one).
    pub fn observe(&mut self, oop: f64, t: usize) -> Result<Decision> {
        if t != self.last_iteration + 1 {
            return Err(Error::OutOfOrder {
                last: self.last_iteration,
                got: t,
            });
        }
        self.last_iteration = t;

        if oop > self.max_top() {
            self.best_iteration = t;
        }
        if self.stalled > self.k || t > self.t_max {
            return Ok(Decision::Halt);
        }
        let (slot, floor) = self.min_slot();
        if oop < self.gamma * floor {
            self.stalled += 1;
        } else {
            self.stalled = 0;
        }
        if oop > floor {
            self.top[slot] = oop;
        }
        Ok(Decision::Continue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(state: &mut StoppingState, seq: &[f64]) -> Option<usize> {
        for (i, &v) in seq.iter().enumerate() {
            if state.observe(v, i + 1).unwrap() == Decision::Halt {
                return Some(i + 1);
            }
        }
        None
    }

    #[test]
    fn parameters_from_shape() {
        let s = StoppingState::new(10, 100, 2000);
        assert!((s.gamma() - (1.0 + 10f64.ln() / 100.0)).abs() < 1e-15);
        assert!((s.gamma() - 1.02303).abs() < 1e-5);
        assert_eq!(s.k(), 5);
        assert_eq!(s.top_values().len(), 5);
        assert_eq!(StoppingState::new(1, 1, 10).k(), 1);
    }

    #[test]
    fn constant_sequence_halts_after_warm_up() {
        let mut s = StoppingState::new(10, 100, 2000);
        let halt = run(&mut s, &[0.8; 50]);
        // top fills during t = 1..=5, stalled counts 1..=6 over t = 6..=11,
        // and the check at t = 12 sees stalled = 6 > k = 5.
        assert_eq!(halt, Some(12));
        assert_eq!(s.best_iteration(), 1);
    }

    #[test]
    fn increasing_sequence_runs_to_t_max() {
        let mut s = StoppingState::new(10, 100, 30);
        let seq: Vec<f64> = (0..40).map(|i| 0.01 * 1.05f64.powi(i)).collect();
        assert_eq!(run(&mut s, &seq), Some(31));
        assert_eq!(s.best_iteration(), 31);
        assert_eq!(s.stalled(), 0);
    }

    #[test]
    fn equal_to_max_does_not_move_best() {
        let mut s = StoppingState::new(10, 100, 100);
        run(&mut s, &[0.5, 0.7, 0.7, 0.6]);
        assert_eq!(s.best_iteration(), 2);
    }

    #[test]
    fn out_of_order_rejected() {
        let mut s = StoppingState::new(10, 100, 100);
        s.observe(0.1, 1).unwrap();
        assert!(s.observe(0.1, 3).is_err());
        assert!(s.observe(0.1, 1).is_err());
        assert!(s.observe(0.1, 2).is_ok());
    }

    proptest! {
        #[test]
        fn best_is_first_argmax(seq in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let mut s = StoppingState::new(20, 500, 10_000);
            let mut prev_min = 0.0;
            let mut prev_max = 0.0;
            let mut seen = seq.len();
            for (i, &v) in seq.iter().enumerate() {
                if s.observe(v, i + 1).unwrap() == Decision::Halt {
                    seen = i + 1;
                    break;
                }
                let lo = s.top_values().iter().copied().fold(f64::INFINITY, f64::min);
                let hi = s.top_values().iter().copied().fold(0.0, f64::max);
                prop_assert!(lo >= prev_min && hi >= prev_max);
                prev_min = lo;
                prev_max = hi;
            }
            let mut best = 0;
            let mut best_v = 0.0;
            for (i, &v) in seq[..seen].iter().enumerate() {
                if v > best_v {
                    best_v = v;
                    best = i + 1;
                }
            }
            prop_assert_eq!(s.best_iteration(), best);
        }

        #[test]
        fn halts_by_t_max_plus_one(seq in proptest::collection::vec(0.0f64..=1.0, 60), t_max in 1usize..50) {
            let mut s = StoppingState::new(5, 50, t_max);
            let halt = run(&mut s, &seq);
            prop_assert!(halt.is_some_and(|h| h <= t_max + 1));
        }
    }
}
