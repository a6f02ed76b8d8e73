use rand_distr::{Distribution, StandardNormal};

use super::CusumState;
use crate::error::Result;
use crate::rng::SimRng;

/// A source of conditional log-likelihood ratios
/// `Y_i = ln f_{1,i}(X_i | X_1^{i−1}) − ln f_{0,i}(X_i | X_1^{i−1})`.
///
/// Any `f64` iterator is an `LlrStream`.
pub trait LlrStream: Iterator<Item = f64> {}

impl<I: Iterator<Item = f64>> LlrStream for I {}

/// Deterministic stream yielding the same value forever.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDrift(pub f64);

impl Iterator for ConstantDrift {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.0)
    }
}

/// Conditional LLRs of a Gaussian AR(1) process whose innovation mean jumps
/// from 0 to `shift` at `change_at`:
/// `X_n = φ X_{n−1} + ε_n` before, `X_n = φ X_{n−1} + shift + ε_n` after.
/// The observations are dependent, but `Y_n = shift·(X_n − φX_{n−1}) − shift²/2`.
#[derive(Debug, Clone)]
pub struct GaussianAr1Llr {
    phi: f64,
    shift: f64,
    change_at: Option<u64>,
    prev: f64,
    n: u64,
    rng: SimRng,
}

impl GaussianAr1Llr {
    pub fn new(phi: f64, shift: f64, change_at: Option<u64>, rng: SimRng) -> Self {
        Self { phi, shift, change_at, prev: 0.0, n: 0, rng }
    }

    /// Last generated observation.
    pub fn last_observation(&self) -> f64 {
        self.prev
    }
}

impl Iterator for GaussianAr1Llr {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        self.n += 1;
        let mean_shift = match self.change_at {
            Some(g) if self.n >= g => self.shift,
            _ => 0.0,
        };
        let eps: f64 = StandardNormal.sample(&mut self.rng);
        let x = self.phi * self.prev + mean_shift + eps;
        let y = self.shift * (x - self.phi * self.prev) - 0.5 * self.shift * self.shift;
        self.prev = x;
        Some(y)
    }
}

/// Generalized CuSum `C_n = max_{1≤k≤n} Σ_{i=k}^n Y_i` driven by a stream.
/// Returns the stopping time, or `None` if neither the threshold was reached
/// within `max_steps` nor the stream continued.
pub fn run_generalized_cusum<S: LlrStream>(stream: S, threshold_b: f64, max_steps: u64) -> Result<Option<u64>> {
    let mut state = CusumState::new(threshold_b)?;
    for y in stream.take(max_steps as usize) {
        if state.step(y)? {
            return Ok(Some(state.steps()));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    #[test]
    fn constant_drift_stops_at_ceiling() {
        assert_eq!(run_generalized_cusum(ConstantDrift(0.5), 3.0, 100).unwrap(), Some(6));
        assert_eq!(run_generalized_cusum(ConstantDrift(0.7), 3.0, 100).unwrap(), Some(5));
        assert_eq!(run_generalized_cusum(ConstantDrift(-0.1), 3.0, 100).unwrap(), None);
    }

    #[test]
    fn ar1_llr_has_expected_drift() {
        let n = 200_000;
        let pre: f64 = GaussianAr1Llr::new(0.6, 0.5, None, trial_rng(3, 0)).take(n).sum::<f64>() / n as f64;
        let post: f64 = GaussianAr1Llr::new(0.6, 0.5, Some(1), trial_rng(3, 1)).take(n).sum::<f64>() / n as f64;
        // E[Y] = ∓ shift²/2 = ∓0.125, sd of Y = 0.5
        assert!((pre + 0.125).abs() < 0.01, "pre drift {pre}");
        assert!((post - 0.125).abs() < 0.01, "post drift {post}");
    }
}
