use super::{check_llr, require_observation, Observation, SequentialDetector};
use crate::error::{QcdError, Result};

/// Page's CuSum, tracking both the reflected statistic
/// `W_{n+1} = (W_n + Y)^+` and the unreflected `C_{n+1} = (C_n)^+ + Y`.
/// Both cross a positive threshold at the same step; stopping uses `W`.
///
/// The same recursion is the generalized CuSum when `Y` is the conditional
/// log-likelihood ratio of a non-i.i.d. stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumState {
    w: f64,
    c: f64,
    threshold: f64,
    stopped: bool,
    n: u64,
}

impl CusumState {
    pub fn new(threshold_b: f64) -> Result<Self> {
        if !(threshold_b > 0.0) {
            return Err(QcdError::invalid_model(format!("CuSum threshold must be > 0, got {threshold_b}")));
        }
        Ok(Self { w: 0.0, c: 0.0, threshold: threshold_b, stopped: false, n: 0 })
    }

    /// Start from explicit `(W, C)` values.
    pub fn with_values(mut self, w: f64, c: f64) -> Self {
        self.w = w;
        self.c = c;
        self
    }

    pub fn step(&mut self, llr: f64) -> Result<bool> {
        if self.stopped {
            return Err(QcdError::AlreadyStopped(self.n));
        }
        check_llr(llr)?;
        self.w = (self.w + llr).max(0.0);
        self.c = self.c.max(0.0) + llr;
        self.n += 1;
        self.stopped = self.w >= self.threshold;
        Ok(self.stopped)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn steps(&self) -> u64 {
        self.n
    }
}

impl SequentialDetector for CusumState {
    fn advance(&mut self, obs: Option<Observation>) -> Result<bool> {
        self.step(require_observation(obs)?.llr)
    }

    fn statistic(&self) -> f64 {
        self.w
    }

    fn is_stopped(&self) -> bool {
        self.stopped
    }

    fn observations_used(&self) -> u64 {
        self.n
    }
}

/// `C_n = max_{1≤k≤n} Σ_{i=k}^n y_i` for every prefix, by explicit enumeration.
/// Quadratic; meant as a reference for the recursion.
pub fn brute_force_cusum(y: &[f64]) -> Vec<f64> {
    (1..=y.len())
        .map(|n| {
            (1..=n)
                .map(|k| y[k - 1..n].iter().sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_part_clamp() {
        let mut s = CusumState::new(5.0).unwrap();
        s.step(-0.7).unwrap();
        assert_eq!(s.w(), 0.0);
    }

    #[test]
    fn direct_arithmetic() {
        let mut s = CusumState::new(10.0).unwrap().with_values(2.0, -1.0);
        s.step(1.5).unwrap();
        assert_eq!(s.w(), 3.5);
        let mut s = CusumState::new(10.0).unwrap().with_values(0.0, -1.0);
        s.step(0.5).unwrap();
        assert_eq!(s.c(), 0.5);
    }

    #[test]
    fn c_path_matches_explicit_max() {
        let y = [1.0, -3.0, 2.0];
        let mut s = CusumState::new(100.0).unwrap();
        let path: Vec<f64> = y.iter().map(|&v| { s.step(v).unwrap(); s.c() }).collect();
        assert_eq!(path, vec![1.0, -2.0, 2.0]);
        assert_eq!(brute_force_cusum(&y), path);
    }

    #[test]
    fn weak_inequality_stops_on_exact_hit() {
        let mut s = CusumState::new(3.0).unwrap();
        assert!(!s.step(1.5).unwrap());
        assert!(s.step(1.5).unwrap());
        assert_eq!(s.steps(), 2);
    }

    #[test]
    fn rejects_non_positive_threshold() {
        assert!(CusumState::new(0.0).is_err());
        assert!(CusumState::new(f64::NAN).is_err());
    }
}
