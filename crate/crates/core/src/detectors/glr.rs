//! Window-limited GLR and mixture tests for a shift in the mean of Gaussian
//! observations with known pre-change mean and variance.
//!
//! Both tests scan candidate change points `k` over the last `m` steps.
//! A candidate contributes the segment `(k, n]` with sum `s = S_n − S_k` of
//! standardized observations and length `n − k`. Candidates older than
//! `n − m` are evicted first-in first-out.

use std::collections::VecDeque;

use super::{require_observation, Observation, SequentialDetector};
use crate::error::{QcdError, Result};

/// Default window `ceil(3 |ln α| / D)`.
pub fn default_window(alpha: f64, kl: f64) -> usize {
    ((3.0 * alpha.ln().abs() / kl).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
struct SegmentWindow {
    capacity: usize,
    // (k, S_k) for each retained candidate change point
    starts: VecDeque<(u64, f64)>,
    n: u64,
    sum: f64,
}

impl SegmentWindow {
    fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(QcdError::invalid_model("window capacity must be >= 1"));
        }
        Ok(Self { capacity, starts: VecDeque::with_capacity(capacity + 1), n: 0, sum: 0.0 })
    }

    fn push(&mut self, z: f64) {
        self.starts.push_back((self.n, self.sum));
        if self.starts.len() > self.capacity {
            self.starts.pop_front();
        }
        self.n += 1;
        self.sum += z;
    }

    /// `(segment length, segment sum)` for each retained candidate.
    fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.starts.iter().map(move |&(k, sk)| ((self.n - k) as f64, self.sum - sk))
    }
}

fn check_baseline(mu0: f64, sigma: f64) -> Result<()> {
    if !mu0.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
        return Err(QcdError::invalid_model(format!("bad baseline N({mu0}, {sigma}^2)")));
    }
    Ok(())
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(QcdError::invalid_input(format!("observation must be finite, got {x}")))
    }
}

/// Window-limited GLR test for an unknown post-change mean.
///
/// With no effect floor the statistic is `max_k |S_n − S_k| / √(n − k)` and
/// the test stops when it reaches `b`. With a floor `ε > 0`, the maximized
/// log-likelihood ratio of each segment is taken over `|θ| ≥ ε` only, and the
/// reported statistic is `√(2 · max log-GLR)`, which coincides with the
/// unrestricted form whenever every segment's MLE clears the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct GlrGaussianState {
    window: SegmentWindow,
    mu0: f64,
    sigma: f64,
    min_effect: f64,
    threshold: f64,
    max_log_glr: f64,
    stopped: bool,
}

impl GlrGaussianState {
    /// Pre-change law N(0, 1), no effect floor.
    pub fn new(window: usize, threshold_b: f64) -> Result<Self> {
        if !(threshold_b > 0.0) {
            return Err(QcdError::invalid_model(format!("GLR threshold must be > 0, got {threshold_b}")));
        }
        Ok(Self {
            window: SegmentWindow::new(window)?,
            mu0: 0.0,
            sigma: 1.0,
            min_effect: 0.0,
            threshold: threshold_b,
            max_log_glr: 0.0,
            stopped: false,
        })
    }

    pub fn with_baseline(mut self, mu0: f64, sigma: f64) -> Result<Self> {
        check_baseline(mu0, sigma)?;
        self.mu0 = mu0;
        self.sigma = sigma;
        Ok(self)
    }

    /// Restrict the post-change mean to `|θ| ≥ eps` (in units of σ).
    /// The customary choice is `eps = 1 / |ln α|`.
    pub fn with_min_effect(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(QcdError::invalid_model(format!("effect floor must be finite and >= 0, got {eps}")));
        }
        self.min_effect = eps;
        Ok(self)
    }

    fn segment_log_glr(&self, len: f64, s: f64) -> f64 {
        let mle = s / len;
        if mle.abs() >= self.min_effect {
            s * s / (2.0 * len)
        } else {
            let eps = self.min_effect;
            eps * s.abs() - 0.5 * len * eps * eps
        }
    }

    pub fn step(&mut self, x: f64) -> Result<bool> {
        if self.stopped {
            return Err(QcdError::AlreadyStopped(self.window.n));
        }
        check_x(x)?;
        self.window.push((x - self.mu0) / self.sigma);
        self.max_log_glr = self
            .window
            .segments()
            .map(|(len, s)| self.segment_log_glr(len, s))
            .fold(f64::NEG_INFINITY, f64::max);
        self.stopped = self.statistic_value() >= self.threshold;
        Ok(self.stopped)
    }

    fn statistic_value(&self) -> f64 {
        (2.0 * self.max_log_glr.max(0.0)).sqrt()
    }

    pub fn statistic(&self) -> f64 {
        self.statistic_value()
    }

    /// Largest segment log-likelihood ratio in the window.
    pub fn log_glr(&self) -> f64 {
        self.max_log_glr
    }

    pub fn steps(&self) -> u64 {
        self.window.n
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }
}

impl SequentialDetector for GlrGaussianState {
    fn advance(&mut self, obs: Option<Observation>) -> Result<bool> {
        self.step(require_observation(obs)?.x)
    }

    fn statistic(&self) -> f64 {
        self.statistic_value()
    }

    fn is_stopped(&self) -> bool {
        self.stopped
    }

    fn observations_used(&self) -> u64 {
        self.window.n
    }
}

/// Window-limited mixture test: a Gaussian prior `N(g_m, g_v)` on the
/// post-change mean shift is integrated against the segment likelihood ratio,
/// and the test stops when the largest integral reaches the threshold
/// (customarily `1/α`).
///
/// For a segment of length `m` and standardized sum `s` the integral is
/// `(1 + m v)^{-1/2} exp((v s² + 2 g s − m g²) / (2(1 + m v)))` with `g`, `v`
/// the prior moments in units of σ.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureGaussianState {
    window: SegmentWindow,
    mu0: f64,
    sigma: f64,
    prior_mean: f64,
    prior_var: f64,
    log_threshold: f64,
    log_stat: f64,
    stopped: bool,
}

impl MixtureGaussianState {
    /// Pre-change law N(0, 1); prior on the shift `N(prior_mean, prior_var)`.
    pub fn new(window: usize, prior_mean: f64, prior_var: f64, threshold: f64) -> Result<Self> {
        if !(prior_var > 0.0) || !prior_mean.is_finite() {
            return Err(QcdError::invalid_model(format!(
                "mixture prior N({prior_mean}, {prior_var}) needs finite mean and positive variance"
            )));
        }
        if !(threshold > 0.0) {
            return Err(QcdError::invalid_model(format!("mixture threshold must be > 0, got {threshold}")));
        }
        Ok(Self {
            window: SegmentWindow::new(window)?,
            mu0: 0.0,
            sigma: 1.0,
            prior_mean,
            prior_var,
            log_threshold: threshold.ln(),
            log_stat: f64::NEG_INFINITY,
            stopped: false,
        })
    }

    /// Pre-change law `N(mu0, sigma²)`; the prior stays on the raw shift scale.
    pub fn with_baseline(mut self, mu0: f64, sigma: f64) -> Result<Self> {
        check_baseline(mu0, sigma)?;
        self.mu0 = mu0;
        self.sigma = sigma;
        Ok(self)
    }

    fn segment_log_integral(&self, len: f64, s: f64) -> f64 {
        let g = self.prior_mean / self.sigma;
        let v = self.prior_var / (self.sigma * self.sigma);
        let denom = 1.0 + len * v;
        -0.5 * denom.ln() + (v * s * s + 2.0 * g * s - len * g * g) / (2.0 * denom)
    }

    pub fn step(&mut self, x: f64) -> Result<bool> {
        if self.stopped {
            return Err(QcdError::AlreadyStopped(self.window.n));
        }
        check_x(x)?;
        self.window.push((x - self.mu0) / self.sigma);
        self.log_stat = self
            .window
            .segments()
            .map(|(len, s)| self.segment_log_integral(len, s))
            .fold(f64::NEG_INFINITY, f64::max);
        self.stopped = self.log_stat >= self.log_threshold;
        Ok(self.stopped)
    }

    pub fn statistic(&self) -> f64 {
        self.log_stat.exp()
    }

    pub fn log_statistic(&self) -> f64 {
        self.log_stat
    }

    pub fn steps(&self) -> u64 {
        self.window.n
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }
}

impl SequentialDetector for MixtureGaussianState {
    fn advance(&mut self, obs: Option<Observation>) -> Result<bool> {
        self.step(require_observation(obs)?.x)
    }

    fn statistic(&self) -> f64 {
        self.log_stat.exp()
    }

    fn is_stopped(&self) -> bool {
        self.stopped
    }

    fn observations_used(&self) -> u64 {
        self.window.n
    }
}
