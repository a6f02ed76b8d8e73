use super::{check_llr, require_observation, Observation, SequentialDetector};
use crate::error::{QcdError, Result};
use crate::numeric::softplus;

/// Shiryaev-Roberts statistic `R_{n+1} = (1 + R_n) L(X_{n+1})` with optional
/// head start `R_0 = r` (the SR-r procedure). Carried as `ln R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrState {
    log_r: f64,
    head_start: f64,
    log_threshold: f64,
    stopped: bool,
    n: u64,
}

impl SrState {
    pub fn new(threshold_b: f64) -> Result<Self> {
        Self::with_head_start(0.0, threshold_b)
    }

    pub fn with_head_start(r0: f64, threshold_b: f64) -> Result<Self> {
        if !(threshold_b > 0.0) {
            return Err(QcdError::invalid_model(format!("SR threshold must be > 0, got {threshold_b}")));
        }
        if !(r0 >= 0.0) || !r0.is_finite() {
            return Err(QcdError::invalid_model(format!("head start must be finite and >= 0, got {r0}")));
        }
        Ok(Self {
            log_r: r0.ln(),
            head_start: r0,
            log_threshold: threshold_b.ln(),
            stopped: false,
            n: 0,
        })
    }

    /// Threshold given as `ln B`, for thresholds beyond the `f64` range.
    pub fn with_log_threshold(r0: f64, log_threshold: f64) -> Result<Self> {
        if log_threshold.is_nan() {
            return Err(QcdError::invalid_model("log threshold is NaN"));
        }
        let mut s = Self::with_head_start(r0, 1.0)?;
        s.log_threshold = log_threshold;
        Ok(s)
    }

    pub fn step(&mut self, llr: f64) -> Result<bool> {
        if self.stopped {
            return Err(QcdError::AlreadyStopped(self.n));
        }
        check_llr(llr)?;
        self.log_r = softplus(self.log_r) + llr;
        self.n += 1;
        self.stopped = self.log_r >= self.log_threshold;
        Ok(self.stopped)
    }

    pub fn r(&self) -> f64 {
        self.log_r.exp()
    }

    pub fn log_r(&self) -> f64 {
        self.log_r
    }

    pub fn head_start(&self) -> f64 {
        self.head_start
    }

    pub fn threshold(&self) -> f64 {
        self.log_threshold.exp()
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }
}

impl SequentialDetector for SrState {
    fn advance(&mut self, obs: Option<Observation>) -> Result<bool> {
        self.step(require_observation(obs)?.llr)
    }

    fn statistic(&self) -> f64 {
        self.r()
    }

    fn is_stopped(&self) -> bool {
        self.stopped
    }

    fn observations_used(&self) -> u64 {
        self.n
    }
}
