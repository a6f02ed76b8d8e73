use super::shiryaev::{posterior_update, prior_update};
use super::{check_llr, Observation, SequentialDetector};
use crate::error::{QcdError, Result};

/// Data-efficient Shiryaev rule ψ(A, B).
///
/// The next observation is taken only if the current posterior is at least
/// `B`; on skipped steps the posterior follows the prior-only map
/// `p ← p + (1 − p)ρ`. Stops at the first step with `p ≥ A`. With `B = 0`
/// every observation is taken and the trajectory is the Shiryaev one.
#[derive(Debug, Clone, PartialEq)]
pub struct DeShiryaevState {
    p: f64,
    rho: f64,
    threshold: f64,
    skip_threshold: f64,
    take_next: bool,
    observations_used: u64,
    stopped: bool,
    n: u64,
}

impl DeShiryaevState {
    /// `threshold_a` is the stopping threshold A, `skip_threshold_b` the
    /// sampling threshold B (B = 1 never samples).
    pub fn new(rho: f64, threshold_a: f64, skip_threshold_b: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(QcdError::invalid_model(format!("rho must lie in [0, 1), got {rho}")));
        }
        if !(threshold_a > 0.0 && threshold_a < 1.0) {
            return Err(QcdError::invalid_model(format!("A must lie in (0, 1), got {threshold_a}")));
        }
        if !(0.0..=1.0).contains(&skip_threshold_b) {
            return Err(QcdError::invalid_model(format!("B must lie in [0, 1], got {skip_threshold_b}")));
        }
        Ok(Self {
            p: 0.0,
            rho,
            threshold: threshold_a,
            skip_threshold: skip_threshold_b,
            take_next: 0.0 >= skip_threshold_b,
            observations_used: 0,
            stopped: false,
            n: 0,
        })
    }

    pub fn with_posterior(mut self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(QcdError::invalid_input(format!("posterior must lie in [0, 1], got {p}")));
        }
        self.p = p;
        self.take_next = p >= self.skip_threshold;
        Ok(self)
    }

    /// Advance one step; `llr` must be present exactly when
    /// [`take_next`](Self::take_next) is set.
    pub fn step(&mut self, llr: Option<f64>) -> Result<bool> {
        if self.stopped {
            return Err(QcdError::AlreadyStopped(self.n));
        }
        match (self.take_next, llr) {
            (true, Some(l)) => {
                check_llr(l)?;
                self.p = posterior_update(self.p, self.rho, l);
                self.observations_used += 1;
            }
            (false, None) => self.p = prior_update(self.p, self.rho),
            (true, None) => {
                return Err(QcdError::ObservationContract(format!(
                    "step {} requires an observation",
                    self.n + 1
                )))
            }
            (false, Some(_)) => {
                return Err(QcdError::ObservationContract(format!(
                    "step {} skips its observation but one was supplied",
                    self.n + 1
                )))
            }
        }
        self.n += 1;
        self.take_next = self.p >= self.skip_threshold;
        self.stopped = self.p >= self.threshold;
        Ok(self.stopped)
    }

    pub fn posterior(&self) -> f64 {
        self.p
    }

    pub fn take_next(&self) -> bool {
        self.take_next
    }

    pub fn observations_used(&self) -> u64 {
        self.observations_used
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }
}

impl SequentialDetector for DeShiryaevState {
    fn wants_observation(&self) -> bool {
        self.take_next
    }

    fn advance(&mut self, obs: Option<Observation>) -> Result<bool> {
        self.step(obs.map(|o| o.llr))
    }

    fn statistic(&self) -> f64 {
        self.p
    }

    fn is_stopped(&self) -> bool {
        self.stopped
    }

    fn observations_used(&self) -> u64 {
        self.observations_used
    }
}

/// Shiryaev rule on a fixed sub-sampling schedule: observations are taken at
/// steps 1, 1 + period, 1 + 2·period, ... and the posterior follows the
/// prior-only map in between. The classical fractional-sampling baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalShiryaevState {
    p: f64,
    rho: f64,
    threshold: f64,
    period: u64,
    observations_used: u64,
    stopped: bool,
    n: u64,
}

impl FractionalShiryaevState {
    pub fn new(rho: f64, threshold_a: f64, period: u64) -> Result<Self> {
        if period == 0 {
            return Err(QcdError::invalid_model("sampling period must be >= 1"));
        }
        // reuse the parameter checks
        DeShiryaevState::new(rho, threshold_a, 0.0)?;
        Ok(Self { p: 0.0, rho, threshold: threshold_a, period, observations_used: 0, stopped: false, n: 0 })
    }

    pub fn posterior(&self) -> f64 {
        self.p
    }
}

impl SequentialDetector for FractionalShiryaevState {
    fn wants_observation(&self) -> bool {
        self.n % self.period == 0
    }

    fn advance(&mut self, obs: Option<Observation>) -> Result<bool> {
        if self.stopped {
            return Err(QcdError::AlreadyStopped(self.n));
        }
        match (self.wants_observation(), obs) {
            (true, Some(o)) => {
                check_llr(o.llr)?;
                self.p = posterior_update(self.p, self.rho, o.llr);
                self.observations_used += 1;
            }
            (false, None) => self.p = prior_update(self.p, self.rho),
            _ => {
                return Err(QcdError::ObservationContract(format!(
                    "observation presence does not match the sampling schedule at step {}",
                    self.n + 1
                )))
            }
        }
        self.n += 1;
        self.stopped = self.p >= self.threshold;
        Ok(self.stopped)
    }

    fn statistic(&self) -> f64 {
        self.p
    }

    fn is_stopped(&self) -> bool {
        self.stopped
    }

    fn observations_used(&self) -> u64 {
        self.observations_used
    }
}
