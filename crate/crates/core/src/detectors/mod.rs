//! Detector state machines.
//!
//! Each detector is advanced one time step at a time and reports whether it
//! has stopped. Stopping happens at the first step where the statistic is
//! greater than or equal to its threshold. Statistics that can grow without
//! bound (Λ, R, the mixture integral) are carried as logarithms.

mod cusum;
mod data_efficient;
mod glr;
mod shiryaev;
mod spec;
mod sr;
mod stream;

pub use cusum::{brute_force_cusum, CusumState};
pub use data_efficient::{DeShiryaevState, FractionalShiryaevState};
pub use glr::{default_window, GlrGaussianState, MixtureGaussianState};
pub use shiryaev::{posterior_update, prior_update, ShiryaevLambdaState, ShiryaevRState, ShiryaevState};
pub use spec::DetectorSpec;
pub use sr::SrState;
pub use stream::{run_generalized_cusum, ConstantDrift, GaussianAr1Llr, LlrStream};

use crate::error::{QcdError, Result};

/// One time step's data as seen by a detector: the raw value and its
/// log-likelihood ratio under the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub llr: f64,
}

/// Common driving interface used by the simulation harness.
pub trait SequentialDetector: Send {
    /// Whether the observation at the next time step should be acquired.
    fn wants_observation(&self) -> bool {
        true
    }

    /// Advance one time step. `obs` must be `Some` exactly when
    /// [`wants_observation`](Self::wants_observation) returned true.
    /// Returns whether the detector has stopped.
    fn advance(&mut self, obs: Option<Observation>) -> Result<bool>;

    /// Current value of the detection statistic, on its natural scale.
    fn statistic(&self) -> f64;

    fn is_stopped(&self) -> bool;

    /// Observations actually used so far.
    fn observations_used(&self) -> u64;
}

pub(crate) fn require_observation(obs: Option<Observation>) -> Result<Observation> {
    obs.ok_or_else(|| QcdError::ObservationContract("detector expected an observation".into()))
}

pub(crate) fn check_llr(llr: f64) -> Result<()> {
    if llr.is_finite() {
        Ok(())
    } else {
        Err(QcdError::invalid_input(format!("log-likelihood ratio must be finite, got {llr}")))
    }
}
