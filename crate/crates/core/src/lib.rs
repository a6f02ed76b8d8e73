//! Quickest change detection.
//!
//! Sequential detectors for a change in the distribution of an observation
//! stream, together with the machinery needed to evaluate them:
//!
//! - [`dist`]: pre/post-change observation models, likelihood ratios,
//!   K-L divergences and seeded sampling.
//! - [`detectors`]: one-observation-at-a-time state machines for Shiryaev,
//!   CuSum, Shiryaev-Roberts (and SR-r), window-limited GLR and mixture
//!   tests for a Gaussian mean, and the data-efficient Shiryaev rule.
//! - [`harness`]: a deterministic Monte Carlo engine estimating ADD, PFA,
//!   FAR, WADD/CADD and ANO, plus threshold calibration and trade-off sweeps.
//! - [`asymptotics`]: first-order delay formulas and renewal-theoretic
//!   second-order approximations driven by simulated overshoot constants.
//! - [`decentralized`]: multi-sensor simulation with MLR quantizers and
//!   fusion-center stopping rules.
//! - [`cli`]: experiment configuration files and CSV reporting used by the
//!   `qcd` binary.


pub mod asymptotics;
pub mod cli;
pub mod decentralized;
pub mod detectors;
pub mod dist;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod rng;

pub use error::{QcdError, Result};
