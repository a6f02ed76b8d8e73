use serde::{Deserialize, Serialize};

use super::{
    CusumState, DeShiryaevState, FractionalShiryaevState, GlrGaussianState, MixtureGaussianState,
    SequentialDetector, ShiryaevState, SrState,
};
use crate::error::{QcdError, Result};

/// Serializable description of a detector and its thresholds.
///
/// Each variant has one primary threshold, the one swept by trade-off runs
/// and searched by calibration:
///
/// | algorithm | threshold | natural scale |
/// |---|---|---|
/// | `shiryaev`, `de_shiryaev`, `fractional_shiryaev` | A | posterior in (0, 1) |
/// | `cusum`, `glr_gaussian` | b | statistic |
/// | `shiryaev_roberts`, `mixture_gaussian` | B | likelihood-ratio scale |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    Shiryaev {
        rho: f64,
        threshold: f64,
    },
    Cusum {
        threshold: f64,
    },
    ShiryaevRoberts {
        threshold: f64,
        #[serde(default)]
        head_start: f64,
    },
    GlrGaussian {
        threshold: f64,
        window: usize,
        #[serde(default)]
        min_effect: f64,
    },
    MixtureGaussian {
        threshold: f64,
        window: usize,
        prior_mean: f64,
        prior_var: f64,
    },
    DeShiryaev {
        rho: f64,
        threshold: f64,
        skip_threshold: f64,
    },
    FractionalShiryaev {
        rho: f64,
        threshold: f64,
        period: u64,
    },
}

impl DetectorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorSpec::Shiryaev { .. } => "shiryaev",
            DetectorSpec::Cusum { .. } => "cusum",
            DetectorSpec::ShiryaevRoberts { head_start, .. } if *head_start > 0.0 => "sr_r",
            DetectorSpec::ShiryaevRoberts { .. } => "sr",
            DetectorSpec::GlrGaussian { .. } => "glr_gaussian",
            DetectorSpec::MixtureGaussian { .. } => "mixture_gaussian",
            DetectorSpec::DeShiryaev { .. } => "de_shiryaev",
            DetectorSpec::FractionalShiryaev { .. } => "fractional_shiryaev",
        }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            DetectorSpec::Shiryaev { threshold, .. }
            | DetectorSpec::Cusum { threshold }
            | DetectorSpec::ShiryaevRoberts { threshold, .. }
            | DetectorSpec::GlrGaussian { threshold, .. }
            | DetectorSpec::MixtureGaussian { threshold, .. }
            | DetectorSpec::DeShiryaev { threshold, .. }
            | DetectorSpec::FractionalShiryaev { threshold, .. } => threshold,
        }
    }

    pub fn with_threshold(&self, t: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            DetectorSpec::Shiryaev { threshold, .. }
            | DetectorSpec::Cusum { threshold }
            | DetectorSpec::ShiryaevRoberts { threshold, .. }
            | DetectorSpec::GlrGaussian { threshold, .. }
            | DetectorSpec::MixtureGaussian { threshold, .. }
            | DetectorSpec::DeShiryaev { threshold, .. }
            | DetectorSpec::FractionalShiryaev { threshold, .. } => *threshold = t,
        }
        out
    }

    /// Bayesian rules are built around a geometric prior and constrained by PFA.
    pub fn is_bayesian(&self) -> bool {
        matches!(
            self,
            DetectorSpec::Shiryaev { .. } | DetectorSpec::DeShiryaev { .. } | DetectorSpec::FractionalShiryaev { .. }
        )
    }

    /// Whether the detector reads raw Gaussian observations instead of LLRs.
    pub fn needs_gaussian_observations(&self) -> bool {
        matches!(self, DetectorSpec::GlrGaussian { .. } | DetectorSpec::MixtureGaussian { .. })
    }

    /// Whether the worst-case delay equals `E_1[τ − 1]`: the statistic starts
    /// at its minimum and never drops below it, so a change at time 1 is the
    /// worst case. True for CuSum and SR started from 0.
    pub fn worst_case_at_first_step(&self) -> bool {
        match self {
            DetectorSpec::Cusum { .. } => true,
            DetectorSpec::ShiryaevRoberts { head_start, .. } => *head_start == 0.0,
            _ => false,
        }
    }

    /// Map the threshold to a scale on which it is unbounded and roughly
    /// linear in `|ln α|`: log-odds for posterior thresholds, log for
    /// likelihood-ratio thresholds, identity otherwise.
    pub fn threshold_to_scale(&self, t: f64) -> f64 {
        match self {
            DetectorSpec::Shiryaev { .. } | DetectorSpec::DeShiryaev { .. } | DetectorSpec::FractionalShiryaev { .. } => {
                (t / (1.0 - t)).ln()
            }
            DetectorSpec::ShiryaevRoberts { .. } | DetectorSpec::MixtureGaussian { .. } => t.ln(),
            DetectorSpec::Cusum { .. } | DetectorSpec::GlrGaussian { .. } => t,
        }
    }

    pub fn threshold_from_scale(&self, u: f64) -> f64 {
        match self {
            DetectorSpec::Shiryaev { .. } | DetectorSpec::DeShiryaev { .. } | DetectorSpec::FractionalShiryaev { .. } => {
                1.0 / (1.0 + (-u).exp())
            }
            DetectorSpec::ShiryaevRoberts { .. } | DetectorSpec::MixtureGaussian { .. } => u.exp(),
            DetectorSpec::Cusum { .. } | DetectorSpec::GlrGaussian { .. } => u,
        }
    }

    /// Threshold that guarantees the false-alarm constraint `α` without
    /// simulation, where one is known: `A = 1 − α` for the Shiryaev family,
    /// `B = 1/α` for SR and the mixture test, `b = |ln α|` for CuSum.
    pub fn analytic_threshold(&self, alpha: f64) -> Option<f64> {
        match self {
            DetectorSpec::Shiryaev { .. } | DetectorSpec::DeShiryaev { .. } | DetectorSpec::FractionalShiryaev { .. } => {
                Some(1.0 - alpha)
            }
            DetectorSpec::ShiryaevRoberts { head_start, .. } if *head_start == 0.0 => Some(1.0 / alpha),
            DetectorSpec::MixtureGaussian { .. } => Some(1.0 / alpha),
            DetectorSpec::Cusum { .. } => Some(alpha.ln().abs()),
            _ => None,
        }
    }

    /// Build a fresh detector. `gaussian_baseline` is the pre-change
    /// `(mean, sd)` required by the GLR and mixture tests.
    pub fn build(&self, gaussian_baseline: Option<(f64, f64)>) -> Result<Box<dyn SequentialDetector>> {
        let baseline = || {
            gaussian_baseline.ok_or_else(|| {
                QcdError::invalid_plan(format!("{} needs a Gaussian mean-shift model", self.name()))
            })
        };
        Ok(match *self {
            DetectorSpec::Shiryaev { rho, threshold } => Box::new(ShiryaevState::new(rho, threshold)?),
            DetectorSpec::Cusum { threshold } => Box::new(CusumState::new(threshold)?),
            DetectorSpec::ShiryaevRoberts { threshold, head_start } => {
                Box::new(SrState::with_head_start(head_start, threshold)?)
            }
            DetectorSpec::GlrGaussian { threshold, window, min_effect } => {
                let (mu0, sigma) = baseline()?;
                Box::new(
                    GlrGaussianState::new(window, threshold)?
                        .with_baseline(mu0, sigma)?
                        .with_min_effect(min_effect)?,
                )
            }
            DetectorSpec::MixtureGaussian { threshold, window, prior_mean, prior_var } => {
                let (mu0, sigma) = baseline()?;
                Box::new(MixtureGaussianState::new(window, prior_mean, prior_var, threshold)?.with_baseline(mu0, sigma)?)
            }
            DetectorSpec::DeShiryaev { rho, threshold, skip_threshold } => {
                Box::new(DeShiryaevState::new(rho, threshold, skip_threshold)?)
            }
            DetectorSpec::FractionalShiryaev { rho, threshold, period } => {
                Box::new(FractionalShiryaevState::new(rho, threshold, period)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_round_trips() {
        let specs = [
            DetectorSpec::Shiryaev { rho: 0.01, threshold: 0.99 },
            DetectorSpec::Cusum { threshold: 4.6 },
            DetectorSpec::ShiryaevRoberts { threshold: 100.0, head_start: 0.0 },
        ];
        for s in specs {
            let t = s.threshold();
            let back = s.threshold_from_scale(s.threshold_to_scale(t));
            assert!((back - t).abs() < 1e-12 * t.max(1.0));
        }
    }

    #[test]
    fn analytic_thresholds() {
        let sh = DetectorSpec::Shiryaev { rho: 0.01, threshold: 0.5 };
        let a = sh.analytic_threshold(0.01).unwrap();
        assert!((a - 0.99).abs() < 1e-15);
        assert!((a / (1.0 - a) - 99.0).abs() < 1e-9);
        let sr = DetectorSpec::ShiryaevRoberts { threshold: 1.0, head_start: 0.0 };
        assert!((sr.analytic_threshold(0.01).unwrap() - 100.0).abs() < 1e-12);
        let cu = DetectorSpec::Cusum { threshold: 1.0 };
        assert!((cu.analytic_threshold((-4.6f64).exp()).unwrap() - 4.6).abs() < 1e-12);
        let srr = DetectorSpec::ShiryaevRoberts { threshold: 1.0, head_start: 5.0 };
        assert_eq!(srr.analytic_threshold(0.01), None);
    }

    #[test]
    fn gaussian_detectors_need_baseline() {
        let glr = DetectorSpec::GlrGaussian { threshold: 3.0, window: 10, min_effect: 0.0 };
        assert!(glr.build(None).is_err());
        assert!(glr.build(Some((0.0, 1.0))).is_ok());
    }

    #[test]
    fn parses_from_toml() {
        let s: DetectorSpec = toml::from_str("algorithm = \"cusum\"\nthreshold = 4.6").unwrap();
        assert_eq!(s, DetectorSpec::Cusum { threshold: 4.6 });
        let bad: std::result::Result<DetectorSpec, _> =
            toml::from_str("algorithm = \"cusum\"\nthreshold = 4.6\nbogus = 1");
        assert!(bad.is_err());
    }
}
