//! Observation models: pre/post-change densities, likelihood ratios,
//! K-L divergences, change-point laws and seeded sampling.
//!
//! Gaussian draws use the ziggurat sampler of `rand_distr::StandardNormal`
//! and exponential draws use `rand_distr::Exp1`, both on a ChaCha8 stream.
//! The generator and transforms are fixed, so a `(seed, family, regime,
//! index)` tuple always produces the same value.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{QcdError, Result};
use crate::numeric::adaptive_simpson;

/// Which side of the change point an observation comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// D(f1 ‖ f0)
    PostVsPre,
    /// D(f0 ‖ f1)
    PreVsPost,
}

/// Parametric family of a pre/post density pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    GaussianMeanShift { mu0: f64, mu1: f64, sigma: f64 },
    Bernoulli { p0: f64, p1: f64 },
    ExponentialRate { lam0: f64, lam1: f64 },
}

/// A validated pair of pre-change (`f0`) and post-change (`f1`) densities.
///
/// Construction rejects identical densities and out-of-range parameters, so
/// every `DensityPair` has `0 < D(f1‖f0) < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct DensityPair(Family);

impl TryFrom<Family> for DensityPair {
    type Error = QcdError;

    fn try_from(family: Family) -> Result<Self> {
        DensityPair::new(family)
    }
}

impl From<DensityPair> for Family {
    fn from(pair: DensityPair) -> Family {
        pair.0
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(QcdError::invalid_model(format!("{name} must be finite, got {v}")))
    }
}

impl DensityPair {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::GaussianMeanShift { mu0, mu1, sigma } => {
                finite("mu0", mu0)?;
                finite("mu1", mu1)?;
                finite("sigma", sigma)?;
                if sigma <= 0.0 {
                    return Err(QcdError::invalid_model(format!("sigma must be > 0, got {sigma}")));
                }
                if mu0 == mu1 {
                    return Err(QcdError::invalid_model("pre- and post-change means are equal"));
                }
            }
            Family::Bernoulli { p0, p1 } => {
                for (name, p) in [("p0", p0), ("p1", p1)] {
                    if !(p > 0.0 && p < 1.0) {
                        return Err(QcdError::invalid_model(format!(
                            "{name} must lie strictly inside (0, 1), got {p}"
                        )));
                    }
                }
                if p0 == p1 {
                    return Err(QcdError::invalid_model("pre- and post-change probabilities are equal"));
                }
            }
            Family::ExponentialRate { lam0, lam1 } => {
                for (name, l) in [("lam0", lam0), ("lam1", lam1)] {
                    finite(name, l)?;
                    if l <= 0.0 {
                        return Err(QcdError::invalid_model(format!("{name} must be > 0, got {l}")));
                    }
                }
                if lam0 == lam1 {
                    return Err(QcdError::invalid_model("pre- and post-change rates are equal"));
                }
            }
        }
        Ok(DensityPair(family))
    }

    pub fn gaussian(mu0: f64, mu1: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::GaussianMeanShift { mu0, mu1, sigma })
    }

    pub fn bernoulli(p0: f64, p1: f64) -> Result<Self> {
        Self::new(Family::Bernoulli { p0, p1 })
    }

    pub fn exponential(lam0: f64, lam1: f64) -> Result<Self> {
        Self::new(Family::ExponentialRate { lam0, lam1 })
    }

    pub fn family(&self) -> Family {
        self.0
    }

    /// `log f1(x) − log f0(x)`.
    pub fn log_likelihood_ratio(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(QcdError::invalid_input(format!("observation must be finite, got {x}")));
        }
        match self.0 {
            Family::Bernoulli { .. } if x != 0.0 && x != 1.0 => Err(QcdError::invalid_input(format!(
                "Bernoulli observation must be 0 or 1, got {x}"
            ))),
            Family::ExponentialRate { .. } if x < 0.0 => Err(QcdError::invalid_input(format!(
                "exponential observation must be >= 0, got {x}"
            ))),
            _ => Ok(self.llr(x)),
        }
    }

    /// Unchecked log-likelihood ratio for values known to lie in the support.
    #[inline]
    pub(crate) fn llr(&self, x: f64) -> f64 {
        match self.0 {
            Family::GaussianMeanShift { mu0, mu1, sigma } => {
                (x * (mu1 - mu0) - 0.5 * (mu1 * mu1 - mu0 * mu0)) / (sigma * sigma)
            }
            Family::Bernoulli { p0, p1 } => {
                if x == 1.0 {
                    (p1 / p0).ln()
                } else {
                    ((1.0 - p1) / (1.0 - p0)).ln()
                }
            }
            Family::ExponentialRate { lam0, lam1 } => (lam1 / lam0).ln() - (lam1 - lam0) * x,
        }
    }

    /// Closed-form K-L divergence.
    pub fn kl_divergence(&self, direction: KlDirection) -> f64 {
        let swap = direction == KlDirection::PreVsPost;
        match self.0 {
            Family::GaussianMeanShift { mu0, mu1, sigma } => (mu1 - mu0).powi(2) / (2.0 * sigma * sigma),
            Family::Bernoulli { p0, p1 } => {
                let (a, b) = if swap { (p0, p1) } else { (p1, p0) };
                a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()
            }
            Family::ExponentialRate { lam0, lam1 } => {
                let (a, b) = if swap { (lam0, lam1) } else { (lam1, lam0) };
                (a / b).ln() + b / a - 1.0
            }
        }
    }

    /// D(f1 ‖ f0), the post-change drift of the log-likelihood ratio.
    pub fn kl(&self) -> f64 {
        self.kl_divergence(KlDirection::PostVsPre)
    }

    /// Density (or mass) of `x` under the given regime.
    pub fn density(&self, regime: Regime, x: f64) -> f64 {
        match self.0 {
            Family::GaussianMeanShift { mu0, mu1, sigma } => {
                let mu = if regime == Regime::Pre { mu0 } else { mu1 };
                let z = (x - mu) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Family::Bernoulli { p0, p1 } => {
                let p = if regime == Regime::Pre { p0 } else { p1 };
                if x == 1.0 {
                    p
                } else if x == 0.0 {
                    1.0 - p
                } else {
                    0.0
                }
            }
            Family::ExponentialRate { lam0, lam1 } => {
                let l = if regime == Regime::Pre { lam0 } else { lam1 };
                if x < 0.0 {
                    0.0
                } else {
                    l * (-l * x).exp()
                }
            }
        }
    }

    /// Draw one observation from `f0` (`Pre`) or `f1` (`Post`).
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, regime: Regime, rng: &mut R) -> f64 {
        match self.0 {
            Family::GaussianMeanShift { mu0, mu1, sigma } => {
                let mu = if regime == Regime::Pre { mu0 } else { mu1 };
                let z: f64 = StandardNormal.sample(rng);
                mu + sigma * z
            }
            Family::Bernoulli { p0, p1 } => {
                let p = if regime == Regime::Pre { p0 } else { p1 };
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            Family::ExponentialRate { lam0, lam1 } => {
                let l = if regime == Regime::Pre { lam0 } else { lam1 };
                let e: f64 = Exp1.sample(rng);
                e / l
            }
        }
    }

    /// Numeric `∫ f1 log(f1/f0)`, independent of the closed forms above.
    ///
    /// Gaussian: adaptive Simpson over ±12σ around both means. Exponential:
    /// adaptive Simpson over `[0, 80/λ1]`. Bernoulli: the exact two-term sum.
    pub fn kl_quadrature_oracle(&self) -> Result<f64> {
        const TOL: f64 = 1e-11;
        match self.0 {
            Family::GaussianMeanShift { mu0, mu1, sigma } => {
                let lo = mu0.min(mu1) - 12.0 * sigma;
                let hi = mu0.max(mu1) + 12.0 * sigma;
                adaptive_simpson(|x| kl_integrand(self, x), lo, hi, TOL)
            }
            Family::Bernoulli { .. } => Ok([0.0, 1.0].iter().map(|&x| kl_integrand(self, x)).sum()),
            Family::ExponentialRate { lam1, .. } => {
                adaptive_simpson(|x| kl_integrand(self, x), 0.0, 80.0 / lam1, TOL)
            }
        }
    }

    /// CDF of the regime's distribution (continuous families only).
    pub(crate) fn cdf(&self, regime: Regime, x: f64) -> f64 {
        match self.0 {
            Family::GaussianMeanShift { mu0, mu1, sigma } => {
                let mu = if regime == Regime::Pre { mu0 } else { mu1 };
                normal_cdf((x - mu) / sigma)
            }
            Family::ExponentialRate { lam0, lam1 } => {
                let l = if regime == Regime::Pre { lam0 } else { lam1 };
                if x <= 0.0 {
                    0.0
                } else {
                    -(-l * x).exp_m1()
                }
            }
            Family::Bernoulli { p0, p1 } => {
                let p = if regime == Regime::Pre { p0 } else { p1 };
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
        }
    }

    /// Survival function `1 − F(x)`, accurate in the upper tail.
    pub(crate) fn sf(&self, regime: Regime, x: f64) -> f64 {
        match self.0 {
            Family::GaussianMeanShift { mu0, mu1, sigma } => {
                let mu = if regime == Regime::Pre { mu0 } else { mu1 };
                normal_cdf(-(x - mu) / sigma)
            }
            Family::ExponentialRate { lam0, lam1 } => {
                let l = if regime == Regime::Pre { lam0 } else { lam1 };
                if x <= 0.0 {
                    1.0
                } else {
                    (-l * x).exp()
                }
            }
            Family::Bernoulli { .. } => 1.0 - self.cdf(regime, x),
        }
    }

    /// Quantile of the regime's distribution (continuous families only).
    pub(crate) fn quantile(&self, regime: Regime, q: f64) -> Option<f64> {
        match self.0 {
            Family::GaussianMeanShift { mu0, mu1, sigma } => {
                let mu = if regime == Regime::Pre { mu0 } else { mu1 };
                Some(mu + sigma * standard_normal().inverse_cdf(q))
            }
            Family::ExponentialRate { lam0, lam1 } => {
                let l = if regime == Regime::Pre { lam0 } else { lam1 };
                Some(-(-q).ln_1p() / l)
            }
            Family::Bernoulli { .. } => None,
        }
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

fn kl_integrand(pair: &DensityPair, x: f64) -> f64 {
    let f1 = pair.density(Regime::Post, x);
    if f1 == 0.0 {
        return 0.0;
    }
    let f0 = pair.density(Regime::Pre, x);
    if f0 == 0.0 {
        // both Gaussian tails underflowed; use the LLR directly
        return f1 * pair.llr(x);
    }
    f1 * (f1 / f0).ln()
}

/// Distribution of the change point Γ (index of the first post-change sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChangePointLaw {
    /// `P(Γ = n) = ρ(1−ρ)^{n−1}` for `n ≥ 1`, `P(Γ = 0) = 0`.
    GeometricPrior { rho: f64 },
    Fixed { gamma: u64 },
    Never,
}

impl ChangePointLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChangePointLaw::GeometricPrior { rho } if !(rho > 0.0 && rho < 1.0) => Err(
                QcdError::invalid_model(format!("geometric rho must lie in (0, 1), got {rho}")),
            ),
            ChangePointLaw::Fixed { gamma: 0 } => {
                Err(QcdError::invalid_model("fixed change point must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    /// Prior mass `π_n`.
    pub fn mass(&self, n: u64) -> f64 {
        match *self {
            ChangePointLaw::GeometricPrior { rho } => {
                if n == 0 {
                    0.0
                } else {
                    rho * (1.0 - rho).powf((n - 1) as f64)
                }
            }
            ChangePointLaw::Fixed { gamma } => (n == gamma) as u8 as f64,
            ChangePointLaw::Never => 0.0,
        }
    }

    /// Tail exponent `d = |log(1−ρ)|` of the geometric prior, 0 otherwise.
    pub fn tail_exponent(&self) -> f64 {
        match *self {
            ChangePointLaw::GeometricPrior { rho } => -(-rho).ln_1p(),
            _ => 0.0,
        }
    }

    /// Draw Γ; `None` means the change never happens.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        match *self {
            ChangePointLaw::GeometricPrior { rho } => {
                // inverse transform: Γ = ceil(ln U / ln(1−ρ)), U ∈ (0, 1]
                let u = 1.0 - rng.random::<f64>();
                let g = (u.ln() / (-rho).ln_1p()).ceil();
                Some(if g < 1.0 { 1 } else if g >= u64::MAX as f64 { u64::MAX } else { g as u64 })
            }
            ChangePointLaw::Fixed { gamma } => Some(gamma),
            ChangePointLaw::Never => None,
        }
    }
}
