//! First-order delay approximations and Monte Carlo estimates of the
//! renewal-theoretic constants behind the second-order Shiryaev
//! approximations
//!
//! ```text
//! PFA ≈ ζ e^{-b}
//! ADD ≈ (b + κ − E_1[η]) / (d + D)
//! ```
//!
//! where `d = |ln(1 − ρ)|`, `D = D(f1‖f0)`, `κ` is the mean and `ζ` the
//! Laplace transform at 1 of the limiting overshoot of the walk
//! `Σ (Y_k + d)` over a large boundary, and `η_n` is the slowly changing
//! part of the log Shiryaev statistic.

use serde::{Deserialize, Serialize};

use crate::dist::{Family, Regime};
use crate::error::{QcdError, Result};
use crate::harness::{reduce_indexed, Moments, ObservationModel};
use crate::rng::{derive_seed, trial_rng};

/// Convergence tolerance on the increments of `η_n`.
pub const ETA_TOLERANCE: f64 = 1e-6;

const MAX_WALK_STEPS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderInputs {
    pub alpha: f64,
    /// Post-change LLR drift, `D(f1‖f0)` for i.i.d. data.
    pub kl: f64,
    /// Prior tail exponent `|ln(1 − ρ)|`; 0 in the minimax setting.
    pub d: f64,
}

impl FirstOrderInputs {
    pub fn new(alpha: f64, kl: f64, d: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(QcdError::invalid_input(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(kl > 0.0) || !kl.is_finite() {
            return Err(QcdError::invalid_input(format!("kl must be finite and > 0, got {kl}")));
        }
        if !(d >= 0.0) || !d.is_finite() {
            return Err(QcdError::invalid_input(format!("d must be finite and >= 0, got {d}")));
        }
        Ok(Self { alpha, kl, d })
    }
}

/// `|ln α| / (D + d)`.
pub fn first_order_add(inputs: &FirstOrderInputs) -> f64 {
    inputs.alpha.ln().abs() / (inputs.kl + inputs.d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    fn from_moments(m: &Moments) -> Self {
        Self { value: m.mean(), std_error: m.std_error() }
    }

    /// `|a − b| ≤ k · sqrt(se_a² + se_b²)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.std_error.hypot(other.std_error)
    }
}

/// Overshoot statistics at one boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingStats {
    pub threshold: f64,
    pub kappa: Estimate,
    pub zeta: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvershootEstimates {
    /// Mean limiting overshoot, taken at the largest boundary.
    pub kappa: Estimate,
    /// `E[e^{-overshoot}]`, taken at the largest boundary.
    pub zeta: Estimate,
    /// `E_1[η]` after burn-in.
    pub eta_mean: Estimate,
    pub per_threshold: Vec<CrossingStats>,
    /// Set when the two largest boundaries disagree or the increments are
    /// arithmetic; the estimate should not be trusted as a limit.
    pub flagged: bool,
    pub flag_reason: Option<String>,
}

#[derive(Default)]
struct OvershootAcc {
    overshoot: Moments,
    laplace: Moments,
}

/// Estimate `κ`, `ζ` and `E_1[η]` for the Shiryaev statistic with prior
/// parameter `rho` under `model`.
///
/// For every boundary in `thresholds`, `num_crossings` independent post-change
/// walks `Σ (Y_k + d)` are run to first passage. `κ` and `ζ` are reported from
/// the largest boundary and checked against the second largest.
pub fn estimate_overshoot(
    model: impl Into<ObservationModel>,
    rho: f64,
    num_crossings: u64,
    thresholds: &[f64],
    seed: u64,
) -> Result<OvershootEstimates> {
    let model = model.into();
    if !(rho > 0.0 && rho < 1.0) {
        return Err(QcdError::invalid_input(format!("rho must lie in (0, 1), got {rho}")));
    }
    if num_crossings < 2 {
        return Err(QcdError::invalid_input("need at least 2 crossings per boundary"));
    }
    if thresholds.len() < 2 {
        return Err(QcdError::invalid_input("need at least 2 boundaries for the stationarity check"));
    }
    if thresholds.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
        return Err(QcdError::invalid_input("boundaries must be finite and > 0"));
    }
    let d = -(-rho).ln_1p();
    let drift = model.post_drift() + d;
    if !(drift > 0.0) {
        return Err(QcdError::invalid_input(format!("walk drift must be > 0, got {drift}")));
    }
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut per_threshold = Vec::with_capacity(sorted.len());
    for (j, &b) in sorted.iter().enumerate() {
        let stream_seed = derive_seed(seed, j as u64 + 1);
        let acc = reduce_indexed(
            num_crossings,
            |i, acc: &mut OvershootAcc| {
                let mut rng = trial_rng(stream_seed, i);
                let mut s = 0.0;
                for _ in 0..MAX_WALK_STEPS {
                    s += model.observe(Regime::Post, &mut rng).llr + d;
                    if s >= b {
                        let over = s - b;
                        acc.overshoot.push(over);
                        acc.laplace.push((-over).exp());
                        return Ok(());
                    }
                }
                Err(QcdError::Estimation(format!("walk did not cross {b} within {MAX_WALK_STEPS} steps")))
            },
            |a, o| {
                a.overshoot.merge(&o.overshoot);
                a.laplace.merge(&o.laplace);
            },
        )?;
        per_threshold.push(CrossingStats {
            threshold: b,
            kappa: Estimate::from_moments(&acc.overshoot),
            zeta: Estimate::from_moments(&acc.laplace),
        });
    }

    let eta_seed = derive_seed(seed, 0);
    let eta = reduce_indexed(
        num_crossings,
        |i, m: &mut Moments| {
            let mut rng = trial_rng(eta_seed, i);
            // Λ_0 = 0, so η starts at ln ρ and Z_1 = ln ρ + Y_1 + d
            let mut eta = rho.ln();
            let mut z = eta + model.observe(Regime::Post, &mut rng).llr + d;
            for _ in 0..MAX_WALK_STEPS {
                let inc = (rho * (-z).exp()).ln_1p();
                eta += inc;
                if inc < ETA_TOLERANCE {
                    m.push(eta);
                    return Ok(());
                }
                z += inc + model.observe(Regime::Post, &mut rng).llr + d;
            }
            Err(QcdError::Estimation("eta did not converge".into()))
        },
        |a, o| a.merge(o),
    )?;

    let last = per_threshold[per_threshold.len() - 1];
    let prev = per_threshold[per_threshold.len() - 2];
    let mut reasons = Vec::new();
    if is_arithmetic(&model) {
        reasons.push("log-likelihood ratio increments are arithmetic; no overshoot limit exists".to_string());
    }
    if !last.kappa.agrees_with(&prev.kappa, 2.0) || !last.zeta.agrees_with(&prev.zeta, 2.0) {
        reasons.push(format!(
            "overshoot statistics at b = {} and b = {} differ by more than 2 joint standard errors",
            prev.threshold, last.threshold
        ));
    }
    Ok(OvershootEstimates {
        kappa: last.kappa,
        zeta: last.zeta,
        eta_mean: Estimate::from_moments(&eta),
        per_threshold,
        flagged: !reasons.is_empty(),
        flag_reason: (!reasons.is_empty()).then(|| reasons.join("; ")),
    })
}

fn is_arithmetic(model: &ObservationModel) -> bool {
    match model {
        ObservationModel::ConstantDrift { .. } => true,
        ObservationModel::Iid(pair) => matches!(pair.family(), Family::Bernoulli { .. }),
    }
}

/// `ζ e^{-b}`.
pub fn second_order_pfa(b: f64, est: &OvershootEstimates) -> f64 {
    est.zeta.value * (-b).exp()
}

/// `(b + κ − E_1[η]) / (d + D)`. Requires `kl + d > 0`.
pub fn second_order_add(b: f64, est: &OvershootEstimates, kl: f64, d: f64) -> f64 {
    (b + est.kappa.value - est.eta_mean.value) / (d + kl)
}
