//! Multi-sensor change detection: MLR quantizer design at the sensors, local
//! CuSum or Shiryaev statistics, and fusion-center stopping rules.
//!
//! All sensors see the change at the same time. Observations are i.i.d. in
//! time at each sensor and independent across sensors. Sensors send either a
//! quantized observation or their real-valued statistic; there is no feedback
//! from the fusion center.

use serde::{Deserialize, Serialize};

use crate::detectors::posterior_update;
use crate::dist::{ChangePointLaw, DensityPair, Family, Regime};
use crate::error::{QcdError, Result};
use crate::harness::{reduce_indexed, MetricEstimate, RunSummary, StopTime, TrialOutcome, DEFAULT_HORIZON_CAP};
use crate::rng::trial_rng;

const GRID_POINTS: usize = 2048;
const ROUNDS: usize = 3;
const GOLDEN_ITERATIONS: usize = 60;

/// Interval quantizer with thresholds `t_1 < … < t_{K−1}`. Cell `j` is
/// `(t_j, t_{j+1}]` with `t_0 = −∞` and `t_K = +∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub thresholds: Vec<f64>,
    /// K-L divergence of the induced post/pre cell distributions.
    pub kl: f64,
    /// K-L divergence of the unquantized observations.
    pub raw_kl: f64,
    /// False when the optimizer could not beat the equal-probability split
    /// and that split was returned.
    pub improved: bool,
    pub warning: Option<String>,
    cell_llr: Vec<f64>,
}

impl Quantizer {
    /// Build a quantizer from explicit thresholds.
    pub fn from_thresholds(model: &DensityPair, thresholds: Vec<f64>) -> Result<Self> {
        check_continuous(model)?;
        if thresholds.is_empty() {
            return Err(QcdError::invalid_input("a quantizer needs at least one threshold"));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) || thresholds.iter().any(|t| t.is_nan()) {
            return Err(QcdError::invalid_input("quantizer thresholds must be strictly increasing"));
        }
        let (q0, q1) = cell_probabilities(model, &thresholds);
        let kl = discrete_kl(&q1, &q0);
        let cell_llr = q0.iter().zip(&q1).map(|(&a, &b)| (b / a).ln()).collect();
        Ok(Self { thresholds, kl, raw_kl: model.kl(), improved: true, warning: None, cell_llr })
    }

    pub fn levels(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn cell(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t < x)
    }

    /// Log-likelihood ratio of a cell under the induced discrete pair.
    pub fn cell_llr(&self, cell: usize) -> f64 {
        self.cell_llr[cell]
    }

    /// LLR of the quantized observation.
    pub fn llr(&self, x: f64) -> f64 {
        self.cell_llr[self.cell(x)]
    }
}

fn check_continuous(model: &DensityPair) -> Result<()> {
    if let Family::Bernoulli { .. } = model.family() {
        return Err(QcdError::invalid_model("quantizer design needs a continuous scalar observation"));
    }
    Ok(())
}

/// Probability of `(lo, hi]`, using the survival function in the upper tail.
fn interval_prob(model: &DensityPair, regime: Regime, lo: f64, hi: f64) -> f64 {
    let f_lo = model.cdf(regime, lo);
    if f_lo > 0.5 {
        (model.sf(regime, lo) - model.sf(regime, hi)).max(0.0)
    } else {
        (model.cdf(regime, hi) - f_lo).max(0.0)
    }
}

fn cell_probabilities(model: &DensityPair, thresholds: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut edges = Vec::with_capacity(thresholds.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend_from_slice(thresholds);
    edges.push(f64::INFINITY);
    let probs = |r| edges.windows(2).map(|w| interval_prob(model, r, w[0], w[1])).collect();
    (probs(Regime::Pre), probs(Regime::Post))
}

fn kl_term(q1: f64, q0: f64) -> f64 {
    if q1 <= 0.0 {
        0.0
    } else if q0 <= 0.0 {
        f64::INFINITY
    } else {
        q1 * (q1 / q0).ln()
    }
}

fn discrete_kl(q1: &[f64], q0: &[f64]) -> f64 {
    q1.iter().zip(q0).map(|(&a, &b)| kl_term(a, b)).sum()
}

/// `D(q1‖q0)` of the cell distributions induced by `thresholds`.
pub fn quantized_kl(model: &DensityPair, thresholds: &[f64]) -> Result<f64> {
    Ok(Quantizer::from_thresholds(model, thresholds.to_vec())?.kl)
}

/// Contribution of cell `(lo, hi]` to the quantized divergence.
fn cell_term(model: &DensityPair, lo: f64, hi: f64) -> f64 {
    kl_term(interval_prob(model, Regime::Post, lo, hi), interval_prob(model, Regime::Pre, lo, hi))
}

/// Range outside which moving a threshold changes nothing measurable.
fn search_range(model: &DensityPair) -> (f64, f64) {
    match model.family() {
        Family::GaussianMeanShift { mu0, mu1, sigma } => (mu0.min(mu1) - 10.0 * sigma, mu0.max(mu1) + 10.0 * sigma),
        Family::ExponentialRate { lam0, lam1 } => (0.0, 40.0 / lam0.min(lam1)),
        Family::Bernoulli { .. } => unreachable!("rejected before design"),
    }
}

/// Thresholds for a `levels`-cell monotone likelihood ratio quantizer
/// maximizing the quantized K-L divergence.
///
/// Starts from the equal-probability split under `f0`, then runs coordinate
/// ascent: each threshold in turn is set by a grid search between its
/// neighbours followed by a golden-section refinement.
pub fn design_mlr_quantizer(model: &DensityPair, levels: usize) -> Result<Quantizer> {
    check_continuous(model)?;
    if levels < 2 {
        return Err(QcdError::invalid_input(format!("levels must be >= 2, got {levels}")));
    }
    let init: Vec<f64> = (1..levels)
        .map(|j| model.quantile(Regime::Pre, j as f64 / levels as f64).expect("continuous family"))
        .collect();
    let initial = Quantizer::from_thresholds(model, init.clone())?;
    let (range_lo, range_hi) = search_range(model);

    let mut t = init;
    let k = t.len();
    for _ in 0..ROUNDS {
        for j in 0..k {
            let left = if j == 0 { f64::NEG_INFINITY } else { t[j - 1] };
            let right = if j + 1 == k { f64::INFINITY } else { t[j + 1] };
            let objective = |x: f64| cell_term(model, left, x) + cell_term(model, x, right);
            let lo = left.max(range_lo);
            let hi = right.min(range_hi);
            if !(lo < hi) {
                continue;
            }
            let h = (hi - lo) / (GRID_POINTS + 1) as f64;
            let mut best = (t[j], objective(t[j]));
            for i in 1..=GRID_POINTS {
                let x = lo + i as f64 * h;
                let v = objective(x);
                if v > best.1 {
                    best = (x, v);
                }
            }
            best = golden_max(&objective, (best.0 - h).max(lo), (best.0 + h).min(hi), best);
            t[j] = best.0;
        }
    }
    let designed = Quantizer::from_thresholds(model, t)?;
    if designed.kl > initial.kl {
        Ok(designed)
    } else {
        Ok(Quantizer {
            improved: false,
            warning: Some("optimizer did not improve on the equal-probability split".into()),
            ..initial
        })
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, incumbent: (f64, f64)) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERATIONS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v > incumbent.1 {
        (x, v)
    } else {
        incumbent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalDetector {
    /// Local statistic `W`, crossing when `W ≥ b`.
    Cusum,
    /// Local posterior `p`, crossing when `p ≥ A`.
    Shiryaev { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FusionRule {
    /// Stop when any sensor crosses its threshold.
    Min,
    /// Sensors stop at their first crossing; stop when all have stopped.
    Max,
    /// Sensors keep running; stop when all are above threshold at once.
    All,
    /// Sensors send their CuSum statistics; stop when the sum reaches
    /// `threshold`.
    Sum { threshold: f64 },
}

impl FusionRule {
    pub fn name(&self) -> &'static str {
        match self {
            FusionRule::Min => "min",
            FusionRule::Max => "max",
            FusionRule::All => "all",
            FusionRule::Sum { .. } => "sum",
        }
    }

    /// Heuristic equal local CuSum threshold for a global log threshold `b`
    /// over `sensors` sensors: `b + ln L` for Min (union bound), `b` for Max,
    /// `b / L` for All (false alarms need every sensor high at once).
    /// Sum uses `b` directly on the summed statistic.
    pub fn local_threshold(&self, b: f64, sensors: usize) -> f64 {
        match self {
            FusionRule::Min => b + (sensors as f64).ln(),
            FusionRule::Max | FusionRule::Sum { .. } => b,
            FusionRule::All => b / sensors as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorNetworkConfig {
    pub num_sensors: usize,
    pub per_sensor_model: DensityPair,
    /// `None` sends raw observations (their exact LLR) to the local detector.
    pub quantizer_levels: Option<usize>,
    pub local_detector: LocalDetector,
    /// One threshold per sensor, or a single value shared by all.
    pub local_thresholds: Vec<f64>,
    pub fusion_rule: FusionRule,
}

impl SensorNetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sensors == 0 {
            return Err(QcdError::invalid_input("num_sensors must be >= 1"));
        }
        if let Some(levels) = self.quantizer_levels {
            if levels < 2 {
                return Err(QcdError::invalid_input("quantizer_levels must be >= 2"));
            }
            check_continuous(&self.per_sensor_model)?;
        }
        if let LocalDetector::Shiryaev { rho } = self.local_detector {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(QcdError::invalid_input(format!("local rho must lie in (0, 1), got {rho}")));
            }
        }
        match self.fusion_rule {
            FusionRule::Sum { threshold } => {
                if self.local_detector != LocalDetector::Cusum {
                    return Err(QcdError::invalid_input("the sum rule adds CuSum statistics"));
                }
                if !(threshold > 0.0) {
                    return Err(QcdError::invalid_input("sum threshold must be > 0"));
                }
            }
            _ => {
                let n = self.local_thresholds.len();
                if n != 1 && n != self.num_sensors {
                    return Err(QcdError::invalid_input(format!(
                        "expected 1 or {} local thresholds, got {n}",
                        self.num_sensors
                    )));
                }
                for &t in &self.local_thresholds {
                    let ok = match self.local_detector {
                        LocalDetector::Cusum => t > 0.0,
                        LocalDetector::Shiryaev { .. } => t > 0.0 && t < 1.0,
                    };
                    if !ok {
                        return Err(QcdError::invalid_input(format!("invalid local threshold {t}")));
                    }
                }
            }
        }
        Ok(())
    }

    fn threshold(&self, sensor: usize) -> f64 {
        if self.local_thresholds.len() == 1 {
            self.local_thresholds[0]
        } else {
            self.local_thresholds[sensor]
        }
    }
}

/// One fusion trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOutcome {
    pub tau: StopTime,
    pub gamma: Option<u64>,
    /// First local crossing time of each sensor, if it happened by `tau`.
    pub local_first_crossings: Vec<Option<u64>>,
}

/// A validated network ready to simulate.
#[derive(Debug, Clone)]
pub struct SensorNetwork {
    config: SensorNetworkConfig,
    quantizer: Option<Quantizer>,
}

impl SensorNetwork {
    pub fn new(config: SensorNetworkConfig) -> Result<Self> {
        config.validate()?;
        let quantizer = match config.quantizer_levels {
            Some(levels) => Some(design_mlr_quantizer(&config.per_sensor_model, levels)?),
            None => None,
        };
        Ok(Self { config, quantizer })
    }

    pub fn config(&self) -> &SensorNetworkConfig {
        &self.config
    }

    pub fn quantizer(&self) -> Option<&Quantizer> {
        self.quantizer.as_ref()
    }

    /// Run one trial; determined by `(seed, index)`. Every step draws one
    /// observation per sensor, so trials under different rules share paths.
    pub fn run_trial(&self, law: &ChangePointLaw, horizon_cap: u64, seed: u64, index: u64) -> FusionOutcome {
        let cfg = &self.config;
        let l = cfg.num_sensors;
        let mut rng = trial_rng(seed, index);
        let gamma = law.draw(&mut rng);
        let change = gamma.unwrap_or(u64::MAX);
        let model = &cfg.per_sensor_model;
        let mut stat = vec![0.0f64; l];
        let mut frozen = vec![false; l];
        let mut first: Vec<Option<u64>> = vec![None; l];
        for n in 1..=horizon_cap {
            let regime = if n >= change { Regime::Post } else { Regime::Pre };
            let mut any = false;
            let mut all = true;
            let mut sum = 0.0;
            for s in 0..l {
                let x = model.sample(regime, &mut rng);
                if frozen[s] {
                    continue;
                }
                let y = match &self.quantizer {
                    Some(q) => q.llr(x),
                    None => model.llr(x),
                };
                stat[s] = match cfg.local_detector {
                    LocalDetector::Cusum => (stat[s] + y).max(0.0),
                    LocalDetector::Shiryaev { rho } => posterior_update(stat[s], rho, y),
                };
                sum += stat[s];
                let above = matches!(cfg.fusion_rule, FusionRule::Sum { .. }) || stat[s] >= cfg.threshold(s);
                if above && !matches!(cfg.fusion_rule, FusionRule::Sum { .. }) {
                    first[s].get_or_insert(n);
                    if cfg.fusion_rule == FusionRule::Max {
                        frozen[s] = true;
                    }
                }
                any |= above;
                all &= above;
            }
            let stop = match cfg.fusion_rule {
                FusionRule::Min => any,
                FusionRule::Max => frozen.iter().all(|&f| f),
                FusionRule::All => all,
                FusionRule::Sum { threshold } => sum >= threshold,
            };
            if stop {
                return FusionOutcome { tau: StopTime::Stopped(n), gamma, local_first_crossings: first };
            }
        }
        FusionOutcome { tau: StopTime::Capped(horizon_cap), gamma, local_first_crossings: first }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionReport {
    pub summary: RunSummary,
    /// ADD and PFA for a geometric prior, FAR and mean time to false alarm
    /// with no change, or the conditional delay at a fixed change point
    /// (labelled as a CADD lower bound).
    pub metrics: Vec<MetricEstimate>,
    pub quantized_kl: Option<f64>,
}

/// Simulate the network and estimate the metrics matching `law`.
pub fn simulate_fusion(
    config: &SensorNetworkConfig,
    law: &ChangePointLaw,
    num_trials: u64,
    seed: u64,
) -> Result<FusionReport> {
    simulate_fusion_capped(config, law, num_trials, DEFAULT_HORIZON_CAP, seed)
}

pub fn simulate_fusion_capped(
    config: &SensorNetworkConfig,
    law: &ChangePointLaw,
    num_trials: u64,
    horizon_cap: u64,
    seed: u64,
) -> Result<FusionReport> {
    if num_trials == 0 || horizon_cap == 0 {
        return Err(QcdError::invalid_plan("num_trials and horizon_cap must be >= 1"));
    }
    law.validate()?;
    let net = SensorNetwork::new(config.clone())?;
    let summary = reduce_indexed(
        num_trials,
        |i, s: &mut RunSummary| {
            let o = net.run_trial(law, horizon_cap, seed, i);
            let t = o.tau.value();
            s.push(&TrialOutcome {
                tau: o.tau,
                gamma: o.gamma,
                observations_used: t * config.num_sensors as u64,
                observations_before_change: t.min(o.gamma.map_or(u64::MAX, |g| g - 1)),
                terminal_statistic: f64::NAN,
            });
            Ok(())
        },
        RunSummary::merge,
    )?;
    let metrics = match law {
        ChangePointLaw::GeometricPrior { .. } => vec![summary.add()?, summary.pfa()?],
        ChangePointLaw::Never => vec![summary.far()?, summary.mean_time_to_false_alarm()?],
        ChangePointLaw::Fixed { .. } => {
            let mut m = summary.wadd_cadd()?;
            // E[τ − γ | τ ≥ γ]
            m.metric = crate::harness::Metric::CaddLowerBound;
            m.value = summary.conditional_delay.mean();
            m.std_error = summary.conditional_delay.std_error();
            vec![m]
        }
    };
    Ok(FusionReport { summary, metrics, quantized_kl: net.quantizer().map(|q| q.kl) })
}

/// Every fusion outcome, in index order.
pub fn simulate_fusion_outcomes(
    config: &SensorNetworkConfig,
    law: &ChangePointLaw,
    num_trials: u64,
    horizon_cap: u64,
    seed: u64,
) -> Result<Vec<FusionOutcome>> {
    use rayon::prelude::*;
    law.validate()?;
    let net = SensorNetwork::new(config.clone())?;
    Ok((0..num_trials).into_par_iter().map(|i| net.run_trial(law, horizon_cap, seed, i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_best(model: &DensityPair, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|t| (t, quantized_kl(model, &[t]).unwrap()))
            .fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    }

    #[test]
    fn binary_quantizer_matches_brute_force_grid() {
        let m = DensityPair::gaussian(0.0, 1.0, 1.0).unwrap();
        let q = design_mlr_quantizer(&m, 2).unwrap();
        let (t, d) = grid_best(&m, -3.0, 4.0, 70_000);
        assert!(q.improved);
        assert!((q.thresholds[0] - t).abs() < 2e-3, "{q:?} vs {t}");
        assert!((q.kl - d).abs() < 1e-9);
        assert!(q.kl < 0.5 && q.thresholds[0].is_finite());
    }

    #[test]
    fn symmetric_means_optimum_is_off_centre() {
        let m = DensityPair::gaussian(-1.0, 1.0, 1.0).unwrap();
        let q = design_mlr_quantizer(&m, 2).unwrap();
        let (t, _) = grid_best(&m, -2.0, 2.0, 40_000);
        assert!((q.thresholds[0] - t).abs() < 2e-3);
        assert!(q.kl > quantized_kl(&m, &[0.0]).unwrap());
    }

    #[test]
    fn many_levels_approach_raw_divergence() {
        let m = DensityPair::gaussian(0.0, 1.0, 1.0).unwrap();
        let q = design_mlr_quantizer(&m, 64).unwrap();
        let raw = m.kl_quadrature_oracle().unwrap();
        assert!(q.kl <= raw);
        assert!(q.kl >= 0.98 * raw, "{} vs {raw}", q.kl);
    }

    #[test]
    fn exponential_quantizer() {
        let m = DensityPair::exponential(1.0, 2.0).unwrap();
        let q2 = design_mlr_quantizer(&m, 2).unwrap();
        let q4 = design_mlr_quantizer(&m, 4).unwrap();
        assert!(q2.kl < q4.kl && q4.kl < m.kl());
        assert!(q4.thresholds.iter().all(|&t| t > 0.0));
    }

    #[test]
    fn rejects_bernoulli_and_one_level() {
        let b = DensityPair::bernoulli(0.2, 0.6).unwrap();
        assert!(design_mlr_quantizer(&b, 2).is_err());
        let g = DensityPair::gaussian(0.0, 1.0, 1.0).unwrap();
        assert!(design_mlr_quantizer(&g, 1).is_err());
        assert!(Quantizer::from_thresholds(&g, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn quantizer_cells() {
        let g = DensityPair::gaussian(0.0, 1.0, 1.0).unwrap();
        let q = Quantizer::from_thresholds(&g, vec![-1.0, 0.5]).unwrap();
        assert_eq!(q.cell(-2.0), 0);
        assert_eq!(q.cell(-1.0), 0);
        assert_eq!(q.cell(0.0), 1);
        assert_eq!(q.cell(3.0), 2);
        assert!(q.cell_llr(0) < q.cell_llr(1) && q.cell_llr(1) < q.cell_llr(2));
    }

    fn net(rule: FusionRule, sensors: usize, thresholds: Vec<f64>) -> SensorNetworkConfig {
        SensorNetworkConfig {
            num_sensors: sensors,
            per_sensor_model: DensityPair::gaussian(0.0, 1.0, 1.0).unwrap(),
            quantizer_levels: None,
            local_detector: LocalDetector::Cusum,
            local_thresholds: thresholds,
            fusion_rule: rule,
        }
    }

    #[test]
    fn validation() {
        assert!(net(FusionRule::Min, 0, vec![1.0]).validate().is_err());
        assert!(net(FusionRule::Min, 3, vec![1.0, 2.0]).validate().is_err());
        assert!(net(FusionRule::Min, 2, vec![-1.0]).validate().is_err());
        let mut c = net(FusionRule::Sum { threshold: 3.0 }, 2, vec![]);
        assert!(c.validate().is_ok());
        c.local_detector = LocalDetector::Shiryaev { rho: 0.01 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn local_threshold_heuristic() {
        assert!((FusionRule::Min.local_threshold(5.0, 4) - (5.0 + 4f64.ln())).abs() < 1e-15);
        assert_eq!(FusionRule::Max.local_threshold(5.0, 4), 5.0);
        assert_eq!(FusionRule::All.local_threshold(6.0, 3), 2.0);
    }

    #[test]
    fn fusion_metrics_by_law() {
        let c = net(FusionRule::Min, 2, vec![3.0]);
        let r = simulate_fusion(&c, &ChangePointLaw::Never, 200, 1).unwrap();
        assert_eq!(r.metrics.len(), 2);
        let r = simulate_fusion(&c, &ChangePointLaw::Fixed { gamma: 1 }, 200, 1).unwrap();
        assert!(r.metrics[0].value > 0.0);
        assert!(simulate_fusion(&c, &ChangePointLaw::Never, 0, 1).is_err());
    }
}
