//! Experiment configuration files, commands and CSV output for the `qcd`
//! binary.
//!
//! A config is a TOML document with the sections `[model]`, `[change]`,
//! `[detector]`, `[simulation]` and `[output]`, plus `[overshoot]` and
//! `[network]` for the commands that need them. Unknown keys are rejected.
//!
//! Every command writes the same CSV schema:
//!
//! ```text
//! detector,threshold,metric,value,std_error,trials,capped_fraction,seed
//! ```
//!
//! Fields that do not apply to a row are left empty. Numbers always use `.`
//! as the decimal separator and switch to scientific notation below `1e-3`.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for estimation or
//! runtime errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::asymptotics::{estimate_overshoot, first_order_add, second_order_add, second_order_pfa, FirstOrderInputs};
use crate::decentralized::{
    design_mlr_quantizer, simulate_fusion_capped, simulate_fusion_outcomes, FusionRule, LocalDetector, SensorNetworkConfig,
};
use crate::detectors::DetectorSpec;
use crate::dist::{ChangePointLaw, DensityPair, Family};
use crate::error::{QcdError, Result};
use crate::harness::{
    run_trial, simulate, tradeoff_sweep, Metric, MetricEstimate, TrialPlan, DEFAULT_HORIZON_CAP,
};
use crate::numeric::least_squares;

pub const CSV_HEADER: &str = "detector,threshold,metric,value,std_error,trials,capped_fraction,seed";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const TABLE2: &str = include_str!("presets/table2.toml");
const FIG4: &str = include_str!("presets/fig4.toml");
const FIG6: &str = include_str!("presets/fig6.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Shiryaev on N(0,1) -> N(1,1), rho = 0.01, at the five log thresholds
    /// of the reference table.
    Table2,
    /// Shiryaev ADD-PFA trade-off on N(0,1) -> N(0.75,1).
    Fig4,
    /// CuSum CADD-FAR trade-off on N(0,1) -> N(0.75,1).
    Fig6,
}

impl Preset {
    pub fn source(&self) -> &'static str {
        match self {
            Preset::Table2 => TABLE2,
            Preset::Fig4 => FIG4,
            Preset::Fig6 => FIG6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdScale {
    /// Thresholds as the detector takes them.
    #[default]
    Natural,
    /// Log-odds for posterior thresholds, `ln B` for likelihood-ratio
    /// thresholds, unchanged for CuSum and GLR.
    Log,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon_cap: u64,
    /// Threshold grid; defaults to the detector's own threshold.
    #[serde(default)]
    pub thresholds: Option<Vec<f64>>,
    #[serde(default)]
    pub threshold_scale: ThresholdScale,
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON_CAP
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// CSV destination; standard output when absent.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OvershootSection {
    /// Walks per boundary.
    pub crossings: u64,
    /// Boundaries for the overshoot walk; the two largest are compared.
    pub boundaries: Vec<f64>,
    /// Prior parameter of the Shiryaev statistic; taken from `[change]` when
    /// that is a geometric prior.
    #[serde(default)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalKind {
    Cusum,
    Shiryaev,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub sensors: usize,
    #[serde(default)]
    pub quantizer_levels: Option<usize>,
    pub local_detector: LocalKind,
    #[serde(default)]
    pub local_rho: Option<f64>,
    #[serde(default)]
    pub local_thresholds: Vec<f64>,
    pub rules: Vec<String>,
    #[serde(default)]
    pub sum_threshold: Option<f64>,
    /// Local thresholds for an All-rule delay vs |ln FAR| regression.
    #[serde(default)]
    pub slope_thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Family,
    change: ChangePointLaw,
    #[serde(default)]
    detector: Option<DetectorSpec>,
    simulation: SimulationSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    overshoot: Option<OvershootSection>,
    #[serde(default)]
    network: Option<NetworkSection>,
}

/// A parsed and validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: DensityPair,
    pub change: ChangePointLaw,
    pub detector: Option<DetectorSpec>,
    pub simulation: SimulationSection,
    pub output: OutputSection,
    pub overshoot: Option<OvershootSection>,
    pub network: Option<NetworkSection>,
}

fn config_err(msg: impl Into<String>) -> QcdError {
    QcdError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let mut table: toml::Table = src.parse().map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        // a threshold grid stands in for a missing [detector] threshold
        let first = table
            .get("simulation")
            .and_then(|s| s.get("thresholds"))
            .and_then(|t| t.as_array())
            .and_then(|a| a.first())
            .and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)));
        if let (Some(first), Some(toml::Value::Table(det))) = (first, table.get_mut("detector")) {
            if !det.contains_key("threshold") {
                det.insert("threshold".into(), toml::Value::Float(first));
            }
        }
        let raw: RawConfig = table.try_into().map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        let model = DensityPair::new(raw.model).map_err(|e| config_err(format!("[model]: {e}")))?;
        raw.change.validate().map_err(|e| config_err(format!("[change]: {e}")))?;
        let cfg = ExperimentConfig {
            model,
            change: raw.change,
            detector: raw.detector,
            simulation: raw.simulation,
            output: raw.output,
            overshoot: raw.overshoot,
            network: raw.network,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&src)
    }

    pub fn preset(p: Preset) -> Self {
        Self::from_toml_str(p.source()).expect("bundled presets are valid")
    }

    fn validate(&self) -> Result<()> {
        let s = &self.simulation;
        if s.trials == 0 {
            return Err(config_err("simulation.trials must be >= 1"));
        }
        if s.horizon_cap == 0 {
            return Err(config_err("simulation.horizon_cap must be >= 1"));
        }
        if let Some(grid) = &s.thresholds {
            if grid.is_empty() {
                return Err(config_err("simulation.thresholds must not be empty"));
            }
        }
        if let Some(det) = &self.detector {
            for t in self.natural_thresholds(det) {
                det.with_threshold(t)
                    .build(self.gaussian_baseline())
                    .map_err(|e| config_err(format!("[detector]: {e}")))?;
            }
            if det.needs_gaussian_observations() && self.gaussian_baseline().is_none() {
                return Err(config_err(format!("detector.algorithm = {} needs model.family = gaussian_mean_shift", det.name())));
            }
        }
        if let Some(o) = &self.overshoot {
            if o.crossings < 2 {
                return Err(config_err("overshoot.crossings must be >= 2"));
            }
            if o.boundaries.len() < 2 {
                return Err(config_err("overshoot.boundaries needs at least 2 values"));
            }
        }
        if let Some(n) = &self.network {
            for r in &n.rules {
                if !matches!(r.as_str(), "min" | "max" | "all" | "sum") {
                    return Err(config_err(format!("network.rules: unknown rule {r:?}")));
                }
            }
            if n.rules.is_empty() {
                return Err(config_err("network.rules must not be empty"));
            }
            if n.local_detector == LocalKind::Shiryaev && n.local_rho.is_none() {
                return Err(config_err("network.local_rho is required for a shiryaev local detector"));
            }
            if n.rules.iter().any(|r| r == "sum") && n.sum_threshold.is_none() {
                return Err(config_err("network.sum_threshold is required for the sum rule"));
            }
            if n.rules.iter().any(|r| r != "sum") && n.local_thresholds.is_empty() {
                return Err(config_err("network.local_thresholds is required for min/max/all rules"));
            }
        }
        Ok(())
    }

    fn gaussian_baseline(&self) -> Option<(f64, f64)> {
        match self.model.family() {
            Family::GaussianMeanShift { mu0, sigma, .. } => Some((mu0, sigma)),
            _ => None,
        }
    }

    /// Grid values as given in the config (in the configured scale).
    fn grid(&self, det: &DetectorSpec) -> Vec<f64> {
        match &self.simulation.thresholds {
            Some(g) => g.clone(),
            None => vec![match self.simulation.threshold_scale {
                ThresholdScale::Natural => det.threshold(),
                ThresholdScale::Log => det.threshold_to_scale(det.threshold()),
            }],
        }
    }

    fn to_natural(&self, det: &DetectorSpec, t: f64) -> f64 {
        match self.simulation.threshold_scale {
            ThresholdScale::Natural => t,
            ThresholdScale::Log => det.threshold_from_scale(t),
        }
    }

    fn natural_thresholds(&self, det: &DetectorSpec) -> Vec<f64> {
        self.grid(det).into_iter().map(|t| self.to_natural(det, t)).collect()
    }

    fn require_detector(&self) -> Result<&DetectorSpec> {
        self.detector.as_ref().ok_or_else(|| config_err("missing section [detector]"))
    }

    fn plan(&self, det: &DetectorSpec) -> TrialPlan {
        TrialPlan::new(self.model, self.change, det.clone())
            .trials(self.simulation.trials)
            .horizon(self.simulation.horizon_cap)
            .seed(self.simulation.seed)
    }

    /// Apply command-line overrides and revalidate.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self> {
        if let Some(t) = o.trials {
            self.simulation.trials = t;
        }
        if let Some(s) = o.seed {
            self.simulation.seed = s;
        }
        if let Some(h) = o.horizon_cap {
            self.simulation.horizon_cap = h;
        }
        if let Some(p) = &o.output {
            self.output.path = Some(p.clone());
        }
        self.validate()?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub horizon_cap: Option<u64>,
    pub output: Option<PathBuf>,
}

/// One CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub detector: String,
    pub threshold: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub trials: Option<u64>,
    pub capped_fraction: Option<f64>,
    pub seed: u64,
}

impl CsvRow {
    fn estimate(detector: &str, threshold: Option<f64>, m: &MetricEstimate, seed: u64) -> Self {
        Self {
            detector: detector.to_string(),
            threshold,
            metric: m.metric.label().to_string(),
            value: m.value,
            std_error: Some(m.std_error),
            trials: Some(m.trials),
            capped_fraction: Some(m.capped_fraction),
            seed,
        }
    }

    fn scalar(detector: &str, threshold: Option<f64>, metric: &str, value: f64, seed: u64) -> Self {
        Self {
            detector: detector.to_string(),
            threshold,
            metric: metric.to_string(),
            value,
            std_error: None,
            trials: None,
            capped_fraction: None,
            seed,
        }
    }
}

/// Locale-independent number formatting: shortest round-trip decimal, or
/// scientific notation for magnitudes below `1e-3`.
pub fn format_number(x: f64) -> String {
    if x != 0.0 && x.is_finite() && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.detector,
            opt(r.threshold),
            r.metric,
            format_number(r.value),
            opt(r.std_error),
            r.trials.map(|t| t.to_string()).unwrap_or_default(),
            opt(r.capped_fraction),
            r.seed
        );
    }
    out
}

/// One row per metric per threshold. The metrics follow the change law:
/// ADD and PFA (and ANO for data-efficient rules) under a geometric prior,
/// FAR and mean time to false alarm with no change, and WADD_CADD (change at
/// time 1 for rules starting from their minimum) or CADD_LB otherwise.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Vec<CsvRow>> {
    let det = cfg.require_detector()?;
    let seed = cfg.simulation.seed;
    let mut rows = Vec::new();
    for t in cfg.grid(det) {
        let spec = det.with_threshold(cfg.to_natural(det, t));
        let s = simulate(&cfg.plan(&spec))?;
        let name = spec.name();
        let mut push = |m: MetricEstimate| rows.push(CsvRow::estimate(name, Some(t), &m, seed));
        match cfg.change {
            ChangePointLaw::GeometricPrior { .. } => {
                push(s.add()?);
                push(s.pfa()?);
                if matches!(spec, DetectorSpec::DeShiryaev { .. } | DetectorSpec::FractionalShiryaev { .. }) {
                    push(s.ano()?);
                }
            }
            ChangePointLaw::Never => {
                push(s.far()?);
                push(s.mean_time_to_false_alarm()?);
            }
            ChangePointLaw::Fixed { gamma } => {
                let mut m = s.wadd_cadd()?;
                if !(gamma == 1 && spec.worst_case_at_first_step()) {
                    m.metric = Metric::CaddLowerBound;
                    m.value = s.conditional_delay.mean();
                    m.std_error = s.conditional_delay.std_error();
                }
                push(m);
            }
        }
    }
    Ok(rows)
}

/// Constraint and delay rows per grid threshold, then `FIRST_ORDER_SLOPE`
/// and the fitted `SLOPE` as footer rows.
pub fn cmd_tradeoff(cfg: &ExperimentConfig) -> Result<Vec<CsvRow>> {
    let det = cfg.require_detector()?;
    let grid = cfg.grid(det);
    if grid.len() < 3 {
        return Err(config_err(format!(
            "simulation.thresholds needs at least 3 values for a trade-off, got {}",
            grid.len()
        )));
    }
    let natural: Vec<f64> = grid.iter().map(|&t| cfg.to_natural(det, t)).collect();
    let curve = tradeoff_sweep(&cfg.plan(det), &natural)?;
    let seed = cfg.simulation.seed;
    let name = det.name();
    let mut rows = Vec::new();
    for (row, &t) in curve.rows.iter().zip(&grid) {
        rows.push(CsvRow::estimate(name, Some(t), &row.constraint, seed));
        rows.push(CsvRow::estimate(name, Some(t), &row.delay, seed));
    }
    let d = if det.is_bayesian() { cfg.change.tail_exponent() } else { 0.0 };
    rows.push(CsvRow::scalar(name, None, "FIRST_ORDER_SLOPE", 1.0 / (cfg.model.kl() + d), seed));
    rows.push(CsvRow::scalar(name, None, "SLOPE", curve.slope, seed));
    Ok(rows)
}

/// Overshoot constants, their per-boundary values, and first- and
/// second-order predictions at every grid log threshold `b`.
pub fn cmd_overshoot(cfg: &ExperimentConfig) -> Result<Vec<CsvRow>> {
    let o = cfg.overshoot.as_ref().ok_or_else(|| config_err("missing section [overshoot]"))?;
    let rho = match (o.rho, cfg.change) {
        (Some(r), _) => r,
        (None, ChangePointLaw::GeometricPrior { rho }) => rho,
        _ => return Err(config_err("overshoot.rho is required unless [change] is a geometric prior")),
    };
    if !(rho > 0.0 && rho < 1.0) {
        return Err(config_err(format!("overshoot.rho must lie in (0, 1), got {rho}")));
    }
    let seed = cfg.simulation.seed;
    let est = estimate_overshoot(cfg.model, rho, o.crossings, &o.boundaries, seed).map_err(|e| match e {
        QcdError::InvalidInput(m) => config_err(format!("[overshoot]: {m}")),
        other => other,
    })?;
    let n = o.crossings;
    let row = |metric: &str, b: Option<f64>, v: f64, se: f64| CsvRow {
        detector: "overshoot".into(),
        threshold: b,
        metric: metric.into(),
        value: v,
        std_error: Some(se),
        trials: Some(n),
        capped_fraction: None,
        seed,
    };
    let mut rows = Vec::new();
    for c in &est.per_threshold {
        rows.push(row("KAPPA", Some(c.threshold), c.kappa.value, c.kappa.std_error));
        rows.push(row("ZETA", Some(c.threshold), c.zeta.value, c.zeta.std_error));
    }
    rows.push(row("KAPPA", None, est.kappa.value, est.kappa.std_error));
    rows.push(row("ZETA", None, est.zeta.value, est.zeta.std_error));
    rows.push(row("ETA_MEAN", None, est.eta_mean.value, est.eta_mean.std_error));
    rows.push(CsvRow::scalar("overshoot", None, "FLAGGED", est.flagged as u8 as f64, seed));

    let kl = cfg.model.kl();
    let d = -(-rho).ln_1p();
    let grid: Vec<f64> = match (&cfg.simulation.thresholds, &cfg.detector) {
        (Some(g), Some(det)) if cfg.simulation.threshold_scale == ThresholdScale::Natural => {
            g.iter().map(|&t| det.threshold_to_scale(t)).collect()
        }
        (Some(g), _) => g.clone(),
        (None, _) => vec![],
    };
    for b in grid {
        rows.push(CsvRow::scalar("shiryaev", Some(b), "PFA_2ND", second_order_pfa(b, &est), seed));
        rows.push(CsvRow::scalar("shiryaev", Some(b), "ADD_2ND", second_order_add(b, &est, kl, d), seed));
        if b > 0.0 {
            let inputs = FirstOrderInputs::new((-b).exp(), kl, d)?;
            rows.push(CsvRow::scalar("shiryaev", Some(b), "ADD_1ST", first_order_add(&inputs), seed));
        }
    }
    Ok(rows)
}

fn network_config(cfg: &ExperimentConfig, n: &NetworkSection, rule: FusionRule, thresholds: Vec<f64>) -> SensorNetworkConfig {
    SensorNetworkConfig {
        num_sensors: n.sensors,
        per_sensor_model: cfg.model,
        quantizer_levels: n.quantizer_levels,
        local_detector: match n.local_detector {
            LocalKind::Cusum => LocalDetector::Cusum,
            LocalKind::Shiryaev => LocalDetector::Shiryaev { rho: n.local_rho.unwrap_or(0.0) },
        },
        local_thresholds: thresholds,
        fusion_rule: rule,
    }
}

fn parse_rule(name: &str, n: &NetworkSection) -> FusionRule {
    match name {
        "min" => FusionRule::Min,
        "max" => FusionRule::Max,
        "all" => FusionRule::All,
        _ => FusionRule::Sum { threshold: n.sum_threshold.unwrap_or(0.0) },
    }
}

/// Metrics per fusion rule, plus consistency rows: `ORDERING_VIOLATIONS`
/// (trials with `τ_min > min(τ_max, τ_all)`), `L1_MISMATCHES` (single
/// sensor: trials where a rule disagrees with the plain local detector),
/// and, when `slope_thresholds` is set, the All-rule FAR/delay sweep with
/// the per-threshold `RATIO = delay / |ln FAR|`, the fitted `ALL_SLOPE`, and
/// the centralized first-order slope `CENTRAL_SLOPE = 1 / (L · D)`.
pub fn cmd_decentralized(cfg: &ExperimentConfig) -> Result<Vec<CsvRow>> {
    let n = cfg.network.as_ref().ok_or_else(|| config_err("missing section [network]"))?;
    let sim = &cfg.simulation;
    let seed = sim.seed;
    let mut rows = Vec::new();
    let map_cfg = |e: QcdError| match e {
        QcdError::InvalidInput(m) | QcdError::InvalidModel(m) => config_err(format!("[network]: {m}")),
        other => other,
    };

    for name in &n.rules {
        let rule = parse_rule(name, n);
        let net = network_config(cfg, n, rule, n.local_thresholds.clone());
        let report = simulate_fusion_capped(&net, &cfg.change, sim.trials, sim.horizon_cap, seed).map_err(map_cfg)?;
        let label = format!("fusion_{}", rule.name());
        let t = n.local_thresholds.first().copied();
        if let (Some(kl), true) = (report.quantized_kl, rows.is_empty()) {
            rows.push(CsvRow::scalar("quantizer", None, "QUANTIZED_KL", kl, seed));
        }
        for m in &report.metrics {
            rows.push(CsvRow::estimate(&label, if rule.name() == "sum" { n.sum_threshold } else { t }, m, seed));
        }
    }

    let has = |r: &str| n.rules.iter().any(|x| x == r);
    if has("min") && (has("max") || has("all")) {
        let outcomes = |rule| {
            simulate_fusion_outcomes(
                &network_config(cfg, n, rule, n.local_thresholds.clone()),
                &cfg.change,
                sim.trials,
                sim.horizon_cap,
                seed,
            )
            .map_err(map_cfg)
        };
        let min = outcomes(FusionRule::Min)?;
        let max = if has("max") { Some(outcomes(FusionRule::Max)?) } else { None };
        let all = if has("all") { Some(outcomes(FusionRule::All)?) } else { None };
        let violations = (0..min.len())
            .filter(|&i| {
                let tmin = min[i].tau.value();
                let other = [max.as_ref(), all.as_ref()]
                    .iter()
                    .flatten()
                    .map(|v| v[i].tau.value())
                    .min()
                    .unwrap_or(u64::MAX);
                tmin > other
            })
            .count();
        let mut r = CsvRow::scalar("fusion", None, "ORDERING_VIOLATIONS", violations as f64, seed);
        r.trials = Some(sim.trials);
        rows.push(r);
    }

    if n.sensors == 1 && n.quantizer_levels.is_none() {
        let local = match n.local_detector {
            LocalKind::Cusum => DetectorSpec::Cusum { threshold: n.local_thresholds.first().copied().unwrap_or(1.0) },
            LocalKind::Shiryaev => DetectorSpec::Shiryaev {
                rho: n.local_rho.unwrap_or(0.0),
                threshold: n.local_thresholds.first().copied().unwrap_or(0.5),
            },
        };
        let plan = cfg.plan(&local);
        plan.validate().map_err(map_cfg)?;
        let mut mismatches = 0u64;
        for name in n.rules.iter().filter(|r| *r != "sum") {
            let net = network_config(cfg, n, parse_rule(name, n), n.local_thresholds.clone());
            let fused = simulate_fusion_outcomes(&net, &cfg.change, sim.trials, sim.horizon_cap, seed).map_err(map_cfg)?;
            for (i, f) in fused.iter().enumerate() {
                if run_trial(&plan, i as u64)?.tau != f.tau {
                    mismatches += 1;
                }
            }
        }
        let mut r = CsvRow::scalar("fusion", None, "L1_MISMATCHES", mismatches as f64, seed);
        r.trials = Some(sim.trials);
        rows.push(r);
    }

    if let Some(grid) = &n.slope_thresholds {
        if grid.len() < 3 {
            return Err(config_err("network.slope_thresholds needs at least 3 values"));
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for &b in grid {
            let net = network_config(cfg, n, FusionRule::All, vec![b]);
            let far = simulate_fusion_capped(&net, &ChangePointLaw::Never, sim.trials, sim.horizon_cap, seed).map_err(map_cfg)?;
            let delay = simulate_fusion_capped(&net, &ChangePointLaw::Fixed { gamma: 1 }, sim.trials, sim.horizon_cap, seed)
                .map_err(map_cfg)?;
            rows.push(CsvRow::estimate("fusion_all", Some(b), &far.metrics[0], seed));
            rows.push(CsvRow::estimate("fusion_all", Some(b), &delay.metrics[0], seed));
            let ratio = delay.metrics[0].value / far.metrics[0].value.ln().abs();
            rows.push(CsvRow::scalar("fusion_all", Some(b), "RATIO", ratio, seed));
            x.push(far.metrics[0].value.ln().abs());
            y.push(delay.metrics[0].value);
        }
        let (slope, _) = least_squares(&x, &y)
            .ok_or_else(|| QcdError::Estimation("All-rule slope regression is degenerate".into()))?;
        let kl = match n.quantizer_levels {
            Some(levels) => design_mlr_quantizer(&cfg.model, levels)?.kl,
            None => cfg.model.kl(),
        };
        rows.push(CsvRow::scalar("fusion_all", None, "CENTRAL_SLOPE", 1.0 / (n.sensors as f64 * kl), seed));
        rows.push(CsvRow::scalar("fusion_all", None, "ALL_SLOPE", slope, seed));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Estimate delay and false-alarm metrics per threshold.
    Simulate,
    /// Sweep thresholds and fit the delay vs |ln constraint| slope.
    Tradeoff,
    /// Estimate overshoot constants and second-order predictions.
    Overshoot,
    /// Simulate a sensor network under each fusion rule.
    Decentralized,
}

#[derive(Debug, Parser)]
#[command(name = "qcd", version, about = "Quickest change detection experiments")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config.
    #[arg(long, short, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled experiment instead of a config file.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub horizon_cap: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// CSV destination, overriding `[output] path`.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

pub fn exit_code(err: &QcdError) -> i32 {
    match err {
        QcdError::Config(_) | QcdError::InvalidModel(_) | QcdError::InvalidInput(_) | QcdError::InvalidPlan(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_RUNTIME,
    }
}

pub fn run_command(command: Command, cfg: &ExperimentConfig) -> Result<String> {
    let rows = match command {
        Command::Simulate => cmd_simulate(cfg),
        Command::Tradeoff => cmd_tradeoff(cfg),
        Command::Overshoot => cmd_overshoot(cfg),
        Command::Decentralized => cmd_decentralized(cfg),
    }?;
    Ok(render_csv(&rows))
}

/// Resolve the config, run the command and return the CSV text together
/// with its destination.
pub fn execute(args: &Args) -> Result<(String, Option<PathBuf>)> {
    let cfg = match (&args.config, args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(p)) => ExperimentConfig::preset(p),
        (None, None) => return Err(config_err("either --config or --preset is required")),
    };
    let cfg = cfg.with_overrides(&Overrides {
        trials: args.trials,
        seed: args.seed,
        horizon_cap: args.horizon_cap,
        output: args.output.clone(),
    })?;
    let csv = match args.threads {
        Some(0) => return Err(config_err("--threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| QcdError::Numeric(e.to_string()))?
            .install(|| run_command(args.command, &cfg))?,
        None => run_command(args.command, &cfg)?,
    };
    Ok((csv, cfg.output.path.clone()))
}

/// Entry point shared by the binary and the tests. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&args) {
        Ok((csv, Some(path))) => match std::fs::write(&path, csv) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", path.display());
                EXIT_RUNTIME
            }
        },
        Ok((csv, None)) => {
            print!("{csv}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(5.85e-4), "5.85e-4");
        assert_eq!(format_number(0.001), "0.001");
        assert_eq!(format_number(18.5), "18.5");
        assert_eq!(format_number(-2e-5), "-2e-5");
    }

    #[test]
    fn presets_parse() {
        for p in [Preset::Table2, Preset::Fig4, Preset::Fig6] {
            let cfg = ExperimentConfig::preset(p);
            assert!(cfg.detector.is_some());
        }
        let t2 = ExperimentConfig::preset(Preset::Table2);
        assert_eq!(t2.simulation.thresholds.as_ref().unwrap(), &[1.386, 2.197, 4.595, 6.906, 11.512]);
    }

    #[test]
    fn grid_threshold_fills_detector() {
        let cfg = ExperimentConfig::preset(Preset::Table2);
        let det = cfg.detector.as_ref().unwrap();
        assert!((cfg.to_natural(det, 4.595) - 0.99).abs() < 1e-4);
    }
}
