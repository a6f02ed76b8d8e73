//! Seeded Monte Carlo evaluation of detectors.
//!
//! A [`TrialPlan`] fixes the observation model, the change-point law, the
//! detector and the run size. Trial `i` draws everything from its own
//! generator stream `(base_seed, i)`, and trials are reduced in fixed-size
//! chunks whose partial sums are merged in index order. Results are therefore
//! bit-identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorSpec, Observation};
use crate::dist::{ChangePointLaw, DensityPair, Family, Regime};
use crate::error::{QcdError, Result};
use crate::numeric::least_squares;
use crate::rng::{trial_rng, SimRng};

/// Runs with a larger capped fraction than this are flagged.
pub const MAX_CAPPED_FRACTION: f64 = 1e-3;

/// Default horizon cap.
pub const DEFAULT_HORIZON_CAP: u64 = 1_000_000;

/// Change points used to bound CADD for detectors whose worst case is not
/// known to occur at the first step.
pub const CADD_GAMMA_GRID: [u64; 7] = [1, 2, 5, 10, 20, 50, 100];

const CHUNK: u64 = 2048;

/// Where observations come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ObservationModel {
    /// i.i.d. draws from `f0` before the change and `f1` after.
    Iid(DensityPair),
    /// Deterministic log-likelihood ratios: `pre` before the change, `post`
    /// after. Useful for exact checks of stopping rules.
    ConstantDrift { pre: f64, post: f64 },
}

impl ObservationModel {
    #[inline]
    pub(crate) fn observe(&self, regime: Regime, rng: &mut SimRng) -> Observation {
        match self {
            ObservationModel::Iid(pair) => {
                let x = pair.sample(regime, rng);
                Observation { x, llr: pair.llr(x) }
            }
            ObservationModel::ConstantDrift { pre, post } => {
                let v = if regime == Regime::Pre { *pre } else { *post };
                Observation { x: v, llr: v }
            }
        }
    }

    fn gaussian_baseline(&self) -> Option<(f64, f64)> {
        match self {
            ObservationModel::Iid(pair) => match pair.family() {
                Family::GaussianMeanShift { mu0, sigma, .. } => Some((mu0, sigma)),
                _ => None,
            },
            ObservationModel::ConstantDrift { .. } => None,
        }
    }

    /// Post-change drift of the LLR: `D(f1‖f0)` for i.i.d. models.
    pub fn post_drift(&self) -> f64 {
        match self {
            ObservationModel::Iid(pair) => pair.kl(),
            ObservationModel::ConstantDrift { post, .. } => *post,
        }
    }
}

impl From<DensityPair> for ObservationModel {
    fn from(pair: DensityPair) -> Self {
        ObservationModel::Iid(pair)
    }
}

/// Everything needed to run a batch of independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub model: ObservationModel,
    pub change_law: ChangePointLaw,
    pub detector: DetectorSpec,
    pub num_trials: u64,
    pub horizon_cap: u64,
    pub base_seed: u64,
}

impl TrialPlan {
    pub fn new(model: impl Into<ObservationModel>, change_law: ChangePointLaw, detector: DetectorSpec) -> Self {
        Self {
            model: model.into(),
            change_law,
            detector,
            num_trials: 10_000,
            horizon_cap: DEFAULT_HORIZON_CAP,
            base_seed: 0,
        }
    }

    pub fn trials(mut self, n: u64) -> Self {
        self.num_trials = n;
        self
    }

    pub fn horizon(mut self, cap: u64) -> Self {
        self.horizon_cap = cap;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_change_law(&self, law: ChangePointLaw) -> Self {
        Self { change_law: law, ..self.clone() }
    }

    pub fn with_detector(&self, detector: DetectorSpec) -> Self {
        Self { detector, ..self.clone() }
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        self.with_detector(self.detector.with_threshold(threshold))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trials == 0 {
            return Err(QcdError::invalid_plan("num_trials must be >= 1"));
        }
        if self.horizon_cap == 0 {
            return Err(QcdError::invalid_plan("horizon_cap must be >= 1"));
        }
        self.change_law.validate()?;
        if self.detector.needs_gaussian_observations() && self.model.gaussian_baseline().is_none() {
            return Err(QcdError::invalid_plan(format!(
                "{} requires an i.i.d. Gaussian mean-shift model",
                self.detector.name()
            )));
        }
        self.detector.build(self.model.gaussian_baseline()).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopTime {
    Stopped(u64),
    /// The horizon cap was reached without a stop.
    Capped(u64),
}

impl StopTime {
    pub fn value(&self) -> u64 {
        match *self {
            StopTime::Stopped(n) | StopTime::Capped(n) => n,
        }
    }

    pub fn is_capped(&self) -> bool {
        matches!(self, StopTime::Capped(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub tau: StopTime,
    /// Realized change point; `None` when the change never happens.
    pub gamma: Option<u64>,
    pub observations_used: u64,
    /// Observations taken at times `k ≤ min(τ, Γ − 1)`.
    pub observations_before_change: u64,
    pub terminal_statistic: f64,
}

impl TrialOutcome {
    /// `τ < Γ` for a stopped trial.
    pub fn is_false_alarm(&self) -> bool {
        match (self.tau, self.gamma) {
            (StopTime::Stopped(t), Some(g)) => t < g,
            (StopTime::Stopped(_), None) => true,
            (StopTime::Capped(_), _) => false,
        }
    }
}

/// Run one trial. Fully determined by `(plan.base_seed, index)`.
pub fn run_trial(plan: &TrialPlan, index: u64) -> Result<TrialOutcome> {
    let mut rng = trial_rng(plan.base_seed, index);
    let gamma = plan.change_law.draw(&mut rng);
    let change = gamma.unwrap_or(u64::MAX);
    let mut detector = plan.detector.build(plan.model.gaussian_baseline())?;
    let mut before = 0u64;
    for n in 1..=plan.horizon_cap {
        let regime = if n >= change { Regime::Post } else { Regime::Pre };
        // every step draws, taken or not, so skip patterns do not shift the stream
        let obs = plan.model.observe(regime, &mut rng);
        let take = detector.wants_observation();
        if take && n < change {
            before += 1;
        }
        if detector.advance(take.then_some(obs))? {
            return Ok(TrialOutcome {
                tau: StopTime::Stopped(n),
                gamma,
                observations_used: detector.observations_used(),
                observations_before_change: before,
                terminal_statistic: detector.statistic(),
            });
        }
    }
    Ok(TrialOutcome {
        tau: StopTime::Capped(plan.horizon_cap),
        gamma,
        observations_used: detector.observations_used(),
        observations_before_change: before,
        terminal_statistic: detector.statistic(),
    })
}

/// Running count, sum and sum of squares.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "ADD")]
    Add,
    #[serde(rename = "PFA")]
    Pfa,
    #[serde(rename = "FAR")]
    Far,
    #[serde(rename = "WADD_CADD")]
    WaddCadd,
    /// Max over a grid of change points of the conditional delay; a lower
    /// bound on CADD.
    #[serde(rename = "CADD_LB")]
    CaddLowerBound,
    #[serde(rename = "ANO")]
    Ano,
    #[serde(rename = "MTTFA")]
    MeanTimeToFalseAlarm,
}

impl Metric {
    pub fn label(&self) -> &'static str {
        match self {
            Metric::Add => "ADD",
            Metric::Pfa => "PFA",
            Metric::Far => "FAR",
            Metric::WaddCadd => "WADD_CADD",
            Metric::CaddLowerBound => "CADD_LB",
            Metric::Ano => "ANO",
            Metric::MeanTimeToFalseAlarm => "MTTFA",
        }
    }
}

/// Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub metric: Metric,
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    pub capped_fraction: f64,
}

impl MetricEstimate {
    /// Too many capped trials for the estimate to be trusted.
    pub fn flagged(&self) -> bool {
        self.capped_fraction > MAX_CAPPED_FRACTION
    }

    /// `|value − target| ≤ k · std_error`.
    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    /// `value ≤ bound + k · std_error`.
    pub fn at_most(&self, bound: f64, k: f64) -> bool {
        self.value <= bound + k * self.std_error
    }
}

/// Sufficient statistics of a batch of trials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub trials: u64,
    pub capped: u64,
    pub false_alarms: u64,
    /// `τ` (cap value for capped trials).
    pub tau: Moments,
    /// `(τ − Γ)^+` over trials whose change happens.
    pub delay: Moments,
    /// `τ − Γ` over trials with `τ ≥ Γ`.
    pub conditional_delay: Moments,
    /// Observations taken before the change.
    pub observations_before_change: Moments,
    pub observations_used: Moments,
}

impl RunSummary {
    pub fn push(&mut self, o: &TrialOutcome) {
        self.trials += 1;
        let t = o.tau.value();
        if o.tau.is_capped() {
            self.capped += 1;
        }
        if o.is_false_alarm() {
            self.false_alarms += 1;
        }
        self.tau.push(t as f64);
        if let Some(g) = o.gamma {
            self.delay.push(t.saturating_sub(g) as f64);
            if t >= g {
                self.conditional_delay.push((t - g) as f64);
            }
        }
        self.observations_before_change.push(o.observations_before_change as f64);
        self.observations_used.push(o.observations_used as f64);
    }

    pub fn merge(&mut self, other: &RunSummary) {
        self.trials += other.trials;
        self.capped += other.capped;
        self.false_alarms += other.false_alarms;
        self.tau.merge(&other.tau);
        self.delay.merge(&other.delay);
        self.conditional_delay.merge(&other.conditional_delay);
        self.observations_before_change.merge(&other.observations_before_change);
        self.observations_used.merge(&other.observations_used);
    }

    pub fn capped_fraction(&self) -> f64 {
        self.capped as f64 / self.trials as f64
    }

    fn check_estimable(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(QcdError::Estimation("no trials".into()));
        }
        if self.capped == self.trials {
            return Err(QcdError::Estimation("every trial reached the horizon cap".into()));
        }
        Ok(())
    }

    fn estimate(&self, metric: Metric, value: f64, std_error: f64) -> MetricEstimate {
        MetricEstimate { metric, value, std_error, trials: self.trials, capped_fraction: self.capped_fraction() }
    }

    /// `E[(τ − Γ)^+]`.
    pub fn add(&self) -> Result<MetricEstimate> {
        self.check_estimable()?;
        if self.delay.n == 0 {
            return Err(QcdError::Estimation("ADD needs trials with a change point".into()));
        }
        Ok(self.estimate(Metric::Add, self.delay.mean(), self.delay.std_error()))
    }

    /// `P(τ < Γ)` with binomial standard error.
    pub fn pfa(&self) -> Result<MetricEstimate> {
        self.check_estimable()?;
        let n = self.trials as f64;
        let p = self.false_alarms as f64 / n;
        Ok(self.estimate(Metric::Pfa, p, (p * (1.0 - p) / n).sqrt()))
    }

    pub fn mean_time_to_false_alarm(&self) -> Result<MetricEstimate> {
        self.check_estimable()?;
        Ok(self.estimate(Metric::MeanTimeToFalseAlarm, self.tau.mean(), self.tau.std_error()))
    }

    /// `1 / E_∞[τ]`, standard error by the delta method.
    pub fn far(&self) -> Result<MetricEstimate> {
        self.check_estimable()?;
        let m = self.tau.mean();
        Ok(self.estimate(Metric::Far, 1.0 / m, self.tau.std_error() / (m * m)))
    }

    /// `E[τ − 1]`, the worst-case delay when the change is at time 1.
    pub fn wadd_cadd(&self) -> Result<MetricEstimate> {
        self.check_estimable()?;
        Ok(self.estimate(Metric::WaddCadd, self.tau.mean() - 1.0, self.tau.std_error()))
    }

    /// Average number of observations taken before the change.
    pub fn ano(&self) -> Result<MetricEstimate> {
        self.check_estimable()?;
        Ok(self.estimate(
            Metric::Ano,
            self.observations_before_change.mean(),
            self.observations_before_change.std_error(),
        ))
    }
}

/// Visit indices `0..n` in fixed-size chunks, in parallel, and merge the
/// per-chunk accumulators in chunk order. The result does not depend on the
/// number of worker threads.
pub(crate) fn reduce_indexed<S, F, M>(n: u64, visit: F, merge: M) -> Result<S>
where
    S: Default + Send,
    F: Fn(u64, &mut S) -> Result<()> + Sync,
    M: Fn(&mut S, &S),
{
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<S> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = S::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                visit(i, &mut s)?;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut total = S::default();
    for p in &partials {
        merge(&mut total, p);
    }
    Ok(total)
}

/// Run every trial of the plan and reduce to a [`RunSummary`].
pub fn simulate(plan: &TrialPlan) -> Result<RunSummary> {
    plan.validate()?;
    reduce_indexed(
        plan.num_trials,
        |i, s: &mut RunSummary| {
            s.push(&run_trial(plan, i)?);
            Ok(())
        },
        RunSummary::merge,
    )
}

/// Every trial outcome, in index order.
pub fn simulate_outcomes(plan: &TrialPlan) -> Result<Vec<TrialOutcome>> {
    plan.validate()?;
    (0..plan.num_trials).into_par_iter().map(|i| run_trial(plan, i)).collect()
}

fn require_geometric(plan: &TrialPlan, what: &str) -> Result<()> {
    match plan.change_law {
        ChangePointLaw::GeometricPrior { .. } => Ok(()),
        _ => Err(QcdError::invalid_plan(format!("{what} requires a geometric change-point prior"))),
    }
}

/// ADD and PFA under a geometric prior.
pub fn estimate_add_pfa(plan: &TrialPlan) -> Result<(MetricEstimate, MetricEstimate)> {
    require_geometric(plan, "ADD/PFA estimation")?;
    let s = simulate(plan)?;
    Ok((s.add()?, s.pfa()?))
}

/// False-alarm rate from runs with no change.
pub fn estimate_far(plan: &TrialPlan) -> Result<MetricEstimate> {
    if plan.change_law != ChangePointLaw::Never {
        return Err(QcdError::invalid_plan("FAR estimation requires change law Never"));
    }
    simulate(plan)?.far()
}

/// WADD = CADD = `E_1[τ − 1]` for detectors whose worst case is a change at
/// the first step (CuSum, SR from 0). The plan's change law is replaced by a
/// change at time 1.
pub fn estimate_wadd_cadd(plan: &TrialPlan) -> Result<MetricEstimate> {
    if !plan.detector.worst_case_at_first_step() {
        return Err(QcdError::invalid_plan(format!(
            "{} does not start from its minimal statistic; WADD and CADD are not E_1[tau - 1]",
            plan.detector.name()
        )));
    }
    simulate(&plan.with_change_law(ChangePointLaw::Fixed { gamma: 1 }))?.wadd_cadd()
}

/// `max_γ E_γ[τ − γ | τ ≥ γ]` over `gammas`: a lower bound on CADD for any
/// detector.
pub fn estimate_cadd_lower_bound(plan: &TrialPlan, gammas: &[u64]) -> Result<MetricEstimate> {
    let mut best: Option<MetricEstimate> = None;
    for &g in gammas {
        let s = simulate(&plan.with_change_law(ChangePointLaw::Fixed { gamma: g }))?;
        s.check_estimable()?;
        if s.conditional_delay.n == 0 {
            continue;
        }
        let est = MetricEstimate {
            metric: Metric::CaddLowerBound,
            value: s.conditional_delay.mean(),
            std_error: s.conditional_delay.std_error(),
            trials: s.conditional_delay.n,
            capped_fraction: s.capped_fraction(),
        };
        if best.is_none_or(|b| est.value > b.value) {
            best = Some(est);
        }
    }
    best.ok_or_else(|| QcdError::Estimation("no trial survived to any grid change point".into()))
}

/// ANO under a geometric prior.
pub fn estimate_ano(plan: &TrialPlan) -> Result<MetricEstimate> {
    require_geometric(plan, "ANO estimation")?;
    simulate(plan)?.ano()
}

/// Skip threshold `B` of a data-efficient Shiryaev plan giving ANO close to
/// `target_ano`, by bisection on `B ∈ [0, 1]` (ANO is nonincreasing in `B`).
/// Stops once the simulated ANO is within `rel_tol` of the target.
pub fn tune_skip_threshold(plan: &TrialPlan, target_ano: f64, rel_tol: f64) -> Result<(f64, MetricEstimate)> {
    let DetectorSpec::DeShiryaev { rho, threshold, .. } = plan.detector else {
        return Err(QcdError::invalid_plan("skip-threshold tuning needs a de_shiryaev detector"));
    };
    if !(target_ano >= 0.0) {
        return Err(QcdError::Calibration(format!("target ANO must be >= 0, got {target_ano}")));
    }
    let eval = |b: f64| estimate_ano(&plan.with_detector(DetectorSpec::DeShiryaev { rho, threshold, skip_threshold: b }));
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = (0.0, eval(0.0)?);
    if best.1.value < target_ano {
        return Err(QcdError::Calibration(format!(
            "ANO {} with every observation taken is below the target {target_ano}",
            best.1.value
        )));
    }
    for _ in 0..40 {
        if (best.1.value - target_ano).abs() <= rel_tol * target_ano {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let m = eval(mid)?;
        if (m.value - target_ano).abs() < (best.1.value - target_ano).abs() {
            best = (mid, m);
        }
        if m.value > target_ano {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// False-alarm constraint for calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Pfa(f64),
    Far(f64),
}

impl Constraint {
    pub fn alpha(&self) -> f64 {
        match *self {
            Constraint::Pfa(a) | Constraint::Far(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Initial bracket step on the detector's threshold scale.
    pub step: f64,
    pub max_expansions: u32,
    pub max_iterations: u32,
    /// Accept as soon as the metric lands in `[accept_fraction · α, α]`.
    pub accept_fraction: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { step: 1.0, max_expansions: 12, max_iterations: 40, accept_fraction: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Threshold guaranteeing the constraint without simulation, if known.
    pub analytic: Option<f64>,
    /// Smallest simulated-feasible threshold found.
    pub threshold: f64,
    pub achieved: MetricEstimate,
    pub evaluations: u32,
}

fn constraint_metric(plan: &TrialPlan, constraint: Constraint) -> Result<MetricEstimate> {
    match constraint {
        Constraint::Pfa(_) => simulate(plan)?.pfa(),
        Constraint::Far(_) => simulate(&plan.with_change_law(ChangePointLaw::Never))?.far(),
    }
}

/// Find a threshold meeting the constraint by bisection on the detector's
/// threshold scale, reusing the plan's seed at every evaluation so the
/// simulated metric is monotone in the threshold.
pub fn calibrate_threshold(plan: &TrialPlan, constraint: Constraint) -> Result<Calibration> {
    calibrate_threshold_with(plan, constraint, CalibrationOptions::default())
}

pub fn calibrate_threshold_with(
    plan: &TrialPlan,
    constraint: Constraint,
    opts: CalibrationOptions,
) -> Result<Calibration> {
    let alpha = constraint.alpha();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(QcdError::Calibration(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Constraint::Pfa(_) = constraint {
        require_geometric(plan, "PFA calibration")?;
    }
    let spec = &plan.detector;
    let analytic = spec.analytic_threshold(alpha);
    let start = analytic.unwrap_or_else(|| spec.threshold());
    let mut evaluations = 0u32;
    let mut eval = |u: f64| -> Result<MetricEstimate> {
        evaluations += 1;
        constraint_metric(&plan.with_threshold(spec.threshold_from_scale(u)), constraint)
    };
    // thresholds like CuSum's b must stay positive
    let floor = match spec {
        DetectorSpec::Cusum { .. } | DetectorSpec::GlrGaussian { .. } => Some(1e-9),
        _ => None,
    };

    let u0 = spec.threshold_to_scale(start);
    let m0 = eval(u0)?;
    let (mut lo, mut hi, mut hi_metric);
    if m0.value <= alpha {
        hi = u0;
        hi_metric = m0;
        let mut step = opts.step;
        let mut found = None;
        for _ in 0..opts.max_expansions {
            let mut u = hi - step;
            if let Some(f) = floor {
                u = u.max(f);
            }
            let m = eval(u)?;
            if m.value > alpha {
                found = Some(u);
                break;
            }
            hi = u;
            hi_metric = m;
            if floor.is_some_and(|f| u <= f) {
                break;
            }
            step *= 2.0;
        }
        lo = match found {
            Some(u) => u,
            // even the lowest threshold tried meets the constraint
            None => {
                return Ok(Calibration {
                    analytic,
                    threshold: spec.threshold_from_scale(hi),
                    achieved: hi_metric,
                    evaluations,
                })
            }
        };
    } else {
        lo = u0;
        let mut step = opts.step;
        let mut found = None;
        for _ in 0..opts.max_expansions {
            let u = lo + step;
            let m = eval(u)?;
            if m.value <= alpha {
                found = Some((u, m));
                break;
            }
            lo = u;
            step *= 2.0;
        }
        let (u, m) = found.ok_or_else(|| {
            QcdError::Calibration(format!(
                "no threshold up to {} meets {constraint:?}",
                spec.threshold_from_scale(lo)
            ))
        })?;
        hi = u;
        hi_metric = m;
    }

    for _ in 0..opts.max_iterations {
        if hi_metric.value >= opts.accept_fraction * alpha || hi - lo < 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let m = eval(mid)?;
        if m.value <= alpha {
            hi = mid;
            hi_metric = m;
        } else {
            lo = mid;
        }
    }
    Ok(Calibration { analytic, threshold: spec.threshold_from_scale(hi), achieved: hi_metric, evaluations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRow {
    pub threshold: f64,
    pub constraint: MetricEstimate,
    pub delay: MetricEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    pub rows: Vec<TradeoffRow>,
    /// Least-squares slope of delay against `|ln constraint|`.
    pub slope: f64,
    pub intercept: f64,
}

/// One (constraint, delay) pair per threshold.
///
/// Bayesian detectors report (PFA, ADD) under the plan's geometric prior.
/// Other detectors report FAR from change-free runs and WADD/CADD from runs
/// with the change at time 1 (or the CADD grid lower bound when the worst
/// case is not at time 1). Every grid point reuses the plan's seed.
pub fn tradeoff_sweep(plan: &TrialPlan, thresholds: &[f64]) -> Result<TradeoffCurve> {
    if thresholds.len() < 3 {
        return Err(QcdError::invalid_plan(format!(
            "a trade-off sweep needs at least 3 thresholds, got {}",
            thresholds.len()
        )));
    }
    let bayesian = plan.detector.is_bayesian();
    if bayesian {
        require_geometric(plan, "a Bayesian trade-off sweep")?;
    }
    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let p = plan.with_threshold(t);
        let row = if bayesian {
            let s = simulate(&p)?;
            TradeoffRow { threshold: t, constraint: s.pfa()?, delay: s.add()? }
        } else {
            let far = estimate_far(&p.with_change_law(ChangePointLaw::Never))?;
            let delay = if p.detector.worst_case_at_first_step() {
                estimate_wadd_cadd(&p)?
            } else {
                estimate_cadd_lower_bound(&p, &CADD_GAMMA_GRID)?
            };
            TradeoffRow { threshold: t, constraint: far, delay }
        };
        rows.push(row);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.constraint.value > 0.0)
        .map(|r| (r.constraint.value.ln().abs(), r.delay.value))
        .unzip();
    let (slope, intercept) = least_squares(&x, &y).ok_or_else(|| {
        QcdError::Estimation("too few grid points with a non-zero false-alarm metric to fit a slope".into())
    })?;
    Ok(TradeoffCurve { rows, slope, intercept })
}
