//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use qcd::asymptotics::{estimate_overshoot, second_order_add, second_order_pfa};
use qcd::decentralized::{design_mlr_quantizer, quantized_kl, simulate_fusion_outcomes, FusionRule, LocalDetector, SensorNetworkConfig};
use qcd::detectors::{
    brute_force_cusum, CusumState, DetectorSpec, ShiryaevLambdaState, ShiryaevRState, ShiryaevState, SrState,
};
use qcd::dist::{ChangePointLaw, DensityPair, Regime};
use qcd::harness::{
    calibrate_threshold, estimate_add_pfa, estimate_far, run_trial, simulate, tradeoff_sweep, tune_skip_threshold,
    Constraint, TrialPlan,
};
use qcd::rng::trial_rng;
use rand::Rng;

struct Verdict {
    pass: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { pass: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.pass &= ok;
        self.lines.push(format!("    [{}] {msg}", if ok { "ok" } else { "FAIL" }));
    }
}

fn gauss(mu1: f64) -> DensityPair {
    DensityPair::gaussian(0.0, mu1, 1.0).unwrap()
}

fn shiryaev_log_threshold(rho: f64, b: f64) -> DetectorSpec {
    let spec = DetectorSpec::Shiryaev { rho, threshold: 0.5 };
    spec.with_threshold(spec.threshold_from_scale(b))
}

fn table2_simulated() -> Verdict {
    let mut v = Verdict::new();
    let rho = 0.01;
    let rows = [(1.386, 1.22e-1, 6.93), (2.197, 5.85e-2, 8.87), (4.595, 5.61e-3, 13.9), (6.906, 5.59e-4, 18.59)];
    for (b, pfa_ref, add_ref) in rows {
        let plan = TrialPlan::new(gauss(1.0), ChangePointLaw::GeometricPrior { rho }, shiryaev_log_threshold(rho, b))
            .trials(1_000_000)
            .seed(20120101);
        let (add, pfa) = estimate_add_pfa(&plan).unwrap();
        v.check(
            pfa.within_se(pfa_ref, 3.0),
            format!("b={b}: PFA {:.4e} (se {:.1e}) vs {pfa_ref:.3e} within 3 SE", pfa.value, pfa.std_error),
        );
        v.check(
            (add.value / add_ref - 1.0).abs() <= 0.05,
            format!("b={b}: ADD {:.3} vs {add_ref} within 5%", add.value),
        );
    }
    v
}

fn table2_analysis() -> Verdict {
    let mut v = Verdict::new();
    let rho = 0.01;
    let model = gauss(1.0);
    let d = -(-rho as f64).ln_1p();
    let est = estimate_overshoot(model, rho, 200_000, &[5.0, 15.0, 25.0], 77).unwrap();
    v.check(
        !est.flagged,
        format!(
            "kappa {:.4}, zeta {:.4}, E1[eta] {:.4}, stationary across boundaries",
            est.kappa.value, est.zeta.value, est.eta_mean.value
        ),
    );
    let rows = [
        (1.386, 1.39e-1, 10.31),
        (2.197, 6.19e-2, 11.9),
        (4.595, 5.63e-3, 16.6),
        (6.906, 5.58e-4, 21.13),
        (11.512, 5.58e-6, 30.16),
    ];
    for (b, pfa_ref, add_ref) in rows {
        let pfa = second_order_pfa(b, &est);
        let add = second_order_add(b, &est, model.kl(), d);
        v.check(
            (pfa / pfa_ref - 1.0).abs() <= 0.10 && (add / add_ref - 1.0).abs() <= 0.10,
            format!("b={b}: PFA {pfa:.3e} vs {pfa_ref:.2e}, ADD {add:.2} vs {add_ref} within 10%"),
        );
    }
    v
}

fn tradeoff_slopes() -> Verdict {
    let mut v = Verdict::new();
    let model = gauss(0.75);
    let kl = 0.28125;

    let plan = TrialPlan::new(model, ChangePointLaw::Never, DetectorSpec::Cusum { threshold: 1.0 }).trials(2000).seed(6);
    let curve = tradeoff_sweep(&plan, &[5.0, 6.25, 7.5, 8.75]).unwrap();
    let fars: Vec<f64> = curve.rows.iter().map(|r| r.constraint.value).collect();
    v.check(
        fars.iter().all(|&f| (1e-5..=1e-3).contains(&f)),
        format!(
            "CuSum FAR grid [{}] inside [1e-5, 1e-3]",
            fars.iter().map(|f| format!("{f:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    );
    v.check(
        (curve.slope * kl - 1.0).abs() <= 0.15,
        format!("CuSum CADD slope {:.3} vs 1/D = {:.3} within 15%", curve.slope, 1.0 / kl),
    );

    let rho = 0.01;
    let law = ChangePointLaw::GeometricPrior { rho };
    let spec = DetectorSpec::Shiryaev { rho, threshold: 0.5 };
    let grid: Vec<f64> = [3.0, 4.0, 5.0, 6.0, 7.0].iter().map(|&b| spec.threshold_from_scale(b)).collect();
    let curve = tradeoff_sweep(&TrialPlan::new(model, law, spec).trials(200_000).seed(4), &grid).unwrap();
    let target = 1.0 / (kl + law.tail_exponent());
    v.check(
        (curve.slope / target - 1.0).abs() <= 0.15,
        format!("Shiryaev ADD slope {:.3} vs 1/(D + d) = {target:.3} within 15%", curve.slope),
    );
    v
}

fn threshold_guarantees() -> Verdict {
    let mut v = Verdict::new();
    let model = gauss(1.0);
    for alpha in [1e-2, 1e-3] {
        let rho = 0.01;
        let plan = TrialPlan::new(
            model,
            ChangePointLaw::GeometricPrior { rho },
            DetectorSpec::Shiryaev { rho, threshold: 1.0 - alpha },
        )
        .trials(400_000)
        .seed(41);
        let (_, pfa) = estimate_add_pfa(&plan).unwrap();
        v.check(
            pfa.at_most(alpha, 3.0),
            format!("Shiryaev A=1-{alpha:e}: PFA {:.3e} (se {:.1e}) <= alpha", pfa.value, pfa.std_error),
        );

        let sr = TrialPlan::new(
            model,
            ChangePointLaw::Never,
            DetectorSpec::ShiryaevRoberts { threshold: 1.0 / alpha, head_start: 0.0 },
        )
        .trials(5000)
        .seed(42);
        let far = estimate_far(&sr).unwrap();
        v.check(
            far.at_most(alpha, 3.0) && !far.flagged(),
            format!("SR B=1/{alpha:e}: FAR {:.3e} (se {:.1e}) <= alpha", far.value, far.std_error),
        );

        let cusum = sr.with_detector(DetectorSpec::Cusum { threshold: alpha.ln().abs() });
        let far = estimate_far(&cusum).unwrap();
        v.check(
            far.at_most(alpha, 3.0) && !far.flagged(),
            format!("CuSum b=|ln {alpha:e}|: FAR {:.3e} (se {:.1e}) <= alpha", far.value, far.std_error),
        );
    }
    v
}

fn draw_llr(model: &DensityPair, regime: Regime, rng: &mut qcd::rng::SimRng) -> f64 {
    let x = model.sample(regime, rng);
    model.log_likelihood_ratio(x).unwrap()
}

fn run_until_stop(mut step: impl FnMut(f64) -> bool, path: &[f64]) -> Option<usize> {
    path.iter().position(|&y| step(y)).map(|i| i + 1)
}

fn property_suites() -> Verdict {
    let mut v = Verdict::new();
    let started = Instant::now();
    let model = gauss(1.0);
    let rho = 0.05;

    // three Shiryaev forms
    let mut mismatches = 0;
    for i in 0..10_000u64 {
        let mut rng = trial_rng(501, i);
        let gamma = ChangePointLaw::GeometricPrior { rho }.draw(&mut rng).unwrap();
        let path: Vec<f64> = (1..=400u64)
            .map(|n| draw_llr(&model, if n >= gamma { Regime::Post } else { Regime::Pre }, &mut rng))
            .collect();
        let a_thr = rng.random_range(0.5..0.999);
        let a = a_thr / (1.0 - a_thr);
        let mut p = ShiryaevState::new(rho, a_thr).unwrap();
        let mut l = ShiryaevLambdaState::new(rho, a).unwrap();
        let mut r = ShiryaevRState::new(rho, a / rho).unwrap();
        let tp = run_until_stop(|y| p.step(y).unwrap(), &path);
        let tl = run_until_stop(|y| l.step(y).unwrap(), &path);
        let tr = run_until_stop(|y| r.step(y).unwrap(), &path);
        if !(tp == tl && tl == tr) {
            mismatches += 1;
        }
    }
    v.check(mismatches == 0, format!("three-form Shiryaev stopping times: {mismatches} mismatches in 10^4 paths"));

    // CuSum W and C crossing times, and the recursion against the explicit max
    let mut wc = 0;
    let mut brute = 0;
    for i in 0..10_000u64 {
        let mut rng = trial_rng(502, i);
        let gamma = rng.random_range(1..150u64);
        let path: Vec<f64> = (1..=200u64)
            .map(|n| draw_llr(&model, if n >= gamma { Regime::Post } else { Regime::Pre }, &mut rng))
            .collect();
        let b = rng.random_range(0.5..8.0);
        let mut s = CusumState::new(1e300).unwrap();
        let mut tw = None;
        let mut tc = None;
        let mut ws = Vec::with_capacity(path.len());
        let mut cs = Vec::with_capacity(path.len());
        for (n, &y) in path.iter().enumerate() {
            s.step(y).unwrap();
            ws.push(s.w());
            cs.push(s.c());
            if tw.is_none() && s.w() >= b {
                tw = Some(n);
            }
            if tc.is_none() && s.c() >= b {
                tc = Some(n);
            }
        }
        if tw != tc {
            wc += 1;
        }
        let bf = brute_force_cusum(&path);
        let close = |a: f64, e: f64| (a - e).abs() <= 1e-9 * (1.0 + e.abs());
        if cs.iter().zip(&bf).any(|(&a, &e)| !close(a, e)) || ws.iter().zip(&bf).any(|(&a, &e)| !close(a, e.max(0.0))) {
            brute += 1;
        }
    }
    v.check(wc == 0, format!("CuSum W/C crossing times: {wc} mismatches in 10^4 paths"));
    v.check(brute == 0, format!("CuSum recursion vs explicit max, length 200: {brute} mismatches in 10^4 paths"));

    // SR martingale: E_inf[R_n] = n
    let small = gauss(0.1);
    for n in [10u64, 50, 200] {
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let paths = 20_000u64;
        for i in 0..paths {
            let mut rng = trial_rng(503 + n, i);
            let mut sr = SrState::with_log_threshold(0.0, f64::INFINITY).unwrap();
            for _ in 0..n {
                sr.step(draw_llr(&small, Regime::Pre, &mut rng)).unwrap();
            }
            let x = sr.r() - n as f64;
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / paths as f64;
        let se = ((sum_sq / paths as f64 - mean * mean) / paths as f64).sqrt();
        v.check(mean.abs() <= 3.0 * se, format!("SR martingale n={n}: mean of R_n - n = {mean:.3} (se {se:.3})"));
    }

    // DE-Shiryaev with B = 0 against Shiryaev
    let plan = TrialPlan::new(model, ChangePointLaw::GeometricPrior { rho }, DetectorSpec::Shiryaev { rho, threshold: 0.95 })
        .trials(10_000)
        .seed(504);
    let de = plan.with_detector(DetectorSpec::DeShiryaev { rho, threshold: 0.95, skip_threshold: 0.0 });
    let diff = (0..10_000).filter(|&i| run_trial(&plan, i).unwrap().tau != run_trial(&de, i).unwrap().tau).count();
    v.check(diff == 0, format!("DE-Shiryaev(B=0) vs Shiryaev: {diff} differing stopping times in 10^4 trials"));

    // closed-form K-L divergences against quadrature
    let pairs = [
        DensityPair::gaussian(0.0, 1.0, 1.0).unwrap(),
        DensityPair::gaussian(-0.3, 0.75, 2.0).unwrap(),
        DensityPair::gaussian(2.0, -1.0, 0.5).unwrap(),
        DensityPair::bernoulli(0.2, 0.6).unwrap(),
        DensityPair::bernoulli(0.9, 0.01).unwrap(),
        DensityPair::exponential(1.0, 2.0).unwrap(),
        DensityPair::exponential(3.0, 0.5).unwrap(),
    ];
    let worst = pairs
        .iter()
        .map(|p| (p.kl() - p.kl_quadrature_oracle().unwrap()).abs())
        .fold(0.0, f64::max);
    v.check(worst <= 1e-6, format!("K-L closed form vs quadrature: worst error {worst:.2e}"));

    // data processing for quantizers, and nested refinement
    let mut violations = 0;
    let mut rng = trial_rng(505, 0);
    for _ in 0..500 {
        let pair = if rng.random_bool(0.5) {
            DensityPair::gaussian(0.0, rng.random_range(0.1..2.0), 1.0).unwrap()
        } else {
            DensityPair::exponential(1.0, rng.random_range(1.1..4.0)).unwrap()
        };
        let lo = if matches!(pair.family(), qcd::dist::Family::ExponentialRate { .. }) { 0.01 } else { -3.0 };
        let mut t: Vec<f64> = (0..rng.random_range(1..6)).map(|_| rng.random_range(lo..3.0)).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        let coarse = quantized_kl(&pair, &t).unwrap();
        let mut fine = t.clone();
        fine.push(rng.random_range(lo..3.0));
        fine.sort_by(f64::total_cmp);
        fine.dedup();
        let finer = quantized_kl(&pair, &fine).unwrap();
        if coarse > pair.kl() + 1e-12 || finer + 1e-12 < coarse {
            violations += 1;
        }
    }
    let designed = design_mlr_quantizer(&gauss(1.0), 8).unwrap();
    v.check(
        violations == 0 && designed.kl <= 0.5,
        format!("quantizer data processing and nested monotonicity: {violations} violations in 500 cases"),
    );

    // fusion ordering on shared seeds
    let config = |rule| SensorNetworkConfig {
        num_sensors: 3,
        per_sensor_model: gauss(0.75),
        quantizer_levels: Some(4),
        local_detector: LocalDetector::Cusum,
        local_thresholds: vec![2.0, 3.0, 4.0],
        fusion_rule: rule,
    };
    let law = ChangePointLaw::GeometricPrior { rho: 0.02 };
    let runs: Vec<_> = [FusionRule::Min, FusionRule::Max, FusionRule::All]
        .into_iter()
        .map(|r| simulate_fusion_outcomes(&config(r), &law, 5000, 1_000_000, 506).unwrap())
        .collect();
    let bad = (0..5000)
        .filter(|&i| runs[0][i].tau.value() > runs[1][i].tau.value().min(runs[2][i].tau.value()))
        .count();
    v.check(bad == 0, format!("fusion ordering tau_min <= min(tau_max, tau_all): {bad} violations in 5000 trials"));

    let secs = started.elapsed().as_secs_f64();
    v.check(secs < 60.0, format!("property suites ran in {secs:.1} s"));
    v
}

fn de_shiryaev_tradeoff() -> Verdict {
    let mut v = Verdict::new();
    let rho = 0.01;
    let alpha = 5e-3;
    let plan = TrialPlan::new(gauss(0.75), ChangePointLaw::GeometricPrior { rho }, DetectorSpec::Shiryaev { rho, threshold: 0.99 })
        .trials(100_000)
        .seed(61);

    let calibrated = |p: &TrialPlan| {
        let cal = calibrate_threshold(p, Constraint::Pfa(alpha)).unwrap();
        let s = simulate(&p.with_threshold(cal.threshold)).unwrap();
        (cal.threshold, s.add().unwrap(), s.pfa().unwrap(), s.ano().unwrap())
    };
    let (a_s, add_s, pfa_s, _) = calibrated(&plan);
    let fractional = plan.with_detector(DetectorSpec::FractionalShiryaev { rho, threshold: 0.99, period: 2 });
    let (_, add_f, pfa_f, ano_f) = calibrated(&fractional);
    let de = plan.with_detector(DetectorSpec::DeShiryaev { rho, threshold: a_s, skip_threshold: 0.0 });
    let (b, _) = tune_skip_threshold(&de, ano_f.value, 0.01).unwrap();
    let de = de.with_detector(DetectorSpec::DeShiryaev { rho, threshold: a_s, skip_threshold: b });
    let (_, add_d, pfa_d, ano_d) = calibrated(&de);

    let mean_change = 1.0 / rho;
    v.check(
        [pfa_s.value, pfa_f.value, pfa_d.value].iter().all(|p| (1e-3..=1e-2).contains(p)),
        format!("PFA Shiryaev {:.2e}, fractional {:.2e}, DE {:.2e} in [1e-3, 1e-2]", pfa_s.value, pfa_f.value, pfa_d.value),
    );
    v.check(
        (ano_d.value / (0.5 * mean_change) - 1.0).abs() <= 0.1 && (ano_d.value / ano_f.value - 1.0).abs() <= 0.05,
        format!("ANO DE {:.2} (B = {b:.4}), fractional {:.2}, half the mean time to change {:.1}", ano_d.value, ano_f.value, 0.5 * mean_change),
    );
    v.check(
        (add_d.value / add_s.value - 1.0).abs() <= 0.15,
        format!("ADD DE {:.2} vs Shiryaev {:.2} within 15%", add_d.value, add_s.value),
    );
    v.check(
        add_d.value + 3.0 * add_d.std_error.hypot(add_f.std_error) < add_f.value,
        format!("ADD DE {:.2} < fractional sampling {:.2}", add_d.value, add_f.value),
    );
    v
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 6] = [
        ("1 simulated Shiryaev PFA/ADD table", table2_simulated),
        ("2 second-order PFA/ADD predictions", table2_analysis),
        ("3 trade-off slopes", tradeoff_slopes),
        ("4 analytic threshold guarantees", threshold_guarantees),
        ("5 property suites", property_suites),
        ("6 data-efficient Shiryaev trade-off", de_shiryaev_tradeoff),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let verdict = f();
        println!(
            "criterion {name}: {} ({:.1} s)",
            if verdict.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        for line in &verdict.lines {
            println!("{line}");
        }
        if !verdict.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
