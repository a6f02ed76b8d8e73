//! DE-Shiryaev skips observations while the posterior is below B. At about
//! half the observations of Shiryaev it keeps most of its delay, unlike
//! sampling every other step.
//!
//! cargo run --release --example data_efficient [trials]

use qcd::detectors::DetectorSpec;
use qcd::dist::{ChangePointLaw, DensityPair};
use qcd::harness::{calibrate_threshold, simulate, tune_skip_threshold, Constraint, TrialPlan};

fn main() -> qcd::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let rho = 0.01;
    let alpha = 5e-3;
    let model = DensityPair::gaussian(0.0, 0.75, 1.0)?;
    let plan = TrialPlan::new(
        model,
        ChangePointLaw::GeometricPrior { rho },
        DetectorSpec::Shiryaev { rho, threshold: 0.99 },
    )
    .trials(trials)
    .seed(4);

    let report = |plan: &TrialPlan| -> qcd::Result<()> {
        let cal = calibrate_threshold(plan, Constraint::Pfa(alpha))?;
        let s = simulate(&plan.with_threshold(cal.threshold))?;
        println!(
            "{:<20} A = {:.5}  PFA = {:.2e}  ADD = {:6.2}  ANO = {:6.2}",
            plan.detector.name(),
            cal.threshold,
            s.pfa()?.value,
            s.add()?.value,
            s.ano()?.value
        );
        Ok(())
    };
    report(&plan)?;
    let fractional = plan.with_detector(DetectorSpec::FractionalShiryaev { rho, threshold: 0.99, period: 2 });
    report(&fractional)?;
    let de = plan.with_detector(DetectorSpec::DeShiryaev { rho, threshold: 0.99, skip_threshold: 0.0 });
    let (b, ano) = tune_skip_threshold(&de, 50.0, 0.02)?;
    println!("skip threshold B = {b:.4} gives ANO {:.2}", ano.value);
    report(&de.with_detector(DetectorSpec::DeShiryaev { rho, threshold: 0.99, skip_threshold: b }))?;
    Ok(())
}
