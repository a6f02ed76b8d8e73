//! Analytic thresholds (A = 1 - alpha, B = 1/alpha, b = |ln alpha|) against
//! simulation-calibrated ones for the same false-alarm constraint.
//!
//! cargo run --release --example threshold_calibration

use qcd::detectors::DetectorSpec;
use qcd::dist::{ChangePointLaw, DensityPair};
use qcd::harness::{calibrate_threshold, Constraint, TrialPlan};

fn main() -> qcd::Result<()> {
    let model = DensityPair::gaussian(0.0, 1.0, 1.0)?;
    let alpha = 1e-2;
    let cases = [
        (
            DetectorSpec::Shiryaev { rho: 0.01, threshold: 0.5 },
            ChangePointLaw::GeometricPrior { rho: 0.01 },
            Constraint::Pfa(alpha),
            100_000,
        ),
        (DetectorSpec::ShiryaevRoberts { threshold: 10.0, head_start: 0.0 }, ChangePointLaw::Never, Constraint::Far(alpha), 5_000),
        (DetectorSpec::Cusum { threshold: 1.0 }, ChangePointLaw::Never, Constraint::Far(alpha), 5_000),
    ];
    for (spec, law, constraint, trials) in cases {
        let plan = TrialPlan::new(model, law, spec.clone()).trials(trials).seed(3);
        let cal = calibrate_threshold(&plan, constraint)?;
        println!(
            "{:<8} analytic {:>9.4} calibrated {:>9.4} achieved {} = {:.3e} (se {:.1e}) after {} runs",
            spec.name(),
            cal.analytic.unwrap_or(f64::NAN),
            cal.threshold,
            cal.achieved.metric.label(),
            cal.achieved.value,
            cal.achieved.std_error,
            cal.evaluations
        );
    }
    Ok(())
}
