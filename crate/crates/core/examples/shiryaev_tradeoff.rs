//! Shiryaev on N(0,1) -> N(0.75,1), rho = 0.01: ADD against |ln PFA| has
//! slope 1/(D + |ln(1 - rho)|).
//!
//! cargo run --release --example shiryaev_tradeoff [trials]

use qcd::detectors::DetectorSpec;
use qcd::dist::{ChangePointLaw, DensityPair};
use qcd::harness::{tradeoff_sweep, TrialPlan};

fn main() -> qcd::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let rho = 0.01;
    let model = DensityPair::gaussian(0.0, 0.75, 1.0)?;
    let law = ChangePointLaw::GeometricPrior { rho };
    let spec = DetectorSpec::Shiryaev { rho, threshold: 0.9 };
    let plan = TrialPlan::new(model, law, spec.clone()).trials(trials).seed(4);
    let grid: Vec<f64> = [3.0, 4.0, 5.0, 6.0, 7.0].iter().map(|&b| spec.threshold_from_scale(b)).collect();
    let curve = tradeoff_sweep(&plan, &grid)?;
    println!("{:>9} {:>11} {:>9}", "A", "PFA", "ADD");
    for r in &curve.rows {
        println!("{:>9.6} {:>11.3e} {:>9.3}", r.threshold, r.constraint.value, r.delay.value);
    }
    println!(
        "fitted slope {:.3}, 1/(D + d) = {:.3}",
        curve.slope,
        1.0 / (model.kl() + law.tail_exponent())
    );
    Ok(())
}
