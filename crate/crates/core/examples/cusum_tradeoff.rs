//! CuSum on N(0,1) -> N(0.75,1): CADD against |ln FAR| has slope 1/D.
//!
//! cargo run --release --example cusum_tradeoff [trials]

use qcd::detectors::DetectorSpec;
use qcd::dist::{ChangePointLaw, DensityPair};
use qcd::harness::{tradeoff_sweep, TrialPlan};

fn main() -> qcd::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let model = DensityPair::gaussian(0.0, 0.75, 1.0)?;
    let plan = TrialPlan::new(model, ChangePointLaw::Never, DetectorSpec::Cusum { threshold: 1.0 })
        .trials(trials)
        .seed(6);
    let curve = tradeoff_sweep(&plan, &[5.0, 6.5, 8.0, 9.5])?;
    println!("{:>6} {:>11} {:>9}", "b", "FAR", "CADD");
    for r in &curve.rows {
        println!("{:>6.2} {:>11.3e} {:>9.3}", r.threshold, r.constraint.value, r.delay.value);
    }
    println!("fitted slope {:.3}, 1/D = {:.3}", curve.slope, 1.0 / model.kl());
    Ok(())
}
