//! Shiryaev on N(0,1) -> N(1,1) with rho = 0.01: simulated PFA/ADD next to
//! the second-order predictions built from simulated overshoot constants.
//!
//! cargo run --release --example table2 [trials]

use qcd::asymptotics::{estimate_overshoot, second_order_add, second_order_pfa};
use qcd::detectors::DetectorSpec;
use qcd::dist::{ChangePointLaw, DensityPair};
use qcd::harness::{estimate_add_pfa, TrialPlan};

fn main() -> qcd::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let rho = 0.01;
    let model = DensityPair::gaussian(0.0, 1.0, 1.0)?;
    let d = -(-rho as f64).ln_1p();
    let est = estimate_overshoot(model, rho, 200_000, &[5.0, 15.0, 25.0], 7)?;
    println!(
        "kappa = {:.4}, zeta = {:.4}, E1[eta] = {:.4}",
        est.kappa.value, est.zeta.value, est.eta_mean.value
    );
    println!("{:>7} {:>11} {:>11} {:>9} {:>9}", "b", "PFA sim", "PFA 2nd", "ADD sim", "ADD 2nd");

    let spec = DetectorSpec::Shiryaev { rho, threshold: 0.5 };
    let plan = TrialPlan::new(model, ChangePointLaw::GeometricPrior { rho }, spec.clone())
        .trials(trials)
        .seed(1);
    for b in [1.386, 2.197, 4.595, 6.906, 11.512] {
        let (add, pfa) = estimate_add_pfa(&plan.with_threshold(spec.threshold_from_scale(b)))?;
        println!(
            "{b:>7.3} {:>11.3e} {:>11.3e} {:>9.2} {:>9.2}",
            pfa.value,
            second_order_pfa(b, &est),
            add.value,
            second_order_add(b, &est, model.kl(), d)
        );
    }
    Ok(())
}
