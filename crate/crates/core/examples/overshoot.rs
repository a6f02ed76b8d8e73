//! Overshoot constants of the walk sum(Y_k + |ln(1 - rho)|) at several
//! boundaries, and the degenerate guard on an arithmetic walk.
//!
//! cargo run --release --example overshoot

use qcd::asymptotics::estimate_overshoot;
use qcd::dist::DensityPair;
use qcd::harness::ObservationModel;

fn main() -> qcd::Result<()> {
    let est = estimate_overshoot(DensityPair::gaussian(0.0, 1.0, 1.0)?, 0.01, 100_000, &[5.0, 15.0, 25.0], 1)?;
    for c in &est.per_threshold {
        println!(
            "b = {:>4}: kappa = {:.4} ± {:.4}, zeta = {:.4} ± {:.4}",
            c.threshold, c.kappa.value, c.kappa.std_error, c.zeta.value, c.zeta.std_error
        );
    }
    println!("E1[eta] = {:.4} ± {:.4}, flagged: {}", est.eta_mean.value, est.eta_mean.std_error, est.flagged);

    let d = -(-0.01f64).ln_1p();
    let lattice = ObservationModel::ConstantDrift { pre: 0.0, post: 0.5 - d };
    let est = estimate_overshoot(lattice, 0.01, 1000, &[5.0, 10.0], 1)?;
    println!("lattice walk: kappa = {:.4}, flag: {:?}", est.kappa.value, est.flag_reason);
    Ok(())
}
