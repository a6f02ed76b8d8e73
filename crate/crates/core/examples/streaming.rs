//! Online use of the detector state machines, and the generalized CuSum on
//! a dependent (AR(1)) stream.
//!
//! cargo run --release --example streaming

use qcd::detectors::{run_generalized_cusum, CusumState, GaussianAr1Llr, ShiryaevState, SrState};
use qcd::dist::{DensityPair, Regime};
use qcd::rng::trial_rng;

fn main() -> qcd::Result<()> {
    let model = DensityPair::gaussian(0.0, 1.0, 1.0)?;
    let mut rng = trial_rng(9, 0);
    let mut shiryaev = ShiryaevState::new(0.01, 0.99)?;
    let mut cusum = CusumState::new(4.6)?;
    let mut sr = SrState::new(100.0)?;
    let change = 60;
    let mut stops = [None; 3];
    for n in 1..=1000u64 {
        let regime = if n >= change { Regime::Post } else { Regime::Pre };
        let llr = model.log_likelihood_ratio(model.sample(regime, &mut rng))?;
        if stops[0].is_none() && shiryaev.step(llr)? {
            stops[0] = Some(n);
        }
        if stops[1].is_none() && cusum.step(llr)? {
            stops[1] = Some(n);
        }
        if stops[2].is_none() && sr.step(llr)? {
            stops[2] = Some(n);
        }
        if stops.iter().all(Option::is_some) {
            break;
        }
    }
    println!("change at {change}: shiryaev {:?}, cusum {:?}, sr {:?}", stops[0], stops[1], stops[2]);

    let stream = GaussianAr1Llr::new(0.5, 1.0, Some(change), trial_rng(9, 1));
    let tau = run_generalized_cusum(stream, 4.6, 10_000)?;
    println!("AR(1) generalized CuSum stops at {tau:?}");
    Ok(())
}
