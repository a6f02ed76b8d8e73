//! Window-limited GLR and Gaussian-mixture tests for a mean shift of unknown
//! size, driven one observation at a time.
//!
//! cargo run --release --example glr_mixture

use qcd::detectors::{default_window, GlrGaussianState, MixtureGaussianState};
use qcd::dist::{DensityPair, Regime};
use qcd::rng::trial_rng;

fn main() -> qcd::Result<()> {
    let window = default_window(1e-3, 0.125);
    println!("window = {window}");
    let change = 200;
    for (i, shift) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let model = DensityPair::gaussian(0.0, shift, 1.0)?;
        let mut rng = trial_rng(5, i as u64);
        let mut glr = GlrGaussianState::new(window, 4.0)?;
        let mut mix = MixtureGaussianState::new(window, 0.0, 1.0, 1000.0)?;
        let (mut t_glr, mut t_mix) = (None, None);
        for n in 1..=2000u64 {
            let regime = if n >= change { Regime::Post } else { Regime::Pre };
            let x = model.sample(regime, &mut rng);
            if t_glr.is_none() && glr.step(x)? {
                t_glr = Some(n);
            }
            if t_mix.is_none() && mix.step(x)? {
                t_mix = Some(n);
            }
            if t_glr.is_some() && t_mix.is_some() {
                break;
            }
        }
        println!("shift {shift}: GLR stops at {t_glr:?}, mixture at {t_mix:?} (change at {change})");
    }
    Ok(())
}
