//! Two-sensor CuSum network on N(0,1) -> N(1,1): quantizer design and the
//! Min, Max, All and Sum fusion rules.
//!
//! cargo run --release --example sensor_fusion

use qcd::decentralized::{design_mlr_quantizer, simulate_fusion, FusionRule, LocalDetector, SensorNetworkConfig};
use qcd::dist::{ChangePointLaw, DensityPair};

fn main() -> qcd::Result<()> {
    let model = DensityPair::gaussian(0.0, 1.0, 1.0)?;
    for levels in [2, 4, 8, 16] {
        let q = design_mlr_quantizer(&model, levels)?;
        println!("{levels:>2} levels: D = {:.4} of {:.4}", q.kl, q.raw_kl);
    }
    let b = 4.0;
    for rule in [FusionRule::Min, FusionRule::Max, FusionRule::All, FusionRule::Sum { threshold: 6.0 }] {
        let config = SensorNetworkConfig {
            num_sensors: 2,
            per_sensor_model: model,
            quantizer_levels: Some(4),
            local_detector: LocalDetector::Cusum,
            local_thresholds: vec![rule.local_threshold(b, 2)],
            fusion_rule: rule,
        };
        let far = simulate_fusion(&config, &ChangePointLaw::Never, 2000, 1)?;
        let delay = simulate_fusion(&config, &ChangePointLaw::Fixed { gamma: 1 }, 2000, 2)?;
        println!(
            "{:<4} FAR = {:.3e}  delay at gamma = 1: {:.2}",
            rule.name(),
            far.metrics[0].value,
            delay.metrics[0].value
        );
    }
    Ok(())
}
