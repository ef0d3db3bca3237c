//! Gain reports at several aggregation depths, printed as JSON. The
//! closed-form deep-aggregation value needs a dense pattern power, and
//! reports round-trip through serde without losing a bit.

use hsbm::model::{pattern_family_group, HsbmParams};
use hsbm::theory::{
    gain_multi_gc_approx, gain_single_gc, GainReport, SeparabilityInputs, VARSIGMA_SYNTHETIC,
};

fn main() {
    let params = HsbmParams::synthetic(pattern_family_group(0.1).unwrap());
    let inputs = SeparabilityInputs::from_params(&params);

    let one = gain_single_gc(&inputs, VARSIGMA_SYNTHETIC).expect("gains");
    println!("depth 1: verdict {}  min {:.4}  max {:.4}", one.verdict, one.min_gain, one.max_gain);

    for depth in [2, 4, 8] {
        let report = gain_multi_gc_approx(&inputs, depth, VARSIGMA_SYNTHETIC).expect("gains");
        println!(
            "depth {depth}: verdict {}  min {:.4}  max {:.4}",
            report.verdict, report.min_gain, report.max_gain
        );
    }

    let json = serde_json::to_string_pretty(&one).expect("serialize");
    let back: GainReport = serde_json::from_str(&json).expect("parse");
    assert_eq!(back.min_gain.to_bits(), one.min_gain.to_bits());
    println!("\ndepth-1 report as JSON:\n{json}");
}
