//! Repeated aggregation shrinks the feature spread geometrically until
//! the arithmetic cannot resolve the decrement anymore; past that layer
//! every node carries the same vector and accuracy collapses to the
//! majority class. Wider floats push the collapse deeper.

use hsbm::aggregate::{collapse_layer, Precision};
use hsbm::model::{self, pattern_family_a, HsbmParams};

fn main() {
    let params = HsbmParams::synthetic(pattern_family_a(0.25, 5).unwrap());
    let graph = model::sample(&params, 0).expect("sample");
    let features = graph.features.as_ref().unwrap();

    println!("precision  collapse layer (spread stops shrinking)");
    for precision in [Precision::Single, Precision::Double, Precision::Extended] {
        let layer = collapse_layer(&graph, features, &graph.labels, precision, 120, 0.999);
        println!("{precision:<10?} {layer}");
    }
    println!("\nThe gap between tiers is the extra mantissa headroom.");
}
