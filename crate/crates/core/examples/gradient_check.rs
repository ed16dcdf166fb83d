//! Finite-difference verification of every differentiable operation at both
//! precisions, followed by a sampled check of a whole network.

use kneeoa::gradsuite::{check_network_sample, check_spec, run_suite, summarize, Precision, NETWORK_TOLERANCE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for p in [Precision::F64, Precision::F32] {
        let results = run_suite(p, 0..5)?;
        for (op, p, worst, ok) in summarize(&results) {
            println!("{op:<22} {p}  {worst:.2e}  {}", if ok { "ok" } else { "FAIL" });
        }
    }

    let spec = check_spec("desk-cnn")?;
    let r = check_network_sample(&spec, 0, 64, 2)?;
    println!(
        "desk-cnn, 64 sampled weights: max relative error {:.2e} (tolerance {NETWORK_TOLERANCE:.0e})",
        r.max_rel_error
    );
    Ok(())
}
