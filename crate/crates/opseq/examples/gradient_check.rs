//! Finite-difference verification of every layer's analytic gradients and
//! of the composed CNN-LSTM, at f64.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use opseq::nn::gradcheck::{run_all, REL_TOLERANCE};

fn main() {
    let seed = 1234;
    println!("central differences (h = 1e-5) vs analytic gradients, seed {seed}\n");
    let mut all_ok = true;
    for report in run_all(seed) {
        let verdict = if report.pass() { "PASS" } else { "FAIL" };
        all_ok &= report.pass();
        println!(
            "{:<22} worst relative error {:>12.3e}   [{verdict}]",
            report.layer, report.max_rel_err
        );
    }
    println!("\ntolerance {REL_TOLERANCE:e}: {}", if all_ok { "all layers pass" } else { "FAILURES" });
    std::process::exit(i32::from(!all_ok));
}
