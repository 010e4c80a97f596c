//! Family-wise error with independently drawn distances: the mean FDR at
//! `p = 0` against the limit `1 − e^(−α₀)`.
//!
//! Run with `--release`.

use labelcheck::{run_independent_study, IndependentStudyConfig};

fn main() -> labelcheck::Result<()> {
    let limit = 1.0 - (-0.05f64).exp();
    println!("limit {limit:.5}");
    for n1 in [25, 100, 500] {
        let mut cfg = IndependentStudyConfig::new(n1);
        cfg.runs = 200;
        let r = run_independent_study(&cfg)?;
        let fdr = r.summary.metrics.fdr;
        println!(
            "N1 = {n1:>4}: FDR {:.4} ± {:.4}, mean tau {:.4}",
            fdr.mean.unwrap(),
            fdr.se.unwrap_or(0.0),
            r.summary.tau_hat.mean.unwrap()
        );
    }
    Ok(())
}
