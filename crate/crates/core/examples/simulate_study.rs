//! A small correlated-normal study: plant mislabeled instances, filter, and
//! score the result over replications.
//!
//! Run with `--release`; pass a sample count to change `n` (default 50).

use labelcheck::{run_study, DistanceMetric, StudyConfig};

fn main() -> labelcheck::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    let cfg = StudyConfig {
        n,
        n1: 100,
        n2: 1000,
        rho1: 0.5,
        rho12: 0.2,
        rho2: 0.2,
        p: 0.2,
        runs: 20,
        alpha0: 0.05,
        seed: 7,
        metric: DistanceMetric::Correlation,
    };
    let report = run_study(&cfg)?;
    let m = &report.summary.metrics;
    let show = |s: &labelcheck::MetricSummary| format!("{:.4} ± {:.4}", s.mean.unwrap_or(f64::NAN), s.se.unwrap_or(0.0));
    println!("n = {n}, N1 = {}, p = {}, {} runs", cfg.n1, cfg.p, report.runs.len());
    println!("  FDR  {}", show(&m.fdr));
    println!("  FOR  {}", show(&m.for_rate));
    println!("  sens {}", show(&m.sensitivity));
    println!("  spec {}", show(&m.specificity));
    println!("  %Δ   {}", show(&m.pct_delta));
    for r in report.runs.iter().take(5) {
        println!("  run {}: tau = {:.3}, t* = {:.3}, removed {}", r.run, r.tau_hat, r.t_star_hat, r.counts.removed());
    }
    Ok(())
}
