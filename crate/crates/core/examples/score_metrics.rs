//! Score filtering verdicts against the truth and aggregate over runs.

use labelcheck::{aggregate, score_run};

fn main() -> labelcheck::Result<()> {
    // ten instances, the last two mislabeled; the filter removed 7, 8 and 9
    let truth = [false, false, false, false, false, false, false, false, true, true];
    let removed = [false, false, false, false, false, false, false, true, true, false];
    let (counts, m) = score_run(&truth, &removed, 0.2)?;
    println!("{counts:?}");
    println!(
        "sensitivity {:?}, specificity {:?}, FDR {:.3}, FOR {:.3}, %Δ {:?}",
        m.sensitivity, m.specificity, m.fdr, m.for_rate, m.pct_delta
    );

    // a clean run: nothing planted, nothing removed
    let (_, clean) = score_run(&[false; 10], &[false; 10], 0.0)?;
    let summary = aggregate(&[m, clean])?;
    println!("mean FDR {:?} over {} runs; sensitivity defined in {} run(s)", summary.fdr.mean, summary.runs, summary.sensitivity.defined);
    Ok(())
}
