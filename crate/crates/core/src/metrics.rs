//! Confusion counts and the per-run evaluation statistics of a filtering run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Keep/remove outcomes against the truth, for the members of one class.
///
/// Removing a mislabeled instance is a true positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `m`, the number of mislabeled instances.
    pub fn mislabeled(&self) -> usize {
        self.tp + self.fn_
    }

    /// `R`, the number of removed instances.
    pub fn removed(&self) -> usize {
        self.tp + self.fp
    }

    pub fn retained(&self) -> usize {
        self.tn + self.fn_
    }
}

/// Statistics of one run. `None` marks a statistic that is undefined for
/// the run (sensitivity without mislabeled instances, specificity without
/// correct ones, `%Δ` at `p = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub fdr: f64,
    #[serde(rename = "for")]
    pub for_rate: f64,
    pub pct_delta: Option<f64>,
}

impl RunMetrics {
    pub fn from_counts(c: &ConfusionCounts, planted_rate: f64) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let for_rate = c.fn_ as f64 / c.retained().max(1) as f64;
        Self {
            sensitivity: ratio(c.tp, c.tp + c.fn_),
            specificity: ratio(c.tn, c.tn + c.fp),
            fdr: c.fp as f64 / c.removed().max(1) as f64,
            for_rate,
            pct_delta: (planted_rate > 0.0).then(|| (1.0 - for_rate / planted_rate) * 100.0),
        }
    }
}

/// Tallies verdicts against the truth and derives the run statistics.
pub fn score_run(
    truth: &[bool],
    rejected: &[bool],
    planted_rate: f64,
) -> Result<(ConfusionCounts, RunMetrics)> {
    if truth.len() != rejected.len() {
        return Err(Error::InvalidInput(format!(
            "{} truth flags for {} verdicts",
            truth.len(),
            rejected.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&mislabeled, &removed) in truth.iter().zip(rejected) {
        match (mislabeled, removed) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok((c, RunMetrics::from_counts(&c, planted_rate)))
}

/// Mean and Monte-Carlo standard error over the runs where a value is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub defined: usize,
}

impl MetricSummary {
    pub fn from_values(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let xs: Vec<f64> = values.into_iter().flatten().collect();
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: None,
                se: None,
                defined: 0,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = (n > 1).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Self {
            mean: Some(mean),
            se,
            defined: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub runs: usize,
    pub sensitivity: MetricSummary,
    pub specificity: MetricSummary,
    pub fdr: MetricSummary,
    #[serde(rename = "for")]
    pub for_rate: MetricSummary,
    pub pct_delta: MetricSummary,
}

/// Averages run statistics, skipping undefined entries per statistic.
pub fn aggregate(runs: &[RunMetrics]) -> Result<AggregateMetrics> {
    if runs.is_empty() {
        return Err(Error::InvalidInput("no runs to aggregate".into()));
    }
    let s = |f: fn(&RunMetrics) -> Option<f64>| MetricSummary::from_values(runs.iter().map(f));
    Ok(AggregateMetrics {
        runs: runs.len(),
        sensitivity: s(|r| r.sensitivity),
        specificity: s(|r| r.specificity),
        fdr: s(|r| Some(r.fdr)),
        for_rate: s(|r| Some(r.for_rate)),
        pct_delta: s(|r| r.pct_delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flags(tp: usize, tn: usize, fp: usize, fn_: usize) -> (Vec<bool>, Vec<bool>) {
        let mut truth = Vec::new();
        let mut rej = Vec::new();
        for (t, r, n) in [(true, true, tp), (false, false, tn), (false, true, fp), (true, false, fn_)] {
            truth.extend(std::iter::repeat_n(t, n));
            rej.extend(std::iter::repeat_n(r, n));
        }
        (truth, rej)
    }

    #[test]
    fn arithmetic_from_definitions() {
        let (truth, rej) = flags(8, 85, 5, 2);
        let (c, m) = score_run(&truth, &rej, 0.1).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 8, tn: 85, fp: 5, fn_: 2 });
        assert_eq!(m.sensitivity, Some(0.8));
        assert_eq!(m.specificity, Some(85.0 / 90.0));
        assert_eq!(m.fdr, 5.0 / 13.0);
        assert_eq!(m.for_rate, 2.0 / 87.0);
        assert_eq!(m.pct_delta, Some((1.0 - (2.0 / 87.0) / 0.1) * 100.0));
    }

    #[test]
    fn nothing_removed_nothing_planted() {
        let (truth, rej) = flags(0, 25, 0, 0);
        let (_, m) = score_run(&truth, &rej, 0.0).unwrap();
        assert_eq!(m.fdr, 0.0);
        assert_eq!(m.specificity, Some(1.0));
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.pct_delta, None);
        assert_eq!(m.for_rate, 0.0);
    }

    #[test]
    fn any_rejection_without_planting_is_a_full_false_discovery() {
        let (truth, rej) = flags(0, 22, 3, 0);
        let (_, m) = score_run(&truth, &rej, 0.0).unwrap();
        assert_eq!(m.fdr, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(score_run(&[true], &[true, false], 0.1).is_err());
    }

    #[test]
    fn aggregate_means() {
        let (t, r) = flags(1, 3, 0, 1);
        let (_, one) = score_run(&t, &r, 0.2).unwrap();
        let a = aggregate(&[one]).unwrap();
        assert_eq!(a.fdr.mean, Some(one.fdr));
        assert_eq!(a.sensitivity.mean, one.sensitivity);
        assert_eq!(a.fdr.se, None);

        let (t0, r0) = flags(0, 10, 0, 0);
        let (t1, r1) = flags(0, 9, 1, 0);
        let runs = [score_run(&t0, &r0, 0.0).unwrap().1, score_run(&t1, &r1, 0.0).unwrap().1];
        let a = aggregate(&runs).unwrap();
        // at p = 0 the mean FDR is the share of runs with any rejection
        assert_eq!(a.fdr.mean, Some(0.5));
        assert_eq!(a.fdr.se, Some(0.5));
        assert_eq!(a.sensitivity.defined, 0);
        assert_eq!(a.pct_delta.mean, None);
        assert!(aggregate(&[]).is_err());
    }

    proptest! {
        #[test]
        fn counts_tile_and_metrics_bounded(
            pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..200),
            p in 0.0f64..1.0,
        ) {
            let (truth, rej): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
            let (c, m) = score_run(&truth, &rej, p).unwrap();
            let n1 = truth.len();
            let mislabeled = truth.iter().filter(|&&t| t).count();
            let removed = rej.iter().filter(|&&r| r).count();
            prop_assert_eq!(c.total(), n1);
            prop_assert_eq!(c.tp + c.fn_, mislabeled);
            prop_assert_eq!(c.tn + c.fp, n1 - mislabeled);
            prop_assert_eq!(c.removed(), removed);
            prop_assert_eq!(c.retained(), n1 - removed);
            for v in [m.sensitivity, m.specificity, Some(m.fdr), Some(m.for_rate)].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if let Some(d) = m.pct_delta {
                prop_assert!(d <= 100.0);
                prop_assert_eq!(d == 100.0, m.for_rate == 0.0);
            }
        }
    }
}
