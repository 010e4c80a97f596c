//! Per-instance binomial tests of class membership.
//!
//! For a class of size `N₁` with cut-off `t̂*`, the statistic `Z_i` counts the
//! within-class distances of instance `i` that are `≤ t̂*`. Under a correct
//! label `Z_i ~ Bin(N₁ − 1, τ)`, under a wrong one `Z_i ~ Bin(N₁ − 1, 1 − τ)`.
//! The label is rejected when `Z_i ≤ a_α`, the largest count whose null CDF
//! stays within `α = α₀ / N₁`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_partitioned_view, ClassBlocks, ClassId, ClassLabeling, DistanceMatrix, TestConfig};
use crate::error::{Error, Result};
use crate::estimation::{estimate_class, ClassEstimates};

/// Default bisection tolerance for [`tau_star_bound`].
pub const TAU_STAR_TOL: f64 = 1e-6;

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// `Σ_{j ≤ k} C(n, j) p^j q^(n−j)` with `q = 1 − p` passed explicitly, so
/// that reflected evaluations use bit-identical arguments.
///
/// Terms come from the log-space recurrence
/// `ln P(j+1) = ln P(j) + ln((n−j)/(j+1)) + ln(p/q)`, which never overflows;
/// terms that underflow are negligible next to any probability of interest.
fn lower_sum(k: u64, n: u64, p: f64, q: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p == 0.0 {
        return 1.0;
    }
    if q == 0.0 {
        return 0.0;
    }
    let (ln_p, ln_q) = (p.ln(), q.ln());
    let mut ln_term = n as f64 * ln_q;
    let mut sum = ln_term.exp();
    for j in 0..k {
        ln_term += ((n - j) as f64).ln() - ((j + 1) as f64).ln() + ln_p - ln_q;
        sum += ln_term.exp();
    }
    sum.min(1.0)
}

/// Binomial CDF `b(k, n, p) = P(Bin(n, p) ≤ k)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> Result<f64> {
    check_probability(p)?;
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    Ok(lower_sum(k, n, p, 1.0 - p))
}

/// Upper tail `P(Bin(n, p) ≥ k)`, summed directly rather than as `1 − b`.
pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> Result<f64> {
    check_probability(p)?;
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    Ok(lower_sum(n - k, n, 1.0 - p, p))
}

/// `a_α = max{k ∈ 0..n : b(k, n, τ) ≤ α}`, or `None` when even `k = 0`
/// exceeds `α` and the test can never reject.
pub fn critical_value(n_trials: u64, tau: f64, alpha: f64) -> Result<Option<u64>> {
    if n_trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    check_probability(tau)?;
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 0.5)")));
    }
    if tau <= 0.5 {
        log::warn!("tau = {tau} <= 0.5: stochastic ordering of distances is violated");
    }
    if tau == 1.0 {
        return Ok(Some(n_trials - 1));
    }
    if tau == 0.0 {
        return Ok(None);
    }
    let (ln_p, ln_q) = (tau.ln(), (1.0 - tau).ln());
    let n = n_trials;
    let mut ln_term = n as f64 * ln_q;
    let mut cum = ln_term.exp();
    if cum > alpha {
        return Ok(None);
    }
    let mut a = 0;
    // k = n always has b = 1 > alpha
    for j in 0..n - 1 {
        ln_term += ((n - j) as f64).ln() - ((j + 1) as f64).ln() + ln_p - ln_q;
        cum += ln_term.exp();
        if cum > alpha {
            break;
        }
        a = j + 1;
    }
    Ok(Some(a))
}

/// Whether the critical value reaches `n_trials / 2`, the regime where the
/// type-II error is bounded by `α`.
pub fn lemma2_holds(n_trials: u64, a_alpha: Option<u64>) -> bool {
    a_alpha.is_some_and(|a| 2 * a >= n_trials)
}

/// Smallest `τ` with `a_α ≥ n_trials / 2`, by bisection on the exact CDF.
pub fn tau_star_bound(n_trials: u64, alpha: f64) -> Result<f64> {
    tau_star_bound_with_tol(n_trials, alpha, TAU_STAR_TOL)
}

/// [`tau_star_bound`] with an explicit tolerance. The returned `τ*` satisfies
/// the bound while `τ* − tol` does not.
pub fn tau_star_bound_with_tol(n_trials: u64, alpha: f64, tol: f64) -> Result<f64> {
    if n_trials < 2 {
        // a_α ≤ n − 1 = 0 < 1/2 for every τ
        return Err(Error::Domain("no tau* exists for a single trial".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let ok = |tau: f64| -> Result<bool> { Ok(lemma2_holds(n_trials, critical_value(n_trials, tau, alpha)?)) };
    let (mut lo, mut hi) = (0.5, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `β = P(Z ≥ a_α | Bin(n, 1 − τ))`; `1` when there is no rejection region.
///
/// Computed as the reflected lower sum `b(n − a_α, n, τ)`.
pub fn type2_error(n_trials: u64, tau: f64, a_alpha: Option<u64>) -> Result<f64> {
    check_probability(tau)?;
    match a_alpha {
        None => Ok(1.0),
        Some(a) if a > n_trials => Err(Error::Domain(format!("a = {a} exceeds n = {n_trials}"))),
        Some(0) => Ok(1.0),
        Some(a) => Ok(lower_sum(n_trials - a, n_trials, tau, 1.0 - tau)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFlag {
    /// `τ̂ ≤ 0.5`: within-class distances are not stochastically smaller.
    AssumptionViolated,
    /// `b(0, N₁ − 1, τ̂) > α`: no count can be rejected.
    InsufficientPower,
    /// No support point satisfied `ψ̂(t) ≤ t`.
    NoFixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceVerdict {
    pub id: String,
    pub z: u64,
    pub rejected: bool,
}

/// Outcome of testing every member of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTestResult {
    pub class_id: String,
    pub class_size: usize,
    pub t_star_hat: f64,
    pub tau_hat: f64,
    pub alpha: f64,
    pub a_alpha: Option<u64>,
    pub lemma2_satisfied: bool,
    pub r_count: usize,
    pub flags: Vec<TestFlag>,
    pub instances: Vec<InstanceVerdict>,
}

impl ClassTestResult {
    pub fn rejected(&self) -> impl Iterator<Item = &InstanceVerdict> {
        self.instances.iter().filter(|v| v.rejected)
    }

    pub fn has_flag(&self, flag: TestFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// `Z_i = #{j ≠ i in the class : d_ij ≤ t}` for every member.
pub fn z_statistics(blocks: &ClassBlocks, t: f64) -> Vec<u64> {
    (0..blocks.class_size())
        .map(|i| {
            blocks
                .within
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &d)| j != i && d <= t)
                .count() as u64
        })
        .collect()
}

/// Tests a class given its blocks; also returns the estimates behind the verdicts.
pub fn analyze_blocks(blocks: &ClassBlocks, cfg: &TestConfig) -> Result<(ClassTestResult, ClassEstimates)> {
    cfg.validate()?;
    let n1 = blocks.class_size();
    let est = estimate_class(blocks)?;
    let z = z_statistics(blocks, est.t_star_hat);
    let alpha = cfg.alpha_rule.per_test(cfg.alpha0, n1);
    let n_trials = (n1 - 1) as u64;

    let mut flags = Vec::new();
    if !est.converged {
        flags.push(TestFlag::NoFixedPoint);
    }
    let a_alpha = if est.tau_hat <= 0.5 {
        log::warn!(
            "class `{}`: tau_hat = {} <= 0.5, no instance is tested",
            blocks.class,
            est.tau_hat
        );
        flags.push(TestFlag::AssumptionViolated);
        None
    } else {
        let a = critical_value(n_trials, est.tau_hat, alpha)?;
        if a.is_none() {
            flags.push(TestFlag::InsufficientPower);
        }
        a
    };

    let instances: Vec<InstanceVerdict> = blocks
        .ids
        .iter()
        .zip(&z)
        .map(|(id, &z)| InstanceVerdict {
            id: id.clone(),
            z,
            rejected: a_alpha.is_some_and(|a| z <= a),
        })
        .collect();
    let r_count = instances.iter().filter(|v| v.rejected).count();
    let result = ClassTestResult {
        class_id: blocks.class.clone(),
        class_size: n1,
        t_star_hat: est.t_star_hat,
        tau_hat: est.tau_hat,
        alpha,
        a_alpha,
        lemma2_satisfied: lemma2_holds(n_trials, a_alpha),
        r_count,
        flags,
        instances,
    };
    Ok((result, est))
}

pub fn test_blocks(blocks: &ClassBlocks, cfg: &TestConfig) -> Result<ClassTestResult> {
    analyze_blocks(blocks, cfg).map(|(r, _)| r)
}

/// Tests every member of class `k` against the rest of the data.
pub fn test_class(
    d: &DistanceMatrix,
    labeling: &ClassLabeling,
    k: ClassId,
    cfg: &TestConfig,
) -> Result<ClassTestResult> {
    test_blocks(&build_partitioned_view(d, labeling, k)?, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFailure {
    pub class_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub results: Vec<ClassTestResult>,
    pub failures: Vec<ClassFailure>,
}

/// One-vs-all testing of every non-mega class. Classes are independent;
/// a failing class is recorded and the rest still run.
pub fn validate_all(d: &DistanceMatrix, labeling: &ClassLabeling, cfg: &TestConfig) -> Validation {
    let outcomes: Vec<_> = labeling
        .class_ids()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| (k, test_class(d, labeling, k, cfg)))
        .collect();
    let mut out = Validation::default();
    for (k, outcome) in outcomes {
        match outcome {
            Ok(r) => out.results.push(r),
            Err(e) => out.failures.push(ClassFailure {
                class_id: labeling.classes()[k.0].name.clone(),
                message: e.to_string(),
            }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Block, Segment};
    use crate::distance::DistanceMetric;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Term-by-term sum with binomial coefficients built multiplicatively.
    fn cdf_oracle(k: u64, n: u64, p: f64) -> f64 {
        let mut total = 0.0;
        for j in 0..=k {
            let mut c = 1.0f64;
            for i in 0..j {
                c = c * (n - i) as f64 / (i + 1) as f64;
            }
            total += c * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
        }
        total
    }

    #[test]
    fn binomial_cdf_values() {
        assert_eq!(binomial_cdf(5, 5, 0.3).unwrap(), 1.0);
        assert_relative_eq!(binomial_cdf(2, 5, 0.5).unwrap(), 0.5, max_relative = 1e-14);
        // 0.9^10 + 10 * 0.1 * 0.9^9, exact decimal
        assert_relative_eq!(binomial_cdf(1, 10, 0.1).unwrap(), 0.736_098_929_1, max_relative = 1e-13);
        assert!(binomial_cdf(6, 5, 0.3).is_err());
        assert!(binomial_cdf(1, 5, 1.2).is_err());
        assert!(binomial_cdf(1, 5, f64::NAN).is_err());
        assert_eq!(binomial_cdf(0, 5, 0.0).unwrap(), 1.0);
        assert_eq!(binomial_cdf(4, 5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn binomial_far_tail_matches_extended_precision() {
        // P(X <= 1404), X ~ Bin(1999, 0.94), summed at 60 significant digits
        let exact = 1.645_517_890_647_577_8e-238;
        let ours = binomial_cdf(1404, 1999, 0.94).unwrap();
        assert!((ours - exact).abs() <= 1e-11 * exact, "{ours}");
    }

    #[test]
    fn binomial_cdf_matches_statrs() {
        use statrs::distribution::{Binomial, DiscreteCDF};
        for &(n, p) in &[(24u64, 0.9), (499, 0.62), (1999, 0.94), (10, 0.5), (150, 0.03)] {
            let dist = Binomial::new(p, n).unwrap();
            for k in (0..=n).step_by((n as usize / 17).max(1)) {
                let ours = binomial_cdf(k, n, p).unwrap();
                let theirs = dist.cdf(k);
                // statrs itself is ~1e-12 off in the far tail (e.g. near 1e-238)
                assert!(
                    (ours - theirs).abs() <= 1e-10 * theirs.max(1e-300) + 1e-300,
                    "n={n} p={p} k={k}: {ours} vs {theirs}"
                );
            }
        }
    }

    #[test]
    fn critical_value_examples() {
        // exhaustive scan with the term-by-term oracle
        let scan = (0..=24).filter(|&k| cdf_oracle(k, 24, 0.9) <= 0.002).max();
        assert_eq!(scan, Some(16));
        assert_eq!(critical_value(24, 0.9, 0.002).unwrap(), Some(16));
        assert_eq!(critical_value(24, 1.0, 0.002).unwrap(), Some(23));
        assert_eq!(critical_value(1, 0.6, 0.05).unwrap(), None);
        assert!(critical_value(0, 0.6, 0.05).is_err());
        assert!(critical_value(5, 0.6, 0.5).is_err());
    }

    #[test]
    fn tau_star_defining_property() {
        for &(n, alpha) in &[(24u64, 0.002), (4, 0.01), (99, 0.0005), (2, 0.2)] {
            let tau = tau_star_bound(n, alpha).unwrap();
            assert!(tau > 0.5 && tau <= 1.0);
            assert!(lemma2_holds(n, critical_value(n, (tau + TAU_STAR_TOL).min(1.0), alpha).unwrap()));
            assert!(!lemma2_holds(n, critical_value(n, tau - TAU_STAR_TOL, alpha).unwrap()));
        }
        assert!(tau_star_bound(1, 0.05).is_err());
    }

    #[test]
    fn tau_star_matches_grid_scan() {
        let grid = (500..1000)
            .map(|i| i as f64 / 1000.0)
            .find(|&t| {
                let a = (0..=24).filter(|&k| cdf_oracle(k, 24, t) <= 0.002).max();
                a.is_some_and(|a| 2 * a >= 24)
            })
            .unwrap();
        assert_eq!(grid, 0.784);
        let tau = tau_star_bound(24, 0.002).unwrap();
        assert!(tau > 0.783 && tau <= 0.784, "{tau}");
    }

    #[test]
    fn tau_star_non_increasing_in_alpha() {
        for n in [5u64, 24, 60] {
            let alphas = [0.0001, 0.0005, 0.002, 0.01, 0.05, 0.2];
            let taus: Vec<f64> = alphas.iter().map(|&a| tau_star_bound(n, a).unwrap()).collect();
            for w in taus.windows(2) {
                assert!(w[1] <= w[0] + TAU_STAR_TOL, "{n}: {taus:?}");
            }
        }
    }

    #[test]
    fn type2_error_examples() {
        assert_eq!(type2_error(24, 1.0, Some(23)).unwrap(), 0.0);
        let beta = type2_error(24, 0.9, Some(16)).unwrap();
        // direct summation of P(Z >= 16 | Bin(24, 0.1))
        let direct = 1.0 - cdf_oracle(15, 24, 0.1);
        assert_relative_eq!(beta, 3.338_913_051_015_4e-11, max_relative = 1e-9);
        assert!((beta - direct).abs() < 1e-14);
        assert_eq!(type2_error(24, 0.9, None).unwrap(), 1.0);
        assert!(beta <= 0.002);
    }

    proptest! {
        #[test]
        fn reflection_identity(n in 1u64..300, a_frac in 0.0f64..1.0, tau in 0.0f64..1.0) {
            let a = (a_frac * n as f64) as u64;
            let beta = type2_error(n, tau, Some(a)).unwrap();
            if a > 0 {
                prop_assert_eq!(beta, binomial_cdf(n - a, n, tau).unwrap());
                let tail = binomial_upper_tail(a, n, 1.0 - tau).unwrap();
                prop_assert!((tail - beta).abs() <= 1e-12 * beta.max(1e-300) + 1e-15);
            }
        }

        #[test]
        fn cdf_monotone_in_k(n in 1u64..400, p in 0.0f64..1.0) {
            let mut prev = 0.0;
            for k in 0..=n {
                let b = binomial_cdf(k, n, p).unwrap();
                prop_assert!(b >= prev - 1e-15);
                prev = b;
            }
            prop_assert_eq!(prev, 1.0);
        }

        #[test]
        fn critical_value_is_exact_argmax(n in 1u64..300, tau in 0.5f64..1.0, alpha in 1e-5f64..0.49) {
            match critical_value(n, tau, alpha).unwrap() {
                Some(a) => {
                    prop_assert!(binomial_cdf(a, n, tau).unwrap() <= alpha);
                    prop_assert!(binomial_cdf(a + 1, n, tau).unwrap() > alpha);
                }
                None => prop_assert!(binomial_cdf(0, n, tau).unwrap() > alpha),
            }
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    /// `n1` class members at mutual distance ~U(0, 0.4), `n2` outsiders at
    /// ~U(0.6, 1.0) from everyone; `planted` class members instead sit at
    /// outsider distances from the rest of the class.
    fn separated(rng: &mut impl Rng, n1: usize, n2: usize, planted: &[usize]) -> (DistanceMatrix, ClassLabeling) {
        let n = n1 + n2;
        let labels: Vec<Option<&str>> = (0..n).map(|i| Some(if i < n1 { "A" } else { "B" })).collect();
        let near = |rng: &mut dyn rand::RngCore| 0.4 * rng.gen::<f64>();
        let far = |rng: &mut dyn rand::RngCore| 0.6 + 0.4 * rng.gen::<f64>();
        let mut upper = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let both_in = i < n1 && j < n1;
                let odd = planted.contains(&i) || planted.contains(&j);
                let both_out = i >= n1 && j >= n1;
                upper[i][j] = if (both_in && !odd) || both_out { near(rng) } else { far(rng) };
            }
        }
        let d = DistanceMatrix::from_upper(ids(n), |i, j| upper[i][j]).unwrap();
        (d, ClassLabeling::from_labels(&labels))
    }

    #[test]
    fn z_counts_with_closed_comparison() {
        let blocks = ClassBlocks::new(
            "c",
            ids(5),
            Block::new(
                5,
                5,
                vec![
                    0.0, 0.1, 0.3, 0.6, 0.9, //
                    0.1, 0.0, 0.5, 0.5, 0.5, //
                    0.3, 0.5, 0.0, 0.5, 0.5, //
                    0.6, 0.5, 0.5, 0.0, 0.5, //
                    0.9, 0.5, 0.5, 0.5, 0.0,
                ],
            )
            .unwrap(),
            Block::new(5, 1, vec![1.0; 5]).unwrap(),
            vec![Segment { label: "o".into(), len: 1 }],
        )
        .unwrap();
        let z = z_statistics(&blocks, 0.5);
        assert_eq!(z[0], 2);
        // distances equal to the cut-off count
        assert_eq!(z[1], 4);
    }

    #[test]
    fn fully_separated_class_keeps_everyone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (d, l) = separated(&mut rng, 25, 30, &[]);
        let cfg = TestConfig::new(0.05, DistanceMetric::Correlation).unwrap();
        let r = test_class(&d, &l, l.class_id("A").unwrap(), &cfg).unwrap();
        assert_eq!(r.tau_hat, 1.0);
        assert!(r.instances.iter().all(|v| v.z == 24));
        assert_eq!(r.a_alpha, Some(23));
        assert_eq!(r.r_count, 0);
        assert!(r.lemma2_satisfied);
        assert_eq!(r.alpha, 0.002);
    }

    #[test]
    fn planted_outlier_is_the_only_rejection() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (d, l) = separated(&mut rng, 25, 40, &[7]);
        let cfg = TestConfig::default();
        let r = test_class(&d, &l, ClassId(0), &cfg).unwrap();

        // brute-force recomputation of every quantity from the raw matrix
        let class: Vec<usize> = (0..25).collect();
        let mut within: Vec<f64> = Vec::new();
        let mut between: Vec<f64> = Vec::new();
        for &i in &class {
            for j in 0..d.size() {
                if j == i {
                    continue;
                }
                if j < 25 { within.push(d.get(i, j)) } else { between.push(d.get(i, j)) }
            }
        }
        let g = |t: f64| within.iter().filter(|&&v| v <= t).count() as f64 / within.len() as f64;
        let f = |t: f64| between.iter().filter(|&&v| v <= t).count() as f64 / between.len() as f64;
        let mut cands: Vec<f64> = within.iter().chain(&between).copied().collect();
        cands.sort_by(f64::total_cmp);
        let mut sorted_w = within.clone();
        sorted_w.sort_by(f64::total_cmp);
        let t_star = *cands
            .iter()
            .find(|&&t| {
                let q = 1.0 - f(t);
                let psi = sorted_w.iter().copied().find(|&w| g(w) >= q - 1e-12).unwrap();
                psi <= t
            })
            .unwrap();
        assert_eq!(r.t_star_hat, t_star);
        assert!((r.tau_hat - g(t_star)).abs() < 1e-12);
        let a = (0..24).filter(|&k| cdf_oracle(k, 24, r.tau_hat) <= 0.002).max();
        assert_eq!(r.a_alpha, a);
        for (i, v) in r.instances.iter().enumerate() {
            let z = (0..25).filter(|&j| j != i && d.get(i, j) <= t_star).count() as u64;
            assert_eq!(v.z, z);
            assert_eq!(v.rejected, i == 7, "instance {i} z={z}");
        }
    }

    #[test]
    fn pair_class_cannot_reject() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, l) = separated(&mut rng, 2, 5, &[]);
        let r = test_class(&d, &l, ClassId(0), &TestConfig::default()).unwrap();
        // one trial: Z_i = 1 > a_alpha = 0
        assert_eq!(r.a_alpha, Some(0));
        assert_eq!(r.r_count, 0);
        assert!(!r.lemma2_satisfied);
    }

    #[test]
    fn overlapping_distances_flag_assumption() {
        // within-class distances larger than between-class ones
        let n1 = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = n1 + 6;
        let mut upper = vec![vec![0.0; n]; n];
        for (i, row) in upper.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate().skip(i + 1) {
                *v = if i < n1 && j < n1 { 0.8 + 0.1 * rng.gen::<f64>() } else { 0.1 * rng.gen::<f64>() };
            }
        }
        let d = DistanceMatrix::from_upper(ids(n), |i, j| upper[i][j]).unwrap();
        let labels: Vec<Option<&str>> = (0..n).map(|i| Some(if i < n1 { "A" } else { "B" })).collect();
        let l = ClassLabeling::from_labels(&labels);
        let r = test_class(&d, &l, ClassId(0), &TestConfig::default()).unwrap();
        assert!(r.tau_hat <= 0.5);
        assert!(r.has_flag(TestFlag::AssumptionViolated));
        assert_eq!(r.r_count, 0);
        assert_eq!(r.a_alpha, None);
    }

    #[test]
    fn validate_all_matches_isolated_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 40;
        let labels: Vec<Option<String>> = (0..n)
            .map(|i| match i % 4 {
                0 | 1 => Some("a".to_string()),
                2 => Some("b".to_string()),
                _ => (i % 8 == 3).then(|| "c".to_string()),
            })
            .collect();
        let l = ClassLabeling::from_labels(&labels);
        let d = DistanceMatrix::from_upper(ids(n), |i, j| {
            let same = labels[i].is_some() && labels[i] == labels[j];
            (if same { 0.0 } else { 0.3 }) + 0.5 * rng.gen::<f64>()
        })
        .unwrap();
        let cfg = TestConfig::default();
        let all = validate_all(&d, &l, &cfg);
        assert_eq!(all.results.len(), l.classes().len());
        for (k, r) in l.class_ids().zip(&all.results) {
            assert_eq!(r, &test_class(&d, &l, k, &cfg).unwrap());
        }
        // determinism
        assert_eq!(all, validate_all(&d, &l, &cfg));
    }

    #[test]
    fn single_class_gives_single_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (d, _) = separated(&mut rng, 10, 5, &[]);
        let labels: Vec<Option<&str>> = (0..15).map(|i| (i < 10).then_some("A")).collect();
        let l = ClassLabeling::from_labels(&labels);
        let v = validate_all(&d, &l, &TestConfig::default());
        assert_eq!(v.results.len(), 1);
        assert!(v.failures.is_empty());
    }

    #[test]
    fn failing_class_does_not_stop_others() {
        // a class covering every instance has no between-class distances
        let d = DistanceMatrix::from_upper(ids(3), |_, _| 0.5).unwrap();
        let l = ClassLabeling::from_labels(&[Some("a"), Some("a"), Some("a")]);
        let v = validate_all(&d, &l, &TestConfig::default());
        assert!(v.results.is_empty());
        assert_eq!(v.failures.len(), 1);
        assert_eq!(v.failures[0].class_id, "a");
    }

    #[test]
    fn rejections_shrink_with_alpha0() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n1 = 40;
        let n = n1 + 60;
        let d = DistanceMatrix::from_upper(ids(n), |i, j| {
            let shift = if i < n1 && j < n1 { 0.0 } else { 0.25 };
            shift + rng.gen::<f64>()
        })
        .unwrap();
        let labels: Vec<Option<&str>> = (0..n).map(|i| Some(if i < n1 { "A" } else { "B" })).collect();
        let l = ClassLabeling::from_labels(&labels);
        let mut prev: Option<Vec<bool>> = None;
        for alpha0 in [0.45, 0.3, 0.1, 0.05, 0.01, 0.001] {
            let cfg = TestConfig::new(alpha0, DistanceMetric::Correlation).unwrap();
            let r = test_class(&d, &l, ClassId(0), &cfg).unwrap();
            let rej: Vec<bool> = r.instances.iter().map(|v| v.rejected).collect();
            if let Some(p) = &prev {
                assert!(rej.iter().zip(p).all(|(now, before)| !now || *before));
            }
            prev = Some(rej);
        }
    }

    #[test]
    fn bonferroni_bound_holds_on_results() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for n1 in [5usize, 12, 30] {
            let (d, l) = separated(&mut rng, n1, 20, &[0]);
            let r = test_class(&d, &l, ClassId(0), &TestConfig::default()).unwrap();
            if let Some(a) = r.a_alpha {
                assert!(binomial_cdf(a, (n1 - 1) as u64, r.tau_hat).unwrap() <= 0.05 / n1 as f64);
            }
            assert_eq!(r.r_count, r.instances.iter().filter(|v| v.rejected).count());
            assert!(r.instances.iter().all(|v| v.z <= (n1 - 1) as u64));
        }
    }
}
