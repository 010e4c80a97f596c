//! Monte-Carlo studies of the filtering procedure.
//!
//! The correlated study draws `n` i.i.d. samples of an `N`-variate standard
//! normal with block-equicorrelation structure, plants mislabeled instances
//! in class `C1`, computes distances and tests `C1` one-vs-all. The
//! independent study skips the data layer and draws every distance
//! independently from one of two normal laws, leaving only the symmetry of
//! the matrix as dependence.
//!
//! Replication `r` of a study seeded with `s` draws from ChaCha8 stream `r`
//! under key `s`, so reports are reproducible regardless of thread count.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    Block, ClassBlocks, ClassId, ClassLabeling, DataMatrix, DistanceMatrix, Segment, TestConfig,
    MAX_INSTANCES,
};
use crate::distance::{class_blocks_from_data, DistanceMetric};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, score_run, AggregateMetrics, ConfusionCounts, MetricSummary, RunMetrics};
use crate::testing::{test_blocks, ClassTestResult, TestFlag};

pub const STUDY_SCHEMA: &str = "labelcheck.study/1";

/// Parameters of the correlated-normal study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Samples per instance.
    pub n: usize,
    pub n1: usize,
    #[serde(default = "default_n2")]
    pub n2: usize,
    #[serde(default = "default_rho1")]
    pub rho1: f64,
    pub rho12: f64,
    pub rho2: f64,
    /// Mislabeled proportion of `C1`.
    #[serde(default)]
    pub p: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub metric: DistanceMetric,
}

fn default_n2() -> usize {
    1000
}
fn default_rho1() -> f64 {
    0.5
}
fn default_runs() -> usize {
    1000
}
fn default_alpha0() -> f64 {
    0.05
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if self.n1 < 2 || self.n2 < 1 {
            return bad(format!("class sizes n1 = {}, n2 = {} too small", self.n1, self.n2));
        }
        if self.n1 + self.n2 > MAX_INSTANCES {
            return bad(format!("n1 + n2 exceeds {MAX_INSTANCES}"));
        }
        let (r1, r12, r2) = (self.rho1, self.rho12, self.rho2);
        if !(0.0 <= r12 && r12 <= r2 && r2 <= r1 && r1 < 1.0) {
            return bad(format!(
                "need 0 <= rho12 <= rho2 <= rho1 < 1, got ({r1}, {r12}, {r2})"
            ));
        }
        if !(0.0..1.0).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1)", self.p));
        }
        if self.runs == 0 {
            return bad("runs must be positive".into());
        }
        TestConfig::new(self.alpha0, self.metric).map(|_| ())
    }

    /// `m = ⌊p N₁⌋`.
    pub fn mislabeled_count(&self) -> usize {
        // guard against p * n1 landing just below an integer
        (self.p * self.n1 as f64 + 1e-9).floor() as usize
    }

    fn test_config(&self) -> Result<TestConfig> {
        TestConfig::new(self.alpha0, self.metric)
    }
}

/// Parameters of the independent-distances study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependentStudyConfig {
    pub n1: usize,
    #[serde(default = "default_n2")]
    pub n2: usize,
    #[serde(default = "default_mu_within")]
    pub mu_within: f64,
    #[serde(default = "default_sigma_within")]
    pub sigma_within: f64,
    #[serde(default = "default_mu_between")]
    pub mu_between: f64,
    #[serde(default = "default_sigma_between")]
    pub sigma_between: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_mu_within() -> f64 {
    0.523
}
fn default_sigma_within() -> f64 {
    0.0684
}
fn default_mu_between() -> f64 {
    0.771
}
fn default_sigma_between() -> f64 {
    0.0903
}

impl IndependentStudyConfig {
    /// Defaults for everything but the class size.
    pub fn new(n1: usize) -> Self {
        Self {
            n1,
            n2: default_n2(),
            mu_within: default_mu_within(),
            sigma_within: default_sigma_within(),
            mu_between: default_mu_between(),
            sigma_between: default_sigma_between(),
            runs: default_runs(),
            alpha0: default_alpha0(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 2 || self.n2 < 1 || self.n1 + self.n2 > MAX_INSTANCES {
            return Err(Error::Config(format!(
                "class sizes n1 = {}, n2 = {} out of range",
                self.n1, self.n2
            )));
        }
        if !(self.sigma_within > 0.0 && self.sigma_between > 0.0) {
            return Err(Error::Config("standard deviations must be positive".into()));
        }
        if !(self.mu_within.is_finite() && self.mu_between.is_finite()) {
            return Err(Error::Config("means must be finite".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be positive".into()));
        }
        TestConfig::new(self.alpha0, DistanceMetric::Correlation).map(|_| ())
    }
}

/// RNG for replication `run` of a study seeded with `seed`.
pub fn replicate_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// One simulated data set. `truth[i]` marks mislabeled members of `C1`,
/// indexed like the class members (instances `0..n1`).
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub data: DataMatrix,
    pub labeling: ClassLabeling,
    pub truth: Vec<bool>,
}

pub const CLASS_1: &str = "C1";
pub const CLASS_2: &str = "C2";

/// Draws one data set.
///
/// Each instance of class `k` is `√ρ₁₂·w + √(ρ_k − ρ₁₂)·u_k + √(1 − ρ_k)·ε`
/// with per-sample factors `w` (shared by all) and `u_k` (shared within the
/// group) and idiosyncratic `ε`. This gives unit variances, correlation
/// `ρ_k` within a group and `ρ₁₂` across groups. Mislabeled members of `C1`
/// form their own group with `ρ₂`, so they correlate `ρ₂` among themselves
/// and `ρ₁₂` with everyone else.
pub fn generate_dataset(cfg: &StudyConfig, rng: &mut impl Rng) -> Result<SimulatedData> {
    cfg.validate()?;
    let (n, n1, n2) = (cfg.n, cfg.n1, cfg.n2);
    let total = n1 + n2;
    let m = cfg.mislabeled_count();
    let mut truth = vec![false; n1];
    for i in sample(rng, n1, m) {
        truth[i] = true;
    }

    let shared = cfg.rho12.sqrt();
    let loadings = |rho: f64| ((rho - cfg.rho12).max(0.0).sqrt(), (1.0 - rho).sqrt());
    let (c1_group, c1_noise) = loadings(cfg.rho1);
    let (c2_group, c2_noise) = loadings(cfg.rho2);

    let mut values = vec![0.0; n * total];
    for l in 0..n {
        let w: f64 = rng.sample(StandardNormal);
        let u1: f64 = rng.sample(StandardNormal);
        let u2: f64 = rng.sample(StandardNormal);
        let um: f64 = rng.sample(StandardNormal);
        for i in 0..total {
            let eps: f64 = rng.sample(StandardNormal);
            let (group, noise, u) = if i >= n1 {
                (c2_group, c2_noise, u2)
            } else if truth[i] {
                (c2_group, c2_noise, um)
            } else {
                (c1_group, c1_noise, u1)
            };
            values[i * n + l] = shared * w + group * u + noise * eps;
        }
    }
    let ids = (0..total)
        .map(|i| if i < n1 { format!("c1_{i:05}") } else { format!("c2_{:05}", i - n1) })
        .collect();
    let labels: Vec<Option<&str>> = (0..total)
        .map(|i| Some(if i < n1 { CLASS_1 } else { CLASS_2 }))
        .collect();
    Ok(SimulatedData {
        data: DataMatrix::from_instance_major(n, ids, values)?,
        labeling: ClassLabeling::from_labels(&labels),
        truth,
    })
}

/// Within block and cross block of `C1` for the independent study.
/// Negative draws are clamped to zero.
pub fn generate_independent_blocks(cfg: &IndependentStudyConfig, rng: &mut impl Rng) -> Result<ClassBlocks> {
    cfg.validate()?;
    let (n1, n2) = (cfg.n1, cfg.n2);
    let within_law = Normal::new(cfg.mu_within, cfg.sigma_within).map_err(|e| Error::Config(e.to_string()))?;
    let between_law = Normal::new(cfg.mu_between, cfg.sigma_between).map_err(|e| Error::Config(e.to_string()))?;
    let mut within = vec![0.0; n1 * n1];
    for i in 0..n1 {
        for j in i + 1..n1 {
            let v = within_law.sample(rng).max(0.0);
            within[i * n1 + j] = v;
            within[j * n1 + i] = v;
        }
    }
    let between: Vec<f64> = (0..n1 * n2).map(|_| between_law.sample(rng).max(0.0)).collect();
    ClassBlocks::new(
        CLASS_1,
        (0..n1).map(|i| format!("c1_{i:05}")).collect(),
        Block::new(n1, n1, within)?,
        Block::new(n1, n2, between)?,
        vec![Segment {
            label: CLASS_2.into(),
            len: n2,
        }],
    )
}

/// Full symmetric matrix for the independent study: the blocks of
/// [`generate_independent_blocks`] (same draws), then `C2`–`C2` distances
/// from the between-class law.
pub fn generate_independent_matrix(
    cfg: &IndependentStudyConfig,
    rng: &mut impl Rng,
) -> Result<(DistanceMatrix, ClassLabeling)> {
    let blocks = generate_independent_blocks(cfg, rng)?;
    let (n1, n2) = (cfg.n1, cfg.n2);
    let law = Normal::new(cfg.mu_between, cfg.sigma_between).map_err(|e| Error::Config(e.to_string()))?;
    let mut c2 = vec![0.0; n2 * n2];
    for i in 0..n2 {
        for j in i + 1..n2 {
            let v = law.sample(rng).max(0.0);
            c2[i * n2 + j] = v;
            c2[j * n2 + i] = v;
        }
    }
    let ids: Vec<String> = blocks
        .ids
        .iter()
        .cloned()
        .chain((0..n2).map(|i| format!("c2_{i:05}")))
        .collect();
    let d = DistanceMatrix::from_upper(ids, |i, j| match (i < n1, j < n1) {
        (true, true) => blocks.within.get(i, j),
        (true, false) => blocks.between.get(i, j - n1),
        _ => c2[(i - n1) * n2 + (j - n1)],
    })?;
    let labels: Vec<Option<&str>> = (0..n1 + n2)
        .map(|i| Some(if i < n1 { CLASS_1 } else { CLASS_2 }))
        .collect();
    Ok((d, ClassLabeling::from_labels(&labels)))
}

/// What one replication recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub tau_hat: f64,
    pub t_star_hat: f64,
    pub a_alpha: Option<u64>,
    pub lemma2_satisfied: bool,
    pub flags: Vec<TestFlag>,
    pub counts: ConfusionCounts,
    pub metrics: RunMetrics,
}

impl RunRecord {
    fn new(run: u64, result: &ClassTestResult, truth: &[bool], planted_rate: f64) -> Result<Self> {
        let rejected: Vec<bool> = result.instances.iter().map(|v| v.rejected).collect();
        let (counts, metrics) = score_run(truth, &rejected, planted_rate)?;
        Ok(Self {
            run,
            tau_hat: result.tau_hat,
            t_star_hat: result.t_star_hat,
            a_alpha: result.a_alpha,
            lemma2_satisfied: result.lemma2_satisfied,
            flags: result.flags.clone(),
            counts,
            metrics,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StudySpec {
    Correlated(StudyConfig),
    Independent(IndependentStudyConfig),
}

impl StudySpec {
    pub fn n1(&self) -> usize {
        match self {
            StudySpec::Correlated(c) => c.n1,
            StudySpec::Independent(c) => c.n1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub metrics: AggregateMetrics,
    pub removed: MetricSummary,
    pub retained: MetricSummary,
    pub tau_hat: MetricSummary,
    pub t_star_hat: MetricSummary,
}

impl StudySummary {
    pub fn from_runs(runs: &[RunRecord]) -> Result<Self> {
        let metrics: Vec<RunMetrics> = runs.iter().map(|r| r.metrics).collect();
        let s = |f: fn(&RunRecord) -> f64| MetricSummary::from_values(runs.iter().map(|r| Some(f(r))));
        Ok(Self {
            metrics: aggregate(&metrics)?,
            removed: s(|r| r.counts.removed() as f64),
            retained: s(|r| r.counts.retained() as f64),
            tau_hat: s(|r| r.tau_hat),
            t_star_hat: s(|r| r.t_star_hat),
        })
    }
}

/// Full record of a study: resolved configuration, every run, aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: String,
    pub study: StudySpec,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub summary: StudySummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl StudyReport {
    fn assemble(study: StudySpec, outcomes: Vec<(u64, Result<RunRecord>)>) -> Result<Self> {
        let mut runs = Vec::with_capacity(outcomes.len());
        let mut failures = Vec::new();
        for (run, outcome) in outcomes {
            match outcome {
                Ok(r) => runs.push(r),
                Err(e) => {
                    log::warn!("run {run} excluded: {e}");
                    failures.push(RunFailure {
                        run,
                        message: e.to_string(),
                    });
                }
            }
        }
        if runs.is_empty() {
            return Err(Error::InvalidInput("every replication failed".into()));
        }
        let summary = StudySummary::from_runs(&runs)?;
        Ok(Self {
            schema_version: STUDY_SCHEMA.into(),
            study,
            runs,
            failures,
            summary,
            generated_at: None,
        })
    }

    /// Number of replications excluded because they failed.
    pub fn excluded(&self) -> usize {
        self.failures.len()
    }
}

/// One replication of the correlated study.
pub fn run_replicate(cfg: &StudyConfig, run: u64) -> Result<RunRecord> {
    let mut rng = replicate_rng(cfg.seed, run);
    let sim = generate_dataset(cfg, &mut rng)?;
    let blocks = class_blocks_from_data(&sim.data, &sim.labeling, ClassId(0), cfg.metric)?;
    let result = test_blocks(&blocks, &cfg.test_config()?)?;
    RunRecord::new(run, &result, &sim.truth, cfg.p)
}

/// `B` replications of generate → distances → test `C1` → score.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let outcomes = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|r| (r, run_replicate(cfg, r)))
        .collect();
    StudyReport::assemble(StudySpec::Correlated(cfg.clone()), outcomes)
}

/// One replication of the independent-distances study.
pub fn run_independent_replicate(cfg: &IndependentStudyConfig, run: u64) -> Result<RunRecord> {
    let mut rng = replicate_rng(cfg.seed, run);
    let blocks = generate_independent_blocks(cfg, &mut rng)?;
    let tc = TestConfig::new(cfg.alpha0, DistanceMetric::Correlation)?;
    let result = test_blocks(&blocks, &tc)?;
    RunRecord::new(run, &result, &vec![false; cfg.n1], 0.0)
}

/// `B` independent-distance replications; at `p = 0` the mean FDR
/// estimates the family-wise error of the class.
pub fn run_independent_study(cfg: &IndependentStudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let outcomes = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|r| (r, run_independent_replicate(cfg, r)))
        .collect();
    StudyReport::assemble(StudySpec::Independent(cfg.clone()), outcomes)
}
