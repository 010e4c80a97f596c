//! Detection of mislabeled instances in labeled data.
//!
//! Every class is tested one-vs-all. Distances within the class and to every
//! other instance give empirical CDFs `Ḡ̂` and `F̄̂`. Their crossing point
//! `t̂*` separates the two, and `τ̂ = Ḡ̂(t̂*)`. A member whose count
//! `Z_i = #{j : d_ij ≤ t̂*}` is improbably low under `Bin(N₁ − 1, τ̂)` is
//! flagged as mislabeled. A Bonferroni level `α₀ / N₁` bounds the
//! family-wise error of each class by `α₀`.
//!
//! ```
//! use labelcheck::{build_distance_matrix, validate_all, ClassLabeling, DataMatrix, DistanceMetric, TestConfig};
//!
//! let ids = (0..6).map(|i| format!("p{i}")).collect();
//! let columns = vec![
//!     vec![1.0, 2.0, 3.0, 4.0],
//!     vec![1.1, 2.1, 2.9, 4.2],
//!     vec![0.9, 2.2, 3.1, 3.9],
//!     vec![4.0, 1.0, 3.0, 2.0],
//!     vec![4.1, 0.8, 3.2, 2.1],
//!     vec![3.9, 1.1, 2.8, 1.9],
//! ];
//! let data = DataMatrix::from_columns(ids, columns)?;
//! let labels = ClassLabeling::from_labels(&[Some("a"), Some("a"), Some("a"), Some("b"), Some("b"), Some("b")]);
//! let d = build_distance_matrix(&data, DistanceMetric::Correlation)?;
//! let v = validate_all(&d, &labels, &TestConfig::default());
//! assert_eq!(v.results.len(), 2);
//! assert!(v.results.iter().all(|r| r.tau_hat == 1.0 && r.r_count == 0));
//! # Ok::<(), labelcheck::Error>(())
//! ```

pub mod data;
pub mod distance;
pub mod error;
pub mod estimation;
pub mod io;
pub mod metrics;
pub mod report;
pub mod simulation;
pub mod testing;

pub use data::{
    build_partitioned_view, AlphaRule, Block, BlockPartition, ClassBlocks, ClassId, ClassInfo, ClassLabeling,
    DataMatrix, DistanceMatrix, Segment, TestConfig, MAX_INSTANCES,
};
pub use distance::{
    build_distance_matrix, class_blocks_from_data, correlation_distance, euclidean_distance, manhattan_distance,
    zero_variance_instances, DistanceMetric,
};
pub use error::{Error, Result};
pub use estimation::{
    estimate_class, per_instance_cdfs, pooled_cdfs, pooled_from_blocks, psi_hat, solve_t_star, ClassEstimates,
    EmpiricalCdf, FixedPoint, InstanceCdfs, MixtureCdf, PooledCdfs,
};
pub use metrics::{aggregate, score_run, AggregateMetrics, ConfusionCounts, MetricSummary, RunMetrics};
pub use simulation::{
    generate_dataset, generate_independent_blocks, generate_independent_matrix, replicate_rng, run_independent_study,
    run_study, IndependentStudyConfig, RunRecord, SimulatedData, StudyConfig, StudyReport, StudySpec,
};
pub use testing::{
    analyze_blocks, binomial_cdf, binomial_upper_tail, critical_value, lemma2_holds, tau_star_bound, test_blocks,
    test_class, type2_error, validate_all, z_statistics, ClassTestResult, InstanceVerdict, TestFlag, Validation,
};
