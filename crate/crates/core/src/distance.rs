//! Pairwise (quasi-)distances between instance intensity vectors.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    Block, ClassBlocks, ClassId, ClassLabeling, DataMatrix, DistanceMatrix, Segment,
    MAX_INSTANCES,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// `1 - r` with `r` the Pearson correlation; a quasi-distance in `[0, 2]`.
    #[default]
    Correlation,
    Euclidean,
    Manhattan,
}

impl DistanceMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMetric::Correlation => "correlation",
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Manhattan => "manhattan",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(DistanceMetric::Correlation),
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "manhattan" => Ok(DistanceMetric::Manhattan),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Centered copy of `x` and its sum of squares (two-pass). `None` for a
/// numerically constant vector.
fn center(x: &[f64]) -> Option<Centered> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * scale;
    if ss == 0.0 || ss <= n * floor * floor {
        return None;
    }
    Some(Centered { dev, ss })
}

struct Centered {
    dev: Vec<f64>,
    ss: f64,
}

/// `1 - r`. Dividing by `sqrt(ss_u * ss_v)` rather than normalizing each
/// vector first keeps `r = 1` exact for identical vectors.
#[inline]
fn correlation_from_centered(u: &Centered, v: &Centered) -> f64 {
    let dot: f64 = u.dev.iter().zip(&v.dev).map(|(a, b)| a * b).sum();
    let r = dot / (u.ss * v.ss).sqrt();
    (1.0 - r).clamp(0.0, 2.0)
}

/// `1 - cor(x, y)`, clamped to `[0, 2]`.
pub fn correlation_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let u = center(x).ok_or_else(|| Error::ZeroVariance { ids: vec!["x".into()] })?;
    let v = center(y).ok_or_else(|| Error::ZeroVariance { ids: vec!["y".into()] })?;
    Ok(correlation_from_centered(&u, &v))
}

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(euclidean(x, y))
}

pub fn manhattan_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(manhattan(x, y))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    Ok(())
}

#[inline]
fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[inline]
fn manhattan(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

/// Instances whose intensity vector is (numerically) constant.
pub fn zero_variance_instances(data: &DataMatrix) -> Vec<usize> {
    (0..data.instances())
        .filter(|&i| center(data.column(i)).is_none())
        .collect()
}

/// Per-instance preprocessing so that each pair costs one `O(n)` pass.
enum Prepared<'a> {
    Centered(Vec<Centered>),
    Raw(&'a DataMatrix, DistanceMetric),
}

impl<'a> Prepared<'a> {
    fn new(data: &'a DataMatrix, metric: DistanceMetric) -> Result<Self> {
        match metric {
            DistanceMetric::Correlation => {
                let mut bad = Vec::new();
                let cols: Vec<Centered> = (0..data.instances())
                    .map(|i| {
                        center(data.column(i)).unwrap_or_else(|| {
                            bad.push(data.ids()[i].clone());
                            Centered { dev: Vec::new(), ss: 0.0 }
                        })
                    })
                    .collect();
                if !bad.is_empty() {
                    return Err(Error::ZeroVariance { ids: bad });
                }
                Ok(Prepared::Centered(cols))
            }
            m => Ok(Prepared::Raw(data, m)),
        }
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match self {
            Prepared::Centered(cols) => correlation_from_centered(&cols[i], &cols[j]),
            Prepared::Raw(data, DistanceMetric::Euclidean) => {
                euclidean(data.column(i), data.column(j))
            }
            Prepared::Raw(data, _) => manhattan(data.column(i), data.column(j)),
        }
    }
}

/// Full symmetric distance matrix; only the upper triangle is computed.
pub fn build_distance_matrix(data: &DataMatrix, metric: DistanceMetric) -> Result<DistanceMatrix> {
    let n = data.instances();
    if n > MAX_INSTANCES {
        return Err(Error::TooLarge(n));
    }
    let prep = Prepared::new(data, metric)?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| prep.dist(i, j)).collect())
        .collect();
    DistanceMatrix::from_upper(data.ids().to_vec(), |i, j| rows[i][j - i - 1])
}

/// Distances for one class straight from the data, skipping every block
/// that does not involve the class. Equivalent to
/// [`build_partitioned_view`](crate::data::build_partitioned_view) on the
/// full matrix.
pub fn class_blocks_from_data(
    data: &DataMatrix,
    labeling: &ClassLabeling,
    k: ClassId,
    metric: DistanceMetric,
) -> Result<ClassBlocks> {
    if data.instances() != labeling.len() {
        return Err(Error::InvalidInput("labeling does not match data".into()));
    }
    let class = labeling.class(k)?;
    let members = &class.members;
    let mut others = Vec::new();
    let mut segments = Vec::new();
    for (g, (label, group)) in labeling.groups().into_iter().enumerate() {
        if g != k.0 {
            segments.push(Segment { label, len: group.len() });
            others.extend(group);
        }
    }
    let prep = Prepared::new(data, metric)?;
    let n1 = members.len();
    let within_upper: Vec<Vec<f64>> = (0..n1)
        .into_par_iter()
        .map(|a| (a + 1..n1).map(|b| prep.dist(members[a], members[b])).collect())
        .collect();
    let mut within = vec![0.0; n1 * n1];
    for a in 0..n1 {
        for b in a + 1..n1 {
            let v = within_upper[a][b - a - 1];
            within[a * n1 + b] = v;
            within[b * n1 + a] = v;
        }
    }
    let between: Vec<f64> = members
        .par_iter()
        .flat_map_iter(|&i| others.iter().map(move |&j| (i, j)))
        .map(|(i, j)| prep.dist(i, j))
        .collect();
    let ids = members.iter().map(|&i| data.ids()[i].clone()).collect();
    ClassBlocks::new(
        class.name.clone(),
        ids,
        Block::new(n1, n1, within)?,
        Block::new(n1, others.len(), between)?,
        segments,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_partitioned_view;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn perfect_correlations() {
        assert_eq!(correlation_distance(&[1., 2., 3.], &[2., 4., 6.]).unwrap(), 0.0);
        assert_eq!(correlation_distance(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), 2.0);
    }

    #[test]
    fn correlation_matches_extended_precision() {
        // 1 - r for x = (1,2,4), y = (1,3,5), evaluated at 50 significant digits
        let d = correlation_distance(&[1., 2., 4.], &[1., 3., 5.]).unwrap();
        assert_abs_diff_eq!(d, 0.018_019_493_938_034_284, epsilon = 1e-14);
    }

    #[test]
    fn zero_variance_is_an_error() {
        assert!(matches!(
            correlation_distance(&[1., 1., 1.], &[1., 2., 3.]),
            Err(Error::ZeroVariance { .. })
        ));
        let data =
            DataMatrix::from_columns(ids(3), vec![vec![1., 2., 3.], vec![0.1; 3], vec![3., 1., 2.]])
                .unwrap();
        assert_eq!(zero_variance_instances(&data), vec![1]);
        match build_distance_matrix(&data, DistanceMetric::Correlation) {
            Err(Error::ZeroVariance { ids }) => assert_eq!(ids, vec!["p1".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        // other metrics do not care
        assert!(build_distance_matrix(&data, DistanceMetric::Euclidean).is_ok());
    }

    #[test]
    fn identical_columns_have_zero_distance() {
        let data =
            DataMatrix::from_columns(ids(2), vec![vec![0.3, 1.7, -2.0], vec![0.3, 1.7, -2.0]])
                .unwrap();
        for m in [DistanceMetric::Correlation, DistanceMetric::Euclidean, DistanceMetric::Manhattan] {
            let d = build_distance_matrix(&data, m).unwrap();
            assert_eq!(d.get(0, 1), 0.0);
            assert_eq!(d.get(1, 1), 0.0);
        }
    }

    #[test]
    fn matrix_matches_scalar_functions() {
        let cols = vec![vec![1.0, 4.0, 2.0], vec![0.5, -1.0, 3.0], vec![2.0, 2.5, 9.0]];
        let data = DataMatrix::from_columns(ids(3), cols.clone()).unwrap();
        type Scalar = fn(&[f64], &[f64]) -> Result<f64>;
        let pairs: [(DistanceMetric, Scalar); 3] = [
            (DistanceMetric::Correlation, correlation_distance),
            (DistanceMetric::Euclidean, euclidean_distance),
            (DistanceMetric::Manhattan, manhattan_distance),
        ];
        for (metric, scalar) in pairs {
            let d = build_distance_matrix(&data, metric).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 0.0 } else { scalar(&cols[i], &cols[j]).unwrap() };
                    assert_eq!(d.get(i, j), expect, "{metric} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn class_blocks_match_full_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 9;
        let cols: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng.gen()).collect()).collect();
        let data = DataMatrix::from_columns(ids(n), cols).unwrap();
        let labels = [Some("a"), Some("b"), Some("a"), None, Some("b"), Some("a"), Some("c"), None, Some("b")];
        let l = ClassLabeling::from_labels(&labels);
        for metric in [DistanceMetric::Correlation, DistanceMetric::Manhattan] {
            let d = build_distance_matrix(&data, metric).unwrap();
            for k in l.class_ids() {
                assert_eq!(
                    class_blocks_from_data(&data, &l, k, metric).unwrap(),
                    build_partitioned_view(&d, &l, k).unwrap()
                );
            }
        }
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 8)
    }

    proptest! {
        #[test]
        fn correlation_affine_invariant(x in vec3(), y in vec3(), a in 0.1f64..20.0, b in -5.0f64..5.0) {
            prop_assume!(center(&x).is_some() && center(&y).is_some());
            let d0 = correlation_distance(&x, &y).unwrap();
            let xa: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let d1 = correlation_distance(&xa, &y).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-10);
            prop_assert!((0.0..=2.0).contains(&d0));
        }

        #[test]
        fn metrics_satisfy_triangle(x in vec3(), y in vec3(), z in vec3()) {
            for f in [euclidean_distance, manhattan_distance] {
                let (xy, yz, xz) = (f(&x, &y).unwrap(), f(&y, &z).unwrap(), f(&x, &z).unwrap());
                prop_assert!(xz <= xy + yz + 1e-9);
            }
        }

        #[test]
        fn matrix_is_exactly_symmetric(cols in proptest::collection::vec(vec3(), 2..7)) {
            let data = DataMatrix::from_columns(ids(cols.len()), cols).unwrap();
            for m in [DistanceMetric::Euclidean, DistanceMetric::Manhattan] {
                let d = build_distance_matrix(&data, m).unwrap();
                for i in 0..d.size() {
                    prop_assert_eq!(d.get(i, i), 0.0);
                    for j in 0..d.size() {
                        prop_assert_eq!(d.get(i, j), d.get(j, i));
                        prop_assert!(d.get(i, j) >= 0.0);
                    }
                }
            }
        }
    }
}
