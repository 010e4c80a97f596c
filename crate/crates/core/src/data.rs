//! Shared data model: intensity matrices, class labelings, dense distance
//! matrices and their class-partitioned views, and the test configuration.
//!
//! Instances keep their external IDs and original positions throughout.
//! Class blocks are an internal view; nothing here assumes pre-sorted input.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMetric;
use crate::error::{Error, Result};

/// Largest instance count accepted for a dense distance matrix
/// (20 000² doubles is about 3.2 GB).
pub const MAX_INSTANCES: usize = 20_000;

fn check_unique_ids(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate instance id `{id}`")));
        }
    }
    Ok(())
}

/// `n × N` matrix of observed intensities; instances are columns.
///
/// Stored instance-major so each instance's `n`-vector is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    samples: usize,
    ids: Vec<String>,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Builds a matrix from one vector per instance.
    pub fn from_columns(ids: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} ids for {} instance columns",
                ids.len(),
                columns.len()
            )));
        }
        let samples = columns.first().map_or(0, Vec::len);
        if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != samples) {
            return Err(Error::InvalidInput(format!(
                "instance `{}` has {} samples, expected {samples}",
                ids[i],
                c.len()
            )));
        }
        Self::from_instance_major(samples, ids, columns.concat())
    }

    /// Builds a matrix from a flat instance-major buffer of length `samples * ids.len()`.
    pub fn from_instance_major(samples: usize, ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if samples < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 samples per instance, got {samples}"
            )));
        }
        if ids.is_empty() {
            return Err(Error::InvalidInput("no instances".into()));
        }
        if values.len() != samples * ids.len() {
            return Err(Error::InvalidInput(format!(
                "buffer holds {} values, expected {} x {}",
                values.len(),
                samples,
                ids.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite intensity for instance `{}` (sample {})",
                ids[pos / samples],
                pos % samples
            )));
        }
        check_unique_ids(&ids)?;
        Ok(Self {
            samples,
            ids,
            values,
        })
    }

    /// Number of samples `n`.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Number of instances `N`.
    pub fn instances(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Intensity vector of instance `i`.
    pub fn column(&self, i: usize) -> &[f64] {
        &self.values[i * self.samples..(i + 1) * self.samples]
    }

    /// Keeps only the listed instances, in the given order.
    pub fn select(&self, keep: &[usize]) -> Result<Self> {
        let ids = keep.iter().map(|&i| self.ids[i].clone()).collect();
        let values = keep.iter().flat_map(|&i| self.column(i).iter().copied()).collect();
        Self::from_instance_major(self.samples, ids, values)
    }
}

/// Index of a testable (non-mega) class within a [`ClassLabeling`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassInfo {
    pub name: String,
    pub members: Vec<usize>,
}

/// Assignment of instances to classes `C_1 … C_{K-1}` plus the mega-class `C_K`.
///
/// Every non-mega class has at least two members. Unassigned instances and
/// the sole members of singleton classes make up the mega-class, which is
/// only ever used as reference material for other classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassLabeling {
    assignment: Vec<Option<ClassId>>,
    classes: Vec<ClassInfo>,
    mega: Vec<usize>,
    mega_label: Option<String>,
    merged: Vec<String>,
}

impl ClassLabeling {
    /// Builds a labeling from per-instance labels; `None` means unassigned.
    ///
    /// Classes are numbered in order of first appearance. Singleton classes
    /// are merged into the mega-class and reported through
    /// [`merged_singletons`](Self::merged_singletons) and a log warning.
    pub fn from_labels<S: AsRef<str>>(labels: &[Option<S>]) -> Self {
        Self::build(labels.iter().map(|l| l.as_ref().map(AsRef::as_ref)), None)
    }

    /// Like [`from_labels`](Self::from_labels), treating `mega_label` as unassigned.
    pub fn with_mega_label<S: AsRef<str>>(labels: &[S], mega_label: &str) -> Self {
        Self::build(
            labels.iter().map(|l| {
                let l = l.as_ref();
                (l != mega_label).then_some(l)
            }),
            Some(mega_label.to_owned()),
        )
    }

    fn build<'a>(labels: impl Iterator<Item = Option<&'a str>>, mega_label: Option<String>) -> Self {
        let mut order: Vec<&str> = Vec::new();
        let mut members: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut mega = Vec::new();
        let mut count = 0;
        for (i, label) in labels.enumerate() {
            count += 1;
            match label {
                Some(name) => {
                    let entry = members.entry(name).or_insert_with(|| {
                        order.push(name);
                        Vec::new()
                    });
                    entry.push(i);
                }
                None => mega.push(i),
            }
        }

        let mut assignment = vec![None; count];
        let mut classes = Vec::new();
        let mut merged = Vec::new();
        for name in order {
            let m = members.remove(name).unwrap_or_default();
            if m.len() < 2 {
                log::warn!("class `{name}` has a single instance; merged into the mega-class");
                merged.push(name.to_owned());
                mega.extend(m);
                continue;
            }
            let id = ClassId(classes.len());
            for &i in &m {
                assignment[i] = Some(id);
            }
            classes.push(ClassInfo {
                name: name.to_owned(),
                members: m,
            });
        }
        mega.sort_unstable();
        Self {
            assignment,
            classes,
            mega,
            mega_label,
            merged,
        }
    }

    /// Total instance count `N`.
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Testable classes, excluding the mega-class.
    pub fn classes(&self) -> &[ClassInfo] {
        &self.classes
    }

    pub fn class_ids(&self) -> impl Iterator<Item = ClassId> {
        (0..self.classes.len()).map(ClassId)
    }

    pub fn class(&self, id: ClassId) -> Result<&ClassInfo> {
        self.classes
            .get(id.0)
            .ok_or_else(|| Error::UnknownClass(format!("#{}", id.0)))
    }

    /// Resolves a class by name. The mega-class and merged singletons are
    /// known but not testable.
    pub fn class_id(&self, name: &str) -> Result<ClassId> {
        if let Some(pos) = self.classes.iter().position(|c| c.name == name) {
            return Ok(ClassId(pos));
        }
        if self.mega_label.as_deref() == Some(name) || self.merged.iter().any(|m| m == name) {
            return Err(Error::ClassNotTestable(name.to_owned()));
        }
        Err(Error::UnknownClass(name.to_owned()))
    }

    pub fn assignment(&self, instance: usize) -> Option<ClassId> {
        self.assignment[instance]
    }

    pub fn mega_members(&self) -> &[usize] {
        &self.mega
    }

    /// Labels of singleton classes that were folded into the mega-class.
    pub fn merged_singletons(&self) -> &[String] {
        &self.merged
    }

    /// `N_1, …, N_{K-1}` followed by `N_K` (the mega-class, possibly 0).
    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes
            .iter()
            .map(|c| c.members.len())
            .chain(std::iter::once(self.mega.len()))
            .collect()
    }

    /// Permutation listing instances class by class, mega-class last.
    pub fn block_order(&self) -> Vec<usize> {
        self.groups().into_iter().flat_map(|(_, g)| g).collect()
    }

    /// Instance groups in block order: classes by id, then the mega-class if non-empty.
    pub(crate) fn groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut groups: Vec<(String, Vec<usize>)> = self
            .classes
            .iter()
            .map(|c| (c.name.clone(), c.members.clone()))
            .collect();
        if !self.mega.is_empty() {
            let name = self.mega_label.clone().unwrap_or_else(|| "<mega>".to_owned());
            groups.push((name, self.mega.clone()));
        }
        groups
    }

    /// Drops the listed instances and renumbers the remainder. Classes that
    /// fall below two members are merged into the mega-class again.
    pub fn without(&self, drop: &[usize]) -> Self {
        let dropped: HashSet<usize> = drop.iter().copied().collect();
        let labels: Vec<Option<&str>> = (0..self.len())
            .filter(|i| !dropped.contains(i))
            .map(|i| self.assignment[i].map(|c| self.classes[c.0].name.as_str()))
            .collect();
        let mut out = Self::build(labels.into_iter(), self.mega_label.clone());
        let mut merged = self.merged.clone();
        merged.extend(out.merged);
        out.merged = merged;
        out
    }
}

/// Dense, symmetric `N × N` matrix of pairwise (quasi-)distances.
///
/// Symmetry, a zero diagonal and non-negativity hold exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Fills the upper triangle from `f(i, j)` (`i < j`) and mirrors it.
    pub fn from_upper<F>(ids: Vec<String>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let n = ids.len();
        if n > MAX_INSTANCES {
            return Err(Error::TooLarge(n));
        }
        check_unique_ids(&ids)?;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidDistances(format!(
                        "d({}, {}) = {v}",
                        ids[i], ids[j]
                    )));
                }
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Ok(Self { ids, entries })
    }

    /// Wraps a full row-major matrix after validating it.
    ///
    /// Off-diagonal pairs may disagree by at most `symmetry_tol` (absolute);
    /// the upper-triangle value is kept for both.
    pub fn from_entries(ids: Vec<String>, entries: Vec<f64>, symmetry_tol: f64) -> Result<Self> {
        let n = ids.len();
        if entries.len() != n * n {
            return Err(Error::InvalidDistances(format!(
                "{} entries for {n} instances",
                entries.len()
            )));
        }
        for i in 0..n {
            let d = entries[i * n + i];
            if d != 0.0 {
                return Err(Error::InvalidDistances(format!(
                    "diagonal entry for `{}` is {d}, expected 0",
                    ids[i]
                )));
            }
            for j in i + 1..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if (a - b).abs() > symmetry_tol || a.is_nan() || b.is_nan() {
                    return Err(Error::InvalidDistances(format!(
                        "asymmetric pair ({}, {}): {a} vs {b}",
                        ids[i], ids[j]
                    )));
                }
            }
        }
        Self::from_upper(ids, |i, j| entries[i * n + j])
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.size();
        &self.entries[i * n..(i + 1) * n]
    }

    /// Reorders instances: entry `(a, b)` of the result is `d(order[a], order[b])`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.size() {
            return Err(Error::InvalidInput("permutation length mismatch".into()));
        }
        let ids = order.iter().map(|&i| self.ids[i].clone()).collect();
        Self::from_upper(ids, |a, b| self.get(order[a], order[b]))
    }
}

/// Row-major rectangular block of distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Block {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "block {rows}x{cols} given {} values",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    fn gather(d: &DistanceMatrix, rows: &[usize], cols: &[usize]) -> Self {
        let values = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| d.get(i, j)))
            .collect();
        Self {
            rows: rows.len(),
            cols: cols.len(),
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.cols {
            values.extend((0..self.rows).map(|r| self.get(r, c)));
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }
}

/// Contiguous run of `between` columns that belong to one foreign class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub label: String,
    pub len: usize,
}

/// One-vs-all view of a class: its within block `D_kk` and the concatenation
/// of every cross block `D_kl`, columns grouped by foreign class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBlocks {
    pub class: String,
    /// External IDs of the class members, in row order.
    pub ids: Vec<String>,
    pub within: Block,
    pub between: Block,
    pub segments: Vec<Segment>,
}

impl ClassBlocks {
    pub fn new(
        class: impl Into<String>,
        ids: Vec<String>,
        within: Block,
        between: Block,
        segments: Vec<Segment>,
    ) -> Result<Self> {
        let class = class.into();
        let n1 = ids.len();
        if n1 < 2 {
            return Err(Error::ClassNotTestable(class));
        }
        if within.rows != n1 || within.cols != n1 {
            return Err(Error::InvalidInput(format!(
                "within block is {}x{}, expected {n1}x{n1}",
                within.rows, within.cols
            )));
        }
        if between.rows != n1 {
            return Err(Error::InvalidInput(format!(
                "between block has {} rows, expected {n1}",
                between.rows
            )));
        }
        let seg_total: usize = segments.iter().map(|s| s.len).sum();
        if seg_total != between.cols {
            return Err(Error::InvalidInput(format!(
                "segments cover {seg_total} columns, between block has {}",
                between.cols
            )));
        }
        Ok(Self {
            class,
            ids,
            within,
            between,
            segments,
        })
    }

    /// `N_1`.
    pub fn class_size(&self) -> usize {
        self.ids.len()
    }

    /// `N - N_1`.
    pub fn outside_size(&self) -> usize {
        self.between.cols
    }
}

/// Extracts the within block and the concatenated cross blocks of class `k`.
pub fn build_partitioned_view(
    d: &DistanceMatrix,
    labeling: &ClassLabeling,
    k: ClassId,
) -> Result<ClassBlocks> {
    if d.size() != labeling.len() {
        return Err(Error::InvalidInput(format!(
            "distance matrix covers {} instances, labeling {}",
            d.size(),
            labeling.len()
        )));
    }
    let class = labeling.class(k)?;
    let mut others = Vec::with_capacity(d.size() - class.members.len());
    let mut segments = Vec::new();
    for (g, (name, group)) in labeling.groups().into_iter().enumerate() {
        if g == k.0 {
            continue;
        }
        segments.push(Segment {
            label: name,
            len: group.len(),
        });
        others.extend(group);
    }
    let ids = class.members.iter().map(|&i| d.ids()[i].clone()).collect();
    ClassBlocks::new(
        class.name.clone(),
        ids,
        Block::gather(d, &class.members, &class.members),
        Block::gather(d, &class.members, &others),
        segments,
    )
}

/// Full `K × K` block decomposition of a distance matrix in class order.
#[derive(Debug, Clone)]
pub struct BlockPartition {
    ids: Vec<String>,
    groups: Vec<Vec<usize>>,
    blocks: Vec<Vec<Block>>,
}

impl BlockPartition {
    pub fn new(d: &DistanceMatrix, labeling: &ClassLabeling) -> Result<Self> {
        if d.size() != labeling.len() {
            return Err(Error::InvalidInput("labeling does not match distance matrix".into()));
        }
        let groups: Vec<Vec<usize>> = labeling.groups().into_iter().map(|(_, g)| g).collect();
        let blocks = groups
            .iter()
            .map(|r| groups.iter().map(|c| Block::gather(d, r, c)).collect())
            .collect();
        Ok(Self {
            ids: d.ids().to_vec(),
            groups,
            blocks,
        })
    }

    pub fn block(&self, a: usize, b: usize) -> &Block {
        &self.blocks[a][b]
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Rebuilds the original matrix, in the original instance order.
    pub fn reassemble(&self) -> Result<DistanceMatrix> {
        let n = self.ids.len();
        let mut entries = vec![0.0; n * n];
        for (a, rows) in self.groups.iter().enumerate() {
            for (b, cols) in self.groups.iter().enumerate() {
                let block = &self.blocks[a][b];
                for (r, &i) in rows.iter().enumerate() {
                    for (c, &j) in cols.iter().enumerate() {
                        entries[i * n + j] = block.get(r, c);
                    }
                }
            }
        }
        DistanceMatrix::from_entries(self.ids.clone(), entries, 0.0)
    }
}

/// How the global budget `α₀` becomes a per-test level `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaRule {
    /// `α = α₀ / N₁`, so the family-wise error of one class is at most `α₀`.
    #[default]
    Bonferroni,
}

impl AlphaRule {
    pub fn per_test(self, alpha0: f64, class_size: usize) -> f64 {
        match self {
            AlphaRule::Bonferroni => alpha0 / class_size as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha0: f64,
    pub metric: DistanceMetric,
    #[serde(default)]
    pub alpha_rule: AlphaRule,
}

impl TestConfig {
    pub fn new(alpha0: f64, metric: DistanceMetric) -> Result<Self> {
        let cfg = Self {
            alpha0,
            metric,
            alpha_rule: AlphaRule::Bonferroni,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0 < 0.5) {
            return Err(Error::Config(format!(
                "alpha0 must lie in (0, 0.5), got {}",
                self.alpha0
            )));
        }
        Ok(())
    }
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.05,
            metric: DistanceMetric::Correlation,
            alpha_rule: AlphaRule::Bonferroni,
        }
    }
}
