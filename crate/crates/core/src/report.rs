//! Report files: validation JSON, ECDF dumps, per-run study CSVs, and the
//! merge of study reports into table- and series-shaped CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::TestConfig;
use crate::error::{Error, Result};
use crate::estimation::{ClassEstimates, EmpiricalCdf};
use crate::simulation::{StudyReport, StudySpec, StudySummary, STUDY_SCHEMA};
use crate::testing::{ClassFailure, ClassTestResult, TestFlag, Validation};

pub const VALIDATION_SCHEMA: &str = "labelcheck.validation/1";

/// Output of `validate` for one input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: String,
    pub input: String,
    pub config: TestConfig,
    pub instances: usize,
    pub mega_class_size: usize,
    pub merged_singletons: Vec<String>,
    /// Instances dropped before testing (zero variance).
    pub excluded: Vec<String>,
    pub classes: Vec<ClassTestResult>,
    pub failures: Vec<ClassFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl ValidationReport {
    pub fn removed(&self) -> usize {
        self.classes.iter().map(|c| c.r_count).sum()
    }
}

/// Seconds since the Unix epoch, for `generated_at` fields.
pub fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    format!("{secs}")
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(format!("cannot create {}", path.display()), e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
}

fn check_schema(value: &serde_json::Value, expected: &str) -> Result<()> {
    let found = value.get("schema_version").and_then(|v| v.as_str()).unwrap_or("<missing>");
    if found != expected {
        return Err(Error::Schema {
            expected: expected.into(),
            found: found.into(),
        });
    }
    Ok(())
}

pub fn parse_study_report(text: &str) -> Result<StudyReport> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    check_schema(&value, STUDY_SCHEMA)?;
    Ok(serde_json::from_value(value)?)
}

pub fn read_study_report(path: &Path) -> Result<StudyReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("cannot read {}", path.display()), e))?;
    parse_study_report(&text)
}

pub fn parse_validation_report(text: &str) -> Result<ValidationReport> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    check_schema(&value, VALIDATION_SCHEMA)?;
    Ok(serde_json::from_value(value)?)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn flags(f: &[TestFlag]) -> String {
    f.iter()
        .map(|f| match f {
            TestFlag::AssumptionViolated => "assumption-violated",
            TestFlag::InsufficientPower => "insufficient-power",
            TestFlag::NoFixedPoint => "no-fixed-point",
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Human-readable per-class table.
pub fn summary_table(v: &Validation) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:>6} {:>8} {:>10} {:>6} {:>8} {:>7}  flags",
        "class", "N1", "tau_hat", "t_star_hat", "a", "removed", "lemma2"
    );
    for r in &v.results {
        let a = r.a_alpha.map_or_else(|| "-".into(), |a| a.to_string());
        let _ = writeln!(
            out,
            "{:<20} {:>6} {:>8.4} {:>10.4} {:>6} {:>8} {:>7}  {}",
            r.class_id,
            r.class_size,
            r.tau_hat,
            r.t_star_hat,
            a,
            r.r_count,
            if r.lemma2_satisfied { "yes" } else { "no" },
            flags(&r.flags)
        );
    }
    for f in &v.failures {
        let _ = writeln!(out, "{:<20} failed: {}", f.class_id, f.message);
    }
    out
}

fn distinct_steps(cdf: &EmpiricalCdf) -> impl Iterator<Item = (f64, f64)> + '_ {
    let s = cdf.support();
    let m = s.len() as f64;
    (0..s.len())
        .filter(move |&i| i + 1 == s.len() || s[i + 1] != s[i])
        .map(move |i| (s[i], (i + 1) as f64 / m))
}

/// One row per jump of `Ḡ̂` and `F̄̂`: `class,cdf,t,value`.
pub fn write_ecdf_dump<'a>(
    writer: impl Write,
    estimates: impl IntoIterator<Item = (&'a str, &'a ClassEstimates)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["class", "cdf", "t", "value"])?;
    for (class, est) in estimates {
        for (name, cdf) in [("within", &est.g_bar_hat), ("between", &est.f_bar_hat)] {
            for (t, v) in distinct_steps(cdf) {
                w.write_record([class, name, &t.to_string(), &v.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("writing ecdf dump", e))
}

/// One row per replication of a study.
pub fn write_runs_csv(writer: impl Write, report: &StudyReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "run", "tau_hat", "t_star_hat", "a_alpha", "lemma2", "flags", "tp", "tn", "fp", "fn", "removed",
        "retained", "sensitivity", "specificity", "fdr", "for", "pct_delta",
    ])?;
    for r in &report.runs {
        let c = &r.counts;
        let m = &r.metrics;
        w.write_record([
            r.run.to_string(),
            r.tau_hat.to_string(),
            r.t_star_hat.to_string(),
            r.a_alpha.map_or_else(String::new, |a| a.to_string()),
            r.lemma2_satisfied.to_string(),
            flags(&r.flags),
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.removed().to_string(),
            c.retained().to_string(),
            opt(m.sensitivity),
            opt(m.specificity),
            m.fdr.to_string(),
            m.for_rate.to_string(),
            opt(m.pct_delta),
        ])?;
    }
    w.flush().map_err(|e| Error::io("writing run csv", e))
}

/// One cell of a results table: a study design and its aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub study: StudySpec,
    pub runs: usize,
    pub summary: StudySummary,
}

impl StudyRow {
    fn sort_key(&self) -> (u8, [u64; 5]) {
        let b = |x: f64| x.to_bits();
        match &self.study {
            StudySpec::Correlated(c) => (0, [b(c.p), c.n1 as u64, b(c.rho2), b(c.rho12), c.n as u64]),
            StudySpec::Independent(c) => (1, [c.n1 as u64, c.n2 as u64, 0, 0, 0]),
        }
    }
}

/// Design of a study with the replication bookkeeping blanked out, so
/// reports of the same design run in batches pool together.
fn design_key(spec: &StudySpec) -> Result<String> {
    let mut spec = spec.clone();
    match &mut spec {
        StudySpec::Correlated(c) => (c.seed, c.runs) = (0, 0),
        StudySpec::Independent(c) => (c.seed, c.runs) = (0, 0),
    }
    Ok(serde_json::to_string(&spec)?)
}

/// Pools reports of the same design and sorts the result by `p`, `N₁`,
/// `ρ₂`, `ρ₁₂`, `n`; independent studies follow, by `N₁`.
pub fn merge_reports(reports: Vec<StudyReport>) -> Result<Vec<StudyRow>> {
    let mut pooled: BTreeMap<String, StudyReport> = BTreeMap::new();
    for r in reports {
        let key = design_key(&r.study)?;
        match pooled.get_mut(&key) {
            Some(acc) => {
                let seed = |s: &StudySpec| match s {
                    StudySpec::Correlated(c) => c.seed,
                    StudySpec::Independent(c) => c.seed,
                };
                if seed(&acc.study) == seed(&r.study) {
                    log::warn!("pooling two reports of the same design and seed; runs are duplicates");
                }
                acc.runs.extend(r.runs);
            }
            None => {
                pooled.insert(key, r);
            }
        }
    }
    let mut rows = pooled
        .into_values()
        .map(|r| {
            Ok(StudyRow {
                runs: r.runs.len(),
                summary: StudySummary::from_runs(&r.runs)?,
                study: r.study,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(StudyRow::sort_key);
    Ok(rows)
}

/// Writes the merged tables into `dir` and returns the paths written:
///
/// * `table2.csv`: `n,N1,FDR,Spec` for `p = 0` designs
/// * `table3.csv`: `p,N1,rho2,n,FOR,pct_delta` for `p > 0`
/// * `table4.csv`: `p,N1,rho2,n,FDR,FOR,pct_delta,Sens,Spec`
/// * `fdr_vs_n.csv`, `spec_vs_n.csv`, `for_vs_n.csv`: `p,N1,rho12,rho2,n,mean,se`
/// * `independent.csv`: `N1,N2,runs,FDR,FDR_se`
pub fn write_tables(dir: &Path, rows: &[StudyRow]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("cannot create {}", dir.display()), e))?;
    let correlated: Vec<_> = rows
        .iter()
        .filter_map(|r| match &r.study {
            StudySpec::Correlated(c) => Some((c, &r.summary)),
            _ => None,
        })
        .collect();
    let mut written = Vec::new();
    let mut table = |name: &str, header: &[&str], body: Vec<Vec<String>>| -> Result<()> {
        let path = dir.join(name);
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(header)?;
        for row in body {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        written.push(path);
        Ok(())
    };

    let m = |s: &crate::metrics::MetricSummary| opt(s.mean);
    table(
        "table2.csv",
        &["n", "N1", "FDR", "Spec"],
        correlated
            .iter()
            .filter(|(c, _)| c.p == 0.0)
            .map(|(c, s)| vec![c.n.to_string(), c.n1.to_string(), m(&s.metrics.fdr), m(&s.metrics.specificity)])
            .collect(),
    )?;
    table(
        "table3.csv",
        &["p", "N1", "rho2", "n", "FOR", "pct_delta"],
        correlated
            .iter()
            .filter(|(c, _)| c.p > 0.0)
            .map(|(c, s)| {
                vec![
                    c.p.to_string(),
                    c.n1.to_string(),
                    c.rho2.to_string(),
                    c.n.to_string(),
                    m(&s.metrics.for_rate),
                    m(&s.metrics.pct_delta),
                ]
            })
            .collect(),
    )?;
    table(
        "table4.csv",
        &["p", "N1", "rho2", "n", "FDR", "FOR", "pct_delta", "Sens", "Spec"],
        correlated
            .iter()
            .map(|(c, s)| {
                vec![
                    c.p.to_string(),
                    c.n1.to_string(),
                    c.rho2.to_string(),
                    c.n.to_string(),
                    m(&s.metrics.fdr),
                    m(&s.metrics.for_rate),
                    m(&s.metrics.pct_delta),
                    m(&s.metrics.sensitivity),
                    m(&s.metrics.specificity),
                ]
            })
            .collect(),
    )?;
    type Pick = fn(&StudySummary) -> &crate::metrics::MetricSummary;
    let series: [(&str, Pick); 3] = [
        ("fdr_vs_n.csv", |s| &s.metrics.fdr),
        ("spec_vs_n.csv", |s| &s.metrics.specificity),
        ("for_vs_n.csv", |s| &s.metrics.for_rate),
    ];
    for (name, pick) in series {
        table(
            name,
            &["p", "N1", "rho12", "rho2", "n", "mean", "se"],
            correlated
                .iter()
                .map(|(c, s)| {
                    let x = pick(s);
                    vec![
                        c.p.to_string(),
                        c.n1.to_string(),
                        c.rho12.to_string(),
                        c.rho2.to_string(),
                        c.n.to_string(),
                        opt(x.mean),
                        opt(x.se),
                    ]
                })
                .collect(),
        )?;
    }
    table(
        "independent.csv",
        &["N1", "N2", "runs", "FDR", "FDR_se"],
        rows.iter()
            .filter_map(|r| match &r.study {
                StudySpec::Independent(c) => Some(vec![
                    c.n1.to_string(),
                    c.n2.to_string(),
                    r.runs.to_string(),
                    opt(r.summary.metrics.fdr.mean),
                    opt(r.summary.metrics.fdr.se),
                ]),
                _ => None,
            })
            .collect(),
    )?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::DistanceMetric;
    use crate::simulation::{run_study, StudyConfig};

    fn study(n: usize, seed: u64) -> StudyReport {
        run_study(&StudyConfig {
            n,
            n1: 10,
            n2: 30,
            rho1: 0.5,
            rho12: 0.2,
            rho2: 0.2,
            p: 0.0,
            runs: 2,
            alpha0: 0.05,
            seed,
            metric: DistanceMetric::Correlation,
        })
        .unwrap()
    }

    fn read(path: &Path) -> Vec<Vec<String>> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
        r.records().map(|x| x.unwrap().iter().map(str::to_owned).collect()).collect()
    }

    #[test]
    fn schema_version_is_checked() {
        let r = study(20, 1);
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(parse_study_report(&text).unwrap(), r);
        let bad = text.replace(STUDY_SCHEMA, "labelcheck.study/0");
        assert!(matches!(parse_study_report(&bad), Err(Error::Schema { .. })));
    }

    #[test]
    fn single_report_is_reshaped_unchanged() {
        let r = study(20, 1);
        let rows = merge_reports(vec![r.clone()]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].summary, r.summary);
        assert_eq!(rows[0].runs, 2);
    }

    #[test]
    fn reports_differing_in_n_give_rows_keyed_by_n() {
        let dir = tempfile::tempdir().unwrap();
        let rows = merge_reports(vec![study(30, 1), study(20, 1)]).unwrap();
        write_tables(dir.path(), &rows).unwrap();
        let t2 = read(&dir.path().join("table2.csv"));
        assert_eq!(t2[0], ["n", "N1", "FDR", "Spec"]);
        assert_eq!(t2.len(), 3);
        assert_eq!((t2[1][0].as_str(), t2[2][0].as_str()), ("20", "30"));
    }

    #[test]
    fn batches_of_one_design_pool() {
        let a = study(20, 1);
        let b = study(20, 2);
        let rows = merge_reports(vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].runs, 4);
        let all: Vec<_> = a.runs.iter().chain(&b.runs).cloned().collect();
        assert_eq!(rows[0].summary, StudySummary::from_runs(&all).unwrap());
    }

    #[test]
    fn run_csv_has_one_row_per_run() {
        let r = study(20, 3);
        let mut buf = Vec::new();
        write_runs_csv(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("run,tau_hat,t_star_hat"));
    }

    #[test]
    fn ecdf_dump_ends_at_one() {
        let within = EmpiricalCdf::new(vec![0.2, 0.2, 0.4]).unwrap();
        let steps: Vec<_> = distinct_steps(&within).collect();
        assert_eq!(steps, vec![(0.2, 2.0 / 3.0), (0.4, 1.0)]);
    }
}
