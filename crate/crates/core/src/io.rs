//! CSV ingestion and export of intensity data and distance matrices.
//!
//! Both formats start with a header row of instance IDs followed by a row of
//! class labels. An empty label or `NA` marks an unassigned instance. The
//! intensity format then has one row per sample (`n × N`); the distance
//! format has the `N × N` matrix.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{ClassLabeling, DataMatrix, DistanceMatrix};
use crate::error::{Error, Result};

/// Largest asymmetry tolerated in a distance file.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Instances with their labels, as read from a file.
#[derive(Debug, Clone)]
pub struct LabeledData {
    pub data: DataMatrix,
    pub labels: Vec<Option<String>>,
}

impl LabeledData {
    pub fn labeling(&self) -> ClassLabeling {
        ClassLabeling::from_labels(&self.labels)
    }
}

#[derive(Debug, Clone)]
pub struct LabeledDistances {
    pub distances: DistanceMatrix,
    pub labels: Vec<Option<String>>,
}

impl LabeledDistances {
    pub fn labeling(&self) -> ClassLabeling {
        ClassLabeling::from_labels(&self.labels)
    }
}

fn parse_label(cell: &str, mega_label: Option<&str>) -> Option<String> {
    let cell = cell.trim();
    if cell.is_empty() || cell == "NA" || Some(cell) == mega_label {
        None
    } else {
        Some(cell.to_owned())
    }
}

struct Rows {
    source: String,
    ids: Vec<String>,
    labels: Vec<Option<String>>,
    /// `(line, values)` of every numeric row.
    body: Vec<(u64, Vec<f64>)>,
}

fn parse_error(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.into(),
        line,
        message: message.into(),
    }
}

fn read_rows(reader: impl Read, source: &str, mega_label: Option<&str>) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let mut next = |what: &str| -> Result<(u64, csv::StringRecord)> {
        match records.next() {
            Some(r) => {
                let r = r?;
                let line = r.position().map_or(0, |p| p.line());
                Ok((line, r))
            }
            None => Err(parse_error(source, 0, format!("missing {what} row"))),
        }
    };
    let (_, header) = next("instance id")?;
    let ids: Vec<String> = header.iter().map(|s| s.trim().to_owned()).collect();
    let width = ids.len();
    if let Some(pos) = ids.iter().position(String::is_empty) {
        return Err(parse_error(source, 1, format!("empty instance id in column {}", pos + 1)));
    }
    let (line, labels) = next("class label")?;
    if labels.len() != width {
        return Err(parse_error(
            source,
            line,
            format!("{} labels for {width} instances", labels.len()),
        ));
    }
    let labels = labels.iter().map(|c| parse_label(c, mega_label)).collect();

    let mut body = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(parse_error(
                source,
                line,
                format!("{} fields, expected {width}", record.len()),
            ));
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        parse_error(
                            source,
                            line,
                            format!("column {} (`{}`): `{cell}` is not a finite number", c + 1, ids[c]),
                        )
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        body.push((line, values));
    }
    Ok(Rows {
        source: source.to_owned(),
        ids,
        labels,
        body,
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(format!("cannot open {}", path.display()), e))
}

/// Parses the intensity format from any reader; `source` names it in errors.
pub fn parse_intensity_csv(reader: impl Read, source: &str, mega_label: Option<&str>) -> Result<LabeledData> {
    let rows = read_rows(reader, source, mega_label)?;
    let n = rows.body.len();
    if n < 2 {
        return Err(parse_error(
            &rows.source,
            0,
            format!("{n} sample rows; at least 2 are required"),
        ));
    }
    let width = rows.ids.len();
    let mut values = vec![0.0; n * width];
    for (l, (_, row)) in rows.body.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            values[i * n + l] = v;
        }
    }
    Ok(LabeledData {
        data: DataMatrix::from_instance_major(n, rows.ids, values)?,
        labels: rows.labels,
    })
}

pub fn read_intensity_csv(path: &Path, mega_label: Option<&str>) -> Result<LabeledData> {
    parse_intensity_csv(open(path)?, &path.display().to_string(), mega_label)
}

/// Parses the distance format; the matrix is validated for a zero diagonal,
/// symmetry within [`SYMMETRY_TOL`] and non-negative entries.
pub fn parse_distance_csv(reader: impl Read, source: &str, mega_label: Option<&str>) -> Result<LabeledDistances> {
    let rows = read_rows(reader, source, mega_label)?;
    let n = rows.ids.len();
    if rows.body.len() != n {
        return Err(parse_error(
            &rows.source,
            rows.body.last().map_or(2, |r| r.0),
            format!("{} matrix rows for {n} instances", rows.body.len()),
        ));
    }
    let entries = rows.body.into_iter().flat_map(|(_, r)| r).collect();
    Ok(LabeledDistances {
        distances: DistanceMatrix::from_entries(rows.ids, entries, SYMMETRY_TOL)?,
        labels: rows.labels,
    })
}

pub fn read_distance_csv(path: &Path, mega_label: Option<&str>) -> Result<LabeledDistances> {
    parse_distance_csv(open(path)?, &path.display().to_string(), mega_label)
}

fn label_cells(labels: &[Option<String>]) -> Vec<&str> {
    labels.iter().map(|l| l.as_deref().unwrap_or("")).collect()
}

/// Writes data in the intensity format. Values use the shortest
/// representation that parses back to the same double.
pub fn write_intensity_csv(writer: impl Write, data: &DataMatrix, labels: &[Option<String>]) -> Result<()> {
    if labels.len() != data.instances() {
        return Err(Error::InvalidInput("one label per instance required".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.ids())?;
    w.write_record(label_cells(labels))?;
    for l in 0..data.samples() {
        w.write_record((0..data.instances()).map(|i| data.column(i)[l].to_string()))?;
    }
    w.flush().map_err(|e| Error::io("writing intensity csv", e))
}

pub fn write_distance_csv(writer: impl Write, d: &DistanceMatrix, labels: &[Option<String>]) -> Result<()> {
    if labels.len() != d.size() {
        return Err(Error::InvalidInput("one label per instance required".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(d.ids())?;
    w.write_record(label_cells(labels))?;
    for i in 0..d.size() {
        w.write_record(d.row(i).iter().map(f64::to_string))?;
    }
    w.flush().map_err(|e| Error::io("writing distance csv", e))
}
