//! CSV ingestion of external point sets and table output.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Reads a point set from a CSV file; see [`read_csv_dataset`].
pub fn load_csv_dataset(path: &Path) -> Result<PointCloud> {
    let file = File::open(path)?;
    read_csv_dataset(BufReader::new(file))
}

/// Rectangular numeric rows, optionally preceded by a header. A header
/// column named `label` holds integer labels and one named `t` holds
/// intrinsic coordinates; neither counts towards the ambient dimension.
pub fn read_csv_dataset(input: impl Read) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);

    let mut label_col = None;
    let mut t_col = None;
    let mut width = None;
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut t = Vec::new();
    let mut rows = 0usize;

    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(idx + 1, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let first_data = width.is_none();
        if first_data && record.iter().any(|c| c.parse::<f64>().is_err()) {
            for (c, name) in record.iter().enumerate() {
                match name.to_ascii_lowercase().as_str() {
                    "label" if label_col.is_none() => label_col = Some(c),
                    "t" if t_col.is_none() => t_col = Some(c),
                    "label" | "t" => {
                        return Err(Error::parse(line, format!("duplicate {name:?} column")));
                    }
                    _ => {}
                }
            }
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::parse(
                line,
                format!("expected {w} columns, found {}", record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_col {
                let v: i64 = cell
                    .parse()
                    .map_err(|_| Error::parse(line, format!("label {cell:?} is not an integer")))?;
                labels.push(v);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::parse(line, format!("cell {cell:?} is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(line, format!("cell {cell:?} is not finite")));
            }
            if Some(c) == t_col {
                t.push(v);
            } else {
                coords.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::parse(1, "no data rows"));
    }
    let dim = width.unwrap_or(0) - usize::from(label_col.is_some()) - usize::from(t_col.is_some());
    if dim == 0 {
        return Err(Error::parse(1, "no coordinate columns"));
    }
    let mut cloud = PointCloud::new(dim, coords).map_err(|e| Error::parse(1, e.to_string()))?;
    if label_col.is_some() {
        cloud = cloud.with_labels(labels)?;
    }
    if t_col.is_some() {
        cloud = cloud.with_intrinsic(t)?;
    }
    Ok(cloud)
}

/// `t,x1,...,xD[,label]`, with `t` and `label` only when present.
pub fn write_points_csv(cloud: &PointCloud, out: impl Write) -> Result<()> {
    let mut header = Vec::new();
    if cloud.intrinsic().is_some() {
        header.push("t".to_string());
    }
    header.extend((1..=cloud.dim()).map(|k| format!("x{k}")));
    if cloud.labels().is_some() {
        header.push("label".to_string());
    }
    let mut table = Table::new(header);
    for i in 0..cloud.len() {
        let mut row = Vec::new();
        if let Some(t) = cloud.intrinsic() {
            row.push(t[i].to_string());
        }
        row.extend(cloud.point(i).iter().map(|v| v.to_string()));
        if let Some(l) = cloud.labels() {
            row.push(l[i].to_string());
        }
        table.push(row);
    }
    table.write(out)
}

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn with_columns(names: &[&str]) -> Self {
        Self::new(names.iter().map(|s| s.to_string()).collect())
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(csv_io)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write(std::io::BufWriter::new(File::create(path)?))
    }

    /// Reads a headed CSV without interpreting cells.
    pub fn read(input: impl Read) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut table = Table::new(header);
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(i + 2, e.to_string()))?;
            table.rows.push(rec.iter().map(String::from).collect());
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
