//! LIBSVM and CSV readers.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use super::gdro::GroupedDataset;
use super::pauc::PaucDataset;
use crate::{Error, Result};

/// Sparse rows with 0-based feature indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LibsvmData {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<f64>,
    pub dim: usize,
}

impl LibsvmData {
    pub fn dense_row(&self, r: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(j, v) in &self.rows[r] {
            out[j] = v;
        }
        out
    }

    /// Splits by label sign: `> 0` positive, otherwise negative.
    pub fn to_pauc(&self, alpha: f64) -> Result<PaucDataset> {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for r in 0..self.rows.len() {
            if self.labels[r] > 0.0 {
                pos.push(self.dense_row(r));
            } else {
                neg.push(self.dense_row(r));
            }
        }
        PaucDataset::new(pos, neg, alpha)
    }
}

/// Parses `label idx:val idx:val ...` lines with strictly increasing 1-based indices.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<LibsvmData> {
    let mut data = LibsvmData::default();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("non-numeric label `{label_tok}`")))?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, got `{tok}`")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad index `{idx}`")))?;
            let val: f64 = val.parse().map_err(|_| err(format!("bad value `{val}`")))?;
            if idx == 0 || idx <= last {
                return Err(err(format!("index {idx} is not strictly increasing from 1")));
            }
            last = idx;
            row.push((idx - 1, val));
        }
        data.dim = data.dim.max(last);
        data.rows.push(row);
        data.labels.push(label);
    }
    Ok(data)
}

/// Writes rows back in LIBSVM format with round-trip float formatting.
pub fn write_libsvm<W: Write>(data: &LibsvmData, mut out: W) -> std::io::Result<()> {
    for (row, label) in data.rows.iter().zip(&data.labels) {
        write!(out, "{label:?}")?;
        for &(j, v) in row {
            write!(out, " {}:{v:?}", j + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub group_column: String,
    pub label_column: String,
    /// Groups with fewer rows are dropped.
    pub min_group_size: usize,
    /// Groups with fewer rows are kept but reported.
    pub warn_group_size: usize,
}

impl CsvOptions {
    pub fn new(group_column: &str, label_column: &str) -> Self {
        CsvOptions {
            group_column: group_column.to_string(),
            label_column: label_column.to_string(),
            min_group_size: 1,
            warn_group_size: 50,
        }
    }
}

/// Reads a headered table; every column other than group and label is a
/// numeric feature. Labels in `{0, 1}` become `{-1, +1}`. Groups are numbered
/// in order of first appearance. Returns the dataset and warnings about small
/// groups.
pub fn read_grouped_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<(GroupedDataset, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let g_col = find(&options.group_column)?;
    let y_col = find(&options.label_column)?;

    let mut group_ids: HashMap<String, usize> = HashMap::new();
    let mut group_names: Vec<String> = Vec::new();
    let mut rows: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let err = |message: String| Error::Parse { line, message };
        let label = match &record[y_col] {
            "1" | "+1" | "1.0" => 1.0,
            "0" | "-1" | "0.0" | "-1.0" => -1.0,
            other => return Err(err(format!("label must be +-1 or 0/1, got `{other}`"))),
        };
        let key = record[g_col].to_string();
        let g = *group_ids.entry(key.clone()).or_insert_with(|| {
            group_names.push(key);
            group_names.len() - 1
        });
        let mut feats = Vec::with_capacity(record.len().saturating_sub(2));
        for (c, field) in record.iter().enumerate() {
            if c == g_col || c == y_col {
                continue;
            }
            feats.push(
                field
                    .parse::<f64>()
                    .map_err(|_| err(format!("column `{}`: non-numeric `{field}`", &headers[c])))?,
            );
        }
        rows.push((feats, label, g));
    }

    let mut sizes = vec![0usize; group_names.len()];
    for r in &rows {
        sizes[r.2] += 1;
    }
    let mut warnings = Vec::new();
    let mut remap = vec![None; group_names.len()];
    let mut next = 0;
    for (g, &size) in sizes.iter().enumerate() {
        if size < options.min_group_size {
            warnings.push(format!("group `{}` dropped: {size} rows", group_names[g]));
            continue;
        }
        if size < options.warn_group_size {
            warnings.push(format!("group `{}` has only {size} rows", group_names[g]));
        }
        remap[g] = Some(next);
        next += 1;
    }
    if next == 0 {
        return Err(Error::EmptyGroup(0));
    }
    let (mut features, mut labels, mut group_of) = (Vec::new(), Vec::new(), Vec::new());
    for (f, y, g) in rows {
        if let Some(g) = remap[g] {
            features.push(f);
            labels.push(y);
            group_of.push(g);
        }
    }
    Ok((GroupedDataset::new(features, labels, group_of)?, warnings))
}

/// [`read_grouped_csv`] with warnings sent to the log.
pub fn load_grouped_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<GroupedDataset> {
    let (data, warnings) = read_grouped_csv(reader, options)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(data)
}

/// Writes a dataset as CSV with columns `group,label,f0,f1,...`.
pub fn write_grouped_csv<W: Write>(data: &GroupedDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    let mut header = vec!["group".to_string(), "label".to_string()];
    header.extend((0..data.dim()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(to_err)?;
    for s in 0..data.n_samples() {
        let mut rec = vec![data.group_of[s].to_string(), format!("{}", data.labels[s] as i64)];
        rec.extend(data.features[s].iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })
}
