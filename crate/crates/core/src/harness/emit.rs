//! Record files in CSV or JSON lines.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::algorithms::RunRow;
use crate::harness::OutputFormat;
use crate::{Error, Result};

/// Fixed leading columns; an optional problem-specific column follows.
pub const RECORD_COLUMNS: [&str; 9] = [
    "solver",
    "seed",
    "t",
    "oracle_count",
    "objective",
    "gap",
    "wall_nanos",
    "dist_gap",
    "dual_norm",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub solver: String,
    pub seed: u64,
    pub row: RunRow,
}

/// 17 significant digits, enough to parse back to the same `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn opt_csv(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn json_num(v: f64) -> String {
    if v.is_finite() {
        format_float(v)
    } else {
        "null".to_string()
    }
}

fn opt_json(v: Option<f64>) -> String {
    v.map(json_num).unwrap_or_else(|| "null".to_string())
}

/// Writes `rows` to `out`. `aux` names the extra column, if the rows carry one.
pub fn emit_records<W: Write>(rows: &[RecordRow], aux: Option<&str>, format: OutputFormat, out: W) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header: Vec<&str> = RECORD_COLUMNS.to_vec();
            header.extend(aux);
            w.write_record(&header)?;
            for r in rows {
                let mut fields = vec![
                    r.solver.clone(),
                    r.seed.to_string(),
                    r.row.t.to_string(),
                    r.row.oracle_count.to_string(),
                    opt_csv(r.row.objective),
                    opt_csv(r.row.gap),
                    r.row.wall_nanos.to_string(),
                    opt_csv(r.row.dist_gap),
                    format_float(r.row.dual_norm),
                ];
                if aux.is_some() {
                    fields.push(opt_csv(r.row.aux));
                }
                w.write_record(&fields)?;
            }
            w.flush()
        }
        OutputFormat::JsonLines => {
            let mut out = out;
            for r in rows {
                write!(
                    out,
                    "{{\"solver\":{},\"seed\":{},\"t\":{},\"oracle_count\":{},\"objective\":{},\"gap\":{},\"wall_nanos\":{},\"dist_gap\":{},\"dual_norm\":{}",
                    serde_json::Value::String(r.solver.clone()),
                    r.seed,
                    r.row.t,
                    r.row.oracle_count,
                    opt_json(r.row.objective),
                    opt_json(r.row.gap),
                    r.row.wall_nanos,
                    opt_json(r.row.dist_gap),
                    json_num(r.row.dual_norm),
                )?;
                if let Some(name) = aux {
                    write!(out, ",{}:{}", serde_json::Value::String(name.to_string()), opt_json(r.row.aux))?;
                }
                writeln!(out, "}}")?;
            }
            out.flush()
        }
    }
}

/// [`emit_records`] into a new file at `path`.
pub fn write_records(path: &Path, rows: &[RecordRow], aux: Option<&str>, format: OutputFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    emit_records(rows, aux, format, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`emit_records`]. Returns the rows and the extra column name.
pub fn parse_records_csv<R: Read>(reader: R) -> Result<(Vec<RecordRow>, Option<String>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    for (k, name) in RECORD_COLUMNS.iter().enumerate() {
        if headers.get(k) != Some(*name) {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    let aux = headers.get(RECORD_COLUMNS.len()).map(str::to_string);
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let int = |c: usize| -> Result<u64> {
            rec[c]
                .parse()
                .map_err(|_| parse_err(line, format!("column `{}`: bad integer `{}`", RECORD_COLUMNS[c], &rec[c])))
        };
        let float = |c: usize| -> Result<f64> {
            rec[c]
                .parse()
                .map_err(|_| parse_err(line, format!("column {c}: bad number `{}`", &rec[c])))
        };
        let opt = |c: usize| -> Result<Option<f64>> {
            if rec.get(c).is_none_or(str::is_empty) {
                Ok(None)
            } else {
                float(c).map(Some)
            }
        };
        rows.push(RecordRow {
            solver: rec[0].to_string(),
            seed: int(1)?,
            row: RunRow {
                t: int(2)?,
                oracle_count: int(3)?,
                objective: opt(4)?,
                gap: opt(5)?,
                wall_nanos: int(6)?,
                dist_gap: opt(7)?,
                dual_norm: float(8)?,
                aux: if aux.is_some() { opt(9)? } else { None },
            },
        });
    }
    Ok((rows, aux))
}
