//! Aggregated sweep results and their CSV form.
//!
//! The file starts with `# key=value` lines naming the sweep variable and
//! the base learning constants, then a header and one row per grid point
//! and scheme. Missing aggregates (no successful run) are empty fields.

use crate::config::SweepVariable;
use crate::ExperimentError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use wpfl_core::{LearningParams, Scheme};

pub const HEADER: [&str; 7] = ["sweep_value", "scheme", "mean_T", "std_T", "mean_iters", "n_ok", "n_fail"];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub scheme: Scheme,
    /// Mean completion time over successful runs, s.
    pub mean_t: Option<f64>,
    pub std_t: Option<f64>,
    pub mean_iters: Option<f64>,
    pub n_ok: usize,
    pub n_fail: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub variable: SweepVariable,
    /// Learning constants of the base point.
    pub learning: LearningParams,
    pub rows: Vec<SummaryRow>,
}

impl SweepTable {
    /// Means of `scheme` in grid order; `None` where every run failed.
    pub fn means(&self, scheme: Scheme) -> Vec<Option<f64>> {
        self.rows.iter().filter(|r| r.scheme == scheme).map(|r| r.mean_t).collect()
    }
}

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv_string(table: &SweepTable) -> Result<String, ExperimentError> {
    if table.rows.is_empty() {
        return Err(ExperimentError::EmptyTable);
    }
    let lp = &table.learning;
    let mut out = String::new();
    let _ = writeln!(out, "# sweep={}", table.variable);
    for (k, v) in [("L", lp.l), ("gamma", lp.gamma), ("delta", lp.delta), ("xi", lp.xi), ("eps0", lp.eps0), ("a", lp.a), ("nu", lp.nu)] {
        let _ = writeln!(out, "# {k}={v}");
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| ExperimentError::Parse(e.to_string());
    w.write_record(HEADER).map_err(csv_err)?;
    for r in &table.rows {
        w.write_record([
            r.sweep_value.to_string(),
            r.scheme.tag().to_string(),
            field(r.mean_t),
            field(r.std_t),
            field(r.mean_iters),
            r.n_ok.to_string(),
            r.n_fail.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| ExperimentError::Parse(e.to_string()))?;
    out.push_str(&String::from_utf8(body).expect("fields are UTF-8"));
    Ok(out)
}

/// Writes `table` to `path`; nothing is written when the table is empty.
pub fn emit_csv(table: &SweepTable, path: &Path) -> Result<(), ExperimentError> {
    let text = to_csv_string(table)?;
    std::fs::write(path, text).map_err(|source| ExperimentError::Write { path: path.display().to_string(), source })
}

pub fn parse_csv(text: &str) -> Result<SweepTable, ExperimentError> {
    let bad = |m: String| ExperimentError::Parse(m);
    let mut meta = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let (k, v) = line[1..].trim().split_once('=').ok_or_else(|| bad(format!("bad comment line `{line}`")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| meta.get(k).ok_or_else(|| bad(format!("missing `# {k}=` line")));
    let num = |k: &str| get(k)?.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")));
    let variable = SweepVariable::from_name(get("sweep")?).ok_or_else(|| bad("unknown sweep variable".into()))?;
    let learning = LearningParams {
        l: num("L")?,
        gamma: num("gamma")?,
        delta: num("delta")?,
        xi: num("xi")?,
        eps0: num("eps0")?,
        a: num("a")?,
        nu: num("nu")?,
    };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let opt = |s: &str| -> Result<Option<f64>, ExperimentError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| bad(format!("`{s}`: {e}")))
        }
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| bad(e.to_string()))?;
        let count = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("`{s}`: {e}")));
        rows.push(SummaryRow {
            sweep_value: r[0].parse().map_err(|e| bad(format!("`{}`: {e}", &r[0])))?,
            scheme: r[1].parse().map_err(bad)?,
            mean_t: opt(&r[2])?,
            std_t: opt(&r[3])?,
            mean_iters: opt(&r[4])?,
            n_ok: count(&r[5])?,
            n_fail: count(&r[6])?,
        });
    }
    Ok(SweepTable { variable, learning, rows })
}
