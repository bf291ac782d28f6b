//! Report serialization. CSV columns:
//! `index,j,j_th,j_n,j_th_n,ratio,alarm,verdict,error`, floats as `{:.16e}`,
//! empty cells for failed trials.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::DetectionReport;

pub const CSV_HEADER: [&str; 9] = ["index", "j", "j_th", "j_n", "j_th_n", "ratio", "alarm", "verdict", "error"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn report_json(report: &DetectionReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_csv(report: &DetectionReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |source| Error::Csv { path: "<memory>".into(), source };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for t in &report.per_trial {
        let row: Vec<String> = match &t.outcome {
            Some(o) => vec![
                t.index.to_string(),
                fmt_f64(o.j),
                fmt_f64(o.j_th),
                fmt_f64(o.j_n),
                fmt_f64(o.j_th_n),
                o.ratio.map(fmt_f64).unwrap_or_default(),
                o.alarm.to_string(),
                o.verdict.clone(),
                String::new(),
            ],
            None => {
                let mut r = vec![t.index.to_string()];
                r.extend(std::iter::repeat_n(String::new(), 7));
                r.push(t.error.clone().unwrap_or_default());
                r
            }
        };
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

pub fn export_report(report: &DetectionReport, path: &Path, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Json => report_json(report).into_bytes(),
        Format::Csv => report_csv(report)?,
    };
    fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn load_report(path: &Path) -> Result<DetectionReport> {
    read_json(path)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}
