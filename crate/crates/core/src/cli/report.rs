use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ReportFormat;
use crate::error::{Error, Result};
use crate::types::EvalReport;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub inputs: Vec<InputDigest>,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(paths: &[&Path], config: &impl Serialize) -> Result<Self> {
        let inputs = paths
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let config = serde_json::to_value(config).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self { inputs, config })
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    body: &'a T,
    provenance: &'a Provenance,
}

pub fn json_document<T: Serialize>(body: &T, provenance: &Provenance) -> Result<String> {
    let mut s = serde_json::to_string(&Envelope { body, provenance }).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `section,key,value` rows.
pub fn eval_csv(report: &EvalReport) -> String {
    let mut out = String::from("section,key,value\n");
    for (m, rho) in &report.per_method_spearman {
        out += &format!("spearman,{},{rho}\n", csv_field(m));
    }
    for m in &report.undefined_methods {
        out += &format!("spearman,{},\n", csv_field(m));
    }
    for (name, v) in [
        ("fisher_average", report.fisher_average),
        ("human_to_human", report.human_to_human),
        ("pairwise_accuracy", report.pairwise_accuracy),
        ("ranking_agreement", report.ranking_agreement),
    ] {
        if v.is_some() {
            out += &format!("summary,{name},{}\n", fmt_opt(v));
        }
    }
    for r in &report.ranking {
        out += &format!("rank,{},{}:{}\n", csv_field(&r.method), r.rank, r.score);
    }
    out
}

pub fn render_eval(report: &EvalReport, provenance: &Provenance, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Jsonl => json_document(report, provenance),
        ReportFormat::Csv => Ok(eval_csv(report)),
    }
}

/// Human-readable summary for stderr.
pub fn eval_table(report: &EvalReport) -> String {
    let mut out = String::new();
    if !report.per_method_spearman.is_empty() || !report.undefined_methods.is_empty() {
        out += &format!("{:<24} {:>10}\n", "method", "spearman");
        for (m, rho) in &report.per_method_spearman {
            out += &format!("{m:<24} {rho:>10.4}\n");
        }
        for m in &report.undefined_methods {
            out += &format!("{m:<24} {:>10}\n", "undefined");
        }
    }
    if let Some(f) = report.fisher_average {
        out += &format!("fisher average: {f:.4}\n");
    }
    if let Some(h) = report.human_to_human {
        out += &format!("human-to-human: {h:.4}\n");
    }
    if let Some(a) = report.pairwise_accuracy {
        out += &format!("pairwise accuracy: {a:.4}\n");
    }
    if !report.ranking.is_empty() {
        out += &format!("{:>4} {:<24} {:>10}\n", "rank", "method", "score");
        for r in &report.ranking {
            out += &format!("{:>4} {:<24} {:>10.4}\n", r.rank, r.method, r.score);
        }
    }
    if let Some(a) = report.ranking_agreement {
        out += &format!("ranking agreement: {a:.4}\n");
    }
    out
}

/// Writes to `out`, or stdout when absent.
pub fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}
