//! Per-round metrics and the question audit log, plus their file formats.
//!
//! `metrics.csv` columns:
//! `round,questions_asked,questions_this_round,accuracy,fraction_exact,mean_remaining,mean_selected_entropy,selected_per_class`
//! where `selected_per_class` is a `;`-joined count per atomic class and empty
//! values mean "not available".
//!
//! `audit.log` is CSV with header `t,phase,example,composite,answer`; `phase`
//! is `warm` or `active` and `answer` is `0` or `1`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::acquisition::Question;
use crate::error::{Error, Result};
use crate::labels::Answer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    /// Total questions charged so far, warm-start included.
    pub questions_asked: usize,
    pub questions_this_round: usize,
    /// Top-1 accuracy on the holdout split; absent when there is no holdout.
    pub accuracy: Option<f64>,
    pub fraction_exact: f64,
    pub mean_remaining: f64,
    /// Mean predictive entropy (full softmax) of the examples questioned this
    /// round, per question; absent when no model-driven question was asked.
    pub mean_selected_entropy: Option<f64>,
    /// Questions this round by the true class of the questioned example;
    /// empty when true classes are unknown.
    pub selected_per_class: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warm,
    Active,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub t: usize,
    pub phase: Phase,
    pub question: Question,
    pub answer: Answer,
}

const METRICS_HEADER: &str = "round,questions_asked,questions_this_round,accuracy,fraction_exact,mean_remaining,mean_selected_entropy,selected_per_class";
const AUDIT_HEADER: &str = "t,phase,example,composite,answer";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(mut w: W, history: &[RoundMetrics]) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for m in history {
        let per_class: Vec<String> = m.selected_per_class.iter().map(usize::to_string).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            m.round,
            m.questions_asked,
            m.questions_this_round,
            opt(m.accuracy),
            m.fraction_exact,
            m.mean_remaining,
            opt(m.mean_selected_entropy),
            per_class.join(";")
        )?;
    }
    Ok(())
}

pub fn metrics_csv(history: &[RoundMetrics]) -> String {
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, history).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

pub fn metrics_json(history: &[RoundMetrics]) -> String {
    serde_json::to_string_pretty(history).expect("metrics serialize")
}

pub fn write_audit_line<W: Write>(mut w: W, e: &AuditEntry) -> Result<()> {
    writeln!(
        w,
        "{},{},{},{},{}",
        e.t,
        match e.phase {
            Phase::Warm => "warm",
            Phase::Active => "active",
        },
        e.question.example,
        e.question.composite,
        e.answer.bit()
    )?;
    Ok(())
}

pub fn write_audit<W: Write>(mut w: W, audit: &[AuditEntry]) -> Result<()> {
    writeln!(w, "{AUDIT_HEADER}")?;
    for e in audit {
        write_audit_line(&mut w, e)?;
    }
    Ok(())
}

pub fn audit_text(audit: &[AuditEntry]) -> String {
    let mut buf = Vec::new();
    write_audit(&mut buf, audit).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

/// Parses an audit log. A truncated final line (torn write) is ignored.
pub fn read_audit<R: BufRead>(r: R) -> Result<Vec<AuditEntry>> {
    let mut out = Vec::new();
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if i == 0 && line == AUDIT_HEADER {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        match parse_audit_line(line) {
            Ok(e) => out.push(e),
            Err(_) if i == last => break,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn parse_audit_line(line: &str) -> Result<AuditEntry> {
    let bad = || Error::Parse(format!("bad audit line `{line}`"));
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 5 {
        return Err(bad());
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
    Ok(AuditEntry {
        t: num(f[0])?,
        phase: match f[1] {
            "warm" => Phase::Warm,
            "active" => Phase::Active,
            _ => return Err(bad()),
        },
        question: Question {
            example: num(f[2])?,
            composite: num(f[3])?,
        },
        answer: match f[4] {
            "0" => Answer::No,
            "1" => Answer::Yes,
            _ => return Err(bad()),
        },
    })
}
