//! Comparison tables as CSV, markdown and plot data.
//!
//! Written tables list the subject column first and the reference second,
//! followed by any other columns, so a table re-read from CSV has
//! `subject = 0` and `reference = 1`.

use std::fmt::Write as _;
use std::path::Path;

use triage_core::eval::{format_improvement, round_one_decimal, Column};
use triage_core::ComparisonTable;

use super::published::{is_published, PUBLISHED_NOTE, PUBLISHED_TAG};
use crate::error::{BenchError, Result};

/// Copy of `table` with subject and reference moved to the front.
pub fn canonical(table: &ComparisonTable) -> ComparisonTable {
    let mut columns = vec![
        table.columns[table.subject].clone(),
        table.columns[table.reference].clone(),
    ];
    columns.extend(
        table
            .columns
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != table.subject && *i != table.reference)
            .map(|(_, c)| c.clone()),
    );
    ComparisonTable {
        project: table.project.clone(),
        columns,
        subject: 0,
        reference: 1,
    }
}

fn improve_cell(v: Option<f64>) -> String {
    match v.map(round_one_decimal) {
        Some(v) => format!("{v:.1}"),
        None => "n/a".into(),
    }
}

/// `k,<column>...,improve_pct`. Rates use the shortest representation that
/// reads back to the same value.
pub fn to_csv(table: &ComparisonTable) -> String {
    let table = canonical(table);
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["k".to_string()];
    header.extend(table.columns.iter().map(|c| c.name.clone()));
    header.push("improve_pct".into());
    w.write_record(&header).expect("in-memory write");
    for (i, imp) in table.improvements().into_iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(table.columns.iter().map(|c| c.rates[i].to_string()));
        row.push(improve_cell(imp));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

pub fn from_csv(project: &str, text: &str) -> std::result::Result<ComparisonTable, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let n = header.len();
    if n < 4 || &header[0] != "k" || &header[n - 1] != "improve_pct" {
        return Err("expected header k,<columns>,improve_pct".into());
    }
    let mut columns: Vec<Column> = header
        .iter()
        .skip(1)
        .take(n - 2)
        .map(|name| Column {
            name: name.to_string(),
            rates: Vec::new(),
        })
        .collect();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec[0].parse::<usize>().ok() != Some(i + 1) {
            return Err(format!("row {} has k = {}", i + 1, &rec[0]));
        }
        for (c, col) in columns.iter_mut().enumerate() {
            let v = rec[c + 1].parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1))?;
            col.rates.push(v);
        }
    }
    ComparisonTable::new(project, columns, 0, 1).map_err(|e| e.to_string())
}

/// Paper-style table: one row per K, rates to four decimals, improvement
/// of the subject over the reference in the last column.
pub fn to_markdown(table: &ComparisonTable) -> String {
    let table = canonical(table);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Hit@K on {} ({} vs {})\n",
        table.project, table.columns[0].name, table.columns[1].name
    );
    out.push_str("| K |");
    for c in &table.columns {
        let _ = write!(out, " {} |", c.name);
    }
    out.push_str(" Improve |\n|---|");
    for _ in &table.columns {
        out.push_str("---|");
    }
    out.push_str("---|\n");
    for (i, imp) in table.improvements().into_iter().enumerate() {
        let _ = write!(out, "| {} |", i + 1);
        for c in &table.columns {
            let _ = write!(out, " {:.4} |", c.rates[i]);
        }
        let _ = writeln!(out, " {} |", format_improvement(imp));
    }
    if table.columns.iter().any(is_published) {
        let _ = writeln!(out, "\nColumns tagged{PUBLISHED_TAG}: {PUBLISHED_NOTE}.");
    }
    for c in &table.columns {
        if let Some(note) = method_note(&c.name) {
            let _ = writeln!(out, "\n{}: {note}.", c.name);
        }
    }
    out
}

/// Notes for measured columns whose method differs from the published one.
fn method_note(name: &str) -> Option<&'static str> {
    match name {
        "cbr" => Some("one-vs-rest logistic regression over bag-of-words stands in for the SVM classifier"),
        "sft" => Some("softmax regression trained on the supervised pairs, not a fine-tuned language model"),
        _ => None,
    }
}

/// Long-format `k,assigner,rate` rows for external plotting.
pub fn to_plot_csv(table: &ComparisonTable) -> String {
    let table = canonical(table);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "assigner", "rate"]).expect("in-memory write");
    for c in &table.columns {
        for (i, rate) in c.rates.iter().enumerate() {
            w.write_record([(i + 1).to_string(), c.name.clone(), rate.to_string()])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let mut w = super::create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| BenchError::io(path, e))?;
    super::finish(w, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Plot,
}

pub fn emit_report(table: &ComparisonTable, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => to_csv(table),
        ReportFormat::Markdown => to_markdown(table),
        ReportFormat::Plot => to_plot_csv(table),
    };
    write_text(path, &text)
}
