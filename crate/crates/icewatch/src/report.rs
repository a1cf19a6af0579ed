//! Plain-text rendering of experiment reports.

use std::fmt::Write;

use icewatch_core::pipeline::{ExperimentReport, ReportRow};

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn line(row: &ReportRow) -> [String; 7] {
    [
        row.pipeline.to_string(),
        row.algorithm.to_string(),
        row.segment.to_string(),
        format!("{:.2}", row.cv_mean),
        format!("{:.2}", row.cv_std),
        cell(row.test_mean),
        cell(row.test_std),
    ]
}

/// Score table with one row per (pipeline, algorithm, segment).
pub fn render_text(report: &ExperimentReport) -> String {
    let p = &report.provenance;
    let mut out = String::new();
    let runs = report.rows.first().map_or(0, |r| r.n_runs);
    writeln!(
        out,
        "train {} / test {}, {} runs, master seed {}",
        p.train_dataset, p.test_dataset, runs, p.master_seed
    )
    .unwrap();
    if let Some(h) = &p.config_hash {
        writeln!(out, "config sha256 {h}").unwrap();
    }
    out.push('\n');

    let header = [
        "pipeline",
        "algorithm",
        "segment",
        "cv mean",
        "cv std",
        "test mean",
        "test std",
    ];
    let body: Vec<[String; 7]> = report.rows.iter().map(line).collect();
    let mut width = header.map(str::len);
    for r in &body {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut emit = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i < 3 {
                    format!("{c:<w$}", w = width[i])
                } else {
                    format!("{c:>w$}", w = width[i])
                }
            })
            .collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).unwrap();
    };
    emit(&header.map(String::from));
    emit(&width.map(|w| "-".repeat(w)));
    for r in &body {
        emit(r);
    }

    if let Some(first) = report.test_flows.first() {
        let auto: usize = report.test_flows.iter().map(|f| f.auto_normal).sum();
        let total: usize = report.test_flows.iter().map(|f| f.total).sum();
        writeln!(
            out,
            "\ntest gate: {} records, {} auto-normal ({:.1}%), {} low, {} high",
            first.total,
            first.auto_normal,
            100.0 * auto as f64 / total.max(1) as f64,
            first.low,
            first.high
        )
        .unwrap();
    }
    out
}
