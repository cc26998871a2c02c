//! Evaluation reports as CSV and as an aligned text table.
//!
//! Columns follow the usual benchmark order: MOTA IDF1 IDS MT ML Frag, then
//! the remaining counts.

use std::fmt::Write as _;

use trackpool_core::metrics::{EvalReport, SequenceReport};

pub const COLUMNS: [&str; 11] = ["MOTA", "IDF1", "IDS", "MT", "ML", "Frag", "FP", "FN", "IDP", "IDR", "GT"];

/// One row of numbers in [`COLUMNS`] order. Rates are fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub mota: f64,
    pub idf1: f64,
    pub ids: usize,
    pub mt: usize,
    pub ml: usize,
    pub frag: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idp: f64,
    pub idr: f64,
    pub gt_tracks: usize,
}

impl Row {
    pub fn overall(name: &str, r: &EvalReport) -> Self {
        Row {
            name: name.into(),
            mota: r.mota,
            idf1: r.idf1,
            ids: r.idsw,
            mt: r.mt,
            ml: r.ml,
            frag: r.frag,
            fp: r.fp,
            fn_: r.fn_,
            idp: r.idp,
            idr: r.idr,
            gt_tracks: r.num_gt_tracks,
        }
    }

    pub fn sequence(s: &SequenceReport) -> Self {
        Row {
            name: s.name.clone(),
            mota: s.clear.mota,
            idf1: s.identity.idf1,
            ids: s.clear.idsw,
            mt: s.clear.mt,
            ml: s.clear.ml,
            frag: s.clear.frag,
            fp: s.clear.fp,
            fn_: s.clear.fn_,
            idp: s.identity.idp,
            idr: s.identity.idr,
            gt_tracks: s.clear.num_gt_tracks,
        }
    }

    fn pct(n: usize, d: usize) -> f64 {
        100.0 * n as f64 / d.max(1) as f64
    }
}

/// Per-sequence rows followed by an `OVERALL` row.
pub fn rows(report: &EvalReport) -> Vec<Row> {
    let mut out: Vec<Row> = report.sequences.iter().map(Row::sequence).collect();
    out.push(Row::overall("OVERALL", report));
    out
}

/// Machine-readable form: raw fractions and counts.
pub fn to_csv(rows: &[Row]) -> String {
    let mut out = format!("name,{}\n", COLUMNS.join(","));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.name, r.mota, r.idf1, r.ids, r.mt, r.ml, r.frag, r.fp, r.fn_, r.idp, r.idr, r.gt_tracks
        );
    }
    out
}

/// Human-readable form: rates in percent, MT and ML as percentages of the
/// ground-truth tracks.
pub fn to_table(rows: &[Row]) -> String {
    let header: Vec<String> = std::iter::once(String::new())
        .chain(COLUMNS.iter().map(|c| c.to_string()))
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                format!("{:.1}", 100.0 * r.mota),
                format!("{:.1}", 100.0 * r.idf1),
                r.ids.to_string(),
                format!("{:.1}%", Row::pct(r.mt, r.gt_tracks)),
                format!("{:.1}%", Row::pct(r.ml, r.gt_tracks)),
                r.frag.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                format!("{:.1}", 100.0 * r.idp),
                format!("{:.1}", 100.0 * r.idr),
                r.gt_tracks.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&body) {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { format!("{c:<w$}", w = widths[k]) } else { format!("{c:>w$}", w = widths[k]) })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
