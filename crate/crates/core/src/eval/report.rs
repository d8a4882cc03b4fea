//! CSV and Markdown renderings in the column order
//! Auth, Care, Fair, Loya, Sanc, Acc, Cov, Fw, Fm.

use std::fmt::Write as _;

use super::binary::BinaryReport;
use super::metrics::EvalReport;
use crate::corpus::REPORT_ORDER;

pub const COLUMNS: [&str; 9] = ["Auth", "Care", "Fair", "Loya", "Sanc", "Acc", "Cov", "Fw", "Fm"];

fn row_values(r: &EvalReport) -> Vec<f64> {
    let mut v: Vec<f64> = REPORT_ORDER.iter().map(|f| r.per_class[f].f1).collect();
    v.extend([r.accuracy, r.coverage, r.f1_weighted, r.f1_macro]);
    v
}

/// One CSV table; each row is `(name, report)`.
pub fn reports_csv(rows: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("name,scope");
    for c in COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    out.push_str(",n_documents,n_covered,n_scope\n");
    for (name, r) in rows {
        let _ = write!(out, "{},{}", csv_field(name), r.scope.as_str());
        for v in row_values(r) {
            let _ = write!(out, ",{v:.6}");
        }
        let _ = writeln!(out, ",{},{},{}", r.n_documents, r.n_covered, r.n_scope);
    }
    out
}

pub fn reports_markdown(rows: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("| |");
    for c in COLUMNS {
        let _ = write!(out, " {c} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(COLUMNS.len()));
    out.push('\n');
    for (name, r) in rows {
        let _ = write!(out, "| {name} ({}) |", r.scope.as_str());
        for v in row_values(r) {
            let _ = write!(out, " {v:.2} |");
        }
        out.push('\n');
    }
    out
}

/// Per-foundation binary table: rows 0, 1, Acc, Fm, Fw; last column is the
/// average across foundations.
pub fn binary_markdown(r: &BinaryReport) -> String {
    let mut out = String::from("| |");
    for f in REPORT_ORDER {
        let _ = write!(out, " {} |", f.short());
    }
    out.push_str(" Avg |\n|---|");
    out.push_str(&"---|".repeat(REPORT_ORDER.len() + 1));
    out.push('\n');
    let rows: [(&str, fn(&super::binary::BinaryMetrics) -> f64); 5] = [
        ("0", |m| m.f1_negative),
        ("1", |m| m.f1_positive),
        ("Acc", |m| m.accuracy),
        ("Fm", |m| m.f1_macro),
        ("Fw", |m| m.f1_weighted),
    ];
    for (name, get) in rows {
        let _ = write!(out, "| {name} |");
        for f in REPORT_ORDER {
            let _ = write!(out, " {:.2} |", get(&r.per_foundation[&f]));
        }
        let _ = writeln!(out, " {:.2} |", get(&r.average));
    }
    out
}

pub fn binary_csv(r: &BinaryReport) -> String {
    let mut out = String::from("foundation,f1_0,f1_1,acc,fm,fw,support_0,support_1\n");
    for f in REPORT_ORDER {
        let m = &r.per_foundation[&f];
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            f.as_str(),
            m.f1_negative,
            m.f1_positive,
            m.accuracy,
            m.f1_macro,
            m.f1_weighted,
            m.support_negative,
            m.support_positive
        );
    }
    let m = &r.average;
    let _ = writeln!(
        out,
        "average,{:.6},{:.6},{:.6},{:.6},{:.6},,",
        m.f1_negative, m.f1_positive, m.accuracy, m.f1_macro, m.f1_weighted
    );
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
