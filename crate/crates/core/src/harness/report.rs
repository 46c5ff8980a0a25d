//! CSV and SVG output of study reports.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{estimate_rate, StudyReport};

pub const CSV_HEADER: &str = "h,H,dt,vel_l2,vel_h1,p_l2,wall_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

/// Formats with 12 significant digits.
pub fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

/// Value as it appears in the CSV.
pub fn round12(v: f64) -> f64 {
    fmt12(v).parse().expect("formatted float parses")
}

pub fn to_csv(report: &StudyReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &report.rows {
        let cols = [r.h, r.coarse_h, r.dt, r.vel_l2, r.vel_h1, r.p_l2, r.wall_s];
        let line: Vec<String> = cols.iter().map(|&v| fmt12(v)).collect();
        s += &line.join(",");
        s.push('\n');
    }
    if let Some(rates) = &report.rates {
        let _ = writeln!(s, "# rates,{},{},{}", fmt12(rates.vel_l2), fmt12(rates.vel_h1), fmt12(rates.p_l2));
    }
    s
}

/// Rows and the rates comment of an emitted CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub rows: Vec<[f64; 7]>,
    pub rates: Option<[f64; 3]>,
}

impl ParsedCsv {
    /// Rates recomputed from the parsed rows.
    pub fn recompute_rates(&self) -> Result<[f64; 3]> {
        let h: Vec<f64> = self.rows.iter().map(|r| r[0]).collect();
        let col = |k: usize| -> Result<f64> {
            let e: Vec<f64> = self.rows.iter().map(|r| r[k]).collect();
            estimate_rate(&e, &h)
        };
        Ok([col(3)?, col(4)?, col(5)?])
    }
}

pub fn parse_csv(text: &str) -> Result<ParsedCsv> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config("CSV header mismatch".into()));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number `{s}`: {e}")));
    let mut rows = Vec::new();
    let mut rates = None;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        if let Some(rest) = line.strip_prefix("# rates,") {
            let v: Vec<f64> = rest.split(',').map(num).collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::Config("rates line needs three values".into()));
            }
            rates = Some([v[0], v[1], v[2]]);
            continue;
        }
        let v: Vec<f64> = line.split(',').map(num).collect::<Result<_>>()?;
        let row: [f64; 7] = v
            .try_into()
            .map_err(|_| Error::Config(format!("row `{line}` does not have 7 columns")))?;
        rows.push(row);
    }
    Ok(ParsedCsv { rows, rates })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Log-log plot of the three error columns against `h`, with dashed
/// reference slopes 1, 2 and 3 anchored at the coarsest point.
pub fn to_svg(report: &StudyReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let series: [(&str, &str, Vec<f64>); 3] = [
        ("vel_l2", "#1f77b4", report.rows.iter().map(|r| r.vel_l2).collect()),
        ("vel_h1", "#d62728", report.rows.iter().map(|r| r.vel_h1).collect()),
        ("p_l2", "#2ca02c", report.rows.iter().map(|r| r.p_l2).collect()),
    ];
    let hs: Vec<f64> = report.rows.iter().map(|r| r.h).collect();
    let positive = |v: &f64| v.is_finite() && *v > 0.0;
    let all_e: Vec<f64> = series.iter().flat_map(|s| s.2.iter().copied()).filter(positive).collect();

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let title = format!(
        "{} {} {} ({}) v{}",
        report.plan.algorithm, report.plan.family, report.plan.case, report.plan.coupling, report.version
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(&title));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, M / 2.0, escape(&title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">h</text>"#, W / 2.0, H - M / 3.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 {} {})">error</text>"#,
        M / 3.0,
        H / 2.0,
        M / 3.0,
        H / 2.0
    );

    if !hs.is_empty() && !all_e.is_empty() && hs.iter().all(positive) {
        let (mut x0, mut x1) = (hs.iter().copied().fold(f64::INFINITY, f64::min).log10(), hs.iter().copied().fold(0.0, f64::max).log10());
        let (mut y0, mut y1) = (
            all_e.iter().copied().fold(f64::INFINITY, f64::min).log10(),
            all_e.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10(),
        );
        if x1 - x0 < 1e-9 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-9 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad_x = 0.05 * (x1 - x0);
        let pad_y = 0.05 * (y1 - y0);
        let (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);
        let px = |h: f64| M + (h.log10() - x0) / (x1 - x0) * (W - 2.0 * M);
        let py = |e: f64| H - M - (e.log10() - y0) / (y1 - y0) * (H - 2.0 * M);
        let clip_y = |y: f64| y.clamp(M, H - M);

        let h_max = hs.iter().copied().fold(0.0, f64::max);
        let h_min = hs.iter().copied().fold(f64::INFINITY, f64::min);
        let anchor = all_e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for slope in [1.0, 2.0, 3.0] {
            let e_end = anchor * (h_min / h_max).powf(slope);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
                px(h_max),
                clip_y(py(anchor)),
                px(h_min),
                clip_y(py(e_end))
            );
            let _ = writeln!(
                s,
                r##"<text x="{:.2}" y="{:.2}" font-size="10" fill="#888">slope {slope}</text>"##,
                px(h_min) + 4.0,
                clip_y(py(e_end))
            );
        }
        for (k, (name, color, vals)) in series.iter().enumerate() {
            let pts: Vec<String> = hs
                .iter()
                .zip(vals)
                .filter(|(_, e)| positive(e))
                .map(|(&h, &e)| format!("{:.2},{:.2}", px(h), py(e)))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
            for p in &pts {
                let (x, y) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{name}</text>"#,
                M + 10.0,
                M + 16.0 * (k as f64 + 1.0)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the report in the given format.
pub fn emit_report(report: &StudyReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Svg => to_svg(report),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
