//! Report emission: CSV (canonical), JSON and an SVG heatmap for scans.
//!
//! Reals are written with 9 significant digits. The heatmap colors each
//! (group, epsilon) cell by `delta_loss` on a linear ramp from
//! `rgb(49,54,149)` at the lower bound to `rgb(215,48,39)` at the upper
//! bound; bounds default to the report's min and max. Degenerate cells are grey.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::acrt::RobustnessRow;
use crate::error::{Error, Result};
use crate::indicator::McSummary;
use crate::scan::{ScanCell, ScanReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    SvgHeatmap,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" | "svg-heatmap" => Ok(ReportFormat::SvgHeatmap),
            other => Err(Error::validation(format!("unknown report format `{other}` (csv | json | svg-heatmap)"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Report<'a> {
    Scan(&'a ScanReport),
    MonteCarlo(&'a McSummary),
    Robustness(&'a [RobustnessRow]),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SvgOptions {
    /// Fixed `(low, high)` color bounds instead of the report's range.
    pub bounds: Option<(f64, f64)>,
}

pub const SCAN_COLUMNS: [&str; 7] =
    ["group", "epsilon", "metric_before", "metric_after", "delta_loss", "first_order", "degenerate"];

/// Nine significant digits in scientific notation.
pub fn format_real(x: f64) -> String {
    format!("{x:.8e}")
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::validation(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_report(report: Report<'_>, format: ReportFormat, svg: &SvgOptions) -> Result<String> {
    match (format, report) {
        (ReportFormat::Json, Report::Scan(r)) => Ok(serde_json::to_string_pretty(r)?),
        (ReportFormat::Json, Report::MonteCarlo(r)) => Ok(serde_json::to_string_pretty(r)?),
        (ReportFormat::Json, Report::Robustness(r)) => Ok(serde_json::to_string_pretty(r)?),
        (ReportFormat::Csv, Report::Scan(r)) => {
            let header: Vec<String> = SCAN_COLUMNS.iter().map(|s| s.to_string()).collect();
            let rows: Vec<Vec<String>> = r
                .cells
                .iter()
                .map(|c| {
                    vec![
                        c.group_label.clone(),
                        format_real(c.epsilon),
                        format_real(c.metric_before),
                        format_real(c.metric_after),
                        format_real(c.delta_loss),
                        format_real(c.first_order),
                        c.degenerate.to_string(),
                    ]
                })
                .collect();
            csv_string(&header, &rows)
        }
        (ReportFormat::Csv, Report::MonteCarlo(s)) => {
            let mut header = vec!["trials".to_string(), "mean_delta".into(), "std_error".into()];
            header.extend(s.quantile_abs.iter().map(|q| format!("alpha_{}", q.probability)));
            header.push("max_abs".into());
            let mut row = vec![s.trials.to_string(), format_real(s.mean_delta), format_real(s.std_error)];
            row.extend(s.quantile_abs.iter().map(|q| format_real(q.value)));
            row.push(format_real(s.max_abs));
            csv_string(&header, &[row])
        }
        (ReportFormat::Csv, Report::Robustness(rows)) => {
            let header = vec!["epsilon".to_string(), "metric_baseline".into(), "metric_acrt".into()];
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![format_real(r.epsilon), format_real(r.metric_baseline), format_real(r.metric_acrt)])
                .collect();
            csv_string(&header, &rows)
        }
        (ReportFormat::SvgHeatmap, Report::Scan(r)) => Ok(heatmap(r, svg)),
        (ReportFormat::SvgHeatmap, _) => Err(Error::Mode("svg heatmaps are only defined for scan reports".into())),
    }
}

pub fn emit_report(report: Report<'_>, format: ReportFormat, path: &Path, svg: &SvgOptions) -> Result<()> {
    let text = render_report(report, format, svg)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads back the cells of a scan CSV.
pub fn parse_scan_csv(text: &str) -> Result<Vec<ScanCell>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Csv { row: 1, column: 1, message: e.to_string() })?;
    if header.iter().ne(SCAN_COLUMNS) {
        return Err(Error::Csv { row: 1, column: 1, message: "unexpected scan header".into() });
    }
    let mut cells = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Csv { row, column: 1, message: e.to_string() })?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Csv {
                row,
                column: j + 1,
                message: "not a number".into(),
            })
        };
        let degenerate = match rec.get(6) {
            Some("true") => true,
            Some("false") => false,
            _ => return Err(Error::Csv { row, column: 7, message: "expected true or false".into() }),
        };
        cells.push(ScanCell {
            group_label: rec.get(0).unwrap_or_default().to_string(),
            epsilon: num(1)?,
            metric_before: num(2)?,
            metric_after: num(3)?,
            delta_loss: num(4)?,
            first_order: num(5)?,
            degenerate,
        });
    }
    Ok(cells)
}

const LOW: (f64, f64, f64) = (49.0, 54.0, 149.0);
const HIGH: (f64, f64, f64) = (215.0, 48.0, 39.0);

/// Linear blend between the ramp endpoints; `t` is clamped to `[0, 1]`.
pub fn ramp(t: f64) -> (u8, u8, u8) {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    (mix(LOW.0, HIGH.0), mix(LOW.1, HIGH.1), mix(LOW.2, HIGH.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn heatmap(r: &ScanReport, opts: &SvgOptions) -> String {
    let mut groups: Vec<&str> = Vec::new();
    let mut eps: Vec<f64> = Vec::new();
    for c in &r.cells {
        if !groups.contains(&c.group_label.as_str()) {
            groups.push(&c.group_label);
        }
        if !eps.contains(&c.epsilon) {
            eps.push(c.epsilon);
        }
    }
    let live = r.cells.iter().filter(|c| !c.degenerate).map(|c| c.delta_loss);
    let (lo, hi) = opts.bounds.unwrap_or_else(|| {
        live.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    });
    let (cw, ch, left, top) = (72.0, 28.0, 180.0, 36.0);
    let width = left + cw * eps.len() as f64 + 10.0;
    let height = top + ch * groups.len() as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    for (j, e) in eps.iter().enumerate() {
        let x = left + cw * (j as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{:.1e}</text>"#, top - 10.0, e);
    }
    for (i, g) in groups.iter().enumerate() {
        let y = top + ch * (i as f64 + 0.5) + 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, left - 6.0, escape(g));
    }
    for c in &r.cells {
        let i = groups.iter().position(|g| *g == c.group_label).expect("group listed");
        let j = eps.iter().position(|e| *e == c.epsilon).expect("epsilon listed");
        let fill = if c.degenerate {
            "#cccccc".to_string()
        } else {
            let t = if hi > lo { (c.delta_loss - lo) / (hi - lo) } else { 0.0 };
            let (r, g, b) = ramp(t);
            format!("rgb({r},{g},{b})")
        };
        let _ = writeln!(
            s,
            r#"<rect class="cell" x="{}" y="{}" width="{cw}" height="{ch}" fill="{fill}" stroke="white"><title>{} eps={} delta_loss={}</title></rect>"#,
            left + cw * j as f64,
            top + ch * i as f64,
            escape(&c.group_label),
            format_real(c.epsilon),
            format_real(c.delta_loss)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicator::QuantileAbs;
    use crate::model::{GroupAxis, MetricName};
    use crate::norms::NormOrder;
    use crate::scan::ConstraintTemplate;
    use proptest::prelude::*;

    fn report(cells: Vec<ScanCell>) -> ScanReport {
        ScanReport {
            axis: GroupAxis::Kind,
            constraint_template: ConstraintTemplate { p: NormOrder::Finite(2.0), n: None },
            metric: MetricName::Accuracy,
            cells,
        }
    }

    fn cell(group: &str, epsilon: f64, delta_loss: f64) -> ScanCell {
        ScanCell {
            group_label: group.into(),
            epsilon,
            metric_before: 0.9,
            metric_after: 0.8,
            delta_loss,
            first_order: delta_loss * 0.9,
            degenerate: false,
        }
    }

    #[test]
    fn empty_scan_csv_is_header_only() {
        let text = render_report(Report::Scan(&report(vec![])), ReportFormat::Csv, &SvgOptions::default()).unwrap();
        assert_eq!(text, "group,epsilon,metric_before,metric_after,delta_loss,first_order,degenerate\n");
        assert!(parse_scan_csv(&text).unwrap().is_empty());
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let cells = ["fully-connected", "bias"]
            .iter()
            .flat_map(|g| [1e-3, 1e-2, 1e-1].map(|e| cell(g, e, e * 2.0)))
            .collect();
        let svg = render_report(Report::Scan(&report(cells)), ReportFormat::SvgHeatmap, &SvgOptions::default()).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r#"class="cell""#).count(), 6);
        assert!(svg.contains("rgb(49,54,149)") && svg.contains("rgb(215,48,39)"));
        let fixed = SvgOptions { bounds: Some((0.0, 1.0)) };
        let one = render_report(Report::Scan(&report(vec![cell("x", 1.0, 0.5)])), ReportFormat::SvgHeatmap, &fixed).unwrap();
        assert!(one.contains(&{
            let (r, g, b) = ramp(0.5);
            format!("rgb({r},{g},{b})")
        }));
    }

    #[test]
    fn other_reports() {
        let mc = McSummary {
            trials: 3,
            mean_delta: 0.5,
            std_error: 0.1,
            quantile_abs: vec![QuantileAbs { probability: 0.9, value: 1.0 }],
            max_abs: 2.0,
        };
        let csv = render_report(Report::MonteCarlo(&mc), ReportFormat::Csv, &SvgOptions::default()).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "trials,mean_delta,std_error,alpha_0.9,max_abs");
        let rows = [RobustnessRow { epsilon: 0.0, metric_baseline: 0.9, metric_acrt: 0.95 }];
        let csv = render_report(Report::Robustness(&rows), ReportFormat::Csv, &SvgOptions::default()).unwrap();
        assert_eq!(csv, "epsilon,metric_baseline,metric_acrt\n0.00000000e0,9.00000000e-1,9.50000000e-1\n");
        let json = render_report(Report::Robustness(&rows), ReportFormat::Json, &SvgOptions::default()).unwrap();
        let back: Vec<RobustnessRow> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rows);
        assert!(matches!(
            render_report(Report::MonteCarlo(&mc), ReportFormat::SvgHeatmap, &SvgOptions::default()),
            Err(Error::Mode(_))
        ));
    }

    #[test]
    fn emit_reports_path_errors() {
        let r = report(vec![]);
        let err = emit_report(Report::Scan(&r), ReportFormat::Csv, Path::new("/nonexistent/dir/x.csv"), &SvgOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.csv"));
    }

    proptest! {
        #[test]
        fn scan_csv_round_trip(vals in prop::collection::vec((-1e6f64..1e6, 1e-6f64..1.0, any::<bool>()), 0..20)) {
            let cells: Vec<ScanCell> = vals
                .iter()
                .enumerate()
                .map(|(i, &(d, e, deg))| ScanCell { degenerate: deg, ..cell(&format!("g,{i}"), e, d) })
                .collect();
            let text = render_report(Report::Scan(&report(cells.clone())), ReportFormat::Csv, &SvgOptions::default()).unwrap();
            let back = parse_scan_csv(&text).unwrap();
            prop_assert_eq!(back.len(), cells.len());
            let close = |a: f64, b: f64| (a - b).abs() <= 5e-9 * b.abs().max(1e-300);
            for (x, y) in back.iter().zip(&cells) {
                prop_assert_eq!(&x.group_label, &y.group_label);
                prop_assert_eq!(x.degenerate, y.degenerate);
                prop_assert!(close(x.epsilon, y.epsilon) && close(x.delta_loss, y.delta_loss));
                prop_assert!(close(x.metric_before, y.metric_before) && close(x.first_order, y.first_order));
            }
        }
    }
}
