use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::lab::{ExperimentReport, Plot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 9] = [
    "experiment",
    "param_json",
    "input",
    "estimate",
    "std_error",
    "oracle",
    "deviation",
    "sigma_multiple",
    "verdict",
];

/// 17 significant digits in scientific notation, which round-trips every `f64`.
fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn optional(v: Option<f64>) -> String {
    v.map(number).unwrap_or_default()
}

pub fn write_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    let params = serde_json::to_string(&report.params)?;
    for row in &report.rows {
        w.write_record([
            report.experiment.clone(),
            params.clone(),
            row.input.clone(),
            number(row.estimate),
            number(row.std_error),
            optional(row.oracle),
            optional(row.deviation),
            optional(row.sigma_multiple),
            row.verdict.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    Ok(())
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;

/// Quotient against ε as one polyline, with the reference constant as the
/// only horizontal rule. The ε axis starts at 0 so the limit is visible.
pub fn render_svg(plot: &Plot, title: &str) -> String {
    let x_max = plot.points.iter().map(|p| p.0).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let ys = plot.points.iter().map(|p| p.1).chain([plot.reference]);
    let (mut y_lo, mut y_hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
    let pad = ((y_hi - y_lo) * 0.1).max(1e-3 * y_hi.abs().max(1.0));
    y_lo -= pad;
    y_hi += pad;
    let sx = |x: f64| MARGIN + (x / x_max) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="gray"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(svg, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">eps</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-size="13" transform="rotate(-90 15 {})">quotient</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (label, y) in [(y_lo, sy(y_lo)), (y_hi, sy(y_hi))] {
        let _ = writeln!(svg, r#"<text x="{}" y="{y:.2}" text-anchor="end" font-size="11">{label:.4}</text>"#, MARGIN - 5.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{x_max}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 15.0
    );
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{}" font-size="11">0</text>"#, HEIGHT - MARGIN + 15.0);

    let y_ref = sy(plot.reference);
    let _ = writeln!(
        svg,
        r#"<line class="reference" x1="{MARGIN}" y1="{y_ref:.2}" x2="{}" y2="{y_ref:.2}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="11" fill="firebrick">{}</text>"#,
        WIDTH - MARGIN - 5.0,
        y_ref - 5.0,
        plot.reference
    );
    let mut pts: Vec<(f64, f64)> = plot.points.clone();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="navy" stroke-width="2"/>"#,
        coords.join(" ")
    );
    svg.push_str("</svg>\n");
    svg
}

/// Where the chart goes: next to the report file, or `<experiment>.svg`.
pub fn svg_path(report: &ExperimentReport, output: Option<&Path>) -> PathBuf {
    match output {
        Some(p) => p.with_extension("svg"),
        None => PathBuf::from(format!("{}.svg", report.experiment)),
    }
}

/// Writes the report in `format` to `path` (stdout when `None`) and, when
/// asked and available, the convergence chart.
pub fn emit_report(report: &ExperimentReport, format: Format, path: Option<&Path>, plot: bool) -> Result<()> {
    let write = |out: &mut dyn Write| match format {
        Format::Csv => write_csv(report, out),
        Format::Json => write_json(report, out),
    };
    match path {
        Some(p) => {
            let mut f = io::BufWriter::new(File::create(p)?);
            write(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    if plot {
        match &report.plot {
            Some(data) => std::fs::write(svg_path(report, path), render_svg(data, &report.experiment))?,
            None => eprintln!("note: {} has no convergence series to plot", report.experiment),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{Row, Verdict};
    use crate::measure::Estimate;

    fn demo() -> ExperimentReport {
        let mut r: ExperimentReport =
            serde_json::from_str(r#"{"experiment":"demo","params":{"p":2.0},"rows":[],"summary":[],"seed":1,"wall_time_ms":null}"#)
                .unwrap();
        r.plot = Some(Plot {
            points: vec![(0.2, 1.9), (0.1, 1.95), (0.05, 1.975)],
            reference: 2.0,
        });
        r
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&demo(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn csv_numbers_round_trip() {
        let mut r = demo();
        let v = 0.1 + 0.2;
        r.rows.push(Row::compare("x, quoted", Estimate::exact(v), 1.0 / 3.0, Verdict::Pass));
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let rec = rd.records().next().unwrap().unwrap();
        assert_eq!(&rec[2], "x, quoted");
        assert_eq!(rec[3].parse::<f64>().unwrap().to_bits(), v.to_bits());
        assert_eq!(rec[5].parse::<f64>().unwrap().to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(&rec[8], "PASS");
    }

    #[test]
    fn svg_has_one_rule_at_the_reference() {
        let svg = render_svg(demo().plot.as_ref().unwrap(), "demo");
        assert!(svg.contains(r#"viewBox="0 0 800 500""#));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<line").count(), 1);
        let line = svg.lines().find(|l| l.starts_with("<line")).unwrap();
        let attr = |name: &str| -> f64 {
            let start = line.find(&format!(r#"{name}=""#)).unwrap() + name.len() + 2;
            line[start..].split('"').next().unwrap().parse().unwrap()
        };
        assert_eq!(attr("y1"), attr("y2"));
        // references sit above every point here, so the rule is the topmost mark
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let ys: Vec<f64> = poly.split('"').nth(1).unwrap().split(' ').map(|p| p.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(ys.iter().all(|y| *y > attr("y1")));
    }
}
