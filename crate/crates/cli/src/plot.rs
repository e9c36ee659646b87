//! `plot`: CSV columns to a standalone SVG line chart.

use std::fmt::Write as _;

use crate::cli::PlotArgs;
use crate::error::CliError;
use crate::output::{emit, preamble};

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
const TICKS: usize = 5;

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// XML comments may not contain `--`; the second dash of each pair is written
/// as a character reference.
fn comment_safe(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut prev_dash = false;
    for c in s.chars() {
        if c == '-' && prev_dash {
            out.push_str("&#45;");
            prev_dash = false;
        } else {
            out.push(c);
            prev_dash = c == '-';
        }
    }
    out
}

fn read_series(args: &PlotArgs) -> Result<Vec<Series>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&args.input)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CliError::bad_args(format!("{}: {e}", args.input.display())),
            _ => e.into(),
        })?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::bad_args(format!("no column {name:?} in {}", args.input.display())))
    };
    let x = column(&args.x)?;
    let ys: Vec<usize> = args.y.iter().map(|y| column(y)).collect::<Result<_, _>>()?;
    let mut series: Vec<Series> = args
        .y
        .iter()
        .map(|name| Series {
            name: name.clone(),
            points: Vec::new(),
        })
        .collect();
    let value = |s: Option<&str>| s.and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite());
    for record in reader.records() {
        let record = record?;
        let Some(xv) = value(record.get(x)) else { continue };
        for (s, &col) in series.iter_mut().zip(&ys) {
            if let Some(yv) = value(record.get(col)) {
                s.points.push((xv, yv));
            }
        }
    }
    Ok(series)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    }
}

fn tick_label(v: f64, step: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e6 || v.abs() < 1e-4) {
        return format!("{v:.2e}");
    }
    let decimals = (-step.log10()).ceil().clamp(0.0, 6.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn render_svg(args: &PlotArgs, series: &[Series], invocation: &str) -> String {
    let (w, h) = (args.width as f64, args.height as f64);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 55.0);
    let (pw, ph) = ((w - left - right).max(1.0), (h - top - bottom).max(1.0));
    let (x0, x1) = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let header = preamble(invocation, &[], "");
    out.push_str("<!--\n");
    for line in header.lines() {
        let _ = writeln!(out, "{}", comment_safe(line));
    }
    out.push_str("-->\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        args.width, args.height, args.width, args.height
    );
    let _ = writeln!(out, "<desc>{}</desc>", xml_escape(invocation));
    out.push_str(r#"<rect x="0" y="0" width="100%" height="100%" fill="white"/>"#);
    out.push('\n');
    if let Some(title) = &args.title {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
            w / 2.0,
            xml_escape(title)
        );
    }
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1" fill="none"><line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}"/><line x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}"/></g>"#,
        l = left,
        r = left + pw,
        t = top,
        b = top + ph
    );

    out.push_str(r#"<g font-family="sans-serif" font-size="11" fill="black">"#);
    out.push('\n');
    let (xstep, ystep) = ((x1 - x0) / (TICKS - 1) as f64, (y1 - y0) / (TICKS - 1) as f64);
    for i in 0..TICKS {
        let xv = x0 + i as f64 * xstep;
        let px = sx(xv);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{b:.2}" x2="{px:.2}" y2="{b2:.2}" stroke="black"/><text x="{px:.2}" y="{ty:.2}" text-anchor="middle">{}</text>"#,
            tick_label(xv, xstep),
            b = top + ph,
            b2 = top + ph + 5.0,
            ty = top + ph + 18.0
        );
        let yv = y0 + i as f64 * ystep;
        let py = sy(yv);
        let _ = writeln!(
            out,
            r#"<line x1="{l2:.2}" y1="{py:.2}" x2="{left:.2}" y2="{py:.2}" stroke="black"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{}</text>"#,
            tick_label(yv, ystep),
            l2 = left - 5.0,
            tx = left - 8.0,
            ty = py + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        xml_escape(&args.x)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{cy:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {cy:.2})">{}</text>"#,
        xml_escape(&args.y.join(", ")),
        cy = top + ph / 2.0
    );
    out.push_str("</g>\n");

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
    }

    out.push_str(r#"<g font-family="sans-serif" font-size="12">"#);
    out.push('\n');
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = top + 10.0 + 16.0 * i as f64;
        let x = left + pw - 140.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{tx:.2}" y="{ty:.2}">{}</text>"#,
            xml_escape(&s.name),
            x2 = x + 20.0,
            tx = x + 26.0,
            ty = y + 4.0
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

pub fn run(args: &PlotArgs, invocation: &str) -> Result<(), CliError> {
    let series = read_series(args)?;
    let svg = render_svg(args, &series, invocation);
    emit(svg.as_bytes(), args.out.out.as_deref())
}
