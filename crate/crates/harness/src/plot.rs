//! Static SVG line plots of detector traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::HarnessError;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One series per lag for NPI traces, a single series otherwise.
pub fn read_trace(path: &Path) -> Result<BTreeMap<usize, Vec<(f64, f64)>>, HarnessError> {
    let err = |e: &dyn std::fmt::Display| HarnessError::Io(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| err(&e))?;
    let headers = rdr.headers().map_err(|e| err(&e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (t_col, v_col) = match (col("t"), col("v")) {
        (Some(t), Some(v)) => (t, v),
        _ => {
            return Err(HarnessError::Config(format!(
                "{}: needs t and v columns",
                path.display()
            )))
        }
    };
    let l_col = col("l");
    let mut series: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| err(&e))?;
        let parse = |i: usize| -> Result<f64, HarnessError> { rec[i].parse().map_err(|e| err(&e)) };
        let lag = match l_col {
            Some(i) => rec[i].parse().map_err(|e| err(&e))?,
            None => 0,
        };
        series
            .entry(lag)
            .or_default()
            .push((parse(t_col)?, parse(v_col)?));
    }
    Ok(series)
}

/// Renders `v` against `t`, optionally on a log10 axis.
pub fn render_svg(title: &str, series: &BTreeMap<usize, Vec<(f64, f64)>>, log_y: bool) -> String {
    let tf = |v: f64| if log_y { v.max(1e-3).log10() } else { v };
    let pts = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(tf(y));
        y1 = y1.max(tf(y));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (tf(y) - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let ylab = |v: f64| {
        if log_y {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3}")
        }
    };
    let _ = writeln!(
        svg,
        r#"<text x="4" y="{}">{}</text>"#,
        MARGIN + 4.0,
        ylab(y1)
    );
    let _ = writeln!(
        svg,
        r#"<text x="4" y="{}">{}</text>"#,
        HEIGHT - MARGIN,
        ylab(y0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{}">{x0}</text>"#,
        HEIGHT - MARGIN + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{x1}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0
    );
    for (k, (lag, data)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        // thin long traces to roughly one point per horizontal pixel
        let step = (data.len() / (2 * WIDTH as usize)).max(1);
        for (n, &(x, y)) in data.iter().step_by(step).enumerate() {
            let _ = write!(
                path,
                "{}{:.1},{:.1}",
                if n == 0 { "M" } else { " L" },
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            svg,
            r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="0.8"/>"#
        );
        if *lag > 0 {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" fill="{color}">l = {lag}</text>"#,
                WIDTH - MARGIN - 60.0,
                MARGIN + 16.0 * (k as f64 + 1.0)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn plot_csv(csv_path: &Path, svg_path: &Path, log_y: bool) -> Result<(), HarnessError> {
    let series = read_trace(csv_path)?;
    let title = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    std::fs::write(svg_path, render_svg(&title, &series, log_y))
        .map_err(|e| HarnessError::Io(format!("{}: {e}", svg_path.display())))
}
