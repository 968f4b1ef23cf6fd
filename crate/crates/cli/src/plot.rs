//! Standalone SVG plots of CSV series: polylines, or right-continuous step
//! functions drawn as horizontal pieces joined by vertical risers.

use std::fmt::Write;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PlotKind {
    #[default]
    Line,
    Step,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotStyle {
    pub kind: PlotKind,
    pub log_x: bool,
    pub log_y: bool,
    pub title: Option<String>,
    pub x_label: String,
    pub y_label: String,
}

/// One curve. In step mode `initial` is the value left of the first point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub name: String,
    pub initial: Option<f64>,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Option<Axis> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Some(Axis { lo, hi, log })
    }

    /// Position in `[0, 1]`.
    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            return (a..=b)
                .map(|k| 10f64.powi(k))
                .filter(|&t| (self.lo..=self.hi).contains(&t.log10()))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the series as a self-contained SVG document. Under a log scale,
/// points with a nonpositive coordinate are left out.
pub fn emit_plot(series: &[Series], style: &PlotStyle) -> Result<String, CliError> {
    let keep = |&(x, y): &(f64, f64)| {
        x.is_finite() && y.is_finite() && (!style.log_x || x > 0.0) && (!style.log_y || y > 0.0)
    };
    let cleaned: Vec<Series> = series
        .iter()
        .map(|s| Series {
            name: s.name.clone(),
            initial: s
                .initial
                .filter(|v| v.is_finite() && (!style.log_y || *v > 0.0)),
            points: s.points.iter().copied().filter(keep).collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    if cleaned.is_empty() {
        return Err(CliError::Usage(
            "nothing to plot: no series with plottable points".into(),
        ));
    }
    let xs = cleaned.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = cleaned
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1).chain(s.initial));
    let x_axis = Axis::new(xs, style.log_x).expect("nonempty");
    let y_axis = Axis::new(ys, style.log_y).expect("nonempty");
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + x_axis.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - y_axis.frac(y)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(t) = &style.title {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
        b = TOP + ph,
        r = LEFT + pw
    );
    for t in x_axis.ticks() {
        let x = px(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{y1}" stroke="black"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{}</text>"#,
            label(t),
            y0 = TOP + ph,
            y1 = TOP + ph + 5.0,
            ty = TOP + ph + 18.0
        );
    }
    for t in y_axis.ticks() {
        let y = py(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x0}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{}</text>"#,
            label(t),
            x0 = LEFT - 5.0,
            tx = LEFT - 8.0,
            ty = y + 4.0
        );
    }
    let scale = |log: bool| if log { " (log)" } else { "" };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(&style.x_label),
        scale(style.log_x)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}{}</text>"#,
        escape(&style.y_label),
        scale(style.log_y),
        y = TOP + ph / 2.0
    );

    for (i, s) in cleaned.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let d = match style.kind {
            PlotKind::Line => {
                let mut d = String::new();
                for (k, &(x, y)) in s.points.iter().enumerate() {
                    let _ = write!(
                        d,
                        "{}{:.2} {:.2} ",
                        if k == 0 { "M " } else { "L " },
                        px(x),
                        py(y)
                    );
                }
                d
            }
            PlotKind::Step => {
                // start at the left edge at the initial level, then one
                // horizontal run and one riser per breakpoint
                let start = s.initial.unwrap_or(s.points[0].1);
                let mut d = format!("M {LEFT:.2} {:.2} ", py(start));
                for &(x, y) in &s.points {
                    let _ = write!(d, "H {:.2} V {:.2} ", px(x), py(y));
                }
                let _ = write!(d, "H {:.2}", LEFT + pw);
                d
            }
        };
        let _ = writeln!(
            svg,
            r#"<path class="series" d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Series from CSV text: column `x` (default the first) against each of
/// `ys` (default every other column). A row whose x is `-inf` sets the
/// initial level of a step series; cells that are not numbers are skipped.
pub fn read_series(
    text: &str,
    x: Option<&str>,
    ys: &[String],
) -> Result<(String, Vec<Series>), CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name || h.split(" [").next() == Some(name))
            .ok_or_else(|| CliError::Usage(format!("no column named {name:?}")))
    };
    let xi = match x {
        Some(name) => find(name)?,
        None => 0,
    };
    let yi: Vec<usize> = if ys.is_empty() {
        (0..headers.len()).filter(|&i| i != xi).collect()
    } else {
        ys.iter().map(|n| find(n)).collect::<Result<_, _>>()?
    };
    let mut series: Vec<Series> = yi
        .iter()
        .map(|&i| Series {
            name: headers[i].clone(),
            ..Series::default()
        })
        .collect();
    for record in reader.records() {
        let record = record?;
        let Some(xv) = record.get(xi).and_then(|c| c.trim().parse::<f64>().ok()) else {
            continue;
        };
        for (s, &i) in series.iter_mut().zip(&yi) {
            let Some(yv) = record.get(i).and_then(|c| c.trim().parse::<f64>().ok()) else {
                continue;
            };
            if xv == f64::NEG_INFINITY {
                s.initial = Some(yv);
            } else {
                s.points.push((xv, yv));
            }
        }
    }
    series.retain(|s| !s.points.is_empty());
    Ok((headers[xi].clone(), series))
}
