//! Minimal deterministic SVG charts: line plots, heatmaps and scatters.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::harness::report::{ErrorApRow, ScoreRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Heatmap,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(PlotKind::Line),
            "heatmap" => Ok(PlotKind::Heatmap),
            other => Err(Error::invalid(format!("unknown plot kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Closed axis range covering `values`, widened when degenerate.
pub fn axis_range(values: impl IntoIterator<Item = f64>, floor: Option<(f64, f64)>) -> (f64, f64) {
    let (mut lo, mut hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if let Some((a, b)) = floor {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    (lo, hi)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, f: &Frame, x_label: &str, y_label: &str, ticks: usize) {
    let (x0, x1) = (f.px(f.x.0), f.px(f.x.1));
    let (y0, y1) = (f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=ticks {
        let t = i as f64 / ticks as f64;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (xp, yp) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{xp:.2}" y1="{y0:.2}" x2="{xp:.2}" y2="{:.2}" stroke="black"/><text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{yp:.2}" x2="{:.2}" y2="{yp:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 7.0,
            yp + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn legend(s: &mut String, labels: &[String]) {
    for (i, label) in labels.iter().enumerate() {
        let y = TOP + 8.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="12" height="4" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            y - 4.0,
            PALETTE[i % PALETTE.len()],
            x + 18.0,
            y + 2.0,
            escape(label)
        );
    }
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::invalid("nothing to plot"));
    }
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let f = Frame {
        x: axis_range(xs, None),
        y: axis_range(ys, Some((0.0, 1.0))),
    };
    let mut s = open(title);
    axes(&mut s, &f, x_label, y_label, 5);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = ser
            .points
            .iter()
            .enumerate()
            .map(|(j, &(x, y))| format!("{}{:.2},{:.2}", if j == 0 { 'M' } else { 'L' }, f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.join(" ")
        );
        for &(x, y) in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                f.px(x),
                f.py(y)
            );
        }
    }
    legend(&mut s, &series.iter().map(|x| x.label.clone()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn scatter_chart(title: &str, x_label: &str, y_label: &str, points: &[(String, f64, f64)]) -> Result<String> {
    if points.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    let f = Frame {
        x: axis_range(points.iter().map(|p| p.1), None),
        y: axis_range(points.iter().map(|p| p.2), Some((0.0, 1.0))),
    };
    let mut s = open(title);
    axes(&mut s, &f, x_label, y_label, 5);
    for (i, (_, x, y)) in points.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
            f.px(*x),
            f.py(*y),
            PALETTE[i % PALETTE.len()]
        );
    }
    legend(&mut s, &points.iter().map(|p| p.0.clone()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    Ok(s)
}

/// Heatmap with one column per `columns` value and one row per series label.
pub fn heatmap_chart(title: &str, x_label: &str, y_label: &str, columns: &[f64], rows: &[Series]) -> Result<String> {
    if columns.is_empty() || rows.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    let mut s = open(title);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let cw = plot_w / columns.len() as f64;
    let ch = plot_h / rows.len() as f64;
    for (ri, row) in rows.iter().enumerate() {
        let y = TOP + ch * (rows.len() - 1 - ri) as f64;
        for (ci, col) in columns.iter().enumerate() {
            let Some(&(_, v)) = row.points.iter().find(|p| p.0 == *col) else {
                continue;
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{}</title></rect>"#,
                LEFT + cw * ci as f64,
                cw + 0.05,
                ch + 0.05,
                viridis(v),
                tick_label(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + ch / 2.0 + 4.0,
            escape(&row.label)
        );
    }
    let step = (columns.len() / 6).max(1);
    for (ci, col) in columns.iter().enumerate().step_by(step) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + cw * (ci as f64 + 0.5),
            HEIGHT - BOTTOM + 16.0,
            tick_label(*col)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text><text transform="translate(14,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label),
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    // colour bar for [0, 1]
    for i in 0..20 {
        let v = i as f64 / 19.0;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            WIDTH - RIGHT + 20.0,
            TOP + plot_h * (1.0 - (i + 1) as f64 / 20.0),
            plot_h / 20.0 + 0.05,
            viridis(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}">1</text><text x="{:.2}" y="{:.2}">0</text>"#,
        WIDTH - RIGHT + 40.0,
        TOP + 10.0,
        WIDTH - RIGHT + 40.0,
        TOP + plot_h
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Coarse viridis ramp on `[0, 1]`.
fn viridis(v: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = v.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    format!("#{:02x}{:02x}{:02x}", lerp(a.0, b.0), lerp(a.1, b.1), lerp(a.2, b.2))
}

/// Groups rows into series, choosing axes from the experiment: texture
/// sweeps plot AP against sigma per anomaly kind, intensity sweeps plot AP
/// against intensity per sigma, model sweeps plot AP against intensity per
/// model.
pub fn series_for(rows: &[ScoreRow]) -> Result<(String, String, Vec<Series>)> {
    let first = rows.first().ok_or_else(|| Error::invalid("empty result table"))?;
    if rows.iter().any(|r| r.experiment != first.experiment) {
        return Err(Error::invalid("rows mix several experiments"));
    }
    let exp = first.experiment.as_str();
    let mut series: Vec<Series> = Vec::new();
    let mut push = |label: String, point: (f64, f64)| match series.iter_mut().find(|s| s.label == label) {
        Some(s) => s.points.push(point),
        None => series.push(Series {
            label,
            points: vec![point],
        }),
    };
    let x_label;
    if exp == "exp2" {
        x_label = "blur sigma";
        for r in rows {
            let label = match r.intensity {
                Some(i) => format!("{} {i}", r.kind),
                None => r.kind.to_string(),
            };
            push(label, (r.sigma.unwrap_or(0.0), r.mean_ap));
        }
    } else if exp.starts_with("exp3") {
        x_label = "anomaly intensity";
        for r in rows {
            push(r.model_label(), (r.intensity.unwrap_or(0.0), r.mean_ap));
        }
    } else {
        x_label = "anomaly intensity";
        for r in rows {
            push(format!("sigma={}", r.sigma.unwrap_or(0.0)), (r.intensity.unwrap_or(0.0), r.mean_ap));
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok((exp.to_string(), x_label.to_string(), series))
}

/// Renders a result table. Plots only read values from the rows.
pub fn emit_plot(rows: &[ScoreRow], kind: PlotKind) -> Result<String> {
    let (exp, x_label, series) = series_for(rows)?;
    match kind {
        PlotKind::Line => line_chart(&format!("{exp}: mean AP"), &x_label, "mean AP", &series),
        PlotKind::Heatmap => {
            let mut columns: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
            columns.sort_by(f64::total_cmp);
            columns.dedup();
            let y_label = if exp == "exp2" { "anomaly kind" } else if exp.starts_with("exp3") { "model" } else { "blur sigma" };
            heatmap_chart(&format!("{exp}: mean AP"), &x_label, y_label, &columns, &series)
        }
    }
}

pub fn emit_error_scatter(rows: &[ErrorApRow], title: &str) -> Result<String> {
    let points: Vec<(String, f64, f64)> = rows
        .iter()
        .map(|r| (r.label(), r.mean_recon_err, r.band_mean_ap))
        .collect();
    scatter_chart(title, "healthy reconstruction error", "mean AP (0.2 <= I <= 0.6)", &points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::Mode;
    use crate::synth::AnomalyKind;

    fn row(i: f64, s: f64, ap: f64) -> ScoreRow {
        ScoreRow {
            experiment: "exp1".into(),
            kind: AnomalyKind::Intensity,
            intensity: Some(i),
            sigma: Some(s),
            model: "blur".into(),
            mode: Mode::Healthy,
            k: None,
            mean_ap: ap,
            ap_std: 0.0,
            mean_recon_err: None,
            n_images: 1,
            seed: 0,
        }
    }

    #[test]
    fn single_row_is_valid_svg() {
        for kind in [PlotKind::Line, PlotKind::Heatmap] {
            let svg = emit_plot(&[row(0.5, 1.0, 0.3)], kind).unwrap();
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        }
    }

    #[test]
    fn deterministic_output() {
        let rows = vec![row(0.0, 0.0, 1.0), row(0.5, 0.0, 0.4), row(0.0, 2.0, 0.8), row(0.5, 2.0, 0.1)];
        assert_eq!(emit_plot(&rows, PlotKind::Line).unwrap(), emit_plot(&rows, PlotKind::Line).unwrap());
        assert_eq!(emit_plot(&rows, PlotKind::Heatmap).unwrap(), emit_plot(&rows, PlotKind::Heatmap).unwrap());
    }

    #[test]
    fn points_stay_inside_plot_area() {
        let rows = vec![row(0.1, 0.0, 0.2), row(0.9, 0.0, 0.95), row(0.4, 5.0, 0.0)];
        let svg = emit_plot(&rows, PlotKind::Line).unwrap();
        for line in svg.lines().filter(|l| l.starts_with("<circle")) {
            let grab = |key: &str| -> f64 {
                let start = line.find(key).unwrap() + key.len();
                line[start..].split('"').next().unwrap().parse().unwrap()
            };
            let (cx, cy) = (grab("cx=\""), grab("cy=\""));
            assert!((LEFT - 1e-9..=WIDTH - RIGHT + 1e-9).contains(&cx), "{cx}");
            assert!((TOP - 1e-9..=HEIGHT - BOTTOM + 1e-9).contains(&cy), "{cy}");
        }
        let (lo, hi) = axis_range([0.1, 0.9, 0.4], None);
        assert!(lo <= 0.1 && hi >= 0.9);
    }

    #[test]
    fn empty_and_mixed_tables_rejected() {
        assert!(emit_plot(&[], PlotKind::Line).is_err());
        let mut other = row(0.1, 0.0, 0.2);
        other.experiment = "exp2".into();
        assert!(emit_plot(&[row(0.1, 0.0, 0.2), other], PlotKind::Line).is_err());
    }
}
