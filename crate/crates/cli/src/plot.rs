//! Deterministic SVG plots of a sweep report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::artifacts::write_file;
use crate::error::{CliError, Result};
use crate::report::{ExperimentReport, Policy, Variant};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: usize,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone)]
pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub categories: Vec<String>,
    /// One bar per category for each group.
    pub groups: Vec<(String, Vec<f64>)>,
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    }
}

fn linear_ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let step = nice_step(hi - lo);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    (
        start,
        end,
        (0..=n).map(|i| start + i as f64 * step).collect(),
    )
}

fn tick_label(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(svg: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        num((LEFT + WIDTH - RIGHT) / 2.0),
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num((LEFT + WIDTH - RIGHT) / 2.0),
        num(HEIGHT - 12.0),
        escape(x_label)
    );
    let cy = (TOP + HEIGHT - BOTTOM) / 2.0;
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{c}" text-anchor="middle" transform="rotate(-90 18 {c})">{}</text>"#,
        escape(y_label),
        c = num(cy)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(WIDTH - LEFT - RIGHT),
        num(HEIGHT - TOP - BOTTOM)
    );
}

fn y_tick(svg: &mut String, y: f64, label: &str) {
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{py}" x2="{}" y2="{py}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{label}</text>"##,
        num(WIDTH - RIGHT),
        num(LEFT - 6.0),
        num(y + 4.0),
        py = num(y),
    );
}

fn legend(svg: &mut String, entries: &[(String, usize, bool)]) {
    for (i, (label, color, dashed)) in entries.iter().enumerate() {
        let y = TOP + 12.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let dash = if *dashed {
            r#" stroke-dasharray="6 3""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            num(x),
            num(x + 22.0),
            PALETTE[color % PALETTE.len()],
            num(x + 28.0),
            num(y + 4.0),
            escape(label)
        );
    }
}

pub fn render_line(chart: &LineChart) -> Result<String> {
    let all: Vec<(f64, f64)> = chart
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .collect();
    if all.is_empty() {
        return Err(CliError::Data(format!("{}: no data points", chart.title)));
    }
    if all.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(CliError::Data(format!(
            "{}: non-finite data point",
            chart.title
        )));
    }
    // nonpositive values cannot sit on a log axis: clamp to half the smallest positive
    let floor = if chart.log_y {
        let min_pos = all
            .iter()
            .map(|p| p.1)
            .filter(|&y| y > 0.0)
            .fold(f64::INFINITY, f64::min);
        Some(if min_pos.is_finite() {
            min_pos / 2.0
        } else {
            1e-6
        })
    } else {
        None
    };
    let ty = |y: f64| match floor {
        Some(f) => y.max(f).log10(),
        None => y,
    };
    let (x0, x1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let (lo, hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(ty(p.1)), b.max(ty(p.1)))
        });
    let (y0, y1, yticks) = if chart.log_y {
        let (a, b) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
        (
            a,
            b,
            (a as i64..=b as i64).map(|e| e as f64).collect::<Vec<_>>(),
        )
    } else {
        linear_ticks(lo, hi)
    };
    let (x0, x1, xticks) = linear_ticks(x0, x1);
    let frame = Frame { x0, x1, y0, y1 };

    let mut svg = String::new();
    header(&mut svg, &chart.title, &chart.x_label, &chart.y_label);
    for &t in &yticks {
        let label = if chart.log_y {
            format!("1e{}", t as i64)
        } else {
            tick_label(t)
        };
        y_tick(&mut svg, frame.py(t), &label);
    }
    for &t in &xticks {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(frame.px(t)),
            num(HEIGHT - BOTTOM + 16.0),
            tick_label(t)
        );
    }
    let mut clamped = 0;
    for s in &chart.series {
        let color = PALETTE[s.color % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", num(frame.px(x)), num(frame.py(ty(y)))))
            .collect();
        let dash = if s.dashed {
            r#" stroke-dasharray="6 3""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            escape(&s.label),
            path.join(" ")
        );
        for &(x, y) in &s.points {
            let is_clamped = floor.is_some() && y <= 0.0;
            clamped += usize::from(is_clamped);
            let fill = if is_clamped { "white" } else { color };
            let _ = writeln!(
                svg,
                r#"<circle class="point" cx="{}" cy="{}" r="3" fill="{fill}" stroke="{color}"/>"#,
                num(frame.px(x)),
                num(frame.py(ty(y)))
            );
        }
    }
    if let (Some(f), true) = (floor, clamped > 0) {
        let _ = writeln!(
            svg,
            r#"<text class="clamp-note" x="{}" y="{}" font-size="10">hollow: {clamped} zero values drawn at {f:.1e}</text>"#,
            num(LEFT + 4.0),
            num(TOP - 6.0)
        );
    }
    let entries: Vec<_> = chart
        .series
        .iter()
        .map(|s| (s.label.clone(), s.color, s.dashed))
        .collect();
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_bars(chart: &BarChart) -> Result<String> {
    if chart.categories.is_empty() || chart.groups.is_empty() {
        return Err(CliError::Data(format!("{}: no data", chart.title)));
    }
    let values: Vec<f64> = chart
        .groups
        .iter()
        .flat_map(|g| g.1.iter().copied())
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Data(format!("{}: non-finite value", chart.title)));
    }
    let hi = values.iter().copied().fold(0.0, f64::max);
    let lo = values.iter().copied().fold(0.0, f64::min);
    let (y0, y1, yticks) = linear_ticks(lo, hi);
    let frame = Frame {
        x0: 0.0,
        x1: chart.categories.len() as f64,
        y0,
        y1,
    };

    let mut svg = String::new();
    header(&mut svg, &chart.title, "modulation order M", &chart.y_label);
    for &t in &yticks {
        y_tick(&mut svg, frame.py(t), &tick_label(t));
    }
    let slot = frame.px(1.0) - frame.px(0.0);
    let bar = slot * 0.8 / chart.groups.len() as f64;
    for (c, cat) in chart.categories.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(frame.px(c as f64 + 0.5)),
            num(HEIGHT - BOTTOM + 16.0),
            escape(cat)
        );
        for (g, (_, vals)) in chart.groups.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(0.0);
            let x = frame.px(c as f64) + slot * 0.1 + bar * g as f64;
            let (top, bottom) = (frame.py(v.max(0.0)), frame.py(v.min(0.0)));
            let _ = writeln!(
                svg,
                r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                num(x),
                num(top),
                num(bar),
                num(bottom - top),
                PALETTE[g % PALETTE.len()]
            );
        }
    }
    let entries: Vec<_> = chart
        .groups
        .iter()
        .enumerate()
        .map(|(g, (l, _))| (l.clone(), g, false))
        .collect();
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn orders(report: &ExperimentReport) -> Vec<usize> {
    let mut o: Vec<usize> = report.rows.iter().map(|r| r.order).collect();
    o.sort_unstable();
    o.dedup();
    o
}

fn curves(
    report: &ExperimentReport,
    metric: fn(&crate::report::SweepRow) -> f64,
    variants: &[Variant],
) -> Vec<Series> {
    let mut series = Vec::new();
    for (i, &order) in orders(report).iter().enumerate() {
        for &variant in variants {
            series.push(Series {
                label: if variants.len() > 1 {
                    format!("M={order} {variant}")
                } else {
                    format!("M={order}")
                },
                color: i,
                dashed: variant == Variant::Gray,
                points: report
                    .series(order, variant, Policy::Agent)
                    .iter()
                    .map(|r| (r.snr_db, metric(r)))
                    .collect(),
            });
        }
    }
    series
}

/// All plots as `(file name, svg)` pairs.
pub fn render_all(report: &ExperimentReport) -> Result<Vec<(String, String)>> {
    if report.rows.is_empty() {
        return Err(CliError::Data("report has no rows".into()));
    }
    let both = [Variant::Gray, Variant::Learned];
    let line = |title: &str, y_label: &str, log_y: bool, series: Vec<Series>| LineChart {
        title: title.into(),
        x_label: "SNR (dB)".into(),
        y_label: y_label.into(),
        log_y,
        series,
    };
    let mut out = vec![
        (
            "q_sem_vs_snr.svg".to_string(),
            render_line(&line(
                "Semantic quality",
                "Q_sem",
                false,
                curves(report, |r| r.q_sem, &both),
            ))?,
        ),
        (
            "ber_vs_snr.svg".to_string(),
            render_line(&line(
                "Bit error rate",
                "BER",
                true,
                curves(report, |r| r.ber, &both),
            ))?,
        ),
        (
            "symbols_vs_snr.svg".to_string(),
            render_line(&line(
                "Transmitted symbols per image",
                "symbols / image",
                false,
                curves(report, |r| r.symbols_per_image, &[Variant::Learned]),
            ))?,
        ),
    ];
    if !report.orders.is_empty() {
        let cats: Vec<String> = report.orders.iter().map(|o| o.order.to_string()).collect();
        let bars =
            |title: &str,
             y_label: &str,
             f: fn(&semqam_core::metrics::VulnerabilityReport) -> f64| BarChart {
                title: title.into(),
                y_label: y_label.into(),
                categories: cats.clone(),
                groups: vec![
                    (
                        "gray".into(),
                        report.orders.iter().map(|o| f(&o.gray)).collect(),
                    ),
                    (
                        "learned".into(),
                        report.orders.iter().map(|o| f(&o.learned)).collect(),
                    ),
                ],
            };
        out.push((
            "ssv_by_order.svg".into(),
            render_bars(&bars("Weighted symbol vulnerability", "S_w", |v| {
                v.weighted_ssv
            }))?,
        ));
        out.push((
            "spp_by_order.svg".into(),
            render_bars(&bars("Semantic protection probability", "S_p", |v| {
                v.spp.unwrap_or(0.0)
            }))?,
        ));
    }
    Ok(out)
}

/// Writes every plot and the curves CSV into `dir`.
pub fn render_plots(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, svg) in render_all(report)? {
        let path = dir.join(name);
        write_file(&path, svg.as_bytes())?;
        written.push(path);
    }
    let csv = dir.join("curves.csv");
    write_file(&csv, &report.to_csv()?)?;
    written.push(csv);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let (a, b, t) = linear_ticks(-10.0, 20.0);
        assert!(a <= -10.0 && b >= 20.0);
        assert_eq!(t.first(), Some(&a));
        assert_eq!(nice_step(30.0), 10.0);
        assert_eq!(tick_label(0.30000000000000004), "0.3");
    }

    #[test]
    fn log_axis_clamps_zero() {
        let chart = LineChart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: true,
            series: vec![Series {
                label: "s".into(),
                color: 0,
                dashed: false,
                points: vec![(0.0, 1e-2), (1.0, 1e-4), (2.0, 0.0)],
            }],
        };
        let svg = render_line(&chart).unwrap();
        assert_eq!(svg.matches(r#"class="point""#).count(), 3);
        assert!(svg.contains("drawn at 5.0e-5"));
        assert!(matches!(
            render_line(&LineChart {
                series: vec![],
                ..chart
            }),
            Err(CliError::Data(_))
        ));
    }
}
