//! Minimal standalone SVG line charts of the per-frequency statistics.
//!
//! With a single scheme each (scheme, n) block draws its theory curve solid
//! and its empirical curve dotted. When both schemes are present the chart
//! compares them instead: regular solid, Poisson dotted, empirical values only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{FrequencyStats, HarnessError};
use crate::sampling::SchemeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    Mean,
    Bias,
    Var,
    Mse,
}

impl Panel {
    pub fn name(self) -> &'static str {
        match self {
            Panel::Mean => "mean",
            Panel::Bias => "bias",
            Panel::Var => "var",
            Panel::Mse => "mse",
        }
    }

    fn axis_label(self) -> &'static str {
        match self {
            Panel::Mean => "spectral density",
            Panel::Bias => "bias",
            Panel::Var => "variance",
            Panel::Mse => "log10 MSE",
        }
    }

    fn empirical(self, s: &FrequencyStats) -> f64 {
        match self {
            Panel::Mean => s.mean_est,
            Panel::Bias => s.bias_emp,
            Panel::Var => s.var_emp,
            Panel::Mse => s.mse_emp,
        }
    }

    fn theory(self, s: &FrequencyStats) -> f64 {
        match self {
            Panel::Mean => s.true_phi,
            Panel::Bias => s.bias_theory,
            Panel::Var => s.var_theory,
            Panel::Mse => s.mse_theory,
        }
    }

    fn transform(self, v: f64) -> Option<f64> {
        match self {
            Panel::Mse if v > 0.0 => Some(v.log10()),
            Panel::Mse => None,
            _ if v.is_finite() => Some(v),
            _ => None,
        }
    }
}

impl std::str::FromStr for Panel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Panel::Mean),
            "bias" => Ok(Panel::Bias),
            "var" => Ok(Panel::Var),
            "mse" => Ok(Panel::Mse),
            other => Err(format!("unknown panel '{other}' (expected mean, bias, var or mse)")),
        }
    }
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 15.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Series {
    label: String,
    color: &'static str,
    dotted: bool,
    points: Vec<(f64, f64)>,
}

fn series(stats: &[FrequencyStats], panel: Panel) -> Vec<Series> {
    let mut blocks: Vec<(SchemeKind, usize)> = stats.iter().map(|s| (s.scheme, s.n)).collect();
    blocks.sort();
    blocks.dedup();
    let mut sizes: Vec<usize> = blocks.iter().map(|b| b.1).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let comparison = blocks.iter().any(|b| b.0 != blocks[0].0);

    let mut out = Vec::new();
    for (scheme, n) in blocks {
        let rows = super::block(stats, scheme, n);
        let color = COLORS[sizes.iter().position(|&m| m == n).unwrap_or(0) % COLORS.len()];
        let curve = |f: &dyn Fn(&FrequencyStats) -> f64| -> Vec<(f64, f64)> {
            rows.iter()
                .filter_map(|s| panel.transform(f(s)).map(|y| (s.lambda, y)))
                .collect()
        };
        if comparison {
            out.push(Series {
                label: format!("{scheme} n={n}"),
                color,
                dotted: scheme == SchemeKind::Poisson,
                points: curve(&|s| panel.empirical(s)),
            });
        } else {
            let theory = if panel == Panel::Mean { "true" } else { "theory" };
            out.push(Series {
                label: format!("{theory} n={n}"),
                color,
                dotted: false,
                points: curve(&|s| panel.theory(s)),
            });
            out.push(Series {
                label: format!("empirical n={n}"),
                color,
                dotted: true,
                points: curve(&|s| panel.empirical(s)),
            });
        }
    }
    out
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-2..1e4).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn render_panel(svg: &mut String, stats: &[FrequencyStats], panel: Panel, x0: f64, title: &str) {
    let all = series(stats, panel);
    let (xmin, xmax) = range(all.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (ymin, ymax) = range(all.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let pw = PANEL_W - LEFT - RIGHT;
    let ph = PANEL_H - TOP - BOTTOM;
    let sx = |x: f64| x0 + LEFT + (x - xmin) / (xmax - xmin) * pw;
    let sy = |y: f64| TOP + (ymax - y) / (ymax - ymin) * ph;

    let _ = writeln!(svg, r#"<g class="panel" data-panel="{}">"#, panel.name());
    let _ = writeln!(
        svg,
        r#"<rect x="{:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#,
        x0 + LEFT
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="13">{title}</text>"#,
        x0 + LEFT + pw / 2.0
    );
    for i in 0..=4 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            sx(fx),
            TOP + ph + 14.0,
            tick_label(fx)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#,
            x0 + LEFT - 4.0,
            sy(fy) + 3.0,
            tick_label(fy)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">lambda</text>"#,
        x0 + LEFT + pw / 2.0,
        PANEL_H - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        x0 + 14.0,
        TOP + ph / 2.0,
        x0 + 14.0,
        TOP + ph / 2.0,
        panel.axis_label()
    );
    if panel == Panel::Bias && ymin < 0.0 && ymax > 0.0 {
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999" stroke-width="0.5"/>"##,
            x0 + LEFT,
            x0 + LEFT + pw,
            y = sy(0.0)
        );
    }
    for (k, s) in all.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if s.dotted { r#" stroke-dasharray="2,3""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline data-series="{}" fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
            s.label,
            s.color,
            pts.join(" ")
        );
        let ly = TOP + 12.0 + 13.0 * k as f64;
        let lx = x0 + PANEL_W - RIGHT - 120.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="1.5"{dash}/>"#,
            lx,
            lx + 18.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            lx + 22.0,
            ly + 3.0,
            s.label
        );
    }
    svg.push_str("</g>\n");
}

/// One SVG document with the given panels side by side.
pub fn render_svg(stats: &[FrequencyStats], panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{PANEL_H:.0}" viewBox="0 0 {width:.0} {PANEL_H:.0}">"#
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, &panel) in panels.iter().enumerate() {
        render_panel(&mut svg, stats, panel, PANEL_W * i as f64, panel.axis_label());
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_svg(stats: &[FrequencyStats], panels: &[Panel], path: &Path) -> Result<(), HarnessError> {
    if stats.is_empty() {
        return Err(HarnessError::EmptyStats);
    }
    fs::write(path, render_svg(stats, panels)).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_svg_plot(stats: &[FrequencyStats], panel: Panel, path: &Path) -> Result<(), HarnessError> {
    write_svg(stats, &[panel], path)
}

pub fn emit_svg_figure(
    stats: &[FrequencyStats],
    panels: &[Panel],
    path: &Path,
) -> Result<(), HarnessError> {
    write_svg(stats, panels, path)
}
