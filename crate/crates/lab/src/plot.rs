//! SVG plots of profile CSVs: one curve per `(t, ε)` group with a ±2 SE
//! envelope.

use std::path::Path;

use plotters::prelude::*;

use crate::io::{read_csv, ProfileRow};
use crate::{LabError, Result};

/// A curve of the plot: its label and `(x, mean, se)` points.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

/// Group profile rows by `(epsilon, t)`, optionally keeping only the time
/// closest to `only_t`.
pub fn curves(rows: &[ProfileRow], only_t: Option<f64>) -> Vec<Curve> {
    let keep_t = only_t.map(|t0| {
        rows.iter().map(|r| r.t).min_by(|a, b| (a - t0).abs().total_cmp(&(b - t0).abs())).unwrap_or(t0)
    });
    let mut groups: Vec<((f64, f64), Curve)> = Vec::new();
    for r in rows {
        if keep_t.is_some_and(|t| (r.t - t).abs() > 1e-12) {
            continue;
        }
        let key = (r.epsilon.unwrap_or(f64::NAN), r.t);
        let same = |k: &(f64, f64)| k.0.to_bits() == key.0.to_bits() && k.1 == key.1;
        let idx = match groups.iter().position(|(k, _)| same(k)) {
            Some(i) => i,
            None => {
                let label = match r.epsilon {
                    Some(e) => format!("ε = {e}, t = {}", r.t),
                    None => format!("t = {}", r.t),
                };
                groups.push((key, Curve { label, points: Vec::new() }));
                groups.len() - 1
            }
        };
        groups[idx].1.points.push((r.x, r.mean, r.se));
    }
    // Decreasing ε, then increasing t.
    groups.sort_by(|a, b| b.0 .0.total_cmp(&a.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
    let mut out: Vec<Curve> = groups.into_iter().map(|(_, c)| c).collect();
    for c in &mut out {
        c.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

fn plot_err<E: std::fmt::Display>(e: E) -> LabError {
    LabError::Plot(e.to_string())
}

/// Render curves (mean solid, mean ± 2 SE thin) to an SVG file.
pub fn render_svg(curves: &[Curve], title: &str, out: &Path) -> Result<()> {
    if curves.is_empty() || curves.iter().all(|c| c.points.is_empty()) {
        return Err(LabError::Plot("nothing to plot".into()));
    }
    let pts = curves.iter().flat_map(|c| c.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, m, s) in pts {
        let s = if s.is_finite() { s } else { 0.0 };
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(m - 2.0 * s);
        y1 = y1.max(m + 2.0 * s);
    }
    if !(y1 > y0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let root = SVGBackend::new(out, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("x").y_desc("mean ± 2 SE").draw().map_err(plot_err)?;
    for (i, c) in curves.iter().enumerate() {
        let colour = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(c.points.iter().map(|p| (p.0, p.1)), colour.stroke_width(2)))
            .map_err(plot_err)?
            .label(c.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], colour.stroke_width(2)));
        for sign in [-2.0, 2.0] {
            chart
                .draw_series(LineSeries::new(c.points.iter().map(|p| (p.0, p.1 + sign * p.2)), colour.mix(0.4)))
                .map_err(plot_err)?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Read a profile CSV and plot it.
pub fn plot_profile_csv(input: &Path, out: &Path, only_t: Option<f64>, title: Option<&str>) -> Result<usize> {
    let rows: Vec<ProfileRow> = read_csv(input)?;
    let cs = curves(&rows, only_t);
    let default_title = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    render_svg(&cs, title.unwrap_or(&default_title), out)?;
    Ok(cs.len())
}
