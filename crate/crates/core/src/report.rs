//! Static SVG report rendered from the diagnostics CSVs alone.
//!
//! Panels, top to bottom: measured maximum with both envelopes (log scale),
//! log-log maximum against the fitted time to singularity, identity
//! residuals (log scale), and the assumption-flag timeline.

use crate::csvio::{Table, ENVELOPE, IDENTITY};
use crate::error::{Error, Result};
use crate::growth::fit_singular_time;
use plotters::prelude::*;
use std::ops::Range;
use std::path::Path;

pub const WIDTH: u32 = 900;
pub const PANEL_HEIGHT: u32 = 300;
const FONT: &str = "monospace";

type Series = Vec<(f64, f64)>;

fn positive(xs: &[f64], ys: &[f64]) -> Series {
    xs.iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite() && **y > 0.0)
        .map(|(x, y)| (*x, *y))
        .collect()
}

fn span(values: impl Iterator<Item = f64>) -> Range<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    lo - pad..hi + pad
}

fn tick(v: f64) -> String {
    let v = if v.abs() < 1e-9 { 0.0 } else { v };
    format!("{v:.3}")
}

fn draw_err<E: std::error::Error + Send + Sync>(e: DrawingAreaErrorKind<E>) -> Error {
    Error::Format(format!("report rendering: {e}"))
}

const PALETTE: [RGBColor; 4] = [BLACK, RGBColor(0, 90, 181), RGBColor(220, 50, 32), RGBColor(0, 140, 70)];

/// Line plot with a logarithmic y axis, drawn as `log10 y` on a linear axis
/// so that ranges narrower than a decade still get tick labels.
fn log_panel(
    area: &DrawingArea<SVGBackend, plotters::coord::Shift>,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(&str, Series)],
) -> Result<()> {
    let logged: Vec<(&str, Series)> = series
        .iter()
        .map(|(name, s)| (*name, s.iter().map(|&(x, y)| (x, y.log10())).collect()))
        .collect();
    let xs = span(logged.iter().flat_map(|(_, s)| s.iter().map(|p| p.0)));
    let ys = span(logged.iter().flat_map(|(_, s)| s.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(area)
        .caption(title, (FONT, 16))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(70)
        .build_cartesian_2d(xs, ys)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .label_style((FONT, 11))
        .x_label_formatter(&|v| tick(*v))
        .y_label_formatter(&|v| format!("{:.3e}", 10f64.powf(*v)))
        .draw()
        .map_err(draw_err)?;
    for (i, (name, s)) in logged.iter().enumerate() {
        if s.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(s.iter().copied(), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .label_font((FONT, 11))
        .border_style(BLACK)
        .background_style(WHITE)
        .position(SeriesLabelPosition::UpperLeft)
        .draw()
        .map_err(draw_err)?;
    Ok(())
}

fn flag_panel(
    area: &DrawingArea<SVGBackend, plotters::coord::Shift>,
    times: &[f64],
    rows: &[(&str, Vec<Option<bool>>)],
) -> Result<()> {
    let xs = span(times.iter().copied());
    let mut chart = ChartBuilder::on(area)
        .caption("assumption flags (filled = holds, absent = not available)", (FONT, 16))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(130)
        .build_cartesian_2d(xs, -0.5..rows.len() as f64 - 0.5)
        .map_err(draw_err)?;
    let names: Vec<String> = rows.iter().map(|(n, _)| n.to_string()).collect();
    chart
        .configure_mesh()
        .x_desc("t")
        .label_style((FONT, 11))
        .y_labels(rows.len())
        .y_label_formatter(&|v| {
            let i = v.round();
            if (v - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < names.len() {
                names[i as usize].clone()
            } else {
                String::new()
            }
        })
        .disable_y_mesh()
        .draw()
        .map_err(draw_err)?;
    for (row, (_, flags)) in rows.iter().enumerate() {
        let y = row as f64;
        chart
            .draw_series(times.iter().zip(flags).filter_map(|(t, ok)| {
                let style = if (*ok)? { PALETTE[3].filled() } else { PALETTE[2].stroke_width(1) };
                Some(Circle::new((*t, y), 4, style))
            }))
            .map_err(draw_err)?;
    }
    Ok(())
}

/// Renders the report SVG from envelope and (optional) identity CSV text.
pub fn render_report(envelope_csv: &str, identity_csv: Option<&str>) -> Result<String> {
    let env = Table::parse_with(envelope_csv, &ENVELOPE)?;
    let t = env.column("time")?;
    let omega = env.column("omega")?;
    let single = env.column("single_exponential")?;
    let double = env.column("double_exponential")?;
    let ident = identity_csv.map(|s| Table::parse_with(s, &IDENTITY)).transpose()?;

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, 4 * PANEL_HEIGHT)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let panels = root.split_evenly((4, 1));

        log_panel(
            &panels[0],
            "maximum vorticity and envelopes",
            "t",
            "max |w|",
            &[
                ("measured", positive(&t, &omega)),
                ("single exponential", positive(&t, &single)),
                ("double exponential", positive(&t, &double)),
            ],
        )?;

        let fit = fit_singular_time(&t, &omega).ok();
        let loglog: Series = match &fit {
            Some(f) => t
                .iter()
                .zip(&omega)
                .filter(|(ti, w)| **ti < f.singular_time && w.is_finite() && **w > 0.0)
                .map(|(ti, w)| ((f.singular_time - ti).ln(), *w))
                .collect(),
            None => Vec::new(),
        };
        let title = match &fit {
            Some(f) => format!("max |w| against ln(T - t), fitted T = {:.4}, p = {:.4}", f.singular_time, f.exponent),
            None => "max |w| against ln(T - t): no singular-time fit".to_string(),
        };
        log_panel(&panels[1], &title, "ln(T - t)", "max |w|", &[("measured", loglog)])?;

        let (rt, rr) = match &ident {
            Some(tab) => (tab.column("time")?, tab.column("relative_residual")?),
            None => (Vec::new(), Vec::new()),
        };
        log_panel(
            &panels[2],
            "identity relative residual",
            "t",
            "relative residual",
            &[("residual", positive(&rt, &rr))],
        )?;

        flag_panel(
            &panels[3],
            &t,
            &[
                ("flags", env.flags("flags_ok")?.into_iter().map(Some).collect()),
                ("window clean", env.flags("window_clean")?.into_iter().map(Some).collect()),
                ("single holds", env.flags("single_dominates")?.into_iter().map(Some).collect()),
                ("double holds", env.optional_flags("double_dominates")?),
            ],
        )?;
        root.present().map_err(draw_err)?;
    }
    Ok(svg)
}

/// Renders `report.svg` in `dir` from `envelope.csv` and, if present, `identity.csv`.
pub fn write_report(dir: &Path) -> Result<()> {
    let env_path = dir.join("envelope.csv");
    let envelope = std::fs::read_to_string(&env_path)
        .map_err(|e| Error::Format(format!("{}: {e}", env_path.display())))?;
    let identity = std::fs::read_to_string(dir.join("identity.csv")).ok();
    let svg = render_report(&envelope, identity.as_deref())?;
    std::fs::write(dir.join("report.svg"), svg)?;
    Ok(())
}
