//! Quality-versus-effort line charts rendered to SVG.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

const PALETTE: [RGBColor; 6] = [
    RGBColor(230, 159, 0),
    RGBColor(0, 158, 115),
    RGBColor(213, 94, 0),
    RGBColor(0, 114, 178),
    RGBColor(204, 121, 167),
    RGBColor(86, 180, 233),
];

/// One line per series; x is percent post-edited, y corpus quality.
pub fn render_quality_plot(path: &Path, title: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
    let draw_err = |e: Box<dyn std::error::Error>| Error::Format(format!("plot {}: {e}", path.display()));
    let ys = series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.1));
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
    if !lo.is_finite() {
        return Err(Error::Format("nothing to plot".into()));
    }
    let pad = ((hi - lo) * 0.05).max(0.5);
    let (y0, y1) = ((lo - pad).max(0.0), (hi + pad).min(100.0));

    let root = SVGBackend::new(path, (800, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(e.into()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(0f64..100f64, y0..y1)
        .map_err(|e| draw_err(e.into()))?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_desc("% post-edited")
        .y_desc("corpus quality (100 - TER)")
        .draw()
        .map_err(|e| draw_err(e.into()))?;
    for (i, (label, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| draw_err(e.into()))?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| draw_err(e.into()))?;
    root.present().map_err(|e| draw_err(e.into()))?;
    Ok(())
}
