use std::path::Path;

use plotters::prelude::*;

use crate::output::Table;

/// Line chart of the named columns against the first column.
pub fn line_chart(path: &Path, table: &Table, columns: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let x: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let series: Vec<Vec<f64>> = columns.iter().filter_map(|c| table.column(c)).collect();
    let (x0, x1) = (x.first().copied().unwrap_or(0.0), x.last().copied().unwrap_or(1.0));
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in series.iter().flatten().filter(|v| v.is_finite()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !(lo < hi) {
        (lo, hi) = (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0);
    }
    let root = SVGBackend::new(path, (900, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .build_cartesian_2d(x0..x1.max(x0 + f64::EPSILON), lo..hi)?;
    for (i, ys) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart.draw_series(LineSeries::new(x.iter().copied().zip(ys.iter().copied()), color))?;
    }
    root.present()?;
    Ok(())
}
