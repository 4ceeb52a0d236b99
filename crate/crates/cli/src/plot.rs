//! SVG rendering. Plots are derived from the same rows that go to CSV and
//! never feed back into them.

use plotters::coord::Shift;
use plotters::prelude::*;

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Markers only, no connecting line.
    pub scatter: bool,
}

pub struct Panel<'a> {
    pub title: &'a str,
    pub x_desc: &'a str,
    pub y_desc: &'a str,
    pub series: Vec<Series>,
    /// Vertical reference line.
    pub marker_x: Option<f64>,
}

type PlotResult<T> = Result<T, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("plot: {e}")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

fn draw_panel(area: &DrawingArea<SVGBackend, Shift>, panel: &Panel) -> PlotResult<()> {
    let all = || panel.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = bounds(all().map(|p| p.0).chain(panel.marker_x));
    let (y0, y1) = bounds(all().map(|p| p.1));
    let mut chart = ChartBuilder::on(area)
        .caption(panel.title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(err)?;
    chart.configure_mesh().x_desc(panel.x_desc).y_desc(panel.y_desc).draw().map_err(err)?;
    for (k, s) in panel.series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        let pts = s.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite());
        let anno = if s.scatter {
            chart.draw_series(pts.map(|p| Circle::new(p, 3, color.filled()))).map_err(err)?
        } else {
            chart.draw_series(LineSeries::new(pts, color.stroke_width(2))).map_err(err)?
        };
        anno.label(s.name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    if let Some(x) = panel.marker_x {
        chart
            .draw_series(LineSeries::new(vec![(x, y0), (x, y1)], BLACK.mix(0.5).stroke_width(1)))
            .map_err(err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    Ok(())
}

/// Panels side by side in one SVG.
pub fn panels(panels: &[Panel]) -> PlotResult<String> {
    let mut buf = String::new();
    {
        let width = 640 * panels.len().max(1) as u32;
        let root = SVGBackend::with_string(&mut buf, (width, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        let areas = root.split_evenly((1, panels.len().max(1)));
        for (a, p) in areas.iter().zip(panels) {
            draw_panel(a, p)?;
        }
        root.present().map_err(err)?;
    }
    Ok(buf)
}

/// Heat map of log10 values on a (log10 x, log10 y) lattice; `None` cells are grey.
pub fn heatmap(
    title: &str,
    x_desc: &str,
    y_desc: &str,
    x: &[f64],
    y: &[f64],
    value: impl Fn(usize, usize) -> Option<f64>,
    highlight: Option<(usize, usize)>,
) -> PlotResult<String> {
    let edges = |g: &[f64]| -> Vec<f64> {
        let l: Vec<f64> = g.iter().map(|v| v.log10()).collect();
        let step = if l.len() > 1 { l[1] - l[0] } else { 1.0 };
        let mut e: Vec<f64> = l.iter().map(|v| v - step / 2.0).collect();
        e.push(l.last().copied().unwrap_or(0.0) + step / 2.0);
        e
    };
    let (ex, ey) = (edges(x), edges(y));
    let logs: Vec<f64> =
        (0..y.len()).flat_map(|i| (0..x.len()).map(move |j| (i, j))).filter_map(|(i, j)| value(i, j)).map(f64::log10).collect();
    let (lo, hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, (720, 600)).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("{title}  (log10 range {lo:.2} .. {hi:.2}, blue = low)"), ("sans-serif", 16))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(ex[0]..*ex.last().unwrap_or(&1.0), ey[0]..*ey.last().unwrap_or(&1.0))
            .map_err(err)?;
        chart.configure_mesh().disable_mesh().x_desc(x_desc).y_desc(y_desc).draw().map_err(err)?;
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut cells = Vec::new();
        for i in 0..y.len() {
            for j in 0..x.len() {
                let style = match value(i, j) {
                    Some(v) => HSLColor(0.66 * (1.0 - (v.log10() - lo) / span), 0.8, 0.5).filled(),
                    None => RGBColor(200, 200, 200).filled(),
                };
                cells.push(Rectangle::new([(ex[j], ey[i]), (ex[j + 1], ey[i + 1])], style));
            }
        }
        chart.draw_series(cells).map_err(err)?;
        if let Some((i, j)) = highlight {
            let c = (x[j].log10(), y[i].log10());
            chart.draw_series([Cross::new(c, 8, BLACK.stroke_width(3))]).map_err(err)?;
        }
        root.present().map_err(err)?;
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_svg() {
        let s = panels(&[Panel {
            title: "t",
            x_desc: "x",
            y_desc: "y",
            series: vec![Series { name: "a".into(), points: vec![(0.0, 1.0), (1.0, 2.0)], scatter: false }],
            marker_x: Some(0.5),
        }])
        .unwrap();
        assert!(s.starts_with("<svg") && s.contains("</svg>"));
        let h = heatmap("h", "x", "y", &[1.0, 10.0], &[1.0, 10.0, 100.0], |i, j| (i != 1).then_some((i + j + 1) as f64), Some((0, 0)))
            .unwrap();
        assert!(h.contains("<rect"));
    }
}
