//! SVG scatter and line plots.

use std::path::Path;

use plotters::prelude::*;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Joined by a polyline when set, dots otherwise.
    pub line: bool,
}

impl Series {
    pub fn line(label: &str, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, line: true }
    }

    pub fn dots(label: &str, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, line: false }
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Plot `log10` of the coordinate.
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(name: &str, title: &str, x_label: &str, y_label: &str) -> Self {
        Plot { name: name.into(), title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_x: false, log_y: false, series: Vec::new() }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

const COLORS: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

fn transform(v: f64, log: bool) -> Option<f64> {
    let t = if log { (v > 0.0).then(|| v.log10())? } else { v };
    t.is_finite().then_some(t)
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

/// Renders `plot` to `dir/<name>.svg`.
pub fn write_svg(plot: &Plot, dir: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let series: Vec<(&Series, Vec<(f64, f64)>)> = plot
        .series
        .iter()
        .map(|s| {
            let pts = s.points.iter().filter_map(|&(x, y)| Some((transform(x, plot.log_x)?, transform(y, plot.log_y)?))).collect();
            (s, pts)
        })
        .collect();
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let axis = |label: &str, log: bool| if log { format!("log10 {label}") } else { label.to_string() };

    let path = dir.join(format!("{}.svg", plot.name));
    let root = SVGBackend::new(&path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&plot.title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart.configure_mesh().x_desc(axis(&plot.x_label, plot.log_x)).y_desc(axis(&plot.y_label, plot.log_y)).draw()?;
    for (i, (s, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let drawn = if s.line {
            chart.draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?
        } else {
            chart.draw_series(pts.iter().map(|&p| Circle::new(p, 2, color.filled())))?
        };
        drawn.label(s.label.as_str()).legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}
