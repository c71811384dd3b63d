use std::io::{BufRead, Write};

use crate::Real;

use super::HarnessError;

/// One plotted series: shared x positions and one y vector per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub xs: Vec<Real>,
    pub ys_per_seed: Vec<Vec<Real>>,
}

/// Per-series mean and standard deviation across seeds at each x.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub name: String,
    pub xs: Vec<Real>,
    pub mean: Vec<Real>,
    pub std: Vec<Real>,
}

/// The computed plot: what the SVG renders.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotModel {
    pub series: Vec<SeriesStats>,
    pub x_label: String,
    pub y_label: String,
}

impl PlotModel {
    /// Computes per-x mean and (population) standard deviation across
    /// seeds. Mismatched lengths within a series are an input error.
    pub fn build(
        series: &[PlotSeries],
        x_label: &str,
        y_label: &str,
    ) -> Result<Self, HarnessError> {
        if series.is_empty() {
            return Err(HarnessError::Plot("need at least one series".into()));
        }
        let mut out = Vec::with_capacity(series.len());
        for s in series {
            if s.ys_per_seed.is_empty() {
                return Err(HarnessError::Plot(format!("series {:?} has no seeds", s.name)));
            }
            for ys in &s.ys_per_seed {
                if ys.len() != s.xs.len() {
                    return Err(HarnessError::Plot(format!(
                        "series {:?}: seed curve has {} points, x axis has {}",
                        s.name,
                        ys.len(),
                        s.xs.len()
                    )));
                }
            }
            let n = s.ys_per_seed.len() as Real;
            let mut mean = vec![0.0; s.xs.len()];
            let mut std = vec![0.0; s.xs.len()];
            for i in 0..s.xs.len() {
                let m = s.ys_per_seed.iter().map(|ys| ys[i]).sum::<Real>() / n;
                let var = s
                    .ys_per_seed
                    .iter()
                    .map(|ys| (ys[i] - m) * (ys[i] - m))
                    .sum::<Real>()
                    / n;
                mean[i] = m;
                std[i] = var.sqrt();
            }
            out.push(SeriesStats {
                name: s.name.clone(),
                xs: s.xs.clone(),
                mean,
                std,
            });
        }
        Ok(Self {
            series: out,
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
        })
    }
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Pixel mapping for the plot area.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Geometry {
    pub fn of(model: &PlotModel) -> Self {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for s in &model.series {
            for (i, &x) in s.xs.iter().enumerate() {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(s.mean[i] - s.std[i]);
                y_max = y_max.max(s.mean[i] + s.std[i]);
            }
        }
        // Degenerate ranges get a symmetric pad so the data stays visible.
        if !(x_max > x_min) {
            x_min -= 1.0;
            x_max += 1.0;
        }
        if !(y_max > y_min) {
            y_min -= 1.0;
            y_max += 1.0;
        }
        Self { x_min, x_max, y_min, y_max }
    }

    pub fn x_px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    pub fn y_px(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn fmt_px(v: f64) -> String {
    format!("{:.2}", v)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e6).contains(&a) {
        format!("{v:.4}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Renders the plot as a self-contained SVG document: one mean line per
/// series with a shaded band of plus/minus one standard deviation across
/// seeds, axes with ticks, and a legend.
pub fn emit_plot<W: Write>(model: &PlotModel, w: &mut W) -> std::io::Result<()> {
    let g = Geometry::of(model);
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )?;
    writeln!(w, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>")?;

    // Axes.
    let (x0, y0) = (MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM);
    let (x1, y1) = (WIDTH - MARGIN_RIGHT, MARGIN_TOP);
    writeln!(
        w,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt_px(x0), fmt_px(y0), fmt_px(x1), fmt_px(y0)
    )?;
    writeln!(
        w,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt_px(x0), fmt_px(y0), fmt_px(x0), fmt_px(y1)
    )?;
    for i in 0..=4 {
        let fx = g.x_min + (g.x_max - g.x_min) * i as f64 / 4.0;
        let fy = g.y_min + (g.y_max - g.y_min) * i as f64 / 4.0;
        writeln!(
            w,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            fmt_px(g.x_px(fx)),
            fmt_px(HEIGHT - MARGIN_BOTTOM + 18.0),
            fmt_tick(fx)
        )?;
        writeln!(
            w,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
            fmt_px(MARGIN_LEFT - 6.0),
            fmt_px(g.y_px(fy) + 4.0),
            fmt_tick(fy)
        )?;
        writeln!(
            w,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>",
            fmt_px(x0),
            fmt_px(g.y_px(fy)),
            fmt_px(x1),
            fmt_px(g.y_px(fy))
        )?;
    }
    writeln!(
        w,
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        fmt_px((x0 + x1) / 2.0),
        fmt_px(HEIGHT - 16.0),
        xml_escape(&model.x_label)
    )?;
    writeln!(
        w,
        "<text x=\"18\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {})\">{}</text>",
        fmt_px((y0 + y1) / 2.0),
        fmt_px((y0 + y1) / 2.0),
        xml_escape(&model.y_label)
    )?;

    for (idx, s) in model.series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        // Band: upper edge left to right, then lower edge right to left.
        let mut points = String::new();
        for (i, &x) in s.xs.iter().enumerate() {
            points.push_str(&format!(
                "{},{} ",
                fmt_px(g.x_px(x)),
                fmt_px(g.y_px(s.mean[i] + s.std[i]))
            ));
        }
        for (i, &x) in s.xs.iter().enumerate().rev() {
            points.push_str(&format!(
                "{},{} ",
                fmt_px(g.x_px(x)),
                fmt_px(g.y_px(s.mean[i] - s.std[i]))
            ));
        }
        writeln!(
            w,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            points.trim_end()
        )?;
        let line: Vec<String> = s
            .xs
            .iter()
            .enumerate()
            .map(|(i, &x)| format!("{},{}", fmt_px(g.x_px(x)), fmt_px(g.y_px(s.mean[i]))))
            .collect();
        writeln!(
            w,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
            line.join(" ")
        )?;
        let ly = MARGIN_TOP + 18.0 * idx as f64 + 8.0;
        writeln!(
            w,
            "<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"4\" fill=\"{color}\"/>",
            fmt_px(WIDTH - MARGIN_RIGHT + 14.0),
            fmt_px(ly)
        )?;
        writeln!(
            w,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>",
            fmt_px(WIDTH - MARGIN_RIGHT + 34.0),
            fmt_px(ly + 6.0),
            xml_escape(&s.name)
        )?;
    }
    writeln!(w, "</svg>")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Extracts two named columns from a CSV produced by this crate
/// (`#` comment lines are skipped; empty fields are an error).
pub fn read_xy_column<R: BufRead>(
    r: &mut R,
    x_col: &str,
    y_col: &str,
) -> Result<(Vec<Real>, Vec<Real>), HarnessError> {
    let mut lines = r
        .lines()
        .collect::<Result<Vec<String>, _>>()?
        .into_iter()
        .filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Csv("empty csv".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| HarnessError::Csv(format!("no column named {name:?}")))
    };
    let xi = find(x_col)?;
    let yi = find(y_col)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<Real, HarnessError> {
            fields
                .get(i)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| HarnessError::Csv(format!("line {}: bad field {i}", n + 2)))
        };
        xs.push(get(xi)?);
        ys.push(get(yi)?);
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(name: &str, ys: Vec<Vec<Real>>) -> PlotSeries {
        let n = ys[0].len();
        PlotSeries {
            name: name.into(),
            xs: (0..n).map(|i| i as Real).collect(),
            ys_per_seed: ys,
        }
    }

    #[test]
    fn band_half_width_is_the_std_across_seeds() {
        let s = series("a", vec![vec![1.0, 2.0, 4.0], vec![3.0, 2.0, 8.0]]);
        let model = PlotModel::build(&[s], "x", "y").unwrap();
        let stats = &model.series[0];
        // Direct computation: mean of {1,3} = 2, std = 1; etc.
        assert_eq!(stats.mean, vec![2.0, 2.0, 6.0]);
        assert_eq!(stats.std, vec![1.0, 0.0, 2.0]);
    }

    #[test]
    fn single_seed_has_zero_band() {
        let s = series("only", vec![vec![0.5, 0.25, 0.125]]);
        let model = PlotModel::build(&[s], "x", "y").unwrap();
        assert!(model.series[0].std.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_lengths_error() {
        let bad = PlotSeries {
            name: "bad".into(),
            xs: vec![0.0, 1.0],
            ys_per_seed: vec![vec![1.0, 2.0], vec![1.0]],
        };
        assert!(PlotModel::build(&[bad], "x", "y").is_err());
    }

    #[test]
    fn constant_series_renders_a_horizontal_line() {
        let s = series("flat", vec![vec![3.0, 3.0, 3.0]]);
        let model = PlotModel::build(&[s], "x", "y").unwrap();
        let g = Geometry::of(&model);
        let y = g.y_px(3.0);
        let mut buf = Vec::new();
        emit_plot(&model, &mut buf).unwrap();
        let svg = String::from_utf8(buf).unwrap();
        let expected = format!("{},{}", fmt_px(g.x_px(0.0)), fmt_px(y));
        assert!(svg.contains(&expected), "svg missing {expected}");
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn csv_column_extraction() {
        let text = "# comment\na,b,c\n1,10,0.5\n2,20,0.25\n";
        let (xs, ys) = read_xy_column(&mut text.as_bytes(), "a", "c").unwrap();
        assert_eq!(xs, vec![1.0, 2.0]);
        assert_eq!(ys, vec![0.5, 0.25]);
        assert!(read_xy_column(&mut text.as_bytes(), "a", "nope").is_err());
    }
}
