//! Minimal single-file SVG plotting for the SROC figure: study points,
//! quantile curves, density contours by marching squares, and the summary
//! operating point. Specificity runs along a reversed x axis, ROC style.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 60.0;

/// Sensitivity on y (up), specificity on x reversed: spec=1 at the left.
fn to_px(sens: f64, spec: f64) -> (f64, f64) {
    let x = MARGIN + (1.0 - spec) * (WIDTH - 2.0 * MARGIN);
    let y = HEIGHT - MARGIN - sens * (HEIGHT - 2.0 * MARGIN);
    (x, y)
}

pub struct SvgPlot {
    body: String,
}

impl SvgPlot {
    pub fn new(title: &str) -> Self {
        let mut body = String::new();
        body.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
             <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
        ));
        // frame
        let (x0, y0) = to_px(0.0, 1.0);
        let (x1, y1) = to_px(1.0, 0.0);
        body.push_str(&format!(
            "<rect x=\"{x0}\" y=\"{y1}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
            x1 - x0,
            y0 - y1
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
            WIDTH / 2.0,
            escape(title)
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">Specificity</text>\n",
            WIDTH / 2.0,
            HEIGHT - 16.0
        ));
        body.push_str(&format!(
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" \
             transform=\"rotate(-90 18 {})\">Sensitivity</text>\n",
            HEIGHT / 2.0,
            HEIGHT / 2.0
        ));
        // axis ticks every 0.2
        for i in 0..=5 {
            let v = i as f64 * 0.2;
            let (tx, _) = to_px(0.0, v);
            body.push_str(&format!(
                "<text x=\"{tx}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{v:.1}</text>\n",
                HEIGHT - MARGIN + 18.0
            ));
            let (_, ty) = to_px(v, 1.0);
            body.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{v:.1}</text>\n",
                MARGIN - 8.0,
                ty + 4.0
            ));
        }
        SvgPlot { body }
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], color: &str, width: f64, dash: Option<&str>) {
        if points.len() < 2 {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(s, p)| {
                let (x, y) = to_px(s, p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let dash_attr = dash.map_or(String::new(), |d| format!(" stroke-dasharray=\"{d}\""));
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash_attr}/>\n",
            coords.join(" ")
        ));
    }

    pub fn circle(&mut self, sens: f64, spec: f64, r: f64, color: &str) {
        let (x, y) = to_px(sens, spec);
        self.body.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>\n"
        ));
    }

    pub fn cross(&mut self, sens: f64, spec: f64, size: f64, color: &str) {
        let (x, y) = to_px(sens, spec);
        self.body.push_str(&format!(
            "<path d=\"M {} {} L {} {} M {} {} L {} {}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            x - size,
            y - size,
            x + size,
            y + size,
            x - size,
            y + size,
            x + size,
            y - size
        ));
    }

    pub fn comment(&mut self, text: &str) {
        self.body.push_str(&format!("<!-- {} -->\n", escape(text)));
    }

    pub fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Marching-squares level contours of a density sampled on a rectangular
/// grid; returns line segments as ((sens,spec),(sens,spec)) pairs.
pub fn contour_segments(
    grid_x1: &[f64],
    grid_x2: &[f64],
    density: &[Vec<f64>],
    level: f64,
) -> Vec<((f64, f64), (f64, f64))> {
    let mut segments = Vec::new();
    let interp = |a: f64, b: f64, va: f64, vb: f64| -> f64 {
        if (vb - va).abs() < 1e-300 {
            0.5 * (a + b)
        } else {
            a + (level - va) / (vb - va) * (b - a)
        }
    };
    for i in 0..grid_x1.len().saturating_sub(1) {
        for j in 0..grid_x2.len().saturating_sub(1) {
            let v = [
                density[i][j],
                density[i + 1][j],
                density[i + 1][j + 1],
                density[i][j + 1],
            ];
            let mut case = 0usize;
            for (b, &val) in v.iter().enumerate() {
                if val > level {
                    case |= 1 << b;
                }
            }
            if case == 0 || case == 15 {
                continue;
            }
            // edge midpoints by linear interpolation; corners of the cell:
            // 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
            let edge = |e: usize| -> (f64, f64) {
                match e {
                    0 => (
                        interp(grid_x1[i], grid_x1[i + 1], v[0], v[1]),
                        grid_x2[j],
                    ),
                    1 => (
                        grid_x1[i + 1],
                        interp(grid_x2[j], grid_x2[j + 1], v[1], v[2]),
                    ),
                    2 => (
                        interp(grid_x1[i], grid_x1[i + 1], v[3], v[2]),
                        grid_x2[j + 1],
                    ),
                    _ => (
                        grid_x1[i],
                        interp(grid_x2[j], grid_x2[j + 1], v[0], v[3]),
                    ),
                }
            };
            // lookup table over the 14 non-trivial cases; saddles split
            // by the cell-average rule
            let pairs: &[(usize, usize)] = match case {
                1 | 14 => &[(0, 3)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(1, 3)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(2, 3)],
                5 => {
                    let avg = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                    if avg > level {
                        &[(0, 1), (2, 3)]
                    } else {
                        &[(0, 3), (1, 2)]
                    }
                }
                10 => {
                    let avg = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                    if avg > level {
                        &[(0, 3), (1, 2)]
                    } else {
                        &[(0, 1), (2, 3)]
                    }
                }
                _ => &[],
            };
            for &(a, b) in pairs {
                segments.push((edge(a), edge(b)));
            }
        }
    }
    segments
}

/// The density level whose superlevel set holds the given probability mass,
/// found from the grid cells themselves.
pub fn mass_level(
    grid_x1: &[f64],
    grid_x2: &[f64],
    density: &[Vec<f64>],
    mass: f64,
) -> f64 {
    let mut cells: Vec<(f64, f64)> = Vec::new();
    for i in 0..grid_x1.len().saturating_sub(1) {
        for j in 0..grid_x2.len().saturating_sub(1) {
            let d = 0.25
                * (density[i][j]
                    + density[i + 1][j]
                    + density[i][j + 1]
                    + density[i + 1][j + 1]);
            let area = (grid_x1[i + 1] - grid_x1[i]) * (grid_x2[j + 1] - grid_x2[j]);
            cells.push((d, d * area));
        }
    }
    cells.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let total: f64 = cells.iter().map(|c| c.1).sum();
    let target = mass * total;
    let mut acc = 0.0;
    for (d, m) in &cells {
        acc += m;
        if acc >= target {
            return *d;
        }
    }
    cells.last().map_or(0.0, |c| c.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_grid() -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let axis: Vec<f64> = (0..60).map(|i| 0.01 + 0.98 * i as f64 / 59.0).collect();
        let density: Vec<Vec<f64>> = axis
            .iter()
            .map(|&x| {
                axis.iter()
                    .map(|&y| {
                        let dx = (x - 0.5) / 0.12;
                        let dy = (y - 0.5) / 0.12;
                        (-0.5 * (dx * dx + dy * dy)).exp()
                    })
                    .collect()
            })
            .collect();
        (axis.clone(), axis, density)
    }

    #[test]
    fn contour_of_radial_density_is_a_circle() {
        let (gx, gy, d) = gaussian_grid();
        let segs = contour_segments(&gx, &gy, &d, 0.5);
        assert!(!segs.is_empty());
        // every segment endpoint sits at the radius where the density
        // crosses the level: r = 0.12 * sqrt(2 ln 2)
        let r = 0.12 * (2.0 * 2.0_f64.ln()).sqrt();
        for ((x1, y1), (x2, y2)) in segs {
            for (x, y) in [(x1, y1), (x2, y2)] {
                let got = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
                assert!((got - r).abs() < 0.01, "point ({x},{y}) radius {got} vs {r}");
            }
        }
    }

    #[test]
    fn mass_level_is_monotone_in_mass() {
        let (gx, gy, d) = gaussian_grid();
        let l50 = mass_level(&gx, &gy, &d, 0.5);
        let l95 = mass_level(&gx, &gy, &d, 0.95);
        assert!(l50 > l95, "50% level {l50} should exceed 95% level {l95}");
        assert!(l95 > 0.0);
    }

    #[test]
    fn plot_renders_wellformed_svg() {
        let mut plot = SvgPlot::new("test");
        plot.polyline(&[(0.2, 0.9), (0.8, 0.4)], "red", 1.0, None);
        plot.circle(0.5, 0.5, 3.0, "black");
        plot.cross(0.6, 0.7, 5.0, "blue");
        let svg = plot.finish();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("<polyline"));
    }
}
