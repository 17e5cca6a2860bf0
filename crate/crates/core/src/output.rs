//! CSV tables and self-contained SVG line plots.
//!
//! Numbers are written with 17 significant digits so that every `f64`
//! round-trips through the text exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::StepReport;
use crate::error::{Error, Result};
use crate::fem1d::Grid1D;
use crate::stepper::State;
use crate::study::ConvergenceStudy;

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(cells: impl IntoIterator<Item = String>) -> String {
    cells.into_iter().collect::<Vec<_>>().join(",")
}

pub fn solution_csv(grid: &Grid1D, frames: &[State]) -> String {
    let n = frames.first().map_or(0, |f| f.n_species());
    let mut header = vec!["t".to_string(), "y".to_string()];
    header.extend((1..=n).map(|i| format!("rho_{i}")));
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.push("Phi".into());
    let mut out = join(header) + "\n";
    for f in frames {
        for (j, c) in f.comps.iter().enumerate() {
            let mut row = vec![num(f.t), num(grid.node(j))];
            row.extend(c.rho.iter().map(|v| num(*v)));
            row.extend(c.x.iter().map(|v| num(*v)));
            row.push(num(f.phi[j]));
            out += &join(row);
            out.push('\n');
        }
    }
    out
}

pub fn diagnostics_csv(reports: &[StepReport]) -> String {
    let n = reports.first().map_or(0, |r| r.masses.len());
    let mut header = vec!["t".to_string(), "H".into(), "H_rel".into()];
    header.extend((1..=n).map(|i| format!("mass_{i}")));
    header.extend([
        "entropy_residual".into(),
        "iterations".into(),
        "zeta_inf".into(),
    ]);
    let mut out = join(header) + "\n";
    for r in reports {
        let mut row = vec![
            num(r.t),
            num(r.entropy),
            r.relative_entropy.map(num).unwrap_or_default(),
        ];
        row.extend(r.masses.iter().map(|m| num(*m)));
        row.extend([
            num(r.entropy_residual),
            r.iterations.to_string(),
            num(r.zeta_inf),
        ]);
        out += &join(row);
        out.push('\n');
    }
    out
}

/// One row per level with the observed order against the previous level, and a
/// closing `fit` row holding the least-squares orders.
pub fn convergence_csv(study: &ConvergenceStudy) -> String {
    let n = study.species_rates.len();
    let mut header = vec!["h".to_string()];
    header.extend((1..=n).map(|i| format!("err_rho_{i}")));
    header.push("err_Phi".into());
    header.extend((1..=n).map(|i| format!("rate_rho_{i}")));
    header.push("rate_Phi".into());
    let mut out = join(header) + "\n";
    for (k, level) in study.levels.iter().enumerate() {
        let mut row = vec![num(level.h)];
        row.extend(level.err_rho.iter().map(|e| num(*e)));
        row.push(num(level.err_phi));
        let rate = |r: &crate::diagnostics::Rates| {
            if k == 0 {
                String::new()
            } else {
                num(r.slopes[k - 1])
            }
        };
        row.extend(study.species_rates.iter().map(rate));
        row.push(rate(&study.phi_rate));
        out += &join(row);
        out.push('\n');
    }
    let mut row = vec!["fit".to_string()];
    row.extend(std::iter::repeat_n(String::new(), n + 1));
    row.extend(study.species_rates.iter().map(|r| num(r.fitted)));
    row.push(num(study.phi_rate.fitted));
    out += &join(row);
    out.push('\n');
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// One curve of a line plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            dashed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555",
];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom

impl LinePlot {
    fn transform(&self, (x, y): (f64, f64)) -> Option<(f64, f64)> {
        let x = if self.log_x { x.log10() } else { x };
        let y = if self.log_y { y.log10() } else { y };
        (x.is_finite() && y.is_finite()).then_some((x, y))
    }

    /// Renders the plot; `None` when no series has a drawable point.
    pub fn to_svg(&self) -> Option<String> {
        let data: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| s.points.iter().filter_map(|p| self.transform(*p)).collect())
            .collect();
        let all: Vec<&(f64, f64)> = data.iter().flatten().collect();
        if all.is_empty() {
            return None;
        }
        let bounds = |f: fn(&(f64, f64)) -> f64| {
            let lo = all.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(|p| f(p)).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > 1e-300 {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = bounds(|p| p.0);
        let (y0, y1) = bounds(|p| p.1);
        let (ml, mr, mt, mb) = MARGIN;
        let pw = WIDTH - ml - mr;
        let ph = HEIGHT - mt - mb;
        let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| mt + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                svg,
                r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                HEIGHT - mb + 16.0,
                tick(xv, self.log_x)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                ml - 6.0,
                py + 4.0,
                tick(yv, self.log_y)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            ml + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            mt + ph / 2.0,
            mt + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, (s, pts)) in self.series.iter().zip(&data).enumerate() {
            let color = COLORS[k % COLORS.len()];
            let coords: Vec<String> = pts
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                .collect();
            let dash = if s.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                coords.join(" ")
            );
            let ly = mt + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#,
                WIDTH - mr - 8.0,
                escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        Some(svg)
    }
}

fn tick(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Density profiles and potential of one frame.
pub fn profile_plots(grid: &Grid1D, frame: &State) -> Vec<(String, LinePlot)> {
    let ys = grid.nodes();
    let densities = LinePlot {
        title: format!("densities at t = {:.4}", frame.t),
        x_label: "y".into(),
        y_label: "rho_i".into(),
        log_x: false,
        log_y: false,
        series: (0..frame.n_species())
            .map(|i| {
                Series::new(
                    format!("rho_{}", i + 1),
                    ys.iter().copied().zip(frame.rho(i)).collect(),
                )
            })
            .collect(),
    };
    let potential = LinePlot {
        title: format!("potential at t = {:.4}", frame.t),
        x_label: "y".into(),
        y_label: "Phi".into(),
        log_x: false,
        log_y: false,
        series: vec![Series::new(
            "Phi",
            ys.iter().copied().zip(frame.phi.iter().copied()).collect(),
        )],
    };
    vec![
        ("densities.svg".into(), densities),
        ("potential.svg".into(), potential),
    ]
}

/// Entropy history, plus the semilog relative entropy when it was tracked.
pub fn history_plots(reports: &[StepReport]) -> Vec<(String, LinePlot)> {
    let mut plots = vec![(
        "entropy.svg".to_string(),
        LinePlot {
            title: "entropy".into(),
            x_label: "t".into(),
            y_label: "H".into(),
            log_x: false,
            log_y: false,
            series: vec![Series::new(
                "H",
                reports.iter().map(|r| (r.t, r.entropy)).collect(),
            )],
        },
    )];
    let rel: Vec<(f64, f64)> = reports
        .iter()
        .filter_map(|r| r.relative_entropy.map(|h| (r.t, h)))
        .filter(|(_, h)| *h > 0.0)
        .collect();
    if !rel.is_empty() {
        plots.push((
            "relative_entropy.svg".into(),
            LinePlot {
                title: "relative entropy".into(),
                x_label: "t".into(),
                y_label: "H*".into(),
                log_x: false,
                log_y: true,
                series: vec![Series::new("H*", rel)],
            },
        ));
    }
    plots
}

/// Log-log errors against the mesh width with a slope-2 guide.
pub fn convergence_plot(study: &ConvergenceStudy) -> LinePlot {
    let hs: Vec<f64> = study.levels.iter().map(|l| l.h).collect();
    let mut series: Vec<Series> = (0..study.species_rates.len())
        .map(|i| {
            Series::new(
                format!("rho_{}", i + 1),
                study.levels.iter().map(|l| (l.h, l.err_rho[i])).collect(),
            )
        })
        .collect();
    series.push(Series::new(
        "Phi",
        study.levels.iter().map(|l| (l.h, l.err_phi)).collect(),
    ));
    if let (Some(h0), Some(first)) = (hs.first(), study.levels.first()) {
        let e0 = first
            .err_rho
            .iter()
            .copied()
            .chain([first.err_phi])
            .fold(0.0, f64::max);
        let guide = hs.iter().map(|h| (*h, e0 * (h / h0).powi(2))).collect();
        series.push(Series {
            label: "slope 2".into(),
            points: guide,
            dashed: true,
        });
    }
    LinePlot {
        title: "L2 error".into(),
        x_label: "h".into(),
        y_label: "error".into(),
        log_x: true,
        log_y: true,
        series,
    }
}

/// Writes the plots into `dir`. Failures are logged and skipped; returns the
/// files written.
pub fn emit_plots(dir: &Path, plots: &[(String, LinePlot)]) -> Vec<PathBuf> {
    let mut written = Vec::new();
    for (name, plot) in plots {
        let path = dir.join(name);
        match plot.to_svg() {
            Some(svg) => match write_file(&path, &svg) {
                Ok(()) => written.push(path),
                Err(e) => log::warn!("plot {name} not written: {e}"),
            },
            None => log::warn!("plot {name} has no drawable data"),
        }
    }
    written
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(t: f64, h: f64, rel: Option<f64>) -> StepReport {
        StepReport {
            t,
            entropy: h,
            relative_entropy: rel,
            masses: vec![0.5, 0.5],
            entropy_residual: -1e-12,
            iterations: 2,
            zeta_inf: 1e-11,
            stationarity: 0.0,
        }
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::EPSILON] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(0.2), "2.0000000000000001e-1");
    }

    #[test]
    fn diagnostics_layout() {
        let csv = diagnostics_csv(&[report(0.0, 1.0, None), report(0.1, 0.5, Some(0.25))]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "t,H,H_rel,mass_1,mass_2,entropy_residual,iterations,zeta_inf"
        );
        assert_eq!(lines[1].split(',').nth(2), Some(""));
        assert_eq!(lines[2].split(',').count(), 8);
    }

    #[test]
    fn monotone_entropy_gives_monotone_polyline() {
        let reports: Vec<_> = (0..20)
            .map(|k| report(k as f64, 1.0 / (1.0 + k as f64), None))
            .collect();
        let plots = history_plots(&reports);
        assert_eq!(plots.len(), 1, "no relative-entropy plot without H_rel");
        let svg = plots[0].1.to_svg().unwrap();
        let points = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let ys: Vec<f64> = points
            .split(' ')
            .map(|p| p.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        // svg y grows downwards
        assert!(ys.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn relative_entropy_plot_when_present() {
        let reports: Vec<_> = (0..5)
            .map(|k| report(k as f64, 1.0, Some((-(k as f64)).exp())))
            .collect();
        let plots = history_plots(&reports);
        assert_eq!(plots.len(), 2);
        assert!(plots[1].1.log_y);
    }

    #[test]
    fn svg_is_deterministic() {
        let plot = LinePlot {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: false,
            log_y: false,
            series: vec![Series::new("s", vec![(0.0, 1.0), (1.0, 2.0)])],
        };
        let a = plot.to_svg().unwrap();
        assert_eq!(a, plot.to_svg().unwrap());
        assert!(a.contains("a &lt; b"));
        let empty = LinePlot {
            series: vec![Series::new("s", vec![(0.0, -1.0)])],
            log_y: true,
            ..plot
        };
        assert!(empty.to_svg().is_none());
    }
}
