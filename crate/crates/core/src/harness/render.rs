//! Plain-text SVG line charts of the aggregated attack curves: objective,
//! cluster count and F-measure versus poison fraction.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::ExperimentResult;

/// One curve on a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// (poison fraction, value) pairs.
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

/// Render one SVG 1.1 line chart: labeled axes, five ticks per axis, one
/// polyline per series and a legend entry each.
pub fn line_chart(title: &str, y_label: &str, series: &[Series]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

    let x_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.05;

    let x_pos = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
    let y_pos = |y: f64| MARGIN_TOP + (1.0 - y / y_max) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        MARGIN_LEFT + plot_w / 2.0
    ));

    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    svg.push_str(&format!(
        "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>\n",
        x0 + plot_w
    ));
    svg.push_str(&format!(
        "  <line x1=\"{x0}\" y1=\"{MARGIN_TOP}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));

    for tick in 0..=4 {
        let fx = x_max * tick as f64 / 4.0;
        let px = x_pos(fx);
        svg.push_str(&format!(
            "  <line x1=\"{px}\" y1=\"{y0}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            y0 + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{px}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            y0 + 20.0,
            fmt_tick(fx)
        ));

        let fy = y_max * tick as f64 / 4.0;
        let py = y_pos(fy);
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            x0 - 8.0,
            py + 4.0,
            fmt_tick(fy)
        ));
    }

    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">poison fraction</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{y_label}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", x_pos(x), y_pos(y)))
            .collect();
        svg.push_str(&format!(
            "  <polyline class=\"series\" data-name=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            s.name,
            points.join(" ")
        ));

        let ly = MARGIN_TOP + 14.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w + 16.0;
        svg.push_str(&format!(
            "  <line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "  <text class=\"legend\" x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
            lx + 28.0,
            ly + 4.0,
            s.name
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

fn series_for<F>(res: &ExperimentResult, value: F) -> Vec<Series>
where
    F: Fn(&crate::harness::AggregateRow) -> f64,
{
    res.aggregates
        .iter()
        .map(|agg| Series {
            name: agg.strategy.slug().to_string(),
            points: agg
                .rows
                .iter()
                .map(|row| (row.poison_fraction, value(row)))
                .collect(),
        })
        .collect()
}

/// Write `objective.svg`, `clusters.svg` and `f_measure.svg` under `dir`.
pub fn render_curves(res: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    if res.aggregates.is_empty() || res.aggregates.iter().all(|a| a.rows.is_empty()) {
        return Err(Error::EmptyResult);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let charts: [(&str, &str, Vec<Series>); 3] = [
        (
            "objective.svg",
            "objective d_c",
            series_for(res, |r| r.objective_dc_mean),
        ),
        (
            "clusters.svg",
            "clusters",
            series_for(res, |r| r.clusters_mean),
        ),
        (
            "f_measure.svg",
            "F-measure",
            series_for(res, |r| r.f_measure_mean),
        ),
    ];

    let mut written = Vec::with_capacity(3);
    for (name, y_label, series) in charts {
        let title = format!("{y_label} vs. poison fraction");
        let svg = line_chart(&title, y_label, &series);
        let path = dir.join(name);
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Parse an aggregate CSV back into chart series input (used by the CLI
/// `render` subcommand).
pub fn parse_aggregate_csv(name: &str, content: &str) -> Result<(Series, Series, Series)> {
    let mut objective = Vec::new();
    let mut clusters = Vec::new();
    let mut f_measure = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if i == 0 {
            if line != crate::harness::AGGREGATE_CSV_HEADER {
                return Err(Error::MalformedRecord {
                    path: name.to_string(),
                    index: 1,
                    reason: "unexpected aggregate CSV header".into(),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |idx: usize| -> Result<f64> {
            fields
                .get(idx)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::MalformedRecord {
                    path: name.to_string(),
                    index: i + 1,
                    reason: format!("bad numeric field {idx}"),
                })
        };
        let fraction = parse(1)?;
        objective.push((fraction, parse(2)?));
        clusters.push((fraction, parse(4)?));
        f_measure.push((fraction, parse(10)?));
    }
    let mk = |points: Vec<(f64, f64)>| Series {
        name: name.to_string(),
        points,
    };
    Ok((mk(objective), mk(clusters), mk(f_measure)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extract_polyline_ys(svg: &str) -> Vec<Vec<f64>> {
        svg.lines()
            .filter(|l| l.contains("class=\"series\""))
            .map(|l| {
                let start = l.find("points=\"").unwrap() + 8;
                let end = l[start..].find('"').unwrap() + start;
                l[start..end]
                    .split(' ')
                    .map(|p| p.split(',').nth(1).unwrap().parse().unwrap())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn single_series_three_vertices() {
        let series = [Series {
            name: "bridge-best".into(),
            points: vec![(0.0, 0.0), (0.01, 5.0), (0.02, 9.0)],
        }];
        let svg = line_chart("objective", "objective", &series);
        let polylines = extract_polyline_ys(&svg);
        assert_eq!(polylines.len(), 1);
        assert_eq!(polylines[0].len(), 3);
        assert!(svg.contains("<svg xmlns"));
    }

    #[test]
    fn six_series_six_legend_entries() {
        let series: Vec<Series> = (0..6)
            .map(|i| Series {
                name: format!("s{i}"),
                points: vec![(0.0, 1.0), (0.05, 2.0 + i as f64)],
            })
            .collect();
        let svg = line_chart("clusters", "clusters", &series);
        let legends = svg
            .lines()
            .filter(|l| l.contains("class=\"legend\""))
            .count();
        assert_eq!(legends, 6);
        assert_eq!(extract_polyline_ys(&svg).len(), 6);
    }

    #[test]
    fn decreasing_values_render_monotone_svg_y() {
        // SVG y grows downward: a decreasing metric gives non-decreasing
        // polyline y coordinates.
        let series = [Series {
            name: "clusters".into(),
            points: vec![(0.0, 10.0), (0.01, 7.0), (0.02, 5.0), (0.03, 5.0)],
        }];
        let svg = line_chart("clusters", "clusters", &series);
        let ys = &extract_polyline_ys(&svg)[0];
        assert!(ys.windows(2).all(|w| w[0] <= w[1]));
    }
}
