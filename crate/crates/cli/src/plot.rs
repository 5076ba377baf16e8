use std::fmt::Write as _;

use velobound_core::observables::ExperimentReport;

use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Parses a report CSV and renders it.
pub fn plot_csv(text: &str) -> Result<String, CliError> {
    let report = ExperimentReport::parse_csv(text).map_err(|e| CliError::Schema(e.to_string()))?;
    Ok(plot_report(&report))
}

/// Log-x line plot of the integrand and cumulative columns.
///
/// Polylines carry data coordinates `(log10 t, value)`; an enclosing transform maps them to
/// the canvas, so the path data can be read back directly.
pub fn plot_report(report: &ExperimentReport) -> String {
    let rows: Vec<_> = report.rows.iter().filter(|r| r.t > 0.0).collect();
    let (mut x0, mut x1) = (0.0f64, 1.0f64);
    let (mut y0, mut y1) = (0.0f64, 1.0f64);
    if !rows.is_empty() {
        x0 = rows.iter().map(|r| r.t.log10()).fold(f64::INFINITY, f64::min);
        x1 = rows.iter().map(|r| r.t.log10()).fold(f64::NEG_INFINITY, f64::max);
        let values = rows.iter().flat_map(|r| [r.integrand, r.cumulative]).filter(|v| v.is_finite());
        let (lo, hi) = values.fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
        y0 = lo;
        y1 = hi;
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
    }
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let (sx, sy) = (pw / (x1 - x0), ph / (y1 - y0));
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    writeln!(
        svg,
        r#"<path id="axes" d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    )
    .unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">log10 t</text>"#, WIDTH / 2.0, HEIGHT - 12.0).unwrap();
    writeln!(svg, r#"<text x="{left}" y="{}" font-size="10">{x0:.3}</text>"#, bottom + 14.0).unwrap();
    writeln!(svg, r#"<text x="{right}" y="{}" text-anchor="end" font-size="10">{x1:.3}</text>"#, bottom + 14.0).unwrap();
    writeln!(svg, r#"<text x="{}" y="{bottom}" text-anchor="end" font-size="10">{y0:.3e}</text>"#, left - 4.0).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{y1:.3e}</text>"#, left - 4.0, top + 4.0).unwrap();
    if !rows.is_empty() {
        writeln!(
            svg,
            r#"<g transform="translate({} {}) scale({sx} {})">"#,
            left - sx * x0,
            bottom + sy * y0,
            -sy
        )
        .unwrap();
        for (id, color, pick) in [
            ("integrand", "steelblue", 0usize),
            ("cumulative", "firebrick", 1usize),
        ] {
            let points: Vec<String> = rows
                .iter()
                .map(|r| {
                    let y = if pick == 0 { r.integrand } else { r.cumulative };
                    format!("{},{}", r.t.log10(), y)
                })
                .collect();
            writeln!(
                svg,
                r#"<polyline id="{id}" points="{}" stroke="{color}" fill="none" vector-effect="non-scaling-stroke"/>"#,
                points.join(" ")
            )
            .unwrap();
        }
        writeln!(svg, "</g>").unwrap();
    }
    writeln!(svg, r#"<text x="{}" y="{}" font-size="11" fill="steelblue">integrand</text>"#, right - 120.0, top - 20.0).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" font-size="11" fill="firebrick">cumulative</text>"#, right - 60.0, top - 20.0).unwrap();
    svg.push_str("</svg>\n");
    svg
}

/// `(x, y)` pairs of the polyline with the given id.
pub fn polyline_points(svg: &str, id: &str) -> Option<Vec<(f64, f64)>> {
    let start = svg.find(&format!(r#"<polyline id="{id}" points=""#))?;
    let rest = &svg[start..];
    let open = rest.find("points=\"")? + "points=\"".len();
    let close = rest[open..].find('"')? + open;
    rest[open..close]
        .split_whitespace()
        .map(|pair| {
            let (x, y) = pair.split_once(',')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use velobound_core::observables::ReportRow;

    fn report(values: &[(f64, f64)]) -> ExperimentReport {
        let mut r = ExperimentReport::default();
        r.push_meta("kind", "minimal");
        let mut cumulative = 0.0;
        for &(t, v) in values {
            cumulative += v;
            r.rows.push(ReportRow {
                t,
                integrand: v,
                cumulative,
                boundary_mass: 0.0,
            });
        }
        r
    }

    #[test]
    fn empty_report_gives_axes_only() {
        let svg = plot_csv(&report(&[]).to_csv_string()).unwrap();
        assert!(svg.contains(r#"id="axes""#));
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let csv = report(&[(1.0, 0.5), (2.0, 0.25), (4.0, 0.125)]).to_csv_string();
        assert_eq!(plot_csv(&csv).unwrap(), plot_csv(&csv).unwrap());
    }

    #[test]
    fn cumulative_polyline_is_nondecreasing() {
        let csv = report(&[(1.0, 0.3), (1.5, 0.2), (3.0, 0.0), (10.0, 0.05)]).to_csv_string();
        let svg = plot_csv(&csv).unwrap();
        let pts = polyline_points(&svg, "cumulative").unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].0 > w[0].0));
    }

    #[test]
    fn schema_mismatch_rejected() {
        assert!(matches!(plot_csv("index,eigenvalue\n0,1\n"), Err(CliError::Schema(_))));
    }
}
