//! Hand-rolled SVG renderer for spectral counting curves.
//!
//! The plot is a pure function of the CSV bytes it reads: no model code
//! runs here, and identical CSVs render identical SVG bytes.

use std::fmt::Write as _;

/// One parsed curve point.
#[derive(Debug, Clone, Copy)]
pub struct CsvRow {
    pub lambda: f64,
    pub value: f64,
    pub std: f64,
    pub scale: f64,
}

/// A parsed curve file: the config hash from the comment line plus rows.
#[derive(Debug, Clone)]
pub struct CurveFile {
    pub config_hash: Option<String>,
    pub rows: Vec<CsvRow>,
}

/// Parse a `lambda,value,std,scale` CSV as written by the run
/// subcommands: `#` lines are comments (the first carries the config
/// hash), the header names the columns.
pub fn parse_curve_csv(text: &str) -> Result<CurveFile, String> {
    let mut config_hash = None;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(hash) = rest.strip_prefix("config_hash ") {
                config_hash = Some(hash.trim().to_string());
            }
            continue;
        }
        if !header_seen {
            let expected = "lambda,value,std,scale";
            if line != expected {
                return Err(format!(
                    "line {}: expected header `{expected}`, got `{line}`",
                    k + 1
                ));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(format!("line {}: expected 4 columns", k + 1));
        }
        let parse = |s: &str, what: &str| -> Result<f64, String> {
            s.parse::<f64>()
                .map_err(|_| format!("line {}: bad {what} `{s}`", k + 1))
        };
        rows.push(CsvRow {
            lambda: parse(fields[0], "lambda")?,
            value: parse(fields[1], "value")?,
            std: parse(fields[2], "std")?,
            scale: parse(fields[3], "scale")?,
        });
    }
    if !header_seen {
        return Err("no header line found".to_string());
    }
    Ok(CurveFile { config_hash, rows })
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

fn fmt(x: f64) -> String {
    // Fixed two-decimal coordinates keep the file small and stable.
    format!("{x:.2}")
}

fn fmt_tick(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn ticks(min: f64, max: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| min + (max - min) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Render counting curves: one polyline per distinct `scale` value of
/// the primary file, plus an optional dashed overlay (the trace-side
/// estimate). Returns the SVG document.
pub fn render_curves(primary: &CurveFile, overlay: Option<&CurveFile>) -> Result<String, String> {
    if primary.rows.is_empty() {
        return Err("no rows to plot".to_string());
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let all_rows = primary
        .rows
        .iter()
        .chain(overlay.map(|o| o.rows.iter()).unwrap_or_default());
    for row in all_rows {
        x_min = x_min.min(row.lambda);
        x_max = x_max.max(row.lambda);
        y_max = y_max.max(row.value);
    }
    if !(x_min < x_max) {
        return Err("degenerate lambda range".to_string());
    }
    let frame = Frame {
        x_min,
        x_max,
        y_min: 0.0,
        y_max: (y_max * 1.05).max(1e-9),
    };

    // Group primary rows by scale, preserving first-appearance order.
    let mut scales: Vec<f64> = Vec::new();
    for row in &primary.rows {
        if !scales.iter().any(|&s| s == row.scale) {
            scales.push(row.scale);
        }
    }

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    let _ = write!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );
    if let Some(hash) = &primary.config_hash {
        let _ = write!(svg, "<!-- config_hash {hash} -->\n");
    }

    // Axes.
    let x0 = frame.x(frame.x_min);
    let x1 = frame.x(frame.x_max);
    let y0 = frame.y(frame.y_min);
    let y1 = frame.y(frame.y_max);
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#222\" stroke-width=\"1\"/>\n",
        fmt(x0), fmt(y0), fmt(x1), fmt(y0)
    );
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#222\" stroke-width=\"1\"/>\n",
        fmt(x0), fmt(y0), fmt(x0), fmt(y1)
    );
    for t in ticks(frame.x_min, frame.x_max, 7) {
        let x = frame.x(t);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#222\" stroke-width=\"1\"/>\n",
            fmt(x), fmt(y0), fmt(x), fmt(y0 + 5.0)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" fill=\"#222\">{}</text>\n",
            fmt(x), fmt(y0 + 20.0), fmt_tick(t)
        );
    }
    for t in ticks(frame.y_min, frame.y_max, 6) {
        let y = frame.y(t);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#222\" stroke-width=\"1\"/>\n",
            fmt(x0 - 5.0), fmt(y), fmt(x0), fmt(y)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" fill=\"#222\">{}</text>\n",
            fmt(x0 - 9.0), fmt(y + 4.0), fmt_tick(t)
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" fill=\"#222\">spectral parameter</text>\n",
        fmt((x0 + x1) / 2.0), fmt(HEIGHT - 10.0)
    );
    let _ = write!(
        svg,
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" fill=\"#222\" transform=\"rotate(-90 16 {})\">counting function</text>\n",
        fmt((y0 + y1) / 2.0), fmt((y0 + y1) / 2.0)
    );

    // Curves, one per scale, each under a shaded +-std band when the
    // file reports a nonzero spread.
    for (k, &scale) in scales.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let rows: Vec<&CsvRow> = primary.rows.iter().filter(|r| r.scale == scale).collect();
        if rows.iter().any(|r| r.std > 0.0) {
            let mut band = String::new();
            for row in &rows {
                let y = (row.value + row.std).min(frame.y_max);
                let _ = write!(band, "{},{} ", fmt(frame.x(row.lambda)), fmt(frame.y(y)));
            }
            for row in rows.iter().rev() {
                let y = (row.value - row.std).max(frame.y_min);
                let _ = write!(band, "{},{} ", fmt(frame.x(row.lambda)), fmt(frame.y(y)));
            }
            let _ = write!(
                svg,
                "<polygon fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\" points=\"{}\"/>\n",
                band.trim_end()
            );
        }
        let mut points = String::new();
        for row in &rows {
            let _ = write!(points, "{},{} ", fmt(frame.x(row.lambda)), fmt(frame.y(row.value)));
        }
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.trim_end()
        );
        let ly = MARGIN_TOP + 16.0 * k as f64;
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            fmt(WIDTH - 170.0), fmt(ly), fmt(WIDTH - 146.0), fmt(ly)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">scale {}</text>\n",
            fmt(WIDTH - 140.0), fmt(ly + 4.0), fmt_tick(scale)
        );
    }

    if let Some(overlay) = overlay {
        if !overlay.rows.is_empty() {
            let mut points = String::new();
            for row in &overlay.rows {
                let _ = write!(points, "{},{} ", fmt(frame.x(row.lambda)), fmt(frame.y(row.value)));
            }
            let _ = write!(
                svg,
                "<polyline fill=\"none\" stroke=\"#111\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\" points=\"{}\"/>\n",
                points.trim_end()
            );
            let ly = MARGIN_TOP + 16.0 * scales.len() as f64;
            let _ = write!(
                svg,
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#111\" stroke-width=\"3\" stroke-dasharray=\"6 4\"/>\n",
                fmt(WIDTH - 170.0), fmt(ly), fmt(WIDTH - 146.0), fmt(ly)
            );
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">trace-side estimate</text>\n",
                fmt(WIDTH - 140.0), fmt(ly + 4.0)
            );
        }
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# config_hash deadbeef\nlambda,value,std,scale\n-2.0,0.0,0.0,8\n0.0,0.5,0.01,8\n2.0,1.0,0.0,8\n-2.0,0.0,0.0,16\n0.0,0.5,0.005,16\n2.0,1.0,0.0,16\n";

    #[test]
    fn parses_hash_and_rows() {
        let file = parse_curve_csv(SAMPLE).unwrap();
        assert_eq!(file.config_hash.as_deref(), Some("deadbeef"));
        assert_eq!(file.rows.len(), 6);
        assert_eq!(file.rows[1].value, 0.5);
    }

    #[test]
    fn rejects_wrong_header() {
        let err = parse_curve_csv("a,b\n1,2\n").unwrap_err();
        assert!(err.contains("header"), "{err}");
    }

    #[test]
    fn render_is_pure_in_the_csv_bytes() {
        let file = parse_curve_csv(SAMPLE).unwrap();
        let a = render_curves(&file, None).unwrap();
        let b = render_curves(&file, None).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("config_hash deadbeef"));
        assert!(a.contains("<polyline"));
        assert!(a.contains("scale 8") && a.contains("scale 16"));
    }

    #[test]
    fn overlay_draws_dashed_curve() {
        let file = parse_curve_csv(SAMPLE).unwrap();
        let svg = render_curves(&file, Some(&file)).unwrap();
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("trace-side estimate"));
    }
}
