//! Tabular payloads, CSV emission and standalone SVG plots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Bool(bool),
    Real(f64),
    Text(String),
}

impl Cell {
    /// Shortest representation that parses back to the same value.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Real(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Real(v) => Some(*v),
            Cell::Text(s) => s.parse().ok(),
            Cell::Bool(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        // JSON has no non-finite numbers
        if v.is_finite() {
            Cell::Real(v)
        } else {
            Cell::Text(format!("{v:?}"))
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map(Into::into).unwrap_or_else(|| Cell::Text(String::new()))
    }
}

/// Result table plus the structured report that goes into the sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub report: serde_json::Value,
    pub hypothesis_violated: bool,
}

impl Payload {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            report: serde_json::Value::Null,
            hypothesis_violated: false,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// CSV text with the config hash as the first column of every row.
    pub fn to_csv(&self, config_hash: &str) -> anyhow::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["config_hash".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![config_hash.to_string()];
            rec.extend(row.iter().map(Cell::render));
            w.write_record(&rec)?;
        }
        Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
    }

    /// Rows as JSON objects keyed by column, each carrying the config hash.
    pub fn rows_json(&self, config_hash: &str) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                obj.insert("config_hash".into(), config_hash.into());
                for (c, v) in self.columns.iter().zip(row) {
                    obj.insert(c.clone(), serde_json::to_value(v).expect("cell serializes"));
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

/// One plotted series.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Standalone SVG line plot. With `log_axes` both axes are logarithmic and
/// non-positive points are dropped; `steps` draws staircases.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_axes: bool, steps: bool) -> String {
    let (w, h, pad) = (640.0, 420.0, 56.0);
    let tf = |v: f64| if log_axes { v.log10() } else { v };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| !log_axes || (*x > 0.0 && *y > 0.0))
                .map(|(x, y)| (tf(*x), tf(*y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{pad},{pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let axis = |v: f64| if log_axes { format!("1e{v:.2}") } else { format!("{v:.4}") };
    for (v, anchor, x, y) in [
        (x0, "start", sx(x0), h - pad + 18.0),
        (x1, "end", sx(x1), h - pad + 18.0),
    ] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{}</text>"#, axis(v));
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1) + 10.0)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#, pad - 4.0, axis(v));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, (s, p)) in series.iter().zip(&pts).enumerate() {
        if p.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let mut d = format!("M{:.2},{:.2}", sx(p[0].0), sy(p[0].1));
        for win in p.windows(2) {
            if steps {
                let _ = write!(d, " H{:.2} V{:.2}", sx(win[1].0), sy(win[1].1));
            } else {
                let _ = write!(d, " L{:.2},{:.2}", sx(win[1].0), sy(win[1].1));
            }
        }
        let _ = writeln!(svg, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        if !steps {
            for (x, y) in p {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(*x), sy(*y));
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            w - pad + 4.0 - 120.0,
            pad + 14.0 * (i as f64 + 1.0),
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_through_csv() {
        let mut p = Payload::new(&["x", "flag", "note"]);
        let x = 0.1 + 0.2;
        p.push(vec![x.into(), true.into(), "a,b".into()]);
        p.push(vec![f64::NAN.into(), false.into(), Cell::from(None::<f64>)]);
        let text = String::from_utf8(p.to_csv("abc").unwrap()).unwrap();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(&rows[0][0], "abc");
        assert_eq!(rows[0][1].parse::<f64>().unwrap(), x);
        assert_eq!(&rows[0][3], "a,b");
        assert_eq!(&rows[1][1], "NaN");
    }

    #[test]
    fn payload_json_round_trip_is_exact() {
        let mut p = Payload::new(&["v"]);
        for v in [1e-300, 0.1 + 0.2, 123456789.123456789, -2.5e17] {
            p.push(vec![v.into()]);
        }
        let back: Payload = serde_json::from_slice(&serde_json::to_vec(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn plots_are_standalone_svg() {
        let s = Series { label: "E = 0.1".into(), points: vec![(1e-3, 1e-4), (1e-2, 1e-3), (0.0, 1.0)] };
        let svg = line_plot("modulus", "η", "N(E+η) − N(E−η)", &[s], true, false);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
