//! Tabular results and their CSV, JSON and SVG renderings.
//!
//! Floats are written in their shortest round-trip form, so both the CSV
//! and the JSON carry full double precision.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as u64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Missing, Into::into)
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(v) => Some(v as f64),
            Value::Float(v) => Some(v),
            _ => None,
        }
    }

    fn csv(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => fmt_float(*v),
            Value::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Value::Text(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
            Value::Missing => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Value::Int(v) => (*v).into(),
            Value::Float(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, Into::into),
            Value::Text(s) => s.clone().into(),
            Value::Bool(b) => (*b).into(),
            Value::Missing => serde_json::Value::Null,
        }
    }
}

/// Shortest round-trip decimal, in exponent form outside `[1e-4, 1e15)`.
pub fn fmt_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column, `None` where missing.
    pub fn numbers(&self, name: &str) -> Vec<Option<f64>> {
        let k = self.column(name).expect("unknown column");
        self.rows.iter().map(|r| r[k].as_f64()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// `{"columns": [...], "rows": [[...], ...]}`, in CSV order.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Value::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

pub fn write_json(value: &serde_json::Value, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json values always serialize");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 150.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(vals: impl Iterator<Item = f64>, log: bool) -> Axis {
        let (mut lo, mut hi) = vals
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(|v| if log { v.log10() } else { v })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Axis { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4)
            .map(|k| {
                let t = self.lo + (self.hi - self.lo) * k as f64 / 4.0;
                if self.log { 10f64.powf(t) } else { t }
            })
            .collect()
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, xa: &Axis, ya: &Axis) {
    let (pw, ph) = (W - ML - MR, H - MT - MB);
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
         <rect x=\"{ML}\" y=\"{MT}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n",
        ML + pw / 2.0,
        escape(title)
    );
    for t in xa.ticks() {
        let x = ML + xa.frac(t) * pw;
        let _ = writeln!(
            out,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            MT + ph + 15.0,
            tick_label(t)
        );
    }
    for t in ya.ticks() {
        let y = MT + (1.0 - ya.frac(t)) * ph;
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", ML - 5.0, y + 4.0, tick_label(t));
    }
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", ML + pw / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        "<text transform=\"translate(16,{:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        MT + ph / 2.0,
        escape(y_label)
    );
}

/// Line chart of named series. `log_x` puts the x axis on a log scale.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], log_x: bool) -> String {
    let pts = || series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let xa = Axis::fit(pts().map(|p| p.0), log_x);
    let ya = Axis::fit(pts().map(|p| p.1).chain([0.0]), false);
    let (pw, ph) = (W - ML - MR, H - MT - MB);
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, &xa, &ya);
    for (k, (name, v)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = v
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", ML + xa.frac(x) * pw, MT + (1.0 - ya.frac(y)) * ph))
            .collect();
        let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", coords.join(" "));
        for c in &coords {
            let (x, y) = c.split_once(',').expect("formatted pair");
            let _ = writeln!(out, "<circle cx=\"{x}\" cy=\"{y}\" r=\"2.5\" fill=\"{color}\"/>");
        }
        let ly = MT + 14.0 * (k as f64 + 1.0);
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            W - MR + 10.0,
            W - MR + 28.0,
            W - MR + 32.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn heat_color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let r = (255.0 * (1.0 - v)) as u8;
    let g = (255.0 * (1.0 - 0.6 * v)) as u8;
    format!("rgb({r},{g},255)")
}

/// Heatmap of `(x, y, value)` with `value` in `[0, 1]`, and an overlay curve.
///
/// Cells are placed by rank along each axis, so uneven grids still tile.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, cells: &[(f64, f64, f64)], overlay: &[(f64, f64)]) -> String {
    let mut xs: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let mut ys: Vec<f64> = cells.iter().map(|c| c.1).collect();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| close(*a, *b));
    }
    let (pw, ph) = (W - ML - MR, H - MT - MB);
    let (cw, chh) = (pw / xs.len().max(1) as f64, ph / ys.len().max(1) as f64);
    let rank = |v: &[f64], a: f64| v.iter().position(|&b| close(a, b)).unwrap_or(0) as f64;
    // Continuous axes whose cell centres sit at the grid values.
    let span = |v: &[f64]| {
        if v.len() < 2 {
            (v.first().copied().unwrap_or(0.0) - 0.5, v.first().copied().unwrap_or(0.0) + 0.5)
        } else {
            let step = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
            (v[0] - step / 2.0, v[v.len() - 1] + step / 2.0)
        }
    };
    let (xlo, xhi) = span(&xs);
    let (ylo, yhi) = span(&ys);
    let xa = Axis { lo: xlo, hi: xhi, log: false };
    let ya = Axis { lo: ylo, hi: yhi, log: false };
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, &xa, &ya);
    for &(x, y, v) in cells {
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"><title>{}</title></rect>",
            ML + rank(&xs, x) * cw,
            MT + ph - (rank(&ys, y) + 1.0) * chh,
            cw,
            chh,
            heat_color(v),
            tick_label(v)
        );
    }
    let coords: Vec<String> = overlay
        .iter()
        .filter(|(_, y)| *y >= ylo && *y <= yhi)
        .map(|&(x, y)| format!("{:.2},{:.2}", ML + xa.frac(x) * pw, MT + (1.0 - ya.frac(y)) * ph))
        .collect();
    if !coords.is_empty() {
        let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"{}\"/>", coords.join(" "));
    }
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = MT + ph - (k as f64 + 1.0) * 18.0;
        let _ = writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"16\" height=\"16\" fill=\"{}\" stroke=\"gray\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{v}</text>",
            W - MR + 10.0,
            heat_color(v),
            W - MR + 30.0,
            y + 12.0
        );
    }
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\">black: boundary</text>", W - MR + 10.0, MT + 12.0);
    out.push_str("</svg>\n");
    out
}
