//! Minimal self-contained SVG line and scatter plots.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    /// Right-continuous step function (ECDFs).
    Step,
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self { name: name.into(), points, style }
    }

    /// Empirical CDF of `xs` as a step series.
    pub fn ecdf(name: impl Into<String>, xs: &[f64]) -> Self {
        let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len() as f64;
        let points = v.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n)).collect();
        Self::new(name, points, Style::Step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Written into a comment block at the top of the file.
    pub provenance: Vec<(String, String)>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    out
}

impl Plot {
    pub fn new(name: impl Into<String>, title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self { name: name.into(), title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new(), provenance: Vec::new() }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        (x0, x1, y0, y1)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let (ml, mr, mt, mb) = MARGIN;
        let pw = W - ml - mr;
        let ph = H - mt - mb;
        let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
        s.push_str("<!--\n");
        for (k, v) in &self.provenance {
            let _ = writeln!(s, "  {}: {}", k, v.replace("--", "- -"));
        }
        s.push_str("-->\n");
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" font-size="15" text-anchor="middle" font-family="sans-serif">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(s, r##"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
        for t in nice_ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##, mt + ph, mt + ph + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle" font-family="sans-serif">{}</text>"#, mt + ph + 18.0, fmt_tick(t));
        }
        for t in nice_ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{ml}" y2="{y:.2}" stroke="#444"/>"##, ml - 5.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end" font-family="sans-serif">{}</text>"#, ml - 8.0, y + 4.0, fmt_tick(t));
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" font-family="sans-serif">{}</text>"#, ml + pw / 2.0, H - 10.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.2}" font-size="12" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 14 {:.2})">{}</text>"#,
            mt + ph / 2.0,
            mt + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, ser) in self.series.iter().enumerate() {
            let c = COLORS[i % COLORS.len()];
            let pts: Vec<(f64, f64)> = ser.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            match ser.style {
                Style::Points => {
                    for &(x, y) in &pts {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{c}" fill-opacity="0.5"/>"#, sx(x), sy(y));
                    }
                }
                Style::Line | Style::Step => {
                    let mut d = String::new();
                    let mut prev: Option<(f64, f64)> = None;
                    for &(x, y) in &pts {
                        match prev {
                            None => {
                                let _ = write!(d, "M{:.2},{:.2}", sx(x), sy(y));
                            }
                            Some((_, py)) if ser.style == Style::Step => {
                                let _ = write!(d, " L{:.2},{:.2} L{:.2},{:.2}", sx(x), sy(py), sx(x), sy(y));
                            }
                            Some(_) => {
                                let _ = write!(d, " L{:.2},{:.2}", sx(x), sy(y));
                            }
                        }
                        prev = Some((x, y));
                    }
                    let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{c}" stroke-width="1.4"/>"#);
                }
            }
            let ly = mt + 14.0 + 16.0 * i as f64;
            let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="12" height="3" fill="{c}"/>"#, ml + 10.0, ly - 4.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}" font-size="11" font-family="sans-serif">{}</text>"#, ml + 28.0, escape(&ser.name));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(t: f64) -> String {
    if t != 0.0 && (t.abs() >= 1e4 || t.abs() < 1e-3) {
        format!("{t:.1e}")
    } else {
        let s = format!("{t:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_valid_looking_svg() {
        let mut p = Plot::new("x", "A <title>", "t", "y")
            .with(Series::new("line", vec![(0.0, 0.0), (1.0, 2.0)], Style::Line))
            .with(Series::ecdf("ecdf", &[3.0, 1.0, 2.0]))
            .with(Series::new("dots", vec![(0.5, 0.5)], Style::Points));
        p.provenance.push(("seed".into(), "7".into()));
        let s = p.render();
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains("seed: 7"));
        assert!(s.contains("A &lt;title&gt;"));
        assert_eq!(s.matches("<path").count(), 2);
        assert_eq!(s.matches("<circle").count(), 1);
    }

    #[test]
    fn ecdf_steps_to_one() {
        let e = Series::ecdf("e", &[2.0, f64::NAN, 1.0]);
        assert_eq!(e.points, vec![(1.0, 0.5), (2.0, 1.0)]);
    }

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.0, 1.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!(t.len() >= 3 && t.len() <= 7);
        assert!(nice_ticks(-3.0, 250.0).iter().all(|x| *x >= -3.0 && *x <= 250.0));
        let empty = Plot::new("e", "", "", "").render();
        assert!(empty.contains("</svg>"));
    }
}
