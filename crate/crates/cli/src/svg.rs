//! Line charts as self-contained SVG. Output depends only on the input, so
//! identical runs give byte-identical files.

use std::fmt::Write;

use pencil_core::Error;

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub width: u32,
    pub height: u32,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle { title: String::new(), x_label: "x".into(), y_label: "y".into(), log_x: false, width: 720, height: 480 }
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round-number ticks covering `[lo, hi]`.
fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 7.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

pub fn emit_svg(series: &[Series], style: &PlotStyle, metadata: Option<&str>) -> Result<String, Error> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("cannot plot an empty list of series".into()));
    }
    let usable = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!style.log_x || x > 0.0);
    let tx = |x: f64| if style.log_x { x.log10() } else { x };
    let all = || series.iter().flat_map(|s| s.points.iter().copied().filter(usable));
    let (Some((x0, x1)), Some((y0, y1))) = (extent(all().map(|p| tx(p.0))), extent(all().map(|p| p.1))) else {
        return Err(Error::InvalidArgument("series contain no plottable points".into()));
    };
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);

    let (w, h) = (style.width as f64, style.height as f64);
    let (pw, ph) = (w - MARGIN_LEFT - MARGIN_RIGHT, h - MARGIN_TOP - MARGIN_BOTTOM);
    let sx = |x: f64| MARGIN_LEFT + (tx(x) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        style.width, style.height, style.width, style.height
    );
    if let Some(m) = metadata {
        let _ = writeln!(out, "<metadata>{}</metadata>", escape(m));
    }
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !style.title.is_empty() {
        let _ = writeln!(out, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(&style.title));
    }

    // axes and ticks
    let _ = writeln!(out, r#"<g stroke="black" fill="none"><rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{pw:.2}" height="{ph:.2}"/></g>"#);
    let _ = writeln!(out, r#"<g class="ticks" fill="black">"#);
    let x_ticks: Vec<(f64, String)> = if style.log_x {
        (x0.ceil() as i64..=x1.floor() as i64).map(|e| (10f64.powi(e as i32), format!("1e{e}"))).collect()
    } else {
        linear_ticks(x0, x1).into_iter().map(|t| (t, format_tick(t))).collect()
    };
    for (t, label) in x_ticks {
        let x = sx(t);
        let yb = MARGIN_TOP + ph;
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{yb:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, yb + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, yb + 18.0, escape(&label));
    }
    for t in linear_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT:.2}" y2="{y:.2}" stroke="black"/>"#, MARGIN_LEFT - 5.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN_LEFT - 8.0, y + 4.0, format_tick(t));
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, MARGIN_LEFT + pw / 2.0, h - 12.0, escape(&style.x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(&style.y_label)
    );

    // data; non-finite points break the path
    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        let mut pen_down = false;
        for p in &s.points {
            if !usable(p) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, sx(p.0), sy(p.1));
            pen_down = true;
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            d.trim_end(),
            PALETTE[i % PALETTE.len()]
        );
    }

    let _ = writeln!(out, r#"<g class="legend">"#);
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 14.0 + 18.0 * i as f64;
        let x = MARGIN_LEFT + pw - 160.0;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<rect x="{x:.2}" y="{:.2}" width="14" height="3" fill="{color}"/>"#, y - 4.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, x + 20.0, escape(&s.label));
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    Ok(out)
}
