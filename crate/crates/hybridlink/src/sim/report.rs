//! BER curve output (CSV), gain computation at a target BER, and a small
//! self-contained SVG plotter for log-y BER curves.

use super::BerPoint;
use crate::error::{Error, Result};
use std::path::Path;

/// Serialize points as CSV: one header line, deterministic row order.
pub fn to_csv(points: &[BerPoint]) -> String {
    let mut out = String::from("scheme,ebno_db,bits,bit_errors,ber,ci95\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{:.6e},{:.6e}\n",
            p.scheme.name(),
            p.ebno_db,
            p.bits,
            p.bit_errors,
            p.ber,
            p.ci95_halfwidth
        ));
    }
    out
}

/// A curve loaded back from CSV: (ebno_db, ber) pairs in file order.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub fn read_curve(path: &Path) -> Result<Curve> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column '{name}'", path.display())))
    };
    let i_ebno = find("ebno_db")?;
    let i_ber = find("ber")?;
    let i_scheme = cols.iter().position(|c| c.trim() == "scheme");
    let mut label = String::new();
    let mut points = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < cols.len() {
            return Err(Error::Config(format!(
                "{}:{}: expected {} columns",
                path.display(),
                ln + 2,
                cols.len()
            )));
        }
        let ebno: f64 = f[i_ebno]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{}:{}: bad ebno", path.display(), ln + 2)))?;
        let ber: f64 = f[i_ber]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{}:{}: bad ber", path.display(), ln + 2)))?;
        if let Some(i) = i_scheme {
            if label.is_empty() {
                label = f[i].trim().to_string();
            }
        }
        points.push((ebno, ber));
    }
    if points.is_empty() {
        return Err(Error::Config(format!("{}: no data rows", path.display())));
    }
    if label.is_empty() {
        label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(Curve { label, points })
}

/// Eb/N0 (dB) at which a curve crosses the target BER, by log-linear
/// interpolation between the bracketing sweep points. `None` when the target
/// lies outside the measured range.
pub fn ebno_at_ber(points: &[(f64, f64)], target_ber: f64) -> Option<f64> {
    if target_ber <= 0.0 {
        return None;
    }
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, b)| b > 0.0)
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let t = target_ber.log10();
    for w in pts.windows(2) {
        let (x0, b0) = w[0];
        let (x1, b1) = w[1];
        let (y0, y1) = (b0.log10(), b1.log10());
        if (y0 - t) * (y1 - t) <= 0.0 && y0 != y1 {
            return Some(x0 + (x1 - x0) * (t - y0) / (y1 - y0));
        }
    }
    None
}

/// Eb/N0 gain of `curve` over `baseline` at the target BER: positive when
/// the curve reaches the target at a lower Eb/N0.
#[derive(Debug, Clone)]
pub enum Gain {
    Db(f64),
    NotReached { curve: bool, baseline: bool },
}

pub fn gain_at_ber(curve: &[(f64, f64)], baseline: &[(f64, f64)], target_ber: f64) -> Gain {
    match (ebno_at_ber(curve, target_ber), ebno_at_ber(baseline, target_ber)) {
        (Some(c), Some(b)) => Gain::Db(b - c),
        (c, b) => Gain::NotReached {
            curve: c.is_none(),
            baseline: b.is_none(),
        },
    }
}

/// Minimal SVG log-y plot of BER curves, styled after link-level BER figures.
pub fn plot_svg(curves: &[Curve], title: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 540.0;
    const ML: f64 = 70.0;
    const MR: f64 = 30.0;
    const MT: f64 = 40.0;
    const MB: f64 = 55.0;
    let colors = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
        "#bcbd22",
    ];
    let mut x_min = f64::MAX;
    let mut x_max = f64::MIN;
    let mut y_min: f64 = 1.0;
    for c in curves {
        for &(x, b) in &c.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            if b > 0.0 {
                y_min = y_min.min(b);
            }
        }
    }
    if x_min >= x_max {
        x_max = x_min + 1.0;
    }
    let y_lo = (y_min.log10().floor()).min(-1.0);
    let y_hi = 0.0f64;
    let px = |x: f64| ML + (x - x_min) / (x_max - x_min) * (W - ML - MR);
    let py = |b: f64| {
        let ly = b.log10().clamp(y_lo, y_hi);
        MT + (y_hi - ly) / (y_hi - y_lo) * (H - MT - MB)
    };
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>
"#,
        W / 2.0
    );
    // Grid and axes.
    let mut dec = y_lo as i64;
    while dec <= y_hi as i64 {
        let y = py(10f64.powi(dec as i32));
        s.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            W - MR
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">1e{dec}</text>\n",
            ML - 8.0,
            y + 4.0
        ));
        dec += 1;
    }
    let x_step = ((x_max - x_min) / 10.0).max(0.5).round().max(1.0);
    let mut x = x_min.ceil();
    while x <= x_max {
        let xp = px(x);
        s.push_str(&format!(
            "<line x1=\"{xp:.1}\" y1=\"{MT}\" x2=\"{xp:.1}\" y2=\"{:.1}\" stroke=\"#eee\"/>\n",
            H - MB
        ));
        s.push_str(&format!(
            "<text x=\"{xp:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x}</text>\n",
            H - MB + 18.0
        ));
        x += x_step;
    }
    s.push_str(&format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>\n",
        W - ML - MR,
        H - MT - MB
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">Eb/N0 (dB)</text>\n",
        ML + (W - ML - MR) / 2.0,
        H - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 {:.1})\">BER</text>\n",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    ));
    // Curves.
    for (i, c) in curves.iter().enumerate() {
        let color = colors[i % colors.len()];
        let mut pts: Vec<(f64, f64)> = c.points.iter().copied().filter(|&(_, b)| b > 0.0).collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let path: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(j, &(x, b))| {
                format!("{}{:.1},{:.1}", if j == 0 { "M" } else { "L" }, px(x), py(b))
            })
            .collect();
        s.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            path.join(" ")
        ));
        for &(x, b) in &pts {
            s.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                px(x),
                py(b)
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            W - MR - 150.0,
            MT + 18.0 + 16.0 * i as f64,
            c.label
        ));
    }
    s.push_str("</svg>\n");
    s
}
