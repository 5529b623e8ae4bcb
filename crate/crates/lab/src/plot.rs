//! Standalone SVG chart of `m*(T)` against `T` (log axis) with the fitted
//! `a·ln T + b` curve.

use attncap_core::experiments::{LinearFit, Threshold};
use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn threshold_svg(title: &str, ths: &[Threshold], m_grid: &[usize], fit: Option<&LinearFit>) -> String {
    let t_min = ths.iter().map(|t| t.t).min().unwrap_or(1).max(1) as f64;
    let t_max = ths.iter().map(|t| t.t).max().unwrap_or(2).max(2) as f64;
    let (lx0, lx1) = (t_min.ln(), if t_max > t_min { t_max.ln() } else { t_min.ln() + 1.0 });
    let m_lo = 0.0;
    let m_hi = m_grid.iter().copied().max().unwrap_or(1).max(1) as f64 * 1.05;
    let px = |t: f64| LEFT + (t.ln() - lx0) / (lx1 - lx0) * (W - LEFT - RIGHT);
    let py = |m: f64| H - BOTTOM - (m - m_lo) / (m_hi - m_lo) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for th in ths {
        let x = px(th.t as f64);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y1 + 20.0, th.t);
    }
    let step = ((m_hi / 5.0 / 10.0).ceil() * 10.0).max(1.0);
    let mut m = 0.0;
    while m <= m_hi {
        let y = py(m);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{m}</text>"#, x0 - 8.0, y + 4.0);
        m += step;
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">context length T (log scale)</text>"#, (x0 + x1) / 2.0, H - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">threshold m*(T)</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    if let Some(f) = fit {
        let pts: Vec<String> = (0..=50)
            .map(|i| {
                let lt = lx0 + (lx1 - lx0) * i as f64 / 50.0;
                let m = f.slope * lt + f.intercept;
                format!("{:.2},{:.2}", px(lt.exp()), py(m))
            })
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="steelblue">m* = {:.2} ln T + {:.2}  (R² = {:.3})</text>"#,
            x0 + 10.0,
            y0 + 14.0,
            f.slope,
            f.intercept,
            f.r_squared
        );
    }
    for th in ths {
        let x = px(th.t as f64);
        match th.m_star {
            Some(m) => {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="4" fill="black"/>"#, py(m as f64));
            }
            None => {
                let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="firebrick">not reached</text>"#, y0 + 30.0);
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
