use std::fmt::Write as _;

use confgeo::ScalarField;

/// Longest side of the rendered image, in cells; larger grids are block-averaged.
const MAX_CELLS: usize = 256;
const PX: usize = 2;
const LEGEND_H: usize = 40;

/// Viridis, sampled at five stops.
const RAMP: [(f64, f64, f64); 5] =
    [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Block means of the finite values; `None` where a block is entirely masked.
fn downsample(f: &ScalarField) -> (usize, usize, Vec<Option<f64>>) {
    let g = f.grid();
    let block = g.nx().max(g.ny()).div_ceil(MAX_CELLS);
    let (w, h) = (g.nx().div_ceil(block), g.ny().div_ceil(block));
    let mut out = vec![None; w * h];
    for by in 0..h {
        for bx in 0..w {
            let (mut sum, mut n) = (0.0, 0usize);
            for j in by * block..((by + 1) * block).min(g.ny()) {
                for i in bx * block..((bx + 1) * block).min(g.nx()) {
                    let v = f.values()[g.index(i, j)];
                    if v.is_finite() {
                        sum += v;
                        n += 1;
                    }
                }
            }
            if n > 0 {
                out[by * w + bx] = Some(sum / n as f64);
            }
        }
    }
    (w, h, out)
}

/// Heatmap with a fixed color ramp and a min/max legend. Masked cells stay
/// blank. Rows are flipped so `y` grows upward, and equal-colored runs within a
/// row share one rectangle.
pub fn heatmap(f: &ScalarField) -> String {
    let (w, h, cells) = downsample(f);
    let finite: Vec<f64> = cells.iter().flatten().copied().collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let (width, height) = (w * PX, h * PX + LEGEND_H);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for row in 0..h {
        let j = h - 1 - row;
        let mut i = 0;
        while i < w {
            let Some(v) = cells[j * w + i] else {
                i += 1;
                continue;
            };
            let c = color(t(v));
            let start = i;
            while i < w && cells[j * w + i].is_some_and(|v| color(t(v)) == c) {
                i += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{PX}" fill="{c}"/>"#,
                start * PX,
                row * PX,
                (i - start) * PX
            );
        }
    }
    let y0 = h * PX + 8;
    let _ = writeln!(s, r#"<defs><linearGradient id="ramp">"#);
    for (k, _) in RAMP.iter().enumerate() {
        let off = k as f64 / (RAMP.len() - 1) as f64;
        let _ = writeln!(s, r#"<stop offset="{off}" stop-color="{}"/>"#, color(off));
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(s, r#"<rect x="0" y="{y0}" width="{width}" height="12" fill="url(#ramp)"/>"#);
    let (lo_s, hi_s) = if finite.is_empty() { ("nan".into(), "nan".into()) } else { (format!("{lo:.4e}"), format!("{hi:.4e}")) };
    let _ = writeln!(s, r#"<text x="0" y="{}" font-size="10" font-family="monospace">{lo_s}</text>"#, y0 + 26);
    let _ = writeln!(
        s,
        r#"<text x="{width}" y="{}" font-size="10" font-family="monospace" text-anchor="end">{hi_s}</text>"#,
        y0 + 26
    );
    s.push_str("</svg>\n");
    s
}
