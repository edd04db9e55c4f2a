//! Minimal SVG line plots and heatmaps.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct HeatCell {
    pub x: f64,
    pub y: f64,
    pub mse: f64,
    pub iterations: f64,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const MAX_POINTS: usize = 1500;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        esc(title)
    );
}

/// Line plot; with `log_y` nonpositive values are dropped and the axis shows
/// powers of ten.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let tf = |v: f64| if log_y { v.log10() } else { v };
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    let kept: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .copied()
                .collect();
            let stride = pts.len().div_ceil(MAX_POINTS).max(1);
            let mut thin: Vec<(f64, f64)> = pts.iter().step_by(stride).copied().collect();
            if let Some(&last) = pts.last() {
                if thin.last() != Some(&last) {
                    thin.push(last);
                }
            }
            for &(x, y) in &thin {
                xs = (xs.0.min(x), xs.1.max(x));
                ys = (ys.0.min(tf(y)), ys.1.max(tf(y)));
            }
            thin
        })
        .collect();
    if !xs.0.is_finite() {
        xs = (0.0, 1.0);
        ys = (0.0, 1.0);
    }
    if xs.1 <= xs.0 {
        xs.1 = xs.0 + 1.0;
    }
    if log_y {
        ys = (ys.0.floor(), ys.1.ceil());
    }
    if ys.1 <= ys.0 {
        ys.1 = ys.0 + 1.0;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - xs.0) / (xs.1 - xs.0) * pw;
    let py = |y: f64| TOP + ph - (y - ys.0) / (ys.1 - ys.0) * ph;

    let mut out = String::new();
    header(&mut out, W, H, title);
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let xv = xs.0 + (xs.1 - xs.0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(xv),
            TOP + ph + 18.0,
            fmt_tick(xv)
        );
    }
    let y_ticks: Vec<f64> = if log_y {
        let span = (ys.1 - ys.0) as i64;
        let step = (span / 6).max(1);
        (0..=span).step_by(step as usize).map(|i| ys.0 + i as f64).collect()
    } else {
        (0..=4).map(|i| ys.0 + (ys.1 - ys.0) * i as f64 / 4.0).collect()
    };
    for yv in y_ticks {
        let label = if log_y { format!("1e{}", yv as i64) } else { fmt_tick(yv) };
        let _ =
            writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, LEFT - 6.0, py(yv) + 4.0);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
            LEFT + pw,
            py(yv),
            py(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 15.0,
        esc(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        esc(y_label)
    );
    for (i, (s, pts)) in series.iter().zip(&kept).enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !pts.is_empty() {
            let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(tf(y)))).collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                coords.join(" ")
            );
        }
        let ly = TOP + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            W - RIGHT + 10.0,
            W - RIGHT + 30.0
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, W - RIGHT + 35.0, ly + 4.0, esc(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Two panels over `(λ1, λ2)`: mean MSE and mean iterations, colour-scaled
/// between their minimum (light) and maximum (dark).
pub fn heatmap_svg(title: &str, cells: &[HeatCell]) -> String {
    let panel = 260.0;
    let gap = 60.0;
    let left = 60.0;
    let top = 50.0;
    let width = left + 2.0 * panel + gap + 30.0;
    let height = top + panel + 60.0;
    let mut out = String::new();
    header(&mut out, width, height, title);
    let step = grid_step(cells);
    for (pi, (name, pick)) in
        [("mean MSE", (|c: &HeatCell| c.mse) as fn(&HeatCell) -> f64), ("mean iterations", |c: &HeatCell| c.iterations)]
            .into_iter()
            .enumerate()
    {
        let x0 = left + pi as f64 * (panel + gap);
        let vals: Vec<f64> = cells.iter().map(pick).filter(|v| v.is_finite()).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{name}</text>"#,
            x0 + panel / 2.0,
            top - 8.0
        );
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.1}" y="{top:.1}" width="{panel}" height="{panel}" fill="none" stroke="black"/>"#
        );
        let size = panel * step;
        for c in cells {
            let v = pick(c);
            let shade = if !v.is_finite() {
                "#999999".to_string()
            } else {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                let g = (235.0 - 200.0 * t).round() as u8;
                format!("#{g:02x}{g:02x}ff")
            };
            let cx = x0 + c.x * panel - size / 2.0;
            let cy = top + panel - c.y * panel - size / 2.0;
            let _ = writeln!(
                out,
                r#"<rect x="{cx:.1}" y="{cy:.1}" width="{size:.1}" height="{size:.1}" fill="{shade}"><title>λ1={:.4} λ2={:.4} value={v}</title></rect>"#,
                c.x, c.y
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">λ1</text>"#,
            x0 + panel / 2.0,
            top + panel + 20.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">λ2</text>"#,
            x0 - 15.0,
            top + panel / 2.0,
            x0 - 15.0,
            top + panel / 2.0
        );
        if lo.is_finite() {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">min {} / max {}</text>"#,
                x0 + panel / 2.0,
                top + panel + 40.0,
                fmt_tick(lo),
                fmt_tick(hi)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Smallest positive spacing between distinct λ1 values, else 1/3.
fn grid_step(cells: &[HeatCell]) -> f64 {
    let mut xs: Vec<f64> = cells.iter().map(|c| c.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 1e-12).fold(1.0 / 3.0, f64::min)
}
