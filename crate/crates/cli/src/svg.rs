//! Self-contained SVG figures: r² heatmap, directed-edge diagram and
//! inflow/outflow bar charts. Output depends only on the inputs.

use std::f64::consts::PI;
use std::fmt::Write;

use mipdc_core::connectivity::FlowMap;
use mipdc_core::discriminability::{EdgeSignificance, RSquaredMap};
use mipdc_core::signal_io::ClassLabel;

const FONT: &str = "font-family=\"sans-serif\"";
const CLASS_COLORS: [&str; 2] = ["#c0392b", "#2471a3"];

fn class_color(label: ClassLabel) -> &'static str {
    match label {
        ClassLabel::Class1 => CLASS_COLORS[0],
        ClassLabel::Class2 => CLASS_COLORS[1],
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn header(width: f64, height: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

/// Viridis-like ramp on `t ∈ [0, 1]`.
fn ramp(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let u = x - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Channels × frequencies heatmap on the fixed scale `[0, max r²]`.
pub fn rsquared_heatmap(map: &RSquaredMap) -> String {
    let (rows, cols) = map.values.shape();
    let (cell_w, cell_h) = (20.0, 16.0);
    let (left, top) = (60.0, 40.0);
    let plot_w = cols as f64 * cell_w;
    let plot_h = rows as f64 * cell_h;
    let width = left + plot_w + 90.0;
    let height = top + plot_h + 50.0;
    let max = map.max();
    let scale = if max > 0.0 { max } else { 1.0 };

    let mut s = header(width, height);
    let _ = writeln!(
        s,
        "<text x=\"{left}\" y=\"20\" {FONT} font-size=\"13\">r² by channel and frequency (scale 0 to {max:.4})</text>"
    );
    for r in 0..rows {
        let y = top + r as f64 * cell_h;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\" text-anchor=\"end\">{}</text>",
            left - 6.0,
            y + cell_h * 0.75,
            escape(&map.channel_names[r])
        );
        for c in 0..cols {
            let v = map.values[(r, c)];
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{y}\" width=\"{cell_w}\" height=\"{cell_h}\" fill=\"{}\"><title>{} {} Hz: {v:.4}</title></rect>",
                left + c as f64 * cell_w,
                ramp(v / scale),
                escape(&map.channel_names[r]),
                map.freqs_hz[c]
            );
        }
    }
    for (c, f) in map.freqs_hz.iter().enumerate() {
        if c % 2 == 0 {
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\" text-anchor=\"middle\">{f}</text>",
                left + (c as f64 + 0.5) * cell_w,
                top + plot_h + 14.0
            );
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\" text-anchor=\"middle\">frequency (Hz)</text>",
        left + plot_w / 2.0,
        top + plot_h + 34.0
    );
    let bar_x = left + plot_w + 20.0;
    let steps = 20;
    for k in 0..steps {
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{bar_x}\" y=\"{}\" width=\"14\" height=\"{}\" fill=\"{}\"/>",
            top + k as f64 * plot_h / steps as f64,
            plot_h / steps as f64,
            ramp(t)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\">{max:.4}</text>",
        bar_x + 18.0,
        top + 10.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\">0</text>",
        bar_x + 18.0,
        top + plot_h
    );
    s.push_str("</svg>\n");
    s
}

/// Channels on a circle with a curved arrow per significant edge, coloured
/// by the predominant class.
pub fn edge_diagram(sig: &EdgeSignificance, channels: &[String], band_name: &str) -> String {
    let (width, height) = (460.0, 500.0);
    let (cx, cy, radius) = (230.0, 250.0, 170.0);
    let n = channels.len().max(1);
    let pos = |k: usize| {
        let a = -PI / 2.0 + 2.0 * PI * k as f64 / n as f64;
        (cx + radius * a.cos(), cy + radius * a.sin())
    };

    let mut s = header(width, height);
    s.push_str("<defs>\n");
    for (k, color) in CLASS_COLORS.iter().enumerate() {
        let _ = writeln!(
            s,
            "<marker id=\"arrow{}\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"7\" markerHeight=\"7\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"{color}\"/></marker>",
            k + 1
        );
    }
    s.push_str("</defs>\n");
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"24\" {FONT} font-size=\"13\">{}: {} directed edges, p &lt; {} ({} Hz)</text>",
        escape(band_name),
        sig.edges.len(),
        sig.alpha_level,
        escape(&format!("{}-{}", sig.band.low_hz, sig.band.high_hz))
    );
    for e in &sig.edges {
        let (x0, y0) = pos(e.from);
        let (x1, y1) = pos(e.to);
        // Shorten the chord so the arrow tip stops at the node border.
        let (dx, dy) = (x1 - x0, y1 - y0);
        let len = (dx * dx + dy * dy).sqrt().max(1e-9);
        let (sx, sy) = (x0 + dx / len * 8.0, y0 + dy / len * 8.0);
        let (ex, ey) = (x1 - dx / len * 8.0, y1 - dy / len * 8.0);
        let (qx, qy) = (cx + 0.35 * ((x0 + x1) / 2.0 - cx), cy + 0.35 * ((y0 + y1) / 2.0 - cy));
        let _ = writeln!(
            s,
            "<path d=\"M{sx:.2},{sy:.2} Q{qx:.2},{qy:.2} {ex:.2},{ey:.2}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" marker-end=\"url(#arrow{})\"><title>{} to {}: p = {}</title></path>",
            class_color(e.predominant),
            e.predominant.code(),
            escape(&e.from_name),
            escape(&e.to_name),
            e.p_value
        );
    }
    for (k, name) in channels.iter().enumerate() {
        let (x, y) = pos(k);
        let (lx, ly) = (
            cx + (radius + 20.0) * (x - cx) / radius,
            cy + (radius + 20.0) * (y - cy) / radius,
        );
        let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"7\" fill=\"#555555\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{lx:.2}\" y=\"{:.2}\" {FONT} font-size=\"11\" text-anchor=\"middle\">{}</text>",
            ly + 4.0,
            escape(name)
        );
    }
    for (k, label) in ClassLabel::BOTH.iter().enumerate() {
        let y = height - 40.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            "<rect x=\"20\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/><text x=\"38\" y=\"{y}\" {FONT} font-size=\"11\">stronger in {label}</text>",
            y - 10.0,
            class_color(*label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Outflow and inflow per channel for both classes, side by side.
pub fn flow_bars(flows: &[FlowMap; 2], band_name: &str) -> String {
    let channels = &flows[0].channels;
    let n = channels.len();
    let (left, top, panel_h, gap) = (50.0, 40.0, 160.0, 60.0);
    let group_w = 24.0;
    let plot_w = n as f64 * group_w;
    let width = left + plot_w + 30.0;
    let height = top + 2.0 * panel_h + gap + 60.0;
    let max = flows
        .iter()
        .flat_map(|f| f.outflow.iter().chain(&f.inflow))
        .fold(0.0f64, |a, &b| a.max(b));
    let scale = if max > 0.0 { max } else { 1.0 };

    let mut s = header(width, height);
    let _ = writeln!(
        s,
        "<text x=\"{left}\" y=\"20\" {FONT} font-size=\"13\">{}: information flow per channel (scale 0 to {max:.4})</text>",
        escape(band_name)
    );
    for (p, title) in ["outflow", "inflow"].iter().enumerate() {
        let base = top + panel_h + p as f64 * (panel_h + gap);
        let _ = writeln!(
            s,
            "<text x=\"{left}\" y=\"{}\" {FONT} font-size=\"11\">{title}</text>",
            base - panel_h - 4.0
        );
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>",
            left + plot_w
        );
        for (k, name) in channels.iter().enumerate() {
            let x = left + k as f64 * group_w;
            for (c, flow) in flows.iter().enumerate() {
                let v = if p == 0 { flow.outflow[k] } else { flow.inflow[k] };
                let h = panel_h * (v / scale).clamp(0.0, 1.0);
                let _ = writeln!(
                    s,
                    "<rect x=\"{}\" y=\"{:.3}\" width=\"9\" height=\"{h:.3}\" fill=\"{}\"><title>{} {}: {v}</title></rect>",
                    x + 3.0 + 9.0 * c as f64,
                    base - h,
                    class_color(flow.class_label),
                    escape(name),
                    flow.class_label
                );
            }
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"9\" text-anchor=\"middle\">{}</text>",
                x + group_w / 2.0,
                base + 12.0,
                escape(name)
            );
        }
    }
    for (k, label) in ClassLabel::BOTH.iter().enumerate() {
        let x = left + 110.0 * k as f64;
        let y = height - 16.0;
        let _ = writeln!(
            s,
            "<rect x=\"{x}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/><text x=\"{}\" y=\"{y}\" {FONT} font-size=\"11\">{label}</text>",
            y - 10.0,
            class_color(*label),
            x + 18.0
        );
    }
    s.push_str("</svg>\n");
    s
}
