use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line plot with one `<polyline>` per series.
///
/// When `shared_axis` is false each series is scaled to its own range and the
/// legend shows that range.
pub fn line_plot(title: &str, x_label: &str, series: &[(&str, Vec<f64>)], shared_axis: bool) -> String {
    let finite = |v: &[f64]| v.iter().copied().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            (lo, if hi > lo { hi } else { lo + 1.0 })
        } else {
            (0.0, 1.0)
        }
    };
    let all: Vec<f64> = series.iter().flat_map(|(_, v)| finite(v)).collect();
    let global = range(&all);
    let n_max = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let x_span = (n_max.max(2) - 1) as f64;
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{} (0 to {})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label),
        n_max.saturating_sub(1)
    );
    if shared_axis {
        let _ = writeln!(
            out,
            r#"<text x="4" y="{}" font-family="sans-serif" font-size="11">{:.4}</text>"#,
            MARGIN + 4.0,
            global.1
        );
        let _ = writeln!(
            out,
            r#"<text x="4" y="{}" font-family="sans-serif" font-size="11">{:.4}</text>"#,
            HEIGHT - MARGIN,
            global.0
        );
    }
    for (i, (name, values)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let (lo, hi) = if shared_axis { global } else { range(&finite(values)) };
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, &v)| {
                let x = MARGIN + pw * k as f64 / x_span;
                let y = MARGIN + ph * (1.0 - (v - lo) / (hi - lo));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(name)
        );
        let legend = if shared_axis {
            escape(name)
        } else {
            format!("{} [{lo:.4}, {hi:.4}]", escape(name))
        };
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{legend}</text>"#,
            MARGIN + 8.0,
            MARGIN + 16.0 + 14.0 * i as f64
        );
    }
    out.push_str("</svg>\n");
    out
}
