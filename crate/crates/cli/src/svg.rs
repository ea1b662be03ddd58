//! Feature-space scatter plots as standalone SVG.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const COLOURS: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// First two feature dimensions, coloured by label: source samples as
/// circles, mapped target samples as crosses.
pub fn scatter(
    title: &str,
    source: &[Vec<f64>],
    source_labels: &[usize],
    mapped: &[Vec<f64>],
    mapped_labels: &[usize],
) -> String {
    let points: Vec<(f64, f64)> = source
        .iter()
        .chain(mapped)
        .filter(|r| r.len() >= 2)
        .map(|r| (r[0], r[1]))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if points.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) * 1e-3 };
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    ));
    for (v, x) in [(x0, px(x0)), (x1, px(x1))] {
        s.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{v:.4}</text>\n",
            HEIGHT - MARGIN + 14.0
        ));
    }
    for (v, y) in [(y0, py(y0)), (y1, py(y1))] {
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{y:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{v:.4}</text>\n",
            MARGIN - 4.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">feature 1</text>\n",
        WIDTH / 2.0,
        HEIGHT - 16.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">feature 2</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));

    s.push_str("<g class=\"source\">\n");
    for (r, l) in source.iter().zip(source_labels) {
        if r.len() >= 2 {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.6\"/>\n",
                px(r[0]),
                py(r[1]),
                COLOURS[l % COLOURS.len()]
            ));
        }
    }
    s.push_str("</g>\n<g class=\"mapped\">\n");
    for (r, l) in mapped.iter().zip(mapped_labels) {
        if r.len() >= 2 {
            let (x, y) = (px(r[0]), py(r[1]));
            s.push_str(&format!(
                "<path d=\"M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                x - 3.0,
                y - 3.0,
                x + 3.0,
                y + 3.0,
                x - 3.0,
                y + 3.0,
                x + 3.0,
                y - 3.0,
                COLOURS[l % COLOURS.len()]
            ));
        }
    }
    s.push_str("</g>\n");
    let mut labels: Vec<usize> = source_labels.iter().chain(mapped_labels).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    for (i, l) in labels.iter().enumerate() {
        let y = MARGIN + 12.0 + 14.0 * i as f64;
        s.push_str(&format!(
            "<circle cx=\"{:.1}\" cy=\"{y:.1}\" r=\"4\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">label {l}</text>\n",
            WIDTH - MARGIN - 60.0,
            COLOURS[l % COLOURS.len()],
            WIDTH - MARGIN - 52.0,
            y + 3.5
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">o source  x mapped target</text>\n",
        WIDTH - MARGIN - 150.0,
        HEIGHT - MARGIN - 8.0
    ));
    s.push_str("</svg>\n");
    s
}
