//! PR-curve panel rendered as a standalone SVG document.

use std::fmt::Write;

use super::summary::EvalSummary;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One panel for one dimension: a step curve per class and fold, fold 0
/// solid and later folds dashed, colors by class.
pub fn render_pr_panel(summary: &EvalSummary, title: &str) -> String {
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x = |r: f64| LEFT + r * pw;
    let y = |p: f64| TOP + (1.0 - p) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
            x(0.0),
            y(v),
            x(1.0),
            y(v)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
            x(v),
            y(0.0),
            x(v),
            y(1.0)
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, x(0.0) - 6.0, y(v) + 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"#, x(v), y(0.0) + 18.0);
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Recall</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Precision</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for fold in &summary.folds {
        for (c, m) in fold.classes.iter().enumerate() {
            let Some(curve) = &m.curve else { continue };
            let color = PALETTE[c % PALETTE.len()];
            let mut d = format!("M {:.2} {:.2}", x(0.0), y(curve.points.first().map_or(1.0, |p| p.precision)));
            for p in &curve.points {
                let _ = write!(d, " H {:.2} V {:.2}", x(p.recall), y(p.precision));
            }
            let dash = if fold.fold == 0 { "" } else { r#" stroke-dasharray="5,3""# };
            let _ = writeln!(
                s,
                r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}><title>{} fold {}</title></path>"#,
                escape(&m.class),
                fold.fold
            );
        }
    }

    let lx = WIDTH - RIGHT + 15.0;
    for (c, class) in summary.classes.iter().enumerate() {
        let ly = TOP + 10.0 + c as f64 * 18.0;
        let color = PALETTE[c % PALETTE.len()];
        let ap = summary.per_class[c]
            .ap
            .map_or_else(|| "n/a".to_string(), |a| format!("{:.3}", a.mean));
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{} (AP {ap})</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(class)
        );
    }
    s.push_str("</svg>\n");
    s
}
