//! Static SVG charts: matrix heatmap, grouped bars and trajectory plots.

use std::fmt::Write as _;

use crate::eval::{CompareRow, EvalMatrix};
use crate::scenario::{ScenarioId, N_SCENARIOS};
use crate::traj::TrajectoryRecord;

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

/// White (0) to dark red (`max`).
fn heat(v: f64, max: f64) -> String {
    let t = if max > 0.0 && v.is_finite() {
        (v / max).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let g = (255.0 * (1.0 - t)) as u8;
    let r = (255.0 - 100.0 * t) as u8;
    format!("rgb({r},{g},{g})")
}

pub fn heatmap_svg(m: &EvalMatrix, title: &str) -> String {
    let cell = 80.0;
    let (ox, oy) = (90.0, 60.0);
    let size = cell * N_SCENARIOS as f64;
    let mut s = header(ox + size + 30.0, oy + size + 50.0);
    let max = m
        .mean
        .iter()
        .flatten()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        ox + size / 2.0
    );
    for r in ScenarioId::ALL {
        let y = oy + cell * r.index() as f64;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">train {r}</text>",
            ox - 8.0,
            y + cell / 2.0 + 4.0
        );
        for c in ScenarioId::ALL {
            let x = ox + cell * c.index() as f64;
            let v = m.mean[r.index()][c.index()];
            let stroke = if r == c { "black\" stroke-width=\"2" } else { "#999" };
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" stroke=\"{stroke}\"/>\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{v:.3}</text>",
                heat(v, max),
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    for c in ScenarioId::ALL {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">test {c}</text>",
            ox + cell * c.index() as f64 + cell / 2.0,
            oy + size + 20.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn grouped_bars_svg(rows: &[CompareRow], title: &str) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let palette = ["#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee"];
    let (ox, oy, plot_h) = (60.0, 40.0, 260.0);
    let group_w = 40.0 * methods.len().max(1) as f64 + 30.0;
    let width = ox + group_w * N_SCENARIOS as f64 + 140.0;
    let max = rows
        .iter()
        .map(|r| r.mean + r.std)
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-9);
    let mut s = header(width, oy + plot_h + 50.0);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        width / 2.0
    );
    let _ = writeln!(
        s,
        "<line x1=\"{ox}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        oy + plot_h,
        width - 140.0,
        oy + plot_h
    );
    for k in 0..=4 {
        let v = max * k as f64 / 4.0;
        let y = oy + plot_h - plot_h * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.3}</text>",
            ox - 6.0,
            y + 4.0
        );
    }
    for sc in ScenarioId::ALL {
        let gx = ox + 15.0 + group_w * sc.index() as f64;
        for (k, m) in methods.iter().enumerate() {
            let Some(r) = rows.iter().find(|r| r.scenario == sc && r.method == *m) else {
                continue;
            };
            let h = plot_h * (r.mean / max).clamp(0.0, 1.0);
            let x = gx + 40.0 * k as f64;
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{}\" width=\"34\" height=\"{h}\" fill=\"{}\"><title>{m} {sc}: {:.4} ± {:.4}</title></rect>",
                oy + plot_h - h,
                palette[k % palette.len()],
                r.mean,
                r.std
            );
            let top = oy + plot_h - plot_h * ((r.mean + r.std) / max).clamp(0.0, 1.0);
            let bot = oy + plot_h - plot_h * ((r.mean - r.std) / max).clamp(0.0, 1.0);
            let _ = writeln!(
                s,
                "<line x1=\"{0}\" y1=\"{top}\" x2=\"{0}\" y2=\"{bot}\" stroke=\"black\"/>",
                x + 17.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            gx + 20.0 * methods.len() as f64,
            oy + plot_h + 20.0,
            sc.name()
        );
    }
    for (k, m) in methods.iter().enumerate() {
        let y = oy + 20.0 * k as f64;
        let x = width - 120.0;
        let _ = writeln!(
            s,
            "<rect x=\"{x}\" y=\"{y}\" width=\"14\" height=\"14\" fill=\"{}\"/><text x=\"{}\" y=\"{}\">{m}</text>",
            palette[k % palette.len()],
            x + 20.0,
            y + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Paths of the VIP (black), guards (blue) and bystanders (grey) for the
/// first episode in `records`.
pub fn trajectory_svg(records: &[TrajectoryRecord], arena_half: f64) -> String {
    let px = 500.0;
    let scale = px / (2.0 * arena_half);
    let map = |p: [f64; 2]| ((p[0] + arena_half) * scale, (arena_half - p[1]) * scale);
    let episode: Vec<&TrajectoryRecord> = records
        .iter()
        .enumerate()
        .take_while(|(i, r)| *i == 0 || r.t != 0)
        .map(|(_, r)| r)
        .collect();
    let mut s = header(px, px);
    let _ = writeln!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{px}\" height=\"{px}\" fill=\"none\" stroke=\"black\"/>"
    );
    let path = |s: &mut String, pts: Vec<[f64; 2]>, color: &str, width: f64| {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (k, p) in pts.iter().enumerate() {
            let (x, y) = map(*p);
            let _ = write!(d, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
        }
        let _ = writeln!(
            s,
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>"
        );
        let (x, y) = map(*pts.last().unwrap());
        let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\"/>");
    };
    let Some(first) = episode.first() else {
        s.push_str("</svg>\n");
        return s;
    };
    for b in 0..first.bystanders.len() {
        path(
            &mut s,
            episode
                .iter()
                .filter_map(|r| r.bystanders.get(b).map(|e| e.pos))
                .collect(),
            "#aaaaaa",
            1.0,
        );
    }
    for g in 0..first.guards.len() {
        path(
            &mut s,
            episode.iter().filter_map(|r| r.guards.get(g).map(|e| e.pos)).collect(),
            "#2255cc",
            1.5,
        );
    }
    path(&mut s, episode.iter().map(|r| r.vip.pos).collect(), "black", 2.5);
    let _ = writeln!(
        s,
        "<text x=\"8\" y=\"16\">scenario {} seed {} steps {}</text>",
        first.scenario,
        first.seed,
        episode.len()
    );
    s.push_str("</svg>\n");
    s
}
