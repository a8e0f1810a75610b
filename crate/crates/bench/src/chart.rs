//! Standalone SVG line charts of a sweep: wall time against n (log-log) and
//! nCCS against n (log-x), one series per `(algo, k)`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{BenchError, Result};
use crate::record::{Algo, BenchRecord};
use crate::sweep::median;

pub const CHART_SUFFIXES: [&str; 2] = ["time", "nccs"];

/// `out_` + `time` → `out_time.svg`.
pub fn chart_path(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    s.push(".svg");
    PathBuf::from(s)
}

type Series = BTreeMap<(Algo, usize), Vec<(usize, f64)>>;

fn collect(records: &[BenchRecord], value: impl Fn(&[&BenchRecord]) -> f64) -> Series {
    let mut groups: BTreeMap<(Algo, usize, usize), Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.algo, r.k, r.n)).or_default().push(r);
    }
    let mut series = Series::new();
    for ((algo, k, n), rs) in groups {
        series.entry((algo, k)).or_default().push((n, value(&rs)));
    }
    series
}

/// Writes `<prefix>time.svg` and `<prefix>nccs.svg` and returns their paths.
pub fn emit_charts(records: &[BenchRecord], prefix: &Path) -> Result<[PathBuf; 2]> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return Err(BenchError::Chart(format!(
            "need records for at least 2 distinct n values, got {}",
            ns.len()
        )));
    }
    let time = collect(records, |rs| median(rs.iter().map(|r| r.wall_time_s).collect()));
    let quality = collect(records, |rs| rs.iter().map(|r| r.nccs_mean).sum::<f64>() / rs.len() as f64);

    let time_svg = render(&time, &ns, YAxis::Log, "Forward time per batch", "seconds");
    let nccs_svg = render(&quality, &ns, YAxis::Linear, "Approximation quality", "nCCS");

    let paths = [chart_path(prefix, CHART_SUFFIXES[0]), chart_path(prefix, CHART_SUFFIXES[1])];
    for (path, svg) in paths.iter().zip([time_svg, nccs_svg]) {
        fs::write(path, svg).map_err(|e| BenchError::io(path, e))?;
    }
    Ok(paths)
}

#[derive(Clone, Copy, PartialEq)]
enum YAxis {
    Log,
    Linear,
}

const WIDTH: f64 = 960.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 230.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;
const PLOT_H: f64 = 440.0;
const LEGEND_ROW: f64 = 15.0;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf", "#393b79", "#637939",
];

fn dash(algo: Algo) -> &'static str {
    match algo {
        Algo::Halving => "",
        Algo::Iterative => " stroke-dasharray=\"7,4\"",
        Algo::Exact => " stroke-dasharray=\"2,3\"",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn render(series: &Series, ns: &[usize], y_axis: YAxis, title: &str, y_label: &str) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let height = (TOP + PLOT_H + BOTTOM).max(TOP + LEGEND_ROW * (series.len() as f64 + 2.0));

    let x_lo = (ns[0] as f64).log2().floor();
    let x_hi = (ns[ns.len() - 1] as f64).log2().ceil().max(x_lo + 1.0);
    let sx = |n: usize| LEFT + ((n as f64).log2() - x_lo) / (x_hi - x_lo) * plot_w;

    let values = series.values().flatten().map(|&(_, y)| y);
    let (y_lo, y_hi) = match y_axis {
        YAxis::Log => {
            let (lo, hi) = values
                .filter(|y| *y > 0.0)
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), y| (lo.min(y.log10()), hi.max(y.log10())));
            let lo = if lo.is_finite() { lo.floor() } else { -9.0 };
            let hi = if hi > lo { hi.ceil().max(lo + 1.0) } else { lo + 1.0 };
            (lo, hi)
        }
        YAxis::Linear => {
            let lo = values.fold(1.0f64, f64::min);
            let lo = ((lo * 10.0).floor() / 10.0).clamp(-1.0, 0.9);
            (lo, 1.0)
        }
    };
    let sy = |y: f64| {
        let t = match y_axis {
            YAxis::Log => y.max(1e-300).log10(),
            YAxis::Linear => y,
        };
        TOP + PLOT_H - (t - y_lo) / (y_hi - y_lo) * PLOT_H
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="16" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        TOP - 20.0,
        escape(title)
    );

    // Grid and ticks.
    let _ = writeln!(s, r#"<g font-size="11" fill="black" stroke="none">"#);
    let x_step = ((x_hi - x_lo) / 12.0).ceil().max(1.0) as i32;
    let mut e = x_lo as i32;
    while f64::from(e) <= x_hi {
        let x = LEFT + (f64::from(e) - x_lo) / (x_hi - x_lo) * plot_w;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{}" stroke="#dddddd"/>"##,
            TOP + PLOT_H
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + PLOT_H + 16.0,
            1u64 << e.clamp(0, 63)
        );
        e += x_step;
    }
    let y_ticks: Vec<(f64, String)> = match y_axis {
        YAxis::Log => {
            let step = ((y_hi - y_lo) / 10.0).ceil().max(1.0);
            let mut t = y_lo;
            let mut v = Vec::new();
            while t <= y_hi {
                v.push((10f64.powf(t), format!("1e{}", t as i32)));
                t += step;
            }
            v
        }
        YAxis::Linear => (0..=5)
            .map(|i| {
                let y = y_lo + (y_hi - y_lo) * f64::from(i) / 5.0;
                (y, format!("{y:.2}"))
            })
            .collect(),
    };
    for (y, label) in &y_ticks {
        let py = sy(*y);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ =
            writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{label}</text>"#, LEFT - 6.0, py + 4.0);
    }
    let _ = writeln!(s, "</g>");

    // Axes and labels.
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">n (candidates, log scale)</text>"#,
        LEFT + plot_w / 2.0,
        TOP + PLOT_H + 42.0
    );
    let y_title = match y_axis {
        YAxis::Log => format!("{y_label} (log scale)"),
        YAxis::Linear => y_label.to_string(),
    };
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" font-size="13" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + PLOT_H / 2.0,
        escape(&y_title)
    );

    // Series.
    let ks: Vec<usize> = {
        let mut ks: Vec<usize> = series.keys().map(|&(_, k)| k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    };
    let color = |k: usize| PALETTE[ks.binary_search(&k).unwrap_or(0) % PALETTE.len()];
    let _ = writeln!(s, r#"<g fill="none" stroke-width="1.6">"#);
    for (&(algo, k), points) in series {
        let pts: Vec<String> = points
            .iter()
            .filter(|(_, y)| y_axis == YAxis::Linear || *y > 0.0)
            .map(|&(n, y)| format!("{:.2},{:.2}", sx(n), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline stroke="{}"{} points="{}"><title>{} k={k}</title></polyline>"#,
            color(k),
            dash(algo),
            pts.join(" "),
            algo
        );
    }
    let _ = writeln!(s, "</g>");

    // Legend.
    let lx = LEFT + plot_w + 20.0;
    let _ = writeln!(s, r#"<g font-size="11">"#);
    let _ = writeln!(s, r#"<text x="{lx}" y="{TOP}" font-size="12">algo, k</text>"#);
    for (i, &(algo, k)) in series.keys().enumerate() {
        let y = TOP + LEGEND_ROW * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="{}" stroke-width="2"{}/>"#,
            y - 4.0,
            lx + 28.0,
            y - 4.0,
            color(k),
            dash(algo)
        );
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}">{algo} k={k}</text>"#, lx + 34.0);
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
