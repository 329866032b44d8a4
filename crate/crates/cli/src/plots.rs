use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use ztmesh_core::metrics::Phase;

use crate::report::{latency_means, RunData};

type Series = Vec<(String, Vec<(f64, f64)>)>;

fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &Series) -> Result<(), String> {
    let points = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let y1 = if y1 > 0.0 { y1 * 1.1 } else { 1.0 };
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(|e| e.to_string())?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(|e| e.to_string())?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(|e| e.to_string())?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 20, y)], color.stroke_width(2)));
        chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(|e| e.to_string())?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| e.to_string())?;
    root.present().map_err(|e| e.to_string())
}

fn series<K: Ord + std::fmt::Display>(map: BTreeMap<K, Vec<(f64, f64)>>, prefix: &str) -> Series {
    map.into_iter()
        .map(|(k, mut v)| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            (format!("{prefix}{k}"), v)
        })
        .collect()
}

/// Writes whichever plots the data supports and returns their paths.
pub fn render(data: &RunData, dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut written = Vec::new();
    let mut emit = |name: &str, title: &str, x: &str, y: &str, s: Series| -> Result<(), String> {
        if s.iter().all(|(_, p)| p.is_empty()) {
            return Ok(());
        }
        let path = dir.join(name);
        line_chart(&path, title, x, y, &s)?;
        written.push(path);
        Ok(())
    };

    let means = latency_means(&data.latency);
    let full: Vec<(usize, usize, f64)> = means
        .iter()
        .filter(|((phase, _, _), _)| *phase == Phase::FullPreauthorization)
        .map(|(&(_, n, q), &ms)| (n, q, ms))
        .collect();
    let mut by_q: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    let mut by_n: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for &(n, q, ms) in &full {
        by_q.entry(q).or_default().push((n as f64, ms));
        by_n.entry(n).or_default().push((q as f64, ms));
    }
    emit("latency_vs_n.svg", "Pre-authorization latency vs neighbours", "n", "mean ms", series(by_q, "q="))?;
    emit("latency_vs_q.svg", "Pre-authorization latency vs parallel requests", "q", "mean ms", series(by_n, "n="))?;

    let mut curves: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for &(n, d, r) in &data.throughput {
        curves.entry(n).or_default().push((d as f64, r));
    }
    emit("throughput_vs_devices.svg", "Throughput vs devices", "devices", "requests/s", series(curves, "domains="))?;

    let mut f1: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &data.dfl {
        f1.entry(r.domain.clone()).or_default().push((f64::from(r.round), r.f1));
    }
    emit("f1_vs_round.svg", "Held-out F1 vs round", "round", "F1", series(f1, ""))?;
    Ok(written)
}
