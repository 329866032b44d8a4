use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use ztmesh_core::metrics::csv_io::{self, CounterRow, DflRow, LatencyRow};
use ztmesh_core::metrics::overhead::expected_step;
use ztmesh_core::metrics::{nearest_rank, Phase};
use ztmesh_core::scenario::{CONFORMANCE_SCOPE, COUNTERS_CSV, DFL_CSV, LATENCY_CSV, THROUGHPUT_CSV};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no result CSVs in {0}")]
    MissingInput(PathBuf),
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("plot: {0}")]
    Plot(String),
}

#[derive(Debug, Default)]
pub struct RunData {
    pub latency: Vec<LatencyRow>,
    /// `(domains, devices, rate)`
    pub throughput: Vec<(usize, usize, f64)>,
    pub counters: Vec<CounterRow>,
    pub dfl: Vec<DflRow>,
}

fn read<T>(dir: &Path, name: &str, f: fn(&Path) -> io::Result<Vec<T>>, found: &mut bool) -> Result<Vec<T>, ReportError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Ok(Vec::new());
    }
    *found = true;
    f(&path).map_err(|source| ReportError::Read { path, source })
}

pub fn load(dir: &Path) -> Result<RunData, ReportError> {
    let mut found = false;
    let data = RunData {
        latency: read(dir, LATENCY_CSV, csv_io::read_latency, &mut found)?,
        throughput: read(dir, THROUGHPUT_CSV, csv_io::read_throughput, &mut found)?,
        counters: read(dir, COUNTERS_CSV, csv_io::read_counters, &mut found)?,
        dfl: read(dir, DFL_CSV, csv_io::read_dfl, &mut found)?,
    };
    if !found {
        return Err(ReportError::MissingInput(dir.to_path_buf()));
    }
    Ok(data)
}

/// Mean latency per `(phase, n, q)`.
pub fn latency_means(rows: &[LatencyRow]) -> BTreeMap<(Phase, usize, usize), f64> {
    let mut groups: BTreeMap<(Phase, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.phase, r.n, r.q)).or_default().push(r.ms);
    }
    groups.into_iter().map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64)).collect()
}

pub fn summary(data: &RunData) -> String {
    let mut out = String::new();
    let conformance: Vec<&CounterRow> =
        data.counters.iter().filter(|r| r.scope.starts_with(&format!("{CONFORMANCE_SCOPE}/"))).collect();
    if !conformance.is_empty() {
        let _ = writeln!(out, "operation counts");
        for r in conformance {
            let step = &r.scope[CONFORMANCE_SCOPE.len() + 1..];
            match expected_step(step) {
                Some(e) if e == r.counters => {
                    let _ = writeln!(out, "PASS {step}: {}", r.counters);
                }
                Some(e) => {
                    let _ = writeln!(out, "FAIL {step}: expected {e}, measured {}", r.counters);
                }
                None => {
                    let _ = writeln!(out, "FAIL {step}: unknown step, measured {}", r.counters);
                }
            }
        }
    }

    if !data.latency.is_empty() {
        let mut groups: BTreeMap<(Phase, usize, usize), Vec<f64>> = BTreeMap::new();
        for r in &data.latency {
            groups.entry((r.phase, r.n, r.q)).or_default().push(r.ms);
        }
        let _ = writeln!(out, "latency ms (phase n q: count mean p50 p95 p99)");
        for ((phase, n, q), v) in &groups {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let p = |pct| nearest_rank(v, pct).unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "{phase} {n} {q}: {} {mean:.3} {:.3} {:.3} {:.3}",
                v.len(),
                p(50.0),
                p(95.0),
                p(99.0)
            );
        }
    }

    if !data.throughput.is_empty() {
        let mut curves: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for &(n, d, r) in &data.throughput {
            curves.entry(n).or_default().push((d, r));
        }
        let _ = writeln!(out, "throughput r/s by devices");
        for (n, mut c) in curves {
            c.sort_by_key(|p| p.0);
            let points: Vec<String> = c.iter().map(|(d, r)| format!("{d}:{r:.1}")).collect();
            let _ = writeln!(out, "{n} domains: {}", points.join(" "));
        }
    }

    if let Some(last) = data.dfl.iter().map(|r| r.round).max() {
        let _ = writeln!(out, "dfl round {last} (domain: f1 eta)");
        for r in data.dfl.iter().filter(|r| r.round == last) {
            let _ = writeln!(out, "{}: {:.4} {:.6}", r.domain, r.f1, r.eta);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ztmesh_core::metrics::overhead;

    #[test]
    fn conformance_lines_compare_against_expected_counts() {
        let data = RunData {
            counters: vec![
                CounterRow { scope: "steps/registration".into(), counters: overhead::REGISTRATION },
                CounterRow { scope: "steps/authentication".into(), counters: overhead::REGISTRATION },
                CounterRow { scope: "run/registration".into(), counters: overhead::REGISTRATION },
            ],
            ..RunData::default()
        };
        let s = summary(&data);
        assert!(s.contains("PASS registration: 2Exp+H+Sig\n"));
        assert!(s.contains("FAIL authentication: expected Exp+H, measured 2Exp+H+Sig\n"));
        assert!(!s.contains("run/"));
    }

    #[test]
    fn percentiles_use_nearest_rank() {
        let rows: Vec<LatencyRow> = [10.0, 20.0, 30.0, 40.0]
            .iter()
            .enumerate()
            .map(|(i, &ms)| LatencyRow { request_id: i as u64, phase: Phase::IntraDomain, n: 1, q: 1, ms })
            .collect();
        let s = summary(&RunData { latency: rows, ..RunData::default() });
        assert!(s.contains("intra_domain 1 1: 4 25.000 20.000 40.000 40.000\n"), "{s}");
    }
}
