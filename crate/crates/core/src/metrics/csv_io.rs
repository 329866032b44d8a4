//! Fixed-header CSV outputs. Values never contain commas or quotes, so rows
//! are written and read without a quoting layer.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::bench::{Phase, ThroughputRecord};
use super::counters::OpCounters;

pub const LATENCY_HEADER: &str = "request_id,phase,n,q,ms";
pub const THROUGHPUT_HEADER: &str = "n,devices,rate_rps";
pub const COUNTERS_HEADER: &str = "scope,exp,h,sig,i,cp,m,cs";
pub const DFL_HEADER: &str = "round,domain,f1,eta,waf";

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyRow {
    pub request_id: u64,
    pub phase: Phase,
    pub n: usize,
    pub q: usize,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterRow {
    pub scope: String,
    pub counters: OpCounters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DflRow {
    pub round: u32,
    pub domain: String,
    pub f1: f64,
    pub eta: f64,
    /// `(neighbor, waf)` pairs, serialised as `a=0.71;b=0.64`.
    pub waf: Vec<(String, f64)>,
}

fn write_lines(path: &Path, header: &str, body: String) -> io::Result<()> {
    let mut out = String::with_capacity(header.len() + body.len() + 1);
    out.push_str(header);
    out.push('\n');
    out.push_str(&body);
    fs::write(path, out)
}

pub fn write_latency(path: &Path, rows: &[LatencyRow]) -> io::Result<()> {
    let mut body = String::new();
    for r in rows {
        let _ = writeln!(body, "{},{},{},{},{:.3}", r.request_id, r.phase, r.n, r.q, r.ms);
    }
    write_lines(path, LATENCY_HEADER, body)
}

pub fn write_throughput(path: &Path, rows: &[ThroughputRecord]) -> io::Result<()> {
    let mut body = String::new();
    for r in rows {
        let _ = writeln!(body, "{},{},{:.3}", r.domains, r.devices, r.rate_rps);
    }
    write_lines(path, THROUGHPUT_HEADER, body)
}

pub fn write_counters(path: &Path, rows: &[CounterRow]) -> io::Result<()> {
    let mut body = String::new();
    for r in rows {
        let c = r.counters;
        let _ = writeln!(body, "{},{},{},{},{},{},{},{}", r.scope, c.exp, c.h, c.sig, c.i, c.cp, c.m, c.cs);
    }
    write_lines(path, COUNTERS_HEADER, body)
}

pub fn write_dfl(path: &Path, rows: &[DflRow]) -> io::Result<()> {
    let mut body = String::new();
    for r in rows {
        let waf: Vec<String> = r.waf.iter().map(|(d, w)| format!("{d}={w:.6}")).collect();
        let _ = writeln!(body, "{},{},{:.6},{:.6},{}", r.round, r.domain, r.f1, r.eta, waf.join(";"));
    }
    write_lines(path, DFL_HEADER, body)
}

fn bad(line: usize, msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {}", msg.into()))
}

fn rows<'a>(text: &'a str, header: &str) -> io::Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == header => {}
        Some(h) => return Err(bad(1, format!("expected header `{header}`, found `{h}`"))),
        None => return Err(bad(1, "empty file")),
    }
    Ok(lines.enumerate().filter(|(_, l)| !l.is_empty()).map(|(i, l)| (i + 2, l.split(',').collect())))
}

fn field<T: std::str::FromStr>(line: usize, cols: &[&str], idx: usize) -> io::Result<T> {
    cols.get(idx)
        .ok_or_else(|| bad(line, format!("missing column {idx}")))?
        .parse()
        .map_err(|_| bad(line, format!("unparsable column {idx}")))
}

pub fn read_latency(path: &Path) -> io::Result<Vec<LatencyRow>> {
    let text = fs::read_to_string(path)?;
    let out = rows(&text, LATENCY_HEADER)?
        .map(|(line, c)| {
            Ok(LatencyRow {
                request_id: field(line, &c, 0)?,
                phase: c.get(1).and_then(|p| p.parse().ok()).ok_or_else(|| bad(line, "bad phase"))?,
                n: field(line, &c, 2)?,
                q: field(line, &c, 3)?,
                ms: field(line, &c, 4)?,
            })
        })
        .collect();
    out
}

pub fn read_throughput(path: &Path) -> io::Result<Vec<(usize, usize, f64)>> {
    let text = fs::read_to_string(path)?;
    let out = rows(&text, THROUGHPUT_HEADER)?
        .map(|(line, c)| Ok((field(line, &c, 0)?, field(line, &c, 1)?, field(line, &c, 2)?)))
        .collect();
    out
}

pub fn read_counters(path: &Path) -> io::Result<Vec<CounterRow>> {
    let text = fs::read_to_string(path)?;
    let out = rows(&text, COUNTERS_HEADER)?
        .map(|(line, c)| {
            Ok(CounterRow {
                scope: c.first().map(|s| s.to_string()).ok_or_else(|| bad(line, "missing scope"))?,
                counters: OpCounters {
                    exp: field(line, &c, 1)?,
                    h: field(line, &c, 2)?,
                    sig: field(line, &c, 3)?,
                    i: field(line, &c, 4)?,
                    cp: field(line, &c, 5)?,
                    m: field(line, &c, 6)?,
                    cs: field(line, &c, 7)?,
                },
            })
        })
        .collect();
    out
}

pub fn read_dfl(path: &Path) -> io::Result<Vec<DflRow>> {
    let text = fs::read_to_string(path)?;
    let out = rows(&text, DFL_HEADER)?
        .map(|(line, c)| {
            let waf = match c.get(4) {
                Some(s) if !s.is_empty() => s
                    .split(';')
                    .map(|kv| {
                        let (k, v) = kv.split_once('=').ok_or_else(|| bad(line, "bad waf pair"))?;
                        Ok((k.to_string(), v.parse().map_err(|_| bad(line, "bad waf value"))?))
                    })
                    .collect::<io::Result<Vec<_>>>()?,
                _ => Vec::new(),
            };
            Ok(DflRow {
                round: field(line, &c, 0)?,
                domain: c.get(1).map(|s| s.to_string()).ok_or_else(|| bad(line, "missing domain"))?,
                f1: field(line, &c, 2)?,
                eta: field(line, &c, 3)?,
                waf,
            })
        })
        .collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dfl_rows_survive_a_write_read_cycle() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dfl_metrics.csv");
        let rows = vec![
            DflRow { round: 1, domain: "a".into(), f1: 0.5, eta: 0.01, waf: vec![("b".into(), 0.75)] },
            DflRow { round: 1, domain: "solo".into(), f1: 0.25, eta: 0.01, waf: vec![] },
        ];
        write_dfl(&p, &rows).unwrap();
        assert_eq!(read_dfl(&p).unwrap(), rows);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("round,domain,f1,eta,waf\n1,a,0.500000,0.010000,b=0.750000\n"));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("latency.csv");
        fs::write(&p, "id,ms\n1,2\n").unwrap();
        assert!(read_latency(&p).is_err());
    }
}
