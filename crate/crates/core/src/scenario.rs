//! Drivers behind the `simulate` and `train` commands. Every result is
//! computed before anything is written, and outputs land in the directory
//! together or not at all.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{Experiment, ScenarioConfig};
use crate::conformance;
use crate::dfl::{encode_checkpoint, DflError, DflRecord, Federation};
use crate::metrics::csv_io::{self, CounterRow, DflRow, LatencyRow};
use crate::metrics::ThroughputRecord;
use crate::protocol::ProtocolError;
use crate::sim::{SimError, SimReport, Simulation, Topology, Workload};

pub const LATENCY_CSV: &str = "latency.csv";
pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const COUNTERS_CSV: &str = "counters.csv";
pub const DFL_CSV: &str = "dfl_metrics.csv";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const CHECKPOINT_EXT: &str = "ckpt";
/// Scope prefix of the conformance rows in `counters.csv`.
pub const CONFORMANCE_SCOPE: &str = "steps";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Sim(Box<SimError>),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("dfl: {0}")]
    Dfl(#[from] DflError),
    #[error("writing outputs: {0}")]
    Io(#[from] io::Error),
}

impl From<SimError> for ScenarioError {
    fn from(e: SimError) -> Self {
        ScenarioError::Sim(Box::new(e))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationOutputs {
    pub latency: Vec<LatencyRow>,
    pub throughput: Vec<ThroughputRecord>,
    pub counters: Vec<CounterRow>,
    pub dfl: Vec<DflRow>,
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutputs {
    pub dfl: Vec<DflRow>,
    /// Final model of each domain in checkpoint encoding.
    pub checkpoints: Vec<(String, Vec<u8>)>,
}

fn dfl_rows(records: Vec<DflRecord>) -> Vec<DflRow> {
    records
        .into_iter()
        .map(|r| DflRow { round: r.round, domain: r.domain, f1: r.f1, eta: r.eta, waf: r.wafs })
        .collect()
}

fn conformance_rows(seed: u64) -> Result<Vec<CounterRow>, ProtocolError> {
    Ok(conformance::measure_step_counts(seed)?
        .into_iter()
        .map(|r| CounterRow { scope: format!("{CONFORMANCE_SCOPE}/{}", r.step), counters: r.measured })
        .collect())
}

struct Cell {
    label: String,
    n: usize,
    q: usize,
    topology: Topology,
    workload: Workload,
}

fn run_cell(cfg: &ScenarioConfig, cell: Cell, trace: bool, out: &mut SimulationOutputs) -> Result<SimReport, ScenarioError> {
    log::info!("running {} ({} requests)", cell.label, cell.workload.total_requests);
    let sim = Simulation::new(
        cell.topology,
        &cell.workload,
        cfg.sim.clone(),
        &cfg.zta,
        &cfg.dfl.data,
        &cfg.dfl.hyperparams,
        cfg.seed,
        trace,
    )?;
    let report = sim.run()?;
    out.latency.extend(report.samples.iter().map(|s| LatencyRow {
        request_id: s.request_id,
        phase: s.phase,
        n: cell.n,
        q: cell.q,
        ms: s.ms(),
    }));
    out.throughput.push(report.throughput.clone());
    out.counters.extend(report.counters.iter().map(|c| CounterRow {
        scope: format!("{}/{}", cell.label, c.scope.rsplit('/').next().unwrap_or(&c.scope)),
        counters: c.counters,
    }));
    out.trace.extend(report.trace.iter().map(|line| format!("{{\"run\":\"{}\",\"entry\":{line}}}", cell.label)));
    Ok(report)
}

/// Run the configured experiment in memory.
pub fn simulate(cfg: &ScenarioConfig, trace: bool) -> Result<SimulationOutputs, ScenarioError> {
    let mut out = SimulationOutputs { counters: conformance_rows(cfg.seed)?, ..Default::default() };
    match &cfg.experiment {
        Experiment::Single => {
            let topology = cfg.topology.build().map_err(SimError::Topology)?;
            let cell = Cell {
                label: "run".into(),
                n: topology.len(),
                q: cfg.workload.parallelism,
                topology,
                workload: cfg.workload.clone(),
            };
            let report = run_cell(cfg, cell, trace, &mut out)?;
            out.dfl = dfl_rows(report.dfl);
        }
        Experiment::LatencyGrid { neighbors, parallel, requests_per_device, latency_ms } => {
            for &n in neighbors {
                for &q in parallel {
                    let workload = Workload {
                        device_count: n * q,
                        total_requests: n * q * requests_per_device,
                        cross_domain_fraction: 1.0,
                        parallelism: q,
                        issuing_domains: (1..=n).map(|i| format!("d{i}")).collect(),
                        ..cfg.workload.clone()
                    };
                    let cell = Cell { label: format!("n{n}_q{q}"), n, q, topology: Topology::star(n, *latency_ms), workload };
                    run_cell(cfg, cell, trace, &mut out)?;
                }
            }
        }
        Experiment::ThroughputGrid { domains, devices, total_requests, latency_ms } => {
            for &n in domains {
                for &d in devices {
                    let q = d.div_ceil(n);
                    let workload = Workload {
                        device_count: d,
                        total_requests: *total_requests,
                        parallelism: q,
                        issuing_domains: Vec::new(),
                        ..cfg.workload.clone()
                    };
                    let cell =
                        Cell { label: format!("n{n}_devices{d}"), n, q, topology: Topology::complete(n, *latency_ms), workload };
                    run_cell(cfg, cell, trace, &mut out)?;
                }
            }
        }
        Experiment::Training => {
            out.dfl = train(cfg, None)?.dfl;
        }
    }
    Ok(out)
}

/// DFL only, over the configured topology. `rounds` overrides the
/// configured round count.
pub fn train(cfg: &ScenarioConfig, rounds: Option<u32>) -> Result<TrainingOutputs, ScenarioError> {
    let topology = cfg.topology.build().map_err(SimError::Topology)?;
    let names = topology.domains().to_vec();
    let neighbors = (0..topology.len()).map(|i| topology.neighbors(i)).collect();
    let mut federation = Federation::synthetic(&names, neighbors, &cfg.dfl.data, &cfg.dfl.hyperparams)?;
    let records = federation.run(rounds.unwrap_or(cfg.dfl.hyperparams.rounds))?;
    let checkpoints = federation.learners.iter().map(|l| (l.id.clone(), encode_checkpoint(l.model()))).collect();
    Ok(TrainingOutputs { dfl: dfl_rows(records), checkpoints })
}

/// Written into a hidden staging directory, then renamed into `dir`.
fn publish(dir: &Path, write: impl FnOnce(&Path) -> io::Result<Vec<PathBuf>>) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let staging = dir.join(format!(".staging-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;
    let result = write(&staging).and_then(|names| {
        for name in names {
            let dest = dir.join(&name);
            if dest.is_dir() {
                fs::remove_dir_all(&dest)?;
            }
            fs::rename(staging.join(&name), dest)?;
        }
        Ok(())
    });
    let cleanup = fs::remove_dir_all(&staging);
    result.and(cleanup)
}

impl SimulationOutputs {
    pub fn write(&self, dir: &Path, trace: bool) -> io::Result<()> {
        publish(dir, |tmp| {
            csv_io::write_latency(&tmp.join(LATENCY_CSV), &self.latency)?;
            csv_io::write_throughput(&tmp.join(THROUGHPUT_CSV), &self.throughput)?;
            csv_io::write_counters(&tmp.join(COUNTERS_CSV), &self.counters)?;
            csv_io::write_dfl(&tmp.join(DFL_CSV), &self.dfl)?;
            let mut names: Vec<PathBuf> = [LATENCY_CSV, THROUGHPUT_CSV, COUNTERS_CSV, DFL_CSV].map(PathBuf::from).into();
            if trace {
                let mut text = self.trace.join("\n");
                text.push('\n');
                fs::write(tmp.join(TRACE_FILE), text)?;
                names.push(TRACE_FILE.into());
            }
            Ok(names)
        })
    }
}

impl TrainingOutputs {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        publish(dir, |tmp| {
            csv_io::write_dfl(&tmp.join(DFL_CSV), &self.dfl)?;
            let ckpt = tmp.join(CHECKPOINT_DIR);
            fs::create_dir(&ckpt)?;
            for (domain, bytes) in &self.checkpoints {
                fs::write(ckpt.join(format!("{domain}.{CHECKPOINT_EXT}")), bytes)?;
            }
            Ok(vec![DFL_CSV.into(), CHECKPOINT_DIR.into()])
        })
    }
}
