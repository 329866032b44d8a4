use std::collections::{BTreeMap, VecDeque};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::events::{EventQueue, SimTime};
use super::topology::Topology;
use super::workload::{generate_workload, Workload, WorkloadPlan};
use super::SimError;
use crate::control_plane::{AccessLevel, AccessRequest, ControlPlane, DeviceContextRecord, ZtaConfig};
use crate::crypto::{self, Certificate};
use crate::dfl::data::{device_observation, dirichlet_partition};
use crate::dfl::{Dataset, DflRecord, DomainLearner, ModelParameters, RoundMessage, SyntheticSetup, TrainingHyperparams};
use crate::metrics::csv_io::CounterRow;
use crate::metrics::overhead::{self, Branch, Path};
use crate::metrics::{measure, LatencySample, OpCounters, Phase, ThroughputRecord};
use crate::protocol::{self, Channel, OneTimeToken, PreauthResponse};

/// Simulated cost of each counted operation, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostTable {
    pub exp: f64,
    pub h: f64,
    pub sig: f64,
    pub i: f64,
    pub cp: f64,
    pub m: f64,
    pub cs: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable { exp: 0.6, h: 0.01, sig: 0.4, i: 1.5, cp: 0.1, m: 0.5, cs: 0.02 }
    }
}

impl CostTable {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.exp, self.h, self.sig, self.i, self.cp, self.m, self.cs];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err("operation costs must be finite and >= 0".into());
        }
        Ok(())
    }

    pub fn duration(&self, c: &OpCounters) -> SimTime {
        let ms = c.exp as f64 * self.exp
            + c.h as f64 * self.h
            + c.sig as f64 * self.sig
            + c.i as f64 * self.i
            + c.cp as f64 * self.cp
            + c.m as f64 * self.m
            + c.cs as f64 * self.cs;
        SimTime::from_ms(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub workers_per_domain: usize,
    /// Cores shared by every domain; 0 means unbounded.
    pub host_cores: usize,
    pub timeout_ms: f64,
    /// Link rate for the serialization delay; 0 means pure latency.
    pub link_rate_bytes_per_ms: f64,
    pub round_interval_ms: f64,
    pub pretrain_rounds: u32,
    /// Non-issuing devices per domain that contribute context records.
    pub resident_devices_per_domain: usize,
    /// Context records per device; the last one of each device is held out
    /// for validation.
    pub records_per_device: usize,
    pub observation_noise: f64,
    /// Share of devices whose context falls in an anomalous class.
    pub anomalous_device_fraction: f64,
    /// Devices move to the target domain after a granted token.
    pub mobility: bool,
    /// Devices present granted tokens at the target.
    pub present_tokens: bool,
    pub costs_ms: CostTable,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            workers_per_domain: 1,
            host_cores: 0,
            timeout_ms: 5000.0,
            link_rate_bytes_per_ms: 0.0,
            round_interval_ms: 50.0,
            pretrain_rounds: 10,
            resident_devices_per_domain: 8,
            records_per_device: 8,
            observation_noise: 0.05,
            anomalous_device_fraction: 0.05,
            mobility: false,
            present_tokens: true,
            costs_ms: CostTable::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.workers_per_domain == 0 {
            return Err("workers_per_domain must be at least 1".into());
        }
        for (name, v) in [
            ("timeout_ms", self.timeout_ms),
            ("round_interval_ms", self.round_interval_ms),
            ("observation_noise", self.observation_noise),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} must be finite and > 0"));
            }
        }
        if self.resident_devices_per_domain == 0 {
            return Err("resident_devices_per_domain must be at least 1".into());
        }
        if self.records_per_device < 2 {
            return Err("records_per_device must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.anomalous_device_fraction) {
            return Err("anomalous_device_fraction must lie in [0, 1]".into());
        }
        if !self.link_rate_bytes_per_ms.is_finite() || self.link_rate_bytes_per_ms < 0.0 {
            return Err("link_rate_bytes_per_ms must be finite and >= 0".into());
        }
        self.costs_ms.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Grant,
    Denial,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Grant => "grant",
            Outcome::Denial => "denial",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub grant: u64,
    pub denial: u64,
    pub timeout: u64,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.grant + self.denial + self.timeout
    }

    fn add(&mut self, o: Outcome) {
        match o {
            Outcome::Grant => self.grant += 1,
            Outcome::Denial => self.denial += 1,
            Outcome::Timeout => self.timeout += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RequestSummary {
    pub id: u64,
    pub device: String,
    pub origin: String,
    pub target: String,
    pub path: Path,
    pub outcome: Outcome,
    pub issued_ms: f64,
    pub completed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub samples: Vec<LatencySample>,
    pub throughput: ThroughputRecord,
    pub outcomes: OutcomeCounts,
    pub requests: Vec<RequestSummary>,
    /// Totals per scope: registration, intra-domain, cross-domain and token verification.
    pub counters: Vec<CounterRow>,
    pub dfl: Vec<DflRecord>,
    pub models: Vec<(String, ModelParameters)>,
    pub events: u64,
    /// SHA-256 over the event log, hex.
    pub log_hash: String,
    /// The event log, one JSON object per line, when tracing.
    pub trace: Vec<String>,
    pub end_ms: f64,
}

#[derive(Debug, Clone)]
enum Message {
    Round(Vec<u8>),
    SealedRequest { request: usize, bytes: Vec<u8> },
    Response { request: usize, bytes: Vec<u8> },
}

impl Message {
    fn label(&self) -> &'static str {
        match self {
            Message::Round(_) => "round_update",
            Message::SealedRequest { .. } => "sealed_request",
            Message::Response { .. } => "preauth_response",
        }
    }

    fn len(&self) -> usize {
        match self {
            Message::Round(b) | Message::SealedRequest { bytes: b, .. } | Message::Response { bytes: b, .. } => b.len(),
        }
    }
}

#[derive(Debug, Clone)]
enum Event {
    RoundTick { round: u32 },
    WorkloadStart,
    RequestIssued { device: usize },
    MessageArrival { src: usize, dst: usize, sent: SimTime, message: Message },
    TokenPresented { request: usize },
    JobDone { job: usize },
}

#[derive(Debug, Clone)]
enum JobKind {
    Source,
    Target { bytes: Vec<u8> },
    TokenVerify,
    Intra,
}

#[derive(Debug)]
struct Job {
    domain: usize,
    request: usize,
    kind: JobKind,
    outcome: JobOutcome,
}

#[derive(Debug)]
enum JobOutcome {
    Pending,
    Sealed(Vec<u8>),
    Responded(Vec<u8>),
    Verified(bool),
    Decided { allow: bool, branch: Branch },
}

#[derive(Debug)]
struct DeviceState {
    id: String,
    home: usize,
    issuing_home: usize,
    certs: BTreeMap<usize, Certificate>,
    remaining: usize,
}

#[derive(Debug)]
struct RequestState {
    device: usize,
    origin: usize,
    target: usize,
    path: Path,
    request: AccessRequest,
    issued: SimTime,
    data_shared: Option<SimTime>,
    responded: Option<SimTime>,
    presented: Option<SimTime>,
    channel: Option<Channel>,
    token: Option<OneTimeToken>,
    branch: Option<Branch>,
    counters: OpCounters,
    verify_counters: OpCounters,
    outcome: Option<(Outcome, SimTime)>,
}

struct DomainState {
    cp: ControlPlane,
    busy: usize,
    inbox: BTreeMap<usize, RoundMessage>,
}

/// One seeded run of the domains, their DFL pretraining and the request
/// workload.
pub struct Simulation {
    topology: Topology,
    config: SimConfig,
    plan: WorkloadPlan,
    queue: EventQueue<Event>,
    domains: Vec<DomainState>,
    learners: Vec<DomainLearner>,
    /// Every domain's held-out records, for the per-round F1 log.
    test: Dataset,
    devices: Vec<DeviceState>,
    pending: Vec<VecDeque<usize>>,
    requests: Vec<RequestState>,
    jobs: Vec<Job>,
    host_busy: usize,
    /// Submitted jobs not yet started, oldest first.
    ready: VecDeque<usize>,
    crypto_rng: ChaCha20Rng,
    workload_rng: ChaCha8Rng,
    resources: Vec<String>,
    intention: String,
    workload_start: Option<SimTime>,
    last_completion: SimTime,
    samples: Vec<LatencySample>,
    outcomes: OutcomeCounts,
    totals: BTreeMap<&'static str, OpCounters>,
    dfl: Vec<DflRecord>,
    hasher: Sha256,
    events: u64,
    trace: Option<Vec<String>>,
}

impl Simulation {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        topology: Topology,
        workload: &Workload,
        config: SimConfig,
        zta: &ZtaConfig,
        setup: &SyntheticSetup,
        hp: &TrainingHyperparams,
        seed: u64,
        trace: bool,
    ) -> Result<Self, SimError> {
        config.validate().map_err(SimError::Config)?;
        zta.validate().map_err(SimError::Config)?;
        hp.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if topology.is_empty() {
            return Err(SimError::Topology("no domains".into()));
        }
        let plan = generate_workload(workload, &topology)?;
        let names = topology.domains().to_vec();
        let arch = setup.architecture()?;
        let init = ModelParameters::init(&arch, &mut ChaCha8Rng::seed_from_u64(setup.seed ^ 0x5eed));

        let mut crypto_rng = ChaCha20Rng::seed_from_u64(seed);
        let mut workload_rng = ChaCha8Rng::seed_from_u64(seed ^ workload.seed.rotate_left(17) ^ 0x776f_726b);
        let mut domains: Vec<DomainState> = names
            .iter()
            .map(|n| {
                let keys = crypto::generate_keypair_with(&mut crypto_rng);
                let mut cp = ControlPlane::new(n.clone(), keys, zta, arch.input_dim(), arch.classes());
                cp.model = Some(init.clone());
                DomainState { cp, busy: 0, inbox: BTreeMap::new() }
            })
            .collect();
        for i in 0..domains.len() {
            for j in topology.neighbors(i) {
                let pk = domains[j].cp.am.public_key();
                domains[i].cp.am.trust_issuer(names[j].clone(), pk);
            }
        }

        // Each domain's devices mostly share a skewed mix of ordinary
        // classes; a small share sit in an anomalous class.
        let anomalous = &zta.trust.anomalous_classes;
        let ordinary: Vec<usize> = (0..arch.classes()).filter(|c| !anomalous.contains(c)).collect();
        let mut data_rng = ChaCha8Rng::seed_from_u64(setup.seed);
        let mixes = if ordinary.len() >= 2 {
            dirichlet_partition(&mut data_rng, setup.dirichlet_alpha, ordinary.len(), names.len())
        } else {
            vec![vec![1.0; ordinary.len().max(1)]; names.len()]
        };
        let draw_class = |rng: &mut ChaCha8Rng, home: usize| -> usize {
            let bad: Vec<usize> = anomalous.iter().copied().filter(|&c| c < arch.classes()).collect();
            if ordinary.is_empty() || (!bad.is_empty() && rng.gen_bool(config.anomalous_device_fraction)) {
                return bad.get(rng.gen_range(0..bad.len().max(1))).copied().unwrap_or(0);
            }
            WeightedIndex::new(&mixes[home]).map(|w| ordinary[w.sample(rng)]).unwrap_or(ordinary[0])
        };

        // Residents first, then workload devices, each registered at home
        // with its context records ingested there.
        let mut population: Vec<(String, usize, Option<usize>)> = Vec::new();
        for (d, name) in names.iter().enumerate() {
            for k in 0..config.resident_devices_per_domain {
                population.push((format!("{name}-r{k}"), d, None));
            }
        }
        for p in &plan.devices {
            population.push((p.id.clone(), p.home, Some(p.quota)));
        }
        let mut totals = BTreeMap::new();
        let mut devices = Vec::new();
        let mut held_out = vec![Dataset::default(); names.len()];
        for (id, home, quota) in population {
            let cert = register(&mut domains[home].cp, &id, &mut crypto_rng, &mut totals)?;
            let class = draw_class(&mut workload_rng, home);
            for k in 0..config.records_per_device {
                let features = device_observation(&mut workload_rng, &id, arch.input_dim(), config.observation_noise);
                if k + 1 == config.records_per_device {
                    held_out[home].push(features, class);
                    continue;
                }
                let record = DeviceContextRecord { device_id: id.clone(), context_class: class, feature_vector: features, timestamp_ms: 0 };
                domains[home].cp.cam.cam_ingest(record).map_err(|e| SimError::Invariant(e.to_string()))?;
            }
            if let Some(remaining) = quota {
                devices.push(DeviceState { id, home, issuing_home: home, certs: BTreeMap::from([(home, cert)]), remaining });
            }
        }
        let mut test = Dataset::default();
        let mut learners = Vec::with_capacity(names.len());
        for (d, validation) in held_out.into_iter().enumerate() {
            test.extend(validation.clone());
            let ids: Vec<String> = topology.neighbors(d).into_iter().map(|j| names[j].clone()).collect();
            let train = domains[d].cp.cam.training_set();
            learners.push(DomainLearner::new(names[d].clone(), init.clone(), &ids, train, validation, hp.clone(), seed.wrapping_add(1 + d as u64))?);
        }

        Ok(Simulation {
            pending: plan.queues.iter().map(|q| q.iter().copied().collect()).collect(),
            topology,
            config,
            plan,
            queue: EventQueue::new(),
            domains,
            learners,
            test,
            devices,
            requests: Vec::new(),
            jobs: Vec::new(),
            host_busy: 0,
            ready: VecDeque::new(),
            crypto_rng,
            workload_rng,
            resources: workload.resources.clone(),
            intention: workload.intention.clone(),
            workload_start: None,
            last_completion: SimTime::ZERO,
            samples: Vec::new(),
            outcomes: OutcomeCounts::default(),
            totals,
            dfl: Vec::new(),
            hasher: Sha256::new(),
            events: 0,
            trace: trace.then(Vec::new),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn plan(&self) -> &WorkloadPlan {
        &self.plan
    }

    pub fn control_plane(&self, domain: &str) -> Option<&ControlPlane> {
        self.topology.index_of(domain).map(|i| &self.domains[i].cp)
    }

    pub fn device_home(&self, device: &str) -> Option<&str> {
        self.devices.iter().find(|d| d.id == device).map(|d| self.topology.name(d.home))
    }

    /// Arrival time of a message of `bytes` sent now from `src` to `dst`.
    pub fn arrival_time(&self, src: usize, dst: usize, bytes: usize) -> Result<SimTime, SimError> {
        let latency = self.topology.latency_ms(src, dst).ok_or_else(|| SimError::NotNeighbors {
            from: self.topology.name(src).to_string(),
            to: self.topology.name(dst).to_string(),
        })?;
        let rate = self.config.link_rate_bytes_per_ms;
        let serialization = if rate > 0.0 { bytes as f64 / rate } else { 0.0 };
        Ok(self.queue.now() + SimTime::from_ms(latency + serialization))
    }

    fn send_cross_domain(&mut self, src: usize, dst: usize, message: Message) -> Result<SimTime, SimError> {
        let at = self.arrival_time(src, dst, message.len())?;
        let sent = self.queue.now();
        self.queue.schedule(at, Event::MessageArrival { src, dst, sent, message })?;
        Ok(at)
    }

    /// Re-home a device to an adjacent domain, registering it there on first visit.
    pub fn move_device(&mut self, device: &str, from: &str, to: &str) -> Result<(), SimError> {
        let d = self.devices.iter().position(|x| x.id == device).ok_or_else(|| SimError::UnknownDevice(device.to_string()))?;
        let (f, t) = match (self.topology.index_of(from), self.topology.index_of(to)) {
            (Some(f), Some(t)) => (f, t),
            _ => return Err(SimError::NotNeighbors { from: from.to_string(), to: to.to_string() }),
        };
        self.move_index(d, f, t)
    }

    fn move_index(&mut self, d: usize, from: usize, to: usize) -> Result<(), SimError> {
        if self.devices[d].home != from {
            return Err(SimError::Invariant(format!("{} is not in {}", self.devices[d].id, self.topology.name(from))));
        }
        if !self.topology.adjacent(from, to) {
            return Err(SimError::NotNeighbors {
                from: self.topology.name(from).to_string(),
                to: self.topology.name(to).to_string(),
            });
        }
        if !self.devices[d].certs.contains_key(&to) {
            let id = self.devices[d].id.clone();
            let cert = register(&mut self.domains[to].cp, &id, &mut self.crypto_rng, &mut self.totals)?;
            self.devices[d].certs.insert(to, cert);
        }
        self.devices[d].home = to;
        Ok(())
    }

    fn log(&mut self, at: SimTime, seq: u64, detail: serde_json::Value) {
        let line = json!({ "t_us": at.as_us(), "seq": seq, "event": detail }).to_string();
        log::trace!("{line}");
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        self.events += 1;
        if let Some(t) = self.trace.as_mut() {
            t.push(line);
        }
    }

    pub fn run(mut self) -> Result<SimReport, SimError> {
        for i in 0..self.domains.len() {
            let bytes = self.learners[i].outbound().to_wire();
            for j in self.topology.neighbors(i) {
                self.send_cross_domain(i, j, Message::Round(bytes.clone()))?;
            }
        }
        if self.config.pretrain_rounds > 0 {
            self.queue.schedule_in(SimTime::from_ms(self.config.round_interval_ms), Event::RoundTick { round: 1 });
        } else {
            self.queue.schedule_in(SimTime::ZERO, Event::WorkloadStart);
        }
        while let Some((at, seq, event)) = self.queue.pop() {
            self.handle(at, seq, event)?;
        }
        self.finish()
    }

    fn handle(&mut self, at: SimTime, seq: u64, event: Event) -> Result<(), SimError> {
        match event {
            Event::RoundTick { round } => {
                self.log(at, seq, json!({ "kind": "round_tick", "round": round }));
                self.round_tick(round)?;
            }
            Event::WorkloadStart => {
                self.log(at, seq, json!({ "kind": "workload_start" }));
                self.workload_start = Some(at);
                self.last_completion = at;
                for d in self.plan.initial() {
                    let home = self.devices[d].issuing_home;
                    self.pending[home].retain(|&x| x != d);
                    self.queue.schedule_in(SimTime::ZERO, Event::RequestIssued { device: d });
                }
            }
            Event::RequestIssued { device } => self.issue(at, seq, device)?,
            Event::MessageArrival { src, dst, sent, message } => {
                self.log(
                    at,
                    seq,
                    json!({
                        "kind": "message_arrival",
                        "message": message.label(),
                        "src": self.topology.name(src),
                        "dst": self.topology.name(dst),
                        "sent_us": sent.as_us(),
                        "bytes": message.len(),
                    }),
                );
                self.arrive(at, src, dst, message)?;
            }
            Event::TokenPresented { request } => {
                self.log(at, seq, json!({ "kind": "token_presented", "request": request }));
                self.requests[request].presented = Some(at);
                let target = self.requests[request].target;
                self.submit(target, request, JobKind::TokenVerify);
            }
            Event::JobDone { job } => {
                self.log(at, seq, json!({ "kind": "job_done", "job": job, "domain": self.topology.name(self.jobs[job].domain) }));
                self.job_done(at, job)?;
            }
        }
        Ok(())
    }

    fn round_tick(&mut self, round: u32) -> Result<(), SimError> {
        let now = self.queue.now();
        let mut outbound = Vec::with_capacity(self.domains.len());
        for i in 0..self.domains.len() {
            let inbox: Vec<(String, RoundMessage)> = std::mem::take(&mut self.domains[i].inbox)
                .into_iter()
                .map(|(j, m)| (self.topology.name(j).to_string(), m))
                .collect();
            let learner = &mut self.learners[i];
            let (msg, report) = learner.run_round(&inbox)?;
            self.dfl.push(DflRecord {
                round: report.round,
                domain: learner.id.clone(),
                f1: learner.evaluate(&self.test)?,
                eta: report.eta,
                wafs: report.neighbors.into_iter().map(|(d, w, _)| (d, w)).collect(),
            });
            self.domains[i].cp.model = Some(learner.model().clone());
            outbound.push(msg.to_wire());
        }
        for (i, bytes) in outbound.into_iter().enumerate() {
            for j in self.topology.neighbors(i) {
                self.send_cross_domain(i, j, Message::Round(bytes.clone()))?;
            }
        }
        if round < self.config.pretrain_rounds {
            let next = now + SimTime::from_ms(self.config.round_interval_ms);
            self.queue.schedule(next, Event::RoundTick { round: round + 1 })?;
        } else {
            self.queue.schedule(now, Event::WorkloadStart)?;
        }
        Ok(())
    }

    fn issue(&mut self, at: SimTime, seq: u64, device: usize) -> Result<(), SimError> {
        let home = self.devices[device].home;
        let target = self.plan.draw_target(&mut self.workload_rng, &self.topology, home);
        let resource = self.resources[self.workload_rng.gen_range(0..self.resources.len())].clone();
        let (path, target) = match target {
            Some(t) => (Path::CrossDomain, t),
            None => (Path::IntraDomain, home),
        };
        let cert = self.devices[device].certs[&home].clone();
        let request = AccessRequest::new(cert, self.topology.name(target), resource, AccessLevel::Read, self.intention.clone())
            .map_err(|e| SimError::Invariant(e.to_string()))?;
        self.devices[device].remaining -= 1;
        let id = self.requests.len();
        self.log(
            at,
            seq,
            json!({
                "kind": "request_issued",
                "request": id,
                "device": self.devices[device].id,
                "origin": self.topology.name(home),
                "target": self.topology.name(target),
            }),
        );
        self.requests.push(RequestState {
            device,
            origin: home,
            target,
            path,
            request,
            issued: at,
            data_shared: None,
            responded: None,
            presented: None,
            channel: None,
            token: None,
            branch: None,
            counters: OpCounters::ZERO,
            verify_counters: OpCounters::ZERO,
            outcome: None,
        });
        let kind = if path == Path::CrossDomain { JobKind::Source } else { JobKind::Intra };
        self.submit(home, id, kind);
        Ok(())
    }

    fn submit(&mut self, domain: usize, request: usize, kind: JobKind) {
        let job = self.jobs.len();
        self.jobs.push(Job { domain, request, kind, outcome: JobOutcome::Pending });
        self.ready.push_back(job);
        self.dispatch();
    }

    /// Start ready jobs in submission order while a core is free, skipping
    /// jobs whose domain has no free worker.
    fn dispatch(&mut self) {
        while self.config.host_cores == 0 || self.host_busy < self.config.host_cores {
            let workers = self.config.workers_per_domain;
            let Some(pos) = self.ready.iter().position(|&j| self.domains[self.jobs[j].domain].busy < workers) else {
                break;
            };
            let job = self.ready.remove(pos).expect("position is in range");
            self.domains[self.jobs[job].domain].busy += 1;
            self.host_busy += 1;
            self.start(job);
        }
    }

    /// Run the job's computation now; its effects land at completion.
    fn start(&mut self, job: usize) {
        let (domain, r, kind) = {
            let j = &self.jobs[job];
            (j.domain, j.request, j.kind.clone())
        };
        let now_ms = self.queue.now().as_us() / 1000;
        let (outcome, counters) = match kind {
            JobKind::Source => {
                let rng = &mut self.crypto_rng;
                let req = &mut self.requests[r];
                measure("source", || {
                    let channel = Channel::open(rng).expect("fresh channel keys agree");
                    let sealed = protocol::seal_request(&channel, &req.request, rng).expect("valid request serializes");
                    req.channel = Some(channel);
                    JobOutcome::Sealed(sealed)
                })
            }
            JobKind::Target { bytes } => {
                let rng = &mut self.crypto_rng;
                let req = &mut self.requests[r];
                let cp = &mut self.domains[domain].cp;
                measure("target", || {
                    let channel = req.channel.as_ref().expect("sealed before delivery");
                    let received = protocol::open_sealed_request(channel, &bytes).expect("channel key matches");
                    let evaluation = cp.evaluate(&received, now_ms);
                    req.branch = Some(branch_of(evaluation.authenticated, evaluation.decision.allow));
                    let response = protocol::respond(cp, &received, &evaluation, rng).expect("allowed decisions yield tokens");
                    JobOutcome::Responded(response.to_wire())
                })
            }
            JobKind::TokenVerify => {
                let req = &self.requests[r];
                let cp = &mut self.domains[domain].cp;
                let token = req.token.as_ref().expect("presented tokens were received");
                measure("token_verify", || JobOutcome::Verified(protocol::redeem(cp, token, &req.request, now_ms).is_ok()))
            }
            JobKind::Intra => {
                let req = &self.requests[r];
                let cp = &self.domains[domain].cp;
                measure("intra", || {
                    let evaluation = cp.evaluate(&req.request, now_ms);
                    JobOutcome::Decided {
                        allow: evaluation.decision.allow,
                        branch: branch_of(evaluation.authenticated, evaluation.decision.allow),
                    }
                })
            }
        };
        if matches!(self.jobs[job].kind, JobKind::TokenVerify) {
            self.requests[r].verify_counters += counters;
        } else {
            self.requests[r].counters += counters;
        }
        self.jobs[job].outcome = outcome;
        self.queue.schedule_in(self.config.costs_ms.duration(&counters), Event::JobDone { job });
    }

    fn job_done(&mut self, at: SimTime, job: usize) -> Result<(), SimError> {
        let domain = self.jobs[job].domain;
        let r = self.jobs[job].request;
        self.domains[domain].busy -= 1;
        self.host_busy -= 1;
        match std::mem::replace(&mut self.jobs[job].outcome, JobOutcome::Pending) {
            JobOutcome::Sealed(bytes) => {
                let (src, dst) = (self.requests[r].origin, self.requests[r].target);
                self.send_cross_domain(src, dst, Message::SealedRequest { request: r, bytes })?;
            }
            JobOutcome::Responded(bytes) => {
                let (src, dst) = (self.requests[r].target, self.requests[r].origin);
                self.send_cross_domain(src, dst, Message::Response { request: r, bytes })?;
            }
            JobOutcome::Verified(ok) => {
                let outcome = if ok { Outcome::Grant } else { Outcome::Denial };
                if ok && self.config.mobility {
                    let (d, from, to) = (self.requests[r].device, self.requests[r].origin, self.requests[r].target);
                    if self.devices[d].home == from {
                        self.move_index(d, from, to)?;
                    }
                }
                self.complete(at, r, outcome)?;
            }
            JobOutcome::Decided { allow, branch } => {
                self.requests[r].branch = Some(branch);
                self.complete(at, r, if allow { Outcome::Grant } else { Outcome::Denial })?;
            }
            JobOutcome::Pending => return Err(SimError::Invariant(format!("job {job} finished without a result"))),
        }
        self.dispatch();
        Ok(())
    }

    fn arrive(&mut self, at: SimTime, src: usize, dst: usize, message: Message) -> Result<(), SimError> {
        match message {
            Message::Round(bytes) => {
                let msg = RoundMessage::from_wire(&bytes).map_err(|e| SimError::Invariant(e.to_string()))?;
                self.domains[dst].inbox.insert(src, msg);
            }
            Message::SealedRequest { request, bytes } => {
                self.requests[request].data_shared = Some(at);
                self.submit(dst, request, JobKind::Target { bytes });
            }
            Message::Response { request, bytes } => {
                self.requests[request].responded = Some(at);
                let response = PreauthResponse::from_wire(&bytes).map_err(|e| SimError::Invariant(e.to_string()))?;
                match response {
                    PreauthResponse::Token(token) if self.config.present_tokens => {
                        self.requests[request].token = Some(token);
                        self.queue.schedule(at, Event::TokenPresented { request })?;
                    }
                    PreauthResponse::Token(token) => {
                        self.requests[request].token = Some(token);
                        self.complete(at, request, Outcome::Grant)?;
                    }
                    PreauthResponse::Denied(_) => self.complete(at, request, Outcome::Denial)?,
                }
            }
        }
        Ok(())
    }

    fn complete(&mut self, at: SimTime, r: usize, outcome: Outcome) -> Result<(), SimError> {
        let req = &self.requests[r];
        let branch = req.branch.ok_or_else(|| SimError::Invariant(format!("request {r} completed without a decision")))?;
        let expected = overhead::expected_request(req.path, branch);
        if req.counters != expected {
            return Err(SimError::CounterMismatch { request: r as u64, expected, measured: req.counters });
        }
        if req.presented.is_some() && req.verify_counters != overhead::TOKEN_VERIFICATION {
            return Err(SimError::CounterMismatch {
                request: r as u64,
                expected: overhead::TOKEN_VERIFICATION,
                measured: req.verify_counters,
            });
        }
        let elapsed = at.saturating_sub(req.issued);
        let outcome = if elapsed > SimTime::from_ms(self.config.timeout_ms) { Outcome::Timeout } else { outcome };
        let id = r as u64;
        let start = req.issued.as_ms();
        match req.path {
            Path::IntraDomain => self.samples.push(LatencySample::new(id, Phase::IntraDomain, start, at.as_ms())),
            Path::CrossDomain => {
                let shared = req.data_shared.ok_or_else(|| SimError::Invariant(format!("request {r} never reached its target")))?;
                let responded = req.responded.ok_or_else(|| SimError::Invariant(format!("request {r} has no response")))?;
                self.samples.push(LatencySample::new(id, Phase::DataSharing, start, shared.as_ms()));
                self.samples.push(LatencySample::new(id, Phase::FullPreauthorization, start, responded.as_ms()));
                if let Some(p) = req.presented {
                    self.samples.push(LatencySample::new(id, Phase::TokenVerification, p.as_ms(), at.as_ms()));
                }
            }
        }
        let scope = if req.path == Path::IntraDomain { "sim/intra_domain" } else { "sim/cross_domain" };
        *self.totals.entry(scope).or_default() += req.counters;
        if req.presented.is_some() {
            *self.totals.entry("sim/token_verification").or_default() += req.verify_counters;
        }
        let device = req.device;
        self.requests[r].outcome = Some((outcome, at));
        self.outcomes.add(outcome);
        self.last_completion = self.last_completion.max(at);

        if self.devices[device].remaining > 0 {
            self.queue.schedule(at, Event::RequestIssued { device })?;
        } else {
            let home = self.devices[device].issuing_home;
            while let Some(next) = self.pending[home].pop_front() {
                if self.devices[next].remaining > 0 {
                    self.queue.schedule(at, Event::RequestIssued { device: next })?;
                    break;
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<SimReport, SimError> {
        let total = self.plan.total_requests() as u64;
        if self.outcomes.total() != total {
            return Err(SimError::Invariant(format!("{} of {total} requests terminated", self.outcomes.total())));
        }
        let start = self.workload_start.unwrap_or(SimTime::ZERO);
        let window_s = self.last_completion.saturating_sub(start).as_ms() / 1000.0;
        let completed = self.outcomes.grant + self.outcomes.denial;
        let throughput = ThroughputRecord::new(self.topology.len(), self.devices.len(), completed, window_s);
        let requests = self
            .requests
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (outcome, done) = r.outcome.expect("all requests terminated");
                RequestSummary {
                    id: i as u64,
                    device: self.devices[r.device].id.clone(),
                    origin: self.topology.name(r.origin).to_string(),
                    target: self.topology.name(r.target).to_string(),
                    path: r.path,
                    outcome,
                    issued_ms: r.issued.as_ms(),
                    completed_ms: done.as_ms(),
                }
            })
            .collect();
        let counters = self.totals.iter().map(|(s, c)| CounterRow { scope: s.to_string(), counters: *c }).collect();
        let models = self.learners.iter().map(|l| (l.id.clone(), l.model().clone())).collect();
        Ok(SimReport {
            samples: self.samples,
            throughput,
            outcomes: self.outcomes,
            requests,
            counters,
            dfl: self.dfl,
            models,
            events: self.events,
            log_hash: hex::encode(self.hasher.finalize()),
            trace: self.trace.unwrap_or_default(),
            end_ms: self.queue.now().as_ms(),
        })
    }
}

fn branch_of(authenticated: bool, allow: bool) -> Branch {
    match (authenticated, allow) {
        (false, _) => Branch::DeniedAuthentication,
        (true, true) => Branch::Allowed,
        (true, false) => Branch::DeniedAfterEvaluation,
    }
}

fn register(
    cp: &mut ControlPlane,
    id: &str,
    rng: &mut ChaCha20Rng,
    totals: &mut BTreeMap<&'static str, OpCounters>,
) -> Result<Certificate, SimError> {
    let (cert, counts) = measure("registration", || {
        let keys = crypto::generate_keypair_with(rng);
        cp.am.register_device(keys.public.as_bytes(), id)
    });
    let cert = cert.map_err(|e| SimError::Invariant(e.to_string()))?;
    if counts != overhead::REGISTRATION {
        return Err(SimError::CounterMismatch { request: u64::MAX, expected: overhead::REGISTRATION, measured: counts });
    }
    *totals.entry("sim/registration").or_default() += counts;
    Ok(cert)
}
