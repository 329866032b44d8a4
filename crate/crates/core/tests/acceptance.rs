//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

use ztmesh_core::config::ScenarioConfig;
use ztmesh_core::conformance::measure_step_counts;
use ztmesh_core::control_plane::{AccessLevel, AccessRequest, AuthorizationDecision, DecisionReason, TimeRange};
use ztmesh_core::crypto::{self, Certificate};
use ztmesh_core::dfl::{
    aggregate, compress_topk, kl_divergence, model::softmax, Architecture, Dataset, ModelParameters, Weighting,
};
use ztmesh_core::metrics::{OpCounters, Phase};
use ztmesh_core::privacy::{WireMessage, WireSafe};
use ztmesh_core::protocol::{issue_token, verify_token, TokenLedger};
use ztmesh_core::scenario;

type Check = Result<String, String>;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn load(name: &str) -> ScenarioConfig {
    let path = scenario_path(name);
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn counts(exp: u64, h: u64, sig: u64, i: u64, cp: u64, m: u64, cs: u64) -> OpCounters {
    OpCounters { exp, h, sig, i, cp, m, cs }
}

fn step_counts() -> Check {
    let rows = measure_step_counts(1).map_err(|e| e.to_string())?;
    let by_step: BTreeMap<&str, OpCounters> = rows.iter().map(|r| (r.step, r.measured)).collect();
    let intra = counts(3, 2, 1, 2, 1, 0, 0);
    let cross = counts(3, 3, 2, 2, 1, 4, 2);
    ensure(by_step.get("intra_domain_total") == Some(&intra), format!("intra {:?}", by_step.get("intra_domain_total")))?;
    ensure(by_step.get("cross_domain_total") == Some(&cross), format!("cross {:?}", by_step.get("cross_domain_total")))?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.step).collect();
    ensure(failed.is_empty(), format!("step rows differ: {failed:?}"))?;
    Ok(format!("intra {intra}, cross {cross}"))
}

const RESOURCES: [&str; 4] = ["a", "b", "c", "d"];
const INTENTIONS: [&str; 2] = ["read telemetry", "write config"];

fn token_lifecycle() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let am = crypto::generate_keypair_with(&mut rng);
    let other = crypto::generate_keypair_with(&mut rng);
    let dev = crypto::generate_keypair_with(&mut rng);
    let cert = Certificate::issue(&am.secret, "t", "dev", dev.public);
    let (mut grants, mut presentations) = (0u64, 0u64);
    for _ in 0..10_000 {
        let mut ledger = TokenLedger::default();
        let mut tokens = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let scope: BTreeSet<String> =
                RESOURCES.iter().filter(|_| rng.gen_bool(0.5)).map(|s| s.to_string()).collect();
            let start = rng.gen_range(0..1000u64);
            let decision = AuthorizationDecision {
                allow: true,
                scope,
                time_range: TimeRange { start_ms: start, end_ms: start + rng.gen_range(0..500) },
                intention: INTENTIONS[rng.gen_range(0..2)].to_string(),
                reason: DecisionReason::Granted,
            };
            let key = if rng.gen_bool(0.1) { &other.secret } else { &am.secret };
            tokens.push(issue_token(key, &mut ledger, "dev", &decision, &mut rng).map_err(|e| e.to_string())?);
        }
        let mut granted: BTreeSet<[u8; 16]> = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=4) {
            let mut token = tokens[rng.gen_range(0..tokens.len())].clone();
            if rng.gen_bool(0.1) {
                token.time_range.end_ms += 1000;
            }
            let resource = RESOURCES[rng.gen_range(0..RESOURCES.len())];
            let intention = INTENTIONS[rng.gen_range(0..2)];
            let request = AccessRequest::new(cert.clone(), "t", resource, AccessLevel::Read, intention)
                .map_err(|e| e.to_string())?;
            let now = rng.gen_range(0..1600u64);
            let original = tokens.iter().find(|t| t.nonce == token.nonce).expect("drawn from tokens");
            presentations += 1;
            if verify_token(&mut ledger, &am.public, &token, &request, now).is_ok() {
                grants += 1;
                ensure(granted.insert(token.nonce), "second grant for one nonce")?;
                ensure(original.scope.contains(resource), "out-of-scope grant")?;
                ensure(original.time_range.contains(now), "expired grant")?;
                ensure(original == &token, "tampered token granted")?;
            }
        }
        ensure(ledger.is_consistent(), "used nonces not a subset of issued")?;
    }
    Ok(format!("10000 sequences, {presentations} presentations, {grants} grants"))
}

fn dfl_math() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let arch = Architecture::default_mlp(4);
    // TopK against a full sort.
    for _ in 0..50 {
        let m = ModelParameters::init(&arch, &mut rng);
        let k = rng.gen_range(1..=300);
        let sparse = compress_topk(&m, k);
        for (layer, s) in m.layers.iter().zip(&sparse.layers) {
            ensure(s.entries.len() == k.min(layer.len()), "topk sparsity")?;
            let mut mags: Vec<f64> = layer.iter().map(|v| v.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            let floor = mags[k.min(layer.len()) - 1];
            ensure(s.entries.iter().all(|(i, v)| *v == layer[*i as usize] && v.abs() >= floor), "topk kept a small entry")?;
        }
    }
    // Softmax and KL.
    for _ in 0..1000 {
        let z: Vec<f64> = (0..8).map(|_| rng.gen_range(-30.0..30.0)).collect();
        ensure((softmax(&z).iter().sum::<f64>() - 1.0).abs() <= 1e-9, "softmax sum")?;
        let p = softmax(&(0..6).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>());
        let q = softmax(&(0..6).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>());
        ensure(kl_divergence(&p, &p).map_err(|e| e.to_string())?.abs() <= 1e-12, "kl(p,p)")?;
        ensure(kl_divergence(&p, &q).map_err(|e| e.to_string())? >= -1e-12, "kl negative")?;
    }
    // Aggregation against an explicit loop.
    for _ in 0..20 {
        let models: Vec<ModelParameters> = (0..4).map(|_| ModelParameters::init(&arch, &mut rng)).collect();
        let w = softmax(&(0..4).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>());
        let pairs: Vec<(f64, &ModelParameters)> = w.iter().copied().zip(&models).collect();
        let agg = aggregate(&pairs).map_err(|e| e.to_string())?;
        for (l, layer) in agg.layers.iter().enumerate() {
            for (j, v) in layer.iter().enumerate() {
                let mut brute = 0.0;
                for (wi, m) in w.iter().zip(&models) {
                    brute += wi * m.layers[l][j];
                }
                ensure((v - brute).abs() <= 1e-12, "aggregate differs from weighted mean")?;
            }
        }
    }
    // Analytic gradient against central differences.
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut r = ChaCha8Rng::seed_from_u64(100 + seed);
        let m = ModelParameters::init(&arch, &mut r);
        let mut batch = Dataset::default();
        for _ in 0..8 {
            batch.push((0..arch.input_dim()).map(|_| r.gen_range(-1.0..1.0)).collect(), r.gen_range(0..arch.classes()));
        }
        let grad = m.gradient(&batch).map_err(|e| e.to_string())?;
        let h = 1e-6;
        for _ in 0..40 {
            let l = r.gen_range(0..m.layers.len());
            let j = r.gen_range(0..m.layers[l].len());
            let (mut plus, mut minus) = (m.clone(), m.clone());
            plus.layers[l][j] += h;
            minus.layers[l][j] -= h;
            let numeric = (plus.loss(&batch) - minus.loss(&batch)) / (2.0 * h);
            let analytic = grad.layers[l][j];
            let denom = analytic.abs().max(numeric.abs());
            if denom > 1e-7 {
                worst = worst.max((analytic - numeric).abs() / denom);
            }
        }
    }
    ensure(worst < 1e-4, format!("gradient relative error {worst:e}"))?;
    Ok(format!("worst gradient relative error {worst:.2e}"))
}

fn final_and_first(rows: &[ztmesh_core::metrics::csv_io::DflRow]) -> BTreeMap<String, (f64, f64)> {
    let last = rows.iter().map(|r| r.round).max().unwrap_or(0);
    let mut out: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for r in rows {
        let e = out.entry(r.domain.clone()).or_default();
        if r.round == 1 {
            e.0 = r.f1;
        }
        if r.round == last {
            e.1 = r.f1;
        }
    }
    out
}

fn dfl_convergence() -> Check {
    let cfg = load("dfl_noniid.json");
    let dynamic = scenario::train(&cfg, None).map_err(|e| e.to_string())?;
    let mut ablation = cfg.clone();
    ablation.dfl.hyperparams.weighting = Weighting::Uniform;
    let uniform = scenario::train(&ablation, None).map_err(|e| e.to_string())?;
    let d = final_and_first(&dynamic.dfl);
    let u = final_and_first(&uniform.dfl);
    ensure(d.len() == 3, "expected three domains")?;
    for (domain, (first, last)) in &d {
        ensure(last - first >= 0.05, format!("{domain}: F1 {first:.3} -> {last:.3}"))?;
    }
    let mean = |m: &BTreeMap<String, (f64, f64)>| m.values().map(|v| v.1).sum::<f64>() / m.len() as f64;
    let (md, mu) = (mean(&d), mean(&u));
    ensure(md >= mu - 0.02, format!("dynamic {md:.3} < uniform {mu:.3} - 0.02"))?;
    let detail: Vec<String> = d.iter().map(|(k, (a, b))| format!("{k} {a:.3}->{b:.3}")).collect();
    Ok(format!("{}; mean final dynamic {md:.3}, uniform {mu:.3}", detail.join(", ")))
}

fn latency_trends() -> Check {
    let out = scenario::simulate(&load("fig5.json"), false).map_err(|e| e.to_string())?;
    let mut sums: BTreeMap<(usize, usize, Phase), (f64, usize)> = BTreeMap::new();
    for r in &out.latency {
        let e = sums.entry((r.n, r.q, r.phase)).or_default();
        e.0 += r.ms;
        e.1 += 1;
    }
    let mean = |n, q, phase| sums.get(&(n, q, phase)).map(|(s, c)| s / *c as f64);
    let (ns, qs) = ([2, 4, 6, 8], [1, 4, 16, 32]);
    let mut grid = Vec::new();
    for n in ns {
        for q in qs {
            let full = mean(n, q, Phase::FullPreauthorization).ok_or(format!("no samples for n={n} q={q}"))?;
            let share = mean(n, q, Phase::DataSharing).ok_or(format!("no data-sharing samples for n={n} q={q}"))?;
            ensure(share < full, format!("n={n} q={q}: data sharing {share:.2} >= full {full:.2}"))?;
            grid.push(((n, q), full));
        }
    }
    let at: BTreeMap<(usize, usize), f64> = grid.into_iter().collect();
    for n in ns {
        for w in qs.windows(2) {
            ensure(at[&(n, w[1])] >= at[&(n, w[0])], format!("n={n}: q {} -> {} decreases", w[0], w[1]))?;
        }
    }
    for q in qs {
        for w in ns.windows(2) {
            ensure(at[&(w[1], q)] >= at[&(w[0], q)], format!("q={q}: n {} -> {} decreases", w[0], w[1]))?;
        }
    }
    Ok(format!("n=2,q=1 {:.1} ms .. n=8,q=32 {:.1} ms", at[&(2, 1)], at[&(8, 32)]))
}

fn throughput_trends() -> Check {
    let out = scenario::simulate(&load("fig6.json"), false).map_err(|e| e.to_string())?;
    let curves = ztmesh_core::metrics::throughput_curve(&out.throughput).map_err(|e| e.to_string())?;
    let rate = |n: usize, d: usize| curves.get(&n).and_then(|c| c.iter().find(|p| p.0 == d)).map(|p| p.1);
    for (&n, curve) in &curves {
        let at20 = rate(n, 20).ok_or(format!("n={n}: no 20-device point"))?;
        let gain = at20 - rate(n, 2).ok_or(format!("n={n}: no 2-device point"))?;
        ensure(gain > 0.0, format!("n={n}: no gain from 2 to 20 devices"))?;
        for w in curve.windows(2) {
            let ((d0, r0), (d1, r1)) = (w[0], w[1]);
            if d1 <= 20 {
                ensure(r1 >= r0, format!("n={n}: {d0} -> {d1} devices decreases"))?;
            } else {
                ensure((r1 - r0).abs() < 0.1 * gain, format!("n={n}: {d0} -> {d1} devices moves {:.1} r/s", r1 - r0))?;
            }
        }
    }
    let (t8, t2) = (rate(8, 100).ok_or("no n=8 point")?, rate(2, 100).ok_or("no n=2 point")?);
    ensure(t8 > t2, format!("8 domains {t8:.1} <= 2 domains {t2:.1}"))?;
    Ok(format!("100 devices: 2 domains {t2:.1} r/s, 8 domains {t8:.1} r/s"))
}

fn determinism() -> Check {
    let cfg = load("tableI.json");
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for d in &dirs {
        scenario::simulate(&cfg, false).map_err(|e| e.to_string())?.write(d.path(), false).map_err(|e| e.to_string())?;
    }
    let files = [scenario::LATENCY_CSV, scenario::THROUGHPUT_CSV, scenario::COUNTERS_CSV, scenario::DFL_CSV];
    let mut bytes = 0;
    for f in files {
        let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(a == b, format!("{f} differs between runs"))?;
        bytes += a.len();
    }
    Ok(format!("{} files, {bytes} bytes identical", files.len()))
}

fn privacy_surface() -> Check {
    let round = ztmesh_core::dfl::RoundMessage::schema();
    ensure(round.parts() == ["update", "f1", "class_distribution"], format!("round message parts {:?}", round.parts()))?;
    let wire = WireMessage::schema();
    let reachable = wire.reachable();
    ensure(!reachable.contains("DeviceContextRecord"), "DeviceContextRecord reachable")?;
    ensure(wire.parts() == ["SealedRequest", "RoundUpdate", "PreauthResponse"], format!("wire variants {:?}", wire.parts()))?;
    let ztmesh_core::privacy::Schema::Variants(_, variants) = &wire else {
        return Err("wire message is not a variant set".into());
    };
    ensure(variants[0].1.name() == "ciphertext", "sealed request is not opaque")?;
    Ok(format!("{} reachable types", reachable.len()))
}

type Criterion = (&'static str, Duration, fn() -> Check);

fn main() {
    let criteria: [Criterion; 8] = [
        ("operation_count_conformance", Duration::from_secs(1), step_counts),
        ("token_lifecycle", Duration::from_secs(30), token_lifecycle),
        ("dfl_math_oracles", Duration::from_secs(60), dfl_math),
        ("dfl_convergence", Duration::from_secs(300), dfl_convergence),
        ("latency_trends", Duration::from_secs(180), latency_trends),
        ("throughput_trends", Duration::from_secs(180), throughput_trends),
        ("determinism", Duration::from_secs(120), determinism),
        ("privacy_surface", Duration::from_secs(5), privacy_surface),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        let result = result.and_then(|d| {
            if elapsed <= budget {
                Ok(d)
            } else {
                Err(format!("{d}; took {elapsed:.1?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} ({elapsed:.2?})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
