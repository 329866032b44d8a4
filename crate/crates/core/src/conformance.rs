//! Replays one intra-domain request and one cross-domain pre-authorization
//! under the operation counters and compares each step with its expected
//! count.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::control_plane::{AccessLevel, AccessRequest, ControlPlane, DeviceContextRecord, ZtaConfig};
use crate::crypto::{self, Certificate};
use crate::dfl::{featurize_device, Architecture, ModelParameters};
use crate::metrics::overhead::{self, Branch, Path};
use crate::metrics::{measure, OpCounters};
use crate::protocol::{self, Channel, ProtocolError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConformanceRow {
    pub step: &'static str,
    pub expected: OpCounters,
    pub measured: OpCounters,
}

impl ConformanceRow {
    pub fn passed(&self) -> bool {
        self.expected == self.measured
    }
}

const NOW_MS: u64 = 60_000;

struct Fixture {
    home: ControlPlane,
    target: ControlPlane,
    rng: ChaCha20Rng,
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let config = ZtaConfig::default();
    let arch = Architecture::default_mlp(4);
    let model = ModelParameters::init(&arch, &mut rng);
    let mut home = ControlPlane::new("home", crypto::generate_keypair_with(&mut rng), &config, arch.input_dim(), arch.classes());
    let mut target = ControlPlane::new("target", crypto::generate_keypair_with(&mut rng), &config, arch.input_dim(), arch.classes());
    target.am.trust_issuer("home", home.am.public_key());
    home.model = Some(model.clone());
    target.model = Some(model);
    Fixture { home, target, rng }
}

/// First device id at or after `device-{from}` whose predicted context is
/// not anomalous, so its request takes the allowed branch.
fn benign_device(cp: &ControlPlane, from: u64) -> (String, u64) {
    let model = cp.model.as_ref().expect("fixture has a model");
    let bad = &cp.te.rules.anomalous_classes;
    (from..)
        .find(|k| !bad.contains(&model.predict(&featurize_device(&format!("device-{k}"), model.arch.input_dim()))))
        .map(|k| (format!("device-{k}"), k))
        .expect("some id is benign")
}

fn register(cp: &mut ControlPlane, id: &str, rng: &mut ChaCha20Rng) -> Result<Certificate, ProtocolError> {
    let keys = crypto::generate_keypair_with(rng);
    cp.am.register_device(keys.public.as_bytes(), id).map_err(|e| match e {
        crate::control_plane::AmError::Crypto(c) => ProtocolError::Crypto(c),
        other => ProtocolError::Inconsistent(other.to_string()),
    })
}

fn inconsistent(what: &str) -> ProtocolError {
    ProtocolError::Inconsistent(what.to_string())
}

/// Step rows followed by the two end-to-end totals. Every step is measured
/// on the allowed branch.
pub fn measure_step_counts(seed: u64) -> Result<Vec<ConformanceRow>, ProtocolError> {
    let Fixture { mut home, mut target, mut rng } = fixture(seed);
    let mut rows = Vec::new();
    let mut row = |step, expected, measured| rows.push(ConformanceRow { step, expected, measured });

    // Step rows, on a device registered with the home domain and requesting
    // a resource in the target domain.
    let (id, k) = benign_device(&home, 0);
    let (cert, reg) = measure("registration", || register(&mut home, &id, &mut rng));
    let cert = cert?;
    row("registration", overhead::REGISTRATION, reg);
    let request = AccessRequest::new(cert, "target", "sensor/temperature", AccessLevel::Read, "read temperature")?;

    let (channel, mut tx) = measure("channel", || Channel::open(&mut rng));
    let channel = channel?;
    let (sealed, seal) = measure("seal", || protocol::seal_request(&channel, &request, &mut rng));
    let sealed = sealed?;
    let (received, open) = measure("open", || protocol::open_sealed_request(&channel, &sealed));
    let received = received?;
    tx += seal + open;

    let (authenticated, auth) = measure("authentication", || target.am.authenticate(&received));
    if !authenticated {
        return Err(inconsistent("fixture request failed authentication"));
    }
    row("authentication", overhead::AUTHENTICATION, auth);
    let (evaluation, authz) = measure("authorization", || target.authorize(&received, NOW_MS));
    if !evaluation.decision.allow {
        return Err(inconsistent("fixture request was denied"));
    }
    row("authorization", overhead::AUTHORIZATION, authz);
    row("cross_domain_transmission", overhead::CROSS_DOMAIN_TRANSMISSION, tx);
    let (response, issue) = measure("token_issuance", || protocol::respond(&mut target, &received, &evaluation, &mut rng));
    let token = response?.token().cloned().ok_or_else(|| inconsistent("allowed request produced no token"))?;
    row("token_issuance", overhead::TOKEN_ISSUANCE, issue);
    let (grant, verify) = measure("token_verification", || protocol::redeem(&mut target, &token, &request, NOW_MS + 1));
    grant.map_err(|d| inconsistent(&format!("fresh token refused: {d}")))?;
    row("token_verification", overhead::TOKEN_VERIFICATION, verify);

    // End-to-end totals, each with a fresh device.
    let (local, k) = benign_device(&home, k + 1);
    let (evaluation, intra) = measure("intra_domain_total", || -> Result<_, ProtocolError> {
        let cert = register(&mut home, &local, &mut rng)?;
        let model = home.model.as_ref().expect("fixture has a model");
        let features = featurize_device(&local, model.arch.input_dim());
        home.cam
            .cam_ingest(DeviceContextRecord {
                device_id: local.clone(),
                context_class: model.predict(&features),
                feature_vector: features,
                timestamp_ms: NOW_MS,
            })
            .map_err(|e| inconsistent(&e.to_string()))?;
        let request = AccessRequest::new(cert, "home", "sensor/temperature", AccessLevel::Read, "read temperature")?;
        Ok(home.evaluate(&request, NOW_MS))
    });
    if !evaluation?.decision.allow {
        return Err(inconsistent("intra-domain fixture request was denied"));
    }
    row("intra_domain_total", overhead::INTRA_DOMAIN_TOTAL, intra);

    let (roaming, _) = benign_device(&home, k + 1);
    let (outcome, cross) = measure("cross_domain_total", || -> Result<_, ProtocolError> {
        let cert = register(&mut home, &roaming, &mut rng)?;
        let request = AccessRequest::new(cert, "target", "sensor/temperature", AccessLevel::Read, "read temperature")?;
        protocol::preauthorize(&mut target, &request, NOW_MS, &mut rng)
    });
    if outcome?.response.token().is_none() {
        return Err(inconsistent("cross-domain fixture request was denied"));
    }
    row("cross_domain_total", overhead::CROSS_DOMAIN_TOTAL, cross);
    Ok(rows)
}

/// Counts charged by one request of each kind and branch, registration
/// excluded. Pairs of (path, branch, expected, measured).
pub fn measure_branches(seed: u64) -> Result<Vec<(Path, Branch, OpCounters, OpCounters)>, ProtocolError> {
    let Fixture { mut home, mut target, mut rng } = fixture(seed);
    let (id, _) = benign_device(&home, 0);
    let cert = register(&mut home, &id, &mut rng)?;
    let forged = {
        let rogue = crypto::generate_keypair_with(&mut rng);
        Certificate::issue(&rogue.secret, "home", &id, cert.device_public_key)
    };
    let mut out = Vec::new();
    for path in [Path::IntraDomain, Path::CrossDomain] {
        let domain = if path == Path::IntraDomain { "home" } else { "target" };
        let cases = [
            (Branch::Allowed, cert.clone(), AccessLevel::Read),
            (Branch::DeniedAuthentication, forged.clone(), AccessLevel::Read),
            (Branch::DeniedAfterEvaluation, cert.clone(), AccessLevel::Admin),
        ];
        for (branch, c, level) in cases {
            let request = AccessRequest::new(c, domain, "sensor/temperature", level, "read temperature")?;
            let (result, counts) = measure("branch", || -> Result<bool, ProtocolError> {
                Ok(match path {
                    Path::IntraDomain => home.evaluate(&request, NOW_MS).decision.allow,
                    Path::CrossDomain => protocol::preauthorize(&mut target, &request, NOW_MS, &mut rng)?.response.token().is_some(),
                })
            });
            if result? != (branch == Branch::Allowed) {
                return Err(inconsistent("branch fixture took the wrong branch"));
            }
            out.push((path, branch, overhead::expected_request(path, branch), counts));
        }
    }
    Ok(out)
}
