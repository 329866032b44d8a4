use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

use ztmesh_core::config::ScenarioConfig;
use ztmesh_core::control_plane::{AccessLevel, AccessRequest, AuthorizationDecision, DecisionReason, TimeRange};
use ztmesh_core::crypto::{self, Certificate, KeyPair};
use ztmesh_core::dfl::{
    aggregate, compress_topk, decompress, decode_checkpoint, encode_checkpoint, learning_rate_round, model::softmax,
    update_alpha, Architecture, ModelParameters, RoundMessage, SparseLayer, SparseUpdate,
};
use ztmesh_core::privacy::{Ciphertext, WireMessage};
use ztmesh_core::protocol::{deserialize_request, issue_token, serialize_request, verify_token, OneTimeToken, PreauthResponse, TokenLedger};
use ztmesh_core::wire;

struct Keys {
    am: KeyPair,
    cert: Certificate,
}

fn keys() -> Keys {
    let am = crypto::generate_keypair(Some(1));
    let dev = crypto::generate_keypair(Some(2));
    let cert = Certificate::issue(&am.secret, "t", "dev", dev.public);
    Keys { am, cert }
}

const RESOURCES: [&str; 3] = ["a", "b", "c"];

#[derive(Debug, Clone)]
struct Presentation {
    token: usize,
    resource: usize,
    now: u64,
    intention_ok: bool,
}

fn presentation() -> impl Strategy<Value = Presentation> {
    (0..3usize, 0..3usize, 0..400u64, any::<bool>()).prop_map(|(token, resource, now, intention_ok)| Presentation {
        token,
        resource,
        now,
        intention_ok,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tokens_grant_at_most_once_within_scope_and_window(
        windows in prop::collection::vec((0..300u64, 0..100u64, prop::collection::btree_set(0..3usize, 0..=3)), 1..=3),
        steps in prop::collection::vec(presentation(), 1..8),
        seed in any::<u64>(),
    ) {
        let k = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut ledger = TokenLedger::default();
        let tokens: Vec<OneTimeToken> = windows
            .iter()
            .map(|(start, len, scope)| {
                let decision = AuthorizationDecision {
                    allow: true,
                    scope: scope.iter().map(|&i| RESOURCES[i].to_string()).collect(),
                    time_range: TimeRange { start_ms: *start, end_ms: start + len },
                    intention: "read".into(),
                    reason: DecisionReason::Granted,
                };
                issue_token(&k.am.secret, &mut ledger, "dev", &decision, &mut rng).unwrap()
            })
            .collect();
        let mut granted = BTreeSet::new();
        for s in steps {
            let token = &tokens[s.token % tokens.len()];
            let intention = if s.intention_ok { " read " } else { "write" };
            let req = AccessRequest::new(k.cert.clone(), "t", RESOURCES[s.resource], AccessLevel::Read, intention).unwrap();
            if verify_token(&mut ledger, &k.am.public, token, &req, s.now).is_ok() {
                prop_assert!(granted.insert(token.nonce));
                prop_assert!(token.scope.contains(RESOURCES[s.resource]));
                prop_assert!(token.time_range.contains(s.now));
                prop_assert!(s.intention_ok);
            }
        }
        prop_assert!(ledger.is_consistent());
        prop_assert!(ledger.used_count() <= ledger.issued_count());
    }

    #[test]
    fn token_bytes_round_trip(start in 0..u64::MAX / 2, len in 0..1_000_000u64, scope in prop::collection::btree_set("[a-z/]{1,12}", 0..4), intention in "[ -~]{1,40}") {
        let k = keys();
        let decision = AuthorizationDecision {
            allow: true,
            scope,
            time_range: TimeRange { start_ms: start, end_ms: start + len },
            intention,
            reason: DecisionReason::Granted,
        };
        let token = issue_token(&k.am.secret, &mut TokenLedger::default(), "dev", &decision, &mut ChaCha20Rng::seed_from_u64(start)).unwrap();
        prop_assert_eq!(OneTimeToken::from_bytes(&token.to_bytes()).unwrap(), token.clone());
        let resp = PreauthResponse::Token(token);
        prop_assert_eq!(PreauthResponse::from_wire(&resp.to_wire()).unwrap(), resp);
    }

    #[test]
    fn field_frames_round_trip(fields in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..64), 0..20)) {
        let bytes = wire::encode_fields(&fields).unwrap();
        let back: Vec<Vec<u8>> = wire::decode_fields(&bytes).unwrap().into_iter().map(<[u8]>::to_vec).collect();
        prop_assert_eq!(back, fields);
    }

    #[test]
    fn truncated_frames_never_decode(fields in prop::collection::vec(prop::collection::vec(any::<u8>(), 1..16), 1..6), cut in 1..16usize) {
        let bytes = wire::encode_fields(&fields).unwrap();
        let cut = cut.min(bytes.len());
        prop_assert!(wire::decode_fields(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn requests_round_trip(resource in "[a-z][a-z/]{0,20}", intention in "[a-z][ a-z]{0,30}", level in 0..3usize) {
        let k = keys();
        let level = [AccessLevel::Read, AccessLevel::Write, AccessLevel::Admin][level];
        let req = AccessRequest::new(k.cert, "target", resource, level, intention).unwrap();
        prop_assert_eq!(deserialize_request(&serialize_request(&req).unwrap()).unwrap(), req);
    }

    #[test]
    fn wire_messages_round_trip(f1 in 0.0..=1.0f64, p in prop::collection::vec(0.01..1.0f64, 1..6), entries in prop::collection::btree_map(0..64u32, -5.0..5.0f64, 0..10), blob in prop::collection::vec(any::<u8>(), 0..100)) {
        let layer = SparseLayer { len: 64, entries: entries.into_iter().collect() };
        let msg = RoundMessage { update: SparseUpdate { k_top: 10, layers: vec![layer] }, f1, class_distribution: p };
        for m in [WireMessage::RoundUpdate(msg), WireMessage::SealedRequest(Ciphertext(blob)), WireMessage::PreauthResponse(PreauthResponse::Denied(DecisionReason::Trust))] {
            let bytes = m.encode();
            prop_assert_eq!(wire::decode_envelope(&bytes).unwrap().0, m.kind());
            prop_assert_eq!(WireMessage::decode(&bytes).unwrap(), m);
        }
    }

    #[test]
    fn aggregation_ignores_order(seed in any::<u64>(), raw in prop::collection::vec(-3.0..3.0f64, 2..6), rotate in 0..5usize) {
        let arch = Architecture::new(vec![3, 4, 2], vec![ztmesh_core::dfl::Activation::Relu, ztmesh_core::dfl::Activation::Softmax]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let models: Vec<ModelParameters> = raw.iter().map(|_| ModelParameters::init(&arch, &mut rng)).collect();
        let w = softmax(&raw);
        let mut pairs: Vec<(f64, &ModelParameters)> = w.iter().copied().zip(&models).collect();
        let a = aggregate(&pairs).unwrap();
        let shift = rotate % pairs.len();
        pairs.rotate_left(shift);
        let b = aggregate(&pairs).unwrap();
        for (x, y) in a.flat().iter().zip(b.flat()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn topk_keeps_exactly_k_and_full_k_is_lossless(seed in any::<u64>(), k in 1..400usize) {
        let arch = Architecture::default_mlp(4);
        let m = ModelParameters::init(&arch, &mut ChaCha8Rng::seed_from_u64(seed));
        let sparse = compress_topk(&m, k);
        for (layer, s) in m.layers.iter().zip(&sparse.layers) {
            prop_assert_eq!(s.entries.len(), k.min(layer.len()));
            prop_assert!(s.entries.windows(2).all(|w| w[0].0 < w[1].0));
        }
        let full = compress_topk(&m, arch.param_count());
        prop_assert_eq!(decompress(&full, &arch).unwrap(), m);
    }

    #[test]
    fn learning_rate_stays_within_neighbour_rates(eta0 in 0.001..0.1f64, n in prop::collection::vec((0.0..1.5f64, 0.0..0.01f64), 1..6)) {
        let eta = learning_rate_round(eta0, &n);
        let mean = n.iter().map(|v| v.0).sum::<f64>() / n.len() as f64;
        let rates: Vec<f64> = n.iter().map(|&(w, a)| eta0 + a * (w - mean)).collect();
        let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min).max(eta0 / 10.0);
        let hi = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max).min(eta0 * 10.0);
        prop_assert!(eta >= lo - 1e-15 && eta <= hi + 1e-15);
    }

    #[test]
    fn alpha_never_leaves_its_bounds(steps in prop::collection::vec((0.0..2.0f64, 0.0..1.0f64, 0.0..1.0f64), 1..50), beta in 0.001..1.0f64) {
        let mut alpha = 0.05;
        for (waf, g, gbar) in steps {
            alpha = update_alpha(alpha, waf, g, gbar, beta, 1.0);
            prop_assert!((0.0..=1.0).contains(&alpha));
        }
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>()) {
        let m = ModelParameters::init(&Architecture::default_mlp(3), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(decode_checkpoint(&encode_checkpoint(&m)).unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn configs_survive_reserialisation(seed in any::<u64>(), devices in 1..100usize, fraction in 0.0..=1.0f64, threshold in 0.0..=1.0f64) {
        let text = format!(
            r#"{{"seed": {seed}, "workload": {{"device_count": {devices}, "cross_domain_fraction": {fraction}}}, "zta": {{"policy": {{"threshold": {threshold}}}}}}}"#
        );
        let cfg = ScenarioConfig::parse(&text).unwrap();
        let again = ScenarioConfig::parse(&cfg.to_json()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_json(), cfg.to_json());
    }
}
