//! Expected operation counts for each step of the request pipelines.

use super::counters::OpCounters;

const fn ops(exp: u64, h: u64, sig: u64, i: u64, cp: u64, m: u64, cs: u64) -> OpCounters {
    OpCounters { exp, h, sig, i, cp, m, cs }
}

/// Device key generation plus certificate issuance: `2Exp+H+Sig`.
pub const REGISTRATION: OpCounters = ops(2, 1, 1, 0, 0, 0, 0);
/// Certificate verification: `Exp+H`.
pub const AUTHENTICATION: OpCounters = ops(1, 1, 0, 0, 0, 0, 0);
/// Context prediction, trust inference and one policy decision: `2I+CP`.
pub const AUTHORIZATION: OpCounters = ops(0, 0, 0, 2, 1, 0, 0);
/// Channel establishment plus seal and open: `4M+2CS`.
pub const CROSS_DOMAIN_TRANSMISSION: OpCounters = ops(0, 0, 0, 0, 0, 4, 2);
/// Token signing on top of authorization: `H+Sig`.
pub const TOKEN_ISSUANCE: OpCounters = ops(0, 1, 1, 0, 0, 0, 0);
/// Token presentation (signature check only).
pub const TOKEN_VERIFICATION: OpCounters = ops(1, 1, 0, 0, 0, 0, 0);

/// `3Exp+2H+Sig+2I+CP`
pub const INTRA_DOMAIN_TOTAL: OpCounters = ops(3, 2, 1, 2, 1, 0, 0);
/// `3Exp+3H+2Sig+4M+2CS+2I+CP`
pub const CROSS_DOMAIN_TOTAL: OpCounters = ops(3, 3, 2, 2, 1, 4, 2);

/// Expected counts for a conformance step or total, by row name.
pub fn expected_step(step: &str) -> Option<OpCounters> {
    Some(match step {
        "registration" => REGISTRATION,
        "authentication" => AUTHENTICATION,
        "authorization" => AUTHORIZATION,
        "cross_domain_transmission" => CROSS_DOMAIN_TRANSMISSION,
        "token_issuance" => TOKEN_ISSUANCE,
        "token_verification" => TOKEN_VERIFICATION,
        "intra_domain_total" => INTRA_DOMAIN_TOTAL,
        "cross_domain_total" => CROSS_DOMAIN_TOTAL,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Path {
    IntraDomain,
    CrossDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Allowed,
    /// Certificate check failed; the trust engine is never consulted.
    DeniedAuthentication,
    /// Denied by trust score or resource policy after full evaluation.
    DeniedAfterEvaluation,
}

/// Counts one request should charge, excluding the device's one-off
/// registration.
pub fn expected_request(path: Path, branch: Branch) -> OpCounters {
    let evaluation = match branch {
        Branch::DeniedAuthentication => AUTHENTICATION + OpCounters { cp: 1, ..OpCounters::ZERO },
        _ => AUTHENTICATION + AUTHORIZATION,
    };
    match (path, branch) {
        (Path::IntraDomain, _) => evaluation,
        (Path::CrossDomain, Branch::Allowed) => CROSS_DOMAIN_TRANSMISSION + evaluation + TOKEN_ISSUANCE,
        (Path::CrossDomain, _) => CROSS_DOMAIN_TRANSMISSION + evaluation,
    }
}
