//! Operation counters for the computation-overhead taxonomy.
//!
//! Every primitive charges its unit at the call site into a thread-local
//! accumulator. [`CounterScope`] snapshots the accumulator so a caller can
//! read exactly what a block of work charged:
//!
//! | unit | charged by |
//! |------|------------|
//! | `Exp` | identity key generation, public-key validation, signature verification |
//! | `H`   | message digest ahead of signing or verifying |
//! | `Sig` | one private-key signing operation |
//! | `I`   | one forward pass of the context model |
//! | `CP`  | one policy-engine decision |
//! | `M`   | channel key generation and ECDH scalar multiplication |
//! | `CS`  | one symmetric encryption or decryption |

use std::cell::{Cell, RefCell};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One countable operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Exp,
    Hash,
    Sig,
    Inference,
    Policy,
    ScalarMul,
    Symmetric,
}

/// Component-wise operation totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpCounters {
    pub exp: u64,
    pub h: u64,
    pub sig: u64,
    pub i: u64,
    pub cp: u64,
    pub m: u64,
    pub cs: u64,
}

impl OpCounters {
    pub const ZERO: OpCounters = OpCounters { exp: 0, h: 0, sig: 0, i: 0, cp: 0, m: 0, cs: 0 };

    /// Column order used by `counters.csv`.
    pub const COLUMNS: [&'static str; 7] = ["exp", "h", "sig", "i", "cp", "m", "cs"];

    pub fn of(op: Op) -> Self {
        let mut c = Self::ZERO;
        c.charge(op, 1);
        c
    }

    pub fn charge(&mut self, op: Op, n: u64) {
        let slot = match op {
            Op::Exp => &mut self.exp,
            Op::Hash => &mut self.h,
            Op::Sig => &mut self.sig,
            Op::Inference => &mut self.i,
            Op::Policy => &mut self.cp,
            Op::ScalarMul => &mut self.m,
            Op::Symmetric => &mut self.cs,
        };
        *slot += n;
    }

    pub fn as_array(&self) -> [u64; 7] {
        [self.exp, self.h, self.sig, self.i, self.cp, self.m, self.cs]
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    /// `true` when every component of `self` is at least the matching one in `other`.
    pub fn dominates(&self, other: &OpCounters) -> bool {
        self.as_array().iter().zip(other.as_array()).all(|(a, b)| *a >= b)
    }
}

impl Add for OpCounters {
    type Output = OpCounters;
    fn add(self, rhs: OpCounters) -> OpCounters {
        OpCounters {
            exp: self.exp + rhs.exp,
            h: self.h + rhs.h,
            sig: self.sig + rhs.sig,
            i: self.i + rhs.i,
            cp: self.cp + rhs.cp,
            m: self.m + rhs.m,
            cs: self.cs + rhs.cs,
        }
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: OpCounters) {
        *self = *self + rhs;
    }
}

impl Sub for OpCounters {
    type Output = OpCounters;
    /// Saturating component-wise difference; counters never go backwards so
    /// `later - earlier` is exact.
    fn sub(self, rhs: OpCounters) -> OpCounters {
        OpCounters {
            exp: self.exp.saturating_sub(rhs.exp),
            h: self.h.saturating_sub(rhs.h),
            sig: self.sig.saturating_sub(rhs.sig),
            i: self.i.saturating_sub(rhs.i),
            cp: self.cp.saturating_sub(rhs.cp),
            m: self.m.saturating_sub(rhs.m),
            cs: self.cs.saturating_sub(rhs.cs),
        }
    }
}

impl fmt::Display for OpCounters {
    /// Renders in the `3Exp+2H+Sig` notation, omitting zero terms.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = [
            (self.exp, "Exp"),
            (self.h, "H"),
            (self.sig, "Sig"),
            (self.m, "M"),
            (self.cs, "CS"),
            (self.i, "I"),
            (self.cp, "CP"),
        ];
        let mut first = true;
        for (n, name) in terms {
            if n == 0 {
                continue;
            }
            if !first {
                f.write_str("+")?;
            }
            first = false;
            if n == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{n}{name}")?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CounterError {
    #[error("scope `{closing}` closed while `{innermost}` is still open")]
    UnbalancedScope { closing: String, innermost: String },
}

thread_local! {
    static TOTALS: Cell<OpCounters> = const { Cell::new(OpCounters::ZERO) };
    static OPEN: RefCell<Vec<(u64, String)>> = const { RefCell::new(Vec::new()) };
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

/// Charge one unit of `op` to the current thread.
pub fn charge(op: Op) {
    charge_n(op, 1);
}

pub fn charge_n(op: Op, n: u64) {
    TOTALS.with(|t| {
        let mut c = t.get();
        c.charge(op, n);
        t.set(c);
    });
}

/// Running totals for this thread since it started.
pub fn snapshot() -> OpCounters {
    TOTALS.with(Cell::get)
}

/// A labelled window over the thread's counters. Scopes nest; they must be
/// closed innermost first.
#[derive(Debug)]
pub struct CounterScope {
    id: u64,
    label: String,
    start: OpCounters,
}

impl CounterScope {
    pub fn open(label: impl Into<String>) -> Self {
        let label = label.into();
        let id = NEXT_ID.with(|n| {
            let id = n.get();
            n.set(id + 1);
            id
        });
        OPEN.with(|s| s.borrow_mut().push((id, label.clone())));
        CounterScope { id, label, start: snapshot() }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Counts accrued since the scope opened, without closing it.
    pub fn peek(&self) -> OpCounters {
        snapshot() - self.start
    }

    /// Close the scope and return what it accrued.
    pub fn close(self) -> Result<OpCounters, CounterError> {
        let innermost = OPEN.with(|s| s.borrow().last().cloned());
        match innermost {
            Some((id, _)) if id == self.id => Ok(self.peek()),
            Some((_, label)) => Err(CounterError::UnbalancedScope {
                closing: self.label.clone(),
                innermost: label,
            }),
            None => Err(CounterError::UnbalancedScope {
                closing: self.label.clone(),
                innermost: String::new(),
            }),
        }
    }
}

impl Drop for CounterScope {
    fn drop(&mut self) {
        OPEN.with(|s| {
            let mut s = s.borrow_mut();
            if let Some(pos) = s.iter().rposition(|(id, _)| *id == self.id) {
                s.remove(pos);
            }
        });
    }
}

/// Run `f` inside a fresh scope and return its result with the counts it charged.
pub fn measure<R>(label: &str, f: impl FnOnce() -> R) -> (R, OpCounters) {
    let scope = CounterScope::open(label);
    let out = f();
    let delta = scope.peek();
    drop(scope);
    (out, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scope_is_zero() {
        let s = CounterScope::open("empty");
        assert_eq!(s.close().unwrap(), OpCounters::ZERO);
    }

    #[test]
    fn nested_scopes_see_only_their_own_window() {
        let outer = CounterScope::open("outer");
        charge(Op::Exp);
        let inner = CounterScope::open("inner");
        charge(Op::Hash);
        charge(Op::Hash);
        let inner_delta = inner.close().unwrap();
        charge(Op::Sig);
        let outer_delta = outer.close().unwrap();
        assert_eq!(inner_delta, OpCounters { h: 2, ..OpCounters::ZERO });
        assert_eq!(outer_delta, OpCounters { exp: 1, h: 2, sig: 1, ..OpCounters::ZERO });
    }

    #[test]
    fn closing_outer_first_is_unbalanced() {
        let outer = CounterScope::open("outer");
        let _inner = CounterScope::open("inner");
        let err = outer.close().unwrap_err();
        assert_eq!(
            err,
            CounterError::UnbalancedScope { closing: "outer".into(), innermost: "inner".into() }
        );
    }

    #[test]
    fn dropped_scope_unwinds() {
        let outer = CounterScope::open("outer");
        {
            let _abandoned = CounterScope::open("abandoned");
        }
        assert!(outer.close().is_ok());
    }

    #[test]
    fn display_uses_overhead_notation() {
        let c = OpCounters { exp: 3, h: 2, sig: 1, i: 2, cp: 1, ..OpCounters::ZERO };
        assert_eq!(c.to_string(), "3Exp+2H+Sig+2I+CP");
        assert_eq!(OpCounters::ZERO.to_string(), "0");
    }

    #[test]
    fn measure_reports_delta() {
        let ((), d) = measure("m", || {
            charge(Op::ScalarMul);
            charge(Op::Symmetric);
        });
        assert_eq!(d, OpCounters { m: 1, cs: 1, ..OpCounters::ZERO });
    }
}
