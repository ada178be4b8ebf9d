//! Per-step certificate checks over finished traces.
//!
//! A run of `N` steps yields `N - 1` checks, one for each step `n >= 1`;
//! step 0 is folded into the first check. For the forward-backward scheme
//! step 0 has no deviation bound at all, and the gradient scheme follows the
//! same count so reports line up across problem kinds.

use devopt_core::nonsmooth::FbTrace;
use devopt_core::smooth::SmoothTrace;
use devopt_core::within_bound;
use serde::{Deserialize, Serialize};

/// Slack on `F(x_{n+1}) <= F(x_n)` and on `V_n >= F(x_{n+1})`.
pub const DESCENT_SLACK: f64 = 1e-10;
/// Relative slack on the decrease of the Lyapunov sequence.
pub const LYAPUNOV_REL_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckFailure {
    pub n: usize,
    pub what: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub checks: usize,
    pub failures: Vec<CheckFailure>,
    /// Raw proposals that violated the bound and were pulled back.
    pub enforced: usize,
}

impl CheckTally {
    pub fn passed(&self) -> usize {
        self.checks - self.failures.len()
    }

    /// Every check failed, used for certified runs that broke down.
    pub fn all_failed(iters: usize, why: &str) -> Self {
        Self {
            checks: iters.saturating_sub(1),
            failures: (1..iters)
                .map(|n| CheckFailure {
                    n,
                    what: why.to_string(),
                })
                .collect(),
            enforced: 0,
        }
    }
}

/// Deviation bound and descent for each step of a gradient-scheme run.
///
/// A run that stopped at a stationary point passes its remaining checks: the
/// iterate no longer moves.
pub fn smooth_checks(trace: &SmoothTrace, iters: usize) -> CheckTally {
    let mut tally = CheckTally::default();
    let step_ok = |n: usize| -> Option<String> {
        let r = &trace.records[n];
        let mut bad = Vec::new();
        if !within_bound(r.dev_norm, r.eps * r.grad_norm) {
            bad.push(format!("deviation {:e} > {:e}", r.dev_norm, r.eps * r.grad_norm));
        }
        let (a, b) = (trace.objectives[n], trace.objectives[n + 1]);
        if b > a + DESCENT_SLACK {
            bad.push(format!("objective rose {a:e} -> {b:e}"));
        }
        (!bad.is_empty()).then(|| bad.join("; "))
    };
    for n in 1..iters {
        tally.checks += 1;
        if n >= trace.records.len() {
            continue;
        }
        let mut what: Vec<String> = Vec::new();
        if n == 1 {
            what.extend(step_ok(0));
        }
        what.extend(step_ok(n));
        if !what.is_empty() {
            tally.failures.push(CheckFailure {
                n,
                what: what.join("; "),
            });
        }
    }
    tally.enforced = trace.records.iter().filter(|r| r.enforced).count();
    tally
}

/// Joint deviation bound, Lyapunov decrease and `V_n >= F(x_{n+1})` for
/// each step of a forward-backward run.
pub fn fb_checks(trace: &FbTrace, iters: usize) -> CheckTally {
    let mut tally = CheckTally::default();
    let dominates = |n: usize| -> Option<String> {
        let (v, f) = (trace.records[n].lyapunov, trace.objectives[n + 1]);
        (v < f - DESCENT_SLACK).then(|| format!("V_{n} = {v:e} below F = {f:e}"))
    };
    for n in 1..iters.min(trace.records.len()) {
        tally.checks += 1;
        let (prev, r) = (&trace.records[n - 1], &trace.records[n]);
        let mut what: Vec<String> = Vec::new();
        if n == 1 {
            what.extend(dominates(0));
        }
        if !within_bound(r.accepted_lhs, r.accepted_rhs) {
            what.push(format!("bound {:e} > {:e}", r.accepted_lhs, r.accepted_rhs));
        }
        if r.combined > prev.combined + LYAPUNOV_REL_SLACK * prev.combined.abs() {
            what.push(format!("energy rose {:e} -> {:e}", prev.combined, r.combined));
        }
        what.extend(dominates(n));
        if !what.is_empty() {
            tally.failures.push(CheckFailure {
                n,
                what: what.join("; "),
            });
        }
    }
    tally.enforced = trace.records.iter().filter(|r| r.enforced).count();
    tally
}
