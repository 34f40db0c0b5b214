//! Acceptance criteria, one module each. Every check recomputes its expected
//! values with an oracle written here, independent of the library code path.

#![allow(dead_code)]

pub mod dsp_oracles;
pub mod fixtures;
pub mod gradcheck;
pub mod learning;
pub mod metric_oracles;
pub mod param_ledger;
pub mod protocol;
pub mod residual;
pub mod scan_counts;

use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass(String),
    Fail(String),
    /// Preconditions absent (e.g. a corpus that is not on disk).
    Skip(String),
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Pass(_) => "PASS",
            Outcome::Fail(_) => "FAIL",
            Outcome::Skip(_) => "SKIP",
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            Outcome::Pass(d) | Outcome::Fail(d) | Outcome::Skip(d) => d,
        }
    }
}

/// Runs `check`, converting `Err` to a failure and enforcing a time budget.
pub fn timed(budget: Duration, check: impl FnOnce() -> Result<Outcome, String>) -> Outcome {
    let start = Instant::now();
    let out = check();
    let elapsed = start.elapsed();
    match out {
        Err(e) => Outcome::Fail(e),
        Ok(Outcome::Pass(d)) if elapsed > budget => Outcome::Fail(format!(
            "{d}; took {:.1}s, budget {:.0}s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        )),
        Ok(Outcome::Pass(d)) => Outcome::Pass(format!("{d} [{:.1}s]", elapsed.as_secs_f64())),
        Ok(other) => other,
    }
}

/// `Err` with a formatted message unless `cond` holds.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}
