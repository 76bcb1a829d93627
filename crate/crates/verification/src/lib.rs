//! Reporting helpers for the acceptance suite in `tests/acceptance.rs`.

use std::fmt;
use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status}  {}: {}", self.name, self.detail)
    }
}

/// Collects outcomes and prints one line per criterion as it finishes.
#[derive(Default)]
pub struct Report {
    outcomes: Vec<Outcome>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `check`; an `Err` counts as a failure with the error as detail.
    pub fn check<E: fmt::Display>(&mut self, name: &'static str, check: impl FnOnce() -> Result<(bool, String), E>) {
        let outcome = match check() {
            Ok((passed, detail)) => Outcome { name, passed, detail },
            Err(e) => Outcome {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        };
        println!("{outcome}");
        self.outcomes.push(outcome);
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.passed).count()
    }

    pub fn summary(&self) -> String {
        format!(
            "{} of {} criteria passed",
            self.outcomes.len() - self.failures(),
            self.outcomes.len()
        )
    }
}

/// Runs `f` and returns its value with the elapsed wall time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed())
}

/// `a / b`, but infinite when `b` is zero.
pub fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        f64::INFINITY
    } else {
        a / b
    }
}
