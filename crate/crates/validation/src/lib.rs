//! Helpers for the acceptance run: timed criteria and trajectory comparisons.

use std::fmt;
use std::time::{Duration, Instant};

use pauliprop::TrajectoryRecord;

/// Verdict for one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{tag}] {}: {} ({:.2} s)",
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Runs `check`, which returns `(passed, detail)`, and times it.
pub fn timed(name: &'static str, check: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = check();
    Outcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// Largest `|a.value - b.value|` over records at matching steps.
///
/// Panics if the two trajectories were recorded at different steps.
pub fn max_gap(a: &[TrajectoryRecord], b: &[TrajectoryRecord]) -> f64 {
    assert_eq!(a.len(), b.len(), "trajectories differ in length");
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            assert_eq!(x.step, y.step, "trajectories recorded at different steps");
            (x.value - y.value).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest gap between engine records and `(step, time, value)` reference rows at the same steps.
pub fn max_gap_to_reference(records: &[TrajectoryRecord], reference: &[(usize, f64, f64)]) -> f64 {
    records
        .iter()
        .map(|r| {
            let (_, _, v) = reference
                .iter()
                .find(|row| row.0 == r.step)
                .unwrap_or_else(|| panic!("reference lacks step {}", r.step));
            (r.value - v).abs()
        })
        .fold(0.0, f64::max)
}
