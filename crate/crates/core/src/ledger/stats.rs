//! Multi-run timing statistics.

use std::time::Duration;

use thiserror::Error;

use super::RunLedger;

/// The three numbers a ledger contributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub wall_clock: Duration,
    pub statements: usize,
    pub solved: bool,
}

impl RunSummary {
    pub fn of(ledger: &RunLedger) -> Option<Self> {
        let o = ledger.outcome()?;
        Some(Self {
            wall_clock: Duration::from_millis(o.wall_clock_ms),
            statements: o.statement_count,
            solved: o.outcome.is_solved(),
        })
    }

    pub fn hours(&self) -> f64 {
        self.wall_clock.as_secs_f64() / 3600.0
    }

    pub fn minutes_per_statement(&self) -> f64 {
        self.wall_clock.as_secs_f64() / 60.0 / self.statements.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub runs: usize,
    pub mean_time: f64,
    pub std_time: f64,
    pub median_time: f64,
    pub min_time: f64,
    pub max_time: f64,
    pub mean_statements: f64,
    pub std_statements: f64,
    pub mean_min_per_statement: f64,
    pub std_min_per_statement: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("no runs to aggregate")]
    EmptyInput,
    #[error("run {0} is not solved")]
    UnsolvedIncluded(usize),
}

/// Mean and sample standard deviation (n - 1), via Welford's update. The
/// deviation of a single value is 0.
fn mean_std(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0f64, 0f64, 0f64);
    for x in xs {
        n += 1.0;
        let delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
    }
    let std = if n > 1.0 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, std)
}

/// Midpoint median.
fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Times in hours, minutes per statement as the mean of per-run ratios.
pub fn aggregate_stats(runs: &[RunSummary]) -> Result<RunStats, StatsError> {
    if runs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if let Some(i) = runs.iter().position(|r| !r.solved) {
        return Err(StatsError::UnsolvedIncluded(i));
    }
    let hours: Vec<f64> = runs.iter().map(RunSummary::hours).collect();
    let (mean_time, std_time) = mean_std(hours.iter().copied());
    let (mean_statements, std_statements) = mean_std(runs.iter().map(|r| r.statements as f64));
    let (mean_mps, std_mps) = mean_std(runs.iter().map(RunSummary::minutes_per_statement));
    Ok(RunStats {
        runs: runs.len(),
        mean_time,
        std_time,
        median_time: median(hours.clone()),
        min_time: hours.iter().copied().fold(f64::INFINITY, f64::min),
        max_time: hours.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_statements,
        std_statements,
        mean_min_per_statement: mean_mps,
        std_min_per_statement: std_mps,
    })
}

/// `0.22±0.04h | 0.21h | 0.17–0.29h | 2.0±0.0 | 6.5±1.1`
pub fn render_row(s: &RunStats) -> String {
    format!(
        "{:.2}±{:.2}h | {:.2}h | {:.2}–{:.2}h | {:.1}±{:.1} | {:.1}±{:.1}",
        s.mean_time,
        s.std_time,
        s.median_time,
        s.min_time,
        s.max_time,
        s.mean_statements,
        s.std_statements,
        s.mean_min_per_statement,
        s.std_min_per_statement
    )
}
