//! Successive interference cancellation receiver.
//!
//! Detection is split into an amplitude stage followed by `S` phase stages.
//! The phases are interleaved round-robin over the stages: stage `s` owns the
//! symbols with `i mod S == s - 1`. Stage 1 is memoryless; every later stage
//! runs a Gaussian phase smoother conditioned on the phases of all earlier
//! stages and then evaluates its own symbols.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};

mod detect;
mod pipeline;
mod smoother;
pub mod special;

pub use detect::{
    amplitude_posterior, phase_stage1_posterior, phase_stagek_posterior, AmplitudeDetector,
    PhaseDetector,
};
pub use pipeline::{run_sic, SicOutput, StagePosterior};
pub use smoother::{phase_smoother, BeliefMode, PhaseBelief, SmootherOutput};

/// Maps `x` to `[-pi, pi)` as `((x + pi) mod 2 pi) - pi`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let two_pi = 2.0 * PI;
    let mut r = (x + PI).rem_euclid(two_pi);
    // rem_euclid may round up to exactly 2 pi for tiny negative inputs
    if r >= two_pi {
        r -= two_pi;
    }
    r - PI
}

/// Row-major table of per-symbol categorical posteriors.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorTable {
    n_cols: usize,
    probs: Vec<f64>,
}

impl PosteriorTable {
    pub fn new(n_cols: usize) -> Self {
        PosteriorTable {
            n_cols,
            probs: Vec::new(),
        }
    }

    pub fn with_capacity(n_cols: usize, rows: usize) -> Self {
        PosteriorTable {
            n_cols,
            probs: Vec::with_capacity(n_cols * rows),
        }
    }

    /// Builds a table from row-major data, validating every row.
    pub fn from_rows(n_cols: usize, probs: Vec<f64>) -> Result<Self> {
        if n_cols == 0 || probs.len() % n_cols != 0 {
            return Err(Error::invalid("table data is not a whole number of rows"));
        }
        let t = PosteriorTable { n_cols, probs };
        for (i, row) in t.rows().enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("row {i} is not a distribution")));
            }
        }
        Ok(t)
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_rows(&self) -> usize {
        self.probs.len() / self.n_cols.max(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.n_cols)
    }

    /// Appends a zeroed row and hands it out for filling.
    pub(crate) fn push_row(&mut self) -> &mut [f64] {
        let start = self.probs.len();
        self.probs.resize(start + self.n_cols, 0.0);
        &mut self.probs[start..]
    }

    /// Writes one line per row: the symbol index followed by the probabilities.
    pub fn write_tsv<W: Write>(&self, mut out: W, symbol_index: &[usize]) -> Result<()> {
        if symbol_index.len() != self.n_rows() {
            return Err(Error::invalid("index list does not match the table"));
        }
        write!(out, "symbol")?;
        for k in 0..self.n_cols {
            write!(out, "\tp{k}")?;
        }
        writeln!(out)?;
        for (idx, row) in symbol_index.iter().zip(self.rows()) {
            write!(out, "{idx}")?;
            for p in row {
                write!(out, "\t{p:e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Round-robin assignment of symbol phases to `S` stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SicSchedule {
    n_stages: usize,
}

impl SicSchedule {
    pub fn new(n_stages: usize) -> Result<Self> {
        if n_stages == 0 {
            return Err(Error::invalid("a schedule needs at least one stage"));
        }
        Ok(SicSchedule { n_stages })
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    /// 1-based stage that detects the phase of 0-based symbol `i`.
    #[inline]
    pub fn stage_of(&self, i: usize) -> usize {
        i % self.n_stages + 1
    }

    pub fn symbols_of_stage(&self, stage: usize, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| self.stage_of(i) == stage).collect()
    }
}

/// Normalizes log-weights in place into probabilities.
pub(crate) fn normalize_log_weights(w: &mut [f64]) -> Result<()> {
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NumericUnderflow(
            "all log-weights are -inf or NaN".into(),
        ));
    }
    let mut sum = 0.0;
    for v in w.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    Ok(())
}
