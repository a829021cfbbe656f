//! Achievable information rates from mismatched posteriors.
//!
//! A stage that reports `q(u_i | ...)` for a symbol component `u_i` with prior
//! `P(u)` contributes `E[log2 q(u | ...) - log2 P(u)]` bits, which is a lower
//! bound on the mutual information for any metric `q`. Stage contributions
//! add up to the SIC rate.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::constellation::{Constellation, SymbolSequence};
use crate::error::{Error, Result};
use crate::sic::{PosteriorTable, SicOutput};

/// Rate contribution of a single stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageAir {
    /// Contribution in bits per channel use, after clamping.
    pub bits: f64,
    /// Raw (unclamped) estimate; `-inf` if any truth had zero probability.
    pub raw_bits: f64,
    /// The raw value was negative or `-inf` and got clamped to 0.
    pub clamped: bool,
    /// Symbols whose true value had posterior probability 0.
    pub zero_prob_terms: usize,
}

impl StageAir {
    fn from_raw(raw_bits: f64, zero_prob_terms: usize) -> Self {
        let clamped = !(raw_bits >= 0.0);
        StageAir {
            bits: if clamped { 0.0 } else { raw_bits },
            raw_bits,
            clamped,
            zero_prob_terms,
        }
    }
}

/// Per-symbol information terms `log2 q(truth) - log2 P(truth)`.
fn info_terms(table: &PosteriorTable, truth_idx: &[usize], prior: &[f64]) -> Result<Vec<f64>> {
    if table.n_rows() != truth_idx.len() {
        return Err(Error::invalid(format!(
            "{} posterior rows but {} truth indices",
            table.n_rows(),
            truth_idx.len()
        )));
    }
    if prior.len() != table.n_cols() || prior.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::invalid("prior must be strictly positive over the table alphabet"));
    }
    truth_idx
        .iter()
        .zip(table.rows())
        .map(|(&t, row)| {
            if t >= row.len() {
                return Err(Error::invalid(format!("truth index {t} out of range")));
            }
            Ok(row[t].log2() - prior[t].log2())
        })
        .collect()
}

/// Mean information per stage symbol, scaled by `symbols_per_use`.
pub fn stage_air(
    posteriors: &PosteriorTable,
    truth_idx: &[usize],
    prior: &[f64],
    symbols_per_use: f64,
) -> Result<StageAir> {
    let terms = info_terms(posteriors, truth_idx, prior)?;
    if terms.is_empty() {
        return Ok(StageAir::from_raw(0.0, 0));
    }
    let zeros = terms.iter().filter(|t| t.is_infinite()).count();
    let raw = terms.iter().sum::<f64>() / terms.len() as f64 * symbols_per_use;
    Ok(StageAir::from_raw(raw, zeros))
}

/// Raw per-stage contributions (bits per channel use) of one SIC run:
/// amplitude first, then each phase stage weighted by its share of symbols.
pub fn sic_stage_contributions(
    out: &SicOutput,
    truth: &SymbolSequence,
    c: &Constellation,
) -> Result<Vec<StageAir>> {
    let n = truth.len();
    let mut stages = Vec::with_capacity(1 + out.phases.len());
    stages.push(stage_air(&out.amplitude, &truth.radius_idx, c.radial_pmf(), 1.0)?);
    let uniform = vec![1.0 / c.n_phases() as f64; c.n_phases()];
    for st in &out.phases {
        let idx: Vec<usize> = st.symbols.iter().map(|&i| truth.phase_idx[i]).collect();
        let share = st.symbols.len() as f64 / n as f64;
        stages.push(stage_air(&st.table, &idx, &uniform, share)?);
    }
    Ok(stages)
}

/// Aggregated rate over several test sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct AirResult {
    pub per_stage_bits: Vec<f64>,
    pub total_bits: f64,
    pub n_symbols_used: usize,
    /// Standard error of the total, from the spread across sequences.
    pub std_error: f64,
    /// Stages whose aggregate estimate was negative and clamped to 0.
    pub clamped: Vec<bool>,
}

/// Collects per-sequence raw stage contributions; raw values are averaged
/// first and only the aggregate is clamped.
#[derive(Clone, Debug, Default)]
pub struct AirAccumulator {
    rows: Vec<(Vec<f64>, usize)>,
}

impl AirAccumulator {
    pub fn new() -> Self {
        AirAccumulator::default()
    }

    pub fn push(&mut self, stages: &[StageAir], n_symbols: usize) {
        self.rows
            .push((stages.iter().map(|s| s.raw_bits).collect(), n_symbols));
    }

    /// Per-symbol values, e.g. a memoryless baseline over one sequence.
    pub fn push_raw(&mut self, raw_bits: Vec<f64>, n_symbols: usize) {
        self.rows.push((raw_bits, n_symbols));
    }

    pub fn finish(&self) -> Result<AirResult> {
        let Some((first, _)) = self.rows.first() else {
            return Err(Error::invalid("no sequences accumulated"));
        };
        let n_stages = first.len();
        if self.rows.iter().any(|(r, _)| r.len() != n_stages) {
            return Err(Error::invalid("sequences disagree on the stage count"));
        }
        let n_symbols_used: usize = self.rows.iter().map(|(_, n)| n).sum();
        let weight = |n: usize| n as f64 / n_symbols_used as f64;

        let mut per_stage_bits = vec![0.0; n_stages];
        for (r, n) in &self.rows {
            for (acc, v) in per_stage_bits.iter_mut().zip(r) {
                *acc += v * weight(*n);
            }
        }
        let clamped: Vec<bool> = per_stage_bits.iter().map(|v| !(*v >= 0.0)).collect();
        for (v, &c) in per_stage_bits.iter_mut().zip(&clamped) {
            if c {
                *v = 0.0;
            }
        }
        let total_bits = per_stage_bits.iter().sum();

        let totals: Vec<f64> = self.rows.iter().map(|(r, _)| r.iter().sum()).collect();
        let std_error = if totals.len() > 1 && totals.iter().all(|t| t.is_finite()) {
            let m = totals.iter().sum::<f64>() / totals.len() as f64;
            let var = totals.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (totals.len() - 1) as f64;
            (var / totals.len() as f64).sqrt()
        } else {
            0.0
        };
        Ok(AirResult {
            per_stage_bits,
            total_bits,
            n_symbols_used,
            std_error,
            clamped,
        })
    }
}

/// `log2(1 + SNR)` with SNR in dB.
pub fn awgn_air_gaussian(snr_db: f64) -> f64 {
    (10f64.powf(snr_db / 10.0)).ln_1p() / LN_2
}

/// Terms of a ring this far (in nats) below the ring maximum are dropped.
const PRUNE_NATS: f64 = 36.0;

/// `ln sum_x P(x) exp(-|y - x|^2 / sigma_sq)` over the whole star-QAM alphabet.
///
/// Per ring, the exponent is maximal at the phase nearest `arg y` and falls
/// off monotonically in both directions, so the sum walks outward from there
/// and stops once terms are negligible.
pub(crate) fn log_mixture(y: Complex64, c: &Constellation, log_prior_ring: &[f64], sigma_sq: f64) -> f64 {
    let n_p = c.n_phases();
    let mag = y.norm();
    let ang = y.arg();
    let step = 2.0 * std::f64::consts::PI / n_p as f64;
    let log_np = (n_p as f64).ln();
    let near = (ang / step).round();
    let mut ring_logs = Vec::with_capacity(c.n_rings());
    for (&r, &lp) in c.radii().iter().zip(log_prior_ring) {
        let base = -(mag - r) * (mag - r) / sigma_sq;
        let a = 2.0 * mag * r / sigma_sq;
        let delta0 = ang - near * step;
        // exponent relative to the ring optimum at delta = 0
        let rel = |d: f64| a * ((d).cos() - 1.0);
        let e0 = rel(delta0);
        let mut sum = 1.0;
        let half = n_p / 2;
        for side in [1.0f64, -1.0] {
            let limit = if side > 0.0 { half } else { n_p - 1 - half };
            for k in 1..=limit {
                let e = rel(delta0 - side * k as f64 * step) - e0;
                if e < -PRUNE_NATS {
                    break;
                }
                sum += e.exp();
            }
        }
        ring_logs.push(lp - log_np + base + e0 + sum.ln());
    }
    log_sum_exp(&ring_logs)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-symbol information `log2 q(x|y) - log2 P(x)` of the memoryless AWGN
/// metric `q(x|y) ~ P(x) exp(-|y - x|^2 / sigma_sq)`.
fn awgn_info_terms(y: &[Complex64], x: &[Complex64], c: &Constellation, sigma_sq: f64) -> Vec<f64> {
    let lp = c.log_radial_pmf();
    y.iter()
        .zip(x)
        .map(|(&yi, &xi)| (-(yi - xi).norm_sqr() / sigma_sq - log_mixture(yi, c, &lp, sigma_sq)) / LN_2)
        .collect()
}

/// Monte Carlo rate estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub bits: f64,
    pub std_error: f64,
}

const MC_CHUNK: usize = 1 << 14;

/// Mutual information of star-QAM over memoryless AWGN with
/// `SNR = ptx / sigma_n_sq`, by Monte Carlo. Chunks are seeded by index, so
/// the result does not depend on the thread count.
pub fn awgn_air_starqam(c: &Constellation, snr_db: f64, n_mc: usize, seed: u64) -> Result<McEstimate> {
    if n_mc < 10_000 {
        return Err(Error::invalid(format!("n_mc must be at least 10^4, got {n_mc}")));
    }
    let sigma_sq = c.ptx() / 10f64.powf(snr_db / 10.0);
    if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return Err(Error::invalid(format!("SNR {snr_db} dB gives no usable noise power")));
    }
    let n_chunks = n_mc.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let len = MC_CHUNK.min(n_mc - k * MC_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let x = c.sample_with(len, &mut rng);
            let sd = (sigma_sq / 2.0).sqrt();
            let y: Vec<Complex64> = x
                .values
                .iter()
                .map(|&xi| {
                    let nr: f64 = StandardNormal.sample(&mut rng);
                    let ni: f64 = StandardNormal.sample(&mut rng);
                    xi + Complex64::new(nr, ni) * sd
                })
                .collect();
            let t = awgn_info_terms(&y, &x.values, c, sigma_sq);
            (t.iter().sum::<f64>(), t.iter().map(|v| v * v).sum::<f64>())
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_mc as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(McEstimate {
        bits: mean,
        std_error: (var / n).sqrt(),
    })
}

/// Per-symbol information terms of the memoryless AWGN baseline receiver
/// applied to arbitrary data (e.g. CPAN or fiber output).
pub fn memoryless_info_terms(
    y: &[Complex64],
    truth: &SymbolSequence,
    c: &Constellation,
    sigma_n_sq_fit: f64,
) -> Result<Vec<f64>> {
    if y.len() != truth.len() {
        return Err(Error::invalid("received and transmitted lengths differ"));
    }
    if !(sigma_n_sq_fit > 0.0) {
        return Err(Error::invalid("baseline noise power must be positive"));
    }
    Ok(awgn_info_terms(y, &truth.values, c, sigma_n_sq_fit))
}

/// Rate of the memoryless AWGN baseline over the full complex alphabet.
pub fn memoryless_baseline_air(
    y: &[Complex64],
    truth: &SymbolSequence,
    c: &Constellation,
    sigma_n_sq_fit: f64,
) -> Result<StageAir> {
    let terms = memoryless_info_terms(y, truth, c, sigma_n_sq_fit)?;
    let zeros = terms.iter().filter(|t| t.is_infinite()).count();
    Ok(StageAir::from_raw(
        terms.iter().sum::<f64>() / terms.len() as f64,
        zeros,
    ))
}
