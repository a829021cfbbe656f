//! Correlated phase and additive noise (CPAN) surrogate channel.
//!
//! `y_i = x_i * exp(j theta_i) + n_i` with an AR(1) Gaussian phase process
//! `theta_i = mu_delta * theta_{i-1} + sigma_delta * delta_i` and circular
//! Gaussian `n_i` of variance `sigma_n_sq`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sic::wrap;

/// Parameters of the CPAN surrogate. `sigma_theta_sq` is always the
/// steady-state variance implied by `mu_delta` and `sigma_delta_sq`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CpanRecord", into = "CpanRecord")]
pub struct CpanParams {
    mu_delta: f64,
    sigma_delta_sq: f64,
    sigma_theta_sq: f64,
    sigma_n_sq: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct CpanRecord {
    mu_delta: f64,
    sigma_delta_sq: f64,
    sigma_theta_sq: f64,
    sigma_n_sq: f64,
}

impl TryFrom<CpanRecord> for CpanParams {
    type Error = Error;

    fn try_from(r: CpanRecord) -> Result<Self> {
        let mut p = CpanParams::new(r.mu_delta, r.sigma_delta_sq, r.sigma_n_sq)?;
        let tol = 1e-12 * p.sigma_theta_sq.max(r.sigma_theta_sq);
        if (p.sigma_theta_sq - r.sigma_theta_sq).abs() > tol {
            return Err(Error::invalid(format!(
                "sigma_theta_sq {} inconsistent with steady state {}",
                r.sigma_theta_sq, p.sigma_theta_sq
            )));
        }
        p.sigma_theta_sq = r.sigma_theta_sq;
        Ok(p)
    }
}

impl From<CpanParams> for CpanRecord {
    fn from(p: CpanParams) -> Self {
        CpanRecord {
            mu_delta: p.mu_delta,
            sigma_delta_sq: p.sigma_delta_sq,
            sigma_theta_sq: p.sigma_theta_sq,
            sigma_n_sq: p.sigma_n_sq,
        }
    }
}

/// `sigma_delta_sq / (1 - mu_delta^2)`.
pub fn steady_state_variance(mu_delta: f64, sigma_delta_sq: f64) -> Result<f64> {
    if !(mu_delta.abs() < 1.0) {
        return Err(Error::invalid(format!(
            "|mu_delta| must be below 1 for a stationary process, got {mu_delta}"
        )));
    }
    Ok(sigma_delta_sq / (1.0 - mu_delta * mu_delta))
}

impl CpanParams {
    pub fn new(mu_delta: f64, sigma_delta_sq: f64, sigma_n_sq: f64) -> Result<Self> {
        if !(sigma_delta_sq >= 0.0 && sigma_delta_sq.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma_delta_sq must be nonnegative, got {sigma_delta_sq}"
            )));
        }
        if !(sigma_n_sq >= 0.0 && sigma_n_sq.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma_n_sq must be nonnegative, got {sigma_n_sq}"
            )));
        }
        let sigma_theta_sq = steady_state_variance(mu_delta, sigma_delta_sq)?;
        Ok(CpanParams {
            mu_delta,
            sigma_delta_sq,
            sigma_theta_sq,
            sigma_n_sq,
        })
    }

    /// Parameterizes by the steady-state phase variance instead of the
    /// innovation variance.
    pub fn from_steady_state(mu_delta: f64, sigma_theta_sq: f64, sigma_n_sq: f64) -> Result<Self> {
        if !(mu_delta.abs() < 1.0) {
            return Err(Error::invalid(format!(
                "|mu_delta| must be below 1, got {mu_delta}"
            )));
        }
        if !(sigma_theta_sq >= 0.0) {
            return Err(Error::invalid("sigma_theta_sq must be nonnegative"));
        }
        let sigma_delta_sq = sigma_theta_sq * (1.0 - mu_delta * mu_delta);
        let mut p = CpanParams::new(mu_delta, sigma_delta_sq, sigma_n_sq)?;
        // keep the caller's value bit-exact
        p.sigma_theta_sq = sigma_theta_sq;
        Ok(p)
    }

    pub fn mu_delta(&self) -> f64 {
        self.mu_delta
    }

    pub fn sigma_delta_sq(&self) -> f64 {
        self.sigma_delta_sq
    }

    pub fn sigma_theta_sq(&self) -> f64 {
        self.sigma_theta_sq
    }

    pub fn sigma_n_sq(&self) -> f64 {
        self.sigma_n_sq
    }

    pub fn with_sigma_n_sq(self, sigma_n_sq: f64) -> Result<Self> {
        CpanParams::from_steady_state(self.mu_delta, self.sigma_theta_sq, sigma_n_sq)
    }
}

/// Output of one channel use over a whole sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub y: Vec<Complex64>,
    pub theta: Vec<f64>,
}

/// Runs the CPAN channel over `x`. The phase process starts in steady state.
pub fn simulate(params: &CpanParams, x: &[Complex64], seed: u64) -> Result<ChannelRealization> {
    if x.is_empty() {
        return Err(Error::invalid("input sequence is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma_theta = params.sigma_theta_sq.sqrt();
    let sigma_delta = params.sigma_delta_sq.sqrt();
    let noise_sd = (params.sigma_n_sq / 2.0).sqrt();

    let mut theta = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    let mut th = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let d: f64 = StandardNormal.sample(&mut rng);
        th = if i == 0 {
            sigma_theta * d
        } else {
            params.mu_delta * th + sigma_delta * d
        };
        let nr: f64 = StandardNormal.sample(&mut rng);
        let ni: f64 = StandardNormal.sample(&mut rng);
        theta.push(th);
        y.push(xi * Complex64::from_polar(1.0, th) + Complex64::new(nr, ni) * noise_sd);
    }
    Ok(ChannelRealization { y, theta })
}

/// Symbols below this per-symbol SNR `|x|^2 / sigma_n^2` are left out of the
/// moment estimates; the small-noise phase/radial approximations need it.
pub const FIT_MIN_SNR: f64 = 25.0;

/// Result of [`fit_params`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport {
    pub params: CpanParams,
    /// Mean of the extracted phase; the detectors assume zero-mean phase noise.
    pub mean_phase: f64,
    /// Set when the phase statistics carry no usable information (zero
    /// corrected variance), in which case `mu_delta` is a clamped placeholder.
    pub degenerate: bool,
    pub n_symbols: usize,
}

const MU_MAX: f64 = 1.0 - 1e-9;

fn check_training(training: &[(&[Complex64], &[Complex64])]) -> Result<()> {
    if training.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    for (x, y) in training {
        if x.len() != y.len() {
            return Err(Error::invalid("training pair lengths differ"));
        }
        if x.iter().any(|v| v.norm_sqr() == 0.0) {
            return Err(Error::invalid("training symbols must be nonzero"));
        }
    }
    Ok(())
}

/// Moment-matching fit of the CPAN parameters from paired (x, y) sequences.
///
/// 1. A pilot noise power `mean(|y|^2 - |x|^2)` (unbiased for any phase).
/// 2. `sigma_n_sq` from the radial residual `|y| - |x| = |y - x e^{j theta_hat}|`
///    on high-SNR symbols. The residual carries half the complex noise power
///    (the tangential half went into `theta_hat`), hence the factor 2; the
///    second-order Rician term `3 sigma^2 / (8 |x|^2)` is divided out.
/// 3. `theta_hat = m(arg(y / x))`; its variance over high-SNR symbols minus
///    the additive-noise phase variance `sigma_n^2 / (2 |x|^2)` gives
///    `sigma_theta_sq`. The lag-1 covariance is unbiased by independent
///    noise, so `mu_delta = cov_1 / sigma_theta_sq` (Yule-Walker).
///
/// Lags never cross sequence boundaries. Phase wraps are assumed absent.
pub fn fit_params(training: &[(&[Complex64], &[Complex64])]) -> Result<FitReport> {
    check_training(training)?;
    let n_total: usize = training.iter().map(|(x, _)| x.len()).sum();
    if n_total == 0 {
        return Err(Error::invalid("training set has no symbols"));
    }

    let pilot = (training
        .iter()
        .flat_map(|(x, y)| x.iter().zip(y.iter()))
        .map(|(x, y)| y.norm_sqr() - x.norm_sqr())
        .sum::<f64>()
        / n_total as f64)
        .max(0.0);
    let selected = |x: &Complex64| x.norm_sqr() >= FIT_MIN_SNR * pilot;

    let mut radial = 0.0;
    let mut n_radial = 0usize;
    for (x, y) in training {
        for (xi, yi) in x.iter().zip(y.iter()) {
            if selected(xi) {
                let e = yi.norm() - xi.norm();
                radial += e * e / (1.0 + 3.0 * pilot / (8.0 * xi.norm_sqr()));
                n_radial += 1;
            }
        }
    }
    let sigma_n_sq = if n_radial > 0 {
        2.0 * radial / n_radial as f64
    } else {
        pilot
    };

    let theta_hat: Vec<Vec<f64>> = training
        .iter()
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(xi, yi)| wrap((yi / xi).arg())).collect())
        .collect();

    let mut sum = 0.0;
    let mut count = 0usize;
    for ((x, _), th) in training.iter().zip(&theta_hat) {
        for (xi, t) in x.iter().zip(th) {
            if selected(xi) {
                sum += t;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::invalid("no training symbol has usable SNR"));
    }
    let mean_phase = sum / count as f64;

    let mut var = 0.0;
    let mut noise_phase = 0.0;
    let mut cov = 0.0;
    let mut n_pairs = 0usize;
    for ((x, _), th) in training.iter().zip(&theta_hat) {
        for (i, (xi, t)) in x.iter().zip(th).enumerate() {
            if !selected(xi) {
                continue;
            }
            let d = t - mean_phase;
            var += d * d;
            noise_phase += sigma_n_sq / (2.0 * xi.norm_sqr());
            if i + 1 < x.len() && selected(&x[i + 1]) {
                cov += d * (th[i + 1] - mean_phase);
                n_pairs += 1;
            }
        }
    }
    let sigma_theta_sq = (var - noise_phase) / count as f64;
    let cov = if n_pairs > 0 { cov / n_pairs as f64 } else { 0.0 };

    let (params, degenerate) = if sigma_theta_sq > 0.0 {
        let mu = (cov / sigma_theta_sq).clamp(0.0, MU_MAX);
        (CpanParams::from_steady_state(mu, sigma_theta_sq, sigma_n_sq)?, false)
    } else {
        (CpanParams::from_steady_state(0.0, 0.0, sigma_n_sq)?, true)
    };
    Ok(FitReport {
        params,
        mean_phase,
        degenerate,
        n_symbols: n_total,
    })
}

/// Noise power of a memoryless AWGN surrogate (`theta` forced to zero), i.e.
/// the total distortion power `mean |y - x|^2`.
pub fn fit_awgn_noise(training: &[(&[Complex64], &[Complex64])]) -> Result<f64> {
    check_training(training)?;
    let mut acc = 0.0;
    let mut n = 0usize;
    for (x, y) in training {
        for (xi, yi) in x.iter().zip(y.iter()) {
            acc += (yi - xi).norm_sqr();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("training set has no symbols"));
    }
    Ok(acc / n as f64)
}
