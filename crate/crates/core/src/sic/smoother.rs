//! Gaussian forward-backward smoothing of the AR(1) phase process.
//!
//! Factor graph: a prior factor on `theta_0`, transition factors
//! `N(theta_i; mu_delta theta_{i-1}, sigma_delta^2)` between neighbours and
//! one measurement factor per symbol. Measured symbols (phase known from an
//! earlier stage) contribute the pseudo-measurement `z_i = m(arg y_i - gamma_i)`
//! with variance `sigma_n^2 / (2 |y_i| r_i)`; all others contribute a flat
//! message.
//!
//! Message schedule, each message a (mean, variance) pair:
//!
//! | message                                   | count   |
//! |-------------------------------------------|---------|
//! | prior factor -> `theta_0`                 | 1       |
//! | measurement factor -> `theta_i`           | n       |
//! | `theta_i` -> transition (forward)         | n - 1   |
//! | transition -> `theta_{i+1}` (forward)     | n - 1   |
//! | `theta_{i+1}` -> transition (backward)    | n - 1   |
//! | transition -> `theta_i` (backward)        | n - 1   |
//!
//! for `5n - 3` messages in total. Measurements are unwrapped against the
//! forward prediction (`z~ = m_f + m(z - m_f)`) once, during the forward pass,
//! and the unwrapped values are reused backward.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::wrap;
use crate::cpan::CpanParams;
use crate::error::{Error, Result};

/// What the smoother reports at a measured position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefMode {
    /// Exclude the position's own measurement (extrinsic belief).
    #[default]
    LeaveOneOut,
    /// Full smoothing marginal including the own measurement.
    FullMarginal,
}

/// Per-symbol Gaussian belief about the phase noise.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseBelief {
    pub mu: Vec<f64>,
    pub sigma_sq: Vec<f64>,
}

impl PhaseBelief {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn get(&self, i: usize) -> (f64, f64) {
        (self.mu[i], self.sigma_sq[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmootherOutput {
    pub belief: PhaseBelief,
    /// Number of mean/variance messages passed.
    pub messages: usize,
}

/// Gaussian message; `var == INFINITY` is the flat message.
#[derive(Clone, Copy, Debug)]
struct Msg {
    mean: f64,
    var: f64,
}

impl Msg {
    const FLAT: Msg = Msg {
        mean: 0.0,
        var: f64::INFINITY,
    };

    fn is_flat(self) -> bool {
        self.var.is_infinite()
    }

    fn product(self, other: Msg) -> Msg {
        if self.is_flat() {
            return other;
        }
        if other.is_flat() {
            return self;
        }
        let prec = 1.0 / self.var + 1.0 / other.var;
        Msg {
            mean: (self.mean / self.var + other.mean / other.var) / prec,
            var: 1.0 / prec,
        }
    }
}

/// Smooths the phase given the known phases of earlier SIC stages.
///
/// `known_phases[i]` is `Some(gamma_i)` where the transmitted phase is known.
/// `r` holds the (known) transmit radii.
pub fn phase_smoother(
    y: &[Complex64],
    r: &[f64],
    known_phases: &[Option<f64>],
    params: &CpanParams,
    mode: BeliefMode,
) -> Result<SmootherOutput> {
    let n = y.len();
    if r.len() != n || known_phases.len() != n {
        return Err(Error::invalid("smoother inputs differ in length"));
    }
    if n == 0 {
        return Err(Error::invalid("smoother needs at least one symbol"));
    }
    if r.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("smoother radii must be positive"));
    }
    let s_theta = params.sigma_theta_sq();
    if s_theta == 0.0 {
        // phase noise is identically zero; nothing to pass
        return Ok(SmootherOutput {
            belief: PhaseBelief {
                mu: vec![0.0; n],
                sigma_sq: vec![0.0; n],
            },
            messages: 0,
        });
    }
    let mut messages = 0usize;
    let mu_d = params.mu_delta();
    let s_delta = params.sigma_delta_sq();
    let s_n = params.sigma_n_sq();

    // measurement factor -> variable (still wrapped)
    let meas: Vec<Msg> = (0..n)
        .map(|i| match known_phases[i] {
            Some(g) if y[i].norm() > 0.0 && s_n > 0.0 => Msg {
                mean: wrap(y[i].arg() - g),
                var: s_n / (2.0 * y[i].norm() * r[i]),
            },
            // noiseless measurement: exact phase
            Some(g) if y[i].norm() > 0.0 => Msg {
                mean: wrap(y[i].arg() - g),
                var: 1e-300,
            },
            _ => Msg::FLAT,
        })
        .collect();
    messages += meas.len();

    // forward pass: fwd[i] is the message arriving at theta_i from the left
    let prior = Msg {
        mean: 0.0,
        var: s_theta,
    };
    let mut fwd = vec![Msg::FLAT; n];
    let mut unwrapped = meas.clone();
    fwd[0] = prior;
    messages += 1;
    let mut informed = false;
    for i in 0..n {
        if !meas[i].is_flat() {
            unwrapped[i].mean = fwd[i].mean + wrap(meas[i].mean - fwd[i].mean);
            informed = true;
        }
        if i + 1 < n {
            let out = fwd[i].product(unwrapped[i]);
            // the stationary prior maps to itself; skip the rounding
            fwd[i + 1] = if informed {
                Msg {
                    mean: mu_d * out.mean,
                    var: mu_d * mu_d * out.var + s_delta,
                }
            } else {
                prior
            };
            messages += 2;
        }
    }

    // backward pass: bwd[i] is the message arriving at theta_i from the right
    let mut bwd = vec![Msg::FLAT; n];
    for i in (1..n).rev() {
        let out = bwd[i].product(unwrapped[i]);
        bwd[i - 1] = if out.is_flat() || mu_d == 0.0 {
            Msg::FLAT
        } else {
            Msg {
                mean: out.mean / mu_d,
                var: (out.var + s_delta) / (mu_d * mu_d),
            }
        };
        messages += 2;
    }

    let mut mu = Vec::with_capacity(n);
    let mut sigma_sq = Vec::with_capacity(n);
    for i in 0..n {
        let mut b = fwd[i].product(bwd[i]);
        if mode == BeliefMode::FullMarginal {
            b = b.product(unwrapped[i]);
        }
        mu.push(b.mean);
        sigma_sq.push(b.var);
    }
    Ok(SmootherOutput {
        belief: PhaseBelief { mu, sigma_sq },
        messages,
    })
}
