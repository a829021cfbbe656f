use num_complex::Complex64;

use super::special::log_i0;
use super::{normalize_log_weights, wrap};
use crate::constellation::Constellation;
use crate::cpan::CpanParams;
use crate::error::{Error, Result};

fn check_noise(sigma_n_sq: f64) -> Result<()> {
    if !(sigma_n_sq > 0.0 && sigma_n_sq.is_finite()) {
        return Err(Error::invalid(format!(
            "detectors need sigma_n_sq > 0, got {sigma_n_sq}"
        )));
    }
    Ok(())
}

/// Memoryless amplitude detector.
///
/// The phase sum is replaced by an integral over a continuous uniform phase,
/// which leaves `f(r) = exp(-r^2 / sigma_n^2) I0(2 |y| r / sigma_n^2)`;
/// the phase noise drops out entirely.
#[derive(Clone, Debug)]
pub struct AmplitudeDetector {
    radii: Vec<f64>,
    log_prior: Vec<f64>,
    sigma_n_sq: f64,
}

impl AmplitudeDetector {
    pub fn new(c: &Constellation, sigma_n_sq: f64) -> Result<Self> {
        check_noise(sigma_n_sq)?;
        Ok(AmplitudeDetector {
            radii: c.radii().to_vec(),
            log_prior: c.log_radial_pmf(),
            sigma_n_sq,
        })
    }

    pub fn n_outputs(&self) -> usize {
        self.radii.len()
    }

    /// Writes `q(r | y)` into `out` (one entry per ring).
    pub fn posterior_into(&self, y: Complex64, out: &mut [f64]) -> Result<()> {
        let a = 2.0 * y.norm() / self.sigma_n_sq;
        for ((o, &r), &lp) in out.iter_mut().zip(&self.radii).zip(&self.log_prior) {
            *o = lp - r * r / self.sigma_n_sq + log_i0(a * r);
        }
        normalize_log_weights(out)
    }
}

/// `q(r_i | y_i)` over the rings of `c`.
pub fn amplitude_posterior(y: Complex64, c: &Constellation, params: &CpanParams) -> Result<Vec<f64>> {
    let det = AmplitudeDetector::new(c, params.sigma_n_sq())?;
    let mut out = vec![0.0; det.n_outputs()];
    det.posterior_into(y, &mut out)?;
    Ok(out)
}

/// Phase detector shared by all phase stages.
///
/// With the radius known, `q(y | r, gamma, theta)` is approximated as a
/// Gaussian in `theta` around `m(arg y - gamma)` with variance
/// `sigma_n^2 / (2 |y| r)`. A Gaussian belief `(mu, var)` about `theta` then
/// gives `q(gamma) ~ N(m(arg y - gamma - mu); 0, var + sigma_n^2 / (2 |y| r))`.
#[derive(Clone, Debug)]
pub struct PhaseDetector {
    phases: Vec<f64>,
    sigma_n_sq: f64,
}

impl PhaseDetector {
    pub fn new(c: &Constellation, sigma_n_sq: f64) -> Result<Self> {
        check_noise(sigma_n_sq)?;
        Ok(PhaseDetector {
            phases: c.phase_set(),
            sigma_n_sq,
        })
    }

    pub fn n_outputs(&self) -> usize {
        self.phases.len()
    }

    /// Writes the phase posterior given the belief `theta ~ N(mu, var)`.
    /// A zero observation carries no phase information and yields the
    /// uniform distribution.
    pub fn posterior_into(
        &self,
        y: Complex64,
        r: f64,
        mu: f64,
        var: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        if !(var >= 0.0) {
            return Err(Error::invalid(format!("belief variance must be >= 0, got {var}")));
        }
        let mag = y.norm();
        if mag == 0.0 {
            out.fill(1.0 / out.len() as f64);
            return Ok(());
        }
        let total = var + self.sigma_n_sq / (2.0 * mag * r);
        let arg = y.arg();
        for (o, &g) in out.iter_mut().zip(&self.phases) {
            let d = wrap(arg - g - mu);
            *o = -d * d / (2.0 * total);
        }
        normalize_log_weights(out)
    }
}

/// Memoryless first-stage phase posterior `q(gamma_i | y_i, r_i)` under the
/// steady-state prior `theta ~ N(0, sigma_theta_sq)`.
pub fn phase_stage1_posterior(
    y: Complex64,
    r: f64,
    c: &Constellation,
    params: &CpanParams,
) -> Result<Vec<f64>> {
    let det = PhaseDetector::new(c, params.sigma_n_sq())?;
    let mut out = vec![0.0; det.n_outputs()];
    det.posterior_into(y, r, 0.0, params.sigma_theta_sq(), &mut out)?;
    Ok(out)
}

/// Later-stage phase posterior using the smoother belief `(mu, sigma_sq)`.
pub fn phase_stagek_posterior(
    y: Complex64,
    r: f64,
    belief: (f64, f64),
    c: &Constellation,
    params: &CpanParams,
) -> Result<Vec<f64>> {
    let det = PhaseDetector::new(c, params.sigma_n_sq())?;
    let mut out = vec![0.0; det.n_outputs()];
    det.posterior_into(y, r, belief.0, belief.1, &mut out)?;
    Ok(out)
}
