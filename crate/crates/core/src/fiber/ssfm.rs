//! Symmetric split-step Fourier integration of the scalar NLSE
//! `du/dz = -j beta2/2 d^2u/dt^2 + j gamma |u|^2 u`, loss fully compensated.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::FftCache;
use crate::error::{Error, Result};

/// Parameters of one split-step run over a sampled field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitStep {
    pub sample_rate: f64,
    /// Group velocity dispersion, s^2/m.
    pub beta2: f64,
    /// Kerr coefficient, 1/(W m).
    pub gamma: f64,
    pub length_m: f64,
    /// Upper bound on the step; the actual step divides the length evenly.
    pub max_step_m: f64,
}

impl SplitStep {
    pub fn n_steps(&self) -> usize {
        ((self.length_m / self.max_step_m).ceil() as usize).max(1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(self.length_m >= 0.0) || !(self.max_step_m > 0.0) {
            return Err(Error::invalid("length must be >= 0 and step > 0"));
        }
        Ok(())
    }
}

/// Angular frequency of each FFT bin.
pub(crate) fn omega_grid(n: usize, sample_rate: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let kk = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
            2.0 * PI * kk * sample_rate / n as f64
        })
        .collect()
}

/// Integrates `field` in place. When `noise` is given, circular Gaussian
/// noise of the given per-sample variance is added after every step.
pub fn propagate_field<R: Rng + ?Sized>(
    fft: &mut FftCache,
    field: &mut [Complex64],
    p: &SplitStep,
    mut noise: Option<(f64, &mut R)>,
) -> Result<()> {
    p.validate()?;
    let n = field.len();
    if n == 0 || p.length_m == 0.0 {
        return Ok(());
    }
    let steps = p.n_steps();
    let dz = p.length_m / steps as f64;
    let omega = omega_grid(n, p.sample_rate);
    let disp = |h: f64| -> Vec<Complex64> {
        omega
            .iter()
            .map(|w| Complex64::from_polar(1.0 / n as f64, 0.5 * p.beta2 * w * w * h))
            .collect()
    };
    let half = disp(0.5 * dz);
    let full = disp(dz);
    let mut linear = |field: &mut [Complex64], op: &[Complex64]| {
        fft.forward(field);
        for (v, h) in field.iter_mut().zip(op) {
            *v *= h;
        }
        fft.inverse(field);
    };

    let dispersive = p.beta2 != 0.0;
    let mut pending_half = dispersive;
    for step in 0..steps {
        if pending_half {
            linear(field, &half);
            pending_half = false;
        }
        if p.gamma != 0.0 {
            for v in field.iter_mut() {
                *v *= Complex64::from_polar(1.0, p.gamma * v.norm_sqr() * dz);
            }
        }
        if let Some((var, rng)) = noise.as_mut() {
            let sd = (*var / 2.0).sqrt();
            for v in field.iter_mut() {
                let a: f64 = StandardNormal.sample(*rng);
                let b: f64 = StandardNormal.sample(*rng);
                *v += Complex64::new(a, b) * sd;
            }
        }
        if dispersive {
            if step + 1 == steps {
                linear(field, &half);
            } else {
                linear(field, &full);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::ThreadRng;

    fn gaussian_pulse(n: usize, dt: f64, t0: f64) -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                let t = (k as f64 - n as f64 / 2.0) * dt;
                Complex64::new((-t * t / (2.0 * t0 * t0)).exp(), 0.0)
            })
            .collect()
    }

    fn rms_width(u: &[Complex64], dt: f64) -> f64 {
        let p: Vec<f64> = u.iter().map(|v| v.norm_sqr()).collect();
        let e: f64 = p.iter().sum();
        let mean = p.iter().enumerate().map(|(k, w)| k as f64 * w).sum::<f64>() / e;
        let var = p.iter().enumerate().map(|(k, w)| (k as f64 - mean).powi(2) * w).sum::<f64>() / e;
        var.sqrt() * dt
    }

    #[test]
    fn dispersion_only_is_all_pass() {
        let n = 1024;
        let mut u: Vec<Complex64> = (0..n).map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let mut spec_in = u.clone();
        let mut fft = FftCache::default();
        fft.forward(&mut spec_in);
        let p = SplitStep { sample_rate: 400e9, beta2: -2.17e-26, gamma: 0.0, length_m: 50e3, max_step_m: 1e3 };
        propagate_field::<ThreadRng>(&mut fft, &mut u, &p, None).unwrap();
        let mut spec_out = u.clone();
        fft.forward(&mut spec_out);
        for (a, b) in spec_in.iter().zip(&spec_out) {
            assert!((a.norm() - b.norm()).abs() < 1e-9 * a.norm().max(1.0));
        }
    }

    #[test]
    fn gaussian_broadening_matches_closed_form() {
        let n = 1 << 14;
        let dt = 0.5e-12;
        let t0 = 20e-12;
        let beta2 = -2.17e-26;
        let z = 100e3;
        let mut u = gaussian_pulse(n, dt, t0);
        let w0 = rms_width(&u, dt);
        let p = SplitStep { sample_rate: 1.0 / dt, beta2, gamma: 0.0, length_m: z, max_step_m: 100.0 };
        propagate_field::<ThreadRng>(&mut FftCache::default(), &mut u, &p, None).unwrap();
        let expect = w0 * (1.0 + (beta2 * z / (t0 * t0)).powi(2)).sqrt();
        let got = rms_width(&u, dt);
        assert!(((got - expect) / expect).abs() < 1e-3, "{got} vs {expect}");
    }

    #[test]
    fn kerr_only_is_pure_phase_rotation() {
        let n = 256;
        let u0: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(0.01 + 0.02 * ((k % 7) as f64), k as f64)).collect();
        let mut u = u0.clone();
        let gamma = 1.27e-3;
        let len = 80e3;
        let p = SplitStep { sample_rate: 1e11, beta2: 0.0, gamma, length_m: len, max_step_m: 1e3 };
        propagate_field::<ThreadRng>(&mut FftCache::default(), &mut u, &p, None).unwrap();
        for (a, b) in u0.iter().zip(&u) {
            let expect = a * Complex64::from_polar(1.0, gamma * a.norm_sqr() * len);
            assert!((expect - b).norm() < 1e-6);
        }
    }
}
