//! Ideal band-limited (periodic sinc) pulse shaping and matched filtering.
//!
//! Both operate on the DFT grid: the `n` symbol-rate bins occupy frequencies
//! `[-R/2, R/2)` (for even `n` the Nyquist bin sits at `-R/2`), everything
//! else is zero. Shaping followed by matched filtering and downsampling is
//! the identity, and shaping preserves average power exactly.

use num_complex::Complex64;

use super::{FftCache, SampledSignal};
use crate::error::{Error, Result};

/// Number of non-negative frequency bins of an `n`-point symbol spectrum.
fn positive_bins(n: usize) -> usize {
    n.div_ceil(2)
}

/// Shapes symbols into a signal with `oversampling` samples per symbol.
pub fn shape_pulses(x: &[Complex64], oversampling: usize, symbol_rate: f64) -> Result<SampledSignal> {
    let mut fft = FftCache::default();
    shape_pulses_with(&mut fft, x, oversampling, symbol_rate)
}

pub(crate) fn shape_pulses_with(
    fft: &mut FftCache,
    x: &[Complex64],
    oversampling: usize,
    symbol_rate: f64,
) -> Result<SampledSignal> {
    if oversampling < 2 {
        return Err(Error::invalid(format!(
            "oversampling must be at least 2, got {oversampling}"
        )));
    }
    if x.is_empty() {
        return Err(Error::invalid("no symbols to shape"));
    }
    if !(symbol_rate > 0.0) {
        return Err(Error::invalid("symbol rate must be positive"));
    }
    let n = x.len();
    let total = n * oversampling;
    let mut spectrum = x.to_vec();
    fft.forward(&mut spectrum);

    let pos = positive_bins(n);
    let mut wide = vec![Complex64::new(0.0, 0.0); total];
    wide[..pos].copy_from_slice(&spectrum[..pos]);
    wide[total - (n - pos)..].copy_from_slice(&spectrum[pos..]);
    fft.inverse(&mut wide);
    // unnormalized inverse of length N, spectrum scaled by N/n
    let scale = 1.0 / n as f64;
    for v in wide.iter_mut() {
        *v *= scale;
    }
    Ok(SampledSignal {
        samples: wide,
        sample_rate: symbol_rate * oversampling as f64,
        center_freq_offset: 0.0,
    })
}

/// Applies the brick-wall matched filter of bandwidth `symbol_rate` and
/// samples once per symbol.
pub fn matched_filter_downsample(sig: &SampledSignal, symbol_rate: f64) -> Result<Vec<Complex64>> {
    let mut fft = FftCache::default();
    matched_filter_with(&mut fft, sig, symbol_rate)
}

pub(crate) fn matched_filter_with(
    fft: &mut FftCache,
    sig: &SampledSignal,
    symbol_rate: f64,
) -> Result<Vec<Complex64>> {
    let ratio = sig.sample_rate / symbol_rate;
    let oversampling = ratio.round() as usize;
    if oversampling < 1 || (ratio - oversampling as f64).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "sample rate {} is not an integer multiple of the symbol rate {symbol_rate}",
            sig.sample_rate
        )));
    }
    let total = sig.samples.len();
    if total % oversampling != 0 {
        return Err(Error::invalid("sample count is not a whole number of symbols"));
    }
    let n = total / oversampling;
    let mut wide = sig.samples.clone();
    fft.forward(&mut wide);
    let pos = positive_bins(n);
    let mut spectrum = Vec::with_capacity(n);
    spectrum.extend_from_slice(&wide[..pos]);
    spectrum.extend_from_slice(&wide[total - (n - pos)..]);
    fft.inverse(&mut spectrum);
    let scale = 1.0 / total as f64;
    for v in spectrum.iter_mut() {
        *v *= scale;
    }
    Ok(spectrum)
}
