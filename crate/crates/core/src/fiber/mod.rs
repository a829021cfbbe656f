//! Split-step fiber link: WDM transmission over the NLSE with ideal
//! distributed amplification, followed by a single-channel receiver
//! (bandpass, digital backpropagation, matched filter, downsampling).
//!
//! All signals use a circular (FFT-periodic) time window.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, SymbolSequence};
use crate::error::{Error, Result};

mod shaping;
mod ssfm;

pub use shaping::{matched_filter_downsample, shape_pulses};
pub use ssfm::{propagate_field, SplitStep};

const PLANCK: f64 = 6.626_070_15e-34;
/// Carrier frequency at 1550 nm.
pub const CARRIER_HZ: f64 = 193.414_489e12;

/// Planned forward/inverse FFTs keyed by length. Inverse transforms are
/// unnormalized.
pub struct FftCache {
    planner: FftPlanner<f64>,
    plans: HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl Default for FftCache {
    fn default() -> Self {
        FftCache {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
        }
    }
}

impl FftCache {
    fn plans(&mut self, n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
        let planner = &mut self.planner;
        self.plans
            .entry(n)
            .or_insert_with(|| (planner.plan_fft_forward(n), planner.plan_fft_inverse(n)))
            .clone()
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.plans(buf.len()).0.process(buf);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.plans(buf.len()).1.process(buf);
    }
}

/// Physical link and WDM setup. Defaults describe a 1000 km link with
/// standard single-mode fiber and five 50 GBd channels on a 50 GHz grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub length_km: f64,
    /// Split-step size of the forward propagation.
    pub step_km: f64,
    /// Split-step size of the receiver's backpropagation.
    pub dbp_step_km: f64,
    /// s^2/m
    pub beta2: f64,
    /// 1/(W m)
    pub gamma_nl: f64,
    /// Fully compensated by distributed gain; only sets the ASE level.
    pub alpha_db_per_km: f64,
    /// Accumulated ASE PSD at the receiver (W/Hz). Derived from
    /// `alpha_db_per_km` and `nsp` when absent.
    pub ase_psd: Option<f64>,
    pub nsp: f64,
    pub symbol_rate: f64,
    pub n_wdm_channels: usize,
    pub channel_spacing_hz: f64,
    pub oversampling: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            length_km: 1000.0,
            step_km: 0.1,
            dbp_step_km: 0.1,
            beta2: -21.7e-27,
            gamma_nl: 1.27e-3,
            alpha_db_per_km: 0.2,
            ase_psd: None,
            nsp: 1.0,
            symbol_rate: 50e9,
            n_wdm_channels: 5,
            channel_spacing_hz: 50e9,
            oversampling: 8,
        }
    }
}

impl LinkConfig {
    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.oversampling as f64
    }

    /// ASE PSD of ideal distributed amplification: `nsp h nu alpha L`.
    pub fn effective_ase_psd(&self) -> f64 {
        self.ase_psd.unwrap_or_else(|| {
            let alpha_per_km = self.alpha_db_per_km * std::f64::consts::LN_10 / 10.0;
            self.nsp * PLANCK * CARRIER_HZ * alpha_per_km * self.length_km
        })
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("length_km", self.length_km),
            ("alpha_db_per_km", self.alpha_db_per_km),
            ("gamma_nl", self.gamma_nl),
            ("nsp", self.nsp),
            ("channel_spacing_hz", self.channel_spacing_hz),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.step_km > 0.0 && self.dbp_step_km > 0.0) {
            return Err(Error::invalid("step sizes must be positive"));
        }
        if !(self.symbol_rate > 0.0) {
            return Err(Error::invalid("symbol_rate must be positive"));
        }
        if let Some(p) = self.ase_psd {
            if !(p >= 0.0) {
                return Err(Error::invalid("ase_psd must be nonnegative"));
            }
        }
        if self.n_wdm_channels % 2 == 0 {
            return Err(Error::invalid(format!(
                "n_wdm_channels must be odd, got {}",
                self.n_wdm_channels
            )));
        }
        if self.oversampling < 2 || !self.oversampling.is_power_of_two() {
            return Err(Error::invalid(format!(
                "oversampling must be a power of two >= 2, got {}",
                self.oversampling
            )));
        }
        let span = self.n_wdm_channels as f64 * self.channel_spacing_hz;
        if self.n_wdm_channels > 1 && self.sample_rate() < span {
            return Err(Error::invalid(format!(
                "simulation bandwidth {} Hz does not cover the WDM span {span} Hz",
                self.sample_rate()
            )));
        }
        Ok(())
    }

    /// Frequency offset of WDM channel `c`; the middle channel sits at 0.
    pub fn channel_offset(&self, c: usize) -> f64 {
        (c as f64 - (self.n_wdm_channels / 2) as f64) * self.channel_spacing_hz
    }

    fn forward_step(&self) -> SplitStep {
        SplitStep {
            sample_rate: self.sample_rate(),
            beta2: self.beta2,
            gamma: self.gamma_nl,
            length_m: self.length_km * 1e3,
            max_step_m: self.step_km * 1e3,
        }
    }

    fn backward_step(&self) -> SplitStep {
        SplitStep {
            sample_rate: self.sample_rate(),
            beta2: -self.beta2,
            gamma: -self.gamma_nl,
            length_m: self.length_km * 1e3,
            max_step_m: self.dbp_step_km * 1e3,
        }
    }
}

/// Uniformly sampled complex baseband signal.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    /// Carrier offset of this signal within the WDM comb.
    pub center_freq_offset: f64,
}

fn frequency_bin(offset: f64, n: usize, sample_rate: f64) -> Result<i64> {
    let exact = offset * n as f64 / sample_rate;
    let bin = exact.round();
    if (exact - bin).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "channel offset {offset} Hz is not on the {n}-point FFT grid"
        )));
    }
    Ok(bin as i64)
}

/// Multiplexes the WDM channels and propagates them through the link.
/// `tx[c]` is the baseband signal of channel `c`, placed at
/// [`LinkConfig::channel_offset`].
pub fn propagate(cfg: &LinkConfig, tx: &[SampledSignal], seed: u64) -> Result<SampledSignal> {
    let mut fft = FftCache::default();
    propagate_with(&mut fft, cfg, tx, seed)
}

fn propagate_with(
    fft: &mut FftCache,
    cfg: &LinkConfig,
    tx: &[SampledSignal],
    seed: u64,
) -> Result<SampledSignal> {
    cfg.validate()?;
    if tx.len() != cfg.n_wdm_channels {
        return Err(Error::invalid(format!(
            "{} transmit signals for {} WDM channels",
            tx.len(),
            cfg.n_wdm_channels
        )));
    }
    let n = tx[0].samples.len();
    let fs = cfg.sample_rate();
    if tx.iter().any(|s| s.samples.len() != n || (s.sample_rate - fs).abs() > 1e-6 * fs) {
        return Err(Error::invalid("WDM signals must share length and sample rate"));
    }
    let mut field = vec![Complex64::new(0.0, 0.0); n];
    for (c, sig) in tx.iter().enumerate() {
        let bin = frequency_bin(cfg.channel_offset(c), n, fs)?.rem_euclid(n as i64) as usize;
        for (k, (acc, v)) in field.iter_mut().zip(&sig.samples).enumerate() {
            let turns = ((bin * k) % n) as f64 / n as f64;
            *acc += v * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * turns);
        }
    }
    let p = cfg.forward_step();
    let var_per_step = cfg.effective_ase_psd() * fs / p.n_steps() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (var_per_step > 0.0).then_some((var_per_step, &mut rng));
    propagate_field(fft, &mut field, &p, noise)?;
    Ok(SampledSignal {
        samples: field,
        sample_rate: fs,
        center_freq_offset: 0.0,
    })
}

/// Bandpass to the center channel, backpropagate it, matched-filter and
/// downsample to one sample per symbol.
pub fn receive(cfg: &LinkConfig, rx: &SampledSignal) -> Result<Vec<Complex64>> {
    let mut fft = FftCache::default();
    receive_with(&mut fft, cfg, rx)
}

fn receive_with(fft: &mut FftCache, cfg: &LinkConfig, rx: &SampledSignal) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let n = rx.samples.len();
    let fs = cfg.sample_rate();
    let mut field = rx.samples.clone();
    if cfg.n_wdm_channels > 1 {
        let half_band = 0.5 * cfg.channel_spacing_hz.min(fs);
        fft.forward(&mut field);
        for (k, v) in field.iter_mut().enumerate() {
            let f = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 } * fs / n as f64;
            if !(-half_band..half_band).contains(&f) {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v /= n as f64;
            }
        }
        fft.inverse(&mut field);
    }
    propagate_field::<ChaCha8Rng>(fft, &mut field, &cfg.backward_step(), None)?;
    shaping::matched_filter_with(
        fft,
        &SampledSignal {
            samples: field,
            sample_rate: fs,
            center_freq_offset: 0.0,
        },
        cfg.symbol_rate,
    )
}

/// One end-to-end link run: independent symbols on every WDM channel, the
/// received center channel and its transmitted symbols.
#[derive(Clone, Debug)]
pub struct LinkRun {
    pub tx: SymbolSequence,
    pub y: Vec<Complex64>,
}

/// Transmits `n_symbols` drawn from `c` on each WDM channel and returns the
/// center channel after the receiver chain. Deterministic in `seed`.
pub fn simulate_link(cfg: &LinkConfig, c: &Constellation, n_symbols: usize, seed: u64) -> Result<LinkRun> {
    let mut fft = FftCache::default();
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut center = None;
    let mut tx = Vec::with_capacity(cfg.n_wdm_channels);
    for ch in 0..cfg.n_wdm_channels {
        let s = c.sample_with(n_symbols, &mut seeds);
        let mut sig = shaping::shape_pulses_with(&mut fft, &s.values, cfg.oversampling, cfg.symbol_rate)?;
        sig.center_freq_offset = cfg.channel_offset(ch);
        if ch == cfg.n_wdm_channels / 2 {
            center = Some(s);
        }
        tx.push(sig);
    }
    let noise_seed = rand::Rng::random(&mut seeds);
    let rx = propagate_with(&mut fft, cfg, &tx, noise_seed)?;
    let y = receive_with(&mut fft, cfg, &rx)?;
    Ok(LinkRun {
        tx: center.expect("odd channel count has a center"),
        y,
    })
}
