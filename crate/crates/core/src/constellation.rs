//! Probabilistically shaped star-QAM constellations.
//!
//! A circularly-symmetric Gaussian is discretized first in amplitude (a set of
//! rings with a Rayleigh-shaped prior) and then in phase (`n_phases` equally
//! spaced points per ring, uniform prior). Amplitude and phase are drawn
//! independently, which is what lets the receiver detect them in separate
//! stages.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{RadiusPlacement, UniformRadii};

/// Default maximum radius in units of `sqrt(ptx)`.
pub const DEFAULT_TRUNCATION: f64 = 3.2;

/// Shaped star-QAM alphabet with independent radial and phase priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstellationRecord", into = "ConstellationRecord")]
pub struct Constellation {
    radii: Vec<f64>,
    radial_pmf: Vec<f64>,
    n_phases: usize,
    ptx: f64,
}

/// On-disk form; validated on the way in.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ConstellationRecord {
    radii: Vec<f64>,
    radial_pmf: Vec<f64>,
    n_phases: usize,
    ptx: f64,
}

impl TryFrom<ConstellationRecord> for Constellation {
    type Error = Error;

    fn try_from(r: ConstellationRecord) -> Result<Self> {
        Constellation::from_parts(r.radii, r.radial_pmf, r.n_phases, r.ptx)
    }
}

impl From<Constellation> for ConstellationRecord {
    fn from(c: Constellation) -> Self {
        ConstellationRecord {
            radii: c.radii,
            radial_pmf: c.radial_pmf,
            n_phases: c.n_phases,
            ptx: c.ptx,
        }
    }
}

impl Constellation {
    /// Builds a constellation from explicit parts, checking every invariant.
    /// The average power must already equal `ptx`.
    pub fn from_parts(
        radii: Vec<f64>,
        radial_pmf: Vec<f64>,
        n_phases: usize,
        ptx: f64,
    ) -> Result<Self> {
        if radii.is_empty() || radii.len() != radial_pmf.len() {
            return Err(Error::invalid(format!(
                "radii ({}) and radial_pmf ({}) must be nonempty and equally long",
                radii.len(),
                radial_pmf.len()
            )));
        }
        if n_phases == 0 {
            return Err(Error::invalid("n_phases must be at least 1"));
        }
        if !(ptx > 0.0 && ptx.is_finite()) {
            return Err(Error::invalid(format!("ptx must be positive, got {ptx}")));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("radii must be positive and strictly increasing"));
        }
        if radial_pmf.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invalid("radial_pmf entries must be positive"));
        }
        let total: f64 = radial_pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("radial_pmf sums to {total}, not 1")));
        }
        let power: f64 = radii
            .iter()
            .zip(&radial_pmf)
            .map(|(r, p)| p * r * r)
            .sum();
        if ((power - ptx) / ptx).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "average power {power} does not match ptx {ptx}"
            )));
        }
        Ok(Constellation {
            radii,
            radial_pmf,
            n_phases,
            ptx,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn radial_pmf(&self) -> &[f64] {
        &self.radial_pmf
    }

    pub fn n_rings(&self) -> usize {
        self.radii.len()
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    pub fn ptx(&self) -> f64 {
        self.ptx
    }

    /// Number of points in the full alphabet.
    pub fn len(&self) -> usize {
        self.radii.len() * self.n_phases
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Phase of index `k`, in radians.
    #[inline]
    pub fn phase(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_phases as f64
    }

    pub fn phase_set(&self) -> Vec<f64> {
        (0..self.n_phases).map(|k| self.phase(k)).collect()
    }

    #[inline]
    pub fn point(&self, radius_idx: usize, phase_idx: usize) -> Complex64 {
        Complex64::from_polar(self.radii[radius_idx], self.phase(phase_idx))
    }

    /// Natural-log prior of each ring.
    pub fn log_radial_pmf(&self) -> Vec<f64> {
        self.radial_pmf.iter().map(|p| p.ln()).collect()
    }

    /// Radial and phase entropies in bits.
    pub fn source_entropy(&self) -> (f64, f64) {
        let h_radius = -self
            .radial_pmf
            .iter()
            .map(|&p| if p > 0.0 { p * p.log2() } else { 0.0 })
            .sum::<f64>();
        // -0.0 for the degenerate single-ring case
        (h_radius.max(0.0), (self.n_phases as f64).log2())
    }

    /// Total source entropy `H(X)` in bits.
    pub fn entropy_bits(&self) -> f64 {
        let (hr, hp) = self.source_entropy();
        hr + hp
    }

    /// Draws `n` i.i.d. symbols. Deterministic in `seed`.
    pub fn sample_sequence(&self, n: usize, seed: u64) -> Result<SymbolSequence> {
        if n == 0 {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.sample_with(n, &mut rng))
    }

    pub(crate) fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SymbolSequence {
        let radial = WeightedIndex::new(&self.radial_pmf).expect("pmf validated at construction");
        let mut radius_idx = Vec::with_capacity(n);
        let mut phase_idx = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let ri = radial.sample(rng);
            let pi = rng.random_range(0..self.n_phases);
            radius_idx.push(ri);
            phase_idx.push(pi);
            values.push(self.point(ri, pi));
        }
        SymbolSequence {
            radius_idx,
            phase_idx,
            values,
        }
    }
}

/// Transmitted symbols with the ring/phase indices they were built from.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSequence {
    pub radius_idx: Vec<usize>,
    pub phase_idx: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SymbolSequence {
    /// Rebuilds a sequence from indices, recomputing the complex values.
    pub fn from_indices(
        c: &Constellation,
        radius_idx: Vec<usize>,
        phase_idx: Vec<usize>,
    ) -> Result<Self> {
        if radius_idx.len() != phase_idx.len() {
            return Err(Error::invalid("index vectors differ in length"));
        }
        if radius_idx.iter().any(|&r| r >= c.n_rings()) || phase_idx.iter().any(|&p| p >= c.n_phases())
        {
            return Err(Error::invalid("symbol index outside the constellation"));
        }
        let values = radius_idx
            .iter()
            .zip(&phase_idx)
            .map(|(&r, &p)| c.point(r, p))
            .collect();
        Ok(SymbolSequence {
            radius_idx,
            phase_idx,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat alphabet index `radius_idx * n_phases + phase_idx`.
    pub fn joint_index(&self, i: usize, n_phases: usize) -> usize {
        self.radius_idx[i] * n_phases + self.phase_idx[i]
    }
}

/// Builds a shaped star-QAM constellation with uniformly spaced rings.
pub fn build_star_qam(
    n_rings: usize,
    n_phases: usize,
    ptx: f64,
    truncation: f64,
) -> Result<Constellation> {
    build_star_qam_with(&UniformRadii, n_rings, n_phases, ptx, truncation)
}

/// Builds a shaped star-QAM constellation with the given ring placement, then
/// rescales the radii so the average power is exactly `ptx`.
pub fn build_star_qam_with(
    placement: &dyn RadiusPlacement,
    n_rings: usize,
    n_phases: usize,
    ptx: f64,
    truncation: f64,
) -> Result<Constellation> {
    if n_rings == 0 || n_phases == 0 {
        return Err(Error::invalid("n_rings and n_phases must be at least 1"));
    }
    if !(ptx > 0.0 && ptx.is_finite()) {
        return Err(Error::invalid(format!("ptx must be positive, got {ptx}")));
    }
    if !(truncation > 0.0 && truncation.is_finite()) {
        return Err(Error::invalid(format!(
            "truncation must be positive, got {truncation}"
        )));
    }
    let (radii, weights) = placement.place(n_rings, ptx, truncation)?;
    let total: f64 = weights.iter().sum();
    let pmf: Vec<f64> = weights.iter().map(|w| w / total).collect();
    if pmf.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::NumericUnderflow(format!(
            "radial pmf underflows to zero; reduce truncation ({truncation})"
        )));
    }
    let power: f64 = radii.iter().zip(&pmf).map(|(r, p)| p * r * r).sum();
    let scale = (ptx / power).sqrt();
    let radii = radii.into_iter().map(|r| r * scale).collect();
    Constellation::from_parts(radii, pmf, n_phases, ptx)
}
