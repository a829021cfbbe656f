//! Name-keyed registries of interchangeable strategies.
//!
//! Ring placement rules and channel models are trait objects registered under
//! a stable name so a config file or CLI flag can select them at runtime.

use std::sync::Arc;

use crate::error::{Error, Result};

/// A set of named trait objects of one kind.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(&'static str, Arc<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: Vec::new(),
        }
    }

    /// Registers `item` under `name`, replacing any earlier entry.
    pub fn register(&mut self, name: &'static str, item: Arc<T>) {
        if let Some(slot) = self.entries.iter_mut().find(|(n, _)| *n == name) {
            slot.1 = item;
        } else {
            self.entries.push((name, item));
        }
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, item)| Arc::clone(item))
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_owned(),
                available: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| *n == name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }
}

/// Rule for placing the discrete rings of a star-QAM constellation.
///
/// Returns unscaled radii (strictly increasing, positive) and unnormalized
/// ring weights; the caller normalizes and rescales for exact power.
pub trait RadiusPlacement: Send + Sync {
    fn name(&self) -> &'static str;

    fn place(&self, n_rings: usize, ptx: f64, truncation: f64) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Rings at `k * d`, `d = truncation * sqrt(ptx) / n_rings`, weighted by the
/// Rayleigh shape `r * exp(-r^2 / ptx)`.
#[derive(Debug, Default, Clone, Copy)]
pub struct UniformRadii;

impl RadiusPlacement for UniformRadii {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn place(&self, n_rings: usize, ptx: f64, truncation: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let step = truncation * ptx.sqrt() / n_rings as f64;
        let radii: Vec<f64> = (1..=n_rings).map(|k| k as f64 * step).collect();
        let weights = radii.iter().map(|&r| r * (-r * r / ptx).exp()).collect();
        Ok((radii, weights))
    }
}

/// Equal-probability rings: the truncated Rayleigh distribution is split into
/// `n_rings` bins of equal mass and each ring sits at its bin's median.
#[derive(Debug, Default, Clone, Copy)]
pub struct QuantileRadii;

impl RadiusPlacement for QuantileRadii {
    fn name(&self) -> &'static str {
        "quantile"
    }

    fn place(&self, n_rings: usize, ptx: f64, truncation: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        // Rayleigh CDF with E[r^2] = ptx: F(r) = 1 - exp(-r^2 / ptx)
        let mass = -(-truncation * truncation).exp_m1();
        let radii = (0..n_rings)
            .map(|k| {
                let u = mass * (k as f64 + 0.5) / n_rings as f64;
                (-ptx * (-u).ln_1p()).sqrt()
            })
            .collect();
        Ok((radii, vec![1.0; n_rings]))
    }
}

/// Built-in ring placement rules.
pub fn placements() -> Registry<dyn RadiusPlacement> {
    let mut reg: Registry<dyn RadiusPlacement> = Registry::new("radius placement");
    reg.register("uniform", Arc::new(UniformRadii));
    reg.register("quantile", Arc::new(QuantileRadii));
    reg
}
