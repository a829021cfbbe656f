use num_complex::Complex64;

use super::detect::{AmplitudeDetector, PhaseDetector};
use super::smoother::{phase_smoother, BeliefMode};
use super::{PosteriorTable, SicSchedule};
use crate::constellation::{Constellation, SymbolSequence};
use crate::cpan::CpanParams;
use crate::error::{Error, Result};

/// Posteriors produced by one phase stage, one row per owned symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct StagePosterior {
    /// 1-based stage number.
    pub stage: usize,
    pub symbols: Vec<usize>,
    pub table: PosteriorTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SicOutput {
    /// `q(r_i | y_i)` for every symbol.
    pub amplitude: PosteriorTable,
    pub phases: Vec<StagePosterior>,
}

/// Runs the amplitude stage and all phase stages of `schedule`.
///
/// Decoding between stages is taken to be error-free, so later stages
/// condition on the true radii and on the true phases of earlier stages.
pub fn run_sic(
    y: &[Complex64],
    truth: &SymbolSequence,
    schedule: SicSchedule,
    c: &Constellation,
    params: &CpanParams,
    mode: BeliefMode,
) -> Result<SicOutput> {
    let n = y.len();
    if truth.len() != n {
        return Err(Error::invalid(format!(
            "received {n} symbols but truth has {}",
            truth.len()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("empty sequence"));
    }

    let amp = AmplitudeDetector::new(c, params.sigma_n_sq())?;
    let mut amplitude = PosteriorTable::with_capacity(c.n_rings(), n);
    for &yi in y {
        amp.posterior_into(yi, amplitude.push_row())?;
    }

    let radii: Vec<f64> = truth.radius_idx.iter().map(|&k| c.radii()[k]).collect();
    let det = PhaseDetector::new(c, params.sigma_n_sq())?;
    let mut phases = Vec::with_capacity(schedule.n_stages());
    for stage in 1..=schedule.n_stages() {
        let symbols = schedule.symbols_of_stage(stage, n);
        let mut table = PosteriorTable::with_capacity(c.n_phases(), symbols.len());
        if stage == 1 {
            for &i in &symbols {
                det.posterior_into(y[i], radii[i], 0.0, params.sigma_theta_sq(), table.push_row())?;
            }
        } else {
            let known: Vec<Option<f64>> = (0..n)
                .map(|i| (schedule.stage_of(i) < stage).then(|| c.phase(truth.phase_idx[i])))
                .collect();
            let belief = phase_smoother(y, &radii, &known, params, mode)?.belief;
            for &i in &symbols {
                let (mu, var) = belief.get(i);
                det.posterior_into(y[i], radii[i], mu, var, table.push_row())?;
            }
        }
        phases.push(StagePosterior {
            stage,
            symbols,
            table,
        });
    }
    Ok(SicOutput { amplitude, phases })
}
