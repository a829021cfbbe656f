use std::sync::Arc;

use super::config::ExperimentConfig;
use crate::constellation::Constellation;
use crate::cpan::{simulate, CpanParams};
use crate::dataset::DatasetSequence;
use crate::error::{Error, Result};
use crate::fiber::simulate_link;
use crate::registry::Registry;

/// Source of paired (x, y) sequences for a campaign.
pub trait ChannelModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// `(field, message)` findings for this model's config block.
    fn diagnostics(&self, cfg: &ExperimentConfig) -> Vec<(String, String)>;

    /// One transmitted sequence of `n` symbols and its channel output.
    fn transmit(
        &self,
        cfg: &ExperimentConfig,
        c: &Constellation,
        n: usize,
        seed: u64,
    ) -> Result<DatasetSequence>;

    /// Receiver parameters known without training, or `None` to fit them.
    fn known_params(&self, cfg: &ExperimentConfig, ptx_w: f64) -> Result<Option<CpanParams>>;
}

pub struct CpanModel;

impl CpanModel {
    fn block(cfg: &ExperimentConfig) -> Result<&super::config::CpanBlock> {
        cfg.channel
            .cpan
            .as_ref()
            .ok_or_else(|| Error::Config("channel.cpan block is required for mode `cpan`".into()))
    }
}

impl ChannelModel for CpanModel {
    fn name(&self) -> &'static str {
        "cpan"
    }

    fn diagnostics(&self, cfg: &ExperimentConfig) -> Vec<(String, String)> {
        let Some(b) = &cfg.channel.cpan else {
            return vec![("channel.cpan".into(), "block is required for mode `cpan`".into())];
        };
        let mut out = b.diagnostics();
        if b.fit && cfg.training.n_train_seqs == 0 {
            out.push(("training.n_train_seqs".into(), "fitting needs training data".into()));
        }
        out
    }

    fn transmit(
        &self,
        cfg: &ExperimentConfig,
        c: &Constellation,
        n: usize,
        seed: u64,
    ) -> Result<DatasetSequence> {
        let params = Self::block(cfg)?.params_at(c.ptx())?;
        let x = c.sample_sequence(n, seed)?;
        let y = simulate(&params, &x.values, seed ^ 0x9e37_79b9_7f4a_7c15)?.y;
        Ok(DatasetSequence { x, y })
    }

    fn known_params(&self, cfg: &ExperimentConfig, ptx_w: f64) -> Result<Option<CpanParams>> {
        let b = Self::block(cfg)?;
        if b.fit {
            Ok(None)
        } else {
            b.params_at(ptx_w).map(Some)
        }
    }
}

pub struct FiberModel;

impl ChannelModel for FiberModel {
    fn name(&self) -> &'static str {
        "fiber"
    }

    fn diagnostics(&self, cfg: &ExperimentConfig) -> Vec<(String, String)> {
        let mut out = Vec::new();
        match &cfg.channel.fiber {
            Some(link) => {
                if let Err(e) = link.validate() {
                    out.push(("channel.fiber".into(), e.to_string()));
                }
            }
            None => out.push(("channel.fiber".into(), "block is required for mode `fiber`".into())),
        }
        if cfg.training.n_train_seqs == 0 {
            out.push(("training.n_train_seqs".into(), "fiber mode fits parameters from training data".into()));
        }
        out
    }

    fn transmit(
        &self,
        cfg: &ExperimentConfig,
        c: &Constellation,
        n: usize,
        seed: u64,
    ) -> Result<DatasetSequence> {
        let link = cfg
            .channel
            .fiber
            .as_ref()
            .ok_or_else(|| Error::Config("channel.fiber block is required for mode `fiber`".into()))?;
        let run = simulate_link(link, c, n, seed)?;
        Ok(DatasetSequence { x: run.tx, y: run.y })
    }

    fn known_params(&self, _: &ExperimentConfig, _: f64) -> Result<Option<CpanParams>> {
        Ok(None)
    }
}

pub fn channel_models() -> Registry<dyn ChannelModel> {
    let mut r: Registry<dyn ChannelModel> = Registry::new("channel model");
    r.register("cpan", Arc::new(CpanModel));
    r.register("fiber", Arc::new(FiberModel));
    r
}
