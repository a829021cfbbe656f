//! Reproducible experiment campaigns driven by a TOML config.

mod campaign;
mod channels;
mod config;

pub use campaign::{
    derive_seed, generate_point, run_awgn_sweep, run_campaign, AwgnRow, BaselineRow, CampaignReport, ParamsRow,
    PointData, SicRow, AWGN_FILE, MEMORYLESS_FILE, PARAMS_FILE, SIC_FILE,
};
pub use channels::{channel_models, ChannelModel, CpanModel, FiberModel};
pub use config::{
    dbm_to_watts, AwgnBlock, ChannelBlock, ConstellationBlock, CpanBlock, Diagnostic, ExperimentConfig, OutputBlock,
    Preset, SicBlock, TrainingBlock, SCHEMA_VERSION,
};
