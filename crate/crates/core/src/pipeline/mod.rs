//! Config-driven orchestration of all stages and the run manifest.

mod config;
mod manifest;
mod run;

pub use config::{
    BackboneConfig, CoefficientSource, ExtrapolationConfig, FirmConfig, Inputs, PipelineConfig,
    RegressionConfig, TopicConfig, TradeConfig, EU27,
};
pub use manifest::{ArtifactEntry, Manifest};
pub use run::{run, RunReport, Stage, StageReport, StageStatus};
