//! Seeded end-to-end experiments: cross-receiver classification grids,
//! feature-stability statistics and reference-device sweeps.

pub mod bench;
pub mod config;
pub mod experiment;
pub mod pipeline;
pub mod stability;
pub mod stats;
pub mod sweep;

pub use config::{ChannelConfig, ConfigError, ExperimentConfig, ExtractorFamily, ProfileSet, ReceiverGroup, SnrSetting};
pub use experiment::{run_experiment, AccuracyMatrix, ExperimentOutput, ExperimentReport, HarnessError};
pub use stability::{run_feature_stability, StabilityReport};
pub use sweep::{run_reference_sweep, SweepReport};
pub use bench::{run_bench, write_bench, BenchOutput, BenchReport};
