//! Experiment runner: JSON configuration, training and utilization
//! campaigns, sweeps over the codebook size and CSV output.
//!
//! All randomness flows from the configured master seed through named
//! substreams, so a (config, seed) pair fixes every byte written.

mod config;
mod run;

pub use config::{
    dbm_to_watts, load_config, DirectionCodebookConfig, Experiment, ExperimentConfig, TrainingConfig,
    UtilizationConfig,
};
pub use run::{
    load_checkpoints, moving_average, run_training, run_utilization, save_checkpoints, sweep_m, write_gamma_map,
    write_sweep, write_utilization, DirectionRecord, Manifest, NormalizationRecord, Scheme, TrainingReport,
    UtilizationReport, GAMMA_HEADER, SUMMARY_HEADER, TRAINING_HEADER, UTILIZATION_HEADER,
};
