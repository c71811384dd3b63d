//! Experiment orchestration: configuration files, training/evaluation
//! entry points, metric logs, and CSV/SVG emission.

mod config;
mod eval;
mod gradbattery;
mod mapgen;
mod metrics;
mod plot;
mod train;

pub use config::{
    ArmsSection, BackboneName, EnvSection, EvalModeName, EvalSection, ExperimentConfig,
    MapKindName, MapSection, PpoSection, ShapingModeName, TrainSection,
};
pub use eval::{emit_eval_csv, run_episode, run_eval, EpisodeStats, EvalMode, EvalReport, MapEval};
pub use gradbattery::{run_grad_battery, GradBatteryReport};
pub use mapgen::gen_eval_maps;
pub use metrics::{fmt_real, MetricLog, MetricRecord, ShapingPhaseStats, METRICS_HEADER};
pub use plot::{emit_plot, read_xy_column, Geometry, PlotModel, PlotSeries, SeriesStats};
pub use train::{
    load_policy_checkpoint, load_shaping_checkpoint, run_training, save_policy_checkpoint,
    save_shaping_checkpoint, write_metrics, SeedOutputs, TrainOutputs,
};

use crate::gridworld::GridError;
use crate::marl::MarlError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("plot error: {0}")]
    Plot(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] GridError),
    #[error(transparent)]
    Marl(#[from] MarlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
