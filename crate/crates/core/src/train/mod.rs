//! Optimization: loss, Adam, densification, and the training loop.

mod adam;
mod config;
pub(crate) mod densify;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use config::{key_spec, ConfigValue, KeyKind, KeySpec, TrainConfig, CONFIG_KEYS};
pub use densify::{densify_and_prune, split_gaussian, DensifyOutcome, DensifyParams, DensifyStats, Provenance, SPLIT_SCALE_DIVISOR};
pub use loss::loss;
pub use trainer::{position_lr, train, train_from, write_log_csv, IterationLog, TrainOutput, LOG_CSV_HEADER};
