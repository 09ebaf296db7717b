//! Model assembly, optimisation, data handling and the training loop.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod synth;
pub mod trainer;

pub use checkpoint::{Checkpoint, TrainState, CHECKPOINT_MAGIC};
pub use config::{presets, Architecture, Config, ConvConfig, HeadKind, ModelConfig, RecurrentConfig, ScheduleMetric, TrainConfig};
pub use data::{prepare, Batch, Dataset, Prepared, Utterance};
pub use metrics::{edit_distance, phoneme_error_rate, EditCounts};
pub use model::{build_model, param_count, InputLayout, Model, ParamRow, ParamTable};
pub use optim::{lr_schedule_update, LrSchedule, RmsProp};
pub use trainer::{
    decode_all, evaluate, mean_loss, train, EpochRecord, EvalReport, Scores, TrainOptions, Trainer, UtteranceResult,
};
