//! Environments, scripted experts and action-free demonstration datasets.

pub mod dataset;
pub mod env;
pub mod expert;

pub use dataset::{read_dataset, subsample_trajectory, write_dataset, ExpertDataset, Split, Trajectory};
pub use env::{env_reset, env_step, EnvKind, EnvSpec, EnvState, Point, Region, Segment, StepOutcome};
pub use expert::{expert_rollout, generate_demos, generate_demos_counted, ScriptedExpert};
