//! Experiment orchestration and the command-line front end.

pub mod cli;
pub mod config;
pub mod run;

pub use config::ExperimentConfig;
pub use run::{
    cmd_eval, cmd_gen_demos, cmd_reward_grid, cmd_train, cmd_train_ranking, curve_csv, evaluate_agent,
    evaluate_expert, load_demos, load_reward_model, run_pipeline, run_training, train_ranking_split, CurveRow,
    DemoSummary, EvalMetrics, GridStage, PipelineReport, RankingReport, TrainOutcome, TrainReport, CURVE_HEADER,
};
