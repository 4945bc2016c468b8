//! Command-line interface: `gen-demos`, `train-ranking`, `train`, `eval`
//! and `reward-grid`, with global `--config`, `--seed` and `--out` flags.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::config::ExperimentConfig;
use super::run::{cmd_eval, cmd_gen_demos, cmd_reward_grid, cmd_train, cmd_train_ranking, GridStage};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "rankreward", about = "Reward learning from action-free demonstrations")]
pub struct Cli {
    /// TOML experiment config; defaults apply to missing keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Pre,
    Post,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate scripted demonstrations into <out>/demos.jsonl.
    GenDemos,
    /// Train the ranking model on <out>/demos.jsonl.
    TrainRanking,
    /// Run joint classifier and policy training.
    Train,
    /// Evaluate the trained agent with a deterministic policy.
    Eval {
        #[arg(long)]
        episodes: Option<usize>,
        /// Evaluate the scripted expert instead of the agent.
        #[arg(long)]
        expert: bool,
    },
    /// Export the reward landscape over the unit square.
    RewardGrid {
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, value_enum, default_value = "post")]
        stage: Stage,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<()> {
    let config = load(cli)?;
    match &cli.command {
        Command::GenDemos => {
            let s = cmd_gen_demos(&config)?;
            println!(
                "trajectories={} mean_length={:.2} success_rate={:.3}",
                s.n_trajectories, s.mean_length, s.success_rate
            );
        }
        Command::TrainRanking => {
            let r = cmd_train_ranking(&config)?;
            println!(
                "train_trajectories={} eval_trajectories={} train_tau={:.4} held_out_tau={:.4}",
                r.n_train, r.n_eval, r.train_tau, r.held_out_tau
            );
        }
        Command::Train => {
            let r = cmd_train(&config)?;
            let last = r.curve.last();
            println!(
                "env_steps={} episodes={} disc_updates={} agent_updates={} final_success_rate={}",
                config.total_steps,
                r.episodes,
                r.disc_updates,
                r.agent_updates,
                last.map_or(f64::NAN, |row| row.eval_success_rate)
            );
        }
        Command::Eval { episodes, expert } => {
            let m = cmd_eval(&config, episodes.unwrap_or(config.eval_episodes), *expert)?;
            let reward = m.mean_learned_reward.map_or_else(|| "n/a".to_string(), |r| format!("{r:.6}"));
            println!(
                "episodes={} success_rate={:.3} mean_true_return={:.3} mean_episode_length={:.1} mean_learned_reward={}",
                m.episodes, m.success_rate, m.mean_true_return, m.mean_episode_length, reward
            );
        }
        Command::RewardGrid { resolution, stage } => {
            let stage = match stage {
                Stage::Pre => GridStage::Pre,
                Stage::Post => GridStage::Post,
            };
            let g = cmd_reward_grid(&config, stage, resolution.unwrap_or(config.grid_resolution))?;
            println!("rows={}", g.cells.len());
        }
    }
    Ok(())
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
