//! End-to-end run on the two-wall maze: generate demos, learn the ranking,
//! then train the agent while the classifier is refit against its replay
//! buffer. Prints the evaluation curve and writes checkpoints, the curve CSV
//! and reward grids under the output directory.
//!
//! ```text
//! cargo run --release --example two_wall_maze -- [CONFIG.toml] [OUT_DIR] [SEED]
//! ```
//!
//! Without arguments it uses `configs/maze_desk.toml` from this crate and
//! writes to `runs/two_wall_maze`.

use std::path::PathBuf;

use rankreward::harness::{run_pipeline, ExperimentConfig};

fn main() -> rankreward::Result<()> {
    let mut args = std::env::args().skip(1);
    let config_path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/maze_desk.toml"));
    let mut config = ExperimentConfig::load(&config_path)?;
    config.out_dir = args.next().map_or_else(|| PathBuf::from("runs/two_wall_maze"), PathBuf::from);
    if let Some(seed) = args.next() {
        config.seed = seed
            .parse()
            .map_err(|_| rankreward::Error::Argument(format!("seed must be an integer, got {seed}")))?;
    }

    println!("config {} -> {}", config_path.display(), config.out_dir.display());
    let report = run_pipeline(&config)?;
    if let Some(d) = &report.demos {
        println!("demos: {} trajectories, mean length {:.1}", d.n_trajectories, d.mean_length);
    }
    if let Some(r) = &report.ranking {
        println!("ranking: train tau {:.3}, held-out tau {:.3}", r.train_tau, r.held_out_tau);
    }
    println!("\n env_step  success  learned_reward  classifier_loss");
    for row in &report.train.curve {
        println!(
            "{:9} {:8.2} {:15.3} {:16}",
            row.env_step,
            row.eval_success_rate,
            row.mean_learned_reward,
            row.discriminator_loss.map_or_else(|| "-".to_string(), |l| format!("{l:.4}"))
        );
    }
    println!(
        "\nclassifier updates {}, agent updates {}, episodes {}",
        report.train.disc_updates, report.train.agent_updates, report.train.episodes
    );
    Ok(())
}
