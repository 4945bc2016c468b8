//! Map the learned reward over the two-wall maze.
//!
//! The ranking alone rates every cell on the right of the maze as "late",
//! including places no demonstration ever went, such as the dead-end strip
//! above wall B's gap or the region under wall B. Training the classifier
//! against broad exploration data marks those cells as non-expert, and the
//! combined reward drops there while staying high along the expert path.
//!
//! Run with `cargo run --release --example reward_grid`. Pass a directory to
//! also write `ranking_only.csv` and `combined.csv` there.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankreward::agent::{ReplayBuffer, Transition};
use rankreward::demos::{generate_demos, EnvSpec};
use rankreward::discrim::{update_discriminator, ClassifierMode, DiscConfig, Discriminator, ExpertPool};
use rankreward::ranking::{train_ranking, RankingConfig};
use rankreward::reward::{reward_grid, GridCell, RewardGrid, RewardKind, RewardModel};

/// Shades each cell between the grid's minimum and maximum value.
fn ascii(grid: &RewardGrid, value: impl Fn(&GridCell) -> f64) {
    const SHADES: &[u8] = b" .:-=+*#%@";
    let n = grid.resolution;
    let (lo, hi) = grid
        .cells
        .iter()
        .map(&value)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    println!("  range [{lo:.3}, {hi:.3}]");
    for row in (0..n).rev().step_by(2) {
        let line: String = (0..n)
            .map(|col| {
                let v = value(&grid.cells[row * n + col]);
                let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                SHADES[(t * (SHADES.len() - 1) as f64).round() as usize] as char
            })
            .collect();
        println!("  |{line}|");
    }
}

fn main() -> rankreward::Result<()> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    let spec = EnvSpec::two_wall_maze();
    let demos = generate_demos(&spec, 20, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let ranking_config = RankingConfig {
        learning_rate: 1e-3,
        ..RankingConfig::default()
    };
    let ranking = train_ranking(&demos.trajectories, &ranking_config, &mut rng)?;

    // Stand-in for a policy that has explored the whole maze.
    let mut replay = ReplayBuffer::new(20_000, 2, 2)?;
    for _ in 0..20_000 {
        let s = vec![rng.random::<f64>(), rng.random::<f64>()];
        replay.push(Transition {
            state: s.clone(),
            action: vec![0.0, 0.0],
            next_state: s,
            done: false,
        })?;
    }
    let pool = ExpertPool::new(&demos, ClassifierMode::ExpertVsPolicy)?;
    let disc_config = DiscConfig {
        learning_rate: 1e-3,
        ..DiscConfig::default()
    };
    let mut disc = Discriminator::new(2, disc_config, &mut rng)?;
    for _ in 0..5000 {
        update_discriminator(&mut disc, &pool, &replay, &mut rng)?;
    }

    let ranking_only = RewardModel::new(RewardKind::RankingOnly, Some(ranking.clone()), None, 1.0)?;
    let combined = RewardModel::new(RewardKind::Combined, Some(ranking), Some(disc), 1.0)?;
    let before = reward_grid(&ranking_only, 41, None)?;
    let after = reward_grid(&combined, 41, None)?;

    println!("progress likelihood p_RF (dark = high), y up:");
    ascii(&before, |c| c.p_rf.unwrap_or(0.0));
    println!("combined reward (dark = high):");
    ascii(&after, |c| c.reward);

    let expert_states: Vec<Vec<f64>> = demos.all_states().map(<[f64]>::to_vec).collect();
    let path_mean = expert_states.iter().map(|s| combined.reward(s)).sum::<rankreward::Result<f64>>()?
        / expert_states.len() as f64;
    let spurious = after.spurious_cells(&expert_states, 0.2, 0.8, path_mean);
    println!("mean combined reward on expert states: {path_mean:.3}");
    println!("cells >= 0.2 from every expert state with p_RF >= 0.8 and reward below that mean: {}", spurious.len());
    if let Some(c) = spurious.first() {
        println!(
            "  e.g. ({:.3}, {:.3}): p_RF {:.3}, D {:.3}, reward {:.3}",
            c.x,
            c.y,
            c.p_rf.unwrap_or(f64::NAN),
            c.d.unwrap_or(f64::NAN),
            c.reward
        );
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(&dir).map_err(|e| rankreward::Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        before.write_csv(&dir.join("ranking_only.csv"))?;
        after.write_csv(&dir.join("combined.csv"))?;
        println!("wrote grids to {}", dir.display());
    }
    Ok(())
}
