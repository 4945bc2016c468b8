//! Does the ranking survive a lower frame rate? Train once on every frame of
//! the maze demos and once keeping only every eighth frame, then score both
//! on the same full-rate held-out trajectories.
//!
//! Run with `cargo run --release --example subsampling`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankreward::demos::{generate_demos, EnvSpec};
use rankreward::ranking::{mean_kendall_tau, train_ranking, RankingConfig};

fn main() -> rankreward::Result<()> {
    let spec = EnvSpec::two_wall_maze();
    let demos = generate_demos(&spec, 20, 5)?;
    let (train, held_out) = demos.split_by_trajectory(0.8);
    let config = RankingConfig {
        learning_rate: 1e-3,
        ..RankingConfig::default()
    };

    println!("keep_every  frames/traj  held-out tau");
    for keep_every in [1, 2, 4, 8] {
        let reduced = train.subsample(keep_every)?;
        let frames = reduced.trajectories.iter().map(|t| t.len()).sum::<usize>() as f64 / reduced.len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = train_ranking(&reduced.trajectories, &config, &mut rng)?;
        println!("{keep_every:10} {frames:12.1} {:13.4}", mean_kendall_tau(&model, &held_out)?);
    }
    Ok(())
}
