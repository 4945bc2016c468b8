//! Learn a temporal utility from noisy 1D trajectories that drift upward,
//! then check that it orders held-out frames and that the anchored progress
//! likelihood sits at one half on initial states.
//!
//! Run with `cargo run --release --example ranking_1d`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rankreward::demos::{EnvKind, ExpertDataset, Split, Trajectory};
use rankreward::ranking::{kendall_tau, train_ranking, RankingConfig};

fn drifting_trajectory(rng: &mut ChaCha8Rng, len: usize) -> Trajectory {
    let noise = Normal::new(0.0, 0.01).expect("valid std");
    let states = (0..len)
        .map(|t| {
            let x = t as f64 / (len - 1) as f64 + noise.sample(rng);
            vec![x, 0.5 + noise.sample(rng)]
        })
        .collect();
    Trajectory::new(EnvKind::Synthetic, states).expect("finite states")
}

fn main() -> rankreward::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let train: Vec<Trajectory> = (0..10).map(|_| drifting_trajectory(&mut rng, 50)).collect();
    let held_out = drifting_trajectory(&mut rng, 50);

    let config = RankingConfig::default();
    println!(
        "training: hidden={:?} steps={} batch={} lr={}",
        config.hidden, config.steps, config.batch_size, config.learning_rate
    );
    let model = train_ranking(&train, &config, &mut rng)?;

    let dataset = ExpertDataset::new(train.clone(), Split::Train);
    let train_tau = rankreward::ranking::mean_kendall_tau(&model, &dataset)?;
    println!("train kendall tau    {train_tau:.4}");
    println!("held-out kendall tau {:.4}", kendall_tau(&model, &held_out)?);

    let mean_start: f64 = train
        .iter()
        .map(|t| model.progress_likelihood(&t.states[0]))
        .sum::<rankreward::Result<f64>>()?
        / train.len() as f64;
    println!("mean p_RF over initial states {mean_start:.4} (ln p = {:.4})", mean_start.ln());

    println!("\n   x    utility   p_RF");
    for x in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let s = [x, 0.5];
        println!("{x:5.2} {:9.3} {:7.3}", model.utility(&s)?, model.progress_likelihood(&s)?);
    }
    Ok(())
}
