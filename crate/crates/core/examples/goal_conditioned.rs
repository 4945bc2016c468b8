//! Goal-conditioned reward on multi-goal reaching data.
//!
//! Each demonstration heads from the center to one of eight goals. The
//! ranking and the classifier both see `(frame, goal frame)`. The classifier
//! is trained to tell a frame paired with its own trajectory's final frame
//! from the same frame paired with another trajectory's final frame. On
//! held-out demos the reward should be higher, and trend upward more often,
//! under the true goal than under a counterfactual one.
//!
//! Run with `cargo run --release --example goal_conditioned`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankreward::agent::ReplayBuffer;
use rankreward::demos::{generate_demos, EnvSpec};
use rankreward::discrim::{update_discriminator, ClassifierMode, DiscConfig, Discriminator, ExpertPool};
use rankreward::ranking::{kendall_tau_of, train_ranking, RankingConfig};
use rankreward::reward::{trajectory_rewards, RewardKind, RewardModel};

/// Rank correlation of the sequence with time is positive.
fn trends_up(values: &[f64]) -> bool {
    kendall_tau_of(values) > 0.0
}

fn strictly_rises(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0])
}

fn gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> rankreward::Result<()> {
    let spec = EnvSpec {
        max_step_norm: 0.02,
        ..EnvSpec::multi_goal_reach()
    };
    let demos = generate_demos(&spec, 48, 4)?;
    let (train, held_out) = demos.split_by_trajectory(0.75);
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let ranking_config = RankingConfig {
        goal_conditioned: true,
        learning_rate: 1e-3,
        ..RankingConfig::default()
    };
    let ranking = train_ranking(&train.trajectories, &ranking_config, &mut rng)?;

    let pool = ExpertPool::new(&train, ClassifierMode::Counterfactual)?;
    let disc_config = DiscConfig {
        mode: ClassifierMode::Counterfactual,
        learning_rate: 1e-3,
        mixup: false,
        spectral_norm: false,
        ..DiscConfig::default()
    };
    let mut disc = Discriminator::new(pool.input_dim(), disc_config, &mut rng)?;
    let unused_replay = ReplayBuffer::new(1, spec.state_dim(), spec.action_dim())?;
    for step in 1..=10000 {
        let loss = update_discriminator(&mut disc, &pool, &unused_replay, &mut rng)?;
        if step % 2500 == 0 {
            println!("classifier step {step:5}  loss {loss:.4}");
        }
    }

    let model = RewardModel::new(RewardKind::Combined, Some(ranking), Some(disc), 1.0)?;
    let n = held_out.len();
    let (mut true_means, mut cf_means) = (Vec::new(), Vec::new());
    let (mut true_rising, mut cf_rising) = (0, 0);
    let (mut true_strict, mut cf_strict) = (0, 0);
    for (i, traj) in held_out.trajectories.iter().enumerate() {
        // The next held-out demo whose goal differs serves as the counterfactual.
        let other = (1..n)
            .map(|k| &held_out.trajectories[(i + k) % n])
            .find(|o| gap(o.goal_frame(), traj.goal_frame()) > 0.1)
            .expect("held-out demos cover several goals");
        let own = trajectory_rewards(&model, traj, Some(traj.goal_frame()))?;
        let cf = trajectory_rewards(&model, traj, Some(other.goal_frame()))?;
        true_means.push(mean(&own));
        cf_means.push(mean(&cf));
        true_rising += usize::from(trends_up(&own));
        cf_rising += usize::from(trends_up(&cf));
        true_strict += usize::from(strictly_rises(&own));
        cf_strict += usize::from(strictly_rises(&cf));
    }
    println!("\nheld-out demos: {n}");
    println!("mean reward, true goal           {:8.3}", mean(&true_means));
    println!("mean reward, counterfactual goal {:8.3}", mean(&cf_means));
    println!("upward-trending sequences, true goal           {true_rising}/{n}");
    println!("upward-trending sequences, counterfactual goal {cf_rising}/{n}");
    println!("strictly rising sequences, true goal {true_strict}/{n}, counterfactual goal {cf_strict}/{n}");
    Ok(())
}
