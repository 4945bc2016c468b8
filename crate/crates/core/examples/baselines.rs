//! The five reward kinds side by side at a few landmark states of the maze.
//!
//! All kinds share one ranking network and two classifiers: an
//! expert-vs-exploration classifier for the combined reward, GAIL and AIRL,
//! and a goal-vs-exploration classifier for VICE.
//!
//! Run with `cargo run --release --example baselines`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankreward::agent::{ReplayBuffer, Transition};
use rankreward::demos::{generate_demos, EnvSpec, ExpertDataset};
use rankreward::discrim::{update_discriminator, ClassifierMode, DiscConfig, Discriminator, ExpertPool};
use rankreward::ranking::{train_ranking, RankingConfig};
use rankreward::reward::{RewardKind, RewardModel};

fn fit_classifier(
    demos: &ExpertDataset,
    replay: &ReplayBuffer,
    mode: ClassifierMode,
    rng: &mut ChaCha8Rng,
) -> rankreward::Result<Discriminator> {
    let pool = ExpertPool::new(demos, mode)?;
    let config = DiscConfig {
        mode,
        learning_rate: 1e-3,
        ..DiscConfig::default()
    };
    let mut disc = Discriminator::new(pool.input_dim(), config, rng)?;
    for _ in 0..3000 {
        update_discriminator(&mut disc, &pool, replay, rng)?;
    }
    Ok(disc)
}

fn main() -> rankreward::Result<()> {
    let spec = EnvSpec::two_wall_maze();
    let demos = generate_demos(&spec, 20, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ranking = train_ranking(
        &demos.trajectories,
        &RankingConfig {
            learning_rate: 1e-3,
            ..RankingConfig::default()
        },
        &mut rng,
    )?;

    let mut replay = ReplayBuffer::new(10_000, 2, 2)?;
    for _ in 0..10_000 {
        let s = vec![rng.random::<f64>(), rng.random::<f64>()];
        replay.push(Transition {
            state: s.clone(),
            action: vec![0.0, 0.0],
            next_state: s,
            done: false,
        })?;
    }
    let expert_disc = fit_classifier(&demos, &replay, ClassifierMode::ExpertVsPolicy, &mut rng)?;
    let goal_disc = fit_classifier(&demos, &replay, ClassifierMode::GoalVsPolicy, &mut rng)?;

    let models = [
        RewardModel::new(RewardKind::Combined, Some(ranking.clone()), Some(expert_disc.clone()), 1.0)?,
        RewardModel::new(RewardKind::RankingOnly, Some(ranking), None, 1.0)?,
        RewardModel::new(RewardKind::Gail, None, Some(expert_disc.clone()), 1.0)?,
        RewardModel::new(RewardKind::Airl, None, Some(expert_disc), 1.0)?,
        RewardModel::new(RewardKind::Vice, None, Some(goal_disc), 1.0)?,
    ];

    let landmarks = [
        ("start", [0.05, 0.95]),
        ("bottom corridor", [0.25, 0.10]),
        ("middle corridor", [0.40, 0.60]),
        ("dead end, top right", [0.95, 0.95]),
        ("under wall B, left", [0.55, 0.05]),
        ("goal", [0.95, 0.05]),
    ];
    print!("{:<22}", "state");
    for m in &models {
        print!("{:>13}", m.kind.tag());
    }
    println!();
    for (name, s) in landmarks {
        print!("{name:<22}");
        for m in &models {
            print!("{:>13.3}", m.reward(&s)?);
        }
        println!();
    }
    Ok(())
}
