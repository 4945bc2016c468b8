//! Recover a density ratio with a binary classifier.
//!
//! Expert and policy samples come from two known distributions over 16
//! one-hot states. A classifier trained to separate them should satisfy
//! `D / (1 - D) = p_expert / p_policy`, so the learned ratio can be compared
//! against the exact one state by state.
//!
//! Run with `cargo run --release --example density_ratio`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankreward::agent::{ReplayBuffer, Transition};
use rankreward::demos::{EnvKind, ExpertDataset, Split, Trajectory};
use rankreward::discrim::{update_discriminator, ClassifierMode, DiscConfig, Discriminator, ExpertPool};

const N: usize = 16;

fn one_hot(i: usize) -> Vec<f64> {
    let mut v = vec![0.0; N];
    v[i] = 1.0;
    v
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn main() -> rankreward::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let expert_p = normalized(&(0..N).map(|i| 1.0 + i as f64).collect::<Vec<_>>());
    let policy_p = normalized(&(0..N).map(|i| (N - i) as f64 + 2.0).collect::<Vec<_>>());
    let expert_dist = WeightedIndex::new(&expert_p).expect("positive weights");
    let policy_dist = WeightedIndex::new(&policy_p).expect("positive weights");

    let expert_states: Vec<Vec<f64>> = (0..20_000).map(|_| one_hot(expert_dist.sample(&mut rng))).collect();
    let traj = Trajectory::new(EnvKind::Synthetic, expert_states)?;
    let pool = ExpertPool::new(&ExpertDataset::new(vec![traj], Split::Train), ClassifierMode::ExpertVsPolicy)?;

    let mut replay = ReplayBuffer::new(20_000, N, 1)?;
    for _ in 0..20_000 {
        let s = one_hot(policy_dist.sample(&mut rng));
        replay.push(Transition {
            state: s.clone(),
            action: vec![0.0],
            next_state: s,
            done: false,
        })?;
    }

    let config = DiscConfig {
        hidden: vec![32],
        learning_rate: 3e-3,
        batch_size: 256,
        mixup: false,
        spectral_norm: false,
        ..DiscConfig::default()
    };
    let mut disc = Discriminator::new(N, config, &mut rng)?;
    for step in 1..=3000 {
        let loss = update_discriminator(&mut disc, &pool, &replay, &mut rng)?;
        if step % 1000 == 0 {
            println!("step {step:5}  loss {loss:.4}");
        }
    }

    println!("\nstate  true ratio  learned ratio  rel. error");
    let mut total_err = 0.0;
    for i in 0..N {
        let truth = expert_p[i] / policy_p[i];
        let learned = disc.density_ratio(&one_hot(i))?;
        let err = (learned - truth).abs() / truth;
        total_err += err;
        println!("{i:5} {truth:11.3} {learned:14.3} {err:11.3}");
    }
    println!("mean relative error {:.3}", total_err / N as f64);
    Ok(())
}
