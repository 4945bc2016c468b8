//! Compare every analytic gradient in the crate against central finite
//! differences: the ranking loss, the classifier loss, the critic regression
//! loss and the actor loss.
//!
//! Run with `cargo run --release --example gradient_check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankreward::agent::{Agent, ReplayBuffer, SacConfig, Transition};
use rankreward::demos::{EnvKind, Trajectory};
use rankreward::discrim::{discriminator_loss, ClassifierBatch, DiscConfig, Discriminator};
use rankreward::numkit::{finite_diff_grad, relative_error, Matrix, MlpGrads};
use rankreward::ranking::{ranking_loss, sample_pair_batch, RankingConfig, RankingModel};

const STEP: f64 = 1e-6;

fn worst(analytic: &MlpGrads, numeric: &[f64]) -> f64 {
    analytic
        .to_flat()
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(*a, *n, 1e-6))
        .fold(0.0, f64::max)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("finite")
}

fn ranking(seed: u64) -> rankreward::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajs: Vec<Trajectory> = (0..3)
        .map(|_| {
            let states = (0..8).map(|_| vec![rng.random(), rng.random()]).collect();
            Trajectory::new(EnvKind::Synthetic, states)
        })
        .collect::<rankreward::Result<_>>()?;
    let config = RankingConfig {
        hidden: vec![8, 8],
        ..RankingConfig::default()
    };
    let model = RankingModel::new(2, &config, &mut rng)?;
    let batch = sample_pair_batch(&trajs, 6, false, &mut rng)?;
    let (_, grads) = ranking_loss(&model, &batch, None)?;
    let mut probe = model.clone();
    let numeric = finite_diff_grad(
        |p| {
            probe.net.params.set_flat(p).expect("same length");
            ranking_loss(&probe, &batch, None).expect("valid batch").0
        },
        &model.net.params.to_flat(),
        STEP,
    )?;
    Ok(worst(&grads, &numeric))
}

fn classifier(seed: u64) -> rankreward::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = DiscConfig {
        hidden: vec![8, 8],
        ..DiscConfig::default()
    };
    let disc = Discriminator::new(3, config, &mut rng)?;
    let batch = ClassifierBatch {
        states: random_matrix(6, 3, &mut rng),
        labels: (0..6).map(|_| rng.random()).collect(),
    };
    let (_, grads) = discriminator_loss(&disc, &batch)?;
    let mut probe = disc.clone();
    let numeric = finite_diff_grad(
        |p| {
            probe.net.params.set_flat(p).expect("same length");
            discriminator_loss(&probe, &batch).expect("valid batch").0
        },
        &disc.net.params.to_flat(),
        STEP,
    )?;
    Ok(worst(&grads, &numeric))
}

fn small_agent(rng: &mut ChaCha8Rng) -> rankreward::Result<(Agent, ReplayBuffer)> {
    let config = SacConfig {
        hidden: vec![8, 8],
        batch_size: 6,
        ..SacConfig::default()
    };
    let agent = Agent::new(2, 2, 0.05, config, rng)?;
    let mut buffer = ReplayBuffer::new(32, 2, 2)?;
    for _ in 0..32 {
        buffer.push(Transition {
            state: vec![rng.random(), rng.random()],
            action: vec![rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)],
            next_state: vec![rng.random(), rng.random()],
            done: false,
        })?;
    }
    Ok((agent, buffer))
}

fn critic(seed: u64) -> rankreward::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (agent, buffer) = small_agent(&mut rng)?;
    let batch = buffer.sample(6, &mut rng)?;
    let targets: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, grads) = agent.critic_loss(0, &batch, &targets)?;
    let mut probe = agent.clone();
    let numeric = finite_diff_grad(
        |p| {
            probe.critics[0].params.set_flat(p).expect("same length");
            probe.critic_loss(0, &batch, &targets).expect("valid batch").0
        },
        &agent.critics[0].params.to_flat(),
        STEP,
    )?;
    Ok(worst(&grads, &numeric))
}

fn actor(seed: u64) -> rankreward::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (agent, _) = small_agent(&mut rng)?;
    let states = random_matrix(6, 2, &mut rng);
    let noise = agent.draw_noise(6, &mut rng);
    let (_, grads, _) = agent.actor_loss(&states, &noise)?;
    let mut probe = agent.clone();
    let numeric = finite_diff_grad(
        |p| {
            probe.actor.params.set_flat(p).expect("same length");
            probe.actor_loss(&states, &noise).expect("valid batch").0
        },
        &agent.actor.params.to_flat(),
        STEP,
    )?;
    Ok(worst(&grads, &numeric))
}

fn main() -> rankreward::Result<()> {
    let checks: [(&str, fn(u64) -> rankreward::Result<f64>); 4] =
        [("ranking", ranking), ("classifier", classifier), ("critic", critic), ("actor", actor)];
    println!("{:<12} {:>22}", "loss", "worst relative error");
    for (name, check) in checks {
        let mut max_err: f64 = 0.0;
        for seed in 0..5 {
            max_err = max_err.max(check(seed)?);
        }
        println!("{name:<12} {max_err:>22.2e}");
    }
    Ok(())
}
