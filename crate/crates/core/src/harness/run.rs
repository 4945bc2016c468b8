//! Experiment commands: demo generation, ranking training, the joint
//! classifier/policy loop, evaluation and reward-grid export.
//!
//! Every command reads and writes the fixed file layout under
//! `config.out_dir`:
//!
//! ```text
//! config.snapshot  demos.jsonl  ranking.ckpt  disc.ckpt  agent.ckpt
//! curve.csv  grid_pre.csv  grid_post.csv
//! ```
//!
//! Randomness comes from ChaCha8 streams derived from `config.seed`, one
//! stream per purpose, so a run is reproducible and evaluation does not
//! perturb training.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use crate::agent::{agent_step, Agent, AgentCheckpoint, ReplayBuffer, Transition};
use crate::demos::{
    env_reset, env_step, generate_demos_counted, read_dataset, write_dataset, EnvKind, EnvSpec, EnvState,
    ExpertDataset, Point, ScriptedExpert,
};
use crate::discrim::{update_discriminator, DiscCheckpoint, Discriminator, ExpertPool};
use crate::error::{Error, Result};
use crate::numkit::checkpoint::{load_json, save_json, write_atomic};
use crate::numkit::format_significant;
use crate::ranking::{mean_kendall_tau, train_ranking, RankingCheckpoint, RankingModel};
use crate::reward::{reward_grid, RewardGrid, RewardModel};

const STREAM_RANKING: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_EVAL: u64 = 3;
const STREAM_DISC_INIT: u64 = 4;
const STREAM_AGENT_INIT: u64 = 5;
const STREAM_EVAL_CMD: u64 = 6;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const CURVE_HEADER: &str =
    "env_step,eval_success_rate,eval_mean_true_return,mean_learned_reward,discriminator_loss,ranking_kendall_tau,wall_clock_s";

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub env_step: usize,
    pub eval_success_rate: f64,
    pub eval_mean_true_return: f64,
    pub mean_learned_reward: f64,
    /// Mean loss of the classifier updates since the previous row.
    pub discriminator_loss: Option<f64>,
    pub ranking_kendall_tau: Option<f64>,
    pub wall_clock_s: f64,
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let f = |v: Option<f64>| v.map(|v| format_significant(v, 9)).unwrap_or_default();
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.env_step,
            f(Some(r.eval_success_rate)),
            f(Some(r.eval_mean_true_return)),
            f(Some(r.mean_learned_reward)),
            f(r.discriminator_loss),
            f(r.ranking_kendall_tau),
            f(Some(r.wall_clock_s)),
        );
    }
    out
}

fn write_snapshot(config: &ExperimentConfig) -> Result<()> {
    write_atomic(&config.path("config.snapshot"), config.to_toml_string()?.as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSummary {
    pub n_trajectories: usize,
    pub mean_length: f64,
    /// Successful episodes over attempted episodes.
    pub success_rate: f64,
}

pub fn summarize_demos(dataset: &ExpertDataset, attempts: usize) -> DemoSummary {
    let n = dataset.len();
    let total: usize = dataset.trajectories.iter().map(|t| t.len()).sum();
    DemoSummary {
        n_trajectories: n,
        mean_length: if n == 0 { 0.0 } else { total as f64 / n as f64 },
        success_rate: if attempts == 0 { 0.0 } else { n as f64 / attempts as f64 },
    }
}

/// Generates `n_demos` scripted demonstrations and writes `demos.jsonl`.
pub fn cmd_gen_demos(config: &ExperimentConfig) -> Result<DemoSummary> {
    let spec = config.env_spec()?;
    let (dataset, attempts) = generate_demos_counted(&spec, config.n_demos, config.seed)?;
    write_snapshot(config)?;
    write_dataset(&dataset, &config.path("demos.jsonl"))?;
    Ok(summarize_demos(&dataset, attempts))
}

pub fn load_demos(config: &ExperimentConfig) -> Result<ExpertDataset> {
    let path = config.demos_path();
    if !path.exists() {
        return Err(Error::NotReady(format!(
            "no demonstrations at {}; run gen-demos first",
            path.display()
        )));
    }
    let dataset = read_dataset(&path)?;
    if dataset.env() != Some(config.env) {
        return Err(Error::Format(format!(
            "{} holds {:?} demonstrations, config expects {:?}",
            path.display(),
            dataset.env(),
            config.env
        )));
    }
    Ok(dataset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub n_train: usize,
    pub n_eval: usize,
    pub train_tau: f64,
    pub held_out_tau: f64,
}

/// Trains a ranking model on the training split (subsampled by
/// `keep_every`) and scores Kendall tau on the full-rate held-out split.
pub fn train_ranking_split(config: &ExperimentConfig, dataset: &ExpertDataset) -> Result<(RankingModel, RankingReport)> {
    let (train, eval) = dataset.split_by_trajectory(config.train_fraction);
    let train_used = train.subsample(config.keep_every)?;
    let mut rng = stream_rng(config.seed, STREAM_RANKING);
    let model = train_ranking(&train_used.trajectories, &config.ranking_config(), &mut rng)?;
    let held_out_tau = if eval.is_empty() {
        f64::NAN
    } else {
        mean_kendall_tau(&model, &eval)?
    };
    let report = RankingReport {
        n_train: train.len(),
        n_eval: eval.len(),
        train_tau: mean_kendall_tau(&model, &train)?,
        held_out_tau,
    };
    Ok((model, report))
}

pub fn cmd_train_ranking(config: &ExperimentConfig) -> Result<RankingReport> {
    let dataset = load_demos(config)?;
    let (model, report) = train_ranking_split(config, &dataset)?;
    write_snapshot(config)?;
    save_json(&config.path("ranking.ckpt"), &RankingCheckpoint::from_model(&model))?;
    Ok(report)
}

pub fn load_ranking(path: &Path) -> Result<RankingModel> {
    load_json::<RankingCheckpoint>(path)?.into_model()
}

pub fn load_disc(path: &Path) -> Result<Discriminator> {
    load_json::<DiscCheckpoint>(path)?.into_disc()
}

/// Classifier as initialized at the start of training.
pub fn initial_discriminator(config: &ExperimentConfig, input_dim: usize) -> Result<Discriminator> {
    Discriminator::new(input_dim, config.disc_config(), &mut stream_rng(config.seed, STREAM_DISC_INIT))
}

fn grid_goal(spec: &EnvSpec) -> Option<[f64; 2]> {
    (spec.kind == EnvKind::MultiGoalReach).then(|| spec.goals[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub success: bool,
    pub true_return: f64,
    pub length: usize,
    pub learned_reward_sum: f64,
    pub positions: Vec<Point>,
}

/// Runs one episode until the goal is reached or the horizon passes.
pub fn run_episode<R, P>(spec: &EnvSpec, mut policy: P, reward: Option<&RewardModel>, rng: &mut R) -> Result<EpisodeStats>
where
    R: Rng + ?Sized,
    P: FnMut(&EnvState, &mut R) -> Result<Point>,
{
    let mut state = env_reset(spec, rng);
    let mut stats = EpisodeStats {
        success: false,
        true_return: 0.0,
        length: 0,
        learned_reward_sum: 0.0,
        positions: vec![state.position],
    };
    loop {
        let action = policy(&state, rng)?;
        let out = env_step(spec, &state, action)?;
        stats.length += 1;
        stats.true_return += out.true_reward;
        stats.positions.push(out.next.position);
        if let Some(r) = reward {
            stats.learned_reward_sum += r.reward(&out.next.observation(spec))?;
        }
        state = out.next;
        if out.reached_goal {
            stats.success = true;
        }
        if out.done {
            return Ok(stats);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_true_return: f64,
    pub mean_episode_length: f64,
    /// Mean per-step learned reward, when a reward model is available.
    pub mean_learned_reward: Option<f64>,
    pub trajectories: Vec<Vec<Point>>,
}

fn aggregate(episodes: Vec<EpisodeStats>, has_reward: bool) -> EvalMetrics {
    let n = episodes.len() as f64;
    let steps: usize = episodes.iter().map(|e| e.length).sum();
    EvalMetrics {
        episodes: episodes.len(),
        success_rate: episodes.iter().filter(|e| e.success).count() as f64 / n,
        mean_true_return: episodes.iter().map(|e| e.true_return).sum::<f64>() / n,
        mean_episode_length: steps as f64 / n,
        mean_learned_reward: has_reward
            .then(|| episodes.iter().map(|e| e.learned_reward_sum).sum::<f64>() / steps.max(1) as f64),
        trajectories: episodes.into_iter().map(|e| e.positions).collect(),
    }
}

/// Deterministic-policy evaluation.
pub fn evaluate_agent<R: Rng + ?Sized>(
    spec: &EnvSpec,
    agent: &Agent,
    reward: Option<&RewardModel>,
    episodes: usize,
    rng: &mut R,
) -> Result<EvalMetrics> {
    if episodes == 0 {
        return Err(Error::argument("evaluation needs at least one episode"));
    }
    let mut all = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let policy = |s: &EnvState, r: &mut R| {
            let a = agent.act(&s.observation(spec), true, r)?;
            Ok([a[0], a[1]])
        };
        all.push(run_episode(spec, policy, reward, rng)?);
    }
    Ok(aggregate(all, reward.is_some()))
}

/// Closed-loop evaluation of the scripted expert.
pub fn evaluate_expert<R: Rng + ?Sized>(
    spec: &EnvSpec,
    reward: Option<&RewardModel>,
    episodes: usize,
    rng: &mut R,
) -> Result<EvalMetrics> {
    if episodes == 0 {
        return Err(Error::argument("evaluation needs at least one episode"));
    }
    let mut all = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut expert: Option<ScriptedExpert> = None;
        let policy = |s: &EnvState, r: &mut R| {
            let e = expert.get_or_insert_with(|| ScriptedExpert::new(spec, s));
            Ok(e.action(spec, s, r))
        };
        all.push(run_episode(spec, policy, reward, rng)?);
    }
    Ok(aggregate(all, reward.is_some()))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub curve: Vec<CurveRow>,
    pub agent: Agent,
    pub reward: RewardModel,
    pub buffer: ReplayBuffer,
    pub grid_pre: Option<RewardGrid>,
    pub grid_post: Option<RewardGrid>,
    pub disc_updates: usize,
    pub agent_updates: usize,
    pub episodes: usize,
}

/// The joint loop: one environment step per iteration; after exploration,
/// a classifier update every `reward_update_frequency` steps and an agent
/// update every step; an evaluation row every `eval_every` steps and at the
/// final step.
pub fn run_training(config: &ExperimentConfig, dataset: &ExpertDataset, ranking: Option<RankingModel>) -> Result<TrainOutcome> {
    let spec = config.env_spec()?;
    let kind = config.reward_kind;
    let (train, eval) = dataset.split_by_trajectory(config.train_fraction);
    let ranking = if kind.needs_ranking() {
        Some(ranking.ok_or_else(|| Error::NotReady("reward needs a ranking model; run train-ranking first".into()))?)
    } else {
        None
    };
    let tau = match (&ranking, eval.is_empty()) {
        (Some(r), false) => Some(mean_kendall_tau(r, &eval)?),
        _ => None,
    };
    let state_dim = spec.state_dim();
    let (pool, disc) = if kind.needs_discriminator() {
        let pool = ExpertPool::new(&train, config.classifier_mode())?;
        let disc = initial_discriminator(config, pool.input_dim())?;
        (Some(pool), Some(disc))
    } else {
        (None, None)
    };
    let mut reward = RewardModel::new(kind, ranking, disc, config.alpha)?;
    reward.gail_log = config.gail_log;
    let goal = grid_goal(&spec);
    let grid_pre = reward_grid(&reward, config.grid_resolution, goal).ok();

    let mut agent = Agent::new(
        state_dim,
        spec.action_dim(),
        spec.max_step_norm,
        config.sac_config(),
        &mut stream_rng(config.seed, STREAM_AGENT_INIT),
    )?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity, state_dim, spec.action_dim())?;
    let mut rng = stream_rng(config.seed, STREAM_TRAIN);
    let started = Instant::now();

    let mut state = env_reset(&spec, &mut rng);
    let mut episodes = 1usize;
    let mut disc_updates = 0usize;
    let mut agent_updates = 0usize;
    let mut disc_losses: Vec<f64> = Vec::new();
    let mut last_metrics = String::from("none");
    let mut curve = Vec::new();
    let explore = config.explore_steps;
    let freq = config.reward_update_frequency;
    let k = config.disc_updates_per_call;

    for n in 1..=config.total_steps {
        let wrap = |e: Error, last: &str| match e {
            Error::Training { .. } => e,
            other => Error::Training {
                step: n,
                message: format!("{other}; last metrics: {last}"),
            },
        };
        let obs = state.observation(&spec);
        let action = if n <= explore {
            agent.random_action(&mut rng)
        } else {
            agent.act(&obs, false, &mut rng).map_err(|e| wrap(e, &last_metrics))?
        };
        let out = env_step(&spec, &state, [action[0], action[1]])?;
        let terminal = config.terminate_on_goal && out.reached_goal;
        buffer.push(Transition {
            state: obs,
            action: agent.normalize_action(&action),
            next_state: out.next.observation(&spec),
            done: terminal,
        })?;
        state = if terminal || out.next.steps_elapsed >= spec.horizon {
            episodes += 1;
            env_reset(&spec, &mut rng)
        } else {
            out.next
        };

        if n > explore {
            if let (Some(pool), Some(disc)) = (&pool, reward.disc.as_mut()) {
                if (n - explore) % freq == 0 {
                    let loss = update_discriminator(disc, pool, &buffer, &mut rng).map_err(|e| wrap(e, &last_metrics))?;
                    if !loss.is_finite() {
                        return Err(wrap(Error::numeric(format!("classifier loss {loss}")), &last_metrics));
                    }
                    disc_losses.push(loss);
                    disc_updates += k;
                }
            }
            if buffer.len() >= config.batch_size {
                let m = agent_step(&mut agent, &buffer, &reward, &mut rng).map_err(|e| wrap(e, &last_metrics))?;
                let finite = m.actor_loss.is_finite() && m.critic_losses.iter().all(|l| l.is_finite());
                last_metrics = format!(
                    "critic_losses={:?} actor_loss={} temperature={} mean_batch_reward={}",
                    m.critic_losses, m.actor_loss, m.temperature, m.mean_batch_reward
                );
                if !finite {
                    return Err(wrap(Error::numeric("non-finite agent loss"), &last_metrics));
                }
                agent_updates += 1;
            }
        }

        if n % config.eval_every == 0 || n == config.total_steps {
            let mut eval_rng = stream_rng(config.seed, STREAM_EVAL);
            let m = evaluate_agent(&spec, &agent, Some(&reward), config.eval_episodes, &mut eval_rng)
                .map_err(|e| wrap(e, &last_metrics))?;
            let discriminator_loss = (!disc_losses.is_empty())
                .then(|| disc_losses.iter().sum::<f64>() / disc_losses.len() as f64);
            disc_losses.clear();
            curve.push(CurveRow {
                env_step: n,
                eval_success_rate: m.success_rate,
                eval_mean_true_return: m.mean_true_return,
                mean_learned_reward: m.mean_learned_reward.unwrap_or(f64::NAN),
                discriminator_loss,
                ranking_kendall_tau: tau,
                wall_clock_s: if config.record_wall_clock {
                    started.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            });
        }
    }
    let grid_post = reward_grid(&reward, config.grid_resolution, goal).ok();
    Ok(TrainOutcome {
        curve,
        agent,
        reward,
        buffer,
        grid_pre,
        grid_post,
        disc_updates,
        agent_updates,
        episodes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub curve: Vec<CurveRow>,
    pub disc_updates: usize,
    pub agent_updates: usize,
    pub episodes: usize,
}

/// Runs the joint loop from files in `out_dir` and writes the curve,
/// checkpoints and reward grids.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainReport> {
    let dataset = load_demos(config)?;
    let ranking_path = config.path("ranking.ckpt");
    let ranking = if config.reward_kind.needs_ranking() {
        if !ranking_path.exists() {
            return Err(Error::NotReady(format!(
                "{} missing; run train-ranking first",
                ranking_path.display()
            )));
        }
        Some(load_ranking(&ranking_path)?)
    } else {
        None
    };
    write_snapshot(config)?;
    let outcome = run_training(config, &dataset, ranking)?;
    write_outputs(config, &outcome)?;
    Ok(TrainReport {
        curve: outcome.curve,
        disc_updates: outcome.disc_updates,
        agent_updates: outcome.agent_updates,
        episodes: outcome.episodes,
    })
}

pub fn write_outputs(config: &ExperimentConfig, outcome: &TrainOutcome) -> Result<()> {
    write_atomic(&config.path("curve.csv"), curve_csv(&outcome.curve).as_bytes())?;
    save_json(&config.path("agent.ckpt"), &AgentCheckpoint::from_agent(&outcome.agent)?)?;
    if let Some(d) = &outcome.reward.disc {
        save_json(&config.path("disc.ckpt"), &DiscCheckpoint::from_disc(d))?;
    }
    if let Some(g) = &outcome.grid_pre {
        g.write_csv(&config.path("grid_pre.csv"))?;
    }
    if let Some(g) = &outcome.grid_post {
        g.write_csv(&config.path("grid_post.csv"))?;
    }
    Ok(())
}

/// Rebuilds the reward model from checkpoints in `out_dir`. `post` selects
/// the trained classifier; otherwise the classifier is re-created exactly as
/// training initialized it.
pub fn load_reward_model(config: &ExperimentConfig, post: bool) -> Result<RewardModel> {
    let kind = config.reward_kind;
    let ranking = if kind.needs_ranking() {
        Some(load_ranking(&config.path("ranking.ckpt"))?)
    } else {
        None
    };
    let disc = if kind.needs_discriminator() {
        if post {
            Some(load_disc(&config.path("disc.ckpt"))?)
        } else {
            let dataset = load_demos(config)?;
            let (train, _) = dataset.split_by_trajectory(config.train_fraction);
            let pool = ExpertPool::new(&train, config.classifier_mode())?;
            Some(initial_discriminator(config, pool.input_dim())?)
        }
    } else {
        None
    };
    let mut model = RewardModel::new(kind, ranking, disc, config.alpha)?;
    model.gail_log = config.gail_log;
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridStage {
    Pre,
    Post,
}

/// Writes `grid_pre.csv` or `grid_post.csv` for the given snapshot.
pub fn cmd_reward_grid(config: &ExperimentConfig, stage: GridStage, resolution: usize) -> Result<RewardGrid> {
    if resolution < 2 {
        return Err(Error::argument(format!("grid resolution {resolution} must be at least 2")));
    }
    let model = load_reward_model(config, stage == GridStage::Post)?;
    let spec = config.env_spec()?;
    let grid = reward_grid(&model, resolution, grid_goal(&spec))?;
    let name = match stage {
        GridStage::Pre => "grid_pre.csv",
        GridStage::Post => "grid_post.csv",
    };
    grid.write_csv(&config.path(name))?;
    Ok(grid)
}

/// Evaluates the trained agent (or the scripted expert) with a
/// deterministic policy.
pub fn cmd_eval(config: &ExperimentConfig, episodes: usize, expert: bool) -> Result<EvalMetrics> {
    if episodes == 0 {
        return Err(Error::argument("evaluation needs at least one episode"));
    }
    let spec = config.env_spec()?;
    let reward = load_reward_model(config, true).ok();
    let mut rng = stream_rng(config.seed, STREAM_EVAL_CMD);
    if expert {
        evaluate_expert(&spec, reward.as_ref(), episodes, &mut rng)
    } else {
        let agent = load_json::<AgentCheckpoint>(&config.path("agent.ckpt"))?.into_agent()?;
        evaluate_agent(&spec, &agent, reward.as_ref(), episodes, &mut rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    /// `None` when the config points at an existing dataset.
    pub demos: Option<DemoSummary>,
    pub ranking: Option<RankingReport>,
    pub train: TrainReport,
}

/// Generates demonstrations, trains the ranking model when the reward needs
/// one, and runs the joint loop, writing every output.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineReport> {
    let demos = match config.dataset {
        None => Some(cmd_gen_demos(config)?),
        Some(_) => None,
    };
    let ranking = if config.reward_kind.needs_ranking() {
        Some(cmd_train_ranking(config)?)
    } else {
        None
    };
    Ok(PipelineReport {
        demos,
        ranking,
        train: cmd_train(config)?,
    })
}
