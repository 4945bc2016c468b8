//! Experiment configuration: a flat TOML table.
//!
//! Every key is optional; missing keys take the values of
//! [`ExperimentConfig::default`]. Unknown keys are rejected so typos surface
//! as errors instead of silently falling back to defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::SacConfig;
use crate::demos::{EnvKind, EnvSpec};
use crate::discrim::{ClassifierMode, DiscConfig};
use crate::error::{Error, Result};
use crate::ranking::RankingConfig;
use crate::reward::RewardKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    // environment
    pub env: EnvKind,
    pub max_step_norm: Option<f64>,
    pub horizon: Option<usize>,
    pub goal_radius: Option<f64>,
    pub expert_noise_std: Option<f64>,
    /// Reset training episodes on reaching the goal and treat the transition
    /// as terminal. Off by default: episodes run to the horizon.
    pub terminate_on_goal: bool,

    // demonstrations
    pub n_demos: usize,
    /// Read demonstrations from this file instead of `<out_dir>/demos.jsonl`.
    pub dataset: Option<PathBuf>,
    pub train_fraction: f64,

    // reward
    pub reward_kind: RewardKind,
    pub alpha: f64,
    pub gail_log: bool,
    pub goal_conditioned: bool,

    // ranking network
    pub ranking_hidden: Vec<usize>,
    pub ranking_steps: usize,
    pub ranking_batch_size: usize,
    pub ranking_lr: f64,
    pub ranking_mixup: bool,
    pub ranking_spectral_norm: bool,
    pub keep_every: usize,

    // discriminator
    pub disc_hidden: Vec<usize>,
    pub disc_lr: f64,
    pub disc_batch_size: usize,
    pub disc_mixup: bool,
    pub disc_spectral_norm: bool,
    pub reward_update_frequency: usize,
    pub disc_updates_per_call: usize,
    pub mixup_alpha: f64,

    // agent
    pub agent_hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub n_critics: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub temperature_lr: f64,
    pub init_temperature: f64,
    pub learn_temperature: bool,
    /// Defaults to `-action_dim` when absent.
    pub target_entropy: Option<f64>,
    pub utd_ratio: usize,
    pub batch_size: usize,
    pub explore_steps: usize,
    pub buffer_capacity: usize,

    // loop
    pub total_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub grid_resolution: usize,
    /// Write elapsed seconds to the curve; off gives byte-reproducible curves.
    pub record_wall_clock: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sac = SacConfig::default();
        let ranking = RankingConfig::default();
        let disc = DiscConfig::default();
        Self {
            env: EnvKind::TwoWallMaze,
            max_step_norm: None,
            horizon: None,
            goal_radius: None,
            expert_noise_std: None,
            terminate_on_goal: false,
            n_demos: 20,
            dataset: None,
            train_fraction: 0.8,
            reward_kind: RewardKind::Combined,
            alpha: 1.0,
            gail_log: true,
            goal_conditioned: false,
            ranking_hidden: ranking.hidden,
            ranking_steps: ranking.steps,
            ranking_batch_size: ranking.batch_size,
            ranking_lr: ranking.learning_rate,
            ranking_mixup: ranking.mixup,
            ranking_spectral_norm: ranking.spectral_norm,
            keep_every: 1,
            disc_hidden: disc.hidden,
            disc_lr: disc.learning_rate,
            disc_batch_size: disc.batch_size,
            disc_mixup: disc.mixup,
            disc_spectral_norm: disc.spectral_norm,
            reward_update_frequency: disc.update_every,
            disc_updates_per_call: disc.updates_per_call,
            mixup_alpha: disc.mixup_alpha,
            agent_hidden: sac.hidden,
            gamma: sac.gamma,
            tau: sac.tau,
            n_critics: sac.n_critics,
            actor_lr: sac.actor_lr,
            critic_lr: sac.critic_lr,
            temperature_lr: sac.temperature_lr,
            init_temperature: sac.init_temperature,
            learn_temperature: sac.learn_temperature,
            target_entropy: sac.target_entropy,
            utd_ratio: sac.utd_ratio,
            batch_size: sac.batch_size,
            explore_steps: sac.explore_steps,
            buffer_capacity: sac.buffer_capacity,
            total_steps: 150_000,
            eval_every: 2000,
            eval_episodes: 10,
            grid_resolution: 101,
            record_wall_clock: true,
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

/// Maps a TOML error to a config error naming the offending key.
fn toml_error(text: &str, err: toml::de::Error) -> Error {
    let message = err.message().to_string();
    if let Some(rest) = message.split("unknown field `").nth(1) {
        let key = rest.split('`').next().unwrap_or_default().to_string();
        return Error::Config { key, message };
    }
    let key = err
        .span()
        .and_then(|span| {
            let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
            let line = &text[line_start..];
            line.split_once('=').map(|(k, _)| k.trim().to_string())
        })
        .filter(|k| !k.is_empty() && !k.contains('\n'))
        .unwrap_or_else(|| "<document>".to_string());
    Error::Config { key, message }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("cannot serialize config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(key, msg));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha", format!("must be >= 0, got {}", self.alpha));
        }
        if self.total_steps < self.explore_steps {
            return bad(
                "total_steps",
                format!("{} is below explore_steps {}", self.total_steps, self.explore_steps),
            );
        }
        if self.n_demos == 0 {
            return bad("n_demos", "need at least one demonstration".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad("train_fraction", "must lie in (0, 1]".into());
        }
        if self.keep_every == 0 {
            return bad("keep_every", "must be at least 1".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every", "must be at least 1".into());
        }
        if self.grid_resolution < 2 {
            return bad("grid_resolution", "must be at least 2".into());
        }
        if self.goal_conditioned && self.env != EnvKind::MultiGoalReach {
            return bad("goal_conditioned", "only the multi-goal environment carries goals".into());
        }
        if let Some(dataset) = &self.dataset {
            if !dataset.exists() {
                return bad("dataset", format!("{} does not exist", dataset.display()));
            }
        }
        if self.env == EnvKind::Synthetic {
            return bad("env", "the synthetic kind has no simulator".into());
        }
        self.env_spec()?;
        self.sac_config().validate()?;
        self.disc_config().validate()?;
        Ok(())
    }

    pub fn env_spec(&self) -> Result<EnvSpec> {
        let mut spec = EnvSpec::for_kind(self.env)?;
        if let Some(v) = self.max_step_norm {
            spec.max_step_norm = v;
        }
        if let Some(v) = self.horizon {
            spec.horizon = v;
        }
        if let Some(v) = self.goal_radius {
            spec.goal_radius = v;
        }
        if let Some(v) = self.expert_noise_std {
            spec.expert_noise_std = v;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn ranking_config(&self) -> RankingConfig {
        RankingConfig {
            hidden: self.ranking_hidden.clone(),
            steps: self.ranking_steps,
            batch_size: self.ranking_batch_size,
            learning_rate: self.ranking_lr,
            mixup: self.ranking_mixup,
            mixup_alpha: self.mixup_alpha,
            spectral_norm: self.ranking_spectral_norm,
            goal_conditioned: self.goal_conditioned,
        }
    }

    pub fn classifier_mode(&self) -> ClassifierMode {
        if self.goal_conditioned {
            ClassifierMode::Counterfactual
        } else if self.reward_kind == RewardKind::Vice {
            ClassifierMode::GoalVsPolicy
        } else {
            ClassifierMode::ExpertVsPolicy
        }
    }

    pub fn disc_config(&self) -> DiscConfig {
        DiscConfig {
            hidden: self.disc_hidden.clone(),
            learning_rate: self.disc_lr,
            batch_size: self.disc_batch_size,
            mixup: self.disc_mixup,
            mixup_alpha: self.mixup_alpha,
            spectral_norm: self.disc_spectral_norm,
            updates_per_call: self.disc_updates_per_call,
            update_every: self.reward_update_frequency,
            mode: self.classifier_mode(),
        }
    }

    pub fn sac_config(&self) -> SacConfig {
        SacConfig {
            gamma: self.gamma,
            tau: self.tau,
            n_critics: self.n_critics,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            temperature_lr: self.temperature_lr,
            utd_ratio: self.utd_ratio,
            batch_size: self.batch_size,
            explore_steps: self.explore_steps,
            hidden: self.agent_hidden.clone(),
            init_temperature: self.init_temperature,
            learn_temperature: self.learn_temperature,
            target_entropy: self.target_entropy,
            buffer_capacity: self.buffer_capacity,
        }
    }

    pub fn demos_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out_dir.join("demos.jsonl"))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
