//! Temporal ranking of expert frames.
//!
//! The utility network `u(s)` is fit so that later frames of a demonstration
//! outrank earlier ones under a Bradley-Terry model:
//! `P(later beats earlier) = sigmoid(u(later) - u(earlier))`. Training is
//! binary cross-entropy on the utility difference of sampled frame pairs.
//! After training, a constant offset anchors the mean utility of the
//! demonstrations' first frames at zero, so `sigmoid(u(s))` reads as the
//! likelihood that `s` is progress over the start.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demos::{ExpertDataset, Trajectory};
use crate::error::{Error, Result};
use crate::numkit::checkpoint::MlpCheckpoint;
use crate::numkit::loss::{bce_with_logits, sigmoid, stable_log_sigmoid};
use crate::numkit::{last_hidden_mask, AdamState, Matrix, MixPlan, MixupSampler, Mlp, MlpGrads};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub hidden: Vec<usize>,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub mixup: bool,
    pub mixup_alpha: f64,
    pub spectral_norm: bool,
    pub goal_conditioned: bool,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            steps: 5000,
            batch_size: 32,
            learning_rate: 1e-4,
            mixup: true,
            mixup_alpha: 1.0,
            spectral_norm: true,
            goal_conditioned: false,
        }
    }
}

impl RankingConfig {
    /// Sizes used for the real-robot experiments: three 4096-wide hidden layers.
    pub fn large_scale() -> Self {
        Self {
            hidden: vec![4096, 4096, 4096],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingModel {
    pub net: Mlp,
    pub anchor_offset: f64,
    pub goal_conditioned: bool,
}

/// Frame pairs drawn from single trajectories. `labels[i]` is 1 when
/// `first` row `i` occurs later than `second` row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub first_states: Matrix,
    pub second_states: Matrix,
    pub labels: Vec<f64>,
    pub trajectory_ids: Vec<usize>,
    pub index_pairs: Vec<(usize, usize)>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Swaps the members of every pair, flipping the labels.
    pub fn swapped(&self) -> Self {
        Self {
            first_states: self.second_states.clone(),
            second_states: self.first_states.clone(),
            labels: self.labels.iter().map(|y| 1.0 - y).collect(),
            trajectory_ids: self.trajectory_ids.clone(),
            index_pairs: self.index_pairs.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }
}

/// Model input for frame `i` of `traj`: the full state, or the frame followed
/// by the trajectory's final frame when goal-conditioned.
pub fn ranking_input(traj: &Trajectory, i: usize, goal_conditioned: bool) -> Vec<f64> {
    if goal_conditioned {
        let mut v = traj.frame(i).to_vec();
        v.extend_from_slice(traj.goal_frame());
        v
    } else {
        traj.states[i].clone()
    }
}

pub fn ranking_input_dim(traj: &Trajectory, goal_conditioned: bool) -> usize {
    if goal_conditioned {
        2 * traj.frame_dim()
    } else {
        traj.state_dim()
    }
}

/// Picks a trajectory uniformly, then two distinct indices uniformly.
pub fn sample_pair_batch<R: Rng + ?Sized>(
    trajectories: &[Trajectory],
    batch_size: usize,
    goal_conditioned: bool,
    rng: &mut R,
) -> Result<PairBatch> {
    if trajectories.is_empty() {
        return Err(Error::argument("cannot sample pairs from an empty dataset"));
    }
    if let Some(t) = trajectories.iter().find(|t| t.len() < 2) {
        return Err(Error::argument(format!("trajectory of length {} has no pairs", t.len())));
    }
    let dim = ranking_input_dim(&trajectories[0], goal_conditioned);
    let mut first = Vec::with_capacity(batch_size * dim);
    let mut second = Vec::with_capacity(batch_size * dim);
    let mut labels = Vec::with_capacity(batch_size);
    let mut ids = Vec::with_capacity(batch_size);
    let mut pairs = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let k = rng.random_range(0..trajectories.len());
        let t = &trajectories[k];
        let i = rng.random_range(0..t.len());
        let mut j = rng.random_range(0..t.len() - 1);
        if j >= i {
            j += 1;
        }
        let a = ranking_input(t, i, goal_conditioned);
        let b = ranking_input(t, j, goal_conditioned);
        if a.len() != dim {
            return Err(Error::shape("trajectories disagree on state dimension"));
        }
        first.extend_from_slice(&a);
        second.extend_from_slice(&b);
        labels.push(if i > j { 1.0 } else { 0.0 });
        ids.push(k);
        pairs.push((i, j));
    }
    Ok(PairBatch {
        first_states: Matrix::from_vec(batch_size, dim, first)?,
        second_states: Matrix::from_vec(batch_size, dim, second)?,
        labels,
        trajectory_ids: ids,
        index_pairs: pairs,
    })
}

impl RankingModel {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, config: &RankingConfig, rng: &mut R) -> Result<Self> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(1);
        let mask = last_hidden_mask(sizes.len() - 1, config.spectral_norm);
        Ok(Self {
            net: Mlp::new(&sizes, mask, rng)?,
            anchor_offset: 0.0,
            goal_conditioned: config.goal_conditioned,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Raw network outputs for each row, before anchoring.
    pub fn raw_utilities(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        let out = self.net.predict(inputs)?;
        let v = out.into_vec();
        if let Some(bad) = v.iter().find(|u| !u.is_finite()) {
            return Err(Error::numeric(format!("non-finite utility {bad}")));
        }
        Ok(v)
    }

    /// Anchored utilities `u(s) - offset` for each row.
    pub fn utilities(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        Ok(self
            .raw_utilities(inputs)?
            .into_iter()
            .map(|u| u - self.anchor_offset)
            .collect())
    }

    pub fn utility(&self, input: &[f64]) -> Result<f64> {
        let m = Matrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.utilities(&m)?[0])
    }

    /// `sigmoid(utility)`.
    pub fn progress_likelihood(&self, input: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.utility(input)?))
    }

    pub fn log_progress_likelihood(&self, input: &[f64]) -> Result<f64> {
        Ok(stable_log_sigmoid(self.utility(input)?))
    }

    /// Sets the offset so that the mean utility over every trajectory's first
    /// frame is zero.
    pub fn anchor(&mut self, trajectories: &[Trajectory]) -> Result<()> {
        if trajectories.is_empty() {
            return Err(Error::argument("cannot anchor on an empty dataset"));
        }
        let starts: Vec<Vec<f64>> = trajectories
            .iter()
            .map(|t| ranking_input(t, 0, self.goal_conditioned))
            .collect();
        let raw = self.raw_utilities(&Matrix::from_rows(&starts)?)?;
        self.anchor_offset = raw.iter().sum::<f64>() / raw.len() as f64;
        Ok(())
    }

    /// Anchored utilities along a trajectory.
    pub fn trajectory_utilities(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..traj.len())
            .map(|i| ranking_input(traj, i, self.goal_conditioned))
            .collect();
        self.utilities(&Matrix::from_rows(&rows)?)
    }

    /// Gradient of the utility with respect to the model input.
    pub fn input_gradient(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let (_, cache) = self.net.forward(&x)?;
        let (_, dx) = self.net.backward(&cache, &Matrix::from_vec(1, 1, vec![1.0])?)?;
        Ok(dx.into_vec())
    }
}

/// Mean Bradley-Terry negative log-likelihood of a pair batch and its
/// parameter gradient. With a mix plan, both members of each pair and the
/// labels are mixed with the same partner and coefficient.
pub fn ranking_loss(model: &RankingModel, batch: &PairBatch, mix: Option<&MixPlan>) -> Result<(f64, MlpGrads)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::argument("empty pair batch"));
    }
    let (first, second, labels) = match mix {
        Some(plan) => (
            plan.mix_rows(&batch.first_states)?,
            plan.mix_rows(&batch.second_states)?,
            plan.mix_labels(&batch.labels),
        ),
        None => (
            batch.first_states.clone(),
            batch.second_states.clone(),
            batch.labels.clone(),
        ),
    };
    let stacked = Matrix::from_vec(2 * n, first.cols(), [first.into_vec(), second.into_vec()].concat())?;
    let (out, cache) = model.net.forward(&stacked)?;
    let mut loss = 0.0;
    let mut grad_out = Matrix::zeros(2 * n, 1);
    for i in 0..n {
        let diff = out[(i, 0)] - out[(n + i, 0)];
        if !diff.is_finite() {
            return Err(Error::numeric(format!("non-finite utility difference in pair {i}")));
        }
        let (l, g) = bce_with_logits(diff, labels[i]);
        loss += l / n as f64;
        grad_out[(i, 0)] = g / n as f64;
        grad_out[(n + i, 0)] = -g / n as f64;
    }
    let (grads, _) = model.net.backward(&cache, &grad_out)?;
    Ok((loss, grads))
}

/// Fits a ranking model on expert trajectories with Adam, then anchors it.
pub fn train_ranking<R: Rng + ?Sized>(
    trajectories: &[Trajectory],
    config: &RankingConfig,
    rng: &mut R,
) -> Result<RankingModel> {
    if trajectories.is_empty() {
        return Err(Error::argument("ranking needs at least one trajectory"));
    }
    let dim = ranking_input_dim(&trajectories[0], config.goal_conditioned);
    let mut model = RankingModel::new(dim, config, rng)?;
    let mut adam = AdamState::for_mlp(&model.net.params, config.learning_rate);
    let sampler = if config.mixup {
        Some(MixupSampler::new(config.mixup_alpha)?)
    } else {
        None
    };
    for step in 0..config.steps {
        model.net.refresh_spectral();
        let batch = sample_pair_batch(trajectories, config.batch_size, config.goal_conditioned, rng)?;
        let plan = sampler.map(|s| s.plan(batch.len(), rng));
        let (loss, grads) = ranking_loss(&model, &batch, plan.as_ref()).map_err(|e| Error::Training {
            step,
            message: e.to_string(),
        })?;
        if !loss.is_finite() {
            return Err(Error::Training {
                step,
                message: format!("ranking loss is {loss}"),
            });
        }
        adam.step_mlp(&mut model.net.params, &grads).map_err(|e| Error::Training {
            step,
            message: e.to_string(),
        })?;
    }
    model.anchor(trajectories)?;
    Ok(model)
}

/// Kendall rank correlation between `values` and their index order,
/// counting ties as neither concordant nor discordant.
pub fn kendall_tau_of(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            if values[j] > values[i] {
                score += 1;
            } else if values[j] < values[i] {
                score -= 1;
            }
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}

/// Kendall tau between the model's utilities along `traj` and time.
pub fn kendall_tau(model: &RankingModel, traj: &Trajectory) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::argument("Kendall tau needs at least two states"));
    }
    Ok(kendall_tau_of(&model.trajectory_utilities(traj)?))
}

/// Mean Kendall tau over a dataset.
pub fn mean_kendall_tau(model: &RankingModel, dataset: &ExpertDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::argument("no trajectories to score"));
    }
    let mut total = 0.0;
    for t in &dataset.trajectories {
        total += kendall_tau(model, t)?;
    }
    Ok(total / dataset.len() as f64)
}

pub const RANKING_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingCheckpoint {
    pub version: u32,
    pub net: MlpCheckpoint,
    pub anchor_offset: f64,
    pub goal_conditioned: bool,
}

impl RankingCheckpoint {
    pub fn from_model(model: &RankingModel) -> Self {
        Self {
            version: RANKING_CHECKPOINT_VERSION,
            net: MlpCheckpoint::from_mlp(&model.net, None),
            anchor_offset: model.anchor_offset,
            goal_conditioned: model.goal_conditioned,
        }
    }

    pub fn into_model(self) -> Result<RankingModel> {
        if self.version != RANKING_CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported ranking checkpoint version {}", self.version)));
        }
        let (net, _) = self.net.into_mlp()?;
        if net.output_dim() != 1 {
            return Err(Error::Format("ranking network must have one output".into()));
        }
        if !self.anchor_offset.is_finite() {
            return Err(Error::Format("anchor offset is not finite".into()));
        }
        Ok(RankingModel {
            net,
            anchor_offset: self.anchor_offset,
            goal_conditioned: self.goal_conditioned,
        })
    }
}
