//! Expert-vs-policy state classifier and density-ratio estimate.
//!
//! With balanced classes, the Bayes-optimal classifier satisfies
//! `D / (1 - D) = d_expert / d_policy`, so the classifier's odds estimate the
//! density ratio. Three batch constructions are supported: expert states
//! against replay states, final expert states against replay states (the
//! goal classifier used by the VICE baseline), and frames paired with their
//! own trajectory's goal against frames paired with another trajectory's goal
//! (counterfactual goals, used for goal-conditioned rewards).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::ReplayBuffer;
use crate::demos::ExpertDataset;
use crate::error::{Error, Result};
use crate::numkit::checkpoint::MlpCheckpoint;
use crate::numkit::loss::{bce_with_logits, clamp_probability, sigmoid};
use crate::numkit::{last_hidden_mask, AdamState, Matrix, MixupSampler, Mlp, MlpGrads, PROB_CLAMP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierMode {
    ExpertVsPolicy,
    GoalVsPolicy,
    Counterfactual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub mixup: bool,
    pub mixup_alpha: f64,
    pub spectral_norm: bool,
    /// Adam steps per update call.
    pub updates_per_call: usize,
    /// Environment steps between update calls.
    pub update_every: usize,
    pub mode: ClassifierMode,
}

impl Default for DiscConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            learning_rate: 3e-4,
            batch_size: 256,
            mixup: true,
            mixup_alpha: 1.0,
            spectral_norm: true,
            updates_per_call: 1,
            update_every: 1,
            mode: ClassifierMode::ExpertVsPolicy,
        }
    }
}

impl DiscConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(Error::config("disc_batch_size", "must be even and at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("disc_lr", "must be positive"));
        }
        if self.updates_per_call == 0 {
            return Err(Error::config("disc_updates_per_call", "must be at least 1"));
        }
        if self.update_every == 0 {
            return Err(Error::config("reward_update_frequency", "must be at least 1"));
        }
        if !(self.mixup_alpha > 0.0 && self.mixup_alpha.is_finite()) {
            return Err(Error::config("mixup_alpha", "must be positive"));
        }
        Ok(())
    }
}

/// Positive-class material prepared once from an expert dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPool {
    mode: ClassifierMode,
    states: Matrix,
    frames: Vec<Matrix>,
    goals: Vec<Vec<f64>>,
}

impl ExpertPool {
    pub fn new(dataset: &ExpertDataset, mode: ClassifierMode) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::argument("expert dataset is empty"));
        }
        let trajs = &dataset.trajectories;
        let states = match mode {
            ClassifierMode::ExpertVsPolicy => Matrix::from_rows(&dataset.all_states().collect::<Vec<_>>())?,
            ClassifierMode::GoalVsPolicy => {
                Matrix::from_rows(&trajs.iter().map(|t| t.states[t.len() - 1].clone()).collect::<Vec<_>>())?
            }
            ClassifierMode::Counterfactual => {
                if trajs.len() < 2 {
                    return Err(Error::argument("counterfactual goals need at least two trajectories"));
                }
                Matrix::zeros(0, 0)
            }
        };
        let (frames, goals) = if mode == ClassifierMode::Counterfactual {
            let frames = trajs
                .iter()
                .map(|t| Matrix::from_rows(&(0..t.len()).map(|i| t.frame(i).to_vec()).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            (frames, trajs.iter().map(|t| t.goal_frame().to_vec()).collect())
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            mode,
            states,
            frames,
            goals,
        })
    }

    pub fn mode(&self) -> ClassifierMode {
        self.mode
    }

    /// Width of a classifier input row.
    pub fn input_dim(&self) -> usize {
        match self.mode {
            ClassifierMode::Counterfactual => 2 * self.frames[0].cols(),
            _ => self.states.cols(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierBatch {
    pub states: Matrix,
    /// 1 for the expert (or true-goal) class, 0 otherwise; fractional after mixup.
    pub labels: Vec<f64>,
}

fn push_row(out: &mut Vec<f64>, parts: &[&[f64]]) {
    for p in parts {
        out.extend_from_slice(p);
    }
}

/// A balanced batch: the first half positives, the second half negatives,
/// then mixed pairwise when a sampler is given.
pub fn build_classifier_batch<R: Rng + ?Sized>(
    pool: &ExpertPool,
    replay: &ReplayBuffer,
    batch_size: usize,
    mixup: Option<&MixupSampler>,
    rng: &mut R,
) -> Result<ClassifierBatch> {
    if batch_size < 2 || batch_size % 2 != 0 {
        return Err(Error::argument(format!("batch size {batch_size} must be even and at least 2")));
    }
    let half = batch_size / 2;
    let dim = pool.input_dim();
    let mut rows = Vec::with_capacity(batch_size * dim);
    match pool.mode {
        ClassifierMode::ExpertVsPolicy | ClassifierMode::GoalVsPolicy => {
            if replay.is_empty() {
                return Err(Error::NotReady("no policy states yet".into()));
            }
            if replay.state_dim() != dim {
                return Err(Error::shape(format!(
                    "replay states have {} columns, expert states {dim}",
                    replay.state_dim()
                )));
            }
            for _ in 0..half {
                let i = rng.random_range(0..pool.states.rows());
                rows.extend_from_slice(pool.states.row(i));
            }
            rows.extend_from_slice(replay.sample_states(half, rng)?.data());
        }
        ClassifierMode::Counterfactual => {
            let n = pool.frames.len();
            for _ in 0..half {
                let k = rng.random_range(0..n);
                let i = rng.random_range(0..pool.frames[k].rows());
                push_row(&mut rows, &[pool.frames[k].row(i), &pool.goals[k]]);
            }
            for _ in 0..half {
                let k = rng.random_range(0..n);
                let i = rng.random_range(0..pool.frames[k].rows());
                let mut j = rng.random_range(0..n - 1);
                if j >= k {
                    j += 1;
                }
                push_row(&mut rows, &[pool.frames[k].row(i), &pool.goals[j]]);
            }
        }
    }
    let states = Matrix::from_vec(batch_size, dim, rows)?;
    let labels: Vec<f64> = (0..batch_size).map(|i| if i < half { 1.0 } else { 0.0 }).collect();
    match mixup {
        Some(sampler) => {
            let plan = sampler.plan(batch_size, rng);
            Ok(ClassifierBatch {
                states: plan.mix_rows(&states)?,
                labels: plan.mix_labels(&labels),
            })
        }
        None => Ok(ClassifierBatch { states, labels }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub net: Mlp,
    pub adam: AdamState,
    pub goal_conditioned: bool,
    pub mixup_enabled: bool,
    pub config: DiscConfig,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, config: DiscConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, last_hidden_mask(sizes.len() - 1, config.spectral_norm), rng)?;
        Ok(Self {
            adam: AdamState::for_mlp(&net.params, config.learning_rate),
            net,
            goal_conditioned: config.mode == ClassifierMode::Counterfactual,
            mixup_enabled: config.mixup,
            config,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn logits(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        let v = self.net.predict(inputs)?.into_vec();
        if let Some(bad) = v.iter().find(|l| !l.is_finite()) {
            return Err(Error::numeric(format!("non-finite discriminator logit {bad}")));
        }
        Ok(v)
    }

    pub fn logit(&self, input: &[f64]) -> Result<f64> {
        Ok(self.logits(&Matrix::from_vec(1, input.len(), input.to_vec())?)?[0])
    }

    /// `sigmoid(logit)` clamped to `[1e-7, 1 - 1e-7]`.
    pub fn classify(&self, input: &[f64]) -> Result<f64> {
        Ok(clamp_probability(sigmoid(self.logit(input)?), PROB_CLAMP))
    }

    /// `D / (1 - D)` with the clamped `D`.
    pub fn density_ratio(&self, input: &[f64]) -> Result<f64> {
        let d = self.classify(input)?;
        Ok(d / (1.0 - d))
    }

    fn sampler(&self) -> Result<Option<MixupSampler>> {
        if self.mixup_enabled {
            Ok(Some(MixupSampler::new(self.config.mixup_alpha)?))
        } else {
            Ok(None)
        }
    }

    /// One power-iteration refresh and one Adam step on `batch`.
    pub fn train_on_batch(&mut self, batch: &ClassifierBatch) -> Result<f64> {
        self.net.refresh_spectral();
        let (loss, grads) = discriminator_loss(self, batch)?;
        self.adam.step_mlp(&mut self.net.params, &grads)?;
        Ok(loss)
    }
}

/// Mean binary cross-entropy of `sigmoid(logit)` against the labels, in
/// logit form so saturated logits stay exact.
pub fn discriminator_loss(disc: &Discriminator, batch: &ClassifierBatch) -> Result<(f64, MlpGrads)> {
    let n = batch.labels.len();
    if n == 0 || batch.states.rows() != n {
        return Err(Error::shape("classifier batch rows and labels disagree"));
    }
    let (out, cache) = disc.net.forward(&batch.states)?;
    let mut loss = 0.0;
    let mut g = Matrix::zeros(n, 1);
    for i in 0..n {
        let logit = out[(i, 0)];
        if !logit.is_finite() {
            return Err(Error::numeric(format!("non-finite logit in row {i}")));
        }
        let (l, d) = bce_with_logits(logit, batch.labels[i]);
        loss += l / n as f64;
        g[(i, 0)] = d / n as f64;
    }
    let (grads, _) = disc.net.backward(&cache, &g)?;
    Ok((loss, grads))
}

/// `updates_per_call` steps on fresh batches; returns the mean loss.
pub fn update_discriminator<R: Rng + ?Sized>(
    disc: &mut Discriminator,
    pool: &ExpertPool,
    replay: &ReplayBuffer,
    rng: &mut R,
) -> Result<f64> {
    let sampler = disc.sampler()?;
    let k = disc.config.updates_per_call;
    let mut total = 0.0;
    for _ in 0..k {
        let batch = build_classifier_batch(pool, replay, disc.config.batch_size, sampler.as_ref(), rng)?;
        total += disc.train_on_batch(&batch)?;
    }
    Ok(total / k as f64)
}

pub const DISC_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscCheckpoint {
    pub version: u32,
    pub config: DiscConfig,
    pub goal_conditioned: bool,
    pub mixup_enabled: bool,
    pub net: MlpCheckpoint,
}

impl DiscCheckpoint {
    pub fn from_disc(disc: &Discriminator) -> Self {
        Self {
            version: DISC_CHECKPOINT_VERSION,
            config: disc.config.clone(),
            goal_conditioned: disc.goal_conditioned,
            mixup_enabled: disc.mixup_enabled,
            net: MlpCheckpoint::from_mlp(&disc.net, Some(&disc.adam)),
        }
    }

    pub fn into_disc(self) -> Result<Discriminator> {
        if self.version != DISC_CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported discriminator checkpoint version {}", self.version)));
        }
        let (net, adam) = self.net.into_mlp()?;
        if net.output_dim() != 1 {
            return Err(Error::Format("discriminator must have one output".into()));
        }
        let adam = adam.ok_or_else(|| Error::Format("discriminator record lacks optimizer state".into()))?;
        Ok(Discriminator {
            net,
            adam,
            goal_conditioned: self.goal_conditioned,
            mixup_enabled: self.mixup_enabled,
            config: self.config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Transition;
    use crate::demos::{EnvKind, Split, Trajectory};
    use crate::numkit::{finite_diff_grad, relative_error, MlpParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::LN_2;

    fn gaussian_points(center: [f64; 2], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let noise = Normal::new(0.0, 0.05).unwrap();
        (0..n)
            .map(|_| vec![center[0] + noise.sample(rng), center[1] + noise.sample(rng)])
            .collect()
    }

    fn dataset_from(points: Vec<Vec<f64>>) -> ExpertDataset {
        let trajs = points
            .chunks(10)
            .map(|c| Trajectory::new(EnvKind::Synthetic, c.to_vec()).unwrap())
            .collect();
        ExpertDataset::new(trajs, Split::Train)
    }

    fn replay_from(points: Vec<Vec<f64>>) -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(points.len(), 2, 2).unwrap();
        for p in points {
            buf.push(Transition {
                state: p.clone(),
                action: vec![0.0, 0.0],
                next_state: p,
                done: false,
            })
            .unwrap();
        }
        buf
    }

    fn config(mixup: bool) -> DiscConfig {
        DiscConfig {
            hidden: vec![16, 16],
            learning_rate: 3e-3,
            batch_size: 64,
            mixup,
            ..DiscConfig::default()
        }
    }

    #[test]
    fn batch_of_two_is_one_of_each() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pool = ExpertPool::new(&dataset_from(gaussian_points([0.2, 0.2], 20, &mut rng)), ClassifierMode::ExpertVsPolicy).unwrap();
        let replay = replay_from(gaussian_points([0.8, 0.8], 5, &mut rng));
        let b = build_classifier_batch(&pool, &replay, 2, None, &mut rng).unwrap();
        assert_eq!(b.labels, vec![1.0, 0.0]);
        assert!(b.states.row(0)[0] < 0.5 && b.states.row(1)[0] > 0.5);
    }

    #[test]
    fn degenerate_mixup_keeps_hard_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool = ExpertPool::new(&dataset_from(gaussian_points([0.2, 0.2], 20, &mut rng)), ClassifierMode::ExpertVsPolicy).unwrap();
        let replay = replay_from(gaussian_points([0.8, 0.8], 5, &mut rng));
        let b = build_classifier_batch(&pool, &replay, 8, None, &mut rng).unwrap();
        let plan = crate::numkit::MixPlan::identity(8);
        assert_eq!(plan.mix_labels(&b.labels), b.labels);
        assert!(b.labels.iter().all(|&y| y == 0.0 || y == 1.0));
    }

    #[test]
    fn odd_batch_and_empty_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pool = ExpertPool::new(&dataset_from(gaussian_points([0.2, 0.2], 20, &mut rng)), ClassifierMode::ExpertVsPolicy).unwrap();
        let empty = ReplayBuffer::new(4, 2, 2).unwrap();
        assert!(matches!(build_classifier_batch(&pool, &empty, 4, None, &mut rng), Err(Error::NotReady(_))));
        let replay = replay_from(gaussian_points([0.8, 0.8], 5, &mut rng));
        assert!(matches!(build_classifier_batch(&pool, &replay, 3, None, &mut rng), Err(Error::Argument(_))));
    }

    #[test]
    fn counterfactual_negatives_swap_goals() {
        let a = Trajectory::new(EnvKind::Synthetic, vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![0.2, 0.0]]).unwrap();
        let b = Trajectory::new(EnvKind::Synthetic, vec![vec![0.0, 1.0], vec![0.0, 0.9], vec![0.0, 0.8], vec![0.0, 0.7]]).unwrap();
        let ds = ExpertDataset::new(vec![a.clone(), b.clone()], Split::Train);
        let pool = ExpertPool::new(&ds, ClassifierMode::Counterfactual).unwrap();
        let empty = ReplayBuffer::new(1, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let owner = |frame: &[f64]| if a.states.iter().any(|s| s == frame) { 0 } else { 1 };
        let goals = [a.goal_frame().to_vec(), b.goal_frame().to_vec()];
        for _ in 0..50 {
            let batch = build_classifier_batch(&pool, &empty, 8, None, &mut rng).unwrap();
            for i in 0..8 {
                let row = batch.states.row(i);
                let k = owner(&row[..2]);
                let expect = if batch.labels[i] == 1.0 { &goals[k] } else { &goals[1 - k] };
                assert_eq!(&row[2..], expect.as_slice());
            }
        }
    }

    #[test]
    fn zero_logits_give_ln2() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut disc = Discriminator::new(2, config(false), &mut rng).unwrap();
        disc.net.params = MlpParams::zeros(&[2, 16, 16, 1], disc.net.params.spectral_norm_mask.clone()).unwrap();
        let batch = ClassifierBatch {
            states: Matrix::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]]).unwrap(),
            labels: vec![1.0, 0.0, 0.3],
        };
        let (l, _) = discriminator_loss(&disc, &batch).unwrap();
        assert!((l - LN_2).abs() < 1e-12);
        assert_eq!(disc.classify(&[0.9, 0.9]).unwrap(), 0.5);
        assert_eq!(disc.density_ratio(&[0.9, 0.9]).unwrap(), 1.0);
    }

    fn linear_disc(weights: Vec<f64>, bias: f64) -> Discriminator {
        let n = weights.len();
        let mut params = MlpParams::zeros(&[n, 1], vec![false]).unwrap();
        params.weights[0] = Matrix::from_vec(1, n, weights).unwrap();
        params.biases[0] = vec![bias];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::from_params(params, &mut rng).unwrap();
        Discriminator {
            adam: AdamState::for_mlp(&net.params, 1e-3),
            net,
            goal_conditioned: false,
            mixup_enabled: false,
            config: DiscConfig { hidden: vec![], ..DiscConfig::default() },
        }
    }

    #[test]
    fn saturated_separation_has_tiny_loss() {
        let disc = linear_disc(vec![20.0], 0.0);
        let batch = ClassifierBatch {
            states: Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
            labels: vec![1.0, 0.0],
        };
        assert!(discriminator_loss(&disc, &batch).unwrap().0 < 1e-8);
    }

    #[test]
    fn probability_and_ratio_closed_forms() {
        let disc = linear_disc(vec![1.0], 0.0);
        assert!((disc.classify(&[9f64.ln()]).unwrap() - 0.9).abs() < 1e-12);
        assert!((disc.density_ratio(&[9f64.ln()]).unwrap() - 9.0).abs() < 1e-9);
        let hi = disc.density_ratio(&[100.0]).unwrap();
        assert!((hi - (1.0 - 1e-7) / 1e-7).abs() / hi < 1e-9);
        let mut last = 0.0;
        for k in -30..30 {
            let r = disc.density_ratio(&[k as f64 * 0.5]).unwrap();
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn negated_output_layer_complements() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let disc = Discriminator::new(2, config(false), &mut rng).unwrap();
        let mut neg = disc.clone();
        let last = neg.net.params.weights.len() - 1;
        neg.net.params.weights[last].scale(-1.0);
        neg.net.params.biases[last][0] *= -1.0;
        for x in [[0.1, 0.2], [0.9, 0.4], [0.5, 0.5]] {
            let s = sigmoid(disc.logit(&x).unwrap()) + sigmoid(neg.logit(&x).unwrap());
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut disc = Discriminator::new(2, DiscConfig { hidden: vec![5, 4], ..config(true) }, &mut rng).unwrap();
        disc.net.refresh_spectral();
        let pool = ExpertPool::new(&dataset_from(gaussian_points([0.3, 0.3], 20, &mut rng)), ClassifierMode::ExpertVsPolicy).unwrap();
        let replay = replay_from(gaussian_points([0.6, 0.6], 10, &mut rng));
        let sampler = MixupSampler::new(1.0).unwrap();
        let batch = build_classifier_batch(&pool, &replay, 8, Some(&sampler), &mut rng).unwrap();
        let (_, g) = discriminator_loss(&disc, &batch).unwrap();
        let mut probe = disc.clone();
        let num = finite_diff_grad(
            |p| {
                probe.net.params.set_flat(p).unwrap();
                discriminator_loss(&probe, &batch).unwrap().0
            },
            &disc.net.params.to_flat(),
            1e-6,
        )
        .unwrap();
        for (a, n) in g.to_flat().iter().zip(&num) {
            assert!(relative_error(*a, *n, 1e-6) < 1e-4, "{a} vs {n}");
        }
    }

    #[test]
    fn separated_gaussians_drive_loss_down() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pool = ExpertPool::new(&dataset_from(gaussian_points([0.2, 0.2], 200, &mut rng)), ClassifierMode::ExpertVsPolicy).unwrap();
        let replay = replay_from(gaussian_points([0.8, 0.8], 200, &mut rng));
        let mut disc = Discriminator::new(2, config(false), &mut rng).unwrap();
        let mut losses = Vec::new();
        for _ in 0..1500 {
            losses.push(update_discriminator(&mut disc, &pool, &replay, &mut rng).unwrap());
        }
        let tail: f64 = losses[1400..].iter().sum::<f64>() / 100.0;
        assert!(tail < 0.05, "tail loss {tail}");
        assert!(disc.classify(&[0.2, 0.2]).unwrap() > 0.9);
        assert!(disc.classify(&[0.8, 0.8]).unwrap() < 0.1);
    }

    #[test]
    fn identical_distributions_plateau_at_ln2() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points = gaussian_points([0.5, 0.5], 400, &mut rng);
        let pool = ExpertPool::new(&dataset_from(points[..200].to_vec()), ClassifierMode::ExpertVsPolicy).unwrap();
        let replay = replay_from(points[200..].to_vec());
        let mut disc = Discriminator::new(2, config(true), &mut rng).unwrap();
        let mut losses = Vec::new();
        for _ in 0..600 {
            losses.push(update_discriminator(&mut disc, &pool, &replay, &mut rng).unwrap());
        }
        let tail: f64 = losses[500..].iter().sum::<f64>() / 100.0;
        assert!((tail - LN_2).abs() < 0.05, "tail loss {tail}");
    }

    #[test]
    fn fixed_seed_reproduces_losses() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let pool = ExpertPool::new(&dataset_from(gaussian_points([0.3, 0.3], 30, &mut rng)), ClassifierMode::ExpertVsPolicy).unwrap();
            let replay = replay_from(gaussian_points([0.7, 0.7], 30, &mut rng));
            let mut disc = Discriminator::new(2, config(true), &mut rng).unwrap();
            (0..20)
                .map(|_| update_discriminator(&mut disc, &pool, &replay, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn goal_mode_uses_final_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ds = dataset_from(gaussian_points([0.2, 0.2], 40, &mut rng));
        let pool = ExpertPool::new(&ds, ClassifierMode::GoalVsPolicy).unwrap();
        let finals: Vec<Vec<f64>> = ds.trajectories.iter().map(|t| t.states[t.len() - 1].clone()).collect();
        let replay = replay_from(gaussian_points([0.8, 0.8], 5, &mut rng));
        let b = build_classifier_batch(&pool, &replay, 20, None, &mut rng).unwrap();
        for i in 0..10 {
            assert!(finals.iter().any(|f| f.as_slice() == b.states.row(i)));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut disc = Discriminator::new(3, config(true), &mut rng).unwrap();
        disc.net.refresh_spectral();
        let text = serde_json::to_string(&DiscCheckpoint::from_disc(&disc)).unwrap();
        let back: DiscCheckpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_disc().unwrap(), disc);
    }
}
