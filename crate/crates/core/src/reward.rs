//! Reward composition, baseline rewards and reward landscapes.
//!
//! The combined reward is
//!
//! ```text
//! r(s) = log p(s) + alpha * (log D(s) - log(1 - D(s)))
//! ```
//!
//! with `p = sigmoid(utility)` and `D = sigmoid(logit)`, both clamped to
//! `[eps, 1 - eps]`. It is the logarithm of `p(s) * (D / (1 - D))^alpha`;
//! [`product_form_from_parts`] evaluates that product directly and exists to
//! check the two agree.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::RewardSource;
use crate::demos::Trajectory;
use crate::discrim::{ClassifierMode, Discriminator};
use crate::error::{Error, Result};
use crate::numkit::checkpoint::write_atomic;
use crate::numkit::loss::{clamp_probability, sigmoid, stable_log_sigmoid};
use crate::numkit::{format_significant, Matrix, PROB_CLAMP};
use crate::ranking::RankingModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// Ranking progress plus classifier log-odds.
    Combined,
    Gail,
    Airl,
    Vice,
    RankingOnly,
}

impl RewardKind {
    pub fn needs_ranking(self) -> bool {
        matches!(self, RewardKind::Combined | RewardKind::RankingOnly)
    }

    pub fn needs_discriminator(self) -> bool {
        !matches!(self, RewardKind::RankingOnly)
    }

    pub fn tag(self) -> &'static str {
        match self {
            RewardKind::Combined => "combined",
            RewardKind::Gail => "gail",
            RewardKind::Airl => "airl",
            RewardKind::Vice => "vice",
            RewardKind::RankingOnly => "ranking_only",
        }
    }
}

/// `log sigmoid(utility)` clamped to `[log eps, log(1 - eps)]`.
pub fn log_progress_term(utility: f64, eps: f64) -> f64 {
    stable_log_sigmoid(utility).clamp(eps.ln(), (1.0 - eps).ln())
}

/// `log D - log(1 - D)` for the clamped `D = sigmoid(logit)`.
pub fn log_odds_term(logit: f64, eps: f64) -> f64 {
    let bound = (1.0 - eps).ln() - eps.ln();
    logit.clamp(-bound, bound)
}

pub fn combined_from_parts(utility: f64, logit: f64, alpha: f64, eps: f64) -> f64 {
    log_progress_term(utility, eps) + alpha * log_odds_term(logit, eps)
}

/// `log(p * (D / (1 - D))^alpha)` evaluated as written, without clamping.
pub fn product_form_from_parts(utility: f64, logit: f64, alpha: f64) -> Result<f64> {
    let p = sigmoid(utility);
    let d = sigmoid(logit);
    if !(d > 0.0 && d < 1.0) || p <= 0.0 {
        return Err(Error::numeric(format!("probability {d} leaves the open unit interval")));
    }
    Ok((p * (d / (1.0 - d)).powf(alpha)).ln())
}

/// Interval containing every clamped reward for the given `alpha` and `eps`.
pub fn reward_bounds(alpha: f64, eps: f64) -> (f64, f64) {
    let odds = (1.0 - eps).ln() - eps.ln();
    (eps.ln() - alpha * odds, (1.0 - eps).ln() + alpha * odds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    pub kind: RewardKind,
    pub ranking: Option<RankingModel>,
    pub disc: Option<Discriminator>,
    pub alpha: f64,
    pub clamp_epsilon: f64,
    /// GAIL reward as `log D` (default) rather than `D`.
    pub gail_log: bool,
}

impl RewardModel {
    pub fn new(
        kind: RewardKind,
        ranking: Option<RankingModel>,
        disc: Option<Discriminator>,
        alpha: f64,
    ) -> Result<Self> {
        let m = Self {
            kind,
            ranking,
            disc,
            alpha,
            clamp_epsilon: PROB_CLAMP,
            gail_log: true,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", format!("must be a finite value >= 0, got {}", self.alpha)));
        }
        if !(self.clamp_epsilon > 0.0 && self.clamp_epsilon < 0.5) {
            return Err(Error::config("clamp_epsilon", "must lie in (0, 0.5)"));
        }
        if self.kind.needs_ranking() && self.ranking.is_none() {
            return Err(Error::config("kind", format!("{} reward needs a ranking model", self.kind.tag())));
        }
        if self.kind.needs_discriminator() && self.disc.is_none() {
            return Err(Error::config("kind", format!("{} reward needs a discriminator", self.kind.tag())));
        }
        if self.kind == RewardKind::Vice {
            let mode = self.disc.as_ref().map(|d| d.config.mode);
            if mode != Some(ClassifierMode::GoalVsPolicy) {
                return Err(Error::config("kind", "vice reward needs a goal-state discriminator"));
            }
        }
        Ok(())
    }

    fn ranking(&self) -> Result<&RankingModel> {
        self.ranking
            .as_ref()
            .ok_or_else(|| Error::config("kind", "reward needs a ranking model"))
    }

    fn disc(&self) -> Result<&Discriminator> {
        self.disc
            .as_ref()
            .ok_or_else(|| Error::config("kind", "reward needs a discriminator"))
    }

    pub fn is_goal_conditioned(&self) -> bool {
        self.ranking.as_ref().is_some_and(|r| r.goal_conditioned) || self.disc.as_ref().is_some_and(|d| d.goal_conditioned)
    }

    fn combined_rows(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        let u = self.ranking()?.utilities(inputs)?;
        let l = self.disc()?.logits(inputs)?;
        Ok(u.iter()
            .zip(&l)
            .map(|(&u, &l)| combined_from_parts(u, l, self.alpha, self.clamp_epsilon))
            .collect())
    }

    fn baseline_rows(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        let eps = self.clamp_epsilon;
        match self.kind {
            RewardKind::Combined => Err(Error::config("kind", "combined reward is not a baseline")),
            RewardKind::RankingOnly => Ok(self
                .ranking()?
                .utilities(inputs)?
                .into_iter()
                .map(|u| log_progress_term(u, eps))
                .collect()),
            RewardKind::Gail | RewardKind::Vice => {
                let log = self.gail_log || self.kind == RewardKind::Vice;
                Ok(self
                    .disc()?
                    .logits(inputs)?
                    .into_iter()
                    .map(|l| {
                        let d = clamp_probability(sigmoid(l), eps);
                        if log {
                            d.ln()
                        } else {
                            d
                        }
                    })
                    .collect())
            }
            RewardKind::Airl => Ok(self
                .disc()?
                .logits(inputs)?
                .into_iter()
                .map(|l| log_odds_term(l, eps))
                .collect()),
        }
    }

    /// Reward of each row under the model's kind.
    pub fn rewards(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        match self.kind {
            RewardKind::Combined => self.combined_rows(inputs),
            _ => self.baseline_rows(inputs),
        }
    }

    pub fn reward(&self, input: &[f64]) -> Result<f64> {
        Ok(self.rewards(&row(input)?)?[0])
    }

    pub fn combined_reward(&self, input: &[f64]) -> Result<f64> {
        if self.kind != RewardKind::Combined {
            return Err(Error::config("kind", format!("{} model has no combined reward", self.kind.tag())));
        }
        Ok(self.combined_rows(&row(input)?)?[0])
    }

    pub fn product_form_reward(&self, input: &[f64]) -> Result<f64> {
        if self.kind != RewardKind::Combined {
            return Err(Error::config("kind", format!("{} model has no combined reward", self.kind.tag())));
        }
        let x = row(input)?;
        let u = self.ranking()?.utilities(&x)?[0];
        let l = self.disc()?.logits(&x)?[0];
        product_form_from_parts(u, l, self.alpha)
    }

    pub fn baseline_reward(&self, input: &[f64]) -> Result<f64> {
        Ok(self.baseline_rows(&row(input)?)?[0])
    }
}

fn row(input: &[f64]) -> Result<Matrix> {
    Matrix::from_vec(1, input.len(), input.to_vec())
}

impl RewardSource for RewardModel {
    fn rewards(&self, next_states: &Matrix) -> Result<Vec<f64>> {
        RewardModel::rewards(self, next_states)
    }
}

/// Rewards along a demonstration. Goal-conditioned models score each frame
/// against `goal` (use the trajectory's own final frame for the true goal, or
/// another trajectory's for a counterfactual); other models ignore `goal`
/// and score the stored states.
pub fn trajectory_rewards(model: &RewardModel, traj: &Trajectory, goal: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut data = Vec::new();
    let cols = if model.is_goal_conditioned() {
        let goal = goal.ok_or_else(|| Error::config("goal", "goal-conditioned reward needs a goal frame"))?;
        if goal.len() != traj.frame_dim() {
            return Err(Error::shape(format!(
                "goal has {} values, frames have {}",
                goal.len(),
                traj.frame_dim()
            )));
        }
        for i in 0..traj.len() {
            data.extend_from_slice(traj.frame(i));
            data.extend_from_slice(goal);
        }
        2 * traj.frame_dim()
    } else {
        for s in &traj.states {
            data.extend_from_slice(s);
        }
        traj.state_dim()
    };
    model.rewards(&Matrix::from_vec(traj.len(), cols, data)?)
}

/// One lattice point of a reward landscape. Components the model lacks are
/// `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub utility: Option<f64>,
    pub p_rf: Option<f64>,
    pub d: Option<f64>,
    pub ratio: Option<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardGrid {
    pub resolution: usize,
    /// Row-major: `x` varies fastest.
    pub cells: Vec<GridCell>,
}

pub const GRID_HEADER: &str = "x,y,utility,p_rf,d,ratio,reward";

/// Evaluates the model on the uniform `resolution x resolution` lattice over
/// the unit square. `goal` is appended to each position and is required for
/// goal-conditioned models.
pub fn reward_grid(model: &RewardModel, resolution: usize, goal: Option<[f64; 2]>) -> Result<RewardGrid> {
    if resolution < 2 {
        return Err(Error::argument(format!("grid resolution {resolution} must be at least 2")));
    }
    if model.is_goal_conditioned() && goal.is_none() {
        return Err(Error::config("goal", "goal-conditioned reward grid needs a fixed goal"));
    }
    let step = 1.0 / (resolution - 1) as f64;
    let mut rows = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        for i in 0..resolution {
            let mut r = vec![i as f64 * step, j as f64 * step];
            if let Some(g) = goal {
                r.extend_from_slice(&g);
            }
            rows.push(r);
        }
    }
    let inputs = Matrix::from_rows(&rows)?;
    let utilities = model.ranking.as_ref().map(|r| r.utilities(&inputs)).transpose()?;
    let logits = model.disc.as_ref().map(|d| d.logits(&inputs)).transpose()?;
    let rewards = model.rewards(&inputs)?;
    let eps = model.clamp_epsilon;
    let cells = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let utility = utilities.as_ref().map(|u| u[k]);
            let d = logits.as_ref().map(|l| clamp_probability(sigmoid(l[k]), eps));
            GridCell {
                x: r[0],
                y: r[1],
                utility,
                p_rf: utility.map(sigmoid),
                d,
                ratio: d.map(|d| d / (1.0 - d)),
                reward: rewards[k],
            }
        })
        .collect();
    Ok(RewardGrid { resolution, cells })
}

impl RewardGrid {
    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map(|v| format_significant(v, 9)).unwrap_or_default();
        let mut out = String::with_capacity(64 * self.cells.len());
        out.push_str(GRID_HEADER);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                f(Some(c.x)),
                f(Some(c.y)),
                f(c.utility),
                f(c.p_rf),
                f(c.d),
                f(c.ratio),
                f(Some(c.reward))
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    /// Mean of `field` over cells within `radius` of `center`, skipping
    /// missing values. `None` when no cell qualifies.
    pub fn mean_in_disc<F>(&self, center: [f64; 2], radius: f64, field: F) -> Option<f64>
    where
        F: Fn(&GridCell) -> Option<f64>,
    {
        let vals: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| ((c.x - center[0]).powi(2) + (c.y - center[1]).powi(2)).sqrt() <= radius)
            .filter_map(field)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Cells at least `min_distance` from every reference point whose
    /// progress likelihood is at least `min_p_rf` and whose reward is below
    /// `reward_ceiling`: regions the ranking over-rates but the full reward
    /// suppresses.
    pub fn spurious_cells(
        &self,
        reference: &[Vec<f64>],
        min_distance: f64,
        min_p_rf: f64,
        reward_ceiling: f64,
    ) -> Vec<&GridCell> {
        self.cells
            .iter()
            .filter(|c| {
                reference
                    .iter()
                    .all(|s| ((c.x - s[0]).powi(2) + (c.y - s[1]).powi(2)).sqrt() >= min_distance)
            })
            .filter(|c| c.p_rf.is_some_and(|p| p >= min_p_rf) && c.reward < reward_ceiling)
            .collect()
    }
}
