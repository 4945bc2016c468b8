//! Continuous 2D environments on the unit square.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    TwoWallMaze,
    PointReach,
    MultiGoalReach,
    /// Non-environment data such as hand-built monotone sequences.
    Synthetic,
}

impl EnvKind {
    pub fn tag(self) -> &'static str {
        match self {
            EnvKind::TwoWallMaze => "two_wall_maze",
            EnvKind::PointReach => "point_reach",
            EnvKind::MultiGoalReach => "multi_goal_reach",
            EnvKind::Synthetic => "synthetic",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [
            EnvKind::TwoWallMaze,
            EnvKind::PointReach,
            EnvKind::MultiGoalReach,
            EnvKind::Synthetic,
        ]
        .into_iter()
        .find(|k| k.tag() == tag)
    }

    /// Number of leading state coordinates that make up a "frame" (what a
    /// camera would see). Multi-goal states carry the commanded goal after
    /// the position, which is not part of the frame.
    pub fn frame_dim(self, state_dim: usize) -> usize {
        match self {
            EnvKind::MultiGoalReach => 2,
            _ => state_dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point,
    pub max: Point,
}

impl Region {
    pub fn point(p: Point) -> Self {
        Self { min: p, max: p }
    }

    pub fn contains(&self, p: Point) -> bool {
        (0..2).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut p = [0.0; 2];
        for i in 0..2 {
            p[i] = if self.min[i] < self.max[i] {
                rng.random_range(self.min[i]..self.max[i])
            } else {
                self.min[i]
            };
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub max_step_norm: f64,
    pub horizon: usize,
    pub goal_radius: f64,
    pub walls: Vec<Segment>,
    pub start_region: Region,
    /// One goal for the maze and point-reach tasks; the candidate set for
    /// multi-goal reach.
    pub goals: Vec<Point>,
    /// Intermediate waypoints followed by the scripted expert before the goal.
    pub waypoints: Vec<Point>,
    pub expert_noise_std: f64,
}

pub const DEFAULT_MAX_STEP_NORM: f64 = 0.05;
pub const DEFAULT_HORIZON: usize = 200;
pub const DEFAULT_GOAL_RADIUS: f64 = 0.05;
pub const DEFAULT_EXPERT_NOISE: f64 = 0.005;

impl EnvSpec {
    /// Top-left start, bottom-right goal. Wall A at `x = 1/3` leaves a gap at
    /// the bottom, wall B at `x = 2/3` leaves a gap at the top, so the
    /// shortest route is an S.
    pub fn two_wall_maze() -> Self {
        Self {
            kind: EnvKind::TwoWallMaze,
            max_step_norm: DEFAULT_MAX_STEP_NORM,
            horizon: DEFAULT_HORIZON,
            goal_radius: DEFAULT_GOAL_RADIUS,
            walls: vec![
                Segment {
                    a: [1.0 / 3.0, 0.2],
                    b: [1.0 / 3.0, 1.0],
                },
                Segment {
                    a: [2.0 / 3.0, 0.0],
                    b: [2.0 / 3.0, 0.8],
                },
            ],
            start_region: Region {
                min: [0.0, 0.9],
                max: [0.1, 1.0],
            },
            goals: vec![[0.95, 0.05]],
            waypoints: vec![[0.10, 0.10], [0.40, 0.10], [0.40, 0.90], [0.72, 0.90]],
            expert_noise_std: DEFAULT_EXPERT_NOISE,
        }
    }

    pub fn point_reach() -> Self {
        Self {
            kind: EnvKind::PointReach,
            max_step_norm: DEFAULT_MAX_STEP_NORM,
            horizon: DEFAULT_HORIZON,
            goal_radius: DEFAULT_GOAL_RADIUS,
            walls: Vec::new(),
            start_region: Region {
                min: [0.05, 0.05],
                max: [0.15, 0.15],
            },
            goals: vec![[0.85, 0.85]],
            waypoints: Vec::new(),
            expert_noise_std: DEFAULT_EXPERT_NOISE,
        }
    }

    /// Start near the center; goals are eight points on a circle of radius 0.35.
    pub fn multi_goal_reach() -> Self {
        let goals = (0..8)
            .map(|k| {
                let angle = std::f64::consts::TAU * k as f64 / 8.0;
                [0.5 + 0.35 * angle.cos(), 0.5 + 0.35 * angle.sin()]
            })
            .collect();
        Self {
            kind: EnvKind::MultiGoalReach,
            max_step_norm: DEFAULT_MAX_STEP_NORM,
            horizon: DEFAULT_HORIZON,
            goal_radius: DEFAULT_GOAL_RADIUS,
            walls: Vec::new(),
            start_region: Region {
                min: [0.45, 0.45],
                max: [0.55, 0.55],
            },
            goals,
            waypoints: Vec::new(),
            expert_noise_std: DEFAULT_EXPERT_NOISE,
        }
    }

    pub fn for_kind(kind: EnvKind) -> Result<Self> {
        match kind {
            EnvKind::TwoWallMaze => Ok(Self::two_wall_maze()),
            EnvKind::PointReach => Ok(Self::point_reach()),
            EnvKind::MultiGoalReach => Ok(Self::multi_goal_reach()),
            EnvKind::Synthetic => Err(Error::argument("synthetic data has no environment")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_square = |p: Point| p.iter().all(|v| (0.0..=1.0).contains(v));
        if self.kind == EnvKind::Synthetic {
            return Err(Error::config("env", "synthetic data has no environment"));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if !(self.max_step_norm > 0.0 && self.max_step_norm.is_finite()) {
            return Err(Error::config("max_step_norm", "must be positive"));
        }
        if !(self.goal_radius > 0.0 && self.goal_radius.is_finite()) {
            return Err(Error::config("goal_radius", "must be positive"));
        }
        if !(self.expert_noise_std >= 0.0 && self.expert_noise_std.is_finite()) {
            return Err(Error::config("expert_noise_std", "must be non-negative"));
        }
        if self.goals.is_empty() || !self.goals.iter().all(|&g| in_square(g)) {
            return Err(Error::config("goals", "need at least one goal inside the unit square"));
        }
        if !in_square(self.start_region.min)
            || !in_square(self.start_region.max)
            || (0..2).any(|i| self.start_region.min[i] > self.start_region.max[i])
        {
            return Err(Error::config("start_region", "must be a box inside the unit square"));
        }
        for w in &self.walls {
            if !in_square(w.a) || !in_square(w.b) || (w.a[0] != w.b[0] && w.a[1] != w.b[1]) {
                return Err(Error::config("walls", "walls must be axis-aligned and inside the unit square"));
            }
        }
        Ok(())
    }

    /// Observation size: position, plus the goal for multi-goal reach.
    pub fn state_dim(&self) -> usize {
        match self.kind {
            EnvKind::MultiGoalReach => 4,
            _ => 2,
        }
    }

    pub fn action_dim(&self) -> usize {
        2
    }

    /// True if moving from `from` to `to` touches any wall.
    pub fn crosses_wall(&self, from: Point, to: Point) -> bool {
        self.walls.iter().any(|w| segments_intersect(from, to, w.a, w.b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub position: Point,
    pub steps_elapsed: usize,
    pub goal: Point,
}

impl EnvState {
    pub fn observation(&self, spec: &EnvSpec) -> Vec<f64> {
        match spec.kind {
            EnvKind::MultiGoalReach => vec![self.position[0], self.position[1], self.goal[0], self.goal[1]],
            _ => self.position.to_vec(),
        }
    }

    pub fn distance_to_goal(&self) -> f64 {
        distance(self.position, self.goal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: EnvState,
    /// 1 on reaching the goal, else 0. Used for evaluation only.
    pub true_reward: f64,
    pub done: bool,
    pub reached_goal: bool,
    /// The proposed move hit a wall and was rejected.
    pub blocked: bool,
}

pub fn env_reset<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> EnvState {
    let position = spec.start_region.sample(rng);
    let goal = if spec.goals.len() == 1 {
        spec.goals[0]
    } else {
        spec.goals[rng.random_range(0..spec.goals.len())]
    };
    EnvState {
        position,
        steps_elapsed: 0,
        goal,
    }
}

/// Scales `action` down to norm `max_norm` if it is longer.
pub fn clip_norm(action: Point, max_norm: f64) -> Point {
    let n = (action[0] * action[0] + action[1] * action[1]).sqrt();
    if n > max_norm {
        [action[0] * max_norm / n, action[1] * max_norm / n]
    } else {
        action
    }
}

pub fn env_step(spec: &EnvSpec, state: &EnvState, action: Point) -> Result<StepOutcome> {
    if !action.iter().all(|a| a.is_finite()) {
        return Err(Error::argument(format!("non-finite action {action:?}")));
    }
    let a = clip_norm(action, spec.max_step_norm);
    let proposed = [
        (state.position[0] + a[0]).clamp(0.0, 1.0),
        (state.position[1] + a[1]).clamp(0.0, 1.0),
    ];
    let blocked = spec.crosses_wall(state.position, proposed);
    let position = if blocked { state.position } else { proposed };
    let next = EnvState {
        position,
        steps_elapsed: state.steps_elapsed + 1,
        goal: state.goal,
    };
    let reached_goal = next.distance_to_goal() <= spec.goal_radius;
    Ok(StepOutcome {
        next,
        true_reward: if reached_goal { 1.0 } else { 0.0 },
        done: reached_goal || next.steps_elapsed >= spec.horizon,
        reached_goal,
        blocked,
    })
}

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test; touching counts as intersecting.
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_start_region_is_exact() {
        let mut spec = EnvSpec::point_reach();
        spec.start_region = Region::point([0.2, 0.3]);
        let s = env_reset(&spec, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(s.position, [0.2, 0.3]);
        assert_eq!(s.steps_elapsed, 0);
    }

    #[test]
    fn maze_resets_in_top_left_box() {
        let spec = EnvSpec::two_wall_maze();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s = env_reset(&spec, &mut rng);
            assert!((0.0..=0.1).contains(&s.position[0]) && (0.9..=1.0).contains(&s.position[1]));
        }
    }

    #[test]
    fn reset_is_deterministic() {
        let spec = EnvSpec::multi_goal_reach();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10).map(|_| env_reset(&spec, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        let goals: std::collections::HashSet<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            (0..200)
                .map(|_| {
                    let g = env_reset(&spec, &mut rng).goal;
                    (g[0].to_bits(), g[1].to_bits())
                })
                .collect()
        };
        assert_eq!(goals.len(), 8);
    }

    #[test]
    fn zero_action_keeps_position() {
        let spec = EnvSpec::two_wall_maze();
        let s = EnvState {
            position: [0.05, 0.95],
            steps_elapsed: 3,
            goal: spec.goals[0],
        };
        let out = env_step(&spec, &s, [0.0, 0.0]).unwrap();
        assert_eq!(out.next.position, s.position);
        assert_eq!(out.next.steps_elapsed, 4);
        assert!(!out.done);
    }

    #[test]
    fn long_action_is_clipped_to_max_step() {
        let spec = EnvSpec::point_reach();
        let s = EnvState {
            position: [0.5, 0.5],
            steps_elapsed: 0,
            goal: spec.goals[0],
        };
        let out = env_step(&spec, &s, [0.12, 0.16]).unwrap();
        let d = distance(s.position, out.next.position);
        assert!((d - 0.05).abs() < 1e-12);
        assert!((out.next.position[0] - 0.53).abs() < 1e-12 && (out.next.position[1] - 0.54).abs() < 1e-12);
    }

    #[test]
    fn move_through_wall_a_is_rejected() {
        let spec = EnvSpec::two_wall_maze();
        // Oracle: the move's x-range [0.30, 0.35] contains x = 1/3 at y = 0.5,
        // and y = 0.5 lies within wall A's span [0.2, 1.0].
        let (x0, x1, y) = (0.30, 0.35, 0.5);
        assert!(x0 < 1.0 / 3.0 && 1.0 / 3.0 < x1 && (0.2..=1.0).contains(&y));
        let s = EnvState {
            position: [x0, y],
            steps_elapsed: 0,
            goal: spec.goals[0],
        };
        let out = env_step(&spec, &s, [0.05, 0.0]).unwrap();
        assert!(out.blocked);
        assert_eq!(out.next.position, s.position);
        assert_eq!(out.next.steps_elapsed, 1);

        // Same move below the wall passes through the gap.
        let s = EnvState { position: [x0, 0.1], ..s };
        let out = env_step(&spec, &s, [0.05, 0.0]).unwrap();
        assert!(!out.blocked);
    }

    #[test]
    fn positions_stay_in_square_and_goal_ends_episode() {
        let spec = EnvSpec::point_reach();
        let s = EnvState {
            position: [0.99, 0.01],
            steps_elapsed: 0,
            goal: spec.goals[0],
        };
        let out = env_step(&spec, &s, [0.05, -0.05]).unwrap();
        assert_eq!(out.next.position, [1.0, 0.0]);
        let s = EnvState {
            position: [0.82, 0.85],
            steps_elapsed: 0,
            goal: spec.goals[0],
        };
        let out = env_step(&spec, &s, [0.01, 0.0]).unwrap();
        assert!(out.done && out.reached_goal && out.true_reward == 1.0);
    }

    #[test]
    fn horizon_ends_episode() {
        let mut spec = EnvSpec::point_reach();
        spec.horizon = 2;
        let s = env_reset(&spec, &mut ChaCha8Rng::seed_from_u64(0));
        let a = env_step(&spec, &s, [0.0, 0.0]).unwrap();
        assert!(!a.done);
        let b = env_step(&spec, &a.next, [0.0, 0.0]).unwrap();
        assert!(b.done && !b.reached_goal && b.true_reward == 0.0);
    }

    #[test]
    fn nonfinite_action_rejected() {
        let spec = EnvSpec::point_reach();
        let s = env_reset(&spec, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(env_step(&spec, &s, [f64::NAN, 0.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn segment_intersection_cases() {
        assert!(segments_intersect([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]));
        assert!(!segments_intersect([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]));
        // touching endpoint
        assert!(segments_intersect([0.0, 0.0], [0.5, 0.5], [0.5, 0.5], [1.0, 0.0]));
        // collinear overlap and collinear disjoint
        assert!(segments_intersect([0.0, 0.0], [0.6, 0.0], [0.5, 0.0], [1.0, 0.0]));
        assert!(!segments_intersect([0.0, 0.0], [0.4, 0.0], [0.5, 0.0], [1.0, 0.0]));
    }

    #[test]
    fn default_specs_validate() {
        for spec in [EnvSpec::two_wall_maze(), EnvSpec::point_reach(), EnvSpec::multi_goal_reach()] {
            spec.validate().unwrap();
        }
        let mut bad = EnvSpec::two_wall_maze();
        bad.horizon = 0;
        assert!(matches!(bad.validate(), Err(Error::Config { .. })));
    }
}
