//! Waypoint-following scripted expert and demonstration generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{ExpertDataset, Split, Trajectory};
use super::env::{clip_norm, distance, env_reset, env_step, EnvSpec, EnvState, Point};
use crate::error::{Error, Result};

/// Follows `spec.waypoints` and then the episode goal. A waypoint counts as
/// reached once the noise-free command lands on it.
#[derive(Debug, Clone)]
pub struct ScriptedExpert {
    route: Vec<Point>,
    cursor: usize,
    finished: bool,
}

impl ScriptedExpert {
    pub fn new(spec: &EnvSpec, state: &EnvState) -> Self {
        let mut route = spec.waypoints.clone();
        route.push(state.goal);
        Self {
            route,
            cursor: 0,
            finished: false,
        }
    }

    pub fn current_waypoint(&self) -> Point {
        self.route[self.cursor]
    }

    /// The last command targeted the final waypoint and reached it.
    pub fn finished(&self) -> bool {
        self.finished
    }

    /// Noise-free command toward the current waypoint, advancing the cursor
    /// when this step reaches it.
    pub fn command(&mut self, spec: &EnvSpec, state: &EnvState) -> Point {
        let target = self.route[self.cursor];
        let delta = [target[0] - state.position[0], target[1] - state.position[1]];
        if distance(state.position, target) <= spec.max_step_norm {
            if self.cursor + 1 < self.route.len() {
                self.cursor += 1;
            } else {
                self.finished = true;
            }
            delta
        } else {
            clip_norm(delta, spec.max_step_norm)
        }
    }

    /// Command plus Gaussian noise with std `spec.expert_noise_std`, clipped
    /// to the step limit.
    pub fn action<R: Rng + ?Sized>(&mut self, spec: &EnvSpec, state: &EnvState, rng: &mut R) -> Point {
        let cmd = self.command(spec, state);
        scripted_noise(spec, cmd, rng)
    }
}

fn scripted_noise<R: Rng + ?Sized>(spec: &EnvSpec, cmd: Point, rng: &mut R) -> Point {
    if spec.expert_noise_std == 0.0 {
        return clip_norm(cmd, spec.max_step_norm);
    }
    let noise = Normal::new(0.0, spec.expert_noise_std).expect("noise std validated non-negative");
    clip_norm(
        [cmd[0] + noise.sample(rng), cmd[1] + noise.sample(rng)],
        spec.max_step_norm,
    )
}

/// Runs one expert episode. Returns the observations and whether it ended
/// within the goal radius.
pub fn expert_rollout<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> Result<(Vec<Vec<f64>>, bool)> {
    let mut state = env_reset(spec, rng);
    let mut expert = ScriptedExpert::new(spec, &state);
    let mut states = vec![state.observation(spec)];
    while state.steps_elapsed < spec.horizon {
        let a = expert.action(spec, &state, rng);
        state = env_step(spec, &state, a)?.next;
        states.push(state.observation(spec));
        if expert.finished() {
            break;
        }
    }
    let success = state.distance_to_goal() <= spec.goal_radius;
    Ok((states, success))
}

/// Generates `n` successful action-free demonstrations. Failed episodes are
/// discarded and resampled; more failures than requested demos is treated as
/// a misconfigured environment.
pub fn generate_demos(spec: &EnvSpec, n_trajectories: usize, seed: u64) -> Result<ExpertDataset> {
    Ok(generate_demos_counted(spec, n_trajectories, seed)?.0)
}

/// As [`generate_demos`], also returning the number of episodes attempted.
pub fn generate_demos_counted(spec: &EnvSpec, n_trajectories: usize, seed: u64) -> Result<(ExpertDataset, usize)> {
    if n_trajectories == 0 {
        return Err(Error::argument("need at least one demonstration"));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectories = Vec::with_capacity(n_trajectories);
    let mut failures = 0usize;
    while trajectories.len() < n_trajectories {
        let (states, success) = expert_rollout(spec, &mut rng)?;
        if success && states.len() >= 2 {
            trajectories.push(Trajectory::new(spec.kind, states)?);
        } else {
            failures += 1;
            if failures > n_trajectories {
                return Err(Error::config(
                    "expert_noise_std",
                    format!("scripted expert failed {failures} times; check the environment geometry and noise"),
                ));
            }
        }
    }
    let attempts = trajectories.len() + failures;
    Ok((ExpertDataset::new(trajectories, Split::Train), attempts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::env::{Region, StepOutcome};

    fn noiseless(mut spec: EnvSpec) -> EnvSpec {
        spec.expert_noise_std = 0.0;
        spec
    }

    #[test]
    fn at_goal_action_is_pure_noise() {
        let spec = EnvSpec::point_reach();
        let state = EnvState {
            position: spec.goals[0],
            steps_elapsed: 0,
            goal: spec.goals[0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 4000;
        let mut mean = [0.0; 2];
        for _ in 0..n {
            let mut e = ScriptedExpert::new(&spec, &state);
            let a = e.action(&spec, &state, &mut rng);
            mean[0] += a[0] / n as f64;
            mean[1] += a[1] / n as f64;
        }
        let se = spec.expert_noise_std / (n as f64).sqrt();
        assert!(mean[0].abs() < 4.0 * se && mean[1].abs() < 4.0 * se);
    }

    #[test]
    fn point_reach_noiseless_heads_straight_to_goal() {
        let spec = noiseless(EnvSpec::point_reach());
        let state = EnvState {
            position: [0.1, 0.1],
            steps_elapsed: 0,
            goal: spec.goals[0],
        };
        let mut e = ScriptedExpert::new(&spec, &state);
        let a = e.action(&spec, &state, &mut ChaCha8Rng::seed_from_u64(0));
        let s = 0.05 / 2f64.sqrt();
        assert!((a[0] - s).abs() < 1e-15 && (a[1] - s).abs() < 1e-15);
    }

    #[test]
    fn maze_first_waypoint_and_closed_loop_reach() {
        let spec = noiseless(EnvSpec::two_wall_maze());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = env_reset(&spec, &mut rng);
        let mut e = ScriptedExpert::new(&spec, &state);
        assert_eq!(e.current_waypoint(), [0.10, 0.10]);
        let mut last_dist = distance(state.position, e.current_waypoint());
        let mut last_cursor = 0;
        loop {
            let a = e.action(&spec, &state, &mut rng);
            let out: StepOutcome = env_step(&spec, &state, a).unwrap();
            assert!(!out.blocked);
            state = out.next;
            if e.finished() {
                break;
            }
            let d = distance(state.position, e.current_waypoint());
            if e.cursor == last_cursor {
                assert!(d < last_dist, "distance to waypoint must shrink");
            }
            last_cursor = e.cursor;
            last_dist = d;
            assert!(state.steps_elapsed < spec.horizon);
        }
        assert!(state.distance_to_goal() < 1e-12);
    }

    #[test]
    fn straight_line_demo_length() {
        let mut spec = noiseless(EnvSpec::point_reach());
        spec.start_region = Region::point([0.1, 0.2]);
        let d = distance([0.1, 0.2], spec.goals[0]);
        let ds = generate_demos(&spec, 1, 0).unwrap();
        let expected = (d / 0.05).ceil() as usize + 1;
        assert_eq!(ds.trajectories[0].len(), expected);
        // the states lie on the segment from start to goal
        for s in &ds.trajectories[0].states {
            let t = (s[0] - 0.1) / (spec.goals[0][0] - 0.1);
            let y = 0.2 + t * (spec.goals[0][1] - 0.2);
            assert!((s[1] - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_demos_rejected() {
        assert!(matches!(
            generate_demos(&EnvSpec::two_wall_maze(), 0, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn impossible_goal_is_a_config_error() {
        let mut spec = EnvSpec::point_reach();
        spec.horizon = 3;
        assert!(matches!(generate_demos(&spec, 2, 0), Err(Error::Config { .. })));
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = EnvSpec::two_wall_maze();
        let a = generate_demos(&spec, 3, 11).unwrap();
        let b = generate_demos(&spec, 3, 11).unwrap();
        assert_eq!(a, b);
    }
}
