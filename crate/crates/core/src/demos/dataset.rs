//! Action-free trajectories and their JSON-lines file format.
//!
//! One trajectory per line:
//!
//! ```text
//! {"env":"two_wall_maze","states":[[x,y],...],"meta":{...}}
//! ```
//!
//! Multi-goal states are `[x, y, gx, gy]`. The dataset split is stored in
//! each line's `meta.split`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::numkit::checkpoint::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Eval,
}

impl Split {
    fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub env: EnvKind,
    pub states: Vec<Vec<f64>>,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

impl Trajectory {
    pub fn new(env: EnvKind, states: Vec<Vec<f64>>) -> Result<Self> {
        let t = Self {
            env,
            states,
            meta: BTreeMap::new(),
        };
        t.validate()?;
        Ok(t)
    }

    /// Length, dimension and finiteness checks.
    pub fn validate(&self) -> Result<()> {
        if self.states.len() < 2 {
            return Err(Error::argument(format!(
                "a trajectory needs at least 2 states, got {}",
                self.states.len()
            )));
        }
        let dim = self.states[0].len();
        if dim == 0 {
            return Err(Error::argument("states must have at least one coordinate"));
        }
        for (i, s) in self.states.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::shape(format!("state {i} has {} coordinates, expected {dim}", s.len())));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("state {i} has a non-finite coordinate")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn frame_dim(&self) -> usize {
        self.env.frame_dim(self.state_dim())
    }

    /// The observable part of state `i`.
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.states[i][..self.frame_dim()]
    }

    /// The final frame, used as the goal for goal-conditioned models.
    pub fn goal_frame(&self) -> &[f64] {
        self.frame(self.len() - 1)
    }

    pub fn is_subsampled(&self) -> bool {
        self.meta.contains_key("subsampled")
    }

    /// Checks the step-size and wall invariants against an environment.
    /// Subsampled trajectories are only checked for bounds.
    pub fn check_against(&self, spec: &EnvSpec) -> Result<()> {
        if self.env != spec.kind {
            return Err(Error::Format(format!(
                "trajectory is tagged {} but the environment is {}",
                self.env.tag(),
                spec.kind.tag()
            )));
        }
        for (i, s) in self.states.iter().enumerate() {
            if s[0] < 0.0 || s[0] > 1.0 || s[1] < 0.0 || s[1] > 1.0 {
                return Err(Error::argument(format!("state {i} leaves the unit square")));
            }
        }
        if self.is_subsampled() {
            return Ok(());
        }
        for (i, w) in self.states.windows(2).enumerate() {
            let (a, b) = ([w[0][0], w[0][1]], [w[1][0], w[1][1]]);
            if super::env::distance(a, b) > spec.max_step_norm + 1e-9 {
                return Err(Error::argument(format!("step {i} exceeds the step limit")));
            }
            if spec.crosses_wall(a, b) {
                return Err(Error::argument(format!("step {i} crosses a wall")));
            }
        }
        Ok(())
    }
}

/// Keeps states `0, k, 2k, ...` and always the final state.
pub fn subsample_trajectory(traj: &Trajectory, keep_every: usize) -> Result<Trajectory> {
    if keep_every == 0 {
        return Err(Error::argument("keep_every must be at least 1"));
    }
    if keep_every == 1 {
        return Ok(traj.clone());
    }
    let last = traj.len() - 1;
    let states = if keep_every >= traj.len() {
        vec![traj.states[0].clone(), traj.states[last].clone()]
    } else {
        let mut kept: Vec<Vec<f64>> = traj.states.iter().step_by(keep_every).cloned().collect();
        if last % keep_every != 0 {
            kept.push(traj.states[last].clone());
        }
        kept
    };
    let mut meta = traj.meta.clone();
    meta.insert("subsampled".into(), Value::from(keep_every));
    Ok(Trajectory {
        env: traj.env,
        states,
        meta,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpertDataset {
    pub trajectories: Vec<Trajectory>,
    pub split: Split,
}

impl ExpertDataset {
    pub fn new(trajectories: Vec<Trajectory>, split: Split) -> Self {
        Self { trajectories, split }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn env(&self) -> Option<EnvKind> {
        self.trajectories.first().map(|t| t.env)
    }

    pub fn subsample(&self, keep_every: usize) -> Result<Self> {
        Ok(Self {
            trajectories: self
                .trajectories
                .iter()
                .map(|t| subsample_trajectory(t, keep_every))
                .collect::<Result<_>>()?,
            split: self.split,
        })
    }

    /// Deterministic split by trajectory: the first `round(train_fraction * n)`
    /// trajectories train, the rest evaluate. At least one trajectory lands
    /// on each side when `n >= 2`.
    pub fn split_by_trajectory(&self, train_fraction: f64) -> (Self, Self) {
        let n = self.len();
        let mut n_train = ((train_fraction * n as f64).round() as usize).min(n);
        if n >= 2 {
            n_train = n_train.clamp(1, n - 1);
        }
        let train = Self::new(self.trajectories[..n_train].to_vec(), Split::Train);
        let eval = Self::new(self.trajectories[n_train..].to_vec(), Split::Eval);
        (train, eval)
    }

    /// All states from every trajectory, in order.
    pub fn all_states(&self) -> impl Iterator<Item = &[f64]> {
        self.trajectories.iter().flat_map(|t| t.states.iter().map(Vec::as_slice))
    }
}

pub fn write_dataset(dataset: &ExpertDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for t in &dataset.trajectories {
        let mut line = t.clone();
        line.meta.insert("split".into(), Value::from(dataset.split.tag()));
        out.push_str(&serde_json::to_string(&line).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_dataset(path: &Path) -> Result<ExpertDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut split = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut t: Trajectory = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        t.validate().map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(first) = trajectories.first() {
            if first.env != t.env {
                return Err(Error::Format(format!(
                    "line {line_no}: env tag {} differs from {}",
                    t.env.tag(),
                    first.env.tag()
                )));
            }
        }
        if let Some(Value::String(s)) = t.meta.remove("split") {
            split = Some(if s == "eval" { Split::Eval } else { Split::Train });
        }
        trajectories.push(t);
    }
    Ok(ExpertDataset::new(trajectories, split.unwrap_or_default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::expert::generate_demos;

    fn ramp(n: usize) -> Trajectory {
        Trajectory::new(EnvKind::Synthetic, (0..n).map(|i| vec![i as f64]).collect()).unwrap()
    }

    #[test]
    fn keep_every_one_is_identity() {
        let t = ramp(7);
        assert_eq!(subsample_trajectory(&t, 1).unwrap(), t);
    }

    #[test]
    fn thirty_three_states_every_eighth() {
        let s = subsample_trajectory(&ramp(33), 8).unwrap();
        let idx: Vec<f64> = s.states.iter().map(|v| v[0]).collect();
        assert_eq!(idx, vec![0.0, 8.0, 16.0, 24.0, 32.0]);
        assert!(s.is_subsampled());
    }

    #[test]
    fn final_state_always_kept() {
        let s = subsample_trajectory(&ramp(10), 4).unwrap();
        let idx: Vec<f64> = s.states.iter().map(|v| v[0]).collect();
        assert_eq!(idx, vec![0.0, 4.0, 8.0, 9.0]);
        let s = subsample_trajectory(&ramp(10), 10).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.states[1][0], 9.0);
        assert!(subsample_trajectory(&ramp(3), 0).is_err());
    }

    #[test]
    fn empty_dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        write_dataset(&ExpertDataset::default(), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "");
        assert!(read_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn maze_dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.jsonl");
        let mut ds = generate_demos(&EnvSpec::two_wall_maze(), 20, 4).unwrap();
        ds.trajectories[0].meta.insert("note".into(), Value::from("first"));
        ds.split = Split::Eval;
        write_dataset(&ds, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn nan_coordinate_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = r#"{"env":"point_reach","states":[[0.1,0.1],[0.2,0.2]],"meta":{}}"#;
        let bad = r#"{"env":"point_reach","states":[[0.1,NaN],[0.2,0.2]],"meta":{}}"#;
        fs::write(&path, format!("{good}\n{bad}\n")).unwrap();
        match read_dataset(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn mixed_env_tags_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.jsonl");
        let a = r#"{"env":"point_reach","states":[[0.1,0.1],[0.2,0.2]],"meta":{}}"#;
        let b = r#"{"env":"two_wall_maze","states":[[0.1,0.1],[0.2,0.2]],"meta":{}}"#;
        fs::write(&path, format!("{a}\n{b}\n")).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
    }

    #[test]
    fn short_trajectory_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.jsonl");
        fs::write(&path, "{\"env\":\"point_reach\",\"states\":[[0.1,0.1]]}\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn split_keeps_both_sides_nonempty() {
        let ds = ExpertDataset::new((0..5).map(|_| ramp(3)).collect(), Split::Train);
        let (tr, ev) = ds.split_by_trajectory(0.8);
        assert_eq!((tr.len(), ev.len()), (4, 1));
        assert_eq!(ev.split, Split::Eval);
    }
}
