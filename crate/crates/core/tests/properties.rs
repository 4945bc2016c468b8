//! Randomized properties of the environment, reward algebra, ranking
//! statistics and serialization.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankreward::demos::{
    env_step, read_dataset, subsample_trajectory, write_dataset, EnvKind, EnvSpec, EnvState, ExpertDataset, Split,
    Trajectory,
};
use rankreward::numkit::{mixup_pair, Matrix};
use rankreward::ranking::{kendall_tau_of, RankingCheckpoint, RankingConfig, RankingModel};
use rankreward::reward::{combined_from_parts, reward_bounds};

const EPS: f64 = 1e-7;

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

/// Whether the segment `p -> q` meets the vertical wall `x = wx`, `y in [y0, y1]`.
fn meets_vertical(p: [f64; 2], q: [f64; 2], wx: f64, y0: f64, y1: f64) -> bool {
    if wx < p[0].min(q[0]) || wx > p[0].max(q[0]) {
        return false;
    }
    if p[0] == q[0] {
        return p[1].max(q[1]) >= y0 && p[1].min(q[1]) <= y1;
    }
    let y = p[1] + (wx - p[0]) / (q[0] - p[0]) * (q[1] - p[1]);
    (y0..=y1).contains(&y)
}

proptest! {
    #[test]
    fn maze_steps_stay_legal(x in unit(), y in unit(), ax in -1.0..1.0f64, ay in -1.0..1.0f64) {
        let spec = EnvSpec::two_wall_maze();
        prop_assume!(!spec.walls.iter().any(|w| (x - w.a[0]).abs() < 1e-12));
        let state = EnvState { position: [x, y], steps_elapsed: 0, goal: spec.goals[0] };
        let out = env_step(&spec, &state, [ax, ay]).unwrap();
        let p = out.next.position;
        prop_assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        let moved = ((p[0] - x).powi(2) + (p[1] - y).powi(2)).sqrt();
        prop_assert!(moved <= spec.max_step_norm + 1e-12);
        for w in &spec.walls {
            let (y0, y1) = (w.a[1].min(w.b[1]), w.a[1].max(w.b[1]));
            prop_assert!(!meets_vertical([x, y], p, w.a[0], y0, y1));
        }
        if out.blocked {
            prop_assert_eq!(p, [x, y]);
        }
        prop_assert_eq!(out.next.steps_elapsed, 1);
    }

    #[test]
    fn zero_action_never_moves(x in unit(), y in unit()) {
        let spec = EnvSpec::two_wall_maze();
        let state = EnvState { position: [x, y], steps_elapsed: 3, goal: spec.goals[0] };
        let out = env_step(&spec, &state, [0.0, 0.0]).unwrap();
        prop_assert_eq!(out.next.position, [x, y]);
        prop_assert_eq!(out.next.steps_elapsed, 4);
    }

    #[test]
    fn combined_reward_is_monotone_and_bounded(
        u in -30.0..30.0f64,
        du in 1e-3..5.0f64,
        l in -30.0..30.0f64,
        dl in 1e-3..5.0f64,
        alpha in 0.0..4.0f64,
    ) {
        let r = combined_from_parts(u, l, alpha, EPS);
        let (lo, hi) = reward_bounds(alpha, EPS);
        prop_assert!(r >= lo - 1e-12 && r <= hi + 1e-12);
        prop_assert!(combined_from_parts(u + du, l, alpha, EPS) >= r);
        if alpha > 0.0 {
            prop_assert!(combined_from_parts(u, l + dl, alpha, EPS) >= r);
        }
        prop_assert_eq!(combined_from_parts(u, l, 0.0, EPS), combined_from_parts(u, -l, 0.0, EPS));
    }

    #[test]
    fn kendall_tau_flips_under_reversal(values in prop::collection::vec(-10.0..10.0f64, 2..40)) {
        let tau = kendall_tau_of(&values);
        let reversed: Vec<f64> = values.iter().rev().copied().collect();
        prop_assert!((-1.0..=1.0).contains(&tau));
        prop_assert!((tau + kendall_tau_of(&reversed)).abs() < 1e-12);
        let shifted: Vec<f64> = values.iter().map(|v| 3.0 * v + 1.0).collect();
        prop_assert!((tau - kendall_tau_of(&shifted)).abs() < 1e-12);
    }

    #[test]
    fn subsampling_keeps_stride_and_final_state(len in 2usize..60, k in 1usize..12) {
        let states: Vec<Vec<f64>> = (0..len).map(|i| vec![i as f64 / len as f64, 0.5]).collect();
        let traj = Trajectory::new(EnvKind::Synthetic, states.clone()).unwrap();
        let sub = subsample_trajectory(&traj, k).unwrap();
        let mut expected: Vec<usize> = (0..len).step_by(k).collect();
        if *expected.last().unwrap() != len - 1 {
            expected.push(len - 1);
        }
        let got: Vec<Vec<f64>> = expected.iter().map(|&i| states[i].clone()).collect();
        prop_assert_eq!(&sub.states, &got);
    }

    #[test]
    fn mixup_is_a_convex_combination(
        x1 in prop::collection::vec(-5.0..5.0f64, 3),
        x2 in prop::collection::vec(-5.0..5.0f64, 3),
        lambda in 0.0..=1.0f64,
    ) {
        let (x, y) = mixup_pair(&x1, 1.0, &x2, 0.0, lambda).unwrap();
        prop_assert!((y - lambda).abs() < 1e-12);
        for i in 0..3 {
            prop_assert!((x[i] - (lambda * x1[i] + (1.0 - lambda) * x2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn products_match_naive_loops(m in 1usize..9, k in 1usize..9, n in 1usize..9, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |r: usize, c: usize| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let a = fill(m, k);
        let b = fill(k, n);
        let c = a.matmul(&b).unwrap();
        for i in 0..m {
            for j in 0..n {
                let naive: f64 = (0..k).map(|t| a[(i, t)] * b[(t, j)]).sum();
                prop_assert!((c[(i, j)] - naive).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn ranking_checkpoint_round_trips_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let model = RankingModel::new(2, &RankingConfig::default(), &mut rng).unwrap();
    let json = serde_json::to_string(&RankingCheckpoint::from_model(&model)).unwrap();
    let back = serde_json::from_str::<RankingCheckpoint>(&json).unwrap().into_model().unwrap();
    for s in [[0.0, 0.0], [0.3, 0.9], [1.0, 0.25]] {
        assert_eq!(model.utility(&s).unwrap().to_bits(), back.utility(&s).unwrap().to_bits());
    }
}

#[test]
fn dataset_round_trips_through_jsonl() {
    let spec = EnvSpec::two_wall_maze();
    let demos = rankreward::demos::generate_demos(&spec, 3, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demos.jsonl");
    write_dataset(&demos, &path).unwrap();
    let back: ExpertDataset = read_dataset(&path).unwrap();
    assert_eq!(back.trajectories, demos.trajectories);
    assert_eq!(back.split, Split::Train);
}
