use proptest::prelude::*;
use rwre::env::{realize, EnvironmentModel};
use rwre::rng::{stream, ReplicaStreams};
use rwre::walk::{
    first_passage_index, sample_hitting_times, sample_joint, sample_position, sample_until, SimulationBudget,
};
use rwre::RwreError;

fn budget(t: u64) -> SimulationBudget {
    SimulationBudget::new(t, t, 2_000, 1 << 30).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn joint_trajectory_identities(env_seed in any::<u64>(), walk_seed in any::<u64>(), p_low in 0.3f64..0.7) {
        let model = EnvironmentModel::iid_discrete(&[(0.85, 0.5), (p_low, 0.5)]);
        let window = realize(&model, -2_100, 3_100, env_seed).unwrap();
        let t_max = 3_000;
        let traj = match sample_joint(&window, t_max, &mut stream(walk_seed, &[7]), &budget(t_max)) {
            Ok(t) => t,
            Err(RwreError::LeftGuardBreach { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        for (t, &x) in traj.path.iter().enumerate() {
            prop_assert_eq!((x + t as i64).rem_euclid(2), 0);
        }
        for tau in traj.tau() {
            prop_assert_eq!(tau % 2, 1);
        }
        let top = traj.hitting.len() + 3;
        for t in (0..=t_max).step_by(7) {
            let n_t = traj.n_t(t).unwrap();
            for y in 0..top {
                let hit_after = traj.hitting_time(y + 1).is_none_or(|h| h > t);
                prop_assert_eq!(n_t <= y, hit_after, "t {} y {}", t, y);
            }
            if let Some(next) = traj.hitting_time(n_t + 1) {
                let tau = next - traj.hitting_time(n_t).unwrap();
                prop_assert!(((traj.position(t).unwrap() - n_t as i64).unsigned_abs()) < tau);
            }
        }
        for (k, &h) in traj.hitting.iter().enumerate() {
            prop_assert_eq!(traj.path[h as usize], k as i64);
            prop_assert_eq!(traj.n_t(h), Some(k));
        }
    }

    #[test]
    fn first_passage_is_left_closed(steps in prop::collection::vec(1u64..20, 1..40)) {
        let mut hitting = vec![0u64];
        for s in steps {
            hitting.push(hitting.last().unwrap() + (2 * s - 1));
        }
        let last = *hitting.last().unwrap();
        for (k, &h) in hitting[..hitting.len() - 1].iter().enumerate() {
            prop_assert_eq!(first_passage_index(&hitting, h).unwrap(), k);
        }
        prop_assert!(first_passage_index(&hitting, last).is_err());
    }
}

#[test]
fn hitting_times_are_deterministic_and_odd() {
    let model = EnvironmentModel::iid_discrete(&[(0.8, 0.5), (0.6, 0.5)]);
    let window = realize(&model, -300, 600, 4).unwrap();
    let b = SimulationBudget::new(1 << 30, 500, 200, 1 << 30).unwrap();
    let a = sample_hitting_times(&window, 500, ReplicaStreams::new(9, 3), &b).unwrap();
    let again = sample_hitting_times(&window, 500, ReplicaStreams::new(9, 3), &b).unwrap();
    assert_eq!(a, again);
    assert!(a.tau.iter().all(|t| t % 2 == 1));
    assert_eq!(a.hitting[0], 0);
    assert_eq!(a.hitting.len(), 501);
    let other = sample_hitting_times(&window, 500, ReplicaStreams::new(9, 4), &b).unwrap();
    assert_ne!(a.tau, other.tau);
}

#[test]
fn positions_respect_parity_at_every_snapshot() {
    let window = realize(&EnvironmentModel::constant(0.75), -2_100, 5_000, 0).unwrap();
    let times = [1, 2, 3, 10, 99, 1000, 4000];
    for seed in 0..50 {
        let snaps = sample_position(&window, 0, &times, &mut stream(seed, &[1]), &budget(4000)).unwrap();
        for (t, x) in snaps {
            assert_eq!((x + t as i64).rem_euclid(2), 0);
            assert!(x.unsigned_abs() <= t);
        }
    }
}

#[test]
fn left_guard_is_enforced() {
    let window = realize(&EnvironmentModel::constant(0.2), -100, 100, 0).unwrap();
    let b = SimulationBudget::new(10_000, 10, 5, 1 << 20).unwrap();
    let err = sample_position(&window, 0, &[10_000], &mut stream(1, &[1]), &b).unwrap_err();
    assert!(matches!(err, RwreError::LeftGuardBreach { .. }), "{err}");
}

#[test]
fn run_until_matches_the_joint_path() {
    let window = realize(
        &EnvironmentModel::iid_discrete(&[(0.8, 0.5), (0.6, 0.5)]),
        -2_100,
        3_000,
        2,
    )
    .unwrap();
    let times = [5, 50, 500];
    let (snaps, hitting) = sample_until(&window, &times, 400, &mut stream(3, &[1]), &budget(1 << 20)).unwrap();
    assert_eq!(hitting.len(), 401);
    let t_max = (*hitting.last().unwrap()).max(500);
    let joint = sample_joint(&window, t_max, &mut stream(3, &[1]), &budget(t_max)).unwrap();
    for (t, x) in snaps {
        assert_eq!(joint.position(t), Some(x));
    }
    assert_eq!(&joint.hitting[..401], &hitting[..]);
}
