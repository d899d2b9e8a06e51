//! Simulation of the quenched walk.
//!
//! Every step consumes exactly one 64-bit draw: the walker at `x` moves to
//! `x + 1` when the draw (mapped to `[0, 1)`) is below `p_x`, otherwise to
//! `x - 1`. Reaching the left guard or the right end of the window is an
//! error; the walk is never reflected.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::EnvironmentWindow;
use crate::rng::{self, ReplicaStreams};
use crate::{Result, RwreError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationBudget {
    pub t_max: u64,
    pub n_max: u64,
    /// Reaching `-left_guard` aborts the run.
    pub left_guard: i64,
    pub max_steps: u64,
}

impl SimulationBudget {
    pub fn new(t_max: u64, n_max: u64, left_guard: i64, max_steps: u64) -> Result<Self> {
        let b = Self {
            t_max,
            n_max,
            left_guard,
            max_steps,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.left_guard < 1 {
            return Err(RwreError::invalid_arg("left_guard", "must be at least 1"));
        }
        if self.max_steps < self.t_max {
            return Err(RwreError::invalid_arg("max_steps", "must be at least t_max"));
        }
        Ok(())
    }

    /// `W = 50 + 10 ceil(1/|lambda|)`.
    pub fn default_left_guard(lambda: f64) -> i64 {
        if lambda == 0.0 || !lambda.is_finite() {
            return 10_000;
        }
        50 + 10 * (1.0 / lambda.abs()).ceil().min(1e6) as i64
    }

    fn check(&self, window: &EnvironmentWindow) -> Result<()> {
        self.validate()?;
        if window.lo > -self.left_guard {
            return Err(RwreError::InsufficientData(format!(
                "window starts at {} but must cover the left guard {}",
                window.lo, -self.left_guard
            )));
        }
        Ok(())
    }
}

/// One step from `x`.
#[inline]
pub fn step(window: &EnvironmentWindow, x: i64, rng: &mut impl RngCore) -> Result<i64> {
    if x <= window.lo {
        return Err(RwreError::LeftGuardBreach { position: x });
    }
    if x >= window.hi {
        return Err(RwreError::RightGuardBreach { position: x });
    }
    Ok(if rng::uniform(rng) < window.p_at(x) {
        x + 1
    } else {
        x - 1
    })
}

#[inline]
fn guarded_step(window: &EnvironmentWindow, x: i64, guard: i64, rng: &mut impl RngCore) -> Result<i64> {
    if x <= guard {
        return Err(RwreError::LeftGuardBreach { position: x });
    }
    step(window, x, rng)
}

/// `tau_k`: steps needed to go from `k` to `k + 1`.
pub fn sample_crossing_time(
    window: &EnvironmentWindow,
    k: i64,
    rng: &mut impl RngCore,
    budget: &SimulationBudget,
) -> Result<u64> {
    let guard = -budget.left_guard;
    let mut x = k;
    let mut steps = 0u64;
    while x <= k {
        if steps >= budget.max_steps {
            return Err(RwreError::StepBudgetExceeded {
                max_steps: budget.max_steps,
            });
        }
        x = guarded_step(window, x, guard, rng)?;
        steps += 1;
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HittingSample {
    /// `tau_0 .. tau_{n-1}`.
    pub tau: Vec<u64>,
    /// `T(0) = 0, T(1), .., T(n)`.
    pub hitting: Vec<u64>,
}

/// Crossing times `tau_0..tau_{n-1}` from independent per-`k` substreams and
/// their prefix sums.
pub fn sample_hitting_times(
    window: &EnvironmentWindow,
    n: u64,
    streams: ReplicaStreams,
    budget: &SimulationBudget,
) -> Result<HittingSample> {
    budget.check(window)?;
    if n as i64 >= window.hi {
        return Err(RwreError::InsufficientData(format!(
            "window ends at {} but hitting site {n} was requested",
            window.hi
        )));
    }
    let mut tau = Vec::with_capacity(n as usize);
    let mut hitting = Vec::with_capacity(n as usize + 1);
    hitting.push(0u64);
    let mut total = 0u64;
    for k in 0..n as i64 {
        let t = sample_crossing_time(window, k, &mut streams.crossing(k), budget)?;
        total += t;
        if total > budget.max_steps {
            return Err(RwreError::StepBudgetExceeded {
                max_steps: budget.max_steps,
            });
        }
        tau.push(t);
        hitting.push(total);
    }
    Ok(HittingSample { tau, hitting })
}

/// `T(n)` alone; same draws as [`sample_hitting_times`] without storing them.
pub fn sample_total_hitting_time(
    window: &EnvironmentWindow,
    n: u64,
    streams: ReplicaStreams,
    budget: &SimulationBudget,
) -> Result<u64> {
    budget.check(window)?;
    if n as i64 >= window.hi {
        return Err(RwreError::InsufficientData(format!(
            "window ends at {} but hitting site {n} was requested",
            window.hi
        )));
    }
    let mut total = 0u64;
    for k in 0..n as i64 {
        total += sample_crossing_time(window, k, &mut streams.crossing(k), budget)?;
        if total > budget.max_steps {
            return Err(RwreError::StepBudgetExceeded {
                max_steps: budget.max_steps,
            });
        }
    }
    Ok(total)
}

/// `X(t)` for each `t` in the sorted `t_list`, from one trajectory started at `z0`.
pub fn sample_position(
    window: &EnvironmentWindow,
    z0: i64,
    t_list: &[u64],
    rng: &mut impl RngCore,
    budget: &SimulationBudget,
) -> Result<Vec<(u64, i64)>> {
    budget.check(window)?;
    if t_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(RwreError::invalid_arg("t_list", "must be sorted"));
    }
    if let Some(&last) = t_list.last() {
        if last > budget.max_steps {
            return Err(RwreError::StepBudgetExceeded {
                max_steps: budget.max_steps,
            });
        }
    }
    let guard = -budget.left_guard;
    let mut out = Vec::with_capacity(t_list.len());
    let mut x = z0;
    let mut t = 0u64;
    for &target in t_list {
        while t < target {
            x = guarded_step(window, x, guard, rng)?;
            t += 1;
        }
        out.push((t, x));
    }
    Ok(out)
}

/// Unique `n` with `T(n) <= t < T(n+1)`; `hitting[m] = T(m)` with `T(0) = 0`.
pub fn first_passage_index(hitting: &[u64], t: u64) -> Result<usize> {
    match hitting.last() {
        Some(&last) if last > t => {}
        _ => return Err(RwreError::InsufficientData(format!("hitting times end before t = {t}"))),
    }
    // count of m with T(m) <= t, minus one
    Ok(hitting.partition_point(|&h| h <= t) - 1)
}

/// One trajectory from 0 with its full path and the record of first visits
/// to each new maximum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointTrajectory {
    /// `X(0..=t_max)`.
    pub path: Vec<i64>,
    /// `T(0) = 0, T(1), ..` for every site reached within the run.
    pub hitting: Vec<u64>,
}

impl JointTrajectory {
    pub fn t_max(&self) -> u64 {
        self.path.len() as u64 - 1
    }

    pub fn position(&self, t: u64) -> Option<i64> {
        self.path.get(t as usize).copied()
    }

    /// `tau_k` for every `k` with `T(k+1)` recorded.
    pub fn tau(&self) -> Vec<u64> {
        self.hitting.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `n_t` read off the running maximum; always available for `t <= t_max`.
    pub fn n_t(&self, t: u64) -> Option<usize> {
        if t > self.t_max() {
            return None;
        }
        Some(self.hitting.partition_point(|&h| h <= t) - 1)
    }

    /// `T(m)` if site `m` was reached, otherwise `None` (meaning `T(m) > t_max`).
    pub fn hitting_time(&self, m: usize) -> Option<u64> {
        self.hitting.get(m).copied()
    }

    pub fn observation(&self, replica_seed: u64, snapshot_times: &[u64]) -> WalkObservation {
        let snapshots: Vec<(u64, i64)> = snapshot_times
            .iter()
            .filter_map(|&t| self.position(t).map(|x| (t, x)))
            .collect();
        let n_t = snapshot_times
            .iter()
            .filter_map(|&t| {
                let n = self.n_t(t)?;
                // only report pairs whose bracket is closed on the right
                (n + 1 < self.hitting.len()).then_some((t, n))
            })
            .collect();
        WalkObservation {
            replica_seed,
            start: 0,
            tau: self.tau(),
            hitting: self.hitting.clone(),
            snapshots,
            n_t,
        }
    }
}

/// Joint-mode trajectory of exactly `t_max` steps from 0.
pub fn sample_joint(
    window: &EnvironmentWindow,
    t_max: u64,
    rng: &mut impl RngCore,
    budget: &SimulationBudget,
) -> Result<JointTrajectory> {
    budget.check(window)?;
    if t_max > budget.max_steps {
        return Err(RwreError::StepBudgetExceeded {
            max_steps: budget.max_steps,
        });
    }
    let guard = -budget.left_guard;
    let mut path = Vec::with_capacity(t_max as usize + 1);
    let mut hitting = vec![0u64];
    let mut x = 0i64;
    path.push(x);
    for t in 1..=t_max {
        x = guarded_step(window, x, guard, rng)?;
        path.push(x);
        if x as usize == hitting.len() && x > 0 {
            hitting.push(t);
        }
    }
    Ok(JointTrajectory { path, hitting })
}

/// `(t, X(t))` pairs.
pub type Snapshots = Vec<(u64, i64)>;

/// Run from 0 until both `t >= t_min` and site `n_target` has been hit,
/// recording `X(t)` at the requested times and `T(m)` for `m <= n_target`.
pub fn sample_until(
    window: &EnvironmentWindow,
    t_list: &[u64],
    n_target: u64,
    rng: &mut impl RngCore,
    budget: &SimulationBudget,
) -> Result<(Snapshots, Vec<u64>)> {
    budget.check(window)?;
    let guard = -budget.left_guard;
    let t_min = t_list.last().copied().unwrap_or(0);
    let mut snaps = Vec::with_capacity(t_list.len());
    let mut next = 0;
    let mut hitting = vec![0u64];
    let mut x = 0i64;
    let mut t = 0u64;
    loop {
        while next < t_list.len() && t_list[next] == t {
            snaps.push((t, x));
            next += 1;
        }
        if t >= t_min && hitting.len() as u64 > n_target {
            break;
        }
        if t >= budget.max_steps {
            return Err(RwreError::StepBudgetExceeded {
                max_steps: budget.max_steps,
            });
        }
        x = guarded_step(window, x, guard, rng)?;
        t += 1;
        if x > 0 && x as usize == hitting.len() {
            hitting.push(t);
        }
    }
    Ok((snaps, hitting))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkObservation {
    pub replica_seed: u64,
    pub start: i64,
    pub tau: Vec<u64>,
    /// `T(0) = 0, T(1), ..`.
    pub hitting: Vec<u64>,
    pub snapshots: Vec<(u64, i64)>,
    /// `(t, n_t)` pairs.
    pub n_t: Vec<(u64, usize)>,
}

/// Hitting times for one replica, packaged as an observation.
pub fn observe_hitting(
    window: &EnvironmentWindow,
    n: u64,
    streams: ReplicaStreams,
    budget: &SimulationBudget,
    query_times: &[u64],
) -> Result<WalkObservation> {
    let s = sample_hitting_times(window, n, streams, budget)?;
    let n_t = query_times
        .iter()
        .filter_map(|&t| first_passage_index(&s.hitting, t).ok().map(|m| (t, m)))
        .collect();
    Ok(WalkObservation {
        replica_seed: rng::derive(streams.master, &[streams.replica]),
        start: 0,
        tau: s.tau,
        hitting: s.hitting,
        snapshots: Vec::new(),
        n_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{realize, EnvironmentModel};

    fn window(p: f64) -> EnvironmentWindow {
        realize(&EnvironmentModel::constant(p), -200, 20_000, 0).unwrap()
    }

    fn budget() -> SimulationBudget {
        SimulationBudget::new(10_000, 1000, 100, 10_000_000).unwrap()
    }

    #[test]
    fn near_deterministic_step() {
        let w = EnvironmentWindow::from_values(-5, vec![1.0 - 1e-15; 11]).unwrap();
        let mut r = rng::stream(1, &[0]);
        for _ in 0..10_000 {
            assert_eq!(step(&w, 0, &mut r).unwrap(), 1);
        }
    }

    #[test]
    fn step_up_fraction() {
        let w = window(0.75);
        let mut r = rng::stream(11, &[0]);
        let n = 100_000;
        let ups = (0..n).filter(|_| step(&w, 0, &mut r).unwrap() == 1).count();
        let frac = ups as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.005, "{frac}");
    }

    #[test]
    fn step_replay_is_identical() {
        let w = window(0.6);
        let run = |seed| {
            let mut r = rng::stream(seed, &[9]);
            let mut x = 0;
            (0..500)
                .map(|_| {
                    x = step(&w, x, &mut r).unwrap();
                    x
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn step_at_edges() {
        let w = EnvironmentWindow::from_values(0, vec![0.7; 5]).unwrap();
        let mut r = rng::stream(0, &[]);
        assert!(matches!(step(&w, 0, &mut r), Err(RwreError::LeftGuardBreach { .. })));
        assert!(matches!(step(&w, 4, &mut r), Err(RwreError::RightGuardBreach { .. })));
    }

    #[test]
    fn crossing_time_law() {
        let w = window(0.75);
        let b = budget();
        let n = 100_000u64;
        let mut ones = 0;
        let mut threes = 0;
        for i in 0..n {
            let t = sample_crossing_time(&w, 0, &mut ReplicaStreams::new(3, i).crossing(0), &b).unwrap();
            assert_eq!(t % 2, 1);
            match t {
                1 => ones += 1,
                3 => threes += 1,
                _ => {}
            }
        }
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.005);
        assert!((threes as f64 / n as f64 - 0.140_625).abs() < 0.004);
    }

    #[test]
    fn hitting_times_mean() {
        let w = window(0.75);
        let b = budget();
        let reps = 2000u64;
        let mean = (0..reps)
            .map(|r| sample_total_hitting_time(&w, 100, ReplicaStreams::new(8, r), &b).unwrap() as f64 / 100.0)
            .sum::<f64>()
            / reps as f64;
        let tol = 3.0 * (6.0 / (100.0 * reps as f64)).sqrt();
        assert!((mean - 2.0).abs() < tol, "{mean}");
    }

    #[test]
    fn hitting_times_prefix_sums() {
        let w = window(0.7);
        let s = sample_hitting_times(&w, 50, ReplicaStreams::new(1, 2), &budget()).unwrap();
        assert_eq!(s.hitting.len(), 51);
        let mut acc = 0;
        for (k, t) in s.tau.iter().enumerate() {
            acc += t;
            assert_eq!(s.hitting[k + 1], acc);
        }
        let total = sample_total_hitting_time(&w, 50, ReplicaStreams::new(1, 2), &budget()).unwrap();
        assert_eq!(total, acc);
    }

    #[test]
    fn first_passage_examples() {
        let hitting = [0, 1, 4, 5];
        assert_eq!(first_passage_index(&hitting, 3).unwrap(), 1);
        assert_eq!(first_passage_index(&hitting, 4).unwrap(), 2);
        assert_eq!(first_passage_index(&hitting, 0).unwrap(), 0);
        assert!(first_passage_index(&hitting, 5).is_err());
    }

    #[test]
    fn position_snapshots() {
        let w = window(0.75);
        let b = budget();
        let n = 100_000;
        let mut up = 0;
        for i in 0..n {
            let mut r = ReplicaStreams::new(4, i).trajectory();
            let s = sample_position(&w, 0, &[1, 2, 7], &mut r, &b).unwrap();
            for &(t, x) in &s {
                assert_eq!((x + t as i64).rem_euclid(2), 0);
            }
            if s[0].1 == 1 {
                up += 1;
            }
        }
        assert!((up as f64 / n as f64 - 0.75).abs() < 0.005);
    }

    #[test]
    fn position_speed() {
        let w = window(0.75);
        let b = budget();
        let reps = 50;
        let mean = (0..reps)
            .map(|i| {
                let mut r = ReplicaStreams::new(21, i).trajectory();
                sample_position(&w, 0, &[10_000], &mut r, &b).unwrap()[0].1 as f64 / 10_000.0
            })
            .sum::<f64>()
            / reps as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn left_guard_is_an_error() {
        let w = window(0.3);
        let b = SimulationBudget::new(10_000, 10, 5, 100_000).unwrap();
        let mut r = rng::stream(1, &[]);
        let err = sample_position(&w, 0, &[10_000], &mut r, &b).unwrap_err();
        assert!(matches!(err, RwreError::LeftGuardBreach { position: -5 }));
    }

    #[test]
    fn joint_trajectory_brackets() {
        let w = window(0.7);
        let b = budget();
        let j = sample_joint(&w, 400, &mut rng::stream(2, &[]), &b).unwrap();
        for t in 0..=400 {
            let n = j.n_t(t).unwrap();
            assert!(j.hitting[n] <= t);
            if let Some(next) = j.hitting_time(n + 1) {
                assert!(t < next);
            }
        }
        assert!(j.tau().iter().all(|t| t % 2 == 1));
    }
}
