//! Statistical experiments on quenched environments.
//!
//! Each experiment fixes one environment realization from `env_seed` and runs
//! walk replicas from `walk_seed`. Replica `i` always uses the streams of
//! [`ReplicaStreams::new(walk_seed, i)`](ReplicaStreams), and results are
//! collected in replica order, so every report is a pure function of the
//! config regardless of how many worker threads execute it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    self, explicit_centering, fluctuation_series, implicit_centering, SiteProfile, SummaryBudget, SummaryStatistics,
    DEFAULT_TOL,
};
use crate::env::{self, EnvironmentModel, EnvironmentWindow, Regime};
use crate::oracle::{self, MomentEstimate};
use crate::rng::{self, ReplicaStreams};
use crate::stats::{median, normal_cdf, CompensatedSum};
use crate::walk::{self, SimulationBudget};
use crate::{Result, RwreError};

/// Minimum number of walk replicas per experiment.
pub const MIN_REPLICAS: u64 = 100;
const DEFAULT_MAX_STEPS: u64 = 10_000_000_000;
const VANISHING: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    #[default]
    Explicit,
    Implicit,
}

fn default_n() -> u64 {
    2000
}
fn default_t() -> u64 {
    4000
}
fn default_replicas() -> u64 {
    5000
}
fn default_x_grid() -> Vec<f64> {
    (-12..=12).map(|i| i as f64 * 0.25).collect()
}
fn default_n_grid() -> Vec<u64> {
    vec![100, 1000, 10_000]
}
fn default_t_grid() -> Vec<u64> {
    vec![1000, 10_000, 100_000]
}
fn default_c() -> f64 {
    0.1
}
fn default_one() -> u64 {
    1
}
fn default_diag_seeds() -> u64 {
    20
}
fn default_lln_threshold() -> f64 {
    0.02
}
fn default_lln_replicas() -> u64 {
    16
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_summary_sites() -> usize {
    200_000
}
fn default_offsets() -> usize {
    1000
}
fn default_coupling_replicas() -> u64 {
    1000
}
fn default_oracle_sites() -> i64 {
    200
}
fn default_oracle_boundary() -> i64 {
    40
}
fn default_oracle_mc() -> u64 {
    1_000_000
}

/// Everything an experiment needs; unspecified fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: EnvironmentModel,
    /// Hitting level for the hitting-time experiments.
    #[serde(default = "default_n")]
    pub n: u64,
    /// Time horizon for the position experiments.
    #[serde(default = "default_t")]
    pub t: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub centering: Centering,
    /// Evaluation points for CDF errors and the diagnostic sums.
    #[serde(default = "default_x_grid")]
    pub x_grid: Vec<f64>,
    /// Scales for `R(n, c)`, the fluctuation series and the ergodicity estimate.
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<u64>,
    /// Times for the diagnostic range sums.
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<u64>,
    #[serde(default = "default_t_grid")]
    pub lln_grid: Vec<u64>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub env_seed: u64,
    #[serde(default)]
    pub walk_seed: u64,
    /// Number of environments in multi-environment mode.
    #[serde(default = "default_one")]
    pub env_replicas: u64,
    #[serde(default = "default_diag_seeds")]
    pub diagnostic_env_seeds: u64,
    /// Defaults to `max(0.03, 3 * 1.36 / sqrt(replicas))`.
    #[serde(default)]
    pub ks_threshold: Option<f64>,
    #[serde(default = "default_lln_threshold")]
    pub lln_threshold: f64,
    #[serde(default = "default_lln_replicas")]
    pub lln_replicas: u64,
    #[serde(default)]
    pub left_guard: Option<i64>,
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_summary_sites")]
    pub summary_sites: usize,
    /// Starting offsets `K` of the uniform-ergodicity estimate.
    #[serde(default = "default_offsets")]
    pub ergodicity_offsets: usize,
    #[serde(default = "default_coupling_replicas")]
    pub coupling_replicas: u64,
    #[serde(default = "default_t")]
    pub coupling_t: u64,
    #[serde(default = "default_oracle_sites")]
    pub oracle_sites: i64,
    #[serde(default = "default_oracle_boundary")]
    pub oracle_boundary: i64,
    #[serde(default = "default_oracle_mc")]
    pub oracle_mc_samples: u64,
}

impl ExperimentConfig {
    pub fn new(model: EnvironmentModel) -> Self {
        Self {
            model,
            n: default_n(),
            t: default_t(),
            replicas: default_replicas(),
            centering: Centering::default(),
            x_grid: default_x_grid(),
            n_grid: default_n_grid(),
            t_grid: default_t_grid(),
            lln_grid: default_t_grid(),
            c: default_c(),
            env_seed: 0,
            walk_seed: 0,
            env_replicas: 1,
            diagnostic_env_seeds: default_diag_seeds(),
            ks_threshold: None,
            lln_threshold: default_lln_threshold(),
            lln_replicas: default_lln_replicas(),
            left_guard: None,
            max_steps: None,
            tol: default_tol(),
            summary_sites: default_summary_sites(),
            ergodicity_offsets: default_offsets(),
            coupling_replicas: default_coupling_replicas(),
            coupling_t: default_t(),
            oracle_sites: default_oracle_sites(),
            oracle_boundary: default_oracle_boundary(),
            oracle_mc_samples: default_oracle_mc(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let sorted = |v: &[u64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.replicas < MIN_REPLICAS {
            return Err(RwreError::invalid_arg(
                "replicas",
                format!("must be at least {MIN_REPLICAS}, got {}", self.replicas),
            ));
        }
        if self.x_grid.is_empty()
            || !self.x_grid.windows(2).all(|w| w[0] < w[1])
            || self.x_grid.iter().any(|x| !x.is_finite())
        {
            return Err(RwreError::invalid_arg(
                "x_grid",
                "must be non-empty, finite and strictly increasing",
            ));
        }
        for (name, grid) in [
            ("n_grid", &self.n_grid),
            ("t_grid", &self.t_grid),
            ("lln_grid", &self.lln_grid),
        ] {
            if grid.is_empty() || !sorted(grid) || grid[0] == 0 {
                return Err(RwreError::invalid_arg(
                    name,
                    "must be non-empty, positive and strictly increasing",
                ));
            }
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(RwreError::invalid_arg("c", "must be positive"));
        }
        if self.n == 0 || self.t == 0 {
            return Err(RwreError::invalid_arg("n", "n and t must be positive"));
        }
        if self.env_replicas == 0 || self.diagnostic_env_seeds == 0 || self.lln_replicas == 0 {
            return Err(RwreError::invalid_arg(
                "env_replicas",
                "replica counts must be positive",
            ));
        }
        if let Some(th) = self.ks_threshold {
            if !(th > 0.0 && th <= 1.0) {
                return Err(RwreError::invalid_arg("ks_threshold", "must lie in (0, 1]"));
            }
        }
        if let Some(w) = self.left_guard {
            if w < 1 {
                return Err(RwreError::invalid_arg("left_guard", "must be at least 1"));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(RwreError::invalid_arg("tol", "must lie in (0, 1)"));
        }
        if self.oracle_boundary < 1 || self.oracle_sites < 1 {
            return Err(RwreError::invalid_arg("oracle_sites", "must be positive"));
        }
        Ok(())
    }

    pub fn ks_threshold(&self) -> f64 {
        self.ks_threshold
            .unwrap_or_else(|| (3.0 * 1.36 / (self.replicas as f64).sqrt()).max(0.03))
    }

    fn max_steps(&self) -> u64 {
        self.max_steps.unwrap_or(DEFAULT_MAX_STEPS)
    }

    fn summary_budget(&self) -> SummaryBudget {
        SummaryBudget {
            sites: self.summary_sites,
            seed: self.env_seed,
            tol: self.tol,
        }
    }

    fn guard(&self, lambda: f64) -> i64 {
        self.left_guard
            .unwrap_or_else(|| SimulationBudget::default_left_guard(lambda))
    }

    /// Seed of environment `i` in multi-environment mode; `i = 0` is `env_seed`.
    pub fn env_seed_at(&self, i: u64) -> u64 {
        if i == 0 {
            self.env_seed
        } else {
            rng::derive(self.env_seed, &[i])
        }
    }
}

/// `sup_x |F_m(x) - F(x)|` for the empirical CDF of `samples`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(RwreError::EmptySample);
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(RwreError::invalid_arg("samples", "contain NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).abs().max((f - (i + 1) as f64 / m).abs())
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub x: f64,
    pub ecdf: f64,
    pub phi: f64,
    pub diff: f64,
}

pub fn cdf_table(samples: &[f64], grid: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len().max(1) as f64;
    grid.iter()
        .map(|&x| {
            let ecdf = sorted.partition_point(|&s| s <= x) as f64 / m;
            let phi = normal_cdf(x);
            CdfPoint {
                x,
                ecdf,
                phi,
                diff: ecdf - phi,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub replica: u64,
    /// `T(n)` or `X(t)`.
    pub raw: i64,
    pub standardized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentRun {
    pub env_seed: u64,
    pub ks_distance: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub model_id: String,
    pub env_seed: u64,
    pub walk_seed: u64,
    /// `n` for hitting times, `t` for positions.
    pub scale: u64,
    pub replicas: u64,
    pub centering: Option<Centering>,
    /// `H(n)`, `b(t)` or `b~(t)`.
    pub center: f64,
    /// Model-level summary.
    pub mu: f64,
    pub sigma2_model: f64,
    /// Ergodic average of `sigma_k^2` over the experiment's own window.
    pub sigma2_window: f64,
    /// Scale used for standardization.
    pub scale_factor: f64,
    pub sigma_star: Option<f64>,
    pub ks_distance: f64,
    pub ks_threshold: f64,
    pub cdf: Vec<CdfPoint>,
    /// Mean of the centered raw samples, and the allowed magnitude.
    pub mean_offset: f64,
    pub mean_offset_bound: f64,
    pub verdict: Verdict,
    /// Extra environments in multi-environment mode.
    pub environments: Vec<EnvironmentRun>,
    #[serde(skip)]
    pub samples: Vec<SampleRow>,
}

fn eligible_summary(cfg: &ExperimentConfig) -> Result<SummaryStatistics> {
    cfg.validate()?;
    analytics::summary(&cfg.model, &cfg.summary_budget())
}

/// Per-replica `T(n)/n` and `X(t)/t` along the grid.
type RatioPair = (Vec<f64>, Vec<f64>);

fn budget_for(cfg: &ExperimentConfig, lambda: f64, t_max: u64, n_max: u64) -> Result<SimulationBudget> {
    SimulationBudget::new(t_max, n_max, cfg.guard(lambda), cfg.max_steps().max(t_max))
}

struct Quenched {
    window: EnvironmentWindow,
    profile: SiteProfile,
}

fn quenched(cfg: &ExperimentConfig, seed: u64, guard: i64, hi: i64) -> Result<Quenched> {
    let (window, profile) = analytics::realize_with_margin(&cfg.model, -guard, hi, seed, cfg.tol)?;
    Ok(Quenched { window, profile })
}

struct Standardized {
    samples: Vec<SampleRow>,
    center: f64,
    scale_factor: f64,
    sigma2_window: f64,
    sigma_star: Option<f64>,
    mean_offset_bound: f64,
}

fn hitting_run(cfg: &ExperimentConfig, s: &SummaryStatistics, env_seed: u64) -> Result<Standardized> {
    let n = cfg.n;
    let budget = budget_for(cfg, s.lambda.value, cfg.max_steps(), n)?;
    let q = quenched(cfg, env_seed, budget.left_guard, n as i64 + 1)?;
    let h = q.profile.centering_h(n as f64)?;
    let var = q.profile.sigma2_sum(0, n as i64)?;
    let scale = var.sqrt();
    let raw = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| walk::sample_total_hitting_time(&q.window, n, ReplicaStreams::new(cfg.walk_seed, i), &budget))
        .collect::<Result<Vec<u64>>>()?;
    let samples = raw
        .iter()
        .enumerate()
        .map(|(i, &t)| SampleRow {
            replica: i as u64,
            raw: t as i64,
            standardized: (t as f64 - h) / scale,
        })
        .collect();
    Ok(Standardized {
        samples,
        center: h,
        scale_factor: scale,
        sigma2_window: var / n as f64,
        sigma_star: None,
        mean_offset_bound: 5.0 * scale / (cfg.replicas as f64).sqrt(),
    })
}

fn position_run(cfg: &ExperimentConfig, s: &SummaryStatistics, env_seed: u64) -> Result<Standardized> {
    let t = cfg.t;
    let mu = s.mu.value;
    let budget = budget_for(cfg, s.lambda.value, t, t)?;
    let q = quenched(cfg, env_seed, budget.left_guard, t as i64 + 1)?;
    let sites = ((t as f64 / mu).floor() as i64).max(1);
    let sigma2_window = q.profile.sigma2_sum(0, sites)? / sites as f64;
    let sigma_star = (sigma2_window / mu.powi(3)).sqrt();
    let center = match cfg.centering {
        Centering::Explicit => explicit_centering(&q.profile, mu, t)?,
        Centering::Implicit => implicit_centering(&q.profile, t)?.0 as f64,
    };
    let scale = (t as f64).sqrt() * sigma_star;
    let raw = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| {
            let mut r = ReplicaStreams::new(cfg.walk_seed, i).trajectory();
            walk::sample_position(&q.window, 0, &[t], &mut r, &budget).map(|v| v[0].1)
        })
        .collect::<Result<Vec<i64>>>()?;
    let samples = raw
        .iter()
        .enumerate()
        .map(|(i, &x)| SampleRow {
            replica: i as u64,
            raw: x,
            standardized: (x as f64 - center) / scale,
        })
        .collect();
    Ok(Standardized {
        samples,
        center,
        scale_factor: scale,
        sigma2_window,
        sigma_star: Some(sigma_star),
        // centering is only accurate to o(sqrt t); report the offset against a loose bound
        mean_offset_bound: 5.0 * scale / (cfg.replicas as f64).sqrt() + (1.0 + mu),
    })
}

fn run_experiment(
    cfg: &ExperimentConfig,
    name: &str,
    run: impl Fn(&ExperimentConfig, &SummaryStatistics, u64) -> Result<Standardized>,
    centering: Option<Centering>,
) -> Result<ExperimentReport> {
    let s = eligible_summary(cfg)?;
    let threshold = cfg.ks_threshold();
    let first = run(cfg, &s, cfg.env_seed)?;
    let z: Vec<f64> = first.samples.iter().map(|r| r.standardized).collect();
    let ks = ks_distance(&z, normal_cdf)?;
    let mean_offset = first
        .samples
        .iter()
        .map(|r| r.raw as f64 - first.center)
        .collect::<CompensatedSum>()
        .value()
        / cfg.replicas as f64;
    let mut environments = Vec::new();
    for i in 1..cfg.env_replicas {
        let seed = cfg.env_seed_at(i);
        let other = run(cfg, &s, seed)?;
        let z: Vec<f64> = other.samples.iter().map(|r| r.standardized).collect();
        let d = ks_distance(&z, normal_cdf)?;
        environments.push(EnvironmentRun {
            env_seed: seed,
            ks_distance: d,
            verdict: Verdict::from_bool(d <= threshold),
        });
    }
    Ok(ExperimentReport {
        experiment: name.into(),
        model_id: cfg.model.id(),
        env_seed: cfg.env_seed,
        walk_seed: cfg.walk_seed,
        scale: if centering.is_some() { cfg.t } else { cfg.n },
        replicas: cfg.replicas,
        centering,
        center: first.center,
        mu: s.mu.value,
        sigma2_model: s.sigma2.value,
        sigma2_window: first.sigma2_window,
        scale_factor: first.scale_factor,
        sigma_star: first.sigma_star,
        ks_distance: ks,
        ks_threshold: threshold,
        cdf: cdf_table(&z, &cfg.x_grid),
        mean_offset,
        mean_offset_bound: first.mean_offset_bound,
        verdict: Verdict::from_bool(ks <= threshold),
        environments,
        samples: first.samples,
    })
}

/// `(T(n) - H(n)) / sqrt(sum_{k<n} sigma_k^2)` over replicas, against the normal law.
pub fn clt_hitting(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment(cfg, "clt_hitting", hitting_run, None)
}

/// `(X(t) - b(t)) / (sqrt(t) sigma*)` with the configured centering.
pub fn clt_position(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment(cfg, "clt_position", position_run, Some(cfg.centering))
}

/// Raw hitting times and positions without standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub model_id: String,
    pub env_seed: u64,
    pub walk_seed: u64,
    pub n: u64,
    pub t: u64,
    #[serde(skip)]
    pub rows: Vec<SimulationRow>,
    pub mean_hitting_time: f64,
    pub mean_position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub replica: u64,
    pub hitting_time: u64,
    pub position: i64,
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let class = env::classify(&cfg.model, None)?;
    if class.regime != Regime::TransientRight {
        return Err(RwreError::NotCltEligible {
            reason: format!("lambda = {} is not negative", class.lambda.value),
        });
    }
    let budget = budget_for(cfg, class.lambda.value, cfg.t, cfg.n)?;
    let hi = cfg.n.max(cfg.t) as i64 + 1;
    let window = env::realize(&cfg.model, -budget.left_guard - 1, hi, cfg.env_seed)?;
    let rows = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| {
            let streams = ReplicaStreams::new(cfg.walk_seed, i);
            let hitting_time = walk::sample_total_hitting_time(&window, cfg.n, streams, &budget)?;
            let position = walk::sample_position(&window, 0, &[cfg.t], &mut streams.trajectory(), &budget)?[0].1;
            Ok(SimulationRow {
                replica: i,
                hitting_time,
                position,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = rows.len() as f64;
    Ok(SimulationReport {
        model_id: cfg.model.id(),
        env_seed: cfg.env_seed,
        walk_seed: cfg.walk_seed,
        n: cfg.n,
        t: cfg.t,
        mean_hitting_time: rows.iter().map(|r| r.hitting_time as f64).sum::<f64>() / m,
        mean_position: rows.iter().map(|r| r.position as f64).sum::<f64>() / m,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnPoint {
    pub scale: u64,
    /// Mean over replicas of `T(n)/n` or `X(t)/t`; `None` when not reached.
    pub ratio: Option<f64>,
    /// `|ratio - target| / target` when the target is finite.
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnReport {
    pub model_id: String,
    pub positive_speed: bool,
    pub mu: Option<f64>,
    pub r1: f64,
    pub lambda: f64,
    pub replicas: u64,
    pub threshold: f64,
    pub hitting: Vec<LlnPoint>,
    pub position: Vec<LlnPoint>,
    /// For zero speed: `X/t` at the first scale over `X/t` at the last.
    pub speed_decay: Option<f64>,
    pub hitting_ratio_growing: Option<bool>,
    pub verdict: Verdict,
}

/// Law of large numbers over `lln_grid`, averaged over `lln_replicas`
/// independent walks in one environment.
pub fn lln_check(cfg: &ExperimentConfig) -> Result<LlnReport> {
    cfg.validate()?;
    let class = env::classify(&cfg.model, None)?;
    if class.regime != Regime::TransientRight {
        return Err(RwreError::NotCltEligible {
            reason: format!("lambda = {} is not negative", class.lambda.value),
        });
    }
    let lambda = class.lambda.value;
    let r1 = env::r_kappa(&cfg.model, 1.0)?.value;
    let grid = &cfg.lln_grid;
    let top = *grid.last().unwrap();
    let reps = cfg.lln_replicas;
    if r1 < 1.0 {
        let mu = (match &cfg.model {
            EnvironmentModel::QuasiPeriodic { .. } => analytics::summary(&cfg.model, &cfg.summary_budget())?.mu,
            _ => env::Estimate::exact((1.0 + r1) / (1.0 - r1)),
        })
        .value;
        let budget = budget_for(cfg, lambda, top, top)?;
        let window = env::realize(&cfg.model, -budget.left_guard - 1, top as i64 + 1, cfg.env_seed)?;
        let per_rep = (0..reps)
            .into_par_iter()
            .map(|i| {
                let streams = ReplicaStreams::new(cfg.walk_seed, i);
                let hs = walk::sample_hitting_times(&window, top, streams, &budget)?;
                let xs = walk::sample_position(&window, 0, grid, &mut streams.trajectory(), &budget)?;
                Ok((
                    grid.iter()
                        .map(|&n| hs.hitting[n as usize] as f64 / n as f64)
                        .collect::<Vec<_>>(),
                    xs.iter().map(|&(t, x)| x as f64 / t as f64).collect::<Vec<_>>(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let avg = |pick: &dyn Fn(&RatioPair) -> f64| per_rep.iter().map(pick).sum::<f64>() / reps as f64;
        let mut hitting = Vec::new();
        let mut position = Vec::new();
        for (j, &s) in grid.iter().enumerate() {
            let h = avg(&|r| r.0[j]);
            let x = avg(&|r| r.1[j]);
            hitting.push(LlnPoint {
                scale: s,
                ratio: Some(h),
                relative_error: Some((h - mu).abs() / mu),
            });
            position.push(LlnPoint {
                scale: s,
                ratio: Some(x),
                relative_error: Some((x - 1.0 / mu).abs() * mu),
            });
        }
        let ok = hitting.last().unwrap().relative_error.unwrap() <= cfg.lln_threshold
            && position.last().unwrap().relative_error.unwrap() <= cfg.lln_threshold;
        return Ok(LlnReport {
            model_id: cfg.model.id(),
            positive_speed: true,
            mu: Some(mu),
            r1,
            lambda,
            replicas: reps,
            threshold: cfg.lln_threshold,
            hitting,
            position,
            speed_decay: None,
            hitting_ratio_growing: None,
            verdict: Verdict::from_bool(ok),
        });
    }
    // zero speed: the walk stalls in ever deeper traps
    let guard = cfg.left_guard.unwrap_or(1000);
    let budget = SimulationBudget::new(top, top, guard, cfg.max_steps().max(top))?;
    let window = env::realize(&cfg.model, -guard - 1, top as i64 + 1, cfg.env_seed)?;
    let runs = (0..reps)
        .into_par_iter()
        .map(|i| {
            walk::sample_joint(
                &window,
                top,
                &mut ReplicaStreams::new(cfg.walk_seed, i).trajectory(),
                &budget,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let position: Vec<LlnPoint> = grid
        .iter()
        .map(|&t| LlnPoint {
            scale: t,
            ratio: Some(
                runs.iter()
                    .map(|r| r.position(t).unwrap() as f64 / t as f64)
                    .sum::<f64>()
                    / reps as f64,
            ),
            relative_error: None,
        })
        .collect();
    // hitting levels 1, 2, 4, .. reached by every replica
    let reach = runs.iter().map(|r| r.hitting.len() - 1).min().unwrap_or(0);
    let mut hitting = Vec::new();
    let mut level = 1usize;
    while level <= reach {
        let mean = runs.iter().map(|r| r.hitting[level] as f64).sum::<f64>() / reps as f64;
        hitting.push(LlnPoint {
            scale: level as u64,
            ratio: Some(mean / level as f64),
            relative_error: None,
        });
        level *= 2;
    }
    let first = position[0].ratio.unwrap();
    let last = position.last().unwrap().ratio.unwrap();
    let speed_decay = (last > 0.0).then(|| first / last);
    let decayed = first > 0.0 && last <= first / 2.0;
    let growing =
        (hitting.len() >= 2).then(|| hitting.first().unwrap().ratio.unwrap() < hitting.last().unwrap().ratio.unwrap());
    Ok(LlnReport {
        model_id: cfg.model.id(),
        positive_speed: false,
        mu: None,
        r1,
        lambda,
        replicas: reps,
        threshold: cfg.lln_threshold,
        hitting,
        position,
        speed_decay: speed_decay.or(if decayed { Some(f64::INFINITY) } else { None }),
        hitting_ratio_growing: growing,
        verdict: Verdict::from_bool(decayed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatioPoint {
    pub n: u64,
    /// `sum_{k<n} sigma_k^2 / (n sigma^2)`.
    pub ratio: f64,
    /// `max_{k<n} sigma_k^2 / sum_{k<n} sigma_k^2`.
    pub max_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatioReport {
    pub model_id: String,
    pub sigma2: f64,
    pub points: Vec<VarianceRatioPoint>,
    pub ratio_tolerance: f64,
    pub verdict: Verdict,
}

pub fn variance_ratio_check(cfg: &ExperimentConfig) -> Result<VarianceRatioReport> {
    let s = eligible_summary(cfg)?;
    let top = *cfg.n_grid.last().unwrap();
    let (_, profile) = analytics::realize_with_margin(&cfg.model, 0, top as i64, cfg.env_seed, cfg.tol)?;
    let sig = profile.sigma2_values();
    let mut points = Vec::new();
    let mut running_max: f64 = 0.0;
    let mut next = 0;
    for (k, &v) in sig.iter().enumerate() {
        running_max = running_max.max(v);
        while next < cfg.n_grid.len() && cfg.n_grid[next] == k as u64 + 1 {
            let n = cfg.n_grid[next];
            let total = profile.sigma2_sum(0, n as i64)?;
            points.push(VarianceRatioPoint {
                n,
                ratio: total / (n as f64 * s.sigma2.value),
                max_share: running_max / total,
            });
            next += 1;
        }
    }
    let tolerance = 0.05;
    let last = points.last().copied().unwrap();
    let ok = (last.ratio - 1.0).abs() <= tolerance && last.max_share <= 10.0 / last.n as f64 + 1e-12;
    Ok(VarianceRatioReport {
        model_id: cfg.model.id(),
        sigma2: s.sigma2.value,
        points,
        ratio_tolerance: tolerance,
        verdict: Verdict::from_bool(ok),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendVerdict {
    /// Identically zero up to rounding.
    Vanishing,
    Decreasing,
    Plateau,
    Inconclusive,
}

impl TrendVerdict {
    /// Plateau: the last step shrinks by less than half and the whole grid
    /// by less than a factor 10.
    pub fn of(values: &[f64]) -> Self {
        if values.iter().all(|v| v.abs() <= VANISHING) {
            return TrendVerdict::Vanishing;
        }
        let n = values.len();
        let last = values[n - 1];
        if n >= 2 && last >= 0.5 * values[n - 2] && last >= 0.1 * values[0] {
            TrendVerdict::Plateau
        } else if strictly_decreasing(values) {
            TrendVerdict::Decreasing
        } else {
            TrendVerdict::Inconclusive
        }
    }

    pub fn is_vanishing_or_decreasing(self) -> bool {
        matches!(self, TrendVerdict::Vanishing | TrendVerdict::Decreasing)
    }
}

pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn vanishing_or_monotone(values: &[f64]) -> bool {
    values.iter().all(|v| v.abs() <= VANISHING) || strictly_decreasing(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityEstimate {
    pub n: Vec<u64>,
    pub offsets: usize,
    /// Reference mean: the law's mean of `mu_0`.
    pub mu_ref: f64,
    pub epsilon: Vec<f64>,
    pub verdict: TrendVerdict,
}

/// Model-level `E mu_0` without the eligibility checks on `r(2)`.
fn model_mu(model: &EnvironmentModel, budget: &SummaryBudget) -> Result<f64> {
    match model {
        EnvironmentModel::QuasiPeriodic { .. } => Ok(analytics::summary(model, budget)?.mu.value),
        _ => {
            let r1 = env::r_kappa(model, 1.0)?.value;
            if r1 >= 1.0 {
                return Err(RwreError::NotCltEligible {
                    reason: format!("r(1) = {r1} >= 1: zero speed, mu is infinite"),
                });
            }
            Ok((1.0 + r1) / (1.0 - r1))
        }
    }
}

/// `max_{0<=k<K} |n^-1 sum_{j=k+1}^{k+n} (mu_j - mu)|` for each `n`.
pub fn uniform_ergodicity_estimate(
    model: &EnvironmentModel,
    n_grid: &[u64],
    offsets: usize,
    env_seed: u64,
    tol: f64,
) -> Result<ErgodicityEstimate> {
    if n_grid.is_empty() || offsets == 0 {
        return Err(RwreError::invalid_arg(
            "n_grid",
            "need at least one scale and one offset",
        ));
    }
    let budget = SummaryBudget {
        seed: env_seed,
        tol,
        ..SummaryBudget::default()
    };
    let mu_ref = model_mu(model, &budget)?;
    let top = *n_grid.iter().max().unwrap() as i64 + offsets as i64;
    let (_, profile) = analytics::realize_with_margin(model, 0, top, env_seed, tol)?;
    let epsilon = n_grid
        .iter()
        .map(|&n| max_window_deviation(&profile, mu_ref, n as i64, 1, offsets as i64).map(|d| d / n as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(ErgodicityEstimate {
        n: n_grid.to_vec(),
        offsets,
        mu_ref,
        verdict: TrendVerdict::of(&epsilon),
        epsilon,
    })
}

/// `max_{first <= s < first + count} |sum_{j=s}^{s+len-1} (mu_j - mu)|`.
fn max_window_deviation(profile: &SiteProfile, mu: f64, len: i64, first: i64, count: i64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for s in first..first + count {
        best = best.max(profile.deviation_sum(mu, s, s + len)?.abs());
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelPoint {
    pub t: u64,
    pub x: f64,
    /// `t^-1/2 sum_{t/mu}^{b(t) + sqrt(t) sigma* x} (mu_k - mu)`.
    pub rel1: f64,
    /// `t^-1/2 sum_{b~(t)}^{b~(t) + sqrt(t) sigma* x} (mu_k - mu)`.
    pub rel2: f64,
    /// `t^-1/2 sum_{t/mu}^{b(t) + sqrt(t) sigma* x - 1} (mu_k - mu)`.
    pub rel13: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub n: u64,
    /// `R(n, c)`.
    pub r_nc: f64,
    /// `H*(n) / sqrt(n)`.
    pub h_star_sqrt: f64,
    /// `H*(n) / n`.
    pub h_star_linear: f64,
    /// `n^{-(1+c)/2} H(n)`.
    pub h_scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDiagnostics {
    pub env_seed: u64,
    pub rel: Vec<RelPoint>,
    pub scales: Vec<ScalePoint>,
}

/// Uniform bound on the `rel2` sum from the window deviation over all
/// starting points up to `b~(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rel2Bound {
    pub t: u64,
    pub x: f64,
    pub rel2: f64,
    /// `eps_{sqrt t} sigma* |x|`.
    pub scaled_epsilon: f64,
    /// `t^-1/2 max_s |sum of (mu_k - mu) over windows of the same length|`.
    pub uniform_bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub t: u64,
    pub x: f64,
    pub median_abs_rel1: f64,
    pub median_abs_rel2: f64,
    pub median_abs_rel13: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianScale {
    pub n: u64,
    pub median_r_nc: f64,
    pub median_h_star_sqrt: f64,
    pub median_h_star_linear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub model_id: String,
    pub mu: f64,
    pub sigma_star: f64,
    pub c: f64,
    pub t_grid: Vec<u64>,
    pub n_grid: Vec<u64>,
    pub x_grid: Vec<f64>,
    #[serde(skip)]
    pub seeds: Vec<SeedDiagnostics>,
    pub medians: Vec<MedianRow>,
    pub median_scales: Vec<MedianScale>,
    pub ergodicity: ErgodicityEstimate,
    pub rel2_bounds: Vec<Rel2Bound>,
    /// Trend of the median `|rel1|` at `x = 1` across `t_grid`.
    pub rel1_trend: Option<TrendVerdict>,
    pub h_star_linear_trend: TrendVerdict,
    /// Largest over smallest median `H*(n)/sqrt(n)`.
    pub h_star_sqrt_band: f64,
    pub verdict: Verdict,
}

fn seed_diagnostics(
    cfg: &ExperimentConfig,
    mu: f64,
    sigma_star: f64,
    seed: u64,
) -> Result<(SeedDiagnostics, SiteProfile)> {
    let t_top = *cfg.t_grid.last().unwrap() as f64;
    let n_top = *cfg.n_grid.last().unwrap() as f64;
    let x_max = cfg.x_grid.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let hi = (2.0 * t_top / mu + t_top.sqrt() * sigma_star * x_max)
        .max(t_top)
        .max(n_top + n_top.powf((1.0 + cfg.c) / 2.0))
        .ceil() as i64
        + 100;
    let (_, profile) = analytics::realize_with_margin(&cfg.model, 0, hi, seed, cfg.tol)?;
    let mut rel = Vec::new();
    for &t in &cfg.t_grid {
        let tf = t as f64;
        let b = explicit_centering(&profile, mu, t)?;
        let (bt, _, _) = implicit_centering(&profile, t)?;
        let root = tf.sqrt();
        for &x in &cfg.x_grid {
            let shift = root * sigma_star * x;
            rel.push(RelPoint {
                t,
                x,
                rel1: profile.deviation_range_sum(mu, tf / mu, b + shift)? / root,
                rel2: profile.deviation_range_sum(mu, bt as f64, bt as f64 + shift)? / root,
                rel13: profile.deviation_range_sum(mu, tf / mu, b + shift - 1.0)? / root,
            });
        }
    }
    let grid: Vec<usize> = cfg.n_grid.iter().map(|&n| n as usize).collect();
    let fl = fluctuation_series(&profile, mu, &grid)?;
    let mut scales = Vec::new();
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let nf = n as f64;
        let reach = nf.powf((1.0 + cfg.c) / 2.0).floor() as i64;
        let ni = n as i64;
        let reach = reach.min(ni);
        let mut best: f64 = 0.0;
        for s in -reach..=reach {
            let v = profile.deviation_range_sum(mu, ni as f64, (ni + s) as f64)?;
            best = best.max(v.abs());
        }
        scales.push(ScalePoint {
            n,
            r_nc: best / nf.sqrt(),
            h_star_sqrt: fl.script_h_star[i] / nf.sqrt(),
            h_star_linear: fl.script_h_star[i] / nf,
            h_scaled: fl.script_h[i] / nf.powf((1.0 + cfg.c) / 2.0),
        });
    }
    Ok((
        SeedDiagnostics {
            env_seed: seed,
            rel,
            scales,
        },
        profile,
    ))
}

/// Range-sum conditions, `R(n, c)`, the fluctuation series and the
/// uniform-ergodicity estimate, medians over `diagnostic_env_seeds`
/// environments.
pub fn rel_diagnostics(cfg: &ExperimentConfig) -> Result<DiagnosticReport> {
    let s = eligible_summary(cfg)?;
    let mu = s.mu.value;
    let sigma_star = s.sigma_star;
    let runs = (0..cfg.diagnostic_env_seeds)
        .into_par_iter()
        .map(|i| seed_diagnostics(cfg, mu, sigma_star, cfg.env_seed_at(i)))
        .collect::<Result<Vec<_>>>()?;
    let rel_len = runs[0].0.rel.len();
    let medians: Vec<MedianRow> = (0..rel_len)
        .map(|j| {
            let col =
                |f: &dyn Fn(&RelPoint) -> f64| median(&runs.iter().map(|r| f(&r.0.rel[j]).abs()).collect::<Vec<_>>());
            let p = &runs[0].0.rel[j];
            MedianRow {
                t: p.t,
                x: p.x,
                median_abs_rel1: col(&|r| r.rel1),
                median_abs_rel2: col(&|r| r.rel2),
                median_abs_rel13: col(&|r| r.rel13),
            }
        })
        .collect();
    let median_scales: Vec<MedianScale> = (0..cfg.n_grid.len())
        .map(|j| {
            let col =
                |f: &dyn Fn(&ScalePoint) -> f64| median(&runs.iter().map(|r| f(&r.0.scales[j])).collect::<Vec<_>>());
            MedianScale {
                n: cfg.n_grid[j],
                median_r_nc: col(&|p| p.r_nc),
                median_h_star_sqrt: col(&|p| p.h_star_sqrt),
                median_h_star_linear: col(&|p| p.h_star_linear),
            }
        })
        .collect();
    let rel1_at_one: Vec<f64> = medians
        .iter()
        .filter(|m| m.x == 1.0)
        .map(|m| m.median_abs_rel1)
        .collect();
    let rel1_trend = (!rel1_at_one.is_empty()).then(|| TrendVerdict::of(&rel1_at_one));
    let lin: Vec<f64> = median_scales.iter().map(|m| m.median_h_star_linear).collect();
    let h_star_linear_trend = TrendVerdict::of(&lin);
    let sq: Vec<f64> = median_scales.iter().map(|m| m.median_h_star_sqrt).collect();
    let sq_max = sq.iter().cloned().fold(0.0, f64::max);
    let sq_min = sq.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_star_sqrt_band = if sq_max <= VANISHING { 1.0 } else { sq_max / sq_min };

    let ergodicity =
        uniform_ergodicity_estimate(&cfg.model, &cfg.n_grid, cfg.ergodicity_offsets, cfg.env_seed, cfg.tol)?;

    // uniform bound for rel2 on the first environment
    let profile = &runs[0].1;
    let mut rel2_bounds = Vec::new();
    for p in &runs[0].0.rel {
        let tf = p.t as f64;
        let (bt, _, _) = implicit_centering(profile, p.t)?;
        let top = (bt as f64 + tf.sqrt() * sigma_star * p.x).floor() as i64;
        let len = (top - bt).abs() + 1;
        let last_start = profile.end() - len;
        let count = (bt.max(top) + 1).min(last_start + 1);
        let eps_len = (tf.sqrt().floor() as i64).max(1);
        let eps_root =
            max_window_deviation(profile, mu, eps_len, 0, (profile.end() - eps_len).min(bt + 1))? / eps_len as f64;
        let uniform_bound = if count > 0 {
            max_window_deviation(profile, mu, len, 0, count)? / tf.sqrt()
        } else {
            f64::NAN
        };
        rel2_bounds.push(Rel2Bound {
            t: p.t,
            x: p.x,
            rel2: p.rel2,
            scaled_epsilon: eps_root * sigma_star * p.x.abs(),
            uniform_bound,
            holds: p.rel2.abs() <= uniform_bound * (1.0 + 1e-12) + 1e-12,
        });
    }

    let ok = vanishing_or_monotone(&rel1_at_one) && vanishing_or_monotone(&lin) && h_star_sqrt_band <= 10.0;
    Ok(DiagnosticReport {
        model_id: cfg.model.id(),
        mu,
        sigma_star,
        c: cfg.c,
        t_grid: cfg.t_grid.clone(),
        n_grid: cfg.n_grid.clone(),
        x_grid: cfg.x_grid.clone(),
        seeds: runs.into_iter().map(|r| r.0).collect(),
        medians,
        median_scales,
        ergodicity,
        rel2_bounds,
        rel1_trend,
        h_star_linear_trend,
        h_star_sqrt_band,
        verdict: Verdict::from_bool(ok),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub trajectories: u64,
    pub t_max: u64,
    /// `(trajectory, t, y)` triples examined for the event identity.
    pub event_checks: u64,
    pub event_violations: u64,
    pub bound_checks: u64,
    pub bound_violations: u64,
    pub parity_violations: u64,
    pub odd_tau_violations: u64,
    pub verdict: Verdict,
}

/// Exhaustive check of `{n_t <= y} <=> {T(y+1) > t}` and
/// `|X(t) - n_t| <= t - T(n_t) < tau_{n_t}` on joint trajectories.
pub fn coupling_identity_check(cfg: &ExperimentConfig) -> Result<CouplingReport> {
    cfg.validate()?;
    let class = env::classify(&cfg.model, None)?;
    let t_max = cfg.coupling_t;
    let guard = cfg.guard(class.lambda.value).max(t_max as i64 / 4);
    let budget = SimulationBudget::new(t_max, t_max, guard, cfg.max_steps().max(t_max))?;
    let window = env::realize(&cfg.model, -guard - 1, t_max as i64 + 1, cfg.env_seed)?;
    let per = (0..cfg.coupling_replicas)
        .into_par_iter()
        .map(|i| {
            let mut r = ReplicaStreams::new(cfg.walk_seed, i).trajectory();
            let j = walk::sample_joint(&window, t_max, &mut r, &budget)?;
            Ok(check_trajectory(&j))
        })
        .collect::<Result<Vec<[u64; 6]>>>()?;
    let mut tot = [0u64; 6];
    for c in per {
        for (a, b) in tot.iter_mut().zip(c) {
            *a += b;
        }
    }
    let ok = tot[1] == 0 && tot[3] == 0 && tot[4] == 0 && tot[5] == 0;
    Ok(CouplingReport {
        trajectories: cfg.coupling_replicas,
        t_max,
        event_checks: tot[0],
        event_violations: tot[1],
        bound_checks: tot[2],
        bound_violations: tot[3],
        parity_violations: tot[4],
        odd_tau_violations: tot[5],
        verdict: Verdict::from_bool(ok),
    })
}

/// `[event checks, event violations, bound checks, bound violations, parity, odd tau]`.
fn check_trajectory(j: &walk::JointTrajectory) -> [u64; 6] {
    let mut c = [0u64; 6];
    let t_max = j.t_max();
    let mut times: Vec<u64> = (0..=t_max).step_by(((t_max / 50).max(1)) as usize).collect();
    times.extend(j.hitting.iter().copied());
    times.extend(j.hitting.iter().filter(|&&h| h > 0).map(|&h| h - 1));
    times.push(t_max);
    times.sort_unstable();
    times.dedup();
    let max_y = j.hitting.len() as i64 + 1;
    let y_step = ((max_y / 40).max(1)) as usize;
    for &t in &times {
        let n_t = j.n_t(t).unwrap();
        for y in (0..=max_y)
            .step_by(y_step)
            .chain([n_t as i64, n_t as i64 - 1, n_t as i64 + 1])
        {
            if y < 0 {
                continue;
            }
            let lhs = n_t as i64 <= y;
            let rhs = match j.hitting_time(y as usize + 1) {
                Some(h) => h > t,
                None => true,
            };
            c[0] += 1;
            if lhs != rhs {
                c[1] += 1;
            }
        }
        let x = j.position(t).unwrap();
        let since = t - j.hitting[n_t];
        c[2] += 1;
        let mut ok = (x - n_t as i64).unsigned_abs() <= since;
        if let Some(next) = j.hitting_time(n_t + 1) {
            ok &= since < next - j.hitting[n_t];
        }
        if !ok {
            c[3] += 1;
        }
        if (x + t as i64).rem_euclid(2) != 0 {
            c[4] += 1;
        }
    }
    c[5] = j.tau().iter().filter(|&&t| t % 2 == 0).count() as u64;
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceAudit {
    pub r1: f64,
    pub r2: f64,
    /// Closed form with `(1 + r1^2)`.
    pub printed: Option<f64>,
    /// Closed form with `(1 + r1)`.
    pub corrected: Option<f64>,
    pub ergodic: f64,
    pub ergodic_se: f64,
    /// Monte Carlo variance of `tau` at the audit site, and the series value there.
    pub site: i64,
    pub site_sigma2_series: f64,
    pub site_mc: MomentEstimate,
    pub site_mu_series: f64,
    pub discrepancy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub model_id: String,
    pub env_seed: u64,
    pub boundary: i64,
    pub sites: i64,
    pub max_mu_error: f64,
    pub max_sigma2_error: f64,
    pub mu_tolerance: f64,
    pub sigma2_tolerance: f64,
    pub max_residual: f64,
    /// Largest gap between the forcing built from `e` and the form with swapped terms.
    pub swapped_forcing_mismatch: f64,
    /// Largest gap between the forcing built from `e` and its `mu` rewrite.
    pub mu_form_forcing_mismatch: f64,
    pub variance: VarianceAudit,
    pub verdict: Verdict,
    #[serde(skip)]
    pub sites_table: Vec<OracleSiteRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSiteRow {
    pub k: i64,
    pub mu_series: f64,
    pub mu_oracle: f64,
    pub sigma2_series: f64,
    pub sigma2_oracle: f64,
}

/// Series against boundary-value oracle on sites `0..oracle_sites` with the
/// boundary `oracle_boundary` sites to the left, plus the closed-form audit.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<OracleCheckReport> {
    let s = eligible_summary(cfg)?;
    let n = cfg.oracle_sites;
    let a = -cfg.oracle_boundary;
    let (window, profile) = analytics::realize_with_margin(&cfg.model, a, n, cfg.env_seed, cfg.tol)?;
    let v = oracle::variance_hitting(&window, a, n)?;
    let mut max_mu_error: f64 = 0.0;
    let mut max_sigma2_error: f64 = 0.0;
    let mut sites_table = Vec::with_capacity(n as usize);
    for k in 0..n {
        let row = OracleSiteRow {
            k,
            mu_series: profile.mu(k)?,
            mu_oracle: v.expected.increment(k)?,
            sigma2_series: profile.sigma2(k)?,
            sigma2_oracle: v.increment(k)?,
        };
        max_mu_error = max_mu_error.max((row.mu_series - row.mu_oracle).abs());
        max_sigma2_error = max_sigma2_error.max((row.sigma2_series - row.sigma2_oracle).abs());
        sites_table.push(row);
    }
    let budget = budget_for(cfg, s.lambda.value, cfg.max_steps(), 1)?;
    let (mc_window, mc_profile) = if window.lo <= -budget.left_guard {
        (window.clone(), profile.clone())
    } else {
        analytics::realize_with_margin(&cfg.model, -budget.left_guard, n, cfg.env_seed, cfg.tol)?
    };
    let site_mc = oracle::mc_moment_oracle(&mc_window, 0, cfg.oracle_mc_samples, cfg.walk_seed, &budget)?;
    let cf = s.closed_form_variance;
    let discrepancy = cf.is_some_and(|c| c.mismatch);
    let variance = VarianceAudit {
        r1: s.r1.value,
        r2: s.r2.value,
        printed: cf.map(|c| c.squared_r1_form),
        corrected: cf.map(|c| c.linear_r1_form),
        ergodic: s.sigma2.value,
        ergodic_se: s.sigma2.std_error,
        site: 0,
        site_sigma2_series: mc_profile.sigma2(0)?,
        site_mc,
        site_mu_series: mc_profile.mu(0)?,
        discrepancy,
    };
    let (mu_tol, s2_tol) = (1e-8, 1e-7);
    let ok = max_mu_error <= mu_tol && max_sigma2_error <= s2_tol;
    Ok(OracleCheckReport {
        model_id: cfg.model.id(),
        env_seed: cfg.env_seed,
        boundary: cfg.oracle_boundary,
        sites: n,
        max_mu_error,
        max_sigma2_error,
        mu_tolerance: mu_tol,
        sigma2_tolerance: s2_tol,
        max_residual: v.solve.max_residual.max(v.expected.solve.max_residual),
        swapped_forcing_mismatch: v.swapped_mismatch,
        mu_form_forcing_mismatch: v.mu_form_mismatch,
        variance,
        verdict: Verdict::from_bool(ok),
        sites_table,
    })
}

/// Model-level quantities, conditions and centerings for one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model_id: String,
    pub summary: SummaryStatistics,
    pub conditions: env::ConditionReport,
    pub ln_r_second_differences: Vec<f64>,
    pub centering: analytics::CenteringValues,
    pub h_n: f64,
    pub variance_ratio: VarianceRatioReport,
}

pub fn analyze(cfg: &ExperimentConfig) -> Result<AnalysisReport> {
    let s = eligible_summary(cfg)?;
    let conditions = env::check_conditions(&cfg.model, 2.5)?;
    let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
    let ln_r = env::ln_r_second_differences(&cfg.model, &grid)?;
    let hi = (cfg.t.max(cfg.n) as i64) + 1;
    let (_, profile) = analytics::realize_with_margin(&cfg.model, 0, hi, cfg.env_seed, cfg.tol)?;
    let centering = analytics::centering(&profile, s.mu.value, cfg.t)?;
    let h_n = profile.centering_h(cfg.n as f64)?;
    Ok(AnalysisReport {
        model_id: cfg.model.id(),
        summary: s,
        conditions,
        ln_r_second_differences: ln_r,
        centering,
        h_n,
        variance_ratio: variance_ratio_check(cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ks_three_points() {
        let d = ks_distance(&[-1.0, 0.0, 1.0], normal_cdf).unwrap();
        assert_abs_diff_eq!(d, 0.174_678, epsilon = 1e-6);
    }

    #[test]
    fn ks_empty_is_error() {
        assert!(matches!(ks_distance(&[], normal_cdf), Err(RwreError::EmptySample)));
    }

    #[test]
    fn ks_affine_invariance() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64 / 50.0 - 2.0).collect();
        let d1 = ks_distance(&xs, normal_cdf).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        let d2 = ks_distance(&ys, |y| normal_cdf((y - 1.0) / 3.0)).unwrap();
        assert_abs_diff_eq!(d1, d2, epsilon = 1e-12);
    }

    #[test]
    fn trend_verdicts() {
        assert_eq!(TrendVerdict::of(&[0.0, 0.0]), TrendVerdict::Vanishing);
        assert_eq!(TrendVerdict::of(&[3.0, 1.0, 0.2]), TrendVerdict::Decreasing);
        assert_eq!(TrendVerdict::of(&[1.0, 1.1, 0.9]), TrendVerdict::Plateau);
        assert_eq!(TrendVerdict::of(&[1.0, 0.4, 0.35]), TrendVerdict::Plateau);
        assert_eq!(TrendVerdict::of(&[1.0, 1.2, 0.3]), TrendVerdict::Inconclusive);
    }

    #[test]
    fn config_defaults_and_validation() {
        let mut cfg = ExperimentConfig::new(EnvironmentModel::constant(0.75));
        cfg.validate().unwrap();
        assert_abs_diff_eq!(cfg.ks_threshold(), 0.057_7, epsilon = 1e-4);
        cfg.replicas = 10;
        assert!(cfg.validate().is_err());
        cfg.replicas = 100;
        cfg.c = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn constant_rel_sums_vanish() {
        let mut cfg = ExperimentConfig::new(EnvironmentModel::constant(0.75));
        cfg.t_grid = vec![1000, 10_000];
        cfg.n_grid = vec![100, 1000];
        cfg.diagnostic_env_seeds = 2;
        cfg.summary_sites = 1000;
        let rep = rel_diagnostics(&cfg).unwrap();
        for m in &rep.medians {
            assert!(m.median_abs_rel1 < 1e-9 && m.median_abs_rel2 < 1e-9);
        }
        assert!(rep.ergodicity.epsilon.iter().all(|&e| e < 1e-12));
        assert!(rep.verdict.passed());
    }

    #[test]
    fn variance_ratio_constant() {
        let mut cfg = ExperimentConfig::new(EnvironmentModel::constant(0.75));
        cfg.summary_sites = 1000;
        let rep = variance_ratio_check(&cfg).unwrap();
        for p in &rep.points {
            assert_abs_diff_eq!(p.ratio, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p.max_share, 1.0 / p.n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_model_is_not_eligible() {
        let cfg = ExperimentConfig::new(EnvironmentModel::constant(0.5));
        assert!(matches!(clt_hitting(&cfg), Err(RwreError::NotCltEligible { .. })));
        assert!(matches!(oracle_check(&cfg), Err(RwreError::NotCltEligible { .. })));
    }

    #[test]
    fn coupling_small() {
        let mut cfg = ExperimentConfig::new(EnvironmentModel::constant(0.75));
        cfg.coupling_replicas = 20;
        cfg.coupling_t = 500;
        let rep = coupling_identity_check(&cfg).unwrap();
        assert!(rep.verdict.passed());
        assert!(rep.event_checks > 1000);
    }
}
