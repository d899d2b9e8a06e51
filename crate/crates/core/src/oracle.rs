//! Independent exact methods used to cross-check the series and the simulator.
//!
//! The boundary-value solver treats the walk killed at `a` and at `n`: for
//! `a < k < n` it solves `h_k = p_k h_{k+1} + q_k h_{k-1} + f_k` with
//! `h_a = h_n = 0`. As `a` moves left the solution converges to the
//! quantities of the unrestricted walk, geometrically in the `A`-products.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::EnvironmentWindow;
use crate::rng::ReplicaStreams;
use crate::walk::{self, SimulationBudget};
use crate::{Result, RwreError};

/// Residual tolerance of the tridiagonal solve, relative to `max(1, |h_k|)`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Cauchy-gap target used when choosing the left boundary automatically.
pub const BOUNDARY_GAP_TOL: f64 = 1e-9;

/// Output of the forward/backward sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSolve {
    pub a: i64,
    pub n: i64,
    /// `h_a ..= h_n`.
    pub h: Vec<f64>,
    /// `phi_a ..= phi_{n-1}`, with `phi_a = 0`.
    pub phi: Vec<f64>,
    /// `d~_a ..= d~_{n-1}`, with `d~_a = 0`.
    pub d_tilde: Vec<f64>,
    pub max_residual: f64,
}

impl ChainSolve {
    pub fn at(&self, x: i64) -> Result<f64> {
        if x < self.a || x > self.n {
            return Err(RwreError::IndexOutOfWindow {
                index: x,
                lo: self.a,
                hi: self.n,
            });
        }
        Ok(self.h[(x - self.a) as usize])
    }
}

fn check_cover(window: &EnvironmentWindow, a: i64, n: i64) -> Result<()> {
    if a >= n {
        return Err(RwreError::invalid_arg(
            "a",
            format!("left boundary {a} must be below {n}"),
        ));
    }
    for x in [a, n] {
        if !window.contains(x) {
            return Err(RwreError::IndexOutOfWindow {
                index: x,
                lo: window.lo,
                hi: window.hi,
            });
        }
    }
    Ok(())
}

/// Solves the killed-chain system with forcing `f` given on `a+1 ..= n-1`.
pub fn solve_finite_chain(window: &EnvironmentWindow, a: i64, n: i64, f: &[f64]) -> Result<ChainSolve> {
    check_cover(window, a, n)?;
    let interior = (n - a - 1) as usize;
    if f.len() != interior {
        return Err(RwreError::invalid_arg(
            "f",
            format!("expected {interior} forcing values, got {}", f.len()),
        ));
    }
    let len = (n - a) as usize;
    let mut phi = vec![0.0; len];
    let mut d_tilde = vec![0.0; len];
    for i in 1..len {
        let x = a + i as i64;
        let p = window.p_at(x);
        let q = 1.0 - p;
        let denom = 1.0 - q * phi[i - 1];
        phi[i] = p / denom;
        d_tilde[i] = (q * d_tilde[i - 1] + f[i - 1]) / denom;
    }
    let mut h = vec![0.0; len + 1];
    for i in (1..len).rev() {
        h[i] = phi[i] * h[i + 1] + d_tilde[i];
    }
    let mut max_residual: f64 = 0.0;
    for i in 1..len {
        let x = a + i as i64;
        let p = window.p_at(x);
        let r = h[i] - p * h[i + 1] - (1.0 - p) * h[i - 1] - f[i - 1];
        max_residual = max_residual.max(r.abs() / h[i].abs().max(1.0));
    }
    if max_residual.is_nan() || max_residual > RESIDUAL_TOL {
        return Err(RwreError::InsufficientData(format!(
            "tridiagonal residual {max_residual:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    Ok(ChainSolve {
        a,
        n,
        h,
        phi,
        d_tilde,
        max_residual,
    })
}

/// Expected exit time `e(x)` from `(a, n)` and its increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedHitting {
    pub solve: ChainSolve,
    /// `e(k) - e(k+1)` for `k` in `a+1 .. n`.
    pub increments: Vec<f64>,
}

impl ExpectedHitting {
    pub fn increment(&self, k: i64) -> Result<f64> {
        increment_at(&self.increments, self.solve.a, self.solve.n, k)
    }
}

fn increment_at(values: &[f64], a: i64, n: i64, k: i64) -> Result<f64> {
    if k <= a || k >= n {
        return Err(RwreError::IndexOutOfWindow {
            index: k,
            lo: a + 1,
            hi: n - 1,
        });
    }
    Ok(values[(k - a - 1) as usize])
}

fn increments(h: &[f64]) -> Vec<f64> {
    h.windows(2).skip(1).map(|w| w[0] - w[1]).collect()
}

pub fn expected_hitting(window: &EnvironmentWindow, a: i64, n: i64) -> Result<ExpectedHitting> {
    check_cover(window, a, n)?;
    let f = vec![1.0; (n - a - 1) as usize];
    let solve = solve_finite_chain(window, a, n, &f)?;
    let increments = increments(&solve.h);
    Ok(ExpectedHitting { solve, increments })
}

/// Variance of the exit time, with the forcing audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceHitting {
    pub expected: ExpectedHitting,
    pub solve: ChainSolve,
    /// `v(k) - v(k+1)` for `k` in `a+1 .. n`.
    pub increments: Vec<f64>,
    /// Forcing built from `e`: `p (e(x+1) - e(x) + 1)^2 + q (e(x-1) - e(x) + 1)^2`.
    pub forcing: Vec<f64>,
    /// `p (mu_k + 1)^2 + q (1 - mu_{k-1})^2` with `mu_k = e(k) - e(k+1)`.
    pub forcing_swapped: Vec<f64>,
    /// `p (1 - mu_k)^2 + q (mu_{k-1} + 1)^2`.
    pub forcing_mu_form: Vec<f64>,
    /// `max |forcing_swapped - forcing|`.
    pub swapped_mismatch: f64,
    /// `max |forcing_mu_form - forcing|`.
    pub mu_form_mismatch: f64,
}

impl VarianceHitting {
    pub fn increment(&self, k: i64) -> Result<f64> {
        increment_at(&self.increments, self.solve.a, self.solve.n, k)
    }

    /// The variance of `T(n)` restricted to the killed chain, from site `x`.
    pub fn v(&self, x: i64) -> Result<f64> {
        self.solve.at(x)
    }
}

pub fn variance_hitting(window: &EnvironmentWindow, a: i64, n: i64) -> Result<VarianceHitting> {
    let expected = expected_hitting(window, a, n)?;
    let e = &expected.solve.h;
    let len = (n - a) as usize;
    let mut forcing = Vec::with_capacity(len - 1);
    let mut forcing_swapped = Vec::with_capacity(len - 1);
    let mut forcing_mu_form = Vec::with_capacity(len - 1);
    for i in 1..len {
        let p = window.p_at(a + i as i64);
        let q = 1.0 - p;
        forcing.push(p * (e[i + 1] - e[i] + 1.0).powi(2) + q * (e[i - 1] - e[i] + 1.0).powi(2));
        let mu_k = e[i] - e[i + 1];
        let mu_prev = e[i - 1] - e[i];
        forcing_swapped.push(p * (mu_k + 1.0).powi(2) + q * (1.0 - mu_prev).powi(2));
        forcing_mu_form.push(p * (1.0 - mu_k).powi(2) + q * (mu_prev + 1.0).powi(2));
    }
    let max_gap = |other: &[f64]| {
        forcing
            .iter()
            .zip(other)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let swapped_mismatch = max_gap(&forcing_swapped);
    let mu_form_mismatch = max_gap(&forcing_mu_form);
    let solve = solve_finite_chain(window, a, n, &forcing)?;
    let increments = increments(&solve.h);
    Ok(VarianceHitting {
        expected,
        solve,
        increments,
        forcing,
        forcing_swapped,
        forcing_mu_form,
        swapped_mismatch,
        mu_form_mismatch,
    })
}

/// `e`, `v` and the sweep arrays on one killed chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteChainSolution {
    pub a: i64,
    pub n: i64,
    pub e: Vec<f64>,
    pub v: Vec<f64>,
    pub phi: Vec<f64>,
    pub d_tilde: Vec<f64>,
    /// `e(k) - e(k+1)`, `k` in `a+1 .. n`.
    pub mu: Vec<f64>,
    /// `v(k) - v(k+1)`, `k` in `a+1 .. n`.
    pub sigma2: Vec<f64>,
    /// Largest change of `mu` and `sigma2` on the target range when the boundary was last moved.
    pub boundary_gap: f64,
    pub swapped_forcing_mismatch: f64,
}

impl FiniteChainSolution {
    pub fn from_variance(v: VarianceHitting, boundary_gap: f64) -> Self {
        Self {
            a: v.solve.a,
            n: v.solve.n,
            e: v.expected.solve.h.clone(),
            phi: v.expected.solve.phi.clone(),
            d_tilde: v.expected.solve.d_tilde.clone(),
            mu: v.expected.increments.clone(),
            v: v.solve.h,
            sigma2: v.increments,
            boundary_gap,
            swapped_forcing_mismatch: v.swapped_mismatch,
        }
    }

    pub fn mu_at(&self, k: i64) -> Result<f64> {
        increment_at(&self.mu, self.a, self.n, k)
    }

    pub fn sigma2_at(&self, k: i64) -> Result<f64> {
        increment_at(&self.sigma2, self.a, self.n, k)
    }

    /// Solves on `(a, n)` with `a = n_low - max(40, 20/|lambda|)`, doubling
    /// the extension until `mu`, `sigma2` on `n_low .. n` move by at most
    /// [`BOUNDARY_GAP_TOL`] (relative).
    pub fn auto(window: &EnvironmentWindow, n_low: i64, n: i64, lambda: f64) -> Result<Self> {
        if n_low >= n {
            return Err(RwreError::invalid_arg("n_low", "must be below n"));
        }
        let mut ext = if lambda < 0.0 {
            40i64.max((20.0 / lambda.abs()).ceil() as i64)
        } else {
            40
        };
        let mut prev = variance_hitting(window, n_low - ext, n)?;
        loop {
            let next_ext = ext * 2;
            if n_low - next_ext < window.lo {
                return Err(RwreError::WindowTooSmall {
                    site: n_low,
                    lo: window.lo,
                });
            }
            let next = variance_hitting(window, n_low - next_ext, n)?;
            let mut gap: f64 = 0.0;
            for k in n_low..n {
                let m0 = prev.expected.increment(k)?;
                let m1 = next.expected.increment(k)?;
                let s0 = prev.increment(k)?;
                let s1 = next.increment(k)?;
                gap = gap
                    .max((m1 - m0).abs() / m1.abs().max(1.0))
                    .max((s1 - s0).abs() / s1.abs().max(1.0));
            }
            if gap <= BOUNDARY_GAP_TOL {
                return Ok(Self::from_variance(next, gap));
            }
            prev = next;
            ext = next_ext;
        }
    }
}

/// Exact law of `X(t)` started from `z0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPmf {
    pub t: u64,
    pub z0: i64,
    /// Offsets `-t, -t+2, .., t` relative to `z0`.
    pub support: Vec<i64>,
    pub probabilities: Vec<f64>,
}

impl ExactPmf {
    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probabilities)
            .map(|(&d, &p)| (self.z0 + d) as f64 * p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn probability(&self, x: i64) -> f64 {
        let d = x - self.z0;
        let t = self.t as i64;
        if d < -t || d > t || (d + t) % 2 != 0 {
            return 0.0;
        }
        self.probabilities[((d + t) / 2) as usize]
    }

    /// Total-variation distance to the empirical law of `positions`.
    pub fn tv_distance(&self, positions: &[i64]) -> Result<f64> {
        if positions.is_empty() {
            return Err(RwreError::EmptySample);
        }
        let m = positions.len() as f64;
        let mut counts = std::collections::BTreeMap::<i64, u64>::new();
        for &x in positions {
            *counts.entry(x).or_default() += 1;
        }
        let mut tv = 0.0;
        for (&d, &p) in self.support.iter().zip(&self.probabilities) {
            let c = counts.remove(&(self.z0 + d)).unwrap_or(0) as f64;
            tv += (c / m - p).abs();
        }
        tv += counts.values().map(|&c| c as f64 / m).sum::<f64>();
        Ok(0.5 * tv)
    }
}

pub fn exact_position_distribution(window: &EnvironmentWindow, z0: i64, t: u64) -> Result<ExactPmf> {
    let ti = t as i64;
    let (left, right) = (z0 - ti, z0 + ti);
    if left < window.lo || right > window.hi {
        return Err(RwreError::IndexOutOfWindow {
            index: if left < window.lo { left } else { right },
            lo: window.lo,
            hi: window.hi,
        });
    }
    let width = (2 * t + 1) as usize;
    let mut cur = vec![0.0; width];
    let mut next = vec![0.0; width];
    cur[t as usize] = 1.0;
    for s in 0..t {
        next.iter_mut().for_each(|v| *v = 0.0);
        // after s steps the mass sits on offsets of parity s within [-s, s]
        let lo_i = (t - s) as usize;
        let hi_i = (t + s) as usize;
        for i in (lo_i..=hi_i).step_by(2) {
            let m = cur[i];
            if m == 0.0 {
                continue;
            }
            let p = window.p_at(left + i as i64);
            next[i + 1] += m * p;
            next[i - 1] += m * (1.0 - p);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let support: Vec<i64> = (0..=t).map(|j| -ti + 2 * j as i64).collect();
    let probabilities = (0..=t as usize).map(|j| cur[2 * j]).collect();
    Ok(ExactPmf {
        t,
        z0,
        support,
        probabilities,
    })
}

/// Sample mean and variance of `tau_k` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub samples: u64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

/// Moments from a list of samples; the variance error uses the fourth
/// central moment.
pub fn moments(samples: &[f64]) -> Result<MomentEstimate> {
    let m = samples.len();
    if m < 4 {
        return Err(RwreError::EmptySample);
    }
    let nf = m as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &x in samples {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    let variance = m2 / (nf - 1.0);
    let mu4 = m4 / nf;
    let s4 = variance * variance;
    let var_of_var = (mu4 - (nf - 3.0) / (nf - 1.0) * s4) / nf;
    Ok(MomentEstimate {
        samples: m as u64,
        mean,
        mean_se: (variance / nf).sqrt(),
        variance,
        variance_se: var_of_var.max(0.0).sqrt(),
    })
}

/// `n_samples` independent crossings of edge `k -> k+1`; sample `i` uses the
/// crossing substream of replica `i`.
pub fn mc_moment_oracle(
    window: &EnvironmentWindow,
    k: i64,
    n_samples: u64,
    seed: u64,
    budget: &SimulationBudget,
) -> Result<MomentEstimate> {
    if n_samples < 4 {
        return Err(RwreError::invalid_arg("n_samples", "need at least 4 samples"));
    }
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ReplicaStreams::new(seed, i).crossing(k);
            walk::sample_crossing_time(window, k, &mut rng, budget).map(|t| t as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    moments(&samples)
}
