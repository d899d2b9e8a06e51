//! Quenched site functionals and the centerings built from them.
//!
//! For a transient-to-the-right environment (`lambda < 0`) the expected
//! crossing time of edge `k -> k+1` is
//!
//! ```text
//! mu_k = 1 + 2 sum_{j>=0} prod_{i=k-j}^{k} A_i
//! ```
//!
//! and its variance is
//!
//! ```text
//! sigma_k^2 = sum_{j>=0} p_{k-j}^{-1} (mu_{k-j-1} + 1)^2 prod_{i=k-j}^{k} A_i .
//! ```
//!
//! Both series satisfy one-step recursions,
//! `mu_k = A_k mu_{k-1} + 1/p_k` and
//! `sigma_k^2 = A_k (sigma_{k-1}^2 + p_k^{-1} (mu_{k-1} + 1)^2)`,
//! which are forward-stable because the multipliers contract on average.
//! [`mu_site`] and [`sigma2_site`] evaluate single sites from the series;
//! [`SiteProfile`] seeds the recursions from the series once and then
//! sweeps a whole index range.

use serde::{Deserialize, Serialize};

use crate::env::{self, EnvironmentModel, EnvironmentWindow, Estimate, EstimateMethod, Regime};
use crate::stats::{mean_with_batch_se, CompensatedSum};
use crate::{Result, RwreError};

/// Default relative truncation tolerance for the site series.
pub const DEFAULT_TOL: f64 = 1e-15;
/// Hard cap on series length.
pub const MAX_TERMS: usize = 100_000;

const EPS: f64 = f64::EPSILON;

/// A truncated series value together with its error bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Tail estimate from the observed geometric decay plus a rounding bound.
    pub trunc_bound: f64,
    pub terms_used: usize,
    /// Same quantity from the one-step recursion seeded at the truncation depth.
    pub recursion_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteAnalytics {
    pub k: i64,
    pub odds_ratio: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub trunc_bound: f64,
    pub sigma2_trunc_bound: f64,
    pub terms_used: usize,
}

fn exhausted(site: i64, lo: i64, terms: usize, prod: f64) -> RwreError {
    let ratio = if terms == 0 { 1.0 } else { prod.powf(1.0 / terms as f64) };
    if ratio >= 1.0 - 1e-12 {
        RwreError::NonSummable { site, terms, ratio }
    } else {
        RwreError::WindowTooSmall { site, lo }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
        return Err(RwreError::invalid_arg("tol", format!("must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

/// `mu_k` from the series, stopping once the running `A`-product drops below
/// `tol` times the partial sum.
pub fn mu_site(window: &EnvironmentWindow, k: i64, tol: f64) -> Result<SeriesValue> {
    check_tol(tol)?;
    window.p(k)?;
    let mut sum = CompensatedSum::new();
    sum.add(1.0);
    let mut prod: f64 = 1.0;
    let mut j = 0usize;
    loop {
        if j >= MAX_TERMS {
            return Err(RwreError::NonSummable {
                site: k,
                terms: j,
                ratio: prod.powf(1.0 / j as f64),
            });
        }
        let i = k - j as i64;
        if i < window.lo {
            return Err(exhausted(k, window.lo, j, prod));
        }
        prod *= window.odds_at(i);
        sum.add(2.0 * prod);
        j += 1;
        if prod < tol * sum.value() {
            break;
        }
    }
    let value = sum.value();
    let ratio = prod.powf(1.0 / j as f64);
    if ratio >= 1.0 {
        return Err(RwreError::NonSummable {
            site: k,
            terms: j,
            ratio,
        });
    }
    let tail = 2.0 * prod * ratio / (1.0 - ratio);
    let trunc_bound = tail + 4.0 * j as f64 * EPS * value;

    // seed mu = 1 just left of the deepest site used; this reproduces the
    // truncated series exactly in exact arithmetic
    let mut rec = 1.0;
    for i in (k - j as i64 + 1)..=k {
        let p = window.p_at(i);
        rec = window.odds_at(i) * rec + 1.0 / p;
    }
    Ok(SeriesValue {
        value,
        trunc_bound,
        terms_used: j,
        recursion_value: rec,
    })
}

/// `sigma_k^2` from the series, with `mu` obtained for the needed sites by a
/// series seed followed by the forward recursion.
pub fn sigma2_site(window: &EnvironmentWindow, k: i64, tol: f64) -> Result<SeriesValue> {
    check_tol(tol)?;
    window.p(k)?;
    // depth at which the bare A-product is negligible
    let mut prod = 1.0;
    let mut depth = 0usize;
    while prod >= tol * 1e-3 {
        if depth >= MAX_TERMS {
            return Err(RwreError::NonSummable {
                site: k,
                terms: depth,
                ratio: prod.powf(1.0 / depth as f64),
            });
        }
        let i = k - depth as i64;
        if i < window.lo {
            return Err(exhausted(k, window.lo, depth, prod));
        }
        prod *= window.odds_at(i);
        depth += 1;
    }
    // mu on sites k-depth-1 ..= k-1
    let first = k - depth as i64 - 1;
    let seed = mu_site(window, first, tol)?;
    let mut mus = Vec::with_capacity(depth + 1);
    mus.push(seed.value);
    for i in (first + 1)..k {
        let prev = *mus.last().unwrap();
        mus.push(window.odds_at(i) * prev + 1.0 / window.p_at(i));
    }
    let mu_at = |site: i64| mus[(site - first) as usize];

    let mut sum = CompensatedSum::new();
    let mut prod = 1.0;
    let mut w_max: f64 = 0.0;
    let mut j = 0usize;
    while j < depth {
        let i = k - j as i64;
        let w = (mu_at(i - 1) + 1.0).powi(2) / window.p_at(i);
        w_max = w_max.max(w);
        prod *= window.odds_at(i);
        sum.add(w * prod);
        j += 1;
        if w_max * prod < tol * sum.value() {
            break;
        }
    }
    let value = sum.value();
    let ratio = prod.powf(1.0 / j as f64).min(1.0 - 1e-12);
    let trunc_bound = w_max * prod * ratio / (1.0 - ratio) + 4.0 * j as f64 * EPS * value;

    let mut rec = 0.0;
    for i in (k - j as i64 + 1)..=k {
        rec = window.odds_at(i) * (rec + (mu_at(i - 1) + 1.0).powi(2) / window.p_at(i));
    }
    Ok(SeriesValue {
        value,
        trunc_bound,
        terms_used: j,
        recursion_value: rec,
    })
}

pub fn site_analytics(window: &EnvironmentWindow, k: i64, tol: f64) -> Result<SiteAnalytics> {
    let mu = mu_site(window, k, tol)?;
    let s2 = sigma2_site(window, k, tol)?;
    Ok(SiteAnalytics {
        k,
        odds_ratio: window.odds_ratio(k)?,
        mu: mu.value,
        sigma2: s2.value,
        trunc_bound: mu.trunc_bound,
        sigma2_trunc_bound: s2.trunc_bound,
        terms_used: mu.terms_used,
    })
}

/// `mu_k`, `sigma_k^2` and their prefix sums on the sites `start..end`.
///
/// Immutable once built, so it can be shared freely between workers.
#[derive(Debug, Clone)]
pub struct SiteProfile {
    start: i64,
    mu: Vec<f64>,
    sigma2: Vec<f64>,
    mu_bound: Vec<f64>,
    mu_prefix: Vec<f64>,
    sigma2_prefix: Vec<f64>,
}

fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(0.0);
    for &v in values {
        acc.add(v);
        out.push(acc.value());
    }
    out
}

impl SiteProfile {
    pub fn build(window: &EnvironmentWindow, start: i64, end: i64, tol: f64) -> Result<Self> {
        if end <= start {
            return Err(RwreError::invalid_arg("end", "profile range must be non-empty"));
        }
        if end - 1 > window.hi {
            return Err(RwreError::IndexOutOfWindow {
                index: end - 1,
                lo: window.lo,
                hi: window.hi,
            });
        }
        let len = (end - start) as usize;
        let first_mu = mu_site(window, start, tol)?;
        let first_s2 = sigma2_site(window, start, tol)?;
        let mut mu = Vec::with_capacity(len);
        let mut sigma2 = Vec::with_capacity(len);
        let mut mu_bound = Vec::with_capacity(len);
        mu.push(first_mu.value);
        sigma2.push(first_s2.value);
        mu_bound.push(first_mu.trunc_bound);
        for k in (start + 1)..end {
            let a = window.odds_at(k);
            let inv_p = 1.0 / window.p_at(k);
            let m_prev = *mu.last().unwrap();
            let s_prev = *sigma2.last().unwrap();
            let m = a * m_prev + inv_p;
            mu.push(m);
            sigma2.push(a * (s_prev + (m_prev + 1.0).powi(2) * inv_p));
            let b_prev = *mu_bound.last().unwrap();
            mu_bound.push(a * b_prev + 4.0 * EPS * m);
        }
        let mu_prefix = prefix_sums(&mu);
        let sigma2_prefix = prefix_sums(&sigma2);
        Ok(Self {
            start,
            mu,
            sigma2,
            mu_bound,
            mu_prefix,
            sigma2_prefix,
        })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// One past the last site.
    pub fn end(&self) -> i64 {
        self.start + self.mu.len() as i64
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.start && k < self.end()
    }

    fn idx(&self, k: i64) -> Result<usize> {
        if self.contains(k) {
            Ok((k - self.start) as usize)
        } else {
            Err(RwreError::IndexOutOfWindow {
                index: k,
                lo: self.start,
                hi: self.end() - 1,
            })
        }
    }

    pub fn mu(&self, k: i64) -> Result<f64> {
        Ok(self.mu[self.idx(k)?])
    }

    pub fn sigma2(&self, k: i64) -> Result<f64> {
        Ok(self.sigma2[self.idx(k)?])
    }

    pub fn mu_bound(&self, k: i64) -> Result<f64> {
        Ok(self.mu_bound[self.idx(k)?])
    }

    pub fn mu_values(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma2_values(&self) -> &[f64] {
        &self.sigma2
    }

    /// `sum_{k=a}^{b-1} mu_k` for integer `a <= b`.
    fn mu_sum(&self, a: i64, b: i64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let ia = self.idx(a)?;
        let ib = self.idx(b - 1)? + 1;
        Ok(self.mu_prefix[ib] - self.mu_prefix[ia])
    }

    /// `sum_{k=a}^{b-1} sigma_k^2`.
    pub fn sigma2_sum(&self, a: i64, b: i64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let ia = self.idx(a)?;
        let ib = self.idx(b - 1)? + 1;
        Ok(self.sigma2_prefix[ib] - self.sigma2_prefix[ia])
    }

    /// `H(n) = sum_{k=0}^{floor(n)-1} mu_k`; `H(0) = 0`.
    pub fn centering_h(&self, n: f64) -> Result<f64> {
        if !(n.is_finite() && n >= 0.0) {
            return Err(RwreError::invalid_arg("n", format!("must be >= 0, got {n}")));
        }
        self.mu_sum(0, n.floor() as i64)
    }

    /// `sum_{k=floor(from)}^{floor(to)} (mu_k - mu_ref)` with the signed
    /// convention for inverted ranges.
    pub fn deviation_range_sum(&self, mu_ref: f64, from: f64, to: f64) -> Result<f64> {
        let (a, b) = (from.floor() as i64, to.floor() as i64);
        let (lo, hi, sign) = if b >= a { (a, b, 1.0) } else { (b, a, -1.0) };
        let s = self.mu_sum(lo, hi + 1)? - mu_ref * (hi - lo + 1) as f64;
        Ok(sign * s)
    }

    /// `sum_{k=from}^{to-1} (mu_k - mu_ref)` over integer bounds, `from <= to`.
    pub fn deviation_sum(&self, mu_ref: f64, from: i64, to: i64) -> Result<f64> {
        Ok(self.mu_sum(from, to)? - mu_ref * (to - from) as f64)
    }
}

/// `sum_{k=floor(from)}^{floor(to)} d_k` where `values[i]` holds `d_{offset+i}`.
/// An inverted range gives the negated sum over `floor(to)..=floor(from)`.
pub fn signed_range_sum(values: &[f64], offset: i64, from: f64, to: f64) -> Result<f64> {
    if !(from.is_finite() && to.is_finite()) {
        return Err(RwreError::invalid_arg("from", "range bounds must be finite"));
    }
    let (a, b) = (from.floor() as i64, to.floor() as i64);
    let (lo, hi, sign) = if b >= a { (a, b, 1.0) } else { (b, a, -1.0) };
    let last = offset + values.len() as i64 - 1;
    if lo < offset || hi > last {
        return Err(RwreError::IndexOutOfWindow {
            index: if lo < offset { lo } else { hi },
            lo: offset,
            hi: last,
        });
    }
    let s: CompensatedSum = values[(lo - offset) as usize..=(hi - offset) as usize]
        .iter()
        .copied()
        .collect();
    Ok(sign * s.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteringValues {
    pub t: u64,
    /// Explicit centering `2t/mu - H(t/mu)/mu`.
    pub b: f64,
    /// Implicit centering: `H(b~) <= t < H(b~ + 1)`.
    pub b_tilde: i64,
    pub h_at_b_tilde: f64,
    pub h_at_b_tilde_plus_1: f64,
}

pub fn explicit_centering(profile: &SiteProfile, mu: f64, t: u64) -> Result<f64> {
    let t = t as f64;
    let h = profile.centering_h(t / mu)?;
    Ok(2.0 * t / mu - h / mu)
}

/// Returns `(b~, H(b~), H(b~+1))`. Ties `t = H(m)` resolve to `b~ = m`.
pub fn implicit_centering(profile: &SiteProfile, t: u64) -> Result<(i64, f64, f64)> {
    if profile.start() > 0 {
        return Err(RwreError::InsufficientData(
            "profile must start at or before site 0".into(),
        ));
    }
    let base = (-profile.start()) as usize;
    let h0 = profile.mu_prefix[base];
    let tail = &profile.mu_prefix[base..];
    let t = t as f64;
    // number of n >= 0 with H(n) <= t; H(0) = 0 <= t always
    let count = tail.partition_point(|&p| p - h0 <= t);
    if count >= tail.len() {
        return Err(RwreError::InsufficientData(format!(
            "H is below t = {t} on the whole profile; extend it to the right"
        )));
    }
    let b = count as i64 - 1;
    Ok((b, tail[count - 1] - h0, tail[count] - h0))
}

pub fn centering(profile: &SiteProfile, mu: f64, t: u64) -> Result<CenteringValues> {
    let b = explicit_centering(profile, mu, t)?;
    let (b_tilde, h_lo, h_hi) = implicit_centering(profile, t)?;
    Ok(CenteringValues {
        t,
        b,
        b_tilde,
        h_at_b_tilde: h_lo,
        h_at_b_tilde_plus_1: h_hi,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSeries {
    pub n: Vec<usize>,
    /// `sum_{j<n} (mu_j - mu)`.
    pub script_h: Vec<f64>,
    /// `max_{0<=s<=n-1} |sum_{j<=s} (mu_j - mu)|`.
    pub script_h_star: Vec<f64>,
}

/// Single left-to-right pass over `0..max(n_grid)`.
pub fn fluctuation_series(profile: &SiteProfile, mu: f64, n_grid: &[usize]) -> Result<FluctuationSeries> {
    if n_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(RwreError::invalid_arg("n_grid", "must be sorted"));
    }
    let max_n = n_grid.last().copied().unwrap_or(0);
    if max_n > 0 {
        profile.idx(0)?;
        profile.idx(max_n as i64 - 1)?;
    }
    let mut out = FluctuationSeries {
        n: n_grid.to_vec(),
        script_h: Vec::with_capacity(n_grid.len()),
        script_h_star: Vec::with_capacity(n_grid.len()),
    };
    let mut running = CompensatedSum::new();
    let mut best: f64 = 0.0;
    let mut next = 0;
    let base = (-profile.start()) as usize;
    for s in 0..=max_n {
        while next < n_grid.len() && n_grid[next] == s {
            out.script_h.push(running.value());
            out.script_h_star.push(best);
            next += 1;
        }
        if s == max_n {
            break;
        }
        running.add(profile.mu[base + s] - mu);
        best = best.max(running.value().abs());
    }
    Ok(out)
}

/// Printed and corrected closed forms for the i.i.d. variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormVariance {
    /// `4 (r1 + r2)(1 + r1^2) / ((1 - r1)^2 (1 - r2))`.
    pub squared_r1_form: f64,
    /// `4 (r1 + r2)(1 + r1) / ((1 - r1)^2 (1 - r2))`.
    pub linear_r1_form: f64,
    pub mismatch: bool,
}

impl ClosedFormVariance {
    pub fn from_rates(r1: f64, r2: f64) -> Self {
        let denom = (1.0 - r1).powi(2) * (1.0 - r2);
        let squared_r1_form = 4.0 * (r1 + r2) * (1.0 + r1 * r1) / denom;
        let linear_r1_form = 4.0 * (r1 + r2) * (1.0 + r1) / denom;
        Self {
            squared_r1_form,
            linear_r1_form,
            mismatch: (squared_r1_form - linear_r1_form).abs() > 1e-9 * linear_r1_form.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryBudget {
    /// Number of sites `0..sites` in the ergodic averages.
    pub sites: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SummaryBudget {
    fn default() -> Self {
        Self {
            sites: 200_000,
            seed: 0x5EED,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStatistics {
    pub lambda: Estimate,
    pub r1: Estimate,
    pub r2: Estimate,
    /// `E mu_k`.
    pub mu: Estimate,
    /// Birkhoff average of `mu_k` over the budget window.
    pub mu_ergodic: Estimate,
    /// `E Var(tau_k)` as a Birkhoff average of `sigma_k^2`.
    pub sigma2: Estimate,
    pub sigma_star: f64,
    pub closed_form_variance: Option<ClosedFormVariance>,
}

impl SummaryStatistics {
    pub fn sigma(&self) -> f64 {
        self.sigma2.value.sqrt()
    }

    pub fn sigma_star_squared(&self) -> f64 {
        self.sigma2.value / self.mu.value.powi(3)
    }
}

/// Window realized with enough room on the left for the series seeds.
pub fn realize_with_margin(
    model: &EnvironmentModel,
    lo: i64,
    hi: i64,
    seed: u64,
    tol: f64,
) -> Result<(EnvironmentWindow, SiteProfile)> {
    let mut margin = 2_000i64;
    loop {
        let window = env::realize(model, lo - margin, hi, seed)?;
        match SiteProfile::build(&window, lo, hi + 1, tol) {
            Ok(profile) => return Ok((window, profile)),
            Err(RwreError::WindowTooSmall { .. }) if margin < 1 << 20 => margin *= 4,
            Err(e) => return Err(e),
        }
    }
}

/// `mu_0(w)` for a rotation model, from the series.
fn rotation_mu0(alpha: f64, coeffs: &[f64], w: f64, tol: f64) -> Result<f64> {
    let mut sum = 1.0;
    let mut prod = 1.0;
    for j in 0..MAX_TERMS as i64 {
        let p = env::qp_eval(coeffs, env::rotation_phase(w, alpha, -j));
        prod *= (1.0 - p) / p;
        sum += 2.0 * prod;
        if prod < tol * sum {
            return Ok(sum);
        }
    }
    Err(RwreError::NonSummable {
        site: 0,
        terms: MAX_TERMS,
        ratio: prod.powf(1.0 / MAX_TERMS as f64),
    })
}

pub fn summary(model: &EnvironmentModel, budget: &SummaryBudget) -> Result<SummaryStatistics> {
    if budget.sites < 2 {
        return Err(RwreError::invalid_arg("sites", "need at least two sites"));
    }
    let class = env::classify(model, None)?;
    if class.regime != Regime::TransientRight {
        return Err(RwreError::NotCltEligible {
            reason: format!(
                "lambda = {} is not negative (regime {:?})",
                class.lambda.value, class.regime
            ),
        });
    }
    let r1 = env::r_kappa(model, 1.0)?;
    let r2 = env::r_kappa(model, 2.0)?;
    if r2.value >= 1.0 {
        return Err(RwreError::NotCltEligible {
            reason: format!("r(2) = {} >= 1", r2.value),
        });
    }
    let (_, profile) = realize_with_margin(model, 0, budget.sites as i64 - 1, budget.seed, budget.tol)?;
    let batches = 32;
    let (mu_avg, mu_se) = mean_with_batch_se(profile.mu_values(), batches);
    let (s2_avg, s2_se) = mean_with_batch_se(profile.sigma2_values(), batches);
    let ergodic = |value, std_error| Estimate {
        value,
        std_error,
        method: EstimateMethod::ErgodicAverage,
    };
    let mu_ergodic = ergodic(mu_avg, mu_se);

    let mu = match model {
        EnvironmentModel::QuasiPeriodic { alpha, coeffs, .. } => Estimate {
            value: env::circle_quadrature(|w| rotation_mu0(*alpha, coeffs, w, budget.tol).unwrap_or(f64::NAN))?,
            std_error: 0.0,
            method: EstimateMethod::Quadrature,
        },
        _ => Estimate {
            value: (1.0 + r1.value) / (1.0 - r1.value),
            std_error: 2.0 * r1.std_error / (1.0 - r1.value).powi(2),
            method: r1.method,
        },
    };
    if !mu.value.is_finite() || r1.value >= 1.0 {
        return Err(RwreError::NotCltEligible {
            reason: format!("r(1) = {} >= 1: zero speed, mu is infinite", r1.value),
        });
    }
    let sigma2 = ergodic(s2_avg, s2_se);
    let closed_form_variance = model
        .is_iid()
        .then(|| ClosedFormVariance::from_rates(r1.value, r2.value));
    Ok(SummaryStatistics {
        lambda: class.lambda,
        r1,
        r2,
        mu,
        mu_ergodic,
        sigma2,
        sigma_star: (sigma2.value / mu.value.powi(3)).sqrt(),
        closed_form_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::realize;
    use approx::assert_relative_eq;

    fn constant_window(p: f64) -> EnvironmentWindow {
        realize(&EnvironmentModel::constant(p), -400, 400, 0).unwrap()
    }

    #[test]
    fn mu_constant_closed_forms() {
        let w = constant_window(0.75);
        let v = mu_site(&w, 0, DEFAULT_TOL).unwrap();
        assert_relative_eq!(v.value, 2.0, epsilon = 1e-13);
        assert!(v.trunc_bound >= 0.0 && v.trunc_bound < 1e-12);
        let w = constant_window(0.9);
        assert_relative_eq!(mu_site(&w, 10, DEFAULT_TOL).unwrap().value, 1.25, epsilon = 1e-13);
    }

    #[test]
    fn symmetric_site_is_not_summable() {
        let w = constant_window(0.5);
        assert!(matches!(
            mu_site(&w, 0, DEFAULT_TOL),
            Err(RwreError::NonSummable { .. })
        ));
        assert!(matches!(
            sigma2_site(&w, 0, DEFAULT_TOL),
            Err(RwreError::NonSummable { .. })
        ));
    }

    #[test]
    fn short_window_is_reported() {
        let w = EnvironmentWindow::from_values(0, vec![0.75; 5]).unwrap();
        assert!(matches!(
            mu_site(&w, 4, DEFAULT_TOL),
            Err(RwreError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn sigma2_constant_closed_forms() {
        let w = constant_window(0.75);
        assert_relative_eq!(sigma2_site(&w, 0, DEFAULT_TOL).unwrap().value, 6.0, epsilon = 1e-12);
        let w = constant_window(0.9);
        assert_relative_eq!(
            sigma2_site(&w, 0, DEFAULT_TOL).unwrap().value,
            0.703_125,
            epsilon = 1e-12
        );
    }

    #[test]
    fn centering_h_examples() {
        let w = constant_window(0.75);
        let prof = SiteProfile::build(&w, -10, 200, DEFAULT_TOL).unwrap();
        assert_relative_eq!(prof.centering_h(5.0).unwrap(), 10.0, epsilon = 1e-12);
        assert_eq!(prof.centering_h(0.0).unwrap(), 0.0);
        assert_relative_eq!(prof.centering_h(5.9).unwrap(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn centerings_constant() {
        let w = constant_window(0.75);
        let prof = SiteProfile::build(&w, 0, 300, DEFAULT_TOL).unwrap();
        assert_relative_eq!(explicit_centering(&prof, 2.0, 100).unwrap(), 50.0, epsilon = 1e-10);
        assert_relative_eq!(explicit_centering(&prof, 2.0, 101).unwrap(), 51.0, epsilon = 1e-10);
        assert_eq!(explicit_centering(&prof, 2.0, 0).unwrap(), 0.0);

        let (b, lo, hi) = implicit_centering(&prof, 100).unwrap();
        assert_eq!(b, 50);
        assert_relative_eq!(lo, 100.0, epsilon = 1e-10);
        assert_relative_eq!(hi, 102.0, epsilon = 1e-10);
        assert_eq!(implicit_centering(&prof, 99).unwrap().0, 49);
        assert_eq!(implicit_centering(&prof, 0).unwrap().0, 0);
    }

    #[test]
    fn signed_sums() {
        let d = [1.0, 2.0, 3.0];
        assert_eq!(signed_range_sum(&d, 0, 0.0, 2.0).unwrap(), 6.0);
        assert_eq!(signed_range_sum(&d, 0, 2.0, 0.0).unwrap(), -6.0);
        assert_eq!(signed_range_sum(&d, 0, 1.9, 1.1).unwrap(), 2.0);
        assert!(signed_range_sum(&d, 0, 0.0, 3.0).is_err());
    }

    #[test]
    fn fluctuation_constant_and_single_term() {
        let w = constant_window(0.75);
        let prof = SiteProfile::build(&w, 0, 100, DEFAULT_TOL).unwrap();
        let f = fluctuation_series(&prof, 2.0, &[1, 10, 100]).unwrap();
        assert!(f.script_h.iter().all(|h| h.abs() < 1e-10));
        assert!(f.script_h_star.iter().all(|h| h.abs() < 1e-10));

        let m = EnvironmentModel::iid_discrete(&[(0.8, 0.5), (0.6, 0.5)]);
        let (_, prof) = realize_with_margin(&m, 0, 50, 3, DEFAULT_TOL).unwrap();
        let f = fluctuation_series(&prof, 2.5, &[1]).unwrap();
        assert_relative_eq!(f.script_h_star[0], (prof.mu(0).unwrap() - 2.5).abs(), epsilon = 1e-14);
    }

    #[test]
    fn summary_constant() {
        let s = summary(
            &EnvironmentModel::constant(0.75),
            &SummaryBudget {
                sites: 1000,
                ..Default::default()
            },
        )
        .unwrap();
        assert_relative_eq!(s.mu.value, 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.sigma2.value, 6.0, epsilon = 1e-10);
        assert_relative_eq!(s.sigma_star, 0.75f64.sqrt(), epsilon = 1e-10);
        let cf = s.closed_form_variance.unwrap();
        assert_relative_eq!(cf.squared_r1_form, 5.0, epsilon = 1e-12);
        assert_relative_eq!(cf.linear_r1_form, 6.0, epsilon = 1e-12);
        assert!(cf.mismatch);
    }

    #[test]
    fn summary_two_point_mu() {
        let m = EnvironmentModel::iid_discrete(&[(0.8, 0.5), (0.6, 0.5)]);
        let s = summary(
            &m,
            &SummaryBudget {
                sites: 5000,
                ..Default::default()
            },
        )
        .unwrap();
        assert_relative_eq!(s.mu.value, 2.692_307_692_307_692, epsilon = 1e-12);
        assert!((s.sigma_star.powi(2) - s.sigma_star_squared()).abs() < 1e-12);
    }

    #[test]
    fn summary_rejects_symmetric() {
        let err = summary(&EnvironmentModel::constant(0.5), &SummaryBudget::default()).unwrap_err();
        assert!(matches!(err, RwreError::NotCltEligible { .. }));
    }
}
