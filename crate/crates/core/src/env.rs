//! Environment laws and quenched realizations.
//!
//! An [`EnvironmentModel`] describes the law of the sequence of right-jump
//! probabilities `p_k`. [`realize`] turns a model and a seed into a concrete
//! [`EnvironmentWindow`] on an index interval. Site values depend only on
//! `(model, seed, k)`, so windows can be grown in either direction without
//! disturbing sites that were already realized.

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::rng::{self, site_counter, TAG_SITE};
use crate::{Result, RwreError};

/// Largest exponent accepted by [`r_kappa`].
pub const MAX_KAPPA: f64 = 16.0;

/// Monte Carlo sample size for parametric law expectations.
pub const PARAMETRIC_MC_SAMPLES: usize = 200_000;
const PARAMETRIC_MC_SEED: u64 = 0x5E_ED_0F_1A_77;

const QP_VALIDATION_GRID: usize = 8192;
const REJECTION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub p: f64,
    pub weight: f64,
}

/// Named law over `(0, 1)`, restricted to the model's support bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ParametricLaw {
    /// Uniform on `[p_lo, p_hi]`.
    Uniform,
    /// Beta(a, b) conditioned on `[p_lo, p_hi]` (rejection sampling).
    Beta { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvironmentModel {
    Constant {
        p: f64,
    },
    IidDiscrete {
        atoms: Vec<Atom>,
    },
    IidParametric {
        law: ParametricLaw,
        p_lo: f64,
        p_hi: f64,
    },
    /// `p_k = p((omega0 + k alpha) mod 1)` with
    /// `p(w) = coeffs[0] + sum_{m>=1} coeffs[m] cos(2 pi m w)`.
    QuasiPeriodic {
        alpha: f64,
        omega0: f64,
        coeffs: Vec<f64>,
    },
}

fn open_unit(x: f64) -> bool {
    x.is_finite() && x > 0.0 && x < 1.0
}

fn bad(field: impl Into<String>, reason: impl Into<String>) -> RwreError {
    RwreError::InvalidModel {
        field: field.into(),
        reason: reason.into(),
    }
}

impl EnvironmentModel {
    pub fn constant(p: f64) -> Self {
        EnvironmentModel::Constant { p }
    }

    /// Two-or-more point i.i.d. law from `(p, weight)` pairs.
    pub fn iid_discrete(atoms: &[(f64, f64)]) -> Self {
        EnvironmentModel::IidDiscrete {
            atoms: atoms.iter().map(|&(p, weight)| Atom { p, weight }).collect(),
        }
    }

    pub fn quasi_periodic(alpha: f64, omega0: f64, coeffs: Vec<f64>) -> Self {
        EnvironmentModel::QuasiPeriodic { alpha, omega0, coeffs }
    }

    /// Golden-ratio rotation with `p(w) = 0.7 + 0.1 cos(2 pi w)`.
    pub fn golden_quasi_periodic() -> Self {
        Self::quasi_periodic((5f64.sqrt() - 1.0) / 2.0, 0.0, vec![0.7, 0.1])
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EnvironmentModel::Constant { .. } => "constant",
            EnvironmentModel::IidDiscrete { .. } => "iid_discrete",
            EnvironmentModel::IidParametric { .. } => "iid_parametric",
            EnvironmentModel::QuasiPeriodic { .. } => "quasi_periodic",
        }
    }

    /// Stable identifier: kind plus a hash of the parameters.
    pub fn id(&self) -> String {
        let mut words = Vec::new();
        match self {
            EnvironmentModel::Constant { p } => words.push(p.to_bits()),
            EnvironmentModel::IidDiscrete { atoms } => {
                for a in atoms {
                    words.push(a.p.to_bits());
                    words.push(a.weight.to_bits());
                }
            }
            EnvironmentModel::IidParametric { law, p_lo, p_hi } => {
                words.push(p_lo.to_bits());
                words.push(p_hi.to_bits());
                match law {
                    ParametricLaw::Uniform => words.push(0),
                    ParametricLaw::Beta { a, b } => {
                        words.push(1);
                        words.push(a.to_bits());
                        words.push(b.to_bits());
                    }
                }
            }
            EnvironmentModel::QuasiPeriodic { alpha, omega0, coeffs } => {
                words.push(alpha.to_bits());
                words.push(omega0.to_bits());
                words.extend(coeffs.iter().map(|c| c.to_bits()));
            }
        }
        format!("{}-{:016x}", self.kind(), rng::derive(0, &words))
    }

    /// True for laws whose functionals are computed exactly.
    pub fn is_exact(&self) -> bool {
        matches!(
            self,
            EnvironmentModel::Constant { .. } | EnvironmentModel::IidDiscrete { .. }
        )
    }

    pub fn is_iid(&self) -> bool {
        !matches!(self, EnvironmentModel::QuasiPeriodic { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvironmentModel::Constant { p } => {
                if !open_unit(*p) {
                    return Err(bad("p", format!("must lie strictly inside (0, 1), got {p}")));
                }
            }
            EnvironmentModel::IidDiscrete { atoms } => {
                if atoms.is_empty() {
                    return Err(bad("atoms", "at least one atom is required"));
                }
                let mut total = 0.0;
                for (i, a) in atoms.iter().enumerate() {
                    if !open_unit(a.p) {
                        return Err(bad(
                            format!("atoms[{i}].p"),
                            format!("must lie strictly inside (0, 1), got {}", a.p),
                        ));
                    }
                    if !(a.weight.is_finite() && a.weight > 0.0) {
                        return Err(bad(
                            format!("atoms[{i}].weight"),
                            format!("must be positive, got {}", a.weight),
                        ));
                    }
                    total += a.weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(bad("atoms", format!("weights sum to {total}, expected 1")));
                }
            }
            EnvironmentModel::IidParametric { law, p_lo, p_hi } => {
                if !open_unit(*p_lo) {
                    return Err(bad("p_lo", format!("must lie strictly inside (0, 1), got {p_lo}")));
                }
                if !open_unit(*p_hi) {
                    return Err(bad("p_hi", format!("must lie strictly inside (0, 1), got {p_hi}")));
                }
                if p_lo > p_hi {
                    return Err(bad("p_lo", format!("p_lo = {p_lo} exceeds p_hi = {p_hi}")));
                }
                if let ParametricLaw::Beta { a, b } = law {
                    if !(a.is_finite() && *a > 0.0) {
                        return Err(bad("law.a", format!("must be positive, got {a}")));
                    }
                    if !(b.is_finite() && *b > 0.0) {
                        return Err(bad("law.b", format!("must be positive, got {b}")));
                    }
                }
            }
            EnvironmentModel::QuasiPeriodic { alpha, omega0, coeffs } => {
                if !open_unit(*alpha) {
                    return Err(bad("alpha", format!("must lie strictly inside (0, 1), got {alpha}")));
                }
                if !(omega0.is_finite() && *omega0 >= 0.0 && *omega0 < 1.0) {
                    return Err(bad("omega0", format!("must lie in [0, 1), got {omega0}")));
                }
                if coeffs.is_empty() {
                    return Err(bad("coeffs", "at least the constant coefficient is required"));
                }
                if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
                    return Err(bad(format!("coeffs[{i}]"), "must be finite"));
                }
                let (lo, hi) = qp_range(coeffs, QP_VALIDATION_GRID);
                if !(lo > 0.0 && hi < 1.0) {
                    return Err(bad(
                        "coeffs",
                        format!("p(w) ranges over [{lo}, {hi}] which leaves (0, 1)"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Smallest and largest realizable `p`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            EnvironmentModel::Constant { p } => (*p, *p),
            EnvironmentModel::IidDiscrete { atoms } => {
                atoms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
                    (lo.min(a.p), hi.max(a.p))
                })
            }
            EnvironmentModel::IidParametric { p_lo, p_hi, .. } => (*p_lo, *p_hi),
            EnvironmentModel::QuasiPeriodic { coeffs, .. } => qp_range(coeffs, QP_VALIDATION_GRID),
        }
    }

    /// `p_k` for the given seed. Pure in `(self, seed, k)`.
    pub fn site(&self, seed: u64, k: i64) -> Result<f64> {
        match self {
            EnvironmentModel::Constant { p } => Ok(*p),
            EnvironmentModel::IidDiscrete { atoms } => {
                let u = rng::unit_f64(rng::derive(seed, &[TAG_SITE, site_counter(k)]));
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return Ok(a.p);
                    }
                }
                Ok(atoms[atoms.len() - 1].p)
            }
            EnvironmentModel::IidParametric { law, p_lo, p_hi } => {
                let mut r = rng::stream(seed, &[TAG_SITE, site_counter(k)]);
                match law {
                    ParametricLaw::Uniform => Ok(p_lo + rng::uniform(&mut r) * (p_hi - p_lo)),
                    ParametricLaw::Beta { a, b } => {
                        let beta = Beta::new(*a, *b).map_err(|e| bad("law", e.to_string()))?;
                        for _ in 0..REJECTION_ATTEMPTS {
                            let x: f64 = beta.sample(&mut r);
                            if x >= *p_lo && x <= *p_hi {
                                return Ok(x);
                            }
                        }
                        Err(bad("p_lo", "support bounds carry negligible mass under the named law"))
                    }
                }
            }
            EnvironmentModel::QuasiPeriodic { alpha, omega0, coeffs } => {
                Ok(qp_eval(coeffs, rotation_phase(*omega0, *alpha, k)))
            }
        }
    }
}

/// `(omega0 + k alpha) mod 1`.
pub fn rotation_phase(omega0: f64, alpha: f64, k: i64) -> f64 {
    let ka = (k as f64 * alpha).rem_euclid(1.0);
    let w = (omega0 + ka).rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

pub(crate) fn qp_eval(coeffs: &[f64], w: f64) -> f64 {
    let two_pi_w = 2.0 * std::f64::consts::PI * w;
    coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| if m == 0 { *c } else { c * (m as f64 * two_pi_w).cos() })
        .sum()
}

fn qp_range(coeffs: &[f64], grid: usize) -> (f64, f64) {
    (0..grid)
        .map(|i| qp_eval(coeffs, i as f64 / grid as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)))
}

/// A realized quenched environment `p_lo..=p_hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentWindow {
    pub lo: i64,
    pub hi: i64,
    pub p: Vec<f64>,
    pub model_id: String,
    pub seed: u64,
}

impl EnvironmentWindow {
    /// Window from explicit site values starting at `lo`; mostly for tests.
    pub fn from_values(lo: i64, p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(RwreError::invalid_arg("p", "window needs at least one site"));
        }
        if let Some(i) = p.iter().position(|&x| !open_unit(x)) {
            return Err(bad(format!("p[{i}]"), format!("must lie in (0, 1), got {}", p[i])));
        }
        Ok(Self {
            lo,
            hi: lo + p.len() as i64 - 1,
            p,
            model_id: "explicit".into(),
            seed: 0,
        })
    }

    #[inline]
    pub fn contains(&self, k: i64) -> bool {
        k >= self.lo && k <= self.hi
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    fn out_of_window(&self, k: i64) -> RwreError {
        RwreError::IndexOutOfWindow {
            index: k,
            lo: self.lo,
            hi: self.hi,
        }
    }

    pub fn p(&self, k: i64) -> Result<f64> {
        if self.contains(k) {
            Ok(self.p[(k - self.lo) as usize])
        } else {
            Err(self.out_of_window(k))
        }
    }

    /// Caller guarantees `contains(k)`.
    #[inline]
    pub(crate) fn p_at(&self, k: i64) -> f64 {
        self.p[(k - self.lo) as usize]
    }

    /// `A_k = q_k / p_k`.
    pub fn odds_ratio(&self, k: i64) -> Result<f64> {
        let p = self.p(k)?;
        Ok((1.0 - p) / p)
    }

    #[inline]
    pub(crate) fn odds_at(&self, k: i64) -> f64 {
        let p = self.p_at(k);
        (1.0 - p) / p
    }

    /// Replace one site; used for "modified neighbour" oracle experiments.
    pub fn with_site(mut self, k: i64, p: f64) -> Result<Self> {
        if !open_unit(p) {
            return Err(bad("p", format!("must lie in (0, 1), got {p}")));
        }
        if !self.contains(k) {
            return Err(self.out_of_window(k));
        }
        self.p[(k - self.lo) as usize] = p;
        self.model_id = format!("{}+modified", self.model_id);
        Ok(self)
    }
}

/// Realize the quenched environment on `lo..=hi`.
pub fn realize(model: &EnvironmentModel, lo: i64, hi: i64, seed: u64) -> Result<EnvironmentWindow> {
    model.validate()?;
    if lo > hi {
        return Err(RwreError::invalid_arg("lo", format!("lo = {lo} exceeds hi = {hi}")));
    }
    let p = (lo..=hi).map(|k| model.site(seed, k)).collect::<Result<Vec<_>>>()?;
    Ok(EnvironmentWindow {
        lo,
        hi,
        p,
        model_id: model.id(),
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    ErgodicAverage,
    FiniteN,
}

/// A value with its standard error (zero for exact methods).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub method: EstimateMethod,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            method: EstimateMethod::ClosedForm,
        }
    }

    pub fn is_estimated(&self) -> bool {
        matches!(
            self.method,
            EstimateMethod::MonteCarlo | EstimateMethod::ErgodicAverage | EstimateMethod::FiniteN
        )
    }
}

/// Periodic trapezoid rule with doubling until the change is below 1e-13.
pub(crate) fn circle_quadrature(f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut n = 256usize;
    let mut prev = (0..n).map(|i| f(i as f64 / n as f64)).sum::<f64>() / n as f64;
    let mut last_change = f64::INFINITY;
    while n < (1 << 22) {
        // reuse previous nodes, add midpoints
        let mid = (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        let next = 0.5 * (prev + mid);
        last_change = (next - prev).abs();
        n *= 2;
        prev = next;
        if last_change < 1e-13 * next.abs().max(1.0) {
            return Ok(prev);
        }
    }
    Err(RwreError::QuadratureNonConvergence { last_change })
}

/// Expectation over the law of `p`: exact sums for finite laws, quadrature
/// over the circle for rotations, Monte Carlo for parametric laws.
fn law_expectation(model: &EnvironmentModel, f: impl Fn(f64) -> f64 + Sync) -> Result<Estimate> {
    match model {
        EnvironmentModel::Constant { p } => Ok(Estimate::exact(f(*p))),
        EnvironmentModel::IidDiscrete { atoms } => Ok(Estimate::exact(atoms.iter().map(|a| a.weight * f(a.p)).sum())),
        EnvironmentModel::QuasiPeriodic { coeffs, .. } => Ok(Estimate {
            value: circle_quadrature(|w| f(qp_eval(coeffs, w)))?,
            std_error: 0.0,
            method: EstimateMethod::Quadrature,
        }),
        EnvironmentModel::IidParametric { .. } => {
            let draws = parametric_draws(model)?;
            let vals: Vec<f64> = draws.iter().map(|&p| f(p)).collect();
            Ok(mc_estimate(&vals))
        }
    }
}

fn parametric_draws(model: &EnvironmentModel) -> Result<Vec<f64>> {
    (0..PARAMETRIC_MC_SAMPLES as i64)
        .map(|k| model.site(PARAMETRIC_MC_SEED, k))
        .collect()
}

fn mc_estimate(vals: &[f64]) -> Estimate {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        value: mean,
        std_error: (var / n).sqrt(),
        method: EstimateMethod::MonteCarlo,
    }
}

fn ln_odds(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// `lambda = E ln A`.
pub fn lambda(model: &EnvironmentModel) -> Result<Estimate> {
    model.validate()?;
    law_expectation(model, ln_odds)
}

/// `r(kappa)`: `E A^kappa` for i.i.d. laws, `exp(kappa lambda)` for rotations.
pub fn r_kappa(model: &EnvironmentModel, kappa: f64) -> Result<Estimate> {
    model.validate()?;
    if !(kappa.is_finite() && (0.0..=MAX_KAPPA).contains(&kappa)) {
        return Err(RwreError::invalid_arg(
            "kappa",
            format!("must lie in [0, {MAX_KAPPA}], got {kappa}"),
        ));
    }
    if kappa == 0.0 {
        return Ok(Estimate::exact(1.0));
    }
    match model {
        EnvironmentModel::QuasiPeriodic { .. } => {
            let l = lambda(model)?;
            Ok(Estimate {
                value: (kappa * l.value).exp(),
                std_error: 0.0,
                method: EstimateMethod::Quadrature,
            })
        }
        EnvironmentModel::IidParametric { .. } => {
            let draws = parametric_draws(model)?;
            let vals: Vec<f64> = draws.iter().map(|&p| ((1.0 - p) / p).powf(kappa)).collect();
            let est = mc_estimate(&vals);
            let (a, b) = vals.split_at(vals.len() / 2);
            let (ea, eb) = (mc_estimate(a), mc_estimate(b));
            let gap = (ea.value - eb.value).abs();
            let scale = (ea.std_error.powi(2) + eb.std_error.powi(2)).sqrt();
            if !est.value.is_finite() || gap > 8.0 * scale.max(1e-300) {
                return Err(RwreError::MomentDivergence { kappa });
            }
            Ok(est)
        }
        _ => law_expectation(model, |p| ((1.0 - p) / p).powf(kappa)),
    }
}

/// Finite-n estimate `(E prod_{j=1}^n A_j^kappa)^(1/n)` from `samples`
/// independent environments (phases for rotations). Labeled `FiniteN`.
pub fn r_kappa_finite_n(model: &EnvironmentModel, kappa: f64, n: usize, samples: usize, seed: u64) -> Result<Estimate> {
    model.validate()?;
    if n == 0 || samples == 0 {
        return Err(RwreError::invalid_arg("n", "n and samples must be positive"));
    }
    let logs: Vec<f64> = (0..samples)
        .map(|s| -> Result<f64> {
            let mut acc = 0.0;
            match model {
                EnvironmentModel::QuasiPeriodic { alpha, coeffs, .. } => {
                    let w0 = s as f64 / samples as f64;
                    for j in 1..=n as i64 {
                        acc += ln_odds(qp_eval(coeffs, rotation_phase(w0, *alpha, j)));
                    }
                }
                _ => {
                    let env_seed = rng::derive(seed, &[s as u64]);
                    for j in 1..=n as i64 {
                        acc += ln_odds(model.site(env_seed, j)?);
                    }
                }
            }
            Ok(kappa * acc)
        })
        .collect::<Result<_>>()?;
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_exp = logs.iter().map(|l| (l - m).exp()).sum::<f64>() / samples as f64;
    Ok(Estimate {
        value: ((m + mean_exp.ln()) / n as f64).exp(),
        std_error: f64::NAN,
        method: EstimateMethod::FiniteN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    TransientRight,
    TransientLeft,
    Recurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub regime: Regime,
    pub lambda: Estimate,
    pub tolerance: f64,
    /// Set when `|lambda| <= tolerance` decided the regime.
    pub within_tolerance: bool,
}

/// Sign of `lambda` with a tolerance band; `None` uses 1e-9 for exact laws
/// and three standard errors for estimated ones.
pub fn classify(model: &EnvironmentModel, tol: Option<f64>) -> Result<Classification> {
    let l = lambda(model)?;
    let tolerance = tol.unwrap_or(if l.is_estimated() { 3.0 * l.std_error } else { 1e-9 });
    let (regime, within_tolerance) = if l.value.abs() <= tolerance {
        (Regime::Recurrent, true)
    } else if l.value < 0.0 {
        (Regime::TransientRight, false)
    } else {
        (Regime::TransientLeft, false)
    };
    Ok(Classification {
        regime,
        lambda: l,
        tolerance,
        within_tolerance,
    })
}

/// Second differences of `ln r(kappa)` on an evenly spaced grid.
pub fn ln_r_second_differences(model: &EnvironmentModel, grid: &[f64]) -> Result<Vec<f64>> {
    let ln_r = grid
        .iter()
        .map(|&k| r_kappa(model, k).map(|e| e.value.ln()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ln_r.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect())
}

/// Smallest denominator `q <= max_den` with `|q alpha - p| < tol`, if any.
pub fn rational_approximation(alpha: f64, max_den: u64, tol: f64) -> Option<(u64, u64)> {
    (1..=max_den).find_map(|q| {
        let qa = q as f64 * alpha;
        let p = qa.round();
        ((qa - p).abs() < tol).then_some((p as u64, q))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Exact,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub holds: bool,
    pub status: VerdictStatus,
    /// Numeric evidence (the moment or rate the verdict rests on).
    pub evidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub gamma: f64,
    /// Ergodicity of the shift.
    pub c1: ConditionVerdict,
    /// Finite log-moments of `p` and `1 - p`.
    pub c2: ConditionVerdict,
    /// Finite `gamma`-moments of `1/p` and `1/(1-p)`.
    pub c3: ConditionVerdict,
    /// Finite growth rate of `E prod A^gamma`.
    pub c4: ConditionVerdict,
    pub lambda: f64,
    pub r1: f64,
    pub r2: f64,
    pub regime: Regime,
    pub positive_speed: bool,
    pub clt_eligible: bool,
    pub warnings: Vec<String>,
}

pub fn check_conditions(model: &EnvironmentModel, gamma: f64) -> Result<ConditionReport> {
    model.validate()?;
    if !(gamma.is_finite() && gamma > 2.0 && gamma <= MAX_KAPPA) {
        return Err(RwreError::invalid_arg(
            "gamma",
            format!("must lie in (2, {MAX_KAPPA}], got {gamma}"),
        ));
    }
    let status = if model.is_exact() {
        VerdictStatus::Exact
    } else {
        VerdictStatus::Estimated
    };
    let verdict = |value: f64| ConditionVerdict {
        holds: value.is_finite(),
        status,
        evidence: value,
    };
    let mut warnings = Vec::new();

    let c1 = match model {
        EnvironmentModel::QuasiPeriodic { alpha, .. } => {
            let approx = rational_approximation(*alpha, 1000, 1e-9);
            if let Some((p, q)) = approx {
                warnings.push(format!(
                    "alpha = {alpha} is within 1e-9 of {p}/{q}; the rotation is not uniquely ergodic \
                     and ergodic averages need not converge to the circle mean"
                ));
            }
            ConditionVerdict {
                holds: approx.is_none(),
                status: VerdictStatus::Estimated,
                evidence: f64::NAN,
            }
        }
        _ => ConditionVerdict {
            holds: true,
            status,
            evidence: f64::NAN,
        },
    };
    let log_p = law_expectation(model, |p| -p.ln())?.value;
    let log_q = law_expectation(model, |p| -(1.0 - p).ln())?.value;
    let c2 = verdict(log_p.max(log_q));
    let mom_p = law_expectation(model, |p| p.powf(-gamma))?.value;
    let mom_q = law_expectation(model, |p| (1.0 - p).powf(-gamma))?.value;
    let c3 = verdict(mom_p.max(mom_q));
    let c4 = verdict(r_kappa(model, gamma)?.value);

    let class = classify(model, None)?;
    let r1 = r_kappa(model, 1.0)?.value;
    let r2 = r_kappa(model, 2.0)?.value;
    let clt_eligible = class.regime == Regime::TransientRight && r2 < 1.0;
    if class.regime != Regime::TransientRight {
        warnings.push(format!(
            "lambda = {} is not negative; the walk is not transient to the right",
            class.lambda.value
        ));
    }
    if r2 >= 1.0 {
        warnings.push(format!("r(2) = {r2} >= 1; not CLT-eligible"));
    }
    Ok(ConditionReport {
        gamma,
        c1,
        c2,
        c3,
        c4,
        lambda: class.lambda.value,
        r1,
        r2,
        regime: class.regime,
        positive_speed: class.regime == Regime::TransientRight && r1 < 1.0,
        clt_eligible,
        warnings,
    })
}
