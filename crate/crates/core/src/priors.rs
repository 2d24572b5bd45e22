//! Exchangeable priors on the model space.
//!
//! Every prior here has the form `π_p(M_A) = π_p(|A|) / C(p, |A|)`, so it is
//! fully described by a distribution on model sizes `0..=p`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{lgamma, ln_choose, ln_factorial, log_sum_exp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    Fixed(f64),
    /// `b = p^u`, materialized for the `p` at hand.
    PPower(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorSpec {
    BetaBinomial { a: f64, b_mode: BetaMode },
    Children { rho: f64 },
    Descendant { eta: f64 },
    PoissonLimit { lambda: f64 },
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let params: &[(&str, f64)] = match self {
            PriorSpec::BetaBinomial { a, b_mode: BetaMode::Fixed(b) } => &[("a", *a), ("b", *b)],
            PriorSpec::BetaBinomial { a, b_mode: BetaMode::PPower(u) } => &[("a", *a), ("u", *u)],
            PriorSpec::Children { rho } => &[("rho", *rho)],
            PriorSpec::Descendant { eta } => &[("eta", *eta)],
            PriorSpec::PoissonLimit { lambda } => &[("lambda", *lambda)],
        };
        for (name, v) in params {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("prior parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::BetaBinomial { a, b_mode: BetaMode::Fixed(b) } => write!(f, "BetaBinomial({a},{b})"),
            PriorSpec::BetaBinomial { a, b_mode: BetaMode::PPower(u) } => {
                write!(f, "BetaBinomial({a},p^{u})")
            }
            PriorSpec::Children { rho } => write!(f, "Children(rho={rho})"),
            PriorSpec::Descendant { eta } => write!(f, "Descendant(eta={eta})"),
            PriorSpec::PoissonLimit { lambda } => write!(f, "Poisson(lambda={lambda})"),
        }
    }
}

/// Prior distribution of the model size `|A|` for a fixed `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeDistribution {
    p: usize,
    log_pmf: Vec<f64>,
}

impl SizeDistribution {
    pub fn p(&self) -> usize {
        self.p
    }

    /// `log π_p(s)` for `s = 0..=p`.
    pub fn log_pmf(&self) -> &[f64] {
        &self.log_pmf
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.log_pmf.iter().map(|l| l.exp()).collect()
    }

    /// `log π_p(M_A)` for any model with `|A| = size`.
    pub fn log_model_prior(&self, size: usize) -> f64 {
        self.log_pmf[size] - ln_choose(self.p, size)
    }

    fn normalized(p: usize, mut log_pmf: Vec<f64>) -> Self {
        let total = log_sum_exp(&log_pmf);
        log_pmf.iter_mut().for_each(|l| *l -= total);
        Self { p, log_pmf }
    }
}

fn check_p(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidDims("model-space prior needs p >= 1".into()));
    }
    Ok(())
}

fn truncated_poisson(p: usize, lambda: f64) -> SizeDistribution {
    let ln_lambda = lambda.ln();
    let log_pmf = (0..=p).map(|s| s as f64 * ln_lambda - ln_factorial(s)).collect();
    SizeDistribution::normalized(p, log_pmf)
}

fn beta_binomial(p: usize, a: f64, b: f64) -> SizeDistribution {
    let ln_beta = |x: f64, y: f64| lgamma(x) + lgamma(y) - lgamma(x + y);
    let norm = ln_beta(a, b);
    let pf = p as f64;
    let log_pmf = (0..=p)
        .map(|s| {
            let sf = s as f64;
            ln_choose(p, s) + ln_beta(sf + a, pf - sf + b) - norm
        })
        .collect();
    SizeDistribution::normalized(p, log_pmf)
}

/// Exact finite-`p` descendant prior.
///
/// With `Z_1 = 1`, `N_p(p) = 1`, `N_p(s) = η C(p, s) Z_{p-s}` and
/// `Z_p = Σ_{s≥1} N_p(s)`, the size prior is `π(0) = η / (1 + η)` and
/// `π(s) = N_p(s) / ((1 + η) Z_p)`. The recursion is run on
/// `ξ_m = λ^m Z_m / m!` with `λ = log(1 + 1/η)`, which stays bounded in `m`
/// (the generating function of `Z_m / m!` has its pole at `λ`), so it needs
/// neither logarithms nor rescaling:
/// `ξ_m = c_m + η Σ_{j=1}^{m-1} c_j ξ_{m-j}` with `c_j = λ^j / j!`.
fn descendant(p: usize, eta: f64) -> SizeDistribution {
    let lambda = (1.0 / eta).ln_1p();
    let ln_lambda = lambda.ln();
    let ln_c = |j: usize| j as f64 * ln_lambda - ln_factorial(j);
    // c_j underflows quickly once j passes λ; those terms contribute nothing
    let mut c = vec![0.0];
    for j in 1..=p {
        let l = ln_c(j);
        if l < -745.0 && j as f64 > lambda {
            break;
        }
        c.push(l.exp());
    }
    let mut xi = vec![0.0; p + 1];
    for m in 1..=p {
        let mut acc = 0.0;
        for j in 1..m.min(c.len()) {
            acc += c[j] * xi[m - j];
        }
        xi[m] = c.get(m).copied().unwrap_or(0.0) + eta * acc;
    }
    let ln_xi_p = xi[p].ln();
    let ln_tail = -(1.0 + eta).ln();
    let mut log_pmf = Vec::with_capacity(p + 1);
    log_pmf.push(eta.ln() + ln_tail);
    for s in 1..p {
        log_pmf.push(eta.ln() + ln_tail + ln_c(s) + xi[p - s].ln() - ln_xi_p);
    }
    log_pmf.push(ln_tail + ln_c(p) - ln_xi_p);
    SizeDistribution::normalized(p, log_pmf)
}

pub fn size_distribution(spec: &PriorSpec, p: usize) -> Result<SizeDistribution> {
    spec.validate()?;
    check_p(p)?;
    Ok(match *spec {
        PriorSpec::BetaBinomial { a, b_mode } => {
            let b = match b_mode {
                BetaMode::Fixed(b) => b,
                BetaMode::PPower(u) => (p as f64).powf(u),
            };
            beta_binomial(p, a, b)
        }
        PriorSpec::Children { rho } => truncated_poisson(p, 1.0 / rho),
        PriorSpec::Descendant { eta } => descendant(p, eta),
        PriorSpec::PoissonLimit { lambda } => truncated_poisson(p, lambda),
    })
}

/// `log π_p(M_A)` for a model of size `model_size`.
pub fn log_model_prior(spec: &PriorSpec, p: usize, model_size: usize) -> Result<f64> {
    if model_size > p {
        return Err(Error::InvalidDims(format!("model size {model_size} exceeds p = {p}")));
    }
    Ok(size_distribution(spec, p)?.log_model_prior(model_size))
}

/// `π_p(s) / π_p(s - 1)`.
pub fn size_prior_ratio(spec: &PriorSpec, p: usize, s: usize) -> Result<f64> {
    if s == 0 || s > p {
        return Err(Error::InvalidDims(format!("size ratio needs 1 <= s <= p, got s = {s}, p = {p}")));
    }
    let dist = size_distribution(spec, p)?;
    Ok((dist.log_pmf[s] - dist.log_pmf[s - 1]).exp())
}

/// Rate of the Poisson law the size prior tends to as `p → ∞`.
pub fn poisson_limit_rate(spec: &PriorSpec) -> Result<f64> {
    spec.validate()?;
    match *spec {
        PriorSpec::Children { rho } => Ok(1.0 / rho),
        PriorSpec::Descendant { eta } => Ok((1.0 / eta).ln_1p()),
        PriorSpec::PoissonLimit { lambda } => Ok(lambda),
        PriorSpec::BetaBinomial { .. } => {
            Err(Error::Unsupported("beta-binomial size priors have no Poisson limit".into()))
        }
    }
}

fn model_priors(spec: &PriorSpec, p: usize) -> Result<Vec<f64>> {
    if p > 20 {
        return Err(Error::InvalidDims(format!("condition checks are limited to p <= 20, got {p}")));
    }
    let dist = size_distribution(spec, p)?;
    Ok((0..=p).map(|s| dist.log_model_prior(s).exp()).collect())
}

/// Largest relative residual of the children condition
/// `π(M_A) = ρ Σ_{A' ⊃ A, |A'| = |A|+1} π(M_A')`, taken over model sizes.
///
/// Children priors are checked with their own `ρ`; other families with the
/// `ρ` that makes the condition hold for the empty model.
pub fn check_children_condition(spec: &PriorSpec, p: usize) -> Result<f64> {
    let m = model_priors(spec, p)?;
    let rho = match *spec {
        PriorSpec::Children { rho } => rho,
        _ => m[0] / m[1],
    };
    Ok((0..p)
        .map(|s| {
            let rhs = rho * (p - s) as f64 * m[s + 1];
            ((m[s] - rhs) / m[s]).abs()
        })
        .fold(0.0, f64::max))
}

/// Largest relative residual of the size-level descendant identity
/// `π(s) = η Σ_{l=1}^{p-s} π(s+l) C(s+l, l)`.
///
/// Descendant priors use their own `η`; other families use the `η` that
/// satisfies the identity at `s = p - 1`.
pub fn check_descendant_condition(spec: &PriorSpec, p: usize) -> Result<f64> {
    if p > 20 {
        return Err(Error::InvalidDims(format!("condition checks are limited to p <= 20, got {p}")));
    }
    let pmf = size_distribution(spec, p)?.pmf();
    let eta = match *spec {
        PriorSpec::Descendant { eta } => eta,
        _ => pmf[p - 1] / (p as f64 * pmf[p]),
    };
    Ok((0..p)
        .map(|s| {
            let rhs: f64 = (1..=p - s)
                .map(|l| pmf[s + l] * ln_choose(s + l, l).exp())
                .sum::<f64>()
                * eta;
            ((pmf[s] - rhs) / pmf[s]).abs()
        })
        .fold(0.0, f64::max))
}

/// Largest relative residual of the self-similarity system
/// `π(s) = π(s+l) (s+l)!/s! / Σ_j π(j+l) (j+l)!/j!` for the Poisson(λ) pmf,
/// over `s <= s_max`. The series over `j` stops once its terms fall below
/// `tail_tol` relative to the running sum.
pub fn check_self_similarity(lambda: f64, ell: usize, s_max: usize, tail_tol: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    if ell == 0 {
        // the shift is the identity and the denominator is the total mass
        return Ok(0.0);
    }
    let ln_lambda = lambda.ln();
    let ln_pmf = |s: usize| -lambda + s as f64 * ln_lambda - ln_factorial(s);
    let ln_shifted = |j: usize| ln_pmf(j + ell) + ln_factorial(j + ell) - ln_factorial(j);
    let mut terms = Vec::new();
    for j in 0.. {
        let t = ln_shifted(j);
        terms.push(t);
        if j as f64 > lambda && t - log_sum_exp(&terms) < tail_tol.ln() {
            break;
        }
    }
    let ln_denominator = log_sum_exp(&terms);
    Ok((0..=s_max)
        .map(|s| {
            let rhs = ln_shifted(s) - ln_denominator;
            (rhs - ln_pmf(s)).exp_m1().abs()
        })
        .fold(0.0, f64::max))
}

/// `log(π_p(M_A) / π_p(M_B))` for models of sizes `size_a` and `size_b`.
pub fn log_prior_odds(spec: &PriorSpec, p: usize, size_a: usize, size_b: usize) -> Result<f64> {
    if size_a > p || size_b > p {
        return Err(Error::InvalidDims(format!("model sizes must not exceed p = {p}")));
    }
    let dist = size_distribution(spec, p)?;
    Ok(dist.log_model_prior(size_a) - dist.log_model_prior(size_b))
}
