//! Bayes factors of `M_A` against the base model under mixtures of g-priors.
//!
//! For a model with `s = |A|` tested covariates, `k = s + p0 + 1` and
//! coefficient of determination `R²`,
//!
//! ```text
//! BF(A, 0) = ∫ ((n + k w) / ((1 - R²) n + k w))^((n - p0) / 2)
//!              · (k w / (n + k w))^(s / 2) π(w) dw
//! ```
//!
//! where `π(w)` is the arcsine density on `(0, 1)` (intrinsic prior) or a
//! `Gamma(1/2, b/2)` density on `(0, ∞)` (Zellner–Siow). All evaluation happens
//! in the log domain.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
const LN_PI: f64 = 1.144_729_885_849_400_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WPriorFamily {
    Intrinsic,
    ZellnerSiow,
}

/// Mixing density of the g-prior scale `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WPriorSpec {
    pub family: WPriorFamily,
    /// Zellner–Siow rate parameter; ignored by the intrinsic prior.
    pub b: f64,
}

impl WPriorSpec {
    pub fn intrinsic() -> Self {
        Self { family: WPriorFamily::Intrinsic, b: 1.0 }
    }

    pub fn zellner_siow(b: f64) -> Self {
        Self { family: WPriorFamily::ZellnerSiow, b }
    }

    /// Default quadrature order for this family.
    pub fn default_order(&self) -> usize {
        match self.family {
            WPriorFamily::Intrinsic => 64,
            WPriorFamily::ZellnerSiow => 96,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == WPriorFamily::ZellnerSiow && !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::Config(format!("Zellner-Siow rate b must be positive, got {}", self.b)));
        }
        Ok(())
    }
}

impl Default for WPriorSpec {
    fn default() -> Self {
        Self::intrinsic()
    }
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Gauss–Legendre nodes and weights on `(0, 1)`; the weights sum to one.
pub fn gauss_legendre_unit(order: usize) -> (Vec<f64>, Vec<f64>) {
    let m = order;
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=m {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = m as f64 * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 1.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = 0.5 * (1.0 - z);
        nodes[m - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// A discretization of `π(w)`: nodes inside the support and probability
/// weights, plus the unit Gauss–Legendre panel template used for Bayes factors.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    wprior: WPriorSpec,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panel_nodes: Vec<f64>,
    panel_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn wprior(&self) -> WPriorSpec {
        self.wprior
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Values of `w` at the nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Prior mass attached to each node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ f(w) π(w) dw` evaluated with the fixed rule.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&w, &p)| p * f(w)).sum()
    }
}

/// Builds the rule for `wprior`.
///
/// Intrinsic: `w = sin²(πθ/2)` carries the arcsine density to the uniform
/// density on `θ ∈ (0, 1)`, so Gauss–Legendre weights in `θ` are used as is.
/// Zellner–Siow: `w = (t / (1 - t))²`, which turns the `w^(-1/2)` singularity
/// into a smooth half-normal density in `t`; that density and the Jacobian are
/// folded into the weights, which are then normalized.
pub fn build_quadrature(wprior: WPriorSpec, order: usize) -> Result<QuadratureRule> {
    wprior.validate()?;
    if order < 8 {
        return Err(Error::Config(format!("quadrature order must be at least 8, got {order}")));
    }
    let (unit_nodes, unit_weights) = gauss_legendre_unit(order);
    let (nodes, mut weights): (Vec<f64>, Vec<f64>) = match wprior.family {
        WPriorFamily::Intrinsic => unit_nodes
            .iter()
            .zip(&unit_weights)
            .map(|(&t, &u)| ((0.5 * PI * t).sin().powi(2), u))
            .unzip(),
        WPriorFamily::ZellnerSiow => {
            let rate = 0.5 * wprior.b;
            unit_nodes
                .iter()
                .zip(&unit_weights)
                .map(|(&t, &u)| {
                    let x = t / (1.0 - t);
                    let density = 2.0 * (rate / PI).sqrt() * (-rate * x * x).exp();
                    (x * x, u * density / ((1.0 - t) * (1.0 - t)))
                })
                .unzip()
        }
    };
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let (panel_nodes, panel_weights) = gauss_legendre_unit((order / 4).max(8));
    Ok(QuadratureRule { wprior, nodes, weights, panel_nodes, panel_weights })
}

// ---------------------------------------------------------------------------
// Bayes factor
// ---------------------------------------------------------------------------

/// Log integrand of the Bayes factor after the substitution `v = logit(w)`
/// (intrinsic) or `v = log(w)` (Zellner–Siow); prior density and Jacobian are
/// included, so the Bayes factor is `∫ exp(h(v)) dv` over the real line.
struct LogIntegrand {
    half_df: f64,
    half_size: f64,
    n: f64,
    k: f64,
    shrunk_n: f64,
    ln_k: f64,
    family: WPriorFamily,
    rate: f64,
    zs_const: f64,
}

impl LogIntegrand {
    fn new(r2: f64, model_size: usize, n: usize, p0: usize, wprior: WPriorSpec) -> Self {
        let k = (model_size + p0 + 1) as f64;
        Self {
            half_df: 0.5 * (n - p0) as f64,
            half_size: 0.5 * model_size as f64,
            n: n as f64,
            k,
            shrunk_n: (1.0 - r2) * n as f64,
            ln_k: k.ln(),
            family: wprior.family,
            rate: 0.5 * wprior.b,
            zs_const: 0.5 * ((0.5 * wprior.b).ln() - LN_PI),
        }
    }

    /// `(log w, log(1 - w), w)` for the intrinsic substitution, sharing one
    /// exponential between the three.
    fn logistic_parts(v: f64) -> (f64, f64, f64) {
        let e = (-v.abs()).exp();
        let l = e.ln_1p();
        if v >= 0.0 {
            (-l, -v - l, 1.0 / (1.0 + e))
        } else {
            (v - l, -l, e / (1.0 + e))
        }
    }

    /// `h(v)`.
    fn h(&self, v: f64) -> f64 {
        let (ln_w, w, prior) = match self.family {
            WPriorFamily::Intrinsic => {
                let (ln_w, ln_1mw, w) = Self::logistic_parts(v);
                (ln_w, w, 0.5 * (ln_w + ln_1mw) - LN_PI)
            }
            WPriorFamily::ZellnerSiow => {
                let w = v.exp();
                (v, w, self.zs_const + 0.5 * v - self.rate * w)
            }
        };
        let ln_full = (self.n + self.k * w).ln();
        let ln_shrunk = (self.shrunk_n + self.k * w).ln();
        self.half_df * (ln_full - ln_shrunk) + self.half_size * (self.ln_k + ln_w - ln_full) + prior
    }

    /// `h'(v)`.
    fn dh(&self, v: f64) -> f64 {
        // dw/dv and (dw/dv) / w written out per family so an underflowed w
        // never appears in a denominator
        let (w, dw, dw_over_w, dprior) = match self.family {
            WPriorFamily::Intrinsic => {
                let (ln_w, ln_1mw, w) = Self::logistic_parts(v);
                (w, (ln_w + ln_1mw).exp(), 1.0 - w, 0.5 - w)
            }
            WPriorFamily::ZellnerSiow => {
                let w = v.exp();
                (w, w, 1.0, 0.5 - self.rate * w)
            }
        };
        let full = self.n + self.k * w;
        let shrunk = self.shrunk_n + self.k * w;
        self.half_df * self.k * dw * (1.0 / full - 1.0 / shrunk)
            + self.half_size * (dw_over_w - self.k * dw / full)
            + dprior
    }

    /// Location and scale of the dominant peak of `h`.
    fn peak(&self) -> (f64, f64) {
        const LO: f64 = -60.0;
        const STEP: f64 = 1.0;
        const STEPS: usize = 120;
        let (mut best, mut best_h) = (0, f64::NEG_INFINITY);
        for i in 0..=STEPS {
            let h = self.h(LO + STEP * i as f64);
            if h > best_h {
                best = i;
                best_h = h;
            }
        }
        let lo = LO + STEP * best.saturating_sub(1) as f64;
        let hi = LO + STEP * (best + 1).min(STEPS) as f64;
        let mode = self.stationary_point(lo, hi).unwrap_or(LO + STEP * best as f64);
        let delta = 1e-5;
        let curvature = (self.dh(mode + delta) - self.dh(mode - delta)) / (2.0 * delta);
        let scale = if curvature < 0.0 { (-curvature).sqrt().recip() } else { 1.0 };
        (mode, scale.clamp(1e-6, 4.0))
    }

    /// Root of `h'` in `[lo, hi]` by the Illinois variant of regula falsi,
    /// or `None` when the interval does not bracket a maximum.
    fn stationary_point(&self, mut lo: f64, mut hi: f64) -> Option<f64> {
        let (mut f_lo, mut f_hi) = (self.dh(lo), self.dh(hi));
        if !(f_lo > 0.0 && f_hi < 0.0) {
            return None;
        }
        let mut side = 0;
        for _ in 0..100 {
            let x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
            if !(x > lo && x < hi) || hi - lo <= 1e-12 * (1.0 + x.abs()) {
                return Some(0.5 * (lo + hi));
            }
            let f = self.dh(x);
            if f == 0.0 {
                return Some(x);
            }
            if f > 0.0 {
                lo = x;
                f_lo = f;
                if side == 1 {
                    f_hi *= 0.5;
                }
                side = 1;
            } else {
                hi = x;
                f_hi = f;
                if side == -1 {
                    f_lo *= 0.5;
                }
                side = -1;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// How far below the peak (in log units) the integration range extends.
const TAIL_DROP: f64 = 50.0;

/// `log BF(A, 0)` for a model with `model_size` tested covariates.
///
/// The integrand is located by its peak in the logit (or log) scale and
/// integrated with composite Gauss–Legendre panels built from the rule's
/// panel template (a quarter of its order, at least eight nodes). Panels
/// start at one peak width and double outwards until the integrand has fallen
/// `e^-50` below its maximum, which keeps the result accurate for very sharp
/// peaks (large `n`, `R²` near one).
pub fn log_bf_vs_null(
    r2: f64,
    model_size: usize,
    n: usize,
    p0: usize,
    wprior: &WPriorSpec,
    rule: &QuadratureRule,
) -> Result<f64> {
    if rule.wprior() != *wprior {
        return Err(Error::Config("quadrature rule was built for a different w-prior".into()));
    }
    if !(0.0..1.0).contains(&r2) {
        return Err(Error::Domain(format!("R² must lie in [0, 1), got {r2}")));
    }
    if n <= p0 + model_size {
        return Err(Error::InvalidDims(format!(
            "need n > p0 + |A|, got n = {n}, p0 = {p0}, |A| = {model_size}"
        )));
    }
    if model_size == 0 {
        return Ok(0.0);
    }
    let integrand = LogIntegrand::new(r2, model_size, n, p0, *wprior);
    let (mode, scale) = integrand.peak();
    let peak_h = integrand.h(mode);

    let mut sum = 0.0;
    for direction in [1.0, -1.0] {
        let (mut inner, mut offset) = (0.0, scale);
        for _ in 0..64 {
            let (a, b) = (mode + direction * inner, mode + direction * offset);
            let width = (b - a).abs();
            let start = a.min(b);
            let mut panel = 0.0;
            for (&t, &u) in rule.panel_nodes.iter().zip(&rule.panel_weights) {
                panel += u * (integrand.h(start + width * t) - peak_h).exp();
            }
            sum += width * panel;
            if integrand.h(b) < peak_h - TAIL_DROP {
                break;
            }
            inner = offset;
            offset *= 2.0;
        }
    }
    Ok(peak_h + sum.ln())
}

/// `log BF(A, B)` from the two Bayes factors against the base model.
pub fn log_bf_pair(log_bf_a: f64, log_bf_b: f64) -> f64 {
    log_bf_a - log_bf_b
}
