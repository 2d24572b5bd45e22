//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::f64::consts::PI;

use modelspace::design::compute_r_squared;
use modelspace::evidence::{WPriorFamily, WPriorSpec};
use modelspace::priors::{log_model_prior, PriorSpec};
use modelspace::{DesignData, ModelKey};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// ---------------------------------------------------------------------------
// Adaptive Gauss–Kronrod (7/15) integration
// ---------------------------------------------------------------------------

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let pair = f(c - h * XGK[k]) + f(c + h * XGK[k]);
        kron += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (k, err) = gk15(f, a, b);
    // For large n the log integrand carries ~1e-12 relative roundoff, so the
    // Kronrod/Gauss gap cannot shrink much below that. It overestimates the
    // Kronrod error, so a 1e-11 relative gap is still very accurate.
    if err <= tol || err <= 1e-11 * k.abs() || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` with `panels` equal initial subintervals, each refined until the
/// Kronrod/Gauss difference is below `abs_tol / panels`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, abs_tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| adapt(f, a + h * i as f64, a + h * (i + 1) as f64, abs_tol / panels as f64, 18))
        .sum()
}

/// Log of the Bayes-factor integrand as a function of `w`.
fn log_kernel(w: f64, r2: f64, size: usize, n: usize, p0: usize) -> f64 {
    let k = (size + p0 + 1) as f64;
    let nf = n as f64;
    0.5 * (n - p0) as f64 * ((nf + k * w).ln() - ((1.0 - r2) * nf + k * w).ln())
        + 0.5 * size as f64 * ((k * w).ln() - (nf + k * w).ln())
}

/// Brute-force `log BF(A, 0)`.
///
/// Intrinsic: `w = sin²(πθ/2)` with `θ` uniform on `(0, 1)`. Zellner–Siow:
/// `w = u²` with `u` half-normal (`Gamma(1/2, b/2)` for `w`), integrated over
/// `u ∈ (0, U)` where the half-normal tail beyond `U` is negligible. The
/// integrand is scaled by its maximum over a dense grid before integrating.
pub fn bf_oracle(r2: f64, size: usize, n: usize, p0: usize, wprior: &WPriorSpec) -> f64 {
    if size == 0 {
        return 0.0;
    }
    let (hi, log_f): (f64, Box<dyn Fn(f64) -> f64>) = match wprior.family {
        WPriorFamily::Intrinsic => (
            1.0,
            Box::new(move |t: f64| {
                let w = (0.5 * PI * t).sin().powi(2);
                if w <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    log_kernel(w, r2, size, n, p0)
                }
            }),
        ),
        WPriorFamily::ZellnerSiow => {
            let beta = 0.5 * wprior.b;
            let upper = (80.0 / beta).sqrt() + 1.0;
            (
                upper,
                Box::new(move |u: f64| {
                    if u <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    let ln_density = (2.0 * (beta / PI).sqrt()).ln() - beta * u * u;
                    log_kernel(u * u, r2, size, n, p0) + ln_density
                }),
            )
        }
    };
    let grid = 200_000;
    let peak = (1..grid)
        .map(|i| log_f(hi * i as f64 / grid as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let f = |x: f64| (log_f(x) - peak).exp();
    let rough = integrate(&f, 0.0, hi, 4000, 1e-6);
    peak + integrate(&f, 0.0, hi, 4000, rough * 1e-15).ln()
}

// ---------------------------------------------------------------------------
// Designs
// ---------------------------------------------------------------------------

/// Gaussian design with a sparse signal, intercept only in `X0`.
pub fn random_design(n: usize, p: usize, seed: u64) -> DesignData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta: Vec<f64> = (0..p).map(|j| if j % 3 == 0 { 0.6 / (1 + j) as f64 } else { 0.0 }).collect();
    let y = DVector::from_fn(n, |i, _| {
        (0..p).map(|j| beta[j] * x[(i, j)]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal)
    });
    DesignData::with_intercept(y, DMatrix::zeros(n, 0), x).unwrap()
}

/// `n = 10, p = 4` design whose evidences order the model tree like the
/// four-covariate illustration: root order (1, 3, 2, 4) and so on.
pub fn figure_one_design() -> DesignData {
    let rows: [[f64; 4]; 10] = [
        [2., 2., -3., 1.],
        [-3., 0., 1., -1.],
        [2., -2., -1., -3.],
        [3., 1., -1., 3.],
        [1., -3., -2., 0.],
        [-3., 0., 3., 2.],
        [2., 2., -3., -1.],
        [-2., -3., 3., -2.],
        [1., -2., 3., 0.],
        [0., -1., 2., 1.],
    ];
    let y = [-2., -3., 4., 4., 5., -5., 2., 1., -4., 4.];
    let x = DMatrix::from_fn(10, 4, |i, j| rows[i][j]);
    DesignData::with_intercept(DVector::from_row_slice(&y), DMatrix::zeros(10, 0), x).unwrap()
}

/// Figure 1's right-panel order, 1-based.
pub fn figure_one_order() -> Vec<Vec<usize>> {
    [
        "", "1", "12", "123", "1234", "124", "14", "143", "13", "3", "32", "324", "34", "2", "24", "4",
    ]
    .iter()
    .map(|s| s.chars().map(|c| c.to_digit(10).unwrap() as usize).collect())
    .collect()
}

// ---------------------------------------------------------------------------
// Total-order oracle
// ---------------------------------------------------------------------------

/// `log Ev` of every subset (bitmask) from direct fits and the oracle BF.
pub fn brute_force_log_ev(design: &DesignData, spec: &PriorSpec, wprior: &WPriorSpec) -> Vec<f64> {
    let p = design.p();
    let lp0 = log_model_prior(spec, p, 0).unwrap();
    (0u32..1 << p)
        .map(|mask| {
            let model = ModelKey::from_indices((0..p).filter(|j| mask >> j & 1 == 1));
            if model.is_empty() {
                return 0.0;
            }
            let r2 = compute_r_squared(design, &model).unwrap();
            let s = model.len();
            bf_oracle(r2, s, design.n(), design.p0(), wprior) + log_model_prior(spec, p, s).unwrap() - lp0
        })
        .collect()
}

/// Greedy insertion sequence of the subset `mask`: repeatedly add the member
/// that maximizes the evidence of the extended prefix (ties to the smaller
/// index). Returns the sequence and the evidence after each insertion.
fn greedy(mask: u32, p: usize, log_ev: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut prefix = 0u32;
    let mut seq = Vec::new();
    let mut evs = Vec::new();
    while prefix != mask {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..p).filter(|j| mask >> j & 1 == 1 && prefix >> j & 1 == 0) {
            let e = log_ev[(prefix | 1 << j) as usize];
            if best.map_or(true, |(_, b)| e > b) {
                best = Some((j, e));
            }
        }
        let (j, e) = best.unwrap();
        prefix |= 1 << j;
        seq.push(j);
        evs.push(e);
    }
    (seq, evs)
}

/// All `2^p` models sorted by the total order, each as its greedy sequence
/// (0-based).
pub fn total_order(p: usize, log_ev: &[f64]) -> Vec<Vec<usize>> {
    let mut items: Vec<(Vec<usize>, Vec<f64>)> = (0u32..1 << p).map(|m| greedy(m, p, log_ev)).collect();
    items.sort_by(|(sa, ea), (sb, eb)| {
        for k in 0..sa.len().min(sb.len()) {
            if sa[k] != sb[k] {
                return eb[k].total_cmp(&ea[k]).then(sa[k].cmp(&sb[k]));
            }
        }
        sa.len().cmp(&sb.len())
    });
    items.into_iter().map(|(s, _)| s).collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

pub fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

pub fn cmp_sets(a: &[usize], b: &[usize]) -> Ordering {
    a.cmp(b)
}
