//! Deterministic greedy traversal of the model space.
//!
//! Models are scored by their evidence `Ev(M_A)`, the posterior odds of `M_A`
//! against the base model `M_0`. Starting at `M_0`, every node orders the
//! covariates it may still add by the evidence of the extended model
//! (highest first, ties to the smaller index). Its first child adds the best
//! covariate; the k-th child adds the k-th best and may only continue with
//! covariates ranked after it. Without pruning this tree lists each of the
//! `2^p` models exactly once, and the depth-first visit order is a total
//! order on the model space.
//!
//! A pruning rule decides whether a proposed child is entered. A rejection
//! ends the walk through that node's queue: the remaining siblings have lower
//! evidence and share the same path, so control moves back to the parent.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::design::{DesignData, FitState, ModelKey};
use crate::error::{Error, Result};
use crate::evidence::{build_quadrature, log_bf_vs_null, QuadratureRule, WPriorSpec};
use crate::math::{log_add_exp, log_sum_exp};
use crate::priors::{size_distribution, PriorSpec, SizeDistribution};

/// Candidate sets at least this large are scored in parallel.
const PARALLEL_MIN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceRecord {
    pub model: ModelKey,
    pub r2: f64,
    /// `log BF(A, 0)`.
    pub log_bf0: f64,
    /// `log π_p(M_A)`.
    pub log_prior: f64,
    /// `log Ev(M_A) = log BF(A, 0) + log π_p(M_A) - log π_p(M_0)`.
    pub log_ev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "epsilon", rename_all = "snake_case")]
pub enum PruneRule {
    /// Accept when `Ev(c) / (Ev(c) + Ev(parent)) > ε`.
    Local(f64),
    /// Accept when `Ev(c) / (Ev(c) + Ev(best visited)) > ε`.
    Global(f64),
    /// Accept when `Ev(c) / Σ Ev(B)` over the chain from `M_0` to `c` is `> ε`.
    Path(f64),
    /// Accept everything (full enumeration).
    None,
}

impl PruneRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PruneRule::Local(e) | PruneRule::Global(e) | PruneRule::Path(e) => {
                if e > 0.0 && e < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("pruning threshold must lie in (0, 1), got {e}")))
                }
            }
            PruneRule::None => Ok(()),
        }
    }
}

/// Computes and caches evidences for one design, model-space prior and
/// w-prior.
pub struct EvidenceEngine<'a> {
    design: &'a DesignData,
    spec: PriorSpec,
    wprior: WPriorSpec,
    rule: QuadratureRule,
    sizes: SizeDistribution,
    cache: Mutex<HashMap<ModelKey, Option<EvidenceRecord>>>,
    computed: AtomicUsize,
}

impl<'a> EvidenceEngine<'a> {
    /// `quad_order` defaults to the w-prior's own default.
    pub fn new(
        design: &'a DesignData,
        spec: PriorSpec,
        wprior: WPriorSpec,
        quad_order: Option<usize>,
    ) -> Result<Self> {
        let rule = build_quadrature(wprior, quad_order.unwrap_or_else(|| wprior.default_order()))?;
        let sizes = size_distribution(&spec, design.p())?;
        Ok(Self {
            design,
            spec,
            wprior,
            rule,
            sizes,
            cache: Mutex::new(HashMap::new()),
            computed: AtomicUsize::new(0),
        })
    }

    pub fn design(&self) -> &DesignData {
        self.design
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn wprior(&self) -> &WPriorSpec {
        &self.wprior
    }

    /// Number of evidences computed so far (cache hits excluded).
    pub fn computed(&self) -> usize {
        self.computed.load(Ordering::Relaxed)
    }

    /// Evidence record of a model with the given `R²`.
    pub fn record_from_r2(&self, model: ModelKey, r2: f64) -> Result<EvidenceRecord> {
        let d = self.design;
        let log_bf0 = log_bf_vs_null(r2, model.len(), d.n(), d.p0(), &self.wprior, &self.rule)?;
        let log_prior = self.sizes.log_model_prior(model.len());
        let log_ev = if model.is_empty() {
            0.0
        } else {
            log_bf0 + log_prior - self.sizes.log_model_prior(0)
        };
        Ok(EvidenceRecord { model, r2, log_bf0, log_prior, log_ev })
    }

    /// Evidence of `model`, fitted from scratch unless cached.
    pub fn evidence_of(&self, model: &ModelKey) -> Result<EvidenceRecord> {
        if let Some(hit) = self.cached(model) {
            return hit.ok_or_else(|| Error::RankDeficient { column: model.to_string() });
        }
        let result = FitState::direct(self.design, model)
            .and_then(|fit| fit.r_squared())
            .and_then(|r2| self.record_from_r2(model.clone(), r2));
        match result {
            Ok(rec) => {
                self.store(model.clone(), Some(rec.clone()));
                Ok(rec)
            }
            Err(e @ Error::RankDeficient { .. }) => {
                self.store(model.clone(), None);
                Err(e)
            }
            Err(e) => Err(e),
        }
    }

    /// Evidences of `fit.model() ∪ {c}` for every `c` in `candidates`, in the
    /// same order. `None` marks a rank-deficient extension.
    pub fn extensions(&self, fit: &FitState, candidates: &[usize]) -> Result<Vec<Option<EvidenceRecord>>> {
        let one = |&c: &usize| -> Result<Option<EvidenceRecord>> {
            let key = fit.model().with(c);
            if let Some(hit) = self.cached(&key) {
                return Ok(hit);
            }
            let rec = match fit.candidate_r_squared(self.design, c) {
                Ok(r2) => Some(self.record_from_r2(key.clone(), r2)?),
                Err(Error::RankDeficient { .. }) => None,
                Err(e) => return Err(e),
            };
            self.store(key, rec.clone());
            Ok(rec)
        };
        if candidates.len() >= PARALLEL_MIN {
            candidates.par_iter().map(one).collect()
        } else {
            candidates.iter().map(one).collect()
        }
    }

    fn cached(&self, key: &ModelKey) -> Option<Option<EvidenceRecord>> {
        let cache = self.cache.lock().expect("evidence cache poisoned");
        cache.get(key).map(|hit| {
            hit.as_ref().map(|rec| EvidenceRecord { model: key.clone(), ..rec.clone() })
        })
    }

    fn store(&self, key: ModelKey, rec: Option<EvidenceRecord>) {
        self.computed.fetch_add(1, Ordering::Relaxed);
        self.cache.lock().expect("evidence cache poisoned").insert(key, rec);
    }
}

/// Sorts candidates by descending evidence, ties to the smaller index.
/// Candidates without an evidence (rank-deficient extensions) go last, in
/// index order.
pub fn order_candidates(candidates: &[usize], ev: impl Fn(usize) -> Option<f64>) -> Vec<usize> {
    let mut keyed: Vec<(usize, Option<f64>)> = candidates.iter().map(|&c| (c, ev(c))).collect();
    keyed.sort_by(|(ia, ea), (ib, eb)| match (ea, eb) {
        (Some(a), Some(b)) => b.total_cmp(a).then(ia.cmp(ib)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => ia.cmp(ib),
    });
    keyed.into_iter().map(|(c, _)| c).collect()
}

/// Pruning decision for a proposed step, all evidences on the log scale.
///
/// `path_evs` holds the evidences of the chain `M_0, ..., parent`; the
/// candidate's own evidence is added to the path denominator here.
pub fn accept_step(rule: PruneRule, candidate_ev: f64, parent_ev: f64, global_best_ev: f64, path_evs: &[f64]) -> bool {
    match rule {
        PruneRule::None => true,
        PruneRule::Local(eps) => candidate_ev - log_add_exp(candidate_ev, parent_ev) > eps.ln(),
        PruneRule::Global(eps) => candidate_ev - log_add_exp(candidate_ev, global_best_ev) > eps.ln(),
        PruneRule::Path(eps) => {
            let total = log_add_exp(log_sum_exp(path_evs), candidate_ev);
            candidate_ev - total > eps.ln()
        }
    }
}

/// Result of a search: every model whose evidence was computed, with the
/// posterior renormalized over that set.
#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub p: usize,
    /// Considered models in traversal order; visited models appear when
    /// entered, candidates left behind by a rejection right after it.
    pub records: Vec<EvidenceRecord>,
    pub visit_order: Vec<ModelKey>,
    pub log_posterior_renorm: Vec<f64>,
    pub modal: ModelKey,
    pub inclusion_prob: Vec<f64>,
    pub n_to_cover_90: usize,
    pub n_visited: usize,
    pub n_considered: usize,
    pub n_rank_deficient: usize,
    /// The walk stopped at a [`SearchLimits`] bound before the tree was done.
    pub truncated: bool,
}

impl SearchReport {
    pub fn record(&self, model: &ModelKey) -> Option<&EvidenceRecord> {
        self.records.iter().find(|r| &r.model == model)
    }

    pub fn posterior(&self, model: &ModelKey) -> Option<f64> {
        self.records
            .iter()
            .position(|r| &r.model == model)
            .map(|i| self.log_posterior_renorm[i].exp())
    }

    /// Indices into `records`, most probable first (ties keep traversal order).
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.records.len()).collect();
        idx.sort_by(|&a, &b| self.log_posterior_renorm[b].total_cmp(&self.log_posterior_renorm[a]));
        idx
    }
}

/// Posterior quantities derived from a set of considered models.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub log_posterior_renorm: Vec<f64>,
    pub modal: ModelKey,
    pub inclusion_prob: Vec<f64>,
    pub n_to_cover_90: usize,
}

pub fn summarize(records: &[EvidenceRecord], p: usize) -> Summary {
    assert!(!records.is_empty(), "summary needs at least one model");
    let log_evs: Vec<f64> = records.iter().map(|r| r.log_ev).collect();
    let norm = log_sum_exp(&log_evs);
    let log_post: Vec<f64> = log_evs.iter().map(|l| l - norm).collect();

    let modal = records
        .iter()
        .reduce(|best, r| {
            if r.log_ev > best.log_ev || (r.log_ev == best.log_ev && r.model.indices() < best.model.indices()) {
                r
            } else {
                best
            }
        })
        .map(|r| r.model.clone())
        .unwrap_or_default();

    let mut inclusion = vec![0.0; p];
    for (r, lp) in records.iter().zip(&log_post) {
        let w = lp.exp();
        for &j in r.model.indices() {
            inclusion[j] += w;
        }
    }

    let mut posts: Vec<f64> = log_post.iter().map(|l| l.exp()).collect();
    posts.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut n90 = posts.len();
    for (k, w) in posts.iter().enumerate() {
        cum += w;
        if cum >= 0.9 - 1e-12 {
            n90 = k + 1;
            break;
        }
    }
    Summary { log_posterior_renorm: log_post, modal, inclusion_prob: inclusion, n_to_cover_90: n90 }
}

struct Walker<'e, 'a> {
    engine: &'e EvidenceEngine<'a>,
    rule: PruneRule,
    limits: SearchLimits,
    start: Instant,
    truncated: bool,
    records: Vec<EvidenceRecord>,
    visit_order: Vec<ModelKey>,
    path: Vec<f64>,
    best: f64,
    rank_deficient: usize,
}

impl Walker<'_, '_> {
    fn visit(&mut self, fit: FitState, record: EvidenceRecord, remaining: Vec<usize>) -> Result<()> {
        self.visit_order.push(record.model.clone());
        self.best = self.best.max(record.log_ev);
        let parent_ev = record.log_ev;
        self.records.push(record);

        let scored = self.engine.extensions(&fit, &remaining)?;
        let ev: HashMap<usize, Option<f64>> = remaining
            .iter()
            .zip(&scored)
            .map(|(&c, r)| (c, r.as_ref().map(|r| r.log_ev)))
            .collect();
        let mut by_index: HashMap<usize, EvidenceRecord> =
            remaining.iter().zip(scored).filter_map(|(&c, r)| r.map(|r| (c, r))).collect();
        self.rank_deficient += remaining.len() - by_index.len();
        let queue: Vec<usize> = order_candidates(&remaining, |c| ev[&c])
            .into_iter()
            .filter(|c| by_index.contains_key(c))
            .collect();

        self.path.push(parent_ev);
        for (k, &c) in queue.iter().enumerate() {
            if self.truncated || self.out_of_budget() {
                self.truncated = true;
                self.records.extend(queue[k..].iter().map(|c| by_index.remove(c).expect("scored candidate")));
                break;
            }
            let candidate = by_index.remove(&c).expect("scored candidate");
            // the best-visited snapshot and the path are taken at proposal time
            if !accept_step(self.rule, candidate.log_ev, parent_ev, self.best, &self.path) {
                self.records.push(candidate);
                self.records.extend(queue[k + 1..].iter().map(|c| by_index.remove(c).expect("scored candidate")));
                break;
            }
            let child = fit.extend(self.engine.design(), c)?;
            self.visit(child, candidate, queue[k + 1..].to_vec())?;
        }
        self.path.pop();
        Ok(())
    }

    fn out_of_budget(&self) -> bool {
        self.limits.max_visited.is_some_and(|m| self.visit_order.len() >= m)
            || self.limits.time_limit.is_some_and(|t| self.start.elapsed() >= t)
    }
}

/// Optional bounds on a search. A walk that reaches one stops, keeps every
/// evidence computed so far and marks the report as truncated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SearchLimits {
    /// Largest number of visited models.
    pub max_visited: Option<usize>,
    /// Wall-clock budget; a run stopped by it is not reproducible.
    pub time_limit: Option<Duration>,
}

impl SearchLimits {
    pub fn unlimited() -> Self {
        Self::default()
    }
}

/// Runs the search with a fresh evidence engine.
pub fn enumerate(design: &DesignData, spec: PriorSpec, wprior: WPriorSpec, rule: PruneRule) -> Result<SearchReport> {
    let engine = EvidenceEngine::new(design, spec, wprior, None)?;
    enumerate_with(&engine, rule)
}

/// Runs the search, reusing (and filling) the engine's cache.
pub fn enumerate_with(engine: &EvidenceEngine<'_>, rule: PruneRule) -> Result<SearchReport> {
    enumerate_limited(engine, rule, SearchLimits::unlimited())
}

/// [`enumerate_with`] under `limits`.
pub fn enumerate_limited(engine: &EvidenceEngine<'_>, rule: PruneRule, limits: SearchLimits) -> Result<SearchReport> {
    rule.validate()?;
    let design = engine.design();
    let p = design.p();
    let root = engine.evidence_of(&ModelKey::empty())?;
    let mut walker = Walker {
        engine,
        rule,
        limits,
        start: Instant::now(),
        truncated: false,
        records: Vec::new(),
        visit_order: Vec::new(),
        path: Vec::new(),
        best: f64::NEG_INFINITY,
        rank_deficient: 0,
    };
    walker.visit(FitState::begin(design), root, (0..p).collect())?;
    let summary = summarize(&walker.records, p);
    Ok(SearchReport {
        p,
        n_visited: walker.visit_order.len(),
        n_considered: walker.records.len(),
        n_rank_deficient: walker.rank_deficient,
        truncated: walker.truncated,
        records: walker.records,
        visit_order: walker.visit_order,
        log_posterior_renorm: summary.log_posterior_renorm,
        modal: summary.modal,
        inclusion_prob: summary.inclusion_prob,
        n_to_cover_90: summary.n_to_cover_90,
    })
}
