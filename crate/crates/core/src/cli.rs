//! Batch command-line front end and report rendering.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::datasets::{augment_correlated, load_csv, simulate, AugmentSpec, DesignKind, SignPattern, SyntheticTruth};
use crate::design::{design_diagnostics, DesignData, DesignDiagnostics, ModelKey};
use crate::error::{Error, Result};
use crate::evidence::WPriorSpec;
use crate::math::ln_factorial;
use crate::priors::{poisson_limit_rate, size_distribution, BetaMode, PriorSpec};
use crate::search::{enumerate_limited, enumerate_with, EvidenceEngine, PruneRule, SearchLimits, SearchReport};

#[derive(Debug, Parser)]
#[command(name = "modelspace", version, about = "Bayesian variable selection with model-space priors and pruned tree search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a model search on a CSV data set.
    Select(SelectArgs),
    /// Tabulate posterior concentration on synthetic data over a grid of n.
    Simulate(SimulateArgs),
    /// Print a size prior next to its Poisson limit.
    PriorTable(PriorTableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorFamilyArg {
    Descendant,
    Children,
    BetaBinomial,
    Poisson,
}

#[derive(Debug, Clone, Args)]
pub struct PriorArgs {
    #[arg(long, value_enum, default_value = "descendant")]
    pub prior: PriorFamilyArg,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Fixed beta-binomial b (ignored when --b-power is given).
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Use b = p^u.
    #[arg(long, value_name = "U")]
    pub b_power: Option<f64>,
    #[arg(long, default_value_t = std::f64::consts::LN_2)]
    pub lambda: f64,
}

impl PriorArgs {
    pub fn spec(&self) -> Result<PriorSpec> {
        let spec = match self.prior {
            PriorFamilyArg::Descendant => PriorSpec::Descendant { eta: self.eta },
            PriorFamilyArg::Children => PriorSpec::Children { rho: self.rho },
            PriorFamilyArg::Poisson => PriorSpec::PoissonLimit { lambda: self.lambda },
            PriorFamilyArg::BetaBinomial => PriorSpec::BetaBinomial {
                a: self.a,
                b_mode: match self.b_power {
                    Some(u) => BetaMode::PPower(u),
                    None => BetaMode::Fixed(self.b),
                },
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Local,
    Global,
    Path,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WPriorArg {
    Intrinsic,
    ZellnerSiow,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long, value_enum, default_value = "path")]
    pub rule: RuleArg,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long = "w-prior", value_enum, default_value = "intrinsic")]
    pub w_prior: WPriorArg,
    /// Zellner–Siow rate.
    #[arg(long = "zs-b", default_value_t = 1.0)]
    pub zs_b: f64,
    #[arg(long)]
    pub quad_order: Option<usize>,
}

impl SearchArgs {
    pub fn rule(&self) -> Result<PruneRule> {
        let rule = match self.rule {
            RuleArg::Local => PruneRule::Local(self.epsilon),
            RuleArg::Global => PruneRule::Global(self.epsilon),
            RuleArg::Path => PruneRule::Path(self.epsilon),
            RuleArg::None => PruneRule::None,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn wprior(&self) -> Result<WPriorSpec> {
        let w = match self.w_prior {
            WPriorArg::Intrinsic => WPriorSpec::intrinsic(),
            WPriorArg::ZellnerSiow => WPriorSpec::zellner_siow(self.zs_b),
        };
        w.validate()?;
        Ok(w)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column.
    #[arg(long, default_value = "y")]
    pub y: String,
    /// Columns forced into every model (besides the intercept).
    #[arg(long, value_delimiter = ',')]
    pub forced: Vec<String>,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Append correlated copies: `BASExCOPIES` (bare flag: 62x6).
    #[arg(long, num_args = 0..=1, default_missing_value = "62x6", value_name = "BASExCOPIES")]
    pub augment: Option<String>,
    /// Alternate the sign of the copies per copy instead of per source column.
    #[arg(long)]
    pub sign_per_copy: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// Stop after this many visited models (the report is marked truncated).
    #[arg(long)]
    pub max_visits: Option<usize>,
    /// Stop after this many seconds of searching; truncated runs stopped by
    /// the clock are not reproducible.
    #[arg(long, value_name = "SECONDS")]
    pub time_limit: Option<f64>,
    /// Covariates (1-based) to list in the text table regardless of their
    /// inclusion probability.
    #[arg(long, value_delimiter = ',')]
    pub show: Vec<usize>,
    /// Structured (JSON) report destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every considered model as JSON lines.
    #[arg(long)]
    pub dump_visited: Option<PathBuf>,
    /// Include wall-clock time in the structured report (breaks byte-identical
    /// reruns).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long = "n", value_delimiter = ',', default_value = "100,500,2000")]
    pub n_grid: Vec<usize>,
    /// p as a fraction of n.
    #[arg(long, default_value_t = 0.25)]
    pub p_ratio: f64,
    /// True covariates (1-based); empty for the null model.
    #[arg(long = "truth", value_delimiter = ',', default_value = "1,2,3")]
    pub truth: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,-2,1", allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Common correlation between covariates.
    #[arg(long, default_value_t = 0.0)]
    pub corr: f64,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PriorTableArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, default_value_t = 10)]
    pub s_max: usize,
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

/// Everything needed to reproduce a selection run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub data: String,
    pub y: String,
    pub forced: Vec<String>,
    pub prior: PriorSpec,
    pub w_prior: WPriorSpec,
    pub rule: PruneRule,
    pub quad_order: usize,
    pub augment: Option<AugmentSpec>,
    pub seed: u64,
    pub top_k: usize,
    pub limits: SearchLimits,
}

impl RunConfig {
    pub fn from_args(args: &SelectArgs) -> Result<Self> {
        let w_prior = args.search.wprior()?;
        let augment = args
            .augment
            .as_deref()
            .map(|s| parse_augment(s, args.seed, args.sign_per_copy))
            .transpose()?;
        Ok(Self {
            data: args.data.display().to_string(),
            y: args.y.clone(),
            forced: args.forced.clone(),
            prior: args.prior.spec()?,
            w_prior,
            rule: args.search.rule()?,
            quad_order: args.search.quad_order.unwrap_or_else(|| w_prior.default_order()),
            augment,
            seed: args.seed,
            top_k: args.top_k,
            limits: SearchLimits {
                max_visited: args.max_visits,
                time_limit: args
                    .time_limit
                    .map(|t| {
                        Duration::try_from_secs_f64(t)
                            .map_err(|_| Error::Config(format!("--time-limit must be a non-negative number, got {t}")))
                    })
                    .transpose()?,
            },
        })
    }
}

fn parse_augment(s: &str, seed: u64, per_copy: bool) -> Result<AugmentSpec> {
    let bad = || Error::Config(format!("--augment expects BASExCOPIES, got {s:?}"));
    let (base, copies) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let mut spec = AugmentSpec::new(
        base.trim().parse().map_err(|_| bad())?,
        copies.trim().parse().map_err(|_| bad())?,
        seed,
    );
    if per_copy {
        spec.sign = SignPattern::PerCopy;
    }
    Ok(spec)
}

#[derive(Debug, Clone, Serialize)]
pub struct CovariateInclusion {
    pub index: usize,
    pub name: String,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedModel {
    pub rank: usize,
    pub covariates: Vec<usize>,
    pub names: Vec<String>,
    pub posterior: f64,
    pub log_evidence: f64,
    pub log_bf_vs_base: f64,
    pub r2: f64,
}

/// Structured outcome of a selection run. Covariate indices are 1-based.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub config: RunConfig,
    pub n: usize,
    pub p0: usize,
    pub p: usize,
    pub prior_label: String,
    pub mode: Vec<usize>,
    pub mode_names: Vec<String>,
    pub p_mode: f64,
    /// Models whose evidence was computed (visited or proposed).
    pub models_considered: usize,
    pub models_visited: usize,
    pub models_to_90_percent: usize,
    pub covariates_above_0_1: usize,
    /// The search stopped at a limit before finishing the tree.
    pub truncated: bool,
    pub inclusion: Vec<CovariateInclusion>,
    pub top_models: Vec<RankedModel>,
    pub diagnostics: DesignDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl ReportDocument {
    pub fn build(config: RunConfig, design: &DesignData, report: &SearchReport) -> Result<Self> {
        let one_based = |m: &ModelKey| m.indices().iter().map(|j| j + 1).collect::<Vec<_>>();
        let names_of = |m: &ModelKey| m.indices().iter().map(|&j| design.names()[j].clone()).collect();
        let inclusion: Vec<CovariateInclusion> = report
            .inclusion_prob
            .iter()
            .enumerate()
            .map(|(j, &probability)| CovariateInclusion {
                index: j + 1,
                name: design.names()[j].clone(),
                probability,
            })
            .collect();
        let top_models = report
            .ranked()
            .into_iter()
            .take(config.top_k)
            .enumerate()
            .map(|(k, i)| {
                let r = &report.records[i];
                RankedModel {
                    rank: k + 1,
                    covariates: one_based(&r.model),
                    names: names_of(&r.model),
                    posterior: report.log_posterior_renorm[i].exp(),
                    log_evidence: r.log_ev,
                    log_bf_vs_base: r.log_bf0,
                    r2: r.r2,
                }
            })
            .collect();
        Ok(Self {
            n: design.n(),
            p0: design.p0(),
            p: design.p(),
            prior_label: config.prior.to_string(),
            mode: one_based(&report.modal),
            mode_names: names_of(&report.modal),
            p_mode: report.posterior(&report.modal).unwrap_or(0.0),
            models_considered: report.n_considered,
            models_visited: report.n_visited,
            models_to_90_percent: report.n_to_cover_90,
            covariates_above_0_1: report.inclusion_prob.iter().filter(|&&q| q > 0.1).count(),
            truncated: report.truncated,
            inclusion,
            top_models,
            diagnostics: design_diagnostics(design),
            wall_clock_seconds: None,
            config,
        })
    }

    /// Text table with one row per summary statistic. `show` lists extra
    /// covariates (1-based) whose inclusion probability is always printed.
    pub fn text_table(&self, show: &[usize]) -> String {
        let mut listed: Vec<usize> = self
            .inclusion
            .iter()
            .filter(|c| c.probability > 0.1)
            .map(|c| c.index)
            .chain(show.iter().copied().filter(|&j| j >= 1 && j <= self.p))
            .collect();
        listed.sort_unstable();
        listed.dedup();

        let mode = if self.mode.is_empty() {
            "(none)".to_string()
        } else {
            self.mode.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(",")
        };
        let mut rows: Vec<(String, String)> = vec![
            ("Prior".into(), self.prior_label.clone()),
            ("Mode".into(), mode),
            ("P(Mode)".into(), format!("{:.3}", self.p_mode)),
            ("# of Models Considered".into(), self.models_considered.to_string()),
            ("# of Models s/t P(Models)>0.9".into(), self.models_to_90_percent.to_string()),
            ("# of covariates with P(γ=1)>0.1".into(), self.covariates_above_0_1.to_string()),
        ];
        if self.truncated {
            rows.push(("Search stopped at limit".into(), format!("after {} visited models", self.models_visited)));
        }
        for j in listed {
            let c = &self.inclusion[j - 1];
            rows.push((format!("P(γ_{j}=1) [{}]", c.name), format!("{:.3}", c.probability)));
        }
        let width = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (label, value) in rows {
            let pad = width - label.chars().count();
            let _ = writeln!(out, "{label}{} | {value}", " ".repeat(pad));
        }
        out
    }
}

/// Loads, optionally augments and searches; returns the report and the
/// search result.
pub fn run_select(config: &RunConfig) -> Result<(ReportDocument, SearchReport)> {
    let mut design = load_csv(&config.data, &config.y, &config.forced)?;
    if let Some(spec) = &config.augment {
        design = augment_correlated(&design, spec)?;
    }
    log::info!("loaded n = {}, p0 = {}, p = {}", design.n(), design.p0(), design.p());
    let engine = EvidenceEngine::new(&design, config.prior, config.w_prior, Some(config.quad_order))?;
    let report = enumerate_limited(&engine, config.rule, config.limits)?;
    if report.truncated {
        log::warn!("search stopped at its limit after {} visited models", report.n_visited);
    }
    log::info!(
        "visited {} models, computed {} evidences",
        report.n_visited,
        engine.computed()
    );
    let doc = ReportDocument::build(config.clone(), &design, &report)?;
    Ok((doc, report))
}

pub fn cmd_select(args: &SelectArgs) -> Result<ReportDocument> {
    let config = RunConfig::from_args(args)?;
    let start = Instant::now();
    let (mut doc, report) = run_select(&config)?;
    if args.timing {
        doc.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    }
    if let Some(path) = &args.out {
        write_json(path, &doc)?;
    }
    if let Some(path) = &args.dump_visited {
        let mut lines = String::new();
        for (r, lp) in report.records.iter().zip(&report.log_posterior_renorm) {
            let covariates: Vec<usize> = r.model.indices().iter().map(|j| j + 1).collect();
            let line = serde_json::json!({
                "covariates": covariates,
                "log_evidence": r.log_ev,
                "log_posterior": lp,
            });
            lines.push_str(&line.to_string());
            lines.push('\n');
        }
        std::fs::write(path, lines).map_err(|e| Error::from(e).in_file(path.display().to_string()))?;
    }
    print!("{}", doc.text_table(&args.show));
    Ok(doc)
}

fn write_json(path: &PathBuf, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path.display().to_string()))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub median_p_true: f64,
    pub modal_is_true: usize,
    /// Median inclusion probability of each true covariate, then the largest
    /// median among the others.
    pub median_inclusion_true: Vec<f64>,
    pub median_max_inclusion_false: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

/// Replication `r` at sample size `n` uses seed `seed + 1_000_003 n + r`.
pub fn consistency_table(args: &SimulateArgs) -> Result<Vec<ConsistencyRow>> {
    let prior = args.prior.spec()?;
    let rule = args.search.rule()?;
    let wprior = args.search.wprior()?;
    if args.truth.contains(&0) || args.truth.len() != args.beta.len() {
        return Err(Error::Config("--truth must be 1-based and match --beta in length".into()));
    }
    let true_model = ModelKey::from_indices(args.truth.iter().map(|j| j - 1));
    // beta follows the order given on the command line; SyntheticTruth wants sorted order
    let mut pairs: Vec<(usize, f64)> = args.truth.iter().map(|j| j - 1).zip(args.beta.iter().copied()).collect();
    pairs.sort_by_key(|&(j, _)| j);
    let truth = SyntheticTruth {
        true_model: true_model.clone(),
        beta0: vec![0.0],
        beta: pairs.iter().map(|&(_, b)| b).collect(),
        tau: args.tau,
    };
    let kind = if args.corr == 0.0 { DesignKind::IidGaussian } else { DesignKind::EquiCorrelated(args.corr) };
    let mut rows = Vec::new();
    for &n in &args.n_grid {
        let p = ((n as f64 * args.p_ratio).round() as usize).max(1);
        let mut p_true = Vec::new();
        let mut modal_hits = 0;
        let mut incl_true = vec![Vec::new(); true_model.len()];
        let mut max_false = Vec::new();
        for r in 0..args.reps {
            let seed = args.seed.wrapping_add(1_000_003 * n as u64).wrapping_add(r as u64);
            let (design, _) = simulate(n, p, &truth, kind, seed)?;
            let engine = EvidenceEngine::new(&design, prior, wprior, args.search.quad_order)?;
            let report = enumerate_with(&engine, rule)?;
            p_true.push(report.posterior(&true_model).unwrap_or(0.0));
            if report.modal == true_model {
                modal_hits += 1;
            }
            for (k, &j) in true_model.indices().iter().enumerate() {
                incl_true[k].push(report.inclusion_prob[j]);
            }
            let other = (0..p)
                .filter(|j| !true_model.contains(*j))
                .map(|j| report.inclusion_prob[j])
                .fold(0.0, f64::max);
            max_false.push(other);
        }
        rows.push(ConsistencyRow {
            n,
            p,
            reps: args.reps,
            median_p_true: median(p_true),
            modal_is_true: modal_hits,
            median_inclusion_true: incl_true.into_iter().map(median).collect(),
            median_max_inclusion_false: median(max_false),
        });
    }
    Ok(rows)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<ConsistencyRow>> {
    let rows = consistency_table(args)?;
    if let Some(path) = &args.out {
        write_json(path, &rows)?;
    }
    println!("{:>6} {:>6} {:>5} {:>12} {:>10} {:>14}", "n", "p", "reps", "med P(M_T)", "mode = T", "med max false");
    for r in &rows {
        println!(
            "{:>6} {:>6} {:>5} {:>12.4} {:>10} {:>14.4}",
            r.n, r.p, r.reps, r.median_p_true, r.modal_is_true, r.median_max_inclusion_false
        );
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// prior-table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PriorTableRow {
    pub s: usize,
    pub pmf: f64,
    /// `π(s) / π(s - 1)`; absent for `s = 0`.
    pub ratio: Option<f64>,
    pub poisson: Option<f64>,
}

pub fn prior_table(args: &PriorTableArgs) -> Result<Vec<PriorTableRow>> {
    let spec = args.prior.spec()?;
    let dist = size_distribution(&spec, args.p)?;
    let lambda = poisson_limit_rate(&spec).ok();
    let pmf = dist.pmf();
    Ok((0..=args.s_max.min(args.p))
        .map(|s| PriorTableRow {
            s,
            pmf: pmf[s],
            ratio: (s > 0).then(|| (dist.log_pmf()[s] - dist.log_pmf()[s - 1]).exp()),
            poisson: lambda.map(|l| (-l + s as f64 * l.ln() - ln_factorial(s)).exp()),
        })
        .collect())
}

pub fn cmd_prior_table(args: &PriorTableArgs) -> Result<Vec<PriorTableRow>> {
    let rows = prior_table(args)?;
    println!("{} with p = {}", args.prior.spec()?, args.p);
    println!("{:>4} {:>14} {:>14} {:>14}", "s", "pi_p(s)", "ratio", "Poisson");
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
    for r in &rows {
        println!("{:>4} {:>14.6e} {:>14} {:>14}", r.s, r.pmf, fmt(r.ratio), fmt(r.poisson));
    }
    Ok(rows)
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Select(args) => cmd_select(&args).map(|_| ()),
        Command::Simulate(args) => cmd_simulate(&args).map(|_| ()),
        Command::PriorTable(args) => cmd_prior_table(&args).map(|_| ()),
    }
}
