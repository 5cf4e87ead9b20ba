//! Model selection: information criteria, exhaustive best-subset discovery,
//! pruning of the network path, and regularization sweeps.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::energy::{model_energy, term_energies, ModelSpec, TermKind};
use crate::error::{Error, Result};
use crate::fit::{adam_fit, evaluate, fit_subset, AdamConfig, FitConfig, FitResult, ModeMetrics};
use crate::kinematics::LoadingMode;

/// A fit whose RSS is at most this fraction of Σ obs² counts as exact
/// (RSS = 0). Noiseless data otherwise ranks subsets by round-off.
pub const EXACT_FIT_RSS: f64 = 1e-18;

/// Default relative energy threshold for pruning network terms.
pub const DEFAULT_PRUNE: f64 = 1e-3;

/// Regularization strengths of the default sweep grids.
pub const SWEEP_LEVELS: [f64; 4] = [0.0, 0.01, 0.1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionCriterion {
    Bic,
    Aic,
    Aicc,
    AdjustedR2,
}

impl SelectionCriterion {
    pub const ALL: [SelectionCriterion; 4] = [
        SelectionCriterion::Bic,
        SelectionCriterion::Aic,
        SelectionCriterion::Aicc,
        SelectionCriterion::AdjustedR2,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SelectionCriterion::Bic => "bic",
            SelectionCriterion::Aic => "aic",
            SelectionCriterion::Aicc => "aicc",
            SelectionCriterion::AdjustedR2 => "adjr2",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == SelectionCriterion::AdjustedR2
    }

    /// Orientation where smaller always wins.
    fn score(self, value: f64) -> f64 {
        if self.higher_is_better() {
            -value
        } else {
            value
        }
    }
}

impl fmt::Display for SelectionCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SelectionCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.tag() == s).ok_or_else(|| {
            Error::Parameter(format!("unknown criterion `{s}` (bic, aic, aicc, adjr2)"))
        })
    }
}

/// Score a fit with `n` points, residual sum of squares `rss`, `m` free
/// parameters, and coefficient of determination `r2` (used by AdjustedR2
/// only). RSS = 0 scores −∞ on the likelihood-based criteria.
pub fn criterion_value(
    criterion: SelectionCriterion,
    n: usize,
    rss: f64,
    m: usize,
    r2: f64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("criterion needs N ≥ 2, got {n}")));
    }
    let (nf, mf) = (n as f64, m as f64);
    let dof = nf - mf - 1.0;
    let needs_dof = matches!(
        criterion,
        SelectionCriterion::Aicc | SelectionCriterion::AdjustedR2
    );
    if needs_dof && dof <= 0.0 {
        return Err(Error::Domain(format!(
            "{criterion} needs N − m − 1 > 0 (N = {n}, m = {m})"
        )));
    }
    if criterion != SelectionCriterion::AdjustedR2 && !(rss >= 0.0) {
        return Err(Error::Domain(format!(
            "RSS must be non-negative, got {rss}"
        )));
    }
    let log_lik = |rss: f64| {
        if rss == 0.0 {
            f64::NEG_INFINITY
        } else {
            nf * (rss / nf).ln()
        }
    };
    Ok(match criterion {
        SelectionCriterion::Bic => log_lik(rss) + nf.ln() * mf,
        SelectionCriterion::Aic => log_lik(rss) + 2.0 * mf,
        SelectionCriterion::Aicc => log_lik(rss) + 2.0 * mf + 2.0 * mf * (mf + 1.0) / dof,
        SelectionCriterion::AdjustedR2 => 1.0 - (1.0 - r2) * (nf - 1.0) / dof,
    })
}

/// One row of the exhaustive ranking table.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetRecord {
    pub kinds: Vec<TermKind>,
    /// The fit, or the reason it failed.
    pub outcome: std::result::Result<FitResult, String>,
    /// `None` when the fit failed or the criterion is undefined for its m.
    pub criterion: Option<f64>,
    /// Whether the fit counts as exact.
    pub exact: bool,
}

impl SubsetRecord {
    pub fn fit(&self) -> Option<&FitResult> {
        self.outcome.as_ref().ok()
    }

    /// MAPE with exact fits pinned to zero.
    fn effective_loss(&self) -> f64 {
        match (&self.outcome, self.exact) {
            (Ok(_), true) => 0.0,
            (Ok(f), false) => f.metrics.mape,
            (Err(_), _) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeBest {
    pub size: usize,
    /// Index into [`DiscoveryResult::table`].
    pub record: usize,
    pub criterion: Option<f64>,
}

/// Share of each term in the strain energy at one training point.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub mode: LoadingMode,
    pub control: f64,
    pub total_energy: f64,
    /// Fractions in catalog order; all zero where the total energy is zero.
    pub fractions: Vec<(TermKind, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryResult {
    pub criterion: Option<SelectionCriterion>,
    pub best: FitResult,
    pub best_criterion: Option<f64>,
    /// Winners of each subset size (regression path only).
    pub per_size: Vec<SizeBest>,
    /// Every fitted subset (regression path only).
    pub table: Vec<SubsetRecord>,
    pub contributions: Vec<Contribution>,
    /// The trained full-catalog model before pruning (network path only).
    pub unpruned: Option<FitResult>,
    pub warnings: Vec<String>,
}

impl DiscoveryResult {
    pub fn best_kinds(&self) -> Vec<TermKind> {
        self.best.model.kinds()
    }
}

fn is_exact(fit: &FitResult) -> bool {
    fit.metrics.rss <= EXACT_FIT_RSS * fit.metrics.sum_sq_obs
}

/// Whether the ranking treats `fit` as reproducing its data exactly.
pub fn is_exact_fit(fit: &FitResult) -> bool {
    is_exact(fit)
}

/// `criterion` on the training metrics of `fit`, scoring exact fits at RSS = 0
/// as the ranking does. `None` when undefined.
pub fn fit_criterion(criterion: SelectionCriterion, fit: &FitResult) -> Option<f64> {
    score_fit(criterion, fit, is_exact(fit))
}

fn score_fit(criterion: SelectionCriterion, fit: &FitResult, exact: bool) -> Option<f64> {
    let (rss, r2) = if exact {
        (0.0, 1.0)
    } else {
        (fit.metrics.rss, fit.metrics.r_squared.unwrap_or(f64::NAN))
    };
    criterion_value(criterion, fit.metrics.n_points, rss, fit.m, r2)
        .ok()
        .filter(|v| !v.is_nan())
}

fn fit_record(
    dataset: &Dataset,
    kinds: Vec<TermKind>,
    criterion: SelectionCriterion,
    config: &FitConfig,
) -> SubsetRecord {
    match fit_subset(dataset, &kinds, config) {
        Ok(fit) => {
            let exact = is_exact(&fit);
            SubsetRecord {
                criterion: score_fit(criterion, &fit, exact),
                kinds,
                outcome: Ok(fit),
                exact,
            }
        }
        Err(e) => SubsetRecord {
            kinds,
            outcome: Err(e.to_string()),
            criterion: None,
            exact: false,
        },
    }
}

/// Per-size key: lower loss, then fewer parameters, then lexicographic kinds.
fn size_key_cmp(a: &SubsetRecord, b: &SubsetRecord) -> Ordering {
    let m = |r: &SubsetRecord| r.fit().map_or(usize::MAX, |f| f.m);
    a.effective_loss()
        .total_cmp(&b.effective_loss())
        .then(m(a).cmp(&m(b)))
        .then(a.kinds.cmp(&b.kinds))
}

/// Global key: better criterion, then fewer terms, then lexicographic kinds.
fn global_key_cmp(criterion: SelectionCriterion, a: &SubsetRecord, b: &SubsetRecord) -> Ordering {
    let s = |r: &SubsetRecord| r.criterion.map_or(f64::INFINITY, |v| criterion.score(v));
    s(a).total_cmp(&s(b))
        .then(a.kinds.len().cmp(&b.kinds.len()))
        .then(a.kinds.cmp(&b.kinds))
}

/// Per-size winners and the global winner among them. Independent of the
/// order of `table`.
pub(crate) fn rank(
    criterion: SelectionCriterion,
    table: &[SubsetRecord],
) -> (Vec<SizeBest>, Option<usize>) {
    let max_size = table.iter().map(|r| r.kinds.len()).max().unwrap_or(0);
    let per_size: Vec<SizeBest> = (1..=max_size)
        .filter_map(|size| {
            table
                .iter()
                .enumerate()
                .filter(|(_, r)| r.kinds.len() == size && r.fit().is_some())
                .min_by(|(_, a), (_, b)| size_key_cmp(a, b))
                .map(|(i, r)| SizeBest {
                    size,
                    record: i,
                    criterion: r.criterion,
                })
        })
        .collect();
    let best = per_size
        .iter()
        .filter(|s| table[s.record].criterion.is_some())
        .min_by(|a, b| global_key_cmp(criterion, &table[a.record], &table[b.record]))
        .map(|s| s.record);
    (per_size, best)
}

/// Fit every non-empty subset of the twelve-term catalog and select with
/// `criterion`.
pub fn best_subset_discover(
    dataset: &Dataset,
    criterion: SelectionCriterion,
    config: &FitConfig,
) -> Result<DiscoveryResult> {
    let catalog: Vec<TermKind> = TermKind::all().collect();
    best_subset_discover_within(dataset, criterion, config, &catalog)
}

/// [`best_subset_discover`] restricted to subsets of `catalog`.
pub fn best_subset_discover_within(
    dataset: &Dataset,
    criterion: SelectionCriterion,
    config: &FitConfig,
    catalog: &[TermKind],
) -> Result<DiscoveryResult> {
    let mut catalog = catalog.to_vec();
    catalog.sort();
    catalog.dedup();
    if catalog.is_empty() {
        return Err(Error::Parameter("empty term catalog".into()));
    }
    let table: Vec<SubsetRecord> = (1u32..1 << catalog.len())
        .into_par_iter()
        .map(|mask| {
            let kinds = catalog
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &k)| k)
                .collect();
            fit_record(dataset, kinds, criterion, config)
        })
        .collect();

    let (per_size, best) = rank(criterion, &table);
    let Some(best) = best else {
        let first_error = table.iter().find_map(|r| r.outcome.as_ref().err()).cloned();
        return Err(Error::Discovery(match first_error {
            Some(e) if table.iter().all(|r| r.fit().is_none()) => {
                format!("every subset fit failed; first: {e}")
            }
            _ => format!("no subset admits the {criterion} criterion"),
        }));
    };
    let failed = table.iter().filter(|r| r.fit().is_none()).count();
    let mut warnings = Vec::new();
    if failed > 0 {
        warnings.push(format!("{failed} subset fit(s) failed and were skipped"));
    }
    let record = &table[best];
    let fit = record.fit().expect("ranked records have fits").clone();
    Ok(DiscoveryResult {
        criterion: Some(criterion),
        best_criterion: record.criterion,
        contributions: contributions(&fit.model, dataset)?,
        best: fit,
        per_size,
        table,
        unpruned: None,
        warnings,
    })
}

/// Per-term energy fractions at every point of `dataset`.
pub fn contributions(model: &ModelSpec, dataset: &Dataset) -> Result<Vec<Contribution>> {
    let mut out = Vec::with_capacity(dataset.n_points());
    for s in dataset.series() {
        for &c in &s.controls {
            let st = s.mode.state(c)?;
            let parts = term_energies(model, st.i1, st.i2)?;
            let total: f64 = parts.iter().map(|(_, e)| e).sum();
            let fractions = parts
                .into_iter()
                .map(|(k, e)| (k, if total > 0.0 { e / total } else { 0.0 }))
                .collect();
            out.push(Contribution {
                mode: s.mode,
                control: c,
                total_energy: total,
                fractions,
            });
        }
    }
    Ok(out)
}

/// How trained network terms are discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pruning {
    /// Drop a term whose largest energy over the training points is below
    /// this fraction of the largest total energy.
    Energy(f64),
    /// Drop a term whose outer weight is below this value (kPa).
    Weight(f64),
}

impl Default for Pruning {
    fn default() -> Self {
        Pruning::Energy(DEFAULT_PRUNE)
    }
}

/// Remove terms of `model` according to `pruning`, judged on `dataset`.
pub fn prune(model: &ModelSpec, dataset: &Dataset, pruning: Pruning) -> Result<ModelSpec> {
    let mut pruned = model.clone();
    match pruning {
        Pruning::Weight(threshold) => pruned.retain(|_, p| p.outer >= threshold),
        Pruning::Energy(threshold) => {
            let mut term_max = std::collections::BTreeMap::new();
            let mut total_max = 0.0f64;
            for s in dataset.series() {
                for &c in &s.controls {
                    let st = s.mode.state(c)?;
                    total_max = total_max.max(model_energy(model, st.i1, st.i2)?);
                    for (k, e) in term_energies(model, st.i1, st.i2)? {
                        let slot = term_max.entry(k).or_insert(0.0f64);
                        *slot = slot.max(e);
                    }
                }
            }
            pruned.retain(|k, _| {
                total_max > 0.0 && term_max.get(&k).copied().unwrap_or(0.0) >= threshold * total_max
            });
        }
    }
    Ok(pruned)
}

/// Train the full catalog with projected Adam, prune, and re-evaluate the
/// pruned model without refitting.
pub fn nn_discover(
    dataset: &Dataset,
    adam: &AdamConfig,
    pruning: Pruning,
) -> Result<DiscoveryResult> {
    let trained = adam_fit(dataset, adam)?;
    let model = prune(&trained.model, dataset, pruning)?;
    let mut warnings = Vec::new();
    if model.is_empty() {
        warnings.push("every term was pruned; the discovered model is empty".to_string());
    }
    let metrics = evaluate(&model, dataset)?;
    let best = FitResult {
        m: model.param_count(),
        objective: metrics.mape,
        metrics,
        converged: trained.converged,
        restart: trained.restart,
        iterations: trained.iterations,
        model,
    };
    Ok(DiscoveryResult {
        criterion: None,
        best_criterion: None,
        contributions: contributions(&best.model, dataset)?,
        best,
        per_size: Vec::new(),
        table: Vec::new(),
        unpruned: Some(trained),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularization {
    L1,
    L2,
    ElasticNet,
}

impl Regularization {
    /// `(α₁, α₂)` pairs over [`SWEEP_LEVELS`].
    pub fn default_grid(self) -> Vec<(f64, f64)> {
        SWEEP_LEVELS
            .iter()
            .map(|&a| match self {
                Regularization::L1 => (a, 0.0),
                Regularization::L2 => (0.0, a),
                Regularization::ElasticNet => (a, a),
            })
            .collect()
    }
}

impl FromStr for Regularization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Regularization::L1),
            "l2" => Ok(Regularization::L2),
            "elastic" | "elastic-net" | "en" => Ok(Regularization::ElasticNet),
            _ => Err(Error::Parameter(format!(
                "unknown grid `{s}` (l1, l2, elastic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub surviving: usize,
    pub modes: Vec<ModeMetrics>,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha1: f64,
    pub alpha2: f64,
    pub outcome: std::result::Result<SweepPoint, String>,
}

/// One [`nn_discover`] per `(α₁, α₂)` in `grid`, in grid order.
pub fn hyperparameter_sweep(
    dataset: &Dataset,
    grid: &[(f64, f64)],
    adam: &AdamConfig,
    pruning: Pruning,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Parameter("sweep grid is empty".into()));
    }
    Ok(grid
        .par_iter()
        .map(|&(alpha1, alpha2)| {
            let cfg = AdamConfig {
                alpha1,
                alpha2,
                ..adam.clone()
            };
            let outcome = nn_discover(dataset, &cfg, pruning)
                .map(|d| SweepPoint {
                    surviving: d.best.model.len(),
                    modes: d.best.metrics.modes,
                    model: d.best.model,
                })
                .map_err(|e| e.to_string());
            SweepRow {
                alpha1,
                alpha2,
                outcome,
            }
        })
        .collect())
}
