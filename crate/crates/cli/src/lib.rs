//! `hyperfit` command-line interface.

pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperfit_core::data::{generate_synthetic, load_csv, split_uniaxial_and_shear};
use hyperfit_core::energy::ClassicFamily;
use hyperfit_core::fit::{fit_subset, CATALOG_PARAMS};
use hyperfit_core::select::{
    best_subset_discover, hyperparameter_sweep, nn_discover, Pruning, Regularization, DEFAULT_PRUNE,
};
use hyperfit_core::stress::linspace;
use hyperfit_core::{
    AdamConfig, ClassicModel, Dataset, DiscoveryResult, FitConfig, LoadingMode, ModelSpec,
    SelectionCriterion, SyntheticSpec, TermKind,
};

use report::{entry_for_model, num, write_bundle, Bundle, Entry};

#[derive(Debug, Parser)]
#[command(
    name = "hyperfit",
    version,
    about = "Sparse discovery of hyperelastic models for soft tissue"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset from a known model.
    Gen(GenArgs),
    /// Fit a fixed set of catalog terms.
    Fit(FitArgs),
    /// Discover a sparse model by best-subset selection and/or the network path.
    Discover(DiscoverArgs),
    /// Run the network path over a grid of penalty strengths.
    Sweep(SweepArgs),
    /// Fit the classic models and compare them with the discovered ones.
    CompareClassics(CompareArgs),
    /// Re-render a bundle from a saved model file.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Train {
    Ten,
    Com,
    Shr,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mr,
    Nn,
    Both,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Dataset CSV (`mode,control,stress_kpa`).
    pub dataset: PathBuf,
    /// Loading mode(s) used for training; the others are test data.
    #[arg(long, value_enum, default_value = "all")]
    pub train: Train,
    /// Output directory for the report bundle.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MrArgs {
    /// Random restarts per subset fit.
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct NnArgs {
    /// L1 penalty weight.
    #[arg(long, default_value_t = 0.0)]
    pub alpha1: f64,
    /// L2 penalty weight.
    #[arg(long, default_value_t = 0.0)]
    pub alpha2: f64,
    #[arg(long, default_value_t = 20_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Energy-fraction pruning threshold.
    #[arg(long, default_value_t = DEFAULT_PRUNE, conflicts_with = "prune_weight")]
    pub prune: f64,
    /// Prune on outer weight (kPa) instead of energy fraction.
    #[arg(long)]
    pub prune_weight: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_name = "MU", group = "truth")]
    pub neo_hookean: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["MU", "C2"], group = "truth")]
    pub mooney_rivlin: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["MU", "BETA"], group = "truth")]
    pub demiray: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["MU", "ETA"], group = "truth")]
    pub gent: Option<Vec<f64>>,
    /// Catalog model file (`index,outer,inner` records).
    #[arg(long, value_name = "FILE", group = "truth")]
    pub model: Option<PathBuf>,
    /// Stretch grid `start:stop:count`; λ < 1 is compression, λ ≥ 1 tension.
    #[arg(long, value_name = "GRID")]
    pub uniaxial: Option<Grid>,
    /// Shear grid `start:stop:count`.
    #[arg(long, value_name = "GRID")]
    pub shear: Option<Grid>,
    /// Relative Gaussian noise level.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub mr: MrArgs,
    /// Catalog term indices, e.g. `1,5,9`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub terms: Vec<u8>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "mr")]
    pub method: Method,
    #[arg(long, default_value = "bic")]
    pub criterion: SelectionCriterion,
    #[command(flatten)]
    pub mr: MrArgs,
    #[command(flatten)]
    pub nn: NnArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Preset grid (l1, l2, elastic) over 0, 0.01, 0.1, 1.
    #[arg(long, default_value = "l1", conflicts_with = "points")]
    pub grid: Regularization,
    /// Explicit `alpha1:alpha2` pairs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub points: Vec<Pair>,
    #[command(flatten)]
    pub nn: NnArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "bic")]
    pub criterion: SelectionCriterion,
    #[command(flatten)]
    pub mr: MrArgs,
    #[command(flatten)]
    pub nn: NnArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Saved model file, e.g. `model_mr.csv` from a previous bundle.
    #[arg(long)]
    pub model: PathBuf,
    /// Column label; defaults to the file stem without `model_`.
    #[arg(long)]
    pub label: Option<String>,
}

/// `start:stop:count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected start:stop:count, got `{s}`"));
        };
        let a: f64 = a.parse().map_err(|_| format!("bad start `{a}`"))?;
        let b: f64 = b.parse().map_err(|_| format!("bad stop `{b}`"))?;
        let n: usize = n.parse().map_err(|_| format!("bad count `{n}`"))?;
        if n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(format!("empty or non-finite grid `{s}`"));
        }
        Ok(Grid(linspace(a, b, n)))
    }
}

/// `alpha1:alpha2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair(pub f64, pub f64);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected alpha1:alpha2, got `{s}`"))?;
        let p = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number `{x}`"))
        };
        Ok(Pair(p(a)?, p(b)?))
    }
}

pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Discover(a) => cmd_discover(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::CompareClassics(a) => cmd_compare_classics(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

struct Loaded {
    full: Dataset,
    train: Dataset,
    modes: Vec<LoadingMode>,
}

fn load(common: &Common) -> Result<Loaded> {
    let full = load_csv(&common.dataset)?;
    let train = match common.train {
        Train::All => full.clone(),
        Train::Ten => full.restrict(&[LoadingMode::UniaxialTension])?,
        Train::Com => full.restrict(&[LoadingMode::UniaxialCompression])?,
        Train::Shr => full.restrict(&[LoadingMode::SimpleShear])?,
    };
    let modes = train.modes();
    Ok(Loaded { full, train, modes })
}

fn fit_config(mr: &MrArgs, seed: u64) -> FitConfig {
    FitConfig {
        restarts: mr.restarts,
        seed,
        ..FitConfig::default()
    }
}

fn adam_config(nn: &NnArgs, seed: u64) -> AdamConfig {
    AdamConfig {
        alpha1: nn.alpha1,
        alpha2: nn.alpha2,
        epochs: nn.epochs,
        learning_rate: nn.learning_rate,
        seed,
        ..AdamConfig::default()
    }
}

fn pruning(nn: &NnArgs) -> Pruning {
    match nn.prune_weight {
        Some(w) => Pruning::Weight(w),
        None => Pruning::Energy(nn.prune),
    }
}

fn parse_kinds(indices: &[u8]) -> Result<Vec<TermKind>> {
    let mut kinds = indices
        .iter()
        .map(|&i| TermKind::new(i))
        .collect::<hyperfit_core::Result<Vec<_>>>()?;
    kinds.sort();
    kinds.dedup();
    Ok(kinds)
}

/// Every fitted subset of a best-subset run, in enumeration order.
fn ranking_table(d: &DiscoveryResult) -> String {
    let mut out = String::from("terms,size,m,mape,rss,criterion,exact,status\n");
    for r in &d.table {
        let terms: Vec<String> = r.kinds.iter().map(|k| k.index().to_string()).collect();
        let _ = write!(out, "{},{}", terms.join(" "), r.kinds.len());
        match &r.outcome {
            Ok(f) => {
                let _ = write!(
                    out,
                    ",{},{},{}",
                    f.m,
                    num(f.metrics.mape),
                    num(f.metrics.rss)
                );
            }
            Err(_) => out.push_str(",,,"),
        }
        let crit = r.criterion.map(num).unwrap_or_default();
        let status = match &r.outcome {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("\"{}\"", e.replace('"', "'")),
        };
        let _ = writeln!(out, ",{crit},{},{status}", r.exact);
    }
    out
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let truth = if let Some(mu) = a.neo_hookean {
        ClassicModel::NeoHookean { mu }.to_spec()?
    } else if let Some(v) = &a.mooney_rivlin {
        ClassicModel::MooneyRivlin { mu: v[0], c2: v[1] }.to_spec()?
    } else if let Some(v) = &a.demiray {
        ClassicModel::Demiray {
            mu: v[0],
            beta: v[1],
        }
        .to_spec()?
    } else if let Some(v) = &a.gent {
        ClassicModel::Gent {
            mu: v[0],
            eta: v[1],
        }
        .to_spec()?
    } else if let Some(path) = &a.model {
        read_model(path)?
    } else {
        bail!(
            "no truth model given (--neo-hookean, --mooney-rivlin, --demiray, --gent or --model)"
        );
    };
    let uniaxial = a.uniaxial.as_ref().map(|g| g.0.clone()).unwrap_or_default();
    let shear = a.shear.as_ref().map(|g| g.0.clone()).unwrap_or_default();
    if uniaxial.is_empty() && shear.is_empty() {
        bail!("no grid given (--uniaxial and/or --shear)");
    }
    let spec = SyntheticSpec {
        truth,
        grids: split_uniaxial_and_shear(&uniaxial, &shear),
        noise: a.noise,
        seed: a.seed,
    };
    let dataset = generate_synthetic(&spec)?;
    dataset.save(&a.output)?;
    Ok(())
}

fn read_model(path: &Path) -> Result<ModelSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    ModelSpec::from_records(&text).with_context(|| format!("in {}", path.display()))
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let d = load(&a.common)?;
    let kinds = parse_kinds(&a.terms)?;
    let fit = fit_subset(&d.train, &kinds, &fit_config(&a.mr, a.common.seed))?;
    let bundle = Bundle {
        title: "fixed-subset fit".into(),
        dataset: &d.full,
        train: d.modes,
        entries: vec![Entry {
            label: "fit".into(),
            fit,
            note: None,
        }],
        discovery: None,
        warnings: Vec::new(),
        extra: Vec::new(),
    };
    write_bundle(&bundle, &a.common.out)
}

fn run_mr(
    train: &Dataset,
    criterion: SelectionCriterion,
    mr: &MrArgs,
    seed: u64,
) -> Result<DiscoveryResult> {
    Ok(best_subset_discover(
        train,
        criterion,
        &fit_config(mr, seed),
    )?)
}

fn run_nn(train: &Dataset, nn: &NnArgs, seed: u64) -> Result<DiscoveryResult> {
    Ok(nn_discover(train, &adam_config(nn, seed), pruning(nn))?)
}

fn cmd_discover(a: &DiscoverArgs) -> Result<()> {
    let d = load(&a.common)?;
    let seed = a.common.seed;
    let mr = matches!(a.method, Method::Mr | Method::Both)
        .then(|| run_mr(&d.train, a.criterion, &a.mr, seed))
        .transpose()?;
    let nn = matches!(a.method, Method::Nn | Method::Both)
        .then(|| run_nn(&d.train, &a.nn, seed))
        .transpose()?;

    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    let mut extra = Vec::new();
    if let Some(r) = &mr {
        entries.push(Entry {
            label: "mr".into(),
            fit: r.best.clone(),
            note: None,
        });
        warnings.extend(r.warnings.iter().map(|w| format!("mr: {w}")));
        extra.push(("ranking.csv".to_string(), ranking_table(r)));
    }
    if let Some(r) = &nn {
        entries.push(Entry {
            label: "nn".into(),
            fit: r.best.clone(),
            note: r.unpruned.as_ref().map(|u| {
                format!(
                    "Trained on all {} terms; {} survive pruning (unpruned training MAPE {:.4} %).",
                    TermKind::COUNT,
                    r.best.model.len(),
                    u.metrics.mape
                )
            }),
        });
        warnings.extend(r.warnings.iter().map(|w| format!("nn: {w}")));
    }
    let bundle = Bundle {
        title: "discovery".into(),
        dataset: &d.full,
        train: d.modes,
        entries,
        discovery: mr.as_ref().map(|r| ("mr", r)),
        warnings,
        extra,
    };
    write_bundle(&bundle, &a.common.out)
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let d = load(&a.common)?;
    let grid: Vec<(f64, f64)> = if a.points.is_empty() {
        a.grid.default_grid()
    } else {
        a.points.iter().map(|p| (p.0, p.1)).collect()
    };
    let rows = hyperparameter_sweep(
        &d.train,
        &grid,
        &adam_config(&a.nn, a.common.seed),
        pruning(&a.nn),
    )?;

    let mut table = String::from("alpha1,alpha2,status,surviving,terms");
    for m in d.full.modes() {
        let _ = write!(table, ",mape_{m},R2_{m}");
    }
    table.push('\n');
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let _ = write!(table, "{},{}", num(row.alpha1), num(row.alpha2));
        match &row.outcome {
            Ok(p) => {
                let terms: Vec<String> = p
                    .model
                    .kinds()
                    .iter()
                    .map(|k| k.index().to_string())
                    .collect();
                let _ = write!(table, ",ok,{},{}", p.surviving, terms.join(" "));
                for m in d.full.modes() {
                    let s = d.full.get(m).expect("mode present");
                    let mm = hyperfit_core::fit::evaluate_series(&p.model, s)?;
                    let _ = write!(
                        table,
                        ",{},{}",
                        mm.mape.map(num).unwrap_or_default(),
                        mm.r_squared_floored.map(num).unwrap_or_default()
                    );
                }
                let mut entry = entry_for_model(&format!("sweep{i}"), p.model.clone(), &d.train)?;
                entry.note = Some(format!(
                    "α1 = {}, α2 = {}",
                    num(row.alpha1),
                    num(row.alpha2)
                ));
                entries.push(entry);
            }
            Err(e) => {
                let _ = write!(table, ",\"{}\",,", e.replace('"', "'"));
                for _ in d.full.modes() {
                    table.push_str(",,");
                }
                warnings.push(format!(
                    "α1 = {}, α2 = {}: {e}",
                    num(row.alpha1),
                    num(row.alpha2)
                ));
            }
        }
        table.push('\n');
    }
    if entries.is_empty() {
        bail!("every sweep point failed");
    }
    let bundle = Bundle {
        title: "regularization sweep".into(),
        dataset: &d.full,
        train: d.modes,
        entries,
        discovery: None,
        warnings,
        extra: vec![("sweep.csv".into(), table)],
    };
    write_bundle(&bundle, &a.common.out)
}

fn classic_note(c: &ClassicModel) -> String {
    match *c {
        ClassicModel::NeoHookean { mu } => format!("μ = {mu:.6} kPa"),
        ClassicModel::MooneyRivlin { mu, c2 } => format!("μ = {mu:.6} kPa, C2 = {c2:.6} kPa"),
        ClassicModel::Demiray { mu, beta } => format!("μ = {mu:.6} kPa, β = {beta:.6}"),
        ClassicModel::Gent { mu, eta } => format!("μ = {mu:.6} kPa, η = {eta:.6}"),
    }
}

fn classic_label(f: ClassicFamily) -> &'static str {
    match f {
        ClassicFamily::NeoHookean => "neo-hookean",
        ClassicFamily::MooneyRivlin => "mooney-rivlin",
        ClassicFamily::Demiray => "demiray",
        ClassicFamily::Gent => "gent",
    }
}

fn cmd_compare_classics(a: &CompareArgs) -> Result<()> {
    let d = load(&a.common)?;
    let seed = a.common.seed;
    let cfg = fit_config(&a.mr, seed);
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for family in ClassicFamily::ALL {
        let fit = fit_subset(&d.train, &family.subset(), &cfg)
            .with_context(|| format!("fitting {}", family.name()))?;
        let classic = family.from_spec(&fit.model)?;
        entries.push(Entry {
            label: classic_label(family).into(),
            note: Some(format!("{}: {}", family.name(), classic_note(&classic))),
            fit,
        });
    }
    let mr = run_mr(&d.train, a.criterion, &a.mr, seed)?;
    let nn = run_nn(&d.train, &a.nn, seed)?;
    entries.push(Entry {
        label: "mr".into(),
        fit: mr.best.clone(),
        note: None,
    });
    entries.push(Entry {
        label: "nn".into(),
        fit: nn.best.clone(),
        note: None,
    });
    warnings.extend(mr.warnings.iter().map(|w| format!("mr: {w}")));
    warnings.extend(nn.warnings.iter().map(|w| format!("nn: {w}")));

    let mut table = String::from("model,m,mape");
    for m in d.full.modes() {
        let _ = write!(table, ",R2_{m},R2raw_{m}");
    }
    table.push('\n');
    for e in &entries {
        let _ = write!(table, "{},{},{}", e.label, e.fit.m, num(e.fit.metrics.mape));
        for m in d.full.modes() {
            let s = d.full.get(m).expect("mode present");
            let mm = hyperfit_core::fit::evaluate_series(&e.fit.model, s)?;
            let _ = write!(
                table,
                ",{},{}",
                mm.r_squared_floored.map(num).unwrap_or_default(),
                mm.r_squared.map(num).unwrap_or_default()
            );
        }
        table.push('\n');
    }
    let bundle = Bundle {
        title: "classic models vs discovered".into(),
        dataset: &d.full,
        train: d.modes,
        entries,
        discovery: Some(("mr", &mr)),
        warnings,
        extra: vec![("comparison.csv".into(), table)],
    };
    write_bundle(&bundle, &a.common.out)
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let d = load(&a.common)?;
    let model = read_model(&a.model)?;
    if model.param_count() > CATALOG_PARAMS {
        return Err(anyhow!("model has more than {CATALOG_PARAMS} parameters"));
    }
    let label = a.label.clone().unwrap_or_else(|| {
        let stem = a
            .model
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("model");
        stem.strip_prefix("model_").unwrap_or(stem).to_string()
    });
    let bundle = Bundle {
        title: "saved model".into(),
        dataset: &d.full,
        train: d.modes,
        entries: vec![entry_for_model(&label, model, &d.train)?],
        discovery: None,
        warnings: Vec::new(),
        extra: Vec::new(),
    };
    write_bundle(&bundle, &a.common.out)
}
