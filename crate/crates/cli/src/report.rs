//! Report bundle: parameter table, criteria, contributions, sampled curves,
//! SVG overlays and a Markdown summary, all written into one directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use hyperfit_core::fit::{evaluate_series, Metrics};
use hyperfit_core::select::{contributions, fit_criterion, is_exact_fit};
use hyperfit_core::stress::{linspace, nominal_stress};
use hyperfit_core::{
    Dataset, DiscoveryResult, FitResult, LoadingMode, ModeMetrics, ModelSpec, SelectionCriterion,
    TermKind,
};

use crate::svg::{self, Curve, Plot};

pub const CURVE_SAMPLES: usize = 100;

/// A model shown in the bundle, with its training-set fit.
pub struct Entry {
    pub label: String,
    pub fit: FitResult,
    /// Free-form note shown in the summary, e.g. classic parameters.
    pub note: Option<String>,
}

pub struct Bundle<'a> {
    pub title: String,
    /// Every series in the input file; modes absent from `train` are test data.
    pub dataset: &'a Dataset,
    pub train: Vec<LoadingMode>,
    pub entries: Vec<Entry>,
    /// Best-subset run whose per-size table goes into `criteria.csv`.
    pub discovery: Option<(&'a str, &'a DiscoveryResult)>,
    pub warnings: Vec<String>,
    /// Additional files, written verbatim.
    pub extra: Vec<(String, String)>,
}

/// Per-mode metrics of one model on every series of the dataset.
pub struct Evaluation {
    pub label: String,
    pub modes: Vec<(ModeMetrics, bool)>,
}

/// Shortest round-trip formatting, scientific outside `[1e-4, 1e15)`;
/// locale independent.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn short(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.4}"),
        Some(x) => format!("{x}"),
        None => "n/a".into(),
    }
}

fn terms_label(kinds: &[TermKind]) -> String {
    if kinds.is_empty() {
        return "-".into();
    }
    kinds
        .iter()
        .map(|k| k.index().to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn mode_name(mode: LoadingMode) -> &'static str {
    match mode {
        LoadingMode::UniaxialTension => "tension",
        LoadingMode::UniaxialCompression => "compression",
        LoadingMode::SimpleShear => "shear",
    }
}

pub fn evaluate_all(bundle: &Bundle) -> Result<Vec<Evaluation>> {
    bundle
        .entries
        .iter()
        .map(|e| {
            let modes = bundle
                .dataset
                .series()
                .iter()
                .map(|s| {
                    let m = evaluate_series(&e.fit.model, s)
                        .with_context(|| format!("evaluating {} on {}", e.label, s.mode))?;
                    Ok((m, bundle.train.contains(&s.mode)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Evaluation {
                label: e.label.clone(),
                modes,
            })
        })
        .collect()
}

/// 20 b-slots then floored and raw R² per mode; one column per model.
pub fn params_table(bundle: &Bundle, evals: &[Evaluation]) -> String {
    let mut out = String::from("parameter");
    for e in &bundle.entries {
        out.push(',');
        out.push_str(&e.label);
    }
    out.push('\n');
    let slots: Vec<_> = bundle.entries.iter().map(|e| e.fit.model.slots()).collect();
    for i in 0..20 {
        out.push_str(&format!("b{}", i + 1));
        for s in &slots {
            out.push(',');
            out.push_str(&opt(s[i]));
        }
        out.push('\n');
    }
    for (prefix, floored) in [("R2", true), ("R2raw", false)] {
        for s in bundle.dataset.series() {
            out.push_str(&format!("{prefix}_{}", s.mode));
            for ev in evals {
                let m = ev
                    .modes
                    .iter()
                    .find(|(m, _)| m.mode == s.mode)
                    .map(|(m, _)| m);
                let v = m.and_then(|m| {
                    if floored {
                        m.r_squared_floored
                    } else {
                        m.r_squared
                    }
                });
                out.push(',');
                out.push_str(&opt(v));
            }
            out.push('\n');
        }
    }
    out
}

fn criteria_row(out: &mut String, model: &str, fit: &FitResult, selected: bool) {
    let kinds = fit.model.kinds();
    let _ = write!(
        out,
        "{model},{},{},{},{},{},{},{}",
        kinds.len(),
        terms_label(&kinds),
        fit.m,
        fit.metrics.n_points,
        num(fit.metrics.rss),
        num(fit.metrics.mape),
        is_exact_fit(fit)
    );
    for c in SelectionCriterion::ALL {
        out.push(',');
        out.push_str(&opt(fit_criterion(c, fit)));
    }
    let _ = writeln!(out, ",{selected}");
}

/// Criteria of the per-size winners of a best-subset run, then of every
/// other model in the bundle, all on the training data.
pub fn criteria_table(bundle: &Bundle) -> String {
    let mut out = String::from("model,size,terms,m,n,rss,mape,exact,bic,aic,aicc,adjr2,selected\n");
    if let Some((label, d)) = bundle.discovery {
        for s in &d.per_size {
            if let Some(fit) = d.table[s.record].fit() {
                let selected = fit.model.kinds() == d.best_kinds();
                criteria_row(&mut out, &format!("{label}-size{}", s.size), fit, selected);
            }
        }
    }
    let from_discovery = bundle.discovery.map(|(label, _)| label);
    for e in bundle
        .entries
        .iter()
        .filter(|e| Some(e.label.as_str()) != from_discovery)
    {
        criteria_row(&mut out, &e.label, &e.fit, false);
    }
    out
}

pub fn contributions_table(bundle: &Bundle) -> Result<String> {
    let mut out = String::from("model,mode,control,total_energy");
    for k in TermKind::all() {
        out.push_str(&format!(",t{}", k.index()));
    }
    out.push('\n');
    let train = bundle.dataset.restrict(&bundle.train)?;
    for e in &bundle.entries {
        for c in contributions(&e.fit.model, &train)? {
            let _ = write!(
                out,
                "{},{},{},{}",
                e.label,
                c.mode,
                num(c.control),
                num(c.total_energy)
            );
            for k in TermKind::all() {
                let f = c.fractions.iter().find(|(kk, _)| *kk == k).map(|(_, f)| *f);
                out.push(',');
                out.push_str(&opt(f));
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// Stress of each model at `CURVE_SAMPLES` controls spanning the data range;
/// `None` where a model cannot be evaluated.
fn sample_curves(bundle: &Bundle, mode: LoadingMode) -> (Vec<f64>, Vec<Vec<Option<f64>>>) {
    let s = bundle.dataset.get(mode).expect("mode present");
    let lo = s.controls.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.controls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xs = linspace(lo, hi, CURVE_SAMPLES);
    let ys = bundle
        .entries
        .iter()
        .map(|e| {
            xs.iter()
                .map(|&x| nominal_stress(&e.fit.model, mode, x).ok())
                .collect()
        })
        .collect();
    (xs, ys)
}

fn curves_table(bundle: &Bundle, xs: &[f64], ys: &[Vec<Option<f64>>]) -> String {
    let mut out = String::from("control");
    for e in &bundle.entries {
        out.push(',');
        out.push_str(&e.label);
    }
    out.push('\n');
    for (i, x) in xs.iter().enumerate() {
        out.push_str(&num(*x));
        for y in ys {
            out.push(',');
            out.push_str(&opt(y[i]));
        }
        out.push('\n');
    }
    out
}

fn plot(bundle: &Bundle, mode: LoadingMode, xs: &[f64], ys: &[Vec<Option<f64>>]) -> String {
    let role = if bundle.train.contains(&mode) {
        "train"
    } else {
        "test"
    };
    let (x_label, y_label) = if mode.is_uniaxial() {
        ("stretch λ [-]", "nominal stress P11 [kPa]")
    } else {
        ("shear strain γ [-]", "nominal stress P12 [kPa]")
    };
    let data = bundle
        .dataset
        .get(mode)
        .map(|s| s.points().collect())
        .unwrap_or_default();
    svg::render(&Plot {
        title: format!("{}: {} ({role})", bundle.title, mode_name(mode)),
        x_label: x_label.into(),
        y_label: y_label.into(),
        data,
        curves: bundle
            .entries
            .iter()
            .zip(ys)
            .map(|(e, y)| Curve {
                label: e.label.clone(),
                points: xs.iter().copied().zip(y.iter().copied()).collect(),
            })
            .collect(),
    })
}

fn summary(bundle: &Bundle, evals: &[Evaluation]) -> String {
    let mut s = format!("# {}\n\n", bundle.title);
    let _ = writeln!(s, "- data: `{}`", bundle.dataset.provenance);
    let train: Vec<_> = bundle.train.iter().map(|m| m.tag()).collect();
    let test: Vec<_> = bundle
        .dataset
        .modes()
        .into_iter()
        .filter(|m| !bundle.train.contains(m))
        .map(|m| m.tag())
        .collect();
    let _ = writeln!(s, "- training modes: {}", train.join(", "));
    let _ = writeln!(
        s,
        "- test modes: {}",
        if test.is_empty() {
            "none".into()
        } else {
            test.join(", ")
        }
    );
    if let Some((label, d)) = bundle.discovery {
        if let (Some(c), Some(v)) = (d.criterion, d.best_criterion) {
            let _ = writeln!(s, "- {label} selection: {c} = {}", short(Some(v)));
        }
    }
    s.push('\n');

    for (e, ev) in bundle.entries.iter().zip(evals) {
        let _ = writeln!(s, "## {}\n", e.label);
        if let Some(note) = &e.note {
            let _ = writeln!(s, "{note}\n");
        }
        if e.fit.model.is_empty() {
            s.push_str("Empty model (no surviving terms).\n\n");
        } else {
            s.push_str("| term | energy | outer [kPa] | inner |\n|---|---|---|---|\n");
            for (k, p) in e.fit.model.terms() {
                let _ = writeln!(
                    s,
                    "| {} | `{}` | {:.6e} | {} |",
                    k.index(),
                    k.label(),
                    p.outer,
                    p.inner
                        .map(|a| format!("{a:.6e}"))
                        .unwrap_or_else(|| "-".into())
                );
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "Training MAPE {} % over {} points, m = {}.\n",
            short(Some(e.fit.metrics.mape)),
            e.fit.metrics.n_points,
            e.fit.m
        );
        s.push_str("| mode | role | n | MAPE [%] | R² | R² raw |\n|---|---|---|---|---|---|\n");
        for (m, is_train) in &ev.modes {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                m.mode,
                if *is_train { "train" } else { "test" },
                m.n_points,
                short(m.mape),
                short(m.r_squared_floored),
                short(m.r_squared)
            );
        }
        s.push('\n');
    }

    let mut warnings = bundle.dataset.warnings();
    warnings.extend(bundle.warnings.iter().cloned());
    if !warnings.is_empty() {
        s.push_str("## Warnings\n\n");
        for w in warnings {
            let _ = writeln!(s, "- {w}");
        }
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_bundle(bundle: &Bundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let evals = evaluate_all(bundle)?;
    write(dir, "params.csv", &params_table(bundle, &evals))?;
    write(dir, "criteria.csv", &criteria_table(bundle))?;
    write(dir, "contributions.csv", &contributions_table(bundle)?)?;
    for mode in bundle.dataset.modes() {
        let (xs, ys) = sample_curves(bundle, mode);
        write(
            dir,
            &format!("curves_{mode}.csv"),
            &curves_table(bundle, &xs, &ys),
        )?;
        write(
            dir,
            &format!("plot_{mode}.svg"),
            &plot(bundle, mode, &xs, &ys),
        )?;
    }
    for e in &bundle.entries {
        write(
            dir,
            &format!("model_{}.csv", e.label),
            &e.fit.model.to_records(),
        )?;
    }
    for (name, contents) in &bundle.extra {
        write(dir, name, contents)?;
    }
    write(dir, "summary.md", &summary(bundle, &evals))
}

/// Refit-free entry for a saved model: metrics recomputed on `train`.
pub fn entry_for_model(label: &str, model: ModelSpec, train: &Dataset) -> Result<Entry> {
    let metrics: Metrics = hyperfit_core::fit::evaluate(&model, train)?;
    Ok(Entry {
        label: label.into(),
        fit: FitResult {
            m: model.param_count(),
            objective: metrics.mape,
            metrics,
            converged: true,
            restart: 0,
            iterations: 0,
            model,
        },
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [
            0.0,
            0.5,
            1e-28,
            -3.25e-7,
            12345.678,
            1e20,
            f64::NEG_INFINITY,
        ] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(num(4.06e-28), "4.06e-28");
        assert_eq!(num(0.25), "0.25");
    }
}
