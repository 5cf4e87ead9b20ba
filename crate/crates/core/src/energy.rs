//! The twelve-term strain-energy catalog.
//!
//! Every term is a convex, non-decreasing function of one argument
//! `u = x^p` with `x = I - 3`, `I ∈ {I1, I2}` and `p ∈ {1, 2}`:
//!
//! | activation  | energy                 |
//! |-------------|------------------------|
//! | linear      | `b·u`                  |
//! | exponential | `b·(exp(a·u) − 1)`     |
//! | logarithmic | `−b·ln(1 − a·u)`       |
//!
//! with outer weight `b ≥ 0` (kPa) and inner coefficient `a ≥ 0`. Canonical
//! indices run activation-major, then power, then invariant:
//! 1 `[I1−3]`, 2 `[I2−3]`, 3 `[I1−3]²`, 4 `[I2−3]²`, 5–8 the same arguments
//! under `exp`, 9–12 under `−ln`.
//!
//! In the 20-slot parameter vector the outer weight of term `k` is `b_k`; the
//! inner coefficients of terms 5–8 are `b13..b16` and those of 9–12 are
//! `b17..b20`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Log-argument margin kept by feasible models: `a·x^p < 1 − margin`.
pub const FEASIBILITY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Invariant {
    I1,
    I2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Linear,
    Exponential,
    Logarithmic,
}

/// One of the twelve catalog terms, identified by its canonical index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKind(u8);

impl TermKind {
    pub const COUNT: usize = 12;

    pub fn new(index: u8) -> Result<Self> {
        if (1..=12).contains(&index) {
            Ok(TermKind(index))
        } else {
            Err(Error::Parameter(format!(
                "term index must be in 1..=12, got {index}"
            )))
        }
    }

    pub fn all() -> impl Iterator<Item = TermKind> + Clone {
        (1..=12).map(TermKind)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn from_parts(activation: Activation, invariant: Invariant, power: u8) -> Result<Self> {
        if !(power == 1 || power == 2) {
            return Err(Error::Parameter(format!(
                "power must be 1 or 2, got {power}"
            )));
        }
        let group = match activation {
            Activation::Linear => 0,
            Activation::Exponential => 1,
            Activation::Logarithmic => 2,
        };
        let inv = match invariant {
            Invariant::I1 => 0,
            Invariant::I2 => 1,
        };
        Ok(TermKind(group * 4 + (power - 1) * 2 + inv + 1))
    }

    pub fn activation(self) -> Activation {
        match (self.0 - 1) / 4 {
            0 => Activation::Linear,
            1 => Activation::Exponential,
            _ => Activation::Logarithmic,
        }
    }

    pub fn invariant(self) -> Invariant {
        if (self.0 - 1).is_multiple_of(2) {
            Invariant::I1
        } else {
            Invariant::I2
        }
    }

    pub fn power(self) -> u8 {
        ((self.0 - 1) % 4) / 2 + 1
    }

    pub fn has_inner(self) -> bool {
        self.activation() != Activation::Linear
    }

    /// Number of free parameters this term contributes.
    pub fn param_count(self) -> usize {
        1 + usize::from(self.has_inner())
    }

    /// Slot (1-based) of the outer weight in the 20-slot parameter vector.
    pub fn outer_slot(self) -> usize {
        usize::from(self.0)
    }

    /// Slot (1-based) of the inner coefficient, if any.
    pub fn inner_slot(self) -> Option<usize> {
        self.has_inner().then(|| usize::from(self.0) + 8)
    }

    /// The argument `x = I - 3` this term reads.
    pub fn argument(self, i1: f64, i2: f64) -> f64 {
        match self.invariant() {
            Invariant::I1 => i1 - 3.0,
            Invariant::I2 => i2 - 3.0,
        }
    }

    /// Human-readable formula, e.g. `exp([I2-3]^2)`.
    pub fn label(self) -> String {
        let inv = match self.invariant() {
            Invariant::I1 => "[I1-3]",
            Invariant::I2 => "[I2-3]",
        };
        let arg = if self.power() == 2 {
            format!("{inv}^2")
        } else {
            inv.to_string()
        };
        match self.activation() {
            Activation::Linear => arg,
            Activation::Exponential => format!("exp({arg})"),
            Activation::Logarithmic => format!("-ln(1-{arg})"),
        }
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermParams {
    pub outer: f64,
    pub inner: Option<f64>,
}

impl TermParams {
    pub fn linear(outer: f64) -> Self {
        TermParams { outer, inner: None }
    }

    pub fn nonlinear(outer: f64, inner: f64) -> Self {
        TermParams {
            outer,
            inner: Some(inner),
        }
    }

    fn validate(&self, kind: TermKind) -> Result<()> {
        if !(self.outer.is_finite() && self.outer >= 0.0) {
            return Err(Error::Parameter(format!(
                "term {kind}: outer weight must be finite and non-negative, got {}",
                self.outer
            )));
        }
        match (kind.has_inner(), self.inner) {
            (true, Some(a)) if a.is_finite() && a >= 0.0 => Ok(()),
            (true, Some(a)) => Err(Error::Parameter(format!(
                "term {kind}: inner coefficient must be finite and non-negative, got {a}"
            ))),
            (true, None) => Err(Error::Parameter(format!(
                "term {kind} requires an inner coefficient"
            ))),
            (false, Some(_)) => Err(Error::Parameter(format!(
                "term {kind} is linear and takes no inner coefficient"
            ))),
            (false, None) => Ok(()),
        }
    }
}

/// Scalar pieces of one term at argument `x`, shared by energy, stress, and
/// the parameter Jacobians.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TermLocal {
    /// ψ
    pub value: f64,
    /// dψ/dx (= dψ/dI)
    pub slope: f64,
    /// d(slope)/d(outer)
    pub slope_d_outer: f64,
    /// d(slope)/d(inner); zero for linear terms
    pub slope_d_inner: f64,
}

/// Evaluate term `kind` with raw parameters at argument `x ≥ 0`.
///
/// Returns `Err(argument)` when a logarithmic term's argument `1 − a·x^p` is
/// not positive.
#[inline]
pub(crate) fn term_local(
    kind: TermKind,
    outer: f64,
    inner: f64,
    x: f64,
) -> std::result::Result<TermLocal, f64> {
    let (u, du) = if kind.power() == 2 {
        (x * x, 2.0 * x)
    } else {
        (x, 1.0)
    };
    match kind.activation() {
        Activation::Linear => Ok(TermLocal {
            value: outer * u,
            slope: outer * du,
            slope_d_outer: du,
            slope_d_inner: 0.0,
        }),
        Activation::Exponential => {
            let au = inner * u;
            let e = au.exp();
            Ok(TermLocal {
                value: outer * au.exp_m1(),
                slope: outer * inner * du * e,
                slope_d_outer: inner * du * e,
                slope_d_inner: outer * du * e * (1.0 + au),
            })
        }
        Activation::Logarithmic => {
            let arg = 1.0 - inner * u;
            if arg <= 0.0 || arg.is_nan() {
                return Err(arg);
            }
            Ok(TermLocal {
                value: -outer * (-inner * u).ln_1p(),
                slope: outer * inner * du / arg,
                slope_d_outer: inner * du / arg,
                slope_d_inner: outer * du / (arg * arg),
            })
        }
    }
}

fn eval(kind: TermKind, params: &TermParams, i1: f64, i2: f64) -> Result<TermLocal> {
    params.validate(kind)?;
    let x = kind.argument(i1, i2);
    term_local(kind, params.outer, params.inner.unwrap_or(0.0), x).map_err(|argument| {
        Error::Infeasible {
            kind,
            i1,
            i2,
            argument,
        }
    })
}

/// Energy density (kPa) of one term.
pub fn term_value(kind: TermKind, params: &TermParams, i1: f64, i2: f64) -> Result<f64> {
    Ok(eval(kind, params, i1, i2)?.value)
}

/// `(∂ψ/∂I1, ∂ψ/∂I2)` of one term; only the slot of its invariant is nonzero.
pub fn term_derivative(
    kind: TermKind,
    params: &TermParams,
    i1: f64,
    i2: f64,
) -> Result<(f64, f64)> {
    let slope = eval(kind, params, i1, i2)?.slope;
    Ok(match kind.invariant() {
        Invariant::I1 => (slope, 0.0),
        Invariant::I2 => (0.0, slope),
    })
}

/// A sparse strain energy: at most one entry per catalog index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelSpec {
    terms: BTreeMap<TermKind, TermParams>,
}

impl ModelSpec {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (TermKind, TermParams)>) -> Result<Self> {
        let mut spec = Self::empty();
        for (kind, params) in terms {
            if spec.terms.contains_key(&kind) {
                return Err(Error::Parameter(format!("term {kind} listed twice")));
            }
            spec.insert(kind, params)?;
        }
        Ok(spec)
    }

    pub fn insert(&mut self, kind: TermKind, params: TermParams) -> Result<()> {
        params.validate(kind)?;
        self.terms.insert(kind, params);
        Ok(())
    }

    pub fn with(mut self, kind: TermKind, params: TermParams) -> Result<Self> {
        self.insert(kind, params)?;
        Ok(self)
    }

    pub fn get(&self, kind: TermKind) -> Option<&TermParams> {
        self.terms.get(&kind)
    }

    pub fn terms(&self) -> impl Iterator<Item = (TermKind, &TermParams)> + '_ {
        self.terms.iter().map(|(k, p)| (*k, p))
    }

    pub fn kinds(&self) -> Vec<TermKind> {
        self.terms.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Free parameter count: one per linear term, two per nonlinear term.
    pub fn param_count(&self) -> usize {
        self.terms.keys().map(|k| k.param_count()).sum()
    }

    /// Keep only the listed terms.
    pub fn retain(&mut self, mut keep: impl FnMut(TermKind, &TermParams) -> bool) {
        self.terms.retain(|k, p| keep(*k, p));
    }

    /// The 20-slot parameter vector; `None` marks unused slots.
    pub fn slots(&self) -> [Option<f64>; 20] {
        let mut out = [None; 20];
        for (kind, p) in &self.terms {
            out[kind.outer_slot() - 1] = Some(p.outer);
            if let (Some(slot), Some(a)) = (kind.inner_slot(), p.inner) {
                out[slot - 1] = Some(a);
            }
        }
        out
    }

    /// Serialize as `index,outer,inner` records (inner blank for linear
    /// terms), 17 significant digits, preceded by a header line.
    pub fn to_records(&self) -> String {
        let mut out = String::from("index,outer,inner\n");
        for (kind, p) in &self.terms {
            let inner = p.inner.map(|a| format!("{a:.16e}")).unwrap_or_default();
            out.push_str(&format!("{},{:.16e},{}\n", kind.index(), p.outer, inner));
        }
        out
    }

    /// Parse the format written by [`ModelSpec::to_records`]. Blank lines and
    /// `#` comments are skipped; the header is optional.
    pub fn from_records(text: &str) -> Result<Self> {
        let mut spec = Self::empty();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n as u64 + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line == "index,outer,inner" {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 fields, found {}",
                    fields.len()
                )));
            }
            let index: u8 = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad term index `{}`", fields[0])))?;
            let kind = TermKind::new(index).map_err(|e| parse_err(e.to_string()))?;
            let outer: f64 = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("bad outer weight `{}`", fields[1])))?;
            let inner = match fields[2] {
                "" => None,
                s => Some(
                    s.parse::<f64>()
                        .map_err(|_| parse_err(format!("bad inner coefficient `{s}`")))?,
                ),
            };
            if spec.get(kind).is_some() {
                return Err(parse_err(format!("term {kind} listed twice")));
            }
            spec.insert(kind, TermParams { outer, inner })
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(spec)
    }
}

/// Total energy density (kPa); zero for the empty model.
pub fn model_energy(model: &ModelSpec, i1: f64, i2: f64) -> Result<f64> {
    model.terms().map(|(k, p)| term_value(k, p, i1, i2)).sum()
}

/// `(∂Ψ/∂I1, ∂Ψ/∂I2)` summed over the model's terms.
pub fn model_derivative(model: &ModelSpec, i1: f64, i2: f64) -> Result<(f64, f64)> {
    model.terms().try_fold((0.0, 0.0), |(d1, d2), (k, p)| {
        let (a, b) = term_derivative(k, p, i1, i2)?;
        Ok((d1 + a, d2 + b))
    })
}

/// Per-term energies at one state, in model order.
pub fn term_energies(model: &ModelSpec, i1: f64, i2: f64) -> Result<Vec<(TermKind, f64)>> {
    model
        .terms()
        .map(|(k, p)| Ok((k, term_value(k, p, i1, i2)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassicModel {
    NeoHookean { mu: f64 },
    MooneyRivlin { mu: f64, c2: f64 },
    Demiray { mu: f64, beta: f64 },
    Gent { mu: f64, eta: f64 },
}

impl ClassicModel {
    pub fn name(&self) -> &'static str {
        self.family().name()
    }

    pub fn family(&self) -> ClassicFamily {
        match self {
            ClassicModel::NeoHookean { .. } => ClassicFamily::NeoHookean,
            ClassicModel::MooneyRivlin { .. } => ClassicFamily::MooneyRivlin,
            ClassicModel::Demiray { .. } => ClassicFamily::Demiray,
            ClassicModel::Gent { .. } => ClassicFamily::Gent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        match *self {
            ClassicModel::NeoHookean { mu } => positive("mu", mu),
            ClassicModel::MooneyRivlin { mu, c2 } => {
                positive("mu", mu)?;
                if !(c2.is_finite() && c2 >= 0.0 && 0.5 * mu - c2 >= 0.0) {
                    return Err(Error::Parameter(format!(
                        "Mooney-Rivlin requires 0 <= C2 <= mu/2, got mu = {mu}, C2 = {c2}"
                    )));
                }
                Ok(())
            }
            ClassicModel::Demiray { mu, beta } => {
                positive("mu", mu)?;
                positive("beta", beta)
            }
            ClassicModel::Gent { mu, eta } => {
                positive("mu", mu)?;
                positive("eta", eta)
            }
        }
    }

    /// Express the classic model in catalog terms. Gent uses the
    /// positive-energy form `−(μη/2)·ln(1 − x/η)`.
    pub fn to_spec(&self) -> Result<ModelSpec> {
        classic_to_spec(self)
    }
}

pub fn classic_to_spec(classic: &ClassicModel) -> Result<ModelSpec> {
    classic.validate()?;
    let k = |i| TermKind::new(i).expect("catalog index");
    let terms = match *classic {
        ClassicModel::NeoHookean { mu } => vec![(k(1), TermParams::linear(0.5 * mu))],
        ClassicModel::MooneyRivlin { mu, c2 } => vec![
            (k(1), TermParams::linear(0.5 * mu - c2)),
            (k(2), TermParams::linear(c2)),
        ],
        ClassicModel::Demiray { mu, beta } => {
            vec![(k(5), TermParams::nonlinear(mu / (2.0 * beta), beta))]
        }
        ClassicModel::Gent { mu, eta } => {
            vec![(k(9), TermParams::nonlinear(0.5 * mu * eta, 1.0 / eta))]
        }
    };
    ModelSpec::from_terms(terms)
}

/// The structural term subsets of the classic models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicFamily {
    NeoHookean,
    MooneyRivlin,
    Demiray,
    Gent,
}

impl ClassicFamily {
    pub const ALL: [ClassicFamily; 4] = [
        ClassicFamily::NeoHookean,
        ClassicFamily::MooneyRivlin,
        ClassicFamily::Demiray,
        ClassicFamily::Gent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassicFamily::NeoHookean => "neo-Hookean",
            ClassicFamily::MooneyRivlin => "Mooney-Rivlin",
            ClassicFamily::Demiray => "Demiray",
            ClassicFamily::Gent => "Gent",
        }
    }

    /// Catalog terms spanned by the family. Mooney-Rivlin's `½μ − C2 ≥ 0`
    /// and `C2 ≥ 0` are exactly non-negativity of the two linear weights.
    pub fn subset(self) -> Vec<TermKind> {
        let idx: &[u8] = match self {
            ClassicFamily::NeoHookean => &[1],
            ClassicFamily::MooneyRivlin => &[1, 2],
            ClassicFamily::Demiray => &[5],
            ClassicFamily::Gent => &[9],
        };
        idx.iter().map(|&i| TermKind(i)).collect()
    }

    /// Recover classic parameters from a catalog model over [`Self::subset`].
    pub fn from_spec(self, spec: &ModelSpec) -> Result<ClassicModel> {
        let get = |i: u8| {
            spec.get(TermKind(i))
                .copied()
                .ok_or_else(|| Error::Parameter(format!("{} model needs term {i}", self.name())))
        };
        Ok(match self {
            ClassicFamily::NeoHookean => ClassicModel::NeoHookean {
                mu: 2.0 * get(1)?.outer,
            },
            ClassicFamily::MooneyRivlin => {
                let (b1, b2) = (get(1)?.outer, get(2)?.outer);
                ClassicModel::MooneyRivlin {
                    mu: 2.0 * (b1 + b2),
                    c2: b2,
                }
            }
            ClassicFamily::Demiray => {
                let p = get(5)?;
                let beta = p.inner.unwrap_or(0.0);
                ClassicModel::Demiray {
                    mu: 2.0 * p.outer * beta,
                    beta,
                }
            }
            ClassicFamily::Gent => {
                let p = get(9)?;
                let a = p.inner.unwrap_or(0.0);
                let eta = if a > 0.0 { 1.0 / a } else { f64::INFINITY };
                ClassicModel::Gent {
                    mu: 2.0 * p.outer * a,
                    eta,
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: TermKind,
    pub inner: f64,
    /// Largest admissible inner coefficient at the given bounds.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Largest inner coefficient a logarithmic `kind` may take when its argument
/// reaches `x_max`; `None` for other activations or `x_max = 0`.
pub fn log_inner_limit(kind: TermKind, x_max_i1: f64, x_max_i2: f64) -> Option<f64> {
    if kind.activation() != Activation::Logarithmic {
        return None;
    }
    let x = match kind.invariant() {
        Invariant::I1 => x_max_i1,
        Invariant::I2 => x_max_i2,
    };
    let u = x.powi(i32::from(kind.power()));
    (u > 0.0).then(|| (1.0 - FEASIBILITY_MARGIN) / u)
}

/// Check every logarithmic term against `a·x_max^p < 1 − margin`.
pub fn feasibility_bound(model: &ModelSpec, x_max_i1: f64, x_max_i2: f64) -> Feasibility {
    let violations: Vec<Violation> = model
        .terms()
        .filter(|(k, _)| k.activation() == Activation::Logarithmic)
        .filter_map(|(kind, p)| {
            let inner = p.inner.unwrap_or(0.0);
            let x = match kind.invariant() {
                Invariant::I1 => x_max_i1,
                Invariant::I2 => x_max_i2,
            };
            let u = x.powi(i32::from(kind.power()));
            if inner * u < 1.0 - FEASIBILITY_MARGIN {
                None
            } else {
                Some(Violation {
                    kind,
                    inner,
                    limit: log_inner_limit(kind, x_max_i1, x_max_i2).unwrap_or(f64::INFINITY),
                })
            }
        })
        .collect();
    Feasibility {
        feasible: violations.is_empty(),
        violations,
    }
}
