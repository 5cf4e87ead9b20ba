//! Losses, goodness-of-fit metrics, and the two fitting paths: a
//! box-constrained Levenberg–Marquardt solver for a fixed term subset and a
//! projected Adam trainer over the whole catalog.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{invariant_extrema, Dataset, Series};
use crate::energy::{
    log_inner_limit, term_local, Activation, Invariant, ModelSpec, TermKind, TermParams,
};
use crate::error::{Error, Result};
use crate::kinematics::LoadingMode;
use crate::stress::{predict_curve, stress_factors};

/// Observations with `|obs|` below this are left out of percentage losses.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

/// Number of parameters in the full catalog: 12 outer weights and 8 inner
/// coefficients.
pub const CATALOG_PARAMS: usize = 20;

const BOX_SHRINK: f64 = 1.0 - 1e-12;

// ---------------------------------------------------------------------------
// losses and metrics

/// Mean absolute percentage error, `100/N · Σ |(obs − pred)/obs|`, over points
/// with `|obs| ≥ DENOMINATOR_FLOOR`.
pub fn mape_loss(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_lengths(pred, obs)?;
    let (sum, n) = pred
        .iter()
        .zip(obs)
        .filter(|(_, o)| o.abs() >= DENOMINATOR_FLOOR)
        .fold((0.0, 0usize), |(s, n), (p, o)| {
            (s + ((o - p) / o).abs(), n + 1)
        });
    if n == 0 {
        return Err(Error::DegenerateLoss(
            "no observation above the percentage-error floor".into(),
        ));
    }
    Ok(100.0 * sum / n as f64)
}

/// Total loss over modes; absent modes contribute nothing.
pub fn multi_mode_loss(losses: &[Option<f64>]) -> f64 {
    losses.iter().flatten().sum()
}

pub fn rss(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_lengths(pred, obs)?;
    Ok(pred.iter().zip(obs).map(|(p, o)| (o - p) * (o - p)).sum())
}

/// Coefficient of determination on signed stresses; may be negative.
pub fn r_squared(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_lengths(pred, obs)?;
    if obs.len() < 2 {
        return Err(Error::Domain("R² needs at least 2 points".into()));
    }
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let tss: f64 = obs.iter().map(|o| (o - mean) * (o - mean)).sum();
    if tss == 0.0 {
        return Err(Error::DegenerateRSquared);
    }
    Ok(1.0 - rss(pred, obs)? / tss)
}

fn check_lengths(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(Error::Domain(format!(
            "{} predictions for {} observations",
            pred.len(),
            obs.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeMetrics {
    pub mode: LoadingMode,
    pub n_points: usize,
    /// `None` when every observation is below the percentage floor.
    pub mape: Option<f64>,
    pub rss: f64,
    /// Raw R²; `None` for a constant observed series.
    pub r_squared: Option<f64>,
    pub r_squared_floored: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub modes: Vec<ModeMetrics>,
    /// Sum of per-mode MAPE (percent).
    pub mape: f64,
    /// Pooled over all modes (kPa²).
    pub rss: f64,
    /// R² of the pooled sample.
    pub r_squared: Option<f64>,
    pub n_points: usize,
    /// Σ obs², the scale against which an exact fit is judged.
    pub sum_sq_obs: f64,
}

impl Metrics {
    pub fn mode(&self, mode: LoadingMode) -> Option<&ModeMetrics> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

/// Metrics of `model` against one series.
pub fn evaluate_series(model: &ModelSpec, series: &Series) -> Result<ModeMetrics> {
    let pred = predict_curve(model, series.mode, &series.controls)?.stresses;
    series_metrics(series, &pred)
}

fn series_metrics(series: &Series, pred: &[f64]) -> Result<ModeMetrics> {
    let obs = &series.stresses;
    let mape = match mape_loss(pred, obs) {
        Ok(v) => Some(v),
        Err(Error::DegenerateLoss(_)) => None,
        Err(e) => return Err(e),
    };
    let r2 = match r_squared(pred, obs) {
        Ok(v) => Some(v),
        Err(Error::DegenerateRSquared) => None,
        Err(e) => return Err(e),
    };
    Ok(ModeMetrics {
        mode: series.mode,
        n_points: obs.len(),
        mape,
        rss: rss(pred, obs)?,
        r_squared: r2,
        r_squared_floored: r2.map(|v| v.max(0.0)),
    })
}

/// Metrics of `model` against every series of `dataset`.
pub fn evaluate(model: &ModelSpec, dataset: &Dataset) -> Result<Metrics> {
    let mut modes = Vec::new();
    let mut all_pred = Vec::new();
    let mut all_obs = Vec::new();
    for s in dataset.series() {
        let pred = predict_curve(model, s.mode, &s.controls)?.stresses;
        modes.push(series_metrics(s, &pred)?);
        all_pred.extend(pred);
        all_obs.extend_from_slice(&s.stresses);
    }
    let per_mode: Vec<Option<f64>> = modes.iter().map(|m| m.mape).collect();
    if per_mode.iter().all(Option::is_none) {
        return Err(Error::DegenerateLoss(
            "no observation above the percentage-error floor".into(),
        ));
    }
    let r2 = match r_squared(&all_pred, &all_obs) {
        Ok(v) => Some(v),
        Err(Error::DegenerateRSquared) => None,
        Err(e) => return Err(e),
    };
    Ok(Metrics {
        mape: multi_mode_loss(&per_mode),
        rss: rss(&all_pred, &all_obs)?,
        r_squared: r2,
        n_points: all_obs.len(),
        sum_sq_obs: all_obs.iter().map(|o| o * o).sum(),
        modes,
    })
}

// ---------------------------------------------------------------------------
// configuration and results

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub param_tolerance: f64,
    pub loss_tolerance: f64,
    /// Log-uniform range for outer weights (kPa).
    pub outer_init: (f64, f64),
    /// Log-uniform range for inner coefficients.
    pub inner_init: (f64, f64),
    /// Replaces the random draw of restart 0; projected into the box.
    pub initial_guess: Option<ModelSpec>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 8,
            seed: 0,
            max_iterations: 2000,
            param_tolerance: 1e-10,
            loss_tolerance: 1e-12,
            outer_init: (1e-3, 1e1),
            inner_init: (1e-2, 1e2),
            initial_guess: None,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if self.restarts == 0 {
            return Err(Error::Parameter("restarts must be at least 1".into()));
        }
        if !(self.param_tolerance > 0.0 && self.loss_tolerance > 0.0) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        if !(range_ok(self.outer_init) && range_ok(self.inner_init)) {
            return Err(Error::Parameter(
                "init ranges must be positive and ordered".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Starting b-vector; entries may lie outside the box.
    pub init: Option<[f64; CATALOG_PARAMS]>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha1: 0.0,
            alpha2: 0.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 20_000,
            seed: 0,
            init: None,
        }
    }
}

impl AdamConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0) {
            return Err(Error::Parameter(
                "alpha1 and alpha2 must be non-negative".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter("learning rate must be positive".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::Parameter(
                "decay parameters must lie in [0, 1)".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter("epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelSpec,
    pub metrics: Metrics,
    /// Final value of the minimized objective.
    pub objective: f64,
    /// Free parameter count.
    pub m: usize,
    pub converged: bool,
    pub restart: usize,
    pub iterations: usize,
}

// ---------------------------------------------------------------------------
// problem setup

#[derive(Debug, Clone, Copy)]
struct Point {
    x1: f64,
    x2: f64,
    c1: f64,
    c2: f64,
    /// Least-squares residual weight: 100 / (obs·√N_mode).
    lsq_weight: f64,
    /// MAPE weight: 100 / (N_mode·|obs|).
    abs_weight: f64,
    obs: f64,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    kind: TermKind,
    outer: usize,
    inner: Option<usize>,
}

/// How a nonlinear term's outer parameter is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Form {
    /// The catalog weight `b`.
    Weights,
    /// The initial slope `w = a·b`, with `a ≥ MIN_INNER`. The linear limit
    /// `a → 0, b → ∞` then sits on the box boundary instead of at infinity.
    Slopes,
}

/// Smallest inner coefficient in slope form.
pub const MIN_INNER: f64 = 1e-8;

/// A term subset bound to a training set. Parameters are laid out with every
/// outer weight first (catalog order) followed by every inner coefficient, so
/// for the full catalog in weight form the vector is exactly `b1..b20`.
#[derive(Debug, Clone)]
pub(crate) struct SubsetProblem {
    points: Vec<Point>,
    slots: Vec<Slot>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    form: Form,
}

impl SubsetProblem {
    pub(crate) fn new(dataset: &Dataset, subset: &[TermKind], form: Form) -> Result<Self> {
        let mut kinds = subset.to_vec();
        kinds.sort();
        kinds.dedup();
        if kinds.is_empty() {
            return Err(Error::Parameter("term subset is empty".into()));
        }
        let (x1_max, x2_max) = invariant_extrema(dataset);

        let mut points = Vec::with_capacity(dataset.n_points());
        for s in dataset.series() {
            let included = s
                .stresses
                .iter()
                .filter(|o| o.abs() >= DENOMINATOR_FLOOR)
                .count();
            for (c, obs) in s.points() {
                let st = s.mode.state(c)?;
                let (c1, c2) = stress_factors(s.mode, c);
                let keep = obs.abs() >= DENOMINATOR_FLOOR;
                points.push(Point {
                    x1: st.i1 - 3.0,
                    x2: st.i2 - 3.0,
                    c1,
                    c2,
                    lsq_weight: if keep {
                        100.0 / (obs * (included as f64).sqrt())
                    } else {
                        0.0
                    },
                    abs_weight: if keep {
                        100.0 / (included as f64 * obs.abs())
                    } else {
                        0.0
                    },
                    obs,
                });
            }
        }
        if points.iter().all(|p| p.lsq_weight == 0.0) {
            return Err(Error::DegenerateLoss(
                "no observation above the percentage-error floor".into(),
            ));
        }

        let n_outer = kinds.len();
        let mut next_inner = n_outer;
        let mut slots = Vec::with_capacity(n_outer);
        let mut upper = vec![f64::INFINITY; n_outer];
        for (i, &kind) in kinds.iter().enumerate() {
            let inner = kind.has_inner().then(|| {
                let j = next_inner;
                next_inner += 1;
                upper.push(
                    log_inner_limit(kind, x1_max, x2_max).map_or(f64::INFINITY, |l| l * BOX_SHRINK),
                );
                j
            });
            slots.push(Slot {
                kind,
                outer: i,
                inner,
            });
        }
        let lower = (0..upper.len())
            .map(|j| {
                if j >= n_outer && form == Form::Slopes {
                    MIN_INNER
                } else {
                    0.0
                }
            })
            .collect();
        Ok(SubsetProblem {
            points,
            slots,
            lower,
            upper,
            form,
        })
    }

    pub(crate) fn n_params(&self) -> usize {
        self.upper.len()
    }

    pub(crate) fn kinds(&self) -> Vec<TermKind> {
        self.slots.iter().map(|s| s.kind).collect()
    }

    #[cfg(test)]
    pub(crate) fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn is_inner(&self, j: usize) -> bool {
        j >= self.slots.len()
    }

    pub(crate) fn project(&self, theta: &mut [f64]) {
        for ((t, &lo), &hi) in theta.iter_mut().zip(&self.lower).zip(&self.upper) {
            *t = t.max(lo).min(hi);
        }
    }

    /// Predicted stress at one point; fills `jac` with ∂pred/∂θ if given.
    /// `None` when a log term leaves its domain or the value is not finite.
    #[inline]
    fn predict(&self, theta: &[f64], p: &Point, mut jac: Option<&mut [f64]>) -> Option<f64> {
        let mut pred = 0.0;
        for s in &self.slots {
            let (x, c) = match s.kind.invariant() {
                Invariant::I1 => (p.x1, p.c1),
                Invariant::I2 => (p.x2, p.c2),
            };
            let inner = s.inner.map_or(0.0, |j| theta[j]);
            let (slope, d_outer, d_inner) = match self.form {
                Form::Weights => {
                    let t = term_local(s.kind, theta[s.outer], inner, x).ok()?;
                    (t.slope, t.slope_d_outer, t.slope_d_inner)
                }
                Form::Slopes => slope_form(s.kind, theta[s.outer], inner, x)?,
            };
            pred += c * slope;
            if let Some(row) = jac.as_deref_mut() {
                row[s.outer] = c * d_outer;
                if let Some(j) = s.inner {
                    row[j] = c * d_inner;
                }
            }
        }
        pred.is_finite().then_some(pred)
    }

    /// Least-squares objective Σ r², with r = w·(obs − pred).
    pub(crate) fn cost(&self, theta: &[f64]) -> f64 {
        let mut cost = 0.0;
        for p in &self.points {
            match self.predict(theta, p, None) {
                Some(pred) => {
                    let r = p.lsq_weight * (p.obs - pred);
                    cost += r * r;
                }
                None => return f64::INFINITY,
            }
        }
        cost
    }

    /// Residuals and row-major Jacobian of the residuals; false if infeasible.
    fn residuals_jacobian(&self, theta: &[f64], r: &mut [f64], jac: &mut [f64]) -> bool {
        let np = self.n_params();
        for (i, p) in self.points.iter().enumerate() {
            let row = &mut jac[i * np..(i + 1) * np];
            let Some(pred) = self.predict(theta, p, Some(row)) else {
                return false;
            };
            r[i] = p.lsq_weight * (p.obs - pred);
            for v in row.iter_mut() {
                *v *= -p.lsq_weight;
            }
        }
        true
    }

    /// Gradient of `cost`.
    #[cfg(test)]
    pub(crate) fn cost_gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let (n, np) = (self.points.len(), self.n_params());
        let mut r = vec![0.0; n];
        let mut jac = vec![0.0; n * np];
        if !self.residuals_jacobian(theta, &mut r, &mut jac) {
            return None;
        }
        let mut g = vec![0.0; np];
        for i in 0..n {
            for j in 0..np {
                g[j] += 2.0 * jac[i * np + j] * r[i];
            }
        }
        Some(g)
    }

    /// Training MAPE (sum over modes) and its subgradient.
    pub(crate) fn mape_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> Option<f64> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut row = vec![0.0; self.n_params()];
        let mut loss = 0.0;
        for p in &self.points {
            let pred = self.predict(theta, p, Some(&mut row))?;
            if p.abs_weight == 0.0 {
                continue;
            }
            let diff = pred - p.obs;
            loss += p.abs_weight * diff.abs();
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            for (g, d) in grad.iter_mut().zip(&row) {
                *g += p.abs_weight * sign * d;
            }
        }
        Some(loss)
    }

    pub(crate) fn to_model(&self, theta: &[f64]) -> ModelSpec {
        let mut model = ModelSpec::empty();
        for s in &self.slots {
            let params = match (s.inner, self.form) {
                (Some(j), Form::Weights) => TermParams::nonlinear(theta[s.outer], theta[j]),
                (Some(j), Form::Slopes) => {
                    TermParams::nonlinear(theta[s.outer] / theta[j], theta[j])
                }
                (None, _) => TermParams::linear(theta[s.outer]),
            };
            model
                .insert(s.kind, params)
                .expect("catalog kinds are unique");
        }
        model
    }

    /// Parameter vector of `model` restricted to this subset; absent terms
    /// get zero weight and unit inner coefficient.
    fn theta_of_model(&self, model: &ModelSpec) -> Vec<f64> {
        let mut theta = vec![0.0; self.n_params()];
        for s in &self.slots {
            let p = model.get(s.kind);
            theta[s.outer] = p.map_or(0.0, |p| p.outer);
            if let Some(j) = s.inner {
                theta[j] = p.and_then(|p| p.inner).unwrap_or(1.0);
            }
        }
        self.theta_of_weights(theta)
    }

    /// Convert a weight-form vector to this problem's form.
    fn theta_of_weights(&self, mut theta: Vec<f64>) -> Vec<f64> {
        if self.form == Form::Slopes {
            for s in &self.slots {
                if let Some(j) = s.inner {
                    theta[j] = theta[j].max(MIN_INNER);
                    theta[s.outer] *= theta[j];
                }
            }
        }
        theta
    }

    fn random_start(&self, rng: &mut ChaCha8Rng, cfg: &FitConfig) -> Vec<f64> {
        let log_uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| -> f64 {
            (rng.gen::<f64>() * (hi.ln() - lo.ln()) + lo.ln()).exp()
        };
        let theta = (0..self.n_params())
            .map(|j| {
                if self.is_inner(j) {
                    log_uniform(rng, cfg.inner_init).min(0.9 * self.upper[j])
                } else {
                    log_uniform(rng, cfg.outer_init)
                }
            })
            .collect();
        self.theta_of_weights(theta)
    }

    /// Projected Levenberg–Marquardt from `theta0` (projected first).
    pub(crate) fn solve_from(&self, theta0: &[f64], cfg: &FitConfig) -> LmOutcome {
        let (n, np) = (self.points.len(), self.n_params());
        let mut theta = theta0.to_vec();
        self.project(&mut theta);

        let mut r = vec![0.0; n];
        let mut jac = vec![0.0; n * np];
        let mut history = Vec::new();
        if !self.residuals_jacobian(&theta, &mut r, &mut jac) {
            return LmOutcome::failed(theta, history);
        }
        let mut cost: f64 = r.iter().map(|v| v * v).sum();
        history.push(cost);

        let mut a = DMatrix::<f64>::zeros(np, np);
        let mut g = DVector::<f64>::zeros(np);
        let mut scale = vec![0.0f64; np];
        let mut mu = f64::NAN;
        let mut nu = 2.0;
        let mut trial = vec![0.0; np];
        let mut converged = false;
        let mut iterations = 0;
        let mut fresh = true;

        while iterations < cfg.max_iterations {
            iterations += 1;
            if cost <= EXACT_COST {
                converged = true;
                break;
            }
            if fresh {
                a.fill(0.0);
                g.fill(0.0);
                for i in 0..n {
                    let row = &jac[i * np..(i + 1) * np];
                    for j in 0..np {
                        g[j] += row[j] * r[i];
                        for k in j..np {
                            a[(j, k)] += row[j] * row[k];
                        }
                    }
                }
                for j in 0..np {
                    for k in 0..j {
                        a[(j, k)] = a[(k, j)];
                    }
                    scale[j] = scale[j].max(a[(j, j)]);
                }
                if mu.is_nan() {
                    mu = 1e-3;
                }
                fresh = false;
            }

            // Parameters pinned at a bound by an outward gradient stay put.
            let free: Vec<usize> = (0..np)
                .filter(|&j| {
                    let at_lo = theta[j] <= self.lower[j] && g[j] > 0.0;
                    let at_hi = theta[j] >= self.upper[j] && g[j] < 0.0;
                    !(at_lo || at_hi)
                })
                .collect();
            if free.is_empty() || free.iter().all(|&j| g[j] == 0.0) {
                converged = true;
                break;
            }
            let nf = free.len();
            let floor = 1e-12 * scale.iter().cloned().fold(0.0, f64::max).max(1e-300);
            let m = DMatrix::from_fn(nf, nf, |p, q| {
                let (j, k) = (free[p], free[q]);
                a[(j, k)]
                    + if p == q {
                        mu * scale[j].max(floor)
                    } else {
                        0.0
                    }
            });
            let rhs = DVector::from_fn(nf, |p, _| -g[free[p]]);
            let Some(chol) = m.cholesky() else {
                mu *= nu;
                nu *= 2.0;
                if mu > 1e32 {
                    break;
                }
                continue;
            };
            let delta = chol.solve(&rhs);

            trial.copy_from_slice(&theta);
            for (p, &j) in free.iter().enumerate() {
                trial[j] += delta[p];
            }
            self.project(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&theta).map(|(t, o)| t - o).collect();
            let step_norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
            let theta_norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
            if step_norm <= cfg.param_tolerance * (theta_norm + cfg.param_tolerance) {
                converged = true;
                break;
            }

            let new_cost = self.cost(&trial);
            // predicted decrease of the linearized model along the projected step
            let mut gs = 0.0;
            let mut sas = 0.0;
            for j in 0..np {
                gs += g[j] * step[j];
                for k in 0..np {
                    sas += step[j] * a[(j, k)] * step[k];
                }
            }
            let predicted = -2.0 * gs - sas;
            if new_cost.is_finite() && new_cost < cost {
                let rho = if predicted > 0.0 {
                    (cost - new_cost) / predicted
                } else {
                    1.0
                };
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                let decrease = cost - new_cost;
                theta.copy_from_slice(&trial);
                self.residuals_jacobian(&theta, &mut r, &mut jac);
                cost = r.iter().map(|v| v * v).sum();
                history.push(cost);
                fresh = true;
                if decrease <= cfg.loss_tolerance * cost {
                    converged = true;
                    break;
                }
            } else {
                mu *= nu;
                nu *= 2.0;
                if mu > 1e32 {
                    converged = true;
                    break;
                }
            }
        }
        LmOutcome {
            theta,
            cost,
            iterations,
            converged,
            history,
        }
    }
}

/// `(slope, ∂slope/∂w, ∂slope/∂a)` of a term with initial slope `w` and inner
/// coefficient `a` at argument `x`; `None` outside the log domain.
#[inline]
fn slope_form(kind: TermKind, w: f64, a: f64, x: f64) -> Option<(f64, f64, f64)> {
    let (u, du) = if kind.power() == 2 {
        (x * x, 2.0 * x)
    } else {
        (x, 1.0)
    };
    match kind.activation() {
        Activation::Linear => Some((w * du, du, 0.0)),
        Activation::Exponential => {
            let e = (a * u).exp();
            Some((w * du * e, du * e, w * du * u * e))
        }
        Activation::Logarithmic => {
            let arg = 1.0 - a * u;
            if !(arg > 0.0) {
                return None;
            }
            Some((w * du / arg, du / arg, w * du * u / (arg * arg)))
        }
    }
}

/// Objective value treated as an exact fit; no restart can improve on it.
const EXACT_COST: f64 = 1e-24;

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at every accepted iterate.
    #[cfg_attr(not(test), allow(dead_code))]
    pub history: Vec<f64>,
}

impl LmOutcome {
    fn failed(theta: Vec<f64>, history: Vec<f64>) -> Self {
        LmOutcome {
            theta,
            cost: f64::INFINITY,
            iterations: 0,
            converged: false,
            history,
        }
    }
}

fn restart_seed(seed: u64, kinds: &[TermKind], restart: usize) -> u64 {
    let mask = kinds.iter().fold(0u64, |m, k| m | 1 << (k.index() - 1));
    let mut z = seed ^ mask.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (restart as u64).rotate_left(32);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fit the parameters of a fixed term subset by minimizing the per-mode mean
/// squared percentage residual, summed over modes.
pub fn fit_subset(dataset: &Dataset, subset: &[TermKind], config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let problem = SubsetProblem::new(dataset, subset, Form::Slopes)?;
    let kinds = problem.kinds();

    let mut best: Option<(usize, LmOutcome)> = None;
    let mut failures = Vec::new();
    for restart in 0..config.restarts {
        let start = match (&config.initial_guess, restart) {
            (Some(guess), 0) => problem.theta_of_model(guess),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(config.seed, &kinds, restart));
                problem.random_start(&mut rng, config)
            }
        };
        let outcome = problem.solve_from(&start, config);
        if !outcome.cost.is_finite() {
            failures.push(format!("restart {restart}: non-finite objective"));
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| outcome.cost < b.cost) {
            best = Some((restart, outcome));
        }
        if best.as_ref().is_some_and(|(_, b)| b.cost <= EXACT_COST) {
            break;
        }
    }
    let Some((restart, outcome)) = best else {
        return Err(Error::FitFailure(format!(
            "subset {:?}: every restart failed ({})",
            kinds.iter().map(|k| k.index()).collect::<Vec<_>>(),
            failures.join("; ")
        )));
    };
    let model = problem.to_model(&outcome.theta);
    let metrics = evaluate(&model, dataset)?;
    Ok(FitResult {
        m: model.param_count(),
        model,
        metrics,
        objective: outcome.cost,
        converged: outcome.converged,
        restart,
        iterations: outcome.iterations,
    })
}

/// Train all twenty catalog parameters with projected Adam on
/// `MAPE + α₁‖b‖₁ + α₂‖b‖₂²`.
pub fn adam_fit(dataset: &Dataset, config: &AdamConfig) -> Result<FitResult> {
    adam_fit_observed(dataset, config, |_, _| {})
}

/// As [`adam_fit`], calling `observer(epoch, b)` after every projected step.
pub fn adam_fit_observed(
    dataset: &Dataset,
    config: &AdamConfig,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<FitResult> {
    config.validate()?;
    let kinds: Vec<TermKind> = TermKind::all().collect();
    let problem = SubsetProblem::new(dataset, &kinds, Form::Weights)?;
    let np = problem.n_params();

    let mut theta: Vec<f64> = match &config.init {
        Some(b) => b.to_vec(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..np)
                .map(|j| {
                    if problem.is_inner(j) {
                        rng.gen_range(0.5..1.5)
                    } else {
                        rng.gen_range(0.05..0.15)
                    }
                })
                .collect()
        }
    };
    let mut eval_at = theta.clone();
    problem.project(&mut eval_at);
    let penalized = |p: &SubsetProblem, t: &[f64], grad: &mut [f64]| -> Option<f64> {
        let data = p.mape_and_gradient(t, grad)?;
        let mut pen = 0.0;
        for (g, &v) in grad.iter_mut().zip(t) {
            pen += config.alpha1 * v.abs() + config.alpha2 * v * v;
            // iterates are non-negative, so signum is the right derivative of |v|
            *g += config.alpha1 * v.signum() + 2.0 * config.alpha2 * v;
        }
        let loss = data + pen;
        loss.is_finite().then_some(loss)
    };

    let mut grad = vec![0.0; np];
    let mut loss = penalized(&problem, &eval_at, &mut grad).ok_or_else(|| {
        Error::FitFailure("non-finite loss at the projected initial parameters".into())
    })?;
    let (mut m1, mut m2) = (vec![0.0; np], vec![0.0; np]);
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for epoch in 1..=config.epochs {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::FitFailure(format!(
                "non-finite gradient at epoch {epoch}"
            )));
        }
        b1t *= config.beta1;
        b2t *= config.beta2;
        for j in 0..np {
            m1[j] = config.beta1 * m1[j] + (1.0 - config.beta1) * grad[j];
            m2[j] = config.beta2 * m2[j] + (1.0 - config.beta2) * grad[j] * grad[j];
            let mhat = m1[j] / (1.0 - b1t);
            let vhat = m2[j] / (1.0 - b2t);
            theta[j] -= config.learning_rate * mhat / (vhat.sqrt() + config.epsilon);
        }
        problem.project(&mut theta);
        observer(epoch, &theta);
        match penalized(&problem, &theta, &mut grad) {
            Some(l) => loss = l,
            None => {
                return Err(Error::FitFailure(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
        }
    }
    if config.epochs == 0 {
        theta = eval_at;
    }

    let model = problem.to_model(&theta);
    let metrics = evaluate(&model, dataset)?;
    Ok(FitResult {
        m: model.param_count(),
        model,
        metrics,
        objective: loss,
        converged: true,
        restart: 0,
        iterations: config.epochs,
    })
}
