//! Closed-form nominal stress for incompressible uniaxial loading and simple
//! shear. The hydrostatic pressure is eliminated analytically, so each stress
//! is a weighted sum of `∂Ψ/∂I1` and `∂Ψ/∂I2`:
//!
//! ```text
//! P11 = 2 (∂Ψ/∂I1 + ∂Ψ/∂I2 / λ) (λ − 1/λ²)
//! P12 = 2 (∂Ψ/∂I1 + ∂Ψ/∂I2) γ
//! ```

use crate::energy::{model_derivative, ModelSpec};
use crate::error::Result;
use crate::kinematics::{invariants_shear, invariants_uniaxial, LoadingMode};

#[derive(Debug, Clone, PartialEq)]
pub struct StressPrediction {
    pub mode: LoadingMode,
    pub controls: Vec<f64>,
    /// P11 for uniaxial modes, P12 for shear (kPa).
    pub stresses: Vec<f64>,
}

/// Coefficients `(c1, c2)` with `P = c1·∂Ψ/∂I1 + c2·∂Ψ/∂I2`.
#[inline]
pub(crate) fn stress_factors(mode: LoadingMode, control: f64) -> (f64, f64) {
    if mode.is_uniaxial() {
        let l = control;
        let g = 2.0 * (l - 1.0 / (l * l));
        (g, g / l)
    } else {
        let g = 2.0 * control;
        (g, g)
    }
}

pub fn nominal_stress_uniaxial(model: &ModelSpec, lambda: f64) -> Result<f64> {
    let st = invariants_uniaxial(lambda)?;
    let (d1, d2) = model_derivative(model, st.i1, st.i2)?;
    let (c1, c2) = stress_factors(st.mode, lambda);
    Ok(c1 * d1 + c2 * d2)
}

pub fn nominal_stress_shear(model: &ModelSpec, gamma: f64) -> Result<f64> {
    let st = invariants_shear(gamma)?;
    let (d1, d2) = model_derivative(model, st.i1, st.i2)?;
    let (c1, c2) = stress_factors(LoadingMode::SimpleShear, gamma);
    Ok(c1 * d1 + c2 * d2)
}

/// Stress for `mode` at `control`; the control must be admissible for the mode.
pub fn nominal_stress(model: &ModelSpec, mode: LoadingMode, control: f64) -> Result<f64> {
    let st = mode.state(control)?;
    let (d1, d2) = model_derivative(model, st.i1, st.i2)?;
    let (c1, c2) = stress_factors(mode, control);
    Ok(c1 * d1 + c2 * d2)
}

/// Stress at every control, in input order. The first failing point aborts
/// with its index.
pub fn predict_curve(
    model: &ModelSpec,
    mode: LoadingMode,
    controls: &[f64],
) -> Result<StressPrediction> {
    let stresses = controls
        .iter()
        .enumerate()
        .map(|(i, &c)| nominal_stress(model, mode, c).map_err(|e| e.at_point(i, c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(StressPrediction {
        mode,
        controls: controls.to_vec(),
        stresses,
    })
}

/// `n` evenly spaced controls spanning `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
