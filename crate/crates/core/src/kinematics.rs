//! Deformation states for the supported test geometries.
//!
//! Uniaxial tension and compression use the incompressible stretch
//! `F = diag(λ, λ^-1/2, λ^-1/2)`; simple shear uses `F = I + γ e1⊗e2`.
//! Both give `I3 = det C = 1`, so only `I1` and `I2` carry information.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A 3×3 tensor stored row-major.
pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LoadingMode {
    UniaxialTension,
    UniaxialCompression,
    SimpleShear,
}

impl LoadingMode {
    /// Canonical ordering: tension, compression, shear.
    pub const ALL: [LoadingMode; 3] = [
        LoadingMode::UniaxialTension,
        LoadingMode::UniaxialCompression,
        LoadingMode::SimpleShear,
    ];

    /// Short tag used in CSV files and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            LoadingMode::UniaxialTension => "ten",
            LoadingMode::UniaxialCompression => "com",
            LoadingMode::SimpleShear => "shr",
        }
    }

    pub fn is_uniaxial(self) -> bool {
        !matches!(self, LoadingMode::SimpleShear)
    }

    /// Whether `control` is admissible for this mode. The reference value
    /// (λ = 1 or γ = 0) is admitted everywhere it can occur.
    pub fn admits(self, control: f64) -> bool {
        control.is_finite()
            && match self {
                LoadingMode::UniaxialTension => control >= 1.0,
                LoadingMode::UniaxialCompression => control > 0.0 && control <= 1.0,
                LoadingMode::SimpleShear => control >= 0.0,
            }
    }

    /// Invariants of the deformation this mode applies at `control`.
    pub fn state(self, control: f64) -> Result<DeformationState> {
        if !self.admits(control) {
            return Err(Error::Domain(format!(
                "control {control} is not admissible for {} ({})",
                self.tag(),
                self.admissible_range()
            )));
        }
        let mut state = match self {
            LoadingMode::SimpleShear => invariants_shear(control)?,
            _ => invariants_uniaxial(control)?,
        };
        state.mode = self;
        Ok(state)
    }

    pub(crate) fn admissible_range(self) -> &'static str {
        match self {
            LoadingMode::UniaxialTension => "tension control must satisfy λ ≥ 1",
            LoadingMode::UniaxialCompression => "compression control must satisfy 0 < λ ≤ 1",
            LoadingMode::SimpleShear => "shear control must satisfy γ ≥ 0",
        }
    }
}

impl fmt::Display for LoadingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for LoadingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ten" => Ok(LoadingMode::UniaxialTension),
            "com" => Ok(LoadingMode::UniaxialCompression),
            "shr" => Ok(LoadingMode::SimpleShear),
            other => Err(Error::Domain(format!(
                "unknown loading mode `{other}` (expected ten, com or shr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    pub mode: LoadingMode,
    /// λ for uniaxial modes, γ for shear.
    pub control: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

/// Invariants of incompressible uniaxial stretch λ. λ = 1 is labelled tension.
pub fn invariants_uniaxial(lambda: f64) -> Result<DeformationState> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!(
            "stretch must be positive and finite, got {lambda}"
        )));
    }
    let mode = if lambda >= 1.0 {
        LoadingMode::UniaxialTension
    } else {
        LoadingMode::UniaxialCompression
    };
    Ok(DeformationState {
        mode,
        control: lambda,
        i1: lambda * lambda + 2.0 / lambda,
        i2: 2.0 * lambda + 1.0 / (lambda * lambda),
        i3: 1.0,
    })
}

pub fn invariants_shear(gamma: f64) -> Result<DeformationState> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Domain(format!(
            "shear must be non-negative and finite, got {gamma}"
        )));
    }
    let i = 3.0 + gamma * gamma;
    Ok(DeformationState {
        mode: LoadingMode::SimpleShear,
        control: gamma,
        i1: i,
        i2: i,
        i3: 1.0,
    })
}

/// Nominal (first Piola–Kirchhoff) stress `P = J σ F^-T`.
pub fn piola_transform(cauchy: &Mat3, defgrad: &Mat3) -> Result<Mat3> {
    let j = det(defgrad);
    if !(j.is_finite() && j > 0.0) {
        return Err(Error::Domain(format!(
            "deformation gradient must have positive determinant, got {j}"
        )));
    }
    let inv = inverse(defgrad, j);
    let mut p = [[0.0; 3]; 3];
    for (r, row) in p.iter_mut().enumerate() {
        for (c, out) in row.iter_mut().enumerate() {
            // (σ F^-T)_rc = Σ_k σ_rk (F^-1)_ck
            *out = j * (0..3).map(|k| cauchy[r][k] * inv[c][k]).sum::<f64>();
        }
    }
    Ok(p)
}

pub fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse(m: &Mat3, det: f64) -> Mat3 {
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, out) in row.iter_mut().enumerate() {
            // adjugate is the transposed cofactor matrix
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            *out = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    fn assert_mat_eq(a: &Mat3, b: &Mat3, tol: f64) {
        for r in 0..3 {
            for c in 0..3 {
                assert_abs_diff_eq!(a[r][c], b[r][c], epsilon = tol);
            }
        }
    }

    fn right_cauchy_green(f: &Mat3) -> Mat3 {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| f[k][i] * f[k][j]).sum();
            }
        }
        c
    }

    // I1 = tr C, I2 = ½[(tr C)² − tr(C²)], I3 = det C
    fn tensor_invariants(f: &Mat3) -> (f64, f64, f64) {
        let c = right_cauchy_green(f);
        let tr = c[0][0] + c[1][1] + c[2][2];
        let tr_sq: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| c[i][j] * c[j][i])
            .sum();
        (tr, 0.5 * (tr * tr - tr_sq), det(&c))
    }

    #[test]
    fn uniaxial_examples() {
        let s = invariants_uniaxial(1.0).unwrap();
        assert_eq!((s.i1, s.i2, s.i3), (3.0, 3.0, 1.0));
        assert_eq!(s.mode, LoadingMode::UniaxialTension);

        let s = invariants_uniaxial(2.0).unwrap();
        assert_abs_diff_eq!(s.i1, 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.i2, 4.25, epsilon = 1e-15);

        let s = invariants_uniaxial(0.5).unwrap();
        assert_abs_diff_eq!(s.i1, 4.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.i2, 5.0, epsilon = 1e-15);
        assert_eq!(s.mode, LoadingMode::UniaxialCompression);
    }

    #[test]
    fn shear_examples() {
        for (g, i) in [(0.0, 3.0), (0.5, 3.25), (1.0, 4.0)] {
            let s = invariants_shear(g).unwrap();
            assert_eq!((s.i1, s.i2, s.i3), (i, i, 1.0));
        }
    }

    #[test]
    fn rejects_bad_controls() {
        for l in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(invariants_uniaxial(l).is_err());
        }
        for g in [-0.1, f64::NAN] {
            assert!(invariants_shear(g).is_err());
        }
        assert!(LoadingMode::UniaxialTension.state(0.9).is_err());
        assert!(LoadingMode::UniaxialCompression.state(1.1).is_err());
        assert!(LoadingMode::UniaxialCompression.state(1.0).is_ok());
    }

    #[test]
    fn closed_forms_match_tensor_invariants() {
        for &l in &[0.3f64, 0.9, 1.0, 1.25, 3.0] {
            let s = l.sqrt();
            let f = [[l, 0.0, 0.0], [0.0, 1.0 / s, 0.0], [0.0, 0.0, 1.0 / s]];
            let (i1, i2, i3) = tensor_invariants(&f);
            let st = invariants_uniaxial(l).unwrap();
            assert_abs_diff_eq!(st.i1, i1, epsilon = 1e-12);
            assert_abs_diff_eq!(st.i2, i2, epsilon = 1e-12);
            assert_abs_diff_eq!(i3, 1.0, epsilon = 1e-12);
        }
        for &g in &[0.0, 0.2, 1.7] {
            let f = [[1.0, g, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            let (i1, i2, i3) = tensor_invariants(&f);
            let st = invariants_shear(g).unwrap();
            assert_abs_diff_eq!(st.i1, i1, epsilon = 1e-12);
            assert_abs_diff_eq!(st.i2, i2, epsilon = 1e-12);
            assert_abs_diff_eq!(i3, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn piola_examples() {
        assert_mat_eq(
            &piola_transform(&IDENTITY, &IDENTITY).unwrap(),
            &IDENTITY,
            1e-15,
        );

        let s = 3.7;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let sigma = [[s, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let f = [[2.0, 0.0, 0.0], [0.0, r, 0.0], [0.0, 0.0, r]];
        let expected = [[s / 2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        assert_mat_eq(&piola_transform(&sigma, &f).unwrap(), &expected, 1e-14);

        let g = 0.4;
        let f = [[1.0, g, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let expected = [[1.0, 0.0, 0.0], [-g, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_mat_eq(&piola_transform(&IDENTITY, &f).unwrap(), &expected, 1e-15);
    }

    #[test]
    fn piola_rejects_singular_and_inverted() {
        let singular = [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(piola_transform(&IDENTITY, &singular).is_err());
        let inverted = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(piola_transform(&IDENTITY, &inverted).is_err());
    }

    proptest! {
        #[test]
        fn uniaxial_duality(l in 0.05f64..20.0) {
            let a = invariants_uniaxial(l).unwrap();
            let b = invariants_uniaxial(1.0 / l).unwrap();
            prop_assert!((a.i1 - b.i2).abs() <= 1e-12 * a.i1);
            prop_assert!((a.i2 - b.i1).abs() <= 1e-12 * a.i2);
        }

        #[test]
        fn invariants_minimal_at_reference(l in 0.05f64..20.0, g in 0.0f64..5.0) {
            let u = invariants_uniaxial(l).unwrap();
            prop_assert!(u.i1 >= 3.0 - 1e-15 && u.i2 >= 3.0 - 1e-15);
            let s = invariants_shear(g).unwrap();
            prop_assert!(s.i1 >= 3.0);
            if g > 0.0 { prop_assert!(s.i1 > 3.0); }
            if (l - 1.0).abs() > 1e-4 { prop_assert!(u.i1 > 3.0 && u.i2 > 3.0); }
        }

        #[test]
        fn piola_identity_map(vals in proptest::array::uniform9(-10.0f64..10.0)) {
            let sigma = [[vals[0], vals[1], vals[2]], [vals[3], vals[4], vals[5]], [vals[6], vals[7], vals[8]]];
            let p = piola_transform(&sigma, &IDENTITY).unwrap();
            prop_assert_eq!(p, sigma);
        }
    }
}
