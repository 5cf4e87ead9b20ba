//! Stress–strain datasets: CSV ingestion, serialization, and synthetic
//! ground-truth generation.
//!
//! The CSV schema is `mode,control,stress_kpa` with a mandatory header, `#`
//! comment lines, and modes `ten` (λ ≥ 1), `com` (0 < λ ≤ 1) and `shr`
//! (γ ≥ 0). Compression is written with λ < 1 and negative stress.

use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::energy::{feasibility_bound, ModelSpec};
use crate::error::{Error, Result};
use crate::kinematics::LoadingMode;
use crate::stress::predict_curve;

pub const CSV_HEADER: [&str; 3] = ["mode", "control", "stress_kpa"];

/// Observations for one loading mode, sorted by control.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub mode: LoadingMode,
    pub controls: Vec<f64>,
    pub stresses: Vec<f64>,
}

impl Series {
    pub fn new(mode: LoadingMode, controls: Vec<f64>, stresses: Vec<f64>) -> Self {
        Series {
            mode,
            controls,
            stresses,
        }
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.controls
            .iter()
            .copied()
            .zip(self.stresses.iter().copied())
    }

    fn validate(&self) -> Result<()> {
        let tag = self.mode.tag();
        if self.controls.len() != self.stresses.len() {
            return Err(Error::Domain(format!(
                "{tag}: {} controls but {} stresses",
                self.controls.len(),
                self.stresses.len()
            )));
        }
        if self.len() < 2 {
            return Err(Error::Domain(format!(
                "{tag}: a series needs at least 2 points, found {}",
                self.len()
            )));
        }
        for (&c, &s) in self.controls.iter().zip(&self.stresses) {
            if !self.mode.admits(c) {
                return Err(Error::Domain(format!(
                    "{tag}: control {c} rejected ({})",
                    self.mode.admissible_range()
                )));
            }
            if !s.is_finite() {
                return Err(Error::Domain(format!(
                    "{tag}: stress at control {c} is not finite"
                )));
            }
        }
        if let Some(w) = self.controls.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "{tag}: controls must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(())
    }
}

/// Immutable collection of per-mode series in canonical mode order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    series: Vec<Series>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(mut series: Vec<Series>, provenance: impl Into<String>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Domain("dataset has no series".into()));
        }
        series.sort_by_key(|s| s.mode);
        if let Some(w) = series.windows(2).find(|w| w[0].mode == w[1].mode) {
            return Err(Error::Domain(format!("mode {} appears twice", w[0].mode)));
        }
        for s in &series {
            s.validate()?;
        }
        Ok(Dataset {
            series,
            provenance: provenance.into(),
        })
    }

    pub fn series(&self) -> &[Series] {
        &self.series
    }

    pub fn get(&self, mode: LoadingMode) -> Option<&Series> {
        self.series.iter().find(|s| s.mode == mode)
    }

    pub fn modes(&self) -> Vec<LoadingMode> {
        self.series.iter().map(|s| s.mode).collect()
    }

    pub fn n_points(&self) -> usize {
        self.series.iter().map(Series::len).sum()
    }

    /// The sub-dataset holding only `modes`; every requested mode must exist.
    pub fn restrict(&self, modes: &[LoadingMode]) -> Result<Dataset> {
        let series = modes
            .iter()
            .map(|&m| {
                self.get(m)
                    .cloned()
                    .ok_or_else(|| Error::Domain(format!("training mode absent from dataset: {m}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(series, self.provenance.clone())
    }

    /// Sign-sanity findings: tension stress should be ≥ 0, compression ≤ 0.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.series {
            let bad = s
                .points()
                .filter(|&(_, p)| match s.mode {
                    LoadingMode::UniaxialTension => p < 0.0,
                    LoadingMode::UniaxialCompression => p > 0.0,
                    LoadingMode::SimpleShear => false,
                })
                .count();
            if bad > 0 {
                let expected = if s.mode == LoadingMode::UniaxialTension {
                    "negative"
                } else {
                    "positive"
                };
                out.push(format!("{}: {bad} point(s) with {expected} stress", s.mode));
            }
        }
        out
    }

    /// Serialize in the CSV schema. Floats use the shortest representation
    /// that parses back to the same bits.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for s in &self.series {
            for (c, p) in s.points() {
                out.push_str(&format!("{},{c},{p}\n", s.mode.tag()));
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, path.display().to_string())
}

/// Parse the dataset CSV schema from any reader.
pub fn parse_csv(reader: impl Read, provenance: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Err(Error::Domain("empty file".into()));
    }
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut rows: Vec<(LoadingMode, f64, f64, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 fields, found {}",
                record.len()
            )));
        }
        let mode: LoadingMode = record[0]
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        let control: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(format!("bad control `{}`", &record[1])))?;
        let stress: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(format!("bad stress `{}`", &record[2])))?;
        if !stress.is_finite() {
            return Err(parse_err(format!("stress `{}` is not finite", &record[2])));
        }
        // P12 is odd in γ: fold negative shear onto γ ≥ 0.
        let (control, stress) = if mode == LoadingMode::SimpleShear && control < 0.0 {
            (-control, -stress)
        } else {
            (control, stress)
        };
        if !mode.admits(control) {
            return Err(parse_err(format!(
                "control {control} rejected: {}",
                mode.admissible_range()
            )));
        }
        rows.push((mode, control, stress, line));
    }
    if rows.is_empty() {
        return Err(Error::Domain("empty file: no data rows".into()));
    }

    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if let Some(w) = rows
        .windows(2)
        .find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1)
    {
        return Err(Error::Parse {
            line: w[0].3.max(w[1].3),
            message: format!("duplicate {} control {}", w[0].0, w[0].1),
        });
    }

    let mut series: Vec<Series> = Vec::new();
    for (mode, control, stress, _) in rows {
        match series.last_mut() {
            Some(s) if s.mode == mode => {
                s.controls.push(control);
                s.stresses.push(stress);
            }
            _ => series.push(Series::new(mode, vec![control], vec![stress])),
        }
    }
    Dataset::new(series, provenance)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Ground-truth model, control grids, and relative Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub truth: ModelSpec,
    pub grids: Vec<(LoadingMode, Vec<f64>)>,
    /// Standard deviation of the multiplicative noise `ε` in `P·(1 + ε)`.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Build grids from one uniaxial grid (split at λ = 1, which counts as
    /// tension) and one shear grid. Empty grids are skipped.
    pub fn from_grids(
        truth: ModelSpec,
        uniaxial: &[f64],
        shear: &[f64],
        noise: f64,
        seed: u64,
    ) -> Self {
        SyntheticSpec {
            truth,
            grids: split_uniaxial_and_shear(uniaxial, shear),
            noise,
            seed,
        }
    }
}

pub fn split_uniaxial_and_shear(uniaxial: &[f64], shear: &[f64]) -> Vec<(LoadingMode, Vec<f64>)> {
    let (ten, com): (Vec<f64>, Vec<f64>) = uniaxial.iter().partition(|&&l| l >= 1.0);
    [
        (LoadingMode::UniaxialTension, ten),
        (LoadingMode::UniaxialCompression, com),
        (LoadingMode::SimpleShear, shear.to_vec()),
    ]
    .into_iter()
    .filter(|(_, g)| !g.is_empty())
    .collect()
}

/// Sample `truth` on the grids, then apply seeded relative noise. Noise 0
/// reproduces the model curves exactly.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(Error::Parameter(format!(
            "noise must be finite and non-negative, got {}",
            spec.noise
        )));
    }
    let (x1, x2) = spec
        .grids
        .iter()
        .map(|(mode, grid)| extrema_over(*mode, grid))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0f64, 0.0f64), |(a, b), (c, d)| (a.max(c), b.max(d)));
    let feas = feasibility_bound(&spec.truth, x1, x2);
    if !feas.feasible {
        let kinds: Vec<String> = feas
            .violations
            .iter()
            .map(|v| format!("term {} (inner {} > limit {})", v.kind, v.inner, v.limit))
            .collect();
        return Err(Error::Feasibility(format!(
            "truth model leaves the log domain on the grid: {}",
            kinds.join(", ")
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut series = Vec::with_capacity(spec.grids.len());
    let mut grids = spec.grids.clone();
    grids.sort_by_key(|(m, _)| *m);
    for (mode, grid) in grids {
        let pred = predict_curve(&spec.truth, mode, &grid)?;
        let stresses = pred
            .stresses
            .iter()
            .map(|&p| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if spec.noise == 0.0 {
                    p
                } else {
                    p * (1.0 + spec.noise * z)
                }
            })
            .collect();
        series.push(Series::new(mode, grid, stresses));
    }
    Dataset::new(
        series,
        format!("synthetic(seed={}, noise={})", spec.seed, spec.noise),
    )
}

/// `(max(I1 − 3), max(I2 − 3))` over the controls of one mode.
pub fn extrema_over(mode: LoadingMode, controls: &[f64]) -> Result<(f64, f64)> {
    controls.iter().try_fold((0.0f64, 0.0f64), |(a, b), &c| {
        let st = mode.state(c)?;
        Ok((a.max(st.i1 - 3.0), b.max(st.i2 - 3.0)))
    })
}

/// `(max(I1 − 3), max(I2 − 3))` over every point of the dataset.
pub fn invariant_extrema(dataset: &Dataset) -> (f64, f64) {
    dataset
        .series()
        .iter()
        .map(|s| extrema_over(s.mode, &s.controls).expect("validated controls"))
        .fold((0.0, 0.0), |(a, b), (c, d)| {
            (f64::max(a, c), f64::max(b, d))
        })
}
