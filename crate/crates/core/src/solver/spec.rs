//! Problem files.
//!
//! ```toml
//! [time]
//! horizon = 1.0
//! cells = 64
//! hurst = 0.75
//!
//! [space]
//! dimension = 1
//! half_width = 8.0
//! points = 64
//!
//! [initial]
//! profile = { kind = "mode", wavenumber = [2], amplitude = 1.0 }
//!
//! [[forcing]]
//! interval = [0.0, 0.5]
//! probability = 0.5
//! profile = { kind = "gaussian", center = [1.0], width = 0.8, amplitude = 1.0 }
//!
//! [[noise]]
//! [[noise.term]]
//! interval = [0.25, 1.0]
//! profile = { kind = "gaussian", center = [0.0], width = 1.0, amplitude = 1.0 }
//! functional = { monomials = [[1.0, [1]]], args = [[[0.0, 0.25, 1.0]]] }
//!
//! [run]
//! seed = 11
//! replicates = 4
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fbm::{HurstIndex, TimeGrid};
use crate::malliavin::{build_process, ElementaryProcess, NoiseSpec};
use crate::spectral::{GridField, SpatialGrid};

/// Closed-form spatial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldProfile {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · exp(-|x - center|² / (2 width²))`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude · cos(π k·x / L + phase)`: an eigenfunction of `Δ` on the torus.
    Mode {
        wavenumber: Vec<i64>,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldProfile {
    pub fn field(&self, grid: SpatialGrid) -> Result<GridField> {
        let d = grid.dimension();
        let coord = |v: &[f64], name: &'static str| -> Result<[f64; 2]> {
            if v.len() != d {
                return Err(invalid(name, format!("{} components for dimension {d}", v.len())));
            }
            Ok([v[0], v.get(1).copied().unwrap_or(0.0)])
        };
        Ok(match self {
            Self::Zero => GridField::zeros(grid),
            Self::Constant { value } => GridField::constant(grid, *value),
            Self::Gaussian { center, width, amplitude } => {
                if !(*width > 0.0) {
                    return Err(invalid("width", format!("must be positive, got {width}")));
                }
                let c = coord(center, "center")?;
                let (a, w) = (*amplitude, *width);
                GridField::from_fn(grid, move |x| {
                    let r2: f64 = (0..d).map(|i| (x[i] - c[i]).powi(2)).sum();
                    a * (-r2 / (2.0 * w * w)).exp()
                })
            }
            Self::Mode { wavenumber, amplitude, phase } => {
                let kf: Vec<f64> = wavenumber.iter().map(|&k| k as f64).collect();
                let k = coord(&kf, "wavenumber")?;
                let s = PI / grid.half_width();
                let (a, ph) = (*amplitude, *phase);
                GridField::from_fn(grid, move |x| a * (s * (0..d).map(|i| k[i] * x[i]).sum::<f64>() + ph).cos())
            }
        })
    }

    /// Field that must be negligible outside the central half of the torus.
    pub fn central_field(&self, grid: SpatialGrid) -> Result<GridField> {
        let f = self.field(grid)?;
        let half = grid.half_width() / 2.0;
        let peak = f.max_abs();
        let outside = f
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| grid.node(*i)[..grid.dimension()].iter().any(|x| x.abs() > half))
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        if outside > 1e-6 * peak.max(f64::MIN_POSITIVE) {
            return Err(invalid(
                "profile",
                format!("{self:?} reaches {outside:.3e} outside the central half of the torus"),
            ));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub cells: usize,
    pub hurst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub dimension: usize,
    pub half_width: f64,
    pub points: usize,
}

fn certain() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub profile: FieldProfile,
    /// Probability of the event multiplying the initial datum.
    #[serde(default = "certain")]
    pub probability: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { profile: FieldProfile::Zero, probability: 1.0 }
    }
}

/// `1_A · 1_{(a, b]}(t) · profile(x)` with `P(A) = probability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub interval: [f64; 2],
    pub profile: FieldProfile,
    #[serde(default = "certain")]
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    #[serde(default = "one_replicate")]
    pub replicates: usize,
}

fn one_replicate() -> usize {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, replicates: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub time: TimeSection,
    pub space: SpaceSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub forcing: Vec<ForcingSpec>,
    #[serde(default)]
    pub noise: Vec<NoiseSpec<FieldProfile>>,
    #[serde(default)]
    pub run: RunSection,
}

impl ProblemSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Format { what: "problem file", reason: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&s)
    }

    pub fn with_cells(&self, cells: usize) -> Self {
        let mut s = self.clone();
        s.time.cells = cells;
        s
    }

    pub fn build(&self) -> Result<Problem> {
        let time = TimeGrid::new(self.time.horizon, self.time.cells)?;
        let hurst = HurstIndex::new(self.time.hurst)?;
        let space = SpatialGrid::new(self.space.dimension, self.space.half_width, self.space.points)?;
        let prob = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(invalid("probability", format!("must lie in [0, 1], got {p}")))
            }
        };
        let initial = self.initial.profile.field(space)?;
        let initial_probability = prob(self.initial.probability)?;
        let forcing = self
            .forcing
            .iter()
            .map(|f| {
                let (start, end) = time.cell_range(f.interval[0], f.interval[1])?;
                Ok(Forcing { start, end, field: f.profile.field(space)?, probability: prob(f.probability)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let noise = build_process(time, hurst, &self.noise, |p: &FieldProfile| p.central_field(space))?;
        Ok(Problem {
            time,
            hurst,
            space,
            initial,
            initial_probability,
            forcing,
            noise,
            seed: self.run.seed,
            replicates: self.run.replicates,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Forcing {
    pub start: usize,
    pub end: usize,
    pub field: GridField,
    pub probability: f64,
}

/// A validated problem on concrete grids.
#[derive(Debug, Clone)]
pub struct Problem {
    pub time: TimeGrid,
    pub hurst: HurstIndex,
    pub space: SpatialGrid,
    pub initial: GridField,
    pub initial_probability: f64,
    pub forcing: Vec<Forcing>,
    pub noise: ElementaryProcess<GridField>,
    pub seed: u64,
    pub replicates: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
[time]
horizon = 1.0
cells = 8
hurst = 0.75
[space]
dimension = 1
half_width = 12.0
points = 64
[initial]
profile = { kind = "mode", wavenumber = [2] }
[[forcing]]
interval = [0.0, 0.5]
probability = 0.5
profile = { kind = "constant", value = 1.0 }
[[noise]]
[[noise.term]]
interval = [0.25, 1.0]
profile = { kind = "gaussian", center = [0.0], width = 1.0 }
functional = { monomials = [[1.0, [1]]], args = [[[0.0, 0.25, 1.0]]] }
[run]
seed = 3
"#;

    #[test]
    fn parses_and_builds() {
        let p = ProblemSpec::from_toml_str(SPEC).unwrap().build().unwrap();
        assert_eq!(p.noise.noise_count(), 1);
        assert_eq!(p.forcing[0].end, 4);
        assert_eq!(p.replicates, 1);
        assert!((p.initial.values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_wide_noise_profiles_and_bad_data() {
        let wide = SPEC.replace("width = 1.0", "width = 3.0");
        assert!(ProblemSpec::from_toml_str(&wide).unwrap().build().is_err());
        let bad = SPEC.replace("probability = 0.5", "probability = 1.5");
        assert!(ProblemSpec::from_toml_str(&bad).unwrap().build().is_err());
        let h = SPEC.replace("hurst = 0.75", "hurst = 0.25");
        assert!(ProblemSpec::from_toml_str(&h).unwrap().build().is_err());
        assert!(ProblemSpec::from_toml_str("[time]\nhorizon = 1.0").is_err());
    }
}
