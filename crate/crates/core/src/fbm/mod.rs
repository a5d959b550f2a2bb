//! Fractional Brownian motion on a uniform time grid.
//!
//! Paths are sampled with their exact finite-dimensional law, either by a
//! dense Cholesky factor of the node covariance or by circulant embedding
//! of the fractional Gaussian noise followed by a cumulative sum.

mod io;

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, substream};

pub use io::{read_cache, read_csv, write_cache, write_csv};

/// Largest grid accepted by the dense factorization.
pub const MAX_CHOLESKY_CELLS: usize = 4096;

const ALIGN_TOL: f64 = 1e-9;

/// Uniform partition `t_j = j T / m` of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    cells: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, cells: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("horizon", format!("must be positive, got {horizon}")));
        }
        if cells == 0 {
            return Err(invalid("cells", "must be at least 1"));
        }
        Ok(Self { horizon, cells })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.cells as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.cells {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|j| self.node(j)).collect()
    }

    pub fn cell_midpoint(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dt()
    }

    /// Index of the node at time `t`, if `t` lies on the grid.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let j = x.round();
        if j < 0.0 || j > self.cells as f64 {
            return None;
        }
        ((x - j).abs() <= ALIGN_TOL * (1.0 + x.abs())).then_some(j as usize)
    }

    /// Cell range `[start, end)` covering the interval `(a, b]`.
    pub fn cell_range(&self, a: f64, b: f64) -> Result<(usize, usize)> {
        let misaligned = || Error::Misaligned { a, b, dt: self.dt() };
        let start = self.node_index(a).ok_or_else(misaligned)?;
        let end = self.node_index(b).ok_or_else(misaligned)?;
        if end < start {
            return Err(invalid("interval", format!("({a}, {b}] has b < a")));
        }
        Ok((start, end))
    }

    pub fn check_same(&self, other: &TimeGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "T={} m={} vs T={} m={}",
                self.horizon, self.cells, other.horizon, other.cells
            )))
        }
    }

    /// Grid with `factor` times fewer cells over the same horizon.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.cells.is_multiple_of(factor) {
            return Err(invalid("factor", format!("{factor} does not divide {}", self.cells)));
        }
        Self::new(self.horizon, self.cells / factor)
    }
}

/// Hurst index restricted to the regular regime `1/2 < H < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.5 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::HurstOutOfRange(h))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

impl fmt::Display for HurstIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn covariance(t: f64, s: f64, hurst: HurstIndex) -> Result<f64> {
    if t < 0.0 || s < 0.0 {
        return Err(Error::Domain(format!("times must be nonnegative, got ({t}, {s})")));
    }
    let e = 2.0 * hurst.value();
    Ok(0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)))
}

/// `E[(β_b - β_a)(β_d - β_c)]`, the closed form of the kernel integral over
/// the rectangle `(a,b] x (c,d]`.
pub fn increment_covariance(a: f64, b: f64, c: f64, d: f64, hurst: HurstIndex) -> f64 {
    let e = 2.0 * hurst.value();
    let p = |x: f64| x.abs().powf(e);
    0.5 * (p(b - c) + p(a - d) - p(a - c) - p(b - d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Cholesky,
    Circulant,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(Self::Cholesky),
            "circulant" => Ok(Self::Circulant),
            other => Err(invalid("method", format!("unknown sampler `{other}` (cholesky|circulant)"))),
        }
    }
}

/// One fBm sample path, stored at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub grid: TimeGrid,
    pub hurst: HurstIndex,
    pub values: Vec<f64>,
}

impl FbmPath {
    pub fn increment(&self, j: usize) -> f64 {
        self.values[j + 1] - self.values[j]
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Keep every `factor`-th node.
    pub fn coarsen(&self, factor: usize) -> Result<FbmPath> {
        let grid = self.grid.coarsen(factor)?;
        let values = self.values.iter().step_by(factor).copied().collect();
        Ok(FbmPath { grid, hurst: self.hurst, values })
    }
}

/// `K` independent paths on one grid; path `k` houses the noise `β^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmEnsemble {
    pub grid: TimeGrid,
    pub hurst: HurstIndex,
    pub seed: u64,
    pub streams: Vec<u64>,
    pub paths: Vec<FbmPath>,
    pub method: SamplerKind,
    /// Set when circulant embedding failed and the dense factor was used instead.
    pub fallback: Option<String>,
}

impl FbmEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn coarsen(&self, factor: usize) -> Result<FbmEnsemble> {
        let paths = self.paths.iter().map(|p| p.coarsen(factor)).collect::<Result<Vec<_>>>()?;
        Ok(FbmEnsemble {
            grid: self.grid.coarsen(factor)?,
            paths,
            ..self.clone()
        })
    }
}

enum Engine {
    Cholesky {
        /// Row-major lower factor of the covariance of `(β_{t_1}, ..., β_{t_m})`.
        lower: Vec<f64>,
    },
    Circulant {
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
}

/// Precomputed sampler for one `(grid, H)` pair.
pub struct FbmGenerator {
    grid: TimeGrid,
    hurst: HurstIndex,
    engine: Engine,
    fallback: Option<String>,
}

impl fmt::Debug for FbmGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FbmGenerator")
            .field("grid", &self.grid)
            .field("hurst", &self.hurst)
            .field("kind", &self.kind())
            .field("fallback", &self.fallback)
            .finish()
    }
}

impl FbmGenerator {
    pub fn new(kind: SamplerKind, grid: TimeGrid, hurst: HurstIndex) -> Result<Self> {
        match kind {
            SamplerKind::Cholesky => Self::cholesky(grid, hurst, false),
            SamplerKind::Circulant => Self::circulant(grid, hurst),
        }
    }

    /// Dense factor of the node covariance. `jitter` adds `1e-12 T^{2H}` to the diagonal.
    pub fn cholesky(grid: TimeGrid, hurst: HurstIndex, jitter: bool) -> Result<Self> {
        let m = grid.cells();
        if m > MAX_CHOLESKY_CELLS {
            return Err(invalid(
                "cells",
                format!("{m} exceeds the dense factorization limit {MAX_CHOLESKY_CELLS}; use the circulant sampler"),
            ));
        }
        let shift = if jitter {
            1e-12 * grid.horizon().powf(2.0 * hurst.value())
        } else {
            0.0
        };
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let c = covariance(grid.node(i + 1), grid.node(j + 1), hurst)?;
                a[i * m + j] = c;
            }
            a[i * m + i] += shift;
        }
        // In-place Cholesky–Banachiewicz on the lower triangle.
        for i in 0..m {
            for j in 0..=i {
                let mut sum = a[i * m + j];
                for k in 0..j {
                    sum -= a[i * m + k] * a[j * m + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Factorization {
                            row: i,
                            hint: "covariance is not numerically positive definite; retry with jitter enabled or use a smaller grid".into(),
                        });
                    }
                    a[i * m + i] = sum.sqrt();
                } else {
                    a[i * m + j] = sum / a[j * m + j];
                }
            }
        }
        Ok(Self {
            grid,
            hurst,
            engine: Engine::Cholesky { lower: a },
            fallback: None,
        })
    }

    /// Circulant embedding of the increment sequence; falls back to the dense
    /// factor if the embedding has a negative eigenvalue.
    pub fn circulant(grid: TimeGrid, hurst: HurstIndex) -> Result<Self> {
        let m = grid.cells();
        let size = (2 * m).next_power_of_two();
        let e = 2.0 * hurst.value();
        let scale = grid.dt().powf(e);
        let gamma = |k: usize| {
            let k = k as f64;
            0.5 * scale * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
        };
        let mut row: Vec<Complex64> = (0..size)
            .map(|j| Complex64::new(gamma(j.min(size - j)), 0.0))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(size);
        fft.process(&mut row);
        let peak = row.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let most_negative = row.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if most_negative < -1e-10 * peak {
            let mut fallback = Self::cholesky(grid, hurst, true)?;
            fallback.fallback = Some(format!(
                "circulant embedding of size {size} has eigenvalue {most_negative:.3e}; used Cholesky"
            ));
            return Ok(fallback);
        }
        let n = size as f64;
        let scale = row.iter().map(|z| (z.re.max(0.0) / n).sqrt()).collect();
        Ok(Self {
            grid,
            hurst,
            engine: Engine::Circulant { scale, fft },
            fallback: None,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn kind(&self) -> SamplerKind {
        match self.engine {
            Engine::Cholesky { .. } => SamplerKind::Cholesky,
            Engine::Circulant { .. } => SamplerKind::Circulant,
        }
    }

    pub fn fallback(&self) -> Option<&str> {
        self.fallback.as_deref()
    }

    /// Path `index` of replicate `replicate`; a pure function of its arguments.
    pub fn path(&self, seed: u64, replicate: u64, index: u32) -> FbmPath {
        let m = self.grid.cells();
        let mut rng = substream(seed, replicate, index);
        let mut values = vec![0.0; m + 1];
        match &self.engine {
            Engine::Cholesky { lower } => {
                let mut z = vec![0.0; m];
                rng::fill_normal(&mut rng, &mut z);
                for i in 0..m {
                    let row = &lower[i * m..i * m + i + 1];
                    values[i + 1] = row.iter().zip(&z).map(|(l, z)| l * z).sum();
                }
            }
            Engine::Circulant { scale, fft } => {
                let size = scale.len();
                let mut noise = vec![0.0; 2 * size];
                rng::fill_normal(&mut rng, &mut noise);
                let mut w: Vec<Complex64> = scale
                    .iter()
                    .zip(noise.chunks_exact(2))
                    .map(|(s, z)| Complex64::new(s * z[0], s * z[1]))
                    .collect();
                fft.process(&mut w);
                let mut acc = 0.0;
                for j in 0..m {
                    acc += w[j].re;
                    values[j + 1] = acc;
                }
            }
        }
        FbmPath {
            grid: self.grid,
            hurst: self.hurst,
            values,
        }
    }

    /// `k` independent paths of one replicate.
    pub fn ensemble(&self, seed: u64, replicate: u64, k: usize) -> FbmEnsemble {
        let paths = (0..k as u32).map(|i| self.path(seed, replicate, i)).collect();
        FbmEnsemble {
            grid: self.grid,
            hurst: self.hurst,
            seed,
            streams: (0..k as u32).map(|i| rng::stream_id(replicate, i)).collect(),
            paths,
            method: self.kind(),
            fallback: self.fallback.clone(),
        }
    }
}

pub fn cholesky_sample(grid: TimeGrid, hurst: HurstIndex, n_paths: usize, seed: u64) -> Result<FbmEnsemble> {
    Ok(FbmGenerator::cholesky(grid, hurst, false)?.ensemble(seed, 0, n_paths))
}

pub fn circulant_sample(grid: TimeGrid, hurst: HurstIndex, n_paths: usize, seed: u64) -> Result<FbmEnsemble> {
    Ok(FbmGenerator::circulant(grid, hurst)?.ensemble(seed, 0, n_paths))
}
