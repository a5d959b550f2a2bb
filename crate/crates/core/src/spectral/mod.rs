//! Periodic fields on the torus `[-L, L)^d`, `d ∈ {1, 2}`, and the Fourier
//! multipliers acting on them: the heat semigroup `T_t`, Bessel potentials
//! `(1 - Δ)^{n/2}`, derivatives, and the Sobolev norms built from them.
//!
//! Frequencies follow the symmetric band `-M/2 ≤ k < M/2` with `ξ = πk/L`.
//! Discrete integrals are cell-volume weighted sums over nodes.

mod fft;
mod io;

use std::f64::consts::PI;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::Coefficient;

pub use io::{read_field, read_field_csv, write_field, write_field_csv};

/// Uniform periodic grid with `M` points per axis, nodes `x_j = -L + 2Lj/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    dimension: usize,
    half_width: f64,
    points: usize,
}

impl SpatialGrid {
    pub fn new(dimension: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(dimension == 1 || dimension == 2) {
            return Err(invalid("dimension", format!("must be 1 or 2, got {dimension}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid("half_width", format!("must be positive, got {half_width}")));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(invalid("points", format!("must be a power of two, got {points}")));
        }
        Ok(Self { dimension, half_width, points })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Total number of nodes `M^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dimension as i32)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dimension as i32)
    }

    pub fn axis_node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    /// Coordinates of flat node `idx` (last axis fastest).
    pub fn node(&self, idx: usize) -> [f64; 2] {
        match self.dimension {
            1 => [self.axis_node(idx), 0.0],
            _ => [self.axis_node(idx / self.points), self.axis_node(idx % self.points)],
        }
    }

    /// Signed wavenumber of axis index `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let m = self.points as i64;
        let j = j as i64;
        if j < m / 2 {
            j
        } else {
            j - m
        }
    }

    /// Angular frequency `ξ` of flat spectral index `idx`, per axis.
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        let w = |j: usize| PI * self.wavenumber(j) as f64 / self.half_width;
        match self.dimension {
            1 => [w(idx), 0.0],
            _ => [w(idx / self.points), w(idx % self.points)],
        }
    }

    pub fn frequency_sq(&self, idx: usize) -> f64 {
        let [a, b] = self.frequency(idx);
        a * a + b * b
    }

    /// Whether flat index `idx` sits on the Nyquist line of `axis`.
    pub fn is_nyquist(&self, idx: usize, axis: usize) -> bool {
        let j = match (self.dimension, axis) {
            (1, _) => idx,
            (_, 0) => idx / self.points,
            _ => idx % self.points,
        };
        j == self.points / 2
    }

    pub fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("spatial grid {self:?} vs {other:?}")))
        }
    }
}

/// Real field on a [`SpatialGrid`] with a lazily computed spectrum.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: SpatialGrid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for GridField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl GridField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("values", format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values, spectrum: OnceLock::new() })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: SpatialGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()], spectrum: OnceLock::new() }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self { grid, values, spectrum: OnceLock::new() }
    }

    /// Real part of the inverse transform of `spectrum`.
    pub fn from_spectrum(grid: SpatialGrid, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(invalid("spectrum", format!("{} modes for {} nodes", spectrum.len(), grid.len())));
        }
        Ok(Self {
            grid,
            values: fft::inverse_real(&grid, spectrum),
            spectrum: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Unnormalized forward transform of the values.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| fft::forward(&self.grid, &self.values))
    }

    /// `Σ_x v(x) ΔV`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
            spectrum: OnceLock::new(),
        }
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &GridField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
            spectrum: OnceLock::new(),
        })
    }

    pub fn add(&self, other: &GridField) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &GridField) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Largest absolute nodal difference.
    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Applies a real, even Fourier multiplier `m(ξ)`.
    pub fn multiply(&self, m: impl Fn(&SpatialGrid, usize) -> f64) -> Self {
        let spectrum = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(i, z)| z * m(&self.grid, i))
            .collect();
        Self::from_spectrum(self.grid, spectrum).expect("sizes agree")
    }

    /// `L_p` norm, `1 ≤ p < ∞`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_of(&self.values, self.grid.cell_volume(), p)
    }
}

fn lp_of(values: &[f64], dv: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("must be finite and at least 1, got {p}")));
    }
    let s: f64 = if p == 2.0 {
        values.iter().map(|v| v * v).sum()
    } else {
        values.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((s * dv).powf(1.0 / p))
}

/// `L₂` pairing `∫ u v dx` on one grid.
impl Coefficient for GridField {
    fn dot(&self, other: &Self) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume())
    }
}

/// `K` fields on one grid: an `l₂`-valued field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSequence {
    grid: SpatialGrid,
    fields: Vec<GridField>,
}

impl FieldSequence {
    pub fn new(fields: Vec<GridField>) -> Result<Self> {
        let first = fields.first().ok_or_else(|| invalid("fields", "need at least one component"))?;
        let grid = first.grid;
        for f in &fields {
            grid.check_same(&f.grid)?;
        }
        Ok(Self { grid, fields })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn fields(&self) -> &[GridField] {
        &self.fields
    }

    /// Pointwise `|v(x)|_{l₂}`.
    pub fn pointwise_l2(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| self.fields.iter().map(|f| f.values[i].powi(2)).sum::<f64>().sqrt())
            .collect()
    }
}

/// `G_t(x) = (4πt)^{-d/2} exp(-|x|²/(4t))` on `ℝ^d`, `d = x.len()`.
pub fn heat_kernel(t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", format!("heat kernel needs t > 0, got {t}")));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((4.0 * PI * t).powf(-(x.len() as f64) / 2.0) * (-r2 / (4.0 * t)).exp())
}

/// `T_t u`: spectrum times `exp(-t|ξ|²)`.
pub fn semigroup_apply(u: &GridField, t: f64) -> Result<GridField> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("semigroup time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    Ok(u.multiply(|g, i| (-t * g.frequency_sq(i)).exp()))
}

/// `(1 - Δ)^{n/2} u`.
pub fn bessel_potential(u: &GridField, n: f64) -> GridField {
    if n == 0.0 {
        return u.clone();
    }
    u.multiply(|g, i| (1.0 + g.frequency_sq(i)).powf(n / 2.0))
}

/// `‖u‖_{H_p^n} = ‖(1 - Δ)^{n/2} u‖_{L_p}`.
pub fn sobolev_norm(u: &GridField, n: f64, p: f64) -> Result<f64> {
    bessel_potential(u, n).lp_norm(p)
}

/// `(u, φ) = ∫ [(1 - Δ)^{n/2} u] [(1 - Δ)^{-n/2} φ] dx`.
pub fn pairing(u: &GridField, phi: &GridField, n: f64) -> Result<f64> {
    u.grid.check_same(&phi.grid)?;
    bessel_potential(u, n).dot(&bessel_potential(phi, -n))
}

/// `‖ |(1 - Δ)^{n/2} u|_{l₂} ‖_{L_p}`.
pub fn sequence_sobolev_norm(u: &FieldSequence, n: f64, p: f64) -> Result<f64> {
    let images = FieldSequence {
        grid: u.grid,
        fields: u.fields.iter().map(|f| bessel_potential(f, n)).collect(),
    };
    lp_of(&images.pointwise_l2(), u.grid.cell_volume(), p)
}

/// Spectral gradient `(∂_1 u, ..., ∂_d u)`; Nyquist modes are dropped.
pub fn gradient_field(u: &GridField) -> Vec<GridField> {
    let grid = u.grid;
    (0..grid.dimension())
        .map(|axis| {
            let spectrum = u
                .spectrum()
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    if grid.is_nyquist(i, axis) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        z * Complex64::new(0.0, grid.frequency(i)[axis])
                    }
                })
                .collect();
            GridField::from_spectrum(grid, spectrum).expect("sizes agree")
        })
        .collect()
}

/// `Δu`: spectrum times `-|ξ|²`.
pub fn laplacian(u: &GridField) -> GridField {
    u.multiply(|g, i| -g.frequency_sq(i))
}

/// Weights `k_t` with `T_t u(x) = Σ_y k_t(x - y) u(y)`, centered at node 0 index.
pub fn discrete_heat_weights(grid: SpatialGrid, t: f64) -> Result<Vec<f64>> {
    let mut delta = vec![0.0; grid.len()];
    delta[0] = 1.0;
    Ok(semigroup_apply(&GridField::new(grid, delta)?, t)?.into_values())
}

/// Reference `T_t u` by direct convolution with the periodized kernel
/// `Σ_n G_t(x + 2Ln)`, summed over `|n| ≤ images`.
pub fn wrapped_kernel_convolution(u: &GridField, t: f64, images: i64) -> Result<GridField> {
    let grid = u.grid;
    let period = 2.0 * grid.half_width();
    let dv = grid.cell_volume();
    let d = grid.dimension();
    let mut out = vec![0.0; grid.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let xi = grid.node(i);
        let mut s = 0.0;
        for (j, uj) in u.values.iter().enumerate() {
            if *uj == 0.0 {
                continue;
            }
            let yj = grid.node(j);
            let mut g = 0.0;
            for n0 in -images..=images {
                let a = xi[0] - yj[0] + n0 as f64 * period;
                if d == 1 {
                    g += heat_kernel(t, &[a])?;
                } else {
                    for n1 in -images..=images {
                        let b = xi[1] - yj[1] + n1 as f64 * period;
                        g += heat_kernel(t, &[a, b])?;
                    }
                }
            }
            s += g * uj;
        }
        *o = s * dv;
    }
    GridField::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> SpatialGrid {
        SpatialGrid::new(1, 8.0, 64).unwrap()
    }

    fn mode(grid: SpatialGrid, k: i64) -> GridField {
        let w = PI * k as f64 / grid.half_width();
        GridField::from_fn(grid, |x| (w * (x[0] + 0.3)).cos())
    }

    #[test]
    fn grid_validation() {
        assert!(SpatialGrid::new(3, 1.0, 8).is_err());
        assert!(SpatialGrid::new(1, 1.0, 12).is_err());
        assert!(SpatialGrid::new(1, -1.0, 8).is_err());
        let g = SpatialGrid::new(2, 4.0, 16).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.node(17), [-3.5, -3.5]);
        assert_eq!(g.wavenumber(8), -8);
    }

    #[test]
    fn spectrum_roundtrip() {
        for g in [g1(), SpatialGrid::new(2, 3.0, 16).unwrap()] {
            let u = GridField::from_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp() + 0.1 * x[0].sin());
            let back = GridField::from_spectrum(g, u.spectrum().to_vec()).unwrap();
            assert!(back.max_abs_diff(&u).unwrap() <= 1e-12 * u.max_abs());
        }
    }

    #[test]
    fn heat_kernel_values() {
        let t = 0.3;
        assert!((heat_kernel(t, &[0.0]).unwrap() - (4.0 * PI * t).powf(-0.5)).abs() < 1e-15);
        assert_eq!(heat_kernel(t, &[0.7]).unwrap(), heat_kernel(t, &[-0.7]).unwrap());
        assert!(heat_kernel(0.0, &[0.0]).is_err());
        let g = SpatialGrid::new(1, 10.0, 2048).unwrap();
        let mass = GridField::from_fn(g, |x| heat_kernel(t, &x[..1]).unwrap()).integral();
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn semigroup_on_modes() {
        let g = g1();
        let c = GridField::constant(g, 2.5);
        assert!(semigroup_apply(&c, 3.0).unwrap().max_abs_diff(&c).unwrap() < 1e-14);
        let e = mode(g, 3);
        let lam = (PI * 3.0 / 8.0f64).powi(2);
        let got = semigroup_apply(&e, 0.7).unwrap();
        assert!(got.max_abs_diff(&e.scaled((-0.7 * lam).exp())).unwrap() < 1e-13);
        assert!(semigroup_apply(&e, -1.0).is_err());
    }

    #[test]
    fn bessel_on_mode_matches_laplacian() {
        let g = g1();
        let e = mode(g, 5);
        let b = bessel_potential(&e, 2.0);
        let direct = e.sub(&laplacian(&e)).unwrap();
        assert!(b.max_abs_diff(&direct).unwrap() < 1e-12);
        assert_eq!(bessel_potential(&e, 0.0), e);
    }

    #[test]
    fn constant_sobolev_norm() {
        let g = SpatialGrid::new(2, 2.0, 8).unwrap();
        let c = GridField::constant(g, -1.5);
        for p in [2.0, 4.0] {
            let n = sobolev_norm(&c, 1.7, p).unwrap();
            assert!((n - 1.5 * 16f64.powf(1.0 / p)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_mode_and_constant() {
        let g = g1();
        let w = PI * 4.0 / 8.0;
        let s = GridField::from_fn(g, |x| (w * x[0]).sin());
        let d = gradient_field(&s);
        let expected = GridField::from_fn(g, |x| w * (w * x[0]).cos());
        assert!(d[0].max_abs_diff(&expected).unwrap() < 1e-12);
        assert!(gradient_field(&GridField::constant(g, 3.0))[0].max_abs() < 1e-14);
    }

    #[test]
    fn sequence_norm_scaling() {
        let g = g1();
        let u = GridField::from_fn(g, |x| (-x[0] * x[0]).exp());
        let one = sequence_sobolev_norm(&FieldSequence::new(vec![u.clone()]).unwrap(), 1.0, 4.0).unwrap();
        assert!((one - sobolev_norm(&u, 1.0, 4.0).unwrap()).abs() < 1e-14);
        let two = sequence_sobolev_norm(&FieldSequence::new(vec![u.clone(), u]).unwrap(), 1.0, 4.0).unwrap();
        assert!((two - 2f64.sqrt() * one).abs() < 1e-13);
    }

    #[test]
    fn discrete_weights_have_unit_mass() {
        let w = discrete_heat_weights(g1(), 0.2).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }
}
