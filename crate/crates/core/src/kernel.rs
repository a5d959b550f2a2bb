//! The fractional kernel `α_H |t - s|^{2H-2}` on step functions.
//!
//! Every cell-pair integral of the kernel is evaluated in closed form through
//! the increment covariance, so the singularity on the diagonal never meets
//! a quadrature rule. On a uniform grid the cell matrix is Toeplitz:
//! `W[j][j'] = Δt^{2H} γ(|j - j'|)` with
//! `γ(k) = ((k+1)^{2H} + |k-1|^{2H} - 2k^{2H}) / 2`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fbm::{increment_covariance, HurstIndex, TimeGrid};

/// `α_H = H(2H - 1)`.
pub fn alpha(h: f64) -> Result<f64> {
    let h = HurstIndex::new(h)?.value();
    Ok(h * (2.0 * h - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalKernel {
    pub hurst: HurstIndex,
    pub alpha: f64,
}

impl FractionalKernel {
    pub fn new(hurst: HurstIndex) -> Self {
        let h = hurst.value();
        Self { hurst, alpha: h * (2.0 * h - 1.0) }
    }

    /// Pointwise kernel value for `t != s`.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.alpha * (t - s).abs().powf(2.0 * self.hurst.value() - 2.0)
    }

    pub fn cells(&self, grid: TimeGrid) -> CellKernel {
        CellKernel::new(grid, self.hurst)
    }
}

/// Cell matrix of the kernel on one grid, stored by its first row.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKernel {
    grid: TimeGrid,
    hurst: HurstIndex,
    row: Vec<f64>,
}

impl CellKernel {
    pub fn new(grid: TimeGrid, hurst: HurstIndex) -> Self {
        let dt = grid.dt();
        let row = (0..grid.cells())
            .map(|k| {
                let (a, c) = (0.0, k as f64 * dt);
                increment_covariance(a, a + dt, c, c + dt, hurst)
            })
            .collect();
        Self { grid, hurst, row }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.row[j.abs_diff(k)]
    }

    /// `(W v)_j = Σ_k W[j][k] v_k`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let m = self.row.len();
        debug_assert_eq!(v.len(), m);
        (0..m)
            .map(|j| v.iter().enumerate().map(|(k, x)| self.row[j.abs_diff(k)] * x).sum())
            .collect()
    }

    /// `vᵀ W w`.
    pub fn bilinear(&self, v: &[f64], w: &[f64]) -> f64 {
        v.iter().zip(self.apply(w)).map(|(a, b)| a * b).sum()
    }

    /// `Σ_{k ∈ [start, end)} W[j][k]` for every `j`: the image of an indicator.
    pub fn apply_indicator(&self, start: usize, end: usize) -> Vec<f64> {
        (0..self.row.len())
            .map(|j| (start..end).map(|k| self.row[j.abs_diff(k)]).sum())
            .collect()
    }

    /// `tr(W A W Bᵀ)` for row-major `m x m` arrays: the tensor inner product.
    pub fn tensor_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let wa = self.sandwich(a);
        wa.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// `tr(W A W A)`: the pairing of `A` with its argument-swapped adjoint.
    pub fn adjoint_pairing(&self, a: &[f64]) -> f64 {
        let m = self.row.len();
        let wa = self.sandwich(a);
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += wa[i * m + j] * a[j * m + i];
            }
        }
        s
    }

    /// `W A W` for a row-major `m x m` array.
    fn sandwich(&self, a: &[f64]) -> Vec<f64> {
        let m = self.row.len();
        debug_assert_eq!(a.len(), m * m);
        let mut left = vec![0.0; m * m];
        for j in 0..m {
            let col: Vec<f64> = (0..m).map(|i| a[i * m + j]).collect();
            for (i, v) in self.apply(&col).into_iter().enumerate() {
                left[i * m + j] = v;
            }
        }
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            let r = self.apply(&left[i * m..(i + 1) * m]);
            out[i * m..(i + 1) * m].copy_from_slice(&r);
        }
        out
    }
}

/// Values a step function may carry: an inner-product space.
pub trait Coefficient: Clone {
    fn dot(&self, other: &Self) -> Result<f64>;

    fn norm(&self) -> f64 {
        self.dot(self).map(|v| v.max(0.0).sqrt()).unwrap_or(0.0)
    }
}

impl Coefficient for f64 {
    fn dot(&self, other: &Self) -> Result<f64> {
        Ok(self * other)
    }

    fn norm(&self) -> f64 {
        self.abs()
    }
}

/// Finite `l₂` sequences; missing trailing entries are zero.
impl Coefficient for Vec<f64> {
    fn dot(&self, other: &Self) -> Result<f64> {
        Ok(self.iter().zip(other).map(|(a, b)| a * b).sum())
    }
}

/// Piecewise-constant function on the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<V = f64> {
    grid: TimeGrid,
    coefficients: Vec<V>,
}

impl<V: Coefficient> StepFunction<V> {
    pub fn new(grid: TimeGrid, coefficients: Vec<V>) -> Result<Self> {
        if coefficients.len() != grid.cells() {
            return Err(invalid(
                "coefficients",
                format!("{} values for {} cells", coefficients.len(), grid.cells()),
            ));
        }
        Ok(Self { grid, coefficients })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn coefficients(&self) -> &[V] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<V> {
        self.coefficients
    }

    pub fn map<W: Coefficient>(&self, f: impl FnMut(&V) -> W) -> StepFunction<W> {
        StepFunction {
            grid: self.grid,
            coefficients: self.coefficients.iter().map(f).collect(),
        }
    }

    pub fn cell_norms(&self) -> Vec<f64> {
        self.coefficients.iter().map(Coefficient::norm).collect()
    }
}

impl StepFunction<f64> {
    pub fn zero(grid: TimeGrid) -> Self {
        Self { grid, coefficients: vec![0.0; grid.cells()] }
    }

    /// `c · 1_{(a, b]}` with grid-aligned endpoints.
    pub fn indicator(grid: TimeGrid, a: f64, b: f64, c: f64) -> Result<Self> {
        let (start, end) = grid.cell_range(a, b)?;
        let mut coefficients = vec![0.0; grid.cells()];
        coefficients[start..end].fill(c);
        Ok(Self { grid, coefficients })
    }

    /// Sum of weighted indicators `Σ c_i 1_{(a_i, b_i]}`.
    pub fn from_pieces(grid: TimeGrid, pieces: &[(f64, f64, f64)]) -> Result<Self> {
        let mut out = Self::zero(grid);
        for &(a, b, c) in pieces {
            let (start, end) = grid.cell_range(a, b)?;
            for v in &mut out.coefficients[start..end] {
                *v += c;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Coefficients on a grid `factor` times coarser; requires constancy on merged cells.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let mut coefficients = Vec::with_capacity(grid.cells());
        for chunk in self.coefficients.chunks(factor) {
            if chunk.iter().any(|v| *v != chunk[0]) {
                return Err(invalid("factor", "step function is not constant on the coarse cells"));
            }
            coefficients.push(chunk[0]);
        }
        Ok(Self { grid, coefficients })
    }
}

fn same_grid<V, W>(a: &StepFunction<V>, b: &StepFunction<W>) -> Result<()> {
    a.grid.check_same(&b.grid)
}

/// `⟨φ, ψ⟩_ℋ` with V-valued coefficients: `Σ_{j,j'} W[j][j'] ⟨φ_j, ψ_j'⟩_V`.
pub fn h_inner<V: Coefficient>(phi: &StepFunction<V>, psi: &StepFunction<V>, hurst: HurstIndex) -> Result<f64> {
    same_grid(phi, psi)?;
    let w = CellKernel::new(phi.grid, hurst);
    h_inner_with(&w, phi, psi)
}

/// [`h_inner`] with a prebuilt cell matrix.
pub fn h_inner_with<V: Coefficient>(w: &CellKernel, phi: &StepFunction<V>, psi: &StepFunction<V>) -> Result<f64> {
    same_grid(phi, psi)?;
    w.grid.check_same(&phi.grid)?;
    let mut total = 0.0;
    for (j, a) in phi.coefficients.iter().enumerate() {
        for (k, b) in psi.coefficients.iter().enumerate() {
            total += w.entry(j, k) * a.dot(b)?;
        }
    }
    Ok(total)
}

/// `‖φ‖_{|ℋ|}`: the kernel sum applied to cellwise V-norms.
pub fn abs_h_norm<V: Coefficient>(phi: &StepFunction<V>, hurst: HurstIndex) -> f64 {
    let w = CellKernel::new(phi.grid, hurst);
    let n = phi.cell_norms();
    w.bilinear(&n, &n).max(0.0).sqrt()
}

/// `(Σ_j ‖φ_j‖_V^q Δt)^{1/q}`.
pub fn lp_time_norm<V: Coefficient>(phi: &StepFunction<V>, q: f64) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(invalid("q", format!("exponent must be finite and at least 1, got {q}")));
    }
    let dt = phi.grid.dt();
    let s: f64 = phi.cell_norms().iter().map(|n| n.powf(q) * dt).sum();
    Ok(s.powf(1.0 / q))
}

/// Function on `[0,T]²`, constant on cell pairs; row-major `[s][θ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiStepFunction {
    grid: TimeGrid,
    coefficients: Vec<f64>,
}

impl BiStepFunction {
    pub fn new(grid: TimeGrid, coefficients: Vec<f64>) -> Result<Self> {
        let m = grid.cells();
        if coefficients.len() != m * m {
            return Err(invalid("coefficients", format!("{} values for a {m}x{m} array", coefficients.len())));
        }
        Ok(Self { grid, coefficients })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self { grid, coefficients: vec![0.0; grid.cells() * grid.cells()] }
    }

    /// `a(s) b(θ)`.
    pub fn outer(a: &StepFunction, b: &StepFunction) -> Result<Self> {
        same_grid(a, b)?;
        let coefficients = a
            .coefficients()
            .iter()
            .flat_map(|x| b.coefficients().iter().map(move |y| x * y))
            .collect();
        Ok(Self { grid: a.grid, coefficients })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn get(&self, s: usize, theta: usize) -> f64 {
        self.coefficients[s * self.grid.cells() + theta]
    }

    pub fn add_assign(&mut self, other: &BiStepFunction) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for (a, b) in self.coefficients.iter_mut().zip(&other.coefficients) {
            *a += b;
        }
        Ok(())
    }

    /// `‖Φ‖²_{ℋ⊗ℋ}`.
    pub fn tensor_norm_sq(&self, hurst: HurstIndex) -> f64 {
        CellKernel::new(self.grid, hurst).tensor_inner(&self.coefficients, &self.coefficients)
    }

    /// `‖Φ‖²_{|ℋ|⊗|ℋ|}`.
    pub fn abs_tensor_norm_sq(&self, hurst: HurstIndex) -> f64 {
        let a: Vec<f64> = self.coefficients.iter().map(|v| v.abs()).collect();
        CellKernel::new(self.grid, hurst).tensor_inner(&a, &a)
    }

    /// `⟨Φ, Φ*⟩_{ℋ⊗ℋ}` where `Φ*(s, θ) = Φ(θ, s)`.
    pub fn adjoint_pairing(&self, hurst: HurstIndex) -> f64 {
        CellKernel::new(self.grid, hurst).adjoint_pairing(&self.coefficients)
    }
}

/// Named nonnegative norms with stable JSON keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub values: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
}

impl NormReport {
    pub fn insert(&mut self, label: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Domain(format!("norm `{label}` is {value}, expected finite and nonnegative")));
        }
        self.values.insert(label.to_string(), value);
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.values.get(label).copied()
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.values().all(|&c| c)
    }
}

const CHAIN_SLACK: f64 = 1e-12;

/// The chain `‖φ‖_ℋ ≤ ‖φ‖_{|ℋ|} ≤ b_H ‖φ‖_{L_{1/H}} ≤ b_H T^{H-1/2} ‖φ‖_{L_2}`,
/// reported with the two ratios that bound `b_H` from below.
pub fn norm_chain_report<V: Coefficient>(phi: &StepFunction<V>, hurst: HurstIndex) -> Result<NormReport> {
    let h = hurst.value();
    let hn = h_inner(phi, phi, hurst)?.max(0.0).sqrt();
    let abs = abs_h_norm(phi, hurst);
    let l1h = lp_time_norm(phi, 1.0 / h)?;
    let l2 = lp_time_norm(phi, 2.0)?;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let holder = phi.grid.horizon().powf(h - 0.5);
    let mut r = NormReport::default();
    r.insert("H", hn)?;
    r.insert("absH", abs)?;
    r.insert("L_1/H", l1h)?;
    r.insert("L_2", l2)?;
    r.insert("absH/L_1/H", ratio(abs, l1h))?;
    r.insert("L_1/H/L_2", ratio(l1h, l2))?;
    r.checks.insert("H<=absH".into(), hn <= abs * (1.0 + CHAIN_SLACK) + CHAIN_SLACK);
    r.checks
        .insert("L_1/H<=T^(H-1/2)L_2".into(), l1h <= holder * l2 * (1.0 + CHAIN_SLACK) + CHAIN_SLACK);
    Ok(r)
}

/// One realization of `∫|u_s|_{l₂}^p ds + ∫(∫|D_θ u_s|_{l₂}^{1/H} dθ)^{pH} ds`.
///
/// `u[k]` is the k-th component and `du[k]` its derivative with layout `[s][θ]`.
/// Averaging over an ensemble and taking the `p`-th root gives
/// `‖u‖_{𝕃_H^{1,p}(l₂)}`.
pub fn lhp_l2_integrand(u: &[StepFunction], du: &[BiStepFunction], hurst: HurstIndex, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(invalid("p", format!("must be at least 2, got {p}")));
    }
    if u.len() != du.len() {
        return Err(invalid("du", format!("{} components for {} processes", du.len(), u.len())));
    }
    let Some(first) = u.first() else { return Ok(0.0) };
    let grid = first.grid;
    for (a, d) in u.iter().zip(du) {
        grid.check_same(&a.grid)?;
        grid.check_same(&d.grid)?;
    }
    let m = grid.cells();
    let dt = grid.dt();
    let q = 1.0 / hurst.value();
    let mut total = 0.0;
    for s in 0..m {
        let us: f64 = u.iter().map(|c| c.coefficients[s].powi(2)).sum::<f64>().sqrt();
        let mut inner = 0.0;
        for theta in 0..m {
            let d: f64 = du.iter().map(|c| c.get(s, theta).powi(2)).sum::<f64>().sqrt();
            inner += d.powf(q) * dt;
        }
        total += (us.powf(p) + inner.powf(p * hurst.value())) * dt;
    }
    Ok(total)
}

/// `p`-th root of the ensemble mean of [`lhp_l2_integrand`].
pub fn lhp_l2_norm(samples: &[(Vec<StepFunction>, Vec<BiStepFunction>)], hurst: HurstIndex, p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("samples", "need at least one realization"));
    }
    let mut acc = 0.0;
    for (u, du) in samples {
        acc += lhp_l2_integrand(u, du, hurst, p)?;
    }
    Ok((acc / samples.len() as f64).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(0.75).unwrap(), 0.375);
        assert!((alpha(0.51).unwrap() - 0.0102).abs() < 1e-15);
        assert!((alpha(1.0 - 1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!(alpha(0.5).is_err());
        assert!(alpha(1.0).is_err());
    }

    #[test]
    fn indicator_norms() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let one = StepFunction::indicator(g, 0.0, 2.0, 1.0).unwrap();
        let t2h = 2f64.powf(1.5);
        assert!((h_inner(&one, &one, h(0.75)).unwrap() - t2h).abs() < 1e-12);
        assert!((abs_h_norm(&one, h(0.75)).powi(2) - t2h).abs() < 1e-12);
        assert!((lp_time_norm(&one, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!((lp_time_norm(&one, 1.0 / 0.75).unwrap() - 2f64.powf(0.75)).abs() < 1e-14);
        let a = StepFunction::indicator(g, 0.0, 1.0, 1.0).unwrap();
        let b = StepFunction::indicator(g, 1.0, 2.0, 1.0).unwrap();
        let expected = increment_covariance(0.0, 1.0, 1.0, 2.0, h(0.75));
        assert!((h_inner(&a, &b, h(0.75)).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.414_213_562_373_095).abs() < 1e-12);
    }

    #[test]
    fn sequence_values() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let e1 = StepFunction::new(g, vec![vec![1.0, 0.0]; 4]).unwrap();
        let e2 = StepFunction::new(g, vec![vec![0.0, 1.0]; 4]).unwrap();
        assert!((h_inner(&e1, &e1, h(0.7)).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(h_inner(&e1, &e2, h(0.7)).unwrap(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = StepFunction::zero(TimeGrid::new(1.0, 4).unwrap());
        let b = StepFunction::zero(TimeGrid::new(1.0, 8).unwrap());
        assert!(matches!(h_inner(&a, &b, h(0.7)), Err(Error::GridMismatch(_))));
        assert!(StepFunction::new(TimeGrid::new(1.0, 4).unwrap(), vec![1.0; 3]).is_err());
    }

    #[test]
    fn chain_on_indicator_and_signed() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let one = StepFunction::indicator(g, 0.0, 1.0, 1.0).unwrap();
        let r = norm_chain_report(&one, h(0.75)).unwrap();
        assert!((r.get("H").unwrap() - 1.0).abs() < 1e-12);
        assert!((r.get("absH").unwrap() - 1.0).abs() < 1e-12);
        assert!(r.all_checks_pass());
        let signed = StepFunction::new(g, (0..8).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect()).unwrap();
        let r = norm_chain_report(&signed, h(0.75)).unwrap();
        assert!(r.get("H").unwrap() < r.get("absH").unwrap() * (1.0 - 1e-3));
        assert!(r.all_checks_pass());
    }

    #[test]
    fn lhp_reductions() {
        let g = TimeGrid::new(3.0, 6).unwrap();
        let one = StepFunction::indicator(g, 0.0, 3.0, 1.0).unwrap();
        let zero = BiStepFunction::zero(g);
        let n = lhp_l2_norm(&[(vec![one.clone()], vec![zero.clone()])], h(0.7), 2.0).unwrap();
        assert!((n - 3f64.sqrt()).abs() < 1e-14);
        let n4 = lhp_l2_norm(&[(vec![one.scaled(2.0)], vec![zero.clone()])], h(0.7), 4.0).unwrap();
        assert!((n4 - 2.0 * 3f64.powf(0.25)).abs() < 1e-13);
        assert!(lhp_l2_integrand(&[one], &[zero], h(0.7), 1.5).is_err());
    }

    #[test]
    fn adjoint_pairing_on_symmetric_outer_equals_norm() {
        let g = TimeGrid::new(1.0, 6).unwrap();
        let a = StepFunction::new(g, vec![0.3, -1.0, 2.0, 0.5, 0.0, 1.2]).unwrap();
        let phi = BiStepFunction::outer(&a, &a).unwrap();
        let hh = h(0.8);
        let n = phi.tensor_norm_sq(hh);
        assert!((phi.adjoint_pairing(hh) - n).abs() < 1e-12 * n);
        let ha = h_inner(&a, &a, hh).unwrap();
        assert!((n - ha * ha).abs() < 1e-12 * n);
    }
}
