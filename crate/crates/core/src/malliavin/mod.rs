//! Smooth cylindrical functionals of a fractional Brownian motion, their
//! Malliavin derivatives, and Skorohod integrals of elementary processes.
//!
//! A functional is `F = f(β(φ_1), ..., β(φ_n))` with `f` a polynomial,
//! optionally damped by `exp(-|x|²/2)`. Both families are closed under
//! partial differentiation, so `D F = Σ_i ∂_i f(...) φ_i` stays exact.

mod battery;
mod skorohod;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fbm::{FbmPath, TimeGrid};
use crate::kernel::StepFunction;

pub use battery::{build_process, Battery, FunctionalSpec, MemberSpec, NoiseSpec, TermSpec};
pub use skorohod::{
    duality_check, l2_identity_check, skorohod_elementary, skorohod_sum, DualityReport, ElementaryProcess,
    ElementaryTerm, L2IdentityReport, SampleDraw,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Polynomial,
    /// Polynomial times `exp(-|x|²/2)`.
    Damped,
}

/// `f(x) = P(x)` or `P(x) exp(-|x|²/2)`, with `P` stored as exponent vector to coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFunctional {
    arity: usize,
    family: Family,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl SmoothFunctional {
    pub fn new(arity: usize, family: Family, monomials: &[(f64, Vec<u32>)]) -> Result<Self> {
        let mut terms = BTreeMap::new();
        for (c, powers) in monomials {
            if powers.len() != arity {
                return Err(invalid(
                    "monomials",
                    format!("monomial has {} exponents for arity {arity}", powers.len()),
                ));
            }
            *terms.entry(powers.clone()).or_insert(0.0) += c;
        }
        terms.retain(|_, c| *c != 0.0);
        Ok(Self { arity, family, terms })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(0, Family::Polynomial, &[(c, vec![])]).expect("arity 0")
    }

    /// `x_i`.
    pub fn coordinate(arity: usize, i: usize) -> Self {
        let mut p = vec![0; arity];
        p[i] = 1;
        Self::new(arity, Family::Polynomial, &[(1.0, p)]).expect("consistent arity")
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn polynomial(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(p, c)| c * p.iter().zip(x).map(|(&e, v)| v.powi(e as i32)).product::<f64>())
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.arity);
        let p = self.polynomial(x);
        match self.family {
            Family::Polynomial => p,
            Family::Damped => p * (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp(),
        }
    }

    /// `∂f/∂x_i`, exact within the family.
    pub fn partial(&self, i: usize) -> Self {
        let mut out: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (p, c) in &self.terms {
            if p[i] > 0 {
                let mut q = p.clone();
                q[i] -= 1;
                *out.entry(q).or_insert(0.0) += c * p[i] as f64;
            }
            if self.family == Family::Damped {
                let mut q = p.clone();
                q[i] += 1;
                *out.entry(q).or_insert(0.0) -= c;
            }
        }
        out.retain(|_, c| *c != 0.0);
        Self { arity: self.arity, family: self.family, terms: out }
    }

    /// `a f + b g`.
    pub fn combine(a: f64, f: &Self, b: f64, g: &Self) -> Result<Self> {
        if f.arity != g.arity || f.family != g.family {
            return Err(invalid("functional", "linear combination needs equal arity and family"));
        }
        let mut terms = BTreeMap::new();
        for (p, c) in &f.terms {
            *terms.entry(p.clone()).or_insert(0.0) += a * c;
        }
        for (p, c) in &g.terms {
            *terms.entry(p.clone()).or_insert(0.0) += b * c;
        }
        terms.retain(|_, c: &mut f64| *c != 0.0);
        Ok(Self { arity: f.arity, family: f.family, terms })
    }
}

/// `F = f(β^k(φ_1), ..., β^k(φ_n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalRV {
    grid: TimeGrid,
    f: SmoothFunctional,
    partials: Vec<SmoothFunctional>,
    args: Vec<StepFunction>,
    noise: usize,
}

impl CylindricalRV {
    pub fn new(grid: TimeGrid, f: SmoothFunctional, args: Vec<StepFunction>, noise: usize) -> Result<Self> {
        if args.len() != f.arity() {
            return Err(invalid("args", format!("{} arguments for arity {}", args.len(), f.arity())));
        }
        for a in &args {
            grid.check_same(&a.grid())?;
        }
        let partials = (0..f.arity()).map(|i| f.partial(i)).collect();
        Ok(Self { grid, f, partials, args, noise })
    }

    pub fn constant(grid: TimeGrid, c: f64, noise: usize) -> Self {
        Self::new(grid, SmoothFunctional::constant(c), vec![], noise).expect("no arguments")
    }

    /// `β^k(φ)` itself.
    pub fn linear(phi: StepFunction, noise: usize) -> Self {
        let grid = phi.grid();
        Self::new(grid, SmoothFunctional::coordinate(1, 0), vec![phi], noise).expect("arity 1")
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn functional(&self) -> &SmoothFunctional {
        &self.f
    }

    pub fn args(&self) -> &[StepFunction] {
        &self.args
    }

    pub fn noise(&self) -> usize {
        self.noise
    }

    pub fn is_deterministic(&self) -> bool {
        self.partials.iter().all(SmoothFunctional::is_zero)
    }

    /// Arguments `β(φ_i)` on one path.
    pub fn arguments(&self, path: &FbmPath) -> Result<Vec<f64>> {
        self.args.iter().map(|a| wiener_integral(a, path)).collect()
    }

    pub fn evaluate(&self, path: &FbmPath) -> Result<f64> {
        Ok(self.f.eval(&self.arguments(path)?))
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.f.eval(x)
    }

    /// `∂_i f(x)` for every `i`.
    pub fn partials_at(&self, x: &[f64]) -> Vec<f64> {
        self.partials.iter().map(|p| p.eval(x)).collect()
    }

    pub fn derivative(&self) -> MalliavinGradient {
        let terms = self
            .partials
            .iter()
            .zip(&self.args)
            .map(|(p, phi)| {
                let coef = CylindricalRV {
                    grid: self.grid,
                    partials: (0..p.arity()).map(|i| p.partial(i)).collect(),
                    f: p.clone(),
                    args: self.args.clone(),
                    noise: self.noise,
                };
                (coef, phi.clone())
            })
            .collect();
        MalliavinGradient { grid: self.grid, terms }
    }

    /// `D F` at the point where the arguments equal `x`, as per-cell values.
    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.cells()];
        for (d, phi) in self.partials_at(x).into_iter().zip(&self.args) {
            if d != 0.0 {
                for (o, c) in out.iter_mut().zip(phi.coefficients()) {
                    *o += d * c;
                }
            }
        }
        out
    }

    /// `a F + b G` for functionals sharing arguments and noise.
    pub fn combine(a: f64, f: &Self, b: f64, g: &Self) -> Result<Self> {
        if f.args != g.args || f.noise != g.noise {
            return Err(invalid("functional", "linear combination needs shared arguments and noise"));
        }
        Self::new(f.grid, SmoothFunctional::combine(a, &f.f, b, &g.f)?, f.args.clone(), f.noise)
    }
}

/// `D F = Σ_i (∂_i f)(β(φ)) φ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MalliavinGradient {
    grid: TimeGrid,
    terms: Vec<(CylindricalRV, StepFunction)>,
}

impl MalliavinGradient {
    pub fn terms(&self) -> &[(CylindricalRV, StepFunction)] {
        &self.terms
    }

    /// Collapses the gradient on one path into a step function.
    pub fn at(&self, path: &FbmPath) -> Result<StepFunction> {
        let mut out = vec![0.0; self.grid.cells()];
        for (coef, phi) in &self.terms {
            let c = coef.evaluate(path)?;
            for (o, v) in out.iter_mut().zip(phi.coefficients()) {
                *o += c * v;
            }
        }
        StepFunction::new(self.grid, out)
    }
}

/// `β(φ) = Σ_j φ_j (β_{t_{j+1}} - β_{t_j})`.
pub fn wiener_integral(phi: &StepFunction, path: &FbmPath) -> Result<f64> {
    phi.grid().check_same(&path.grid)?;
    Ok(phi
        .coefficients()
        .iter()
        .zip(path.values.windows(2))
        .map(|(c, w)| c * (w[1] - w[0]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{cholesky_sample, HurstIndex};

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 8).unwrap()
    }

    #[test]
    fn polynomial_partials() {
        // f = 3 x0² x1 - x1³ + 2
        let f = SmoothFunctional::new(
            2,
            Family::Polynomial,
            &[(3.0, vec![2, 1]), (-1.0, vec![0, 3]), (2.0, vec![0, 0])],
        )
        .unwrap();
        let x = [0.7, -1.3];
        assert!((f.partial(0).eval(&x) - 6.0 * 0.7 * -1.3).abs() < 1e-14);
        assert!((f.partial(1).eval(&x) - (3.0 * 0.49 - 3.0 * 1.69)).abs() < 1e-14);
    }

    #[test]
    fn damped_partial_matches_formula() {
        let f = SmoothFunctional::new(1, Family::Damped, &[(1.0, vec![1])]).unwrap();
        let x = [0.4];
        let expected = (1.0 - 0.16) * (-0.08f64).exp();
        assert!((f.partial(0).eval(&x) - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_and_identity() {
        let g = grid();
        let e = cholesky_sample(g, HurstIndex::new(0.7).unwrap(), 1, 3).unwrap();
        let path = &e.paths[0];
        let c = CylindricalRV::constant(g, 2.5, 0);
        assert_eq!(c.evaluate(path).unwrap(), 2.5);
        assert!(c.derivative().terms().is_empty());
        assert!(c.is_deterministic());
        let phi = StepFunction::indicator(g, 0.0, 0.5, 1.0).unwrap();
        let b = CylindricalRV::linear(phi.clone(), 0);
        assert!((b.evaluate(path).unwrap() - path.values[4]).abs() < 1e-15);
        let d = b.derivative().at(path).unwrap();
        assert_eq!(d, phi);
        assert!(wiener_integral(&StepFunction::zero(g), path).unwrap() == 0.0);
        let one = StepFunction::indicator(g, 0.0, 1.0, 1.0).unwrap();
        assert!((wiener_integral(&one, path).unwrap() - path.values[8]).abs() < 1e-15);
    }

    #[test]
    fn square_gradient() {
        let g = grid();
        let e = cholesky_sample(g, HurstIndex::new(0.7).unwrap(), 1, 4).unwrap();
        let path = &e.paths[0];
        let phi = StepFunction::indicator(g, 0.25, 1.0, 1.0).unwrap();
        let sq = SmoothFunctional::new(1, Family::Polynomial, &[(1.0, vec![2])]).unwrap();
        let f = CylindricalRV::new(g, sq, vec![phi.clone()], 0).unwrap();
        let x = wiener_integral(&phi, path).unwrap();
        let d = f.derivative().at(path).unwrap();
        assert_eq!(d, phi.scaled(2.0 * x));
        assert_eq!(f.gradient_at(&[x]), phi.scaled(2.0 * x).coefficients());
    }

    #[test]
    fn arity_mismatch() {
        let g = grid();
        assert!(CylindricalRV::new(g, SmoothFunctional::coordinate(2, 0), vec![StepFunction::zero(g)], 0).is_err());
        assert!(SmoothFunctional::new(2, Family::Polynomial, &[(1.0, vec![1])]).is_err());
    }
}
