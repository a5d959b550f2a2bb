//! Constructive solution of `du = (Δu + f) dt + Σ_k g^k δβ^k_t` on the torus
//! for elementary `g`, and the pathwise weak-form residual.
//!
//! The solution is `u = u₁ + u₂` with `u₁(t) = T_t u₀ + ∫_0^t T_{t-s} f(s) ds`
//! and `u₂(t) = Σ_k ∫_0^t T_{t-r} g^k(r) δβ^k_r`. On every time cell the
//! semigroup argument is frozen at the cell midpoint, which keeps each cell
//! contribution in the exactly integrable elementary class.

mod spec;

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fbm::{FbmGenerator, FbmPath, TimeGrid};
use crate::kernel::Coefficient;
use crate::malliavin::ElementaryProcess;
use crate::rng::{substream, AUX_PATH};
use crate::spectral::{laplacian, semigroup_apply, GridField};

pub use spec::{FieldProfile, Forcing, ForcingSpec, Problem, ProblemSpec};

/// Event indicators of one replicate: the initial datum's, then one per forcing term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Events {
    pub initial: bool,
    pub forcing: Vec<bool>,
}

impl Events {
    /// Bernoulli draws from the replicate's auxiliary stream.
    pub fn draw(problem: &Problem, replicate: u64) -> Self {
        let mut rng = substream(problem.seed, replicate, AUX_PATH);
        let mut coin = |p: f64| rng.random::<f64>() < p;
        let initial = coin(problem.initial_probability);
        let forcing = problem.forcing.iter().map(|f| coin(f.probability)).collect();
        Self { initial, forcing }
    }

    pub fn certain(problem: &Problem) -> Self {
        Self { initial: true, forcing: vec![true; problem.forcing.len()] }
    }
}

/// `u`, `u₁`, `u₂` at every time node of one replicate.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub time: TimeGrid,
    pub replicate: u64,
    pub events: Events,
    pub initial: GridField,
    pub u: Vec<GridField>,
    pub u1: Vec<GridField>,
    pub u2: Vec<GridField>,
}

impl Problem {
    /// Realized initial datum.
    pub fn initial_for(&self, events: &Events) -> GridField {
        if events.initial {
            self.initial.clone()
        } else {
            GridField::zeros(self.space)
        }
    }

    /// Realized `f` on time cell `r`.
    pub fn forcing_on(&self, events: &Events, r: usize) -> Result<GridField> {
        let mut f = GridField::zeros(self.space);
        for (term, &on) in self.forcing.iter().zip(&events.forcing) {
            if on && (term.start..term.end).contains(&r) {
                f = f.add(&term.field)?;
            }
        }
        Ok(f)
    }

    /// Noise paths `β^1, ..., β^K` of one replicate.
    pub fn paths(&self, gen: &FbmGenerator, replicate: u64) -> Vec<FbmPath> {
        (0..self.noise.noise_count() as u32).map(|k| gen.path(self.seed, replicate, k)).collect()
    }

    pub fn generator(&self) -> Result<FbmGenerator> {
        FbmGenerator::circulant(self.time, self.hurst)
    }
}

/// `T_{t_j} u₀ + Σ_{r<j} T_{t_j - s_r} f(s_r) Δt` by direct summation, `s_r` the cell midpoint.
pub fn deterministic_part(problem: &Problem, events: &Events, j: usize) -> Result<GridField> {
    check_node(problem.time, j)?;
    let tj = problem.time.node(j);
    let dt = problem.time.dt();
    let mut out = semigroup_apply(&problem.initial_for(events), tj)?;
    for r in 0..j {
        let f = problem.forcing_on(events, r)?;
        out = out.axpy(dt, &semigroup_apply(&f, tj - problem.time.cell_midpoint(r))?)?;
    }
    Ok(out)
}

/// `Σ_k δ^{β^k}(T_{t_j - ·} g^k 1_{[0, t_j]})` by direct summation of the
/// closed-form Skorohod integral of the field-valued step map.
pub fn stochastic_convolution(g: &ElementaryProcess<GridField>, paths: &[FbmPath], j: usize) -> Result<GridField> {
    let time = g.grid();
    check_node(time, j)?;
    let Some(space) = g.components().iter().flatten().next().map(|t| t.profile.grid()) else {
        return Err(invalid("g", "no terms; the convolution has no spatial grid"));
    };
    let tj = time.node(j);
    let mut out = GridField::zeros(space);
    for (terms, draws) in g.components().iter().zip(g.draw_all(paths)?) {
        for (t, d) in terms.iter().zip(draws) {
            for (r, w) in t.cells().zip(d.weights) {
                if r < j {
                    out = out.axpy(w, &semigroup_apply(&t.profile, tj - time.cell_midpoint(r))?)?;
                }
            }
        }
    }
    Ok(out)
}

fn check_node(time: TimeGrid, j: usize) -> Result<()> {
    if j > time.cells() {
        return Err(invalid("node", format!("{j} exceeds the {} time cells", time.cells())));
    }
    Ok(())
}

/// Solution at every node by the per-mode recursions
/// `û₁ ← e^{-λΔt} û₁ + e^{-λΔt/2} f̂ Δt` and `û₂ ← e^{-λΔt} û₂ + e^{-λΔt/2} Σ w ĝ`.
pub fn solve(problem: &Problem, paths: &[FbmPath], replicate: u64) -> Result<SolutionPath> {
    let events = Events::draw(problem, replicate);
    solve_with_events(problem, paths, replicate, events)
}

pub fn solve_with_events(problem: &Problem, paths: &[FbmPath], replicate: u64, events: Events) -> Result<SolutionPath> {
    let time = problem.time;
    let space = problem.space;
    let m = time.cells();
    let dt = time.dt();
    let n = space.len();
    let decay: Vec<f64> = (0..n).map(|i| (-space.frequency_sq(i) * dt).exp()).collect();
    let half: Vec<f64> = (0..n).map(|i| (-space.frequency_sq(i) * dt / 2.0).exp()).collect();

    let draws = problem.noise.draw_all(paths)?;
    // Per cell: (weight, term spectrum) pairs active on that cell.
    let mut active: Vec<Vec<(f64, &[Complex64])>> = vec![Vec::new(); m];
    for (terms, ds) in problem.noise.components().iter().zip(&draws) {
        for (t, d) in terms.iter().zip(ds) {
            let spec = t.profile.spectrum();
            for (r, w) in t.cells().zip(&d.weights) {
                active[r].push((*w, spec));
            }
        }
    }
    let forcing_spectra: Vec<(usize, usize, &[Complex64])> = problem
        .forcing
        .iter()
        .zip(&events.forcing)
        .filter(|(_, on)| **on)
        .map(|(f, _)| (f.start, f.end, f.field.spectrum()))
        .collect();

    let initial = problem.initial_for(&events);
    let mut d_hat: Vec<Complex64> = initial.spectrum().to_vec();
    let mut s_hat = vec![Complex64::new(0.0, 0.0); n];
    let mut u1 = Vec::with_capacity(m + 1);
    let mut u2 = Vec::with_capacity(m + 1);
    u1.push(initial.clone());
    u2.push(GridField::zeros(space));
    for (r, cell) in active.iter().enumerate() {
        for i in 0..n {
            let mut f = Complex64::new(0.0, 0.0);
            for (a, b, fs) in &forcing_spectra {
                if (*a..*b).contains(&r) {
                    f += fs[i];
                }
            }
            d_hat[i] = d_hat[i] * decay[i] + f * (half[i] * dt);
            let mut g = Complex64::new(0.0, 0.0);
            for (w, gs) in cell {
                g += gs[i] * *w;
            }
            s_hat[i] = s_hat[i] * decay[i] + g * half[i];
        }
        u1.push(GridField::from_spectrum(space, d_hat.clone())?);
        u2.push(GridField::from_spectrum(space, s_hat.clone())?);
    }
    let u = u1
        .iter()
        .zip(&u2)
        .map(|(a, b)| a.add(b))
        .collect::<Result<Vec<_>>>()?;
    Ok(SolutionPath { time, replicate, events, initial, u, u1, u2 })
}

/// `|(u(t_j),φ) - (u₀,φ) - ∫_0^{t_j}(Δu + f, φ) dt - Σ_k δ^{β^k}((g^k,φ) 1_{[0,t_j]})|`
/// at every node. The `Δu` integral uses the trapezoid rule on nodal values,
/// `f` is integrated exactly, and the Skorohod term is the scalar closed form
/// with profiles `(g_i^k, φ)` on the same noise sample.
pub fn weak_residuals(sol: &SolutionPath, problem: &Problem, phi: &GridField, paths: &[FbmPath]) -> Result<Vec<f64>> {
    let m = problem.time.cells();
    let dt = problem.time.dt();
    let a: Vec<f64> = sol.u.iter().map(|u| u.dot(phi)).collect::<Result<_>>()?;
    let l: Vec<f64> = sol.u.iter().map(|u| laplacian(u).dot(phi)).collect::<Result<_>>()?;
    let mut cell = vec![0.0; m];
    for (r, c) in cell.iter_mut().enumerate() {
        *c = 0.5 * (l[r] + l[r + 1]) * dt + problem.forcing_on(&sol.events, r)?.dot(phi)? * dt;
    }
    let draws = problem.noise.draw_all(paths)?;
    for (terms, ds) in problem.noise.components().iter().zip(&draws) {
        for (t, d) in terms.iter().zip(ds) {
            let gp = t.profile.dot(phi)?;
            for (r, w) in t.cells().zip(&d.weights) {
                cell[r] += gp * w;
            }
        }
    }
    let mut out = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..=m {
        acc += cell[j - 1];
        out.push((a[j] - a[0] - acc).abs());
    }
    Ok(out)
}

pub fn weak_form_residual(
    sol: &SolutionPath,
    problem: &Problem,
    phi: &GridField,
    j: usize,
    paths: &[FbmPath],
) -> Result<f64> {
    check_node(problem.time, j)?;
    Ok(weak_residuals(sol, problem, phi, paths)?[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(extra: &str) -> ProblemSpec {
        let base = r#"
[time]
horizon = 1.0
cells = 16
hurst = 0.75
[space]
dimension = 1
half_width = 12.0
points = 64
[run]
seed = 5
"#;
        ProblemSpec::from_toml_str(&format!("{base}{extra}")).unwrap()
    }

    const NOISE: &str = r#"
[[noise]]
[[noise.term]]
interval = [0.25, 1.0]
profile = { kind = "gaussian", center = [0.5], width = 0.7 }
functional = { monomials = [[1.0, [1]], [0.5, [0]]], args = [[[0.0, 0.25, 1.0]]] }
[[noise]]
[[noise.term]]
interval = [0.0, 0.5]
profile = { kind = "gaussian", center = [-0.5], width = 0.5, amplitude = 2.0 }
"#;

    #[test]
    fn eigenmode_heat_flow() {
        let p = spec("[initial]\nprofile = { kind = \"mode\", wavenumber = [3] }\n").build().unwrap();
        let sol = solve(&p, &[], 0).unwrap();
        let lam = (std::f64::consts::PI * 3.0 / 12.0).powi(2);
        for j in [0, 5, 16] {
            let expected = p.initial.scaled((-lam * p.time.node(j)).exp());
            assert!(sol.u[j].max_abs_diff(&expected).unwrap() < 1e-12);
        }
        assert_eq!(sol.u[0], p.initial);
    }

    #[test]
    fn recursion_matches_direct_sums() {
        let s = spec(&format!(
            "[initial]\nprofile = {{ kind = \"gaussian\", center = [0.0], width = 1.0 }}\n\
             [[forcing]]\ninterval = [0.25, 0.75]\nprofile = {{ kind = \"mode\", wavenumber = [2] }}\n{NOISE}"
        ));
        let p = s.build().unwrap();
        let gen = p.generator().unwrap();
        let paths = p.paths(&gen, 3);
        let sol = solve_with_events(&p, &paths, 3, Events::certain(&p)).unwrap();
        for j in [0, 1, 7, 16] {
            let d = deterministic_part(&p, &sol.events, j).unwrap();
            assert!(sol.u1[j].max_abs_diff(&d).unwrap() < 1e-12, "u1 node {j}");
            let z = stochastic_convolution(&p.noise, &paths, j).unwrap();
            assert!(sol.u2[j].max_abs_diff(&z).unwrap() < 1e-12, "u2 node {j}");
            let sum = sol.u1[j].add(&sol.u2[j]).unwrap();
            assert_eq!(sol.u[j], sum);
        }
    }

    #[test]
    fn noise_linearity_and_zero_start() {
        let p = spec(NOISE).build().unwrap();
        let doubled = NOISE
            .replace("width = 0.7 }", "width = 0.7, amplitude = 2.0 }")
            .replace("width = 0.5, amplitude = 2.0 }", "width = 0.5, amplitude = 4.0 }");
        let p2 = spec(&doubled).build().unwrap();
        let gen = p.generator().unwrap();
        let paths = p.paths(&gen, 0);
        let sol = solve(&p, &paths, 0).unwrap();
        let sol2 = solve(&p2, &paths, 0).unwrap();
        for j in 0..=16 {
            assert_eq!(sol2.u2[j], sol.u2[j].scaled(2.0));
        }
        let phi = FieldProfile::Gaussian { center: vec![0.0], width: 1.0, amplitude: 1.0 }.field(p.space).unwrap();
        assert_eq!(weak_form_residual(&sol, &p, &phi, 0, &paths).unwrap(), 0.0);
        assert!(weak_form_residual(&sol, &p, &phi, 17, &paths).is_err());
    }

    #[test]
    fn event_draws_are_reproducible() {
        let p = spec("[[forcing]]\ninterval = [0.0, 1.0]\nprobability = 0.5\nprofile = { kind = \"constant\", value = 1.0 }\n")
            .build()
            .unwrap();
        let draws: Vec<bool> = (0..200).map(|r| Events::draw(&p, r).forcing[0]).collect();
        let again: Vec<bool> = (0..200).map(|r| Events::draw(&p, r).forcing[0]).collect();
        assert_eq!(draws, again);
        let ones = draws.iter().filter(|b| **b).count();
        assert!((60..140).contains(&ones));
    }
}
