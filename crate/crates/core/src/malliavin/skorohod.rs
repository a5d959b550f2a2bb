use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CylindricalRV;
use crate::error::{invalid, Error, Result};
use crate::fbm::{FbmEnsemble, FbmGenerator, FbmPath, HurstIndex, TimeGrid};
use crate::kernel::{BiStepFunction, CellKernel, StepFunction};
use crate::stats::{Summary, MC_SIGMAS};

/// `F · 1_{(t_start, t_end]} · profile`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryTerm<P> {
    pub functional: CylindricalRV,
    pub start: usize,
    pub end: usize,
    pub profile: P,
}

impl<P> ElementaryTerm<P> {
    /// Term on the grid-aligned interval `(a, b]`, `a < b`.
    pub fn new(functional: CylindricalRV, a: f64, b: f64, profile: P) -> Result<Self> {
        let (start, end) = functional.grid().cell_range(a, b)?;
        if start == end {
            return Err(invalid("interval", format!("({a}, {b}] is empty")));
        }
        Ok(Self { functional, start, end, profile })
    }

    pub fn cells(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// One term of an elementary process evaluated on one path.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    /// `F(ω)`.
    pub value: f64,
    /// `D F(ω)` per cell.
    pub gradient: Vec<f64>,
    /// `W · D F(ω)` per cell.
    pub kernel_gradient: Vec<f64>,
    /// `F Δβ_r - (W · DF)_r` for `r` in the term's cells; the Skorohod
    /// integral of `F 1_{(a,b]}` is the sum of these.
    pub weights: Vec<f64>,
}

/// Per-noise lists of terms `F_i^k 1_{(t_{i-1}^k, t_i^k]} g_i^k`.
#[derive(Debug, Clone)]
pub struct ElementaryProcess<P> {
    grid: TimeGrid,
    hurst: HurstIndex,
    kernel: CellKernel,
    components: Vec<Vec<ElementaryTerm<P>>>,
    /// `W φ` for every functional argument, indexed `[k][term][arg]`.
    images: Vec<Vec<Vec<Vec<f64>>>>,
}

impl<P> ElementaryProcess<P> {
    pub fn new(grid: TimeGrid, hurst: HurstIndex, components: Vec<Vec<ElementaryTerm<P>>>) -> Result<Self> {
        let kernel = CellKernel::new(grid, hurst);
        let mut images = Vec::with_capacity(components.len());
        for (k, terms) in components.iter().enumerate() {
            let mut spans: Vec<(usize, usize)> = Vec::new();
            let mut imgs = Vec::with_capacity(terms.len());
            for t in terms {
                grid.check_same(&t.functional.grid())?;
                if t.functional.noise() != k {
                    return Err(invalid(
                        "noise",
                        format!("term of component {k} is a functional of noise {}", t.functional.noise()),
                    ));
                }
                if t.end > grid.cells() || t.start >= t.end {
                    return Err(invalid("interval", format!("cells [{}, {}) outside the grid", t.start, t.end)));
                }
                spans.push((t.start, t.end));
                imgs.push(t.functional.args().iter().map(|a| kernel.apply(a.coefficients())).collect());
            }
            spans.sort_unstable();
            if spans.windows(2).any(|w| w[1].0 < w[0].1) {
                return Err(invalid("interval", format!("component {k} has overlapping intervals")));
            }
            images.push(imgs);
        }
        Ok(Self { grid, hurst, kernel, components, images })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn kernel(&self) -> &CellKernel {
        &self.kernel
    }

    /// Number of noises the process uses.
    pub fn noise_count(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<ElementaryTerm<P>>] {
        &self.components
    }

    pub fn is_deterministic(&self) -> bool {
        self.components.iter().flatten().all(|t| t.functional.is_deterministic())
    }

    /// Evaluates term `i` of component `k` on `path` (the path of `β^k`).
    pub fn draw(&self, k: usize, i: usize, path: &FbmPath) -> Result<SampleDraw> {
        let term = &self.components[k][i];
        let f = &term.functional;
        let x = f.arguments(path)?;
        let value = f.value_at(&x);
        let partials = f.partials_at(&x);
        let m = self.grid.cells();
        let mut gradient = vec![0.0; m];
        let mut kernel_gradient = vec![0.0; m];
        for ((d, arg), img) in partials.iter().zip(f.args()).zip(&self.images[k][i]) {
            if *d == 0.0 {
                continue;
            }
            for r in 0..m {
                gradient[r] += d * arg.coefficients()[r];
                kernel_gradient[r] += d * img[r];
            }
        }
        let weights = term
            .cells()
            .map(|r| value * (path.values[r + 1] - path.values[r]) - kernel_gradient[r])
            .collect();
        Ok(SampleDraw { value, gradient, kernel_gradient, weights })
    }

    /// Draws for every term of every component on one ensemble replicate.
    pub fn draw_all(&self, paths: &[FbmPath]) -> Result<Vec<Vec<SampleDraw>>> {
        self.check_paths(paths)?;
        (0..self.components.len())
            .map(|k| (0..self.components[k].len()).map(|i| self.draw(k, i, &paths[k])).collect())
            .collect()
    }

    fn check_paths(&self, paths: &[FbmPath]) -> Result<()> {
        if paths.len() < self.components.len() {
            return Err(Error::NoiseCount { needed: self.components.len(), available: paths.len() });
        }
        for p in paths.iter().take(self.components.len()) {
            self.grid.check_same(&p.grid)?;
        }
        Ok(())
    }
}

impl ElementaryProcess<f64> {
    /// `Σ_k δ^{β^k}(u^k 1_{[0, t_j]})` for every node `j`.
    pub fn running_skorohod(&self, paths: &[FbmPath]) -> Result<Vec<f64>> {
        Ok(self.running_from_draws(&self.draw_all(paths)?))
    }

    /// [`Self::running_skorohod`] from precomputed draws.
    pub fn running_from_draws(&self, draws: &[Vec<SampleDraw>]) -> Vec<f64> {
        let m = self.grid.cells();
        let mut incr = vec![0.0; m];
        for (terms, ds) in self.components.iter().zip(draws) {
            for (t, d) in terms.iter().zip(ds) {
                for (r, w) in t.cells().zip(&d.weights) {
                    incr[r] += t.profile * w;
                }
            }
        }
        let mut out = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for v in incr {
            acc += v;
            out.push(acc);
        }
        out
    }

    /// `u^k_s` per cell on one replicate.
    pub fn cell_values(&self, draws: &[Vec<SampleDraw>]) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .zip(draws)
            .map(|(terms, ds)| {
                let mut u = vec![0.0; self.grid.cells()];
                for (t, d) in terms.iter().zip(ds) {
                    u[t.cells()].fill(t.profile * d.value);
                }
                u
            })
            .collect()
    }

    /// `u` and `D u` as step functions on one replicate, `Du[k]` laid out `[s][θ]`.
    pub fn realize(&self, paths: &[FbmPath]) -> Result<(Vec<StepFunction>, Vec<BiStepFunction>)> {
        let draws = self.draw_all(paths)?;
        let m = self.grid.cells();
        let us = self
            .cell_values(&draws)
            .into_iter()
            .map(|u| StepFunction::new(self.grid, u))
            .collect::<Result<Vec<_>>>()?;
        let mut dus = Vec::with_capacity(self.components.len());
        for (terms, ds) in self.components.iter().zip(&draws) {
            let mut c = vec![0.0; m * m];
            for (t, d) in terms.iter().zip(ds) {
                for s in t.cells() {
                    for (theta, g) in d.gradient.iter().enumerate() {
                        c[s * m + theta] = t.profile * g;
                    }
                }
            }
            dus.push(BiStepFunction::new(self.grid, c)?);
        }
        Ok((us, dus))
    }

    /// Integrands of the maximal-inequality right sides on one replicate:
    /// `(∫|u_s|_{l₂}^p + ∫(∫|D_θ u_s|_{l₂}^{1/H} dθ)^{pH} ds,
    ///   Σ_k ∫|u^k_s|² ds + Σ_k ∫(∫|D_θ u^k_s|^{1/H} dθ)^{2H} ds)`.
    pub fn maximal_integrands(&self, draws: &[Vec<SampleDraw>], p: f64) -> (f64, f64) {
        let m = self.grid.cells();
        let dt = self.grid.dt();
        let h = self.hurst.value();
        let q = 1.0 / h;
        // Per component: term covering each cell.
        let owner: Vec<Vec<Option<usize>>> = self
            .components
            .iter()
            .map(|terms| {
                let mut o = vec![None; m];
                for (i, t) in terms.iter().enumerate() {
                    o[t.cells()].fill(Some(i));
                }
                o
            })
            .collect();
        // D_θ u^k_s does not depend on s inside a term, so θ-integrals are
        // computed once per term (split form) and once per run of cells with
        // the same owners (l₂ form).
        let split_inner: Vec<Vec<f64>> = self
            .components
            .iter()
            .zip(draws)
            .map(|(terms, ds)| {
                terms
                    .iter()
                    .zip(ds)
                    .map(|(t, d)| d.gradient.iter().map(|g| (t.profile * g).abs().powf(q) * dt).sum::<f64>().powf(2.0 * h))
                    .collect()
            })
            .collect();
        let mut general = 0.0;
        let mut split = 0.0;
        let mut dsq = vec![0.0; m];
        let mut cached: Option<(Vec<Option<usize>>, f64)> = None;
        for s in 0..m {
            let key: Vec<Option<usize>> = owner.iter().map(|o| o[s]).collect();
            let mut usq = 0.0;
            for (k, terms) in self.components.iter().enumerate() {
                let Some(i) = key[k] else { continue };
                let uk = terms[i].profile * draws[k][i].value;
                usq += uk * uk;
                split += (uk * uk + split_inner[k][i]) * dt;
            }
            let inner = match &cached {
                Some((kk, v)) if *kk == key => *v,
                _ => {
                    dsq.fill(0.0);
                    for (k, terms) in self.components.iter().enumerate() {
                        let Some(i) = key[k] else { continue };
                        let c = terms[i].profile;
                        for (acc, g) in dsq.iter_mut().zip(&draws[k][i].gradient) {
                            *acc += (c * g).powi(2);
                        }
                    }
                    let v: f64 = dsq.iter().map(|v| v.sqrt().powf(q) * dt).sum();
                    cached = Some((key, v));
                    v
                }
            };
            general += (usq.sqrt().powf(p) + inner.powf(p * h)) * dt;
        }
        (general, split)
    }
}

/// `Σ_i F_i c_i (β_{b_i} - β_{a_i}) - Σ_i c_i ⟨D F_i, 1_{(a_i, b_i]}⟩_ℋ` on one path.
pub fn skorohod_elementary(terms: &[ElementaryTerm<f64>], hurst: HurstIndex, path: &FbmPath) -> Result<f64> {
    let kernel = CellKernel::new(path.grid, hurst);
    let mut total = 0.0;
    for t in terms {
        path.grid.check_same(&t.functional.grid())?;
        let x = t.functional.arguments(path)?;
        let value = t.functional.value_at(&x);
        let wdf = kernel.apply(&t.functional.gradient_at(&x));
        for r in t.cells() {
            total += t.profile * (value * path.increment(r) - wdf[r]);
        }
    }
    Ok(total)
}

/// `Σ_k δ^{β^k}(g^k 1_{[0, t_node]})` on one ensemble replicate.
pub fn skorohod_sum(g: &ElementaryProcess<f64>, ensemble: &FbmEnsemble, node: usize) -> Result<f64> {
    if node > g.grid.cells() {
        return Err(invalid("node", format!("{node} exceeds the {} grid cells", g.grid.cells())));
    }
    Ok(g.running_skorohod(&ensemble.paths)?[node])
}

fn replicate_paths(gen: &FbmGenerator, seed: u64, replicate: u64, k: usize) -> Vec<FbmPath> {
    (0..k.max(1) as u32).map(|i| gen.path(seed, replicate, i)).collect()
}

/// Monte Carlo comparison of `E[F δ(u)]` with `E⟨D F, u⟩_ℋ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub n_mc: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub difference: f64,
    /// Standard error of the paired difference.
    pub se: f64,
    pub pass: bool,
}

pub fn duality_check(
    f: &CylindricalRV,
    u: &ElementaryProcess<f64>,
    gen: &FbmGenerator,
    seed: u64,
    n_mc: usize,
) -> Result<DualityReport> {
    u.grid.check_same(&gen.grid())?;
    u.grid.check_same(&f.grid())?;
    let k0 = f.noise();
    let kcount = u.noise_count().max(k0 + 1);
    let f_images: Vec<Vec<f64>> = f.args().iter().map(|a| u.kernel.apply(a.coefficients())).collect();
    let pairs = (0..n_mc as u64)
        .into_par_iter()
        .map(|r| {
            let paths = replicate_paths(gen, seed, r, kcount);
            let x = f.arguments(&paths[k0])?;
            let fv = f.value_at(&x);
            let mut wdf = vec![0.0; u.grid.cells()];
            for (d, img) in f.partials_at(&x).iter().zip(&f_images) {
                for (o, v) in wdf.iter_mut().zip(img) {
                    *o += d * v;
                }
            }
            let delta = *u.running_skorohod(&paths)?.last().unwrap();
            let mut pair = 0.0;
            if let Some(terms) = u.components.get(k0) {
                for (i, t) in terms.iter().enumerate() {
                    let g = u.draw(k0, i, &paths[k0])?.value;
                    pair += g * t.profile * t.cells().map(|r| wdf[r]).sum::<f64>();
                }
            }
            Ok((fv * delta, pair))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let lhs = Summary::of(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let rhs = Summary::of(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let diff = Summary::of(&pairs.iter().map(|p| p.0 - p.1).collect::<Vec<_>>());
    Ok(DualityReport {
        n_mc,
        lhs: lhs.mean,
        rhs: rhs.mean,
        difference: diff.mean,
        se: diff.se,
        pass: diff.agrees_with(0.0),
    })
}

/// Monte Carlo check of `E|δ(u)|² = E‖u‖²_ℋ + E⟨Du, (Du)*⟩` and of
/// `E|δ(u)|² ≤ E‖u‖²_ℋ + E‖Du‖²_{ℋ⊗ℋ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2IdentityReport {
    pub n_mc: usize,
    pub delta_sq: f64,
    pub h_norm_sq: f64,
    pub adjoint_term: f64,
    pub tensor_norm_sq: f64,
    /// Mean and SE of `δ² - ‖u‖² - ⟨Du, (Du)*⟩`.
    pub identity_difference: f64,
    pub identity_se: f64,
    pub identity_pass: bool,
    /// Mean and SE of `δ² - ‖u‖² - ‖Du‖²`.
    pub inequality_difference: f64,
    pub inequality_se: f64,
    pub inequality_pass: bool,
}

/// Per-replicate `(δ², ‖u‖²_ℋ, ⟨Du,(Du)*⟩, ‖Du‖²)` for a scalar process.
fn l2_terms(u: &ElementaryProcess<f64>, paths: &[FbmPath], overlap: &[Vec<Vec<f64>>]) -> Result<[f64; 4]> {
    let draws = u.draw_all(paths)?;
    let mut delta = 0.0;
    let mut hn = 0.0;
    let mut adj = 0.0;
    let mut ten = 0.0;
    for (k, (terms, ds)) in u.components.iter().zip(&draws).enumerate() {
        for (t, d) in terms.iter().zip(ds) {
            delta += t.profile * d.weights.iter().sum::<f64>();
        }
        let n = terms.len();
        // c[a][b] = ⟨D G_a, c_b 1_{I_b}⟩_ℋ
        let c: Vec<Vec<f64>> = ds
            .iter()
            .map(|da| terms.iter().map(|tb| tb.profile * tb.cells().map(|r| da.kernel_gradient[r]).sum::<f64>()).collect())
            .collect();
        for a in 0..n {
            for b in 0..n {
                let aw = overlap[k][a][b];
                hn += ds[a].value * ds[b].value * aw;
                adj += c[a][b] * c[b][a];
                let bwb: f64 = ds[a].gradient.iter().zip(&ds[b].kernel_gradient).map(|(x, y)| x * y).sum();
                ten += aw * bwb;
            }
        }
    }
    Ok([delta * delta, hn, adj, ten])
}

pub fn l2_identity_check(u: &ElementaryProcess<f64>, gen: &FbmGenerator, seed: u64, n_mc: usize) -> Result<L2IdentityReport> {
    u.grid.check_same(&gen.grid())?;
    // overlap[k][a][b] = ⟨c_a 1_{I_a}, c_b 1_{I_b}⟩_ℋ
    let overlap: Vec<Vec<Vec<f64>>> = u
        .components
        .iter()
        .map(|terms| {
            terms
                .iter()
                .map(|ta| {
                    let img = u.kernel.apply_indicator(ta.start, ta.end);
                    terms.iter().map(|tb| ta.profile * tb.profile * tb.cells().map(|r| img[r]).sum::<f64>()).collect()
                })
                .collect()
        })
        .collect();
    let rows = (0..n_mc as u64)
        .into_par_iter()
        .map(|r| l2_terms(u, &replicate_paths(gen, seed, r, u.noise_count()), &overlap))
        .collect::<Result<Vec<_>>>()?;
    let col = |f: &dyn Fn(&[f64; 4]) -> f64| Summary::of(&rows.iter().map(f).collect::<Vec<_>>());
    let id = col(&|v| v[0] - v[1] - v[2]);
    let ineq = col(&|v| v[0] - v[1] - v[3]);
    Ok(L2IdentityReport {
        n_mc,
        delta_sq: col(&|v| v[0]).mean,
        h_norm_sq: col(&|v| v[1]).mean,
        adjoint_term: col(&|v| v[2]).mean,
        tensor_norm_sq: col(&|v| v[3]).mean,
        identity_difference: id.mean,
        identity_se: id.se,
        identity_pass: id.agrees_with(0.0),
        inequality_difference: ineq.mean,
        inequality_se: ineq.se,
        inequality_pass: ineq.mean <= MC_SIGMAS * ineq.se + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{cholesky_sample, increment_covariance};
    use crate::kernel::h_inner;
    use crate::malliavin::{Family, SmoothFunctional};

    fn setup() -> (TimeGrid, HurstIndex) {
        (TimeGrid::new(2.0, 8).unwrap(), HurstIndex::new(0.75).unwrap())
    }

    #[test]
    fn beta_t_integrand() {
        let (g, h) = setup();
        let e = cholesky_sample(g, h, 1, 9).unwrap();
        let p = &e.paths[0];
        let bt = CylindricalRV::linear(StepFunction::indicator(g, 0.0, 2.0, 1.0).unwrap(), 0);
        let term = ElementaryTerm::new(bt, 0.0, 2.0, 1.0).unwrap();
        let d = skorohod_elementary(std::slice::from_ref(&term), h, p).unwrap();
        let b = p.values[8];
        assert!((d - (b * b - 2f64.powf(1.5))).abs() < 1e-12);
        let proc_ = ElementaryProcess::new(g, h, vec![vec![term]]).unwrap();
        assert!((skorohod_sum(&proc_, &e, 8).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn shifted_interval() {
        let (g, h) = setup();
        let e = cholesky_sample(g, h, 1, 10).unwrap();
        let p = &e.paths[0];
        let b1 = CylindricalRV::linear(StepFunction::indicator(g, 0.0, 1.0, 1.0).unwrap(), 0);
        let term = ElementaryTerm::new(b1, 1.0, 2.0, 1.0).unwrap();
        let d = skorohod_elementary(&[term], h, p).unwrap();
        let expected = p.values[4] * (p.values[8] - p.values[4]) - increment_covariance(0.0, 1.0, 1.0, 2.0, h);
        assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn construction_errors() {
        let (g, h) = setup();
        let c = CylindricalRV::constant(g, 1.0, 0);
        assert!(matches!(ElementaryTerm::new(c.clone(), 0.1, 1.0, 1.0), Err(Error::Misaligned { .. })));
        let a = ElementaryTerm::new(c.clone(), 0.0, 1.0, 1.0).unwrap();
        let b = ElementaryTerm::new(c.clone(), 0.5, 1.5, 1.0).unwrap();
        assert!(ElementaryProcess::new(g, h, vec![vec![a.clone(), b]]).is_err());
        assert!(ElementaryProcess::new(g, h, vec![vec![], vec![a.clone()]]).is_err());
        let proc_ = ElementaryProcess::new(g, h, vec![vec![a.clone()], vec![]]).unwrap();
        let e = cholesky_sample(g, h, 1, 1).unwrap();
        assert!(matches!(skorohod_sum(&proc_, &e, 8), Err(Error::NoiseCount { needed: 2, available: 1 })));
    }

    #[test]
    fn running_integral_is_cumulative() {
        let (g, h) = setup();
        let e = cholesky_sample(g, h, 2, 12).unwrap();
        let sq = SmoothFunctional::new(1, Family::Polynomial, &[(1.0, vec![2])]).unwrap();
        let f = CylindricalRV::new(g, sq, vec![StepFunction::indicator(g, 0.0, 0.5, 1.0).unwrap()], 1).unwrap();
        let t0 = ElementaryTerm::new(CylindricalRV::constant(g, 2.0, 0), 0.0, 1.0, 1.0).unwrap();
        let t1 = ElementaryTerm::new(f, 0.5, 2.0, -0.5).unwrap();
        let u = ElementaryProcess::new(g, h, vec![vec![t0.clone()], vec![t1.clone()]]).unwrap();
        let run = u.running_skorohod(&e.paths).unwrap();
        assert_eq!(run[0], 0.0);
        let direct = skorohod_elementary(&[t0], h, &e.paths[0]).unwrap() + skorohod_elementary(&[t1], h, &e.paths[1]).unwrap();
        assert!((run[8] - direct).abs() < 1e-12);
    }

    #[test]
    fn maximal_integrands_match_generic_norm() {
        let (g, h) = setup();
        let e = cholesky_sample(g, h, 2, 13).unwrap();
        let f = CylindricalRV::linear(StepFunction::from_pieces(g, &[(0.0, 1.0, 1.0), (1.0, 2.0, -0.5)]).unwrap(), 0);
        let t0 = ElementaryTerm::new(f, 0.5, 1.5, 1.5).unwrap();
        let t1 = ElementaryTerm::new(CylindricalRV::constant(g, 1.0, 1), 0.0, 2.0, 0.7).unwrap();
        let u = ElementaryProcess::new(g, h, vec![vec![t0], vec![t1]]).unwrap();
        let draws = u.draw_all(&e.paths).unwrap();
        let (gen, split) = u.maximal_integrands(&draws, 4.0);
        let (us, dus) = u.realize(&e.paths).unwrap();
        let reference = crate::kernel::lhp_l2_integrand(&us, &dus, h, 4.0).unwrap();
        assert!((gen - reference).abs() < 1e-12 * reference);
        let per_k: f64 = (0..2)
            .map(|k| crate::kernel::lhp_l2_integrand(&us[k..k + 1], &dus[k..k + 1], h, 2.0).unwrap())
            .sum();
        assert!((split - per_k).abs() < 1e-12 * per_k);
        // deterministic Wiener part: variance identity
        let one = StepFunction::indicator(g, 0.0, 2.0, 0.7).unwrap();
        assert!(h_inner(&one, &one, h).unwrap() > 0.0);
    }
}
