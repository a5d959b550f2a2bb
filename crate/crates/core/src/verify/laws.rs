//! Law of the sampled noise, the kernel closed forms, and the scalar Skorohod calculus.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::oracle::h_inner_reference;
use super::{builtin, ExperimentReport, Row, VerifyConfig};
use crate::error::Result;
use crate::fbm::{covariance, FbmGenerator, HurstIndex, SamplerKind, TimeGrid};
use crate::kernel::{abs_h_norm, h_inner, StepFunction};
use crate::malliavin::{
    duality_check, l2_identity_check, skorohod_elementary, Battery, CylindricalRV, ElementaryTerm,
};
use crate::rng::substream;
use crate::stats::{Summary, MC_SIGMAS};

/// Empirical `E[β_{t_j} β_{t_k}]` against `R_H(t_j, t_k)` for every node pair.
pub fn fbm_law_experiment(config: &VerifyConfig) -> Result<ExperimentReport> {
    let c = &config.fbm_law;
    let seed = config.seed_or(None, c.seed);
    let mut report = ExperimentReport::new("fbm_law", "every |mean - R_H| <= 4 SE over node pairs, both samplers");
    report.param("hursts", &c.hursts).param("horizon", c.horizon).param("cells", c.cells);
    report.param("n_paths", c.n_paths).param("seed", seed);
    let grid = TimeGrid::new(c.horizon, c.cells)?;
    let m = grid.cells();
    for &h in &c.hursts {
        let hurst = HurstIndex::new(h)?;
        for kind in [SamplerKind::Cholesky, SamplerKind::Circulant] {
            let gen = FbmGenerator::new(kind, grid, hurst)?;
            if let Some(f) = gen.fallback() {
                report.note(format!("H={h}: {f}"));
            }
            let values: Vec<Vec<f64>> =
                (0..c.n_paths as u64).into_par_iter().map(|r| gen.path(seed, r, 0).values).collect();
            let mut worst = 0.0f64;
            let mut worst_se = 0.0;
            let mut all = true;
            for j in 1..=m {
                for k in j..=m {
                    let prods: Vec<f64> = values.iter().map(|v| v[j] * v[k]).collect();
                    let s = Summary::of(&prods);
                    let target = covariance(grid.node(j), grid.node(k), hurst)?;
                    all &= s.agrees_with(target);
                    let z = (s.mean - target).abs() / s.se;
                    if z > worst {
                        worst = z;
                        worst_se = s.se;
                    }
                }
            }
            let label = format!("H={h} {}", if kind == SamplerKind::Cholesky { "cholesky" } else { "circulant" });
            let mut row = Row::new(label, worst, MC_SIGMAS, worst_se, all);
            row.extra.insert("pairs".into(), (m * (m + 1) / 2) as f64);
            report.push(row);
        }
    }
    report.conclude_by_max_ratio();
    Ok(report)
}

/// Closed-form `⟨φ,ψ⟩_ℋ` and `‖|φ|‖` against singularity-aware quadrature on random step functions.
pub fn kernel_quadrature_experiment(config: &VerifyConfig) -> Result<ExperimentReport> {
    let c = &config.kernel_quadrature;
    let seed = config.seed_or(None, c.seed);
    let mut report =
        ExperimentReport::new("kernel_quadrature", "relative error <= tolerance against the quadrature oracle");
    report.param("cases", c.cases).param("max_cells", c.max_cells).param("tolerance", c.tolerance);
    report.param("seed", seed);
    let cases = (0..c.cases as u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = substream(seed, case, 0);
            let m = rng.random_range(1..=c.max_cells.max(1));
            let horizon = rng.random_range(0.5..3.0);
            let h = rng.random_range(0.52..0.95);
            let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
            let (a, b) = (draw(m), draw(m));
            let grid = TimeGrid::new(horizon, m)?;
            let hurst = HurstIndex::new(h)?;
            let phi = StepFunction::new(grid, a.clone())?;
            let psi = StepFunction::new(grid, b.clone())?;
            let (reference, scale) = h_inner_reference(&a, &b, grid.dt(), h);
            let inner_err = (h_inner(&phi, &psi, hurst)? - reference).abs() / scale;
            let (_, abs_sq) = h_inner_reference(&a, &a, grid.dt(), h);
            let norm_err = (abs_h_norm(&phi, hurst) - abs_sq.sqrt()).abs() / abs_sq.sqrt();
            Ok((inner_err, norm_err))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = |f: fn(&(f64, f64)) -> f64| cases.iter().map(f).fold(0.0, f64::max);
    for (label, err) in [("h_inner", worst(|e| e.0)), ("abs_h_norm", worst(|e| e.1))] {
        report.push(Row::deviation(label, err, c.tolerance, 0.0));
    }
    report.note("h_inner errors are relative to the absolute-kernel scale α Σ|c_j||d_k| I_jk");
    report.conclude_by_max_ratio();
    Ok(report)
}

pub(crate) fn load_battery(config: &VerifyConfig) -> Result<Battery> {
    let text = config.text(config.malliavin.battery.as_ref(), builtin::MALLIAVIN)?;
    Battery::from_toml_str(&text)
}

fn battery_params(report: &mut ExperimentReport, b: &Battery, n_mc: usize, seed: u64) {
    report.param("hurst", b.hurst).param("horizon", b.horizon).param("cells", b.cells);
    report.param("n_mc", n_mc).param("seed", seed);
    report.param("members", b.members.iter().map(|m| m.name.as_str()).collect::<Vec<_>>());
}

/// Pathwise `δ(β_T 1_{[0,T]}) = β_T² - T^{2H}` and `E δ(u) = 0` over the battery.
pub fn skorohod_experiment(config: &VerifyConfig) -> Result<ExperimentReport> {
    let b = load_battery(config)?;
    let n_mc = config.malliavin.n_mc.unwrap_or(b.n_mc);
    let seed = config.seed_or(config.malliavin.seed, b.seed);
    skorohod_report(&b, n_mc, seed, config.malliavin.pathwise)
}

/// The Skorohod checks on an explicit battery.
pub fn skorohod_report(b: &Battery, n_mc: usize, seed: u64, pathwise: usize) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "skorohod",
        "pathwise error <= 1e-12 (1 + β_T² + T^{2H}); every |E δ(u)| <= 4 SE",
    );
    battery_params(&mut report, b, n_mc, seed);
    report.param("pathwise", pathwise);
    let grid = b.grid()?;
    let hurst = b.hurst_index()?;
    let gen = FbmGenerator::cholesky(grid, hurst, false)?;

    let t = grid.horizon();
    let beta_t = CylindricalRV::linear(StepFunction::indicator(grid, 0.0, t, 1.0)?, 0);
    let term = ElementaryTerm::new(beta_t, 0.0, t, 1.0)?;
    let t2h = t.powf(2.0 * hurst.value());
    let errors = (0..pathwise as u64)
        .into_par_iter()
        .map(|r| {
            let path = gen.path(seed, r, 0);
            let bt = path.values[grid.cells()];
            let d = skorohod_elementary(std::slice::from_ref(&term), hurst, &path)?;
            Ok((d - (bt * bt - t2h)).abs() / (1.0 + bt * bt + t2h))
        })
        .collect::<Result<Vec<f64>>>()?;
    report.push(Row::deviation("pathwise beta_T^2 - T^2H", errors.iter().fold(0.0, |a, b| a.max(*b)), 1e-12, 0.0));

    for (i, member) in b.members.iter().enumerate() {
        let u = b.process(i)?;
        let k = u.noise_count();
        let deltas = (0..n_mc as u64)
            .into_par_iter()
            .map(|r| {
                let paths: Vec<_> = (0..k as u32).map(|p| gen.path(seed, r, p)).collect();
                Ok(*u.running_skorohod(&paths)?.last().expect("m + 1 nodes"))
            })
            .collect::<Result<Vec<f64>>>()?;
        let s = Summary::of(&deltas);
        let second = deltas.iter().map(|d| d * d).sum::<f64>() / deltas.len().max(1) as f64;
        report.push(Row::mc_zero(format!("mean {}", member.name), s.mean, s.se).with("sd", s.sd).with("E delta^2", second));
    }
    report.conclude_by_max_ratio();
    Ok(report)
}

/// `E[F δ(u)] = E⟨DF, u⟩_ℋ` over the battery.
pub fn duality_experiment(config: &VerifyConfig) -> Result<ExperimentReport> {
    let b = load_battery(config)?;
    let n_mc = config.malliavin.n_mc.unwrap_or(b.n_mc);
    let seed = config.seed_or(config.malliavin.seed, b.seed);
    let mut report = ExperimentReport::new("duality", "every |E[F δ(u)] - E<DF,u>| <= 4 SE");
    battery_params(&mut report, &b, n_mc, seed);
    let gen = FbmGenerator::cholesky(b.grid()?, b.hurst_index()?, false)?;
    for (i, member) in b.members.iter().enumerate() {
        let Some(f) = b.dual(i)? else { continue };
        let d = duality_check(&f, &b.process(i)?, &gen, seed, n_mc)?;
        report.push(
            Row::mc_zero(member.name.clone(), d.difference, d.se)
                .with("E[F delta(u)]", d.lhs)
                .with("E<DF,u>", d.rhs),
        );
    }
    report.conclude_by_max_ratio();
    Ok(report)
}

/// `E δ(u)² = E‖u‖²_ℋ + E⟨Du,(Du)*⟩` and `E δ(u)² ≤ E‖u‖²_ℋ + E‖Du‖²` over the battery.
pub fn l2_identity_experiment(config: &VerifyConfig) -> Result<ExperimentReport> {
    let b = load_battery(config)?;
    let n_mc = config.malliavin.n_mc.unwrap_or(b.n_mc);
    let seed = config.seed_or(config.malliavin.seed, b.seed);
    let mut report = ExperimentReport::new(
        "l2_identity",
        "identity within 4 SE; mean(δ² - ‖u‖² - ‖Du‖²) <= 4 SE on every member",
    );
    battery_params(&mut report, &b, n_mc, seed);
    let gen = FbmGenerator::cholesky(b.grid()?, b.hurst_index()?, false)?;
    let mut worst_ineq: Option<(f64, f64, f64)> = None;
    for (i, member) in b.members.iter().enumerate() {
        let r = l2_identity_check(&b.process(i)?, &gen, seed, n_mc)?;
        report.push(
            Row::mc_zero(format!("identity {}", member.name), r.identity_difference, r.identity_se)
                .with("E delta^2", r.delta_sq)
                .with("E|u|^2", r.h_norm_sq)
                .with("E<Du,(Du)*>", r.adjoint_term),
        );
        let rhs = r.h_norm_sq + r.tensor_norm_sq;
        let mut row = Row::new(format!("inequality {}", member.name), r.delta_sq, rhs, r.inequality_se, r.inequality_pass);
        row.extra.insert("E|Du|^2".into(), r.tensor_norm_sq);
        if worst_ineq.is_none_or(|w| row.ratio > w.0 / w.1) {
            worst_ineq = Some((row.lhs, row.rhs, row.se));
        }
        report.push(row);
    }
    let (lhs, rhs, se) = worst_ineq.unwrap_or((0.0, 0.0, 0.0));
    report.conclude(lhs, rhs, se);
    Ok(report)
}
