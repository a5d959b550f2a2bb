//! Semigroup, Bessel-potential, and square-function checks on the torus.

use rand_distr::{Distribution, StandardNormal};

use super::oracle::doubling_panels;
use super::{ExperimentReport, Row, Series, VerifyConfig, STABILITY};
use crate::error::Result;
use crate::rng::substream;
use crate::spectral::{
    bessel_potential, discrete_heat_weights, gradient_field, semigroup_apply, sobolev_norm, wrapped_kernel_convolution,
    GridField, SpatialGrid,
};

/// Named test fields on `grid`: smooth bumps, a single mode, a constant, and random fields.
fn field_battery(grid: SpatialGrid, seed: u64) -> Result<Vec<(String, GridField)>> {
    let d = grid.dimension();
    let l = grid.half_width();
    let r2 = move |x: [f64; 2], c: [f64; 2]| (0..d).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>();
    let mut rng = substream(seed, d as u64, 0);
    let white: Vec<f64> = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let white = GridField::new(grid, white)?;
    let smooth = semigroup_apply(&white, 0.05)?;
    let k = std::f64::consts::PI / l;
    Ok(vec![
        ("constant".into(), GridField::constant(grid, 1.5)),
        ("mode".into(), GridField::from_fn(grid, move |x| (3.0 * k * x[0]).cos() + (d as f64 - 1.0) * (2.0 * k * x[1]).sin())),
        ("gaussian".into(), GridField::from_fn(grid, move |x| (-r2(x, [0.5, -0.3]) / 2.0).exp())),
        (
            "signed_bumps".into(),
            GridField::from_fn(grid, move |x| (-r2(x, [-1.0, 0.0]) / 0.5).exp() - 0.7 * (-r2(x, [1.5, 1.0])).exp()),
        ),
        ("random_smooth".into(), smooth),
        ("random_white".into(), white),
    ])
}

fn rel(diff: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn grids(config: &VerifyConfig) -> Result<Vec<SpatialGrid>> {
    let c = &config.spectral;
    Ok(vec![SpatialGrid::new(1, c.half_width, c.points_1d)?, SpatialGrid::new(2, c.half_width, c.points_2d)?])
}

/// `T_0 = id`, `T_s T_t = T_{s+t}`, the Bessel isometry and inverse, and the
/// spectral semigroup against direct convolution with the periodized kernel.
pub fn spectral_laws_experiment(config: &VerifyConfig) -> Result<ExperimentReport> {
    let c = &config.spectral;
    let seed = config.seed_or(None, c.seed);
    let mut report = ExperimentReport::new("spectral_laws", "every relative defect <= tolerance");
    report.param("half_width", c.half_width).param("points_1d", c.points_1d).param("points_2d", c.points_2d);
    report.param("tolerance", c.tolerance).param("exponents", &c.exponents).param("seed", seed);
    for grid in grids(config)? {
        let d = grid.dimension();
        let mut defects: Vec<(&str, f64)> = Vec::new();
        let mut push = |name: &'static str, v: f64| match defects.iter_mut().find(|e| e.0 == name) {
            Some(e) => e.1 = e.1.max(v),
            None => defects.push((name, v)),
        };
        // The sampled kernel aliases the Nyquist band by about exp(-t (π/dx)²);
        // it is an oracle only once that falls below the tolerance.
        let nyquist_sq = (std::f64::consts::PI / grid.dx()).powi(2);
        let (kernel_times, skipped): (Vec<f64>, Vec<f64>) =
            [0.1, 1.0].into_iter().partition(|t: &f64| (-t * nyquist_sq).exp() <= 1e-3 * c.tolerance);
        if !skipped.is_empty() {
            report.note(format!("d={d}: kernel comparison skipped at t={skipped:?}, alias bound above tolerance"));
        }
        for (_, u) in field_battery(grid, seed)? {
            let scale = u.max_abs();
            push("T_0 = id", rel(semigroup_apply(&u, 0.0)?.max_abs_diff(&u)?, scale));
            for (s, t) in [(0.01, 0.03), (0.1, 0.25), (0.5, 1.0)] {
                let two = semigroup_apply(&semigroup_apply(&u, t)?, s)?;
                let one = semigroup_apply(&u, s + t)?;
                push("T_s T_t = T_(s+t)", rel(two.max_abs_diff(&one)?, one.max_abs().max(1e-300)));
            }
            for (n, m) in [(0.0, 1.0), (-1.0, 2.0), (1.5, -0.5), (2.0, 2.0)] {
                let lifted = bessel_potential(&u, m);
                for &p in &c.exponents {
                    let a = sobolev_norm(&lifted, n, p)?;
                    let b = sobolev_norm(&u, n + m, p)?;
                    push("Bessel isometry", rel((a - b).abs(), b));
                }
                let back = bessel_potential(&lifted, -m);
                push("Bessel inverse", rel(back.max_abs_diff(&u)?, scale));
            }
            for t in kernel_times.iter().copied() {
                let spectral = semigroup_apply(&u, t)?;
                let direct = wrapped_kernel_convolution(&u, t, 2)?;
                push("T_t = periodized kernel", rel(spectral.max_abs_diff(&direct)?, u.max_abs()));
            }
        }
        for (name, v) in defects {
            report.push(Row::deviation(format!("d={d} {name}"), v, c.tolerance, 0.0));
        }
    }
    report.conclude_by_max_ratio();
    Ok(report)
}

/// `‖T_t u‖_{L_p} ≤ ‖u‖_{L_p} (1 + slack)` on the field battery.
pub fn contraction_experiment(config: &VerifyConfig) -> Result<ExperimentReport> {
    let c = &config.spectral;
    let seed = config.seed_or(None, c.seed);
    let mut report = ExperimentReport::new("contraction", "every ‖T_t u‖_p / ‖u‖_p <= 1 + slack");
    report.param("half_width", c.half_width).param("points_1d", c.points_1d).param("points_2d", c.points_2d);
    report.param("slack", c.slack).param("exponents", &c.exponents).param("seed", seed);
    for grid in grids(config)? {
        let d = grid.dimension();
        let h2 = grid.dx().powi(2);
        let times = [h2, 2.0 * h2, 4.0 * h2, 0.1, 1.0];
        let mut excess = Vec::new();
        for &t in &times {
            let w = discrete_heat_weights(grid, t)?;
            excess.push((t, w.iter().map(|v| v.abs()).sum::<f64>() - 1.0));
        }
        report.note(format!(
            "d={d}: discrete kernel l1 excess {}",
            excess.iter().map(|(t, e)| format!("{:.3e} at t={t:.3e}", e)).collect::<Vec<_>>().join(", ")
        ));
        report.series.push(Series::new(format!("kernel_l1_excess_d{d}"), "t", "excess", excess));
        for (name, u) in field_battery(grid, seed)? {
            let mut worst = (0.0f64, 0.0, 0.0);
            for &p in &c.exponents {
                let base = u.lp_norm(p)?;
                for &t in &times {
                    let v = semigroup_apply(&u, t)?.lp_norm(p)?;
                    if v / base > worst.0 {
                        worst = (v / base, v, base);
                    }
                }
            }
            let (_, lhs, rhs) = worst;
            let pass = lhs <= rhs * (1.0 + c.slack);
            report.push(Row::new(format!("d={d} {name}"), lhs, rhs, 0.0, pass));
        }
    }
    report.conclude_by_max_ratio();
    Ok(report)
}

/// Smooth bump supported on `(a, b)`.
fn bump(s: f64, a: f64, b: f64) -> f64 {
    if s <= a || s >= b {
        return 0.0;
    }
    let z = 2.0 * (s - a) / (b - a) - 1.0;
    (1.0 - 1.0 / (1.0 - z * z)).exp()
}

/// Pointwise `|∇ T_τ h|` for every `τ = l δ`, `l < count`.
fn gradient_moduli(h: &GridField, delta: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    (0..count)
        .map(|l| {
            let g = gradient_field(&semigroup_apply(h, l as f64 * delta)?);
            Ok((0..h.grid().len()).map(|i| g.iter().map(|c| c.values()[i].powi(2)).sum::<f64>().sqrt()).collect())
        })
        .collect()
}

/// Trapezoid weights on `n + 1` equispaced nodes with spacing `delta`.
fn trapezoid(n: usize, delta: f64) -> impl Fn(usize) -> f64 {
    move |i| if i == 0 || i == n { delta / 2.0 } else { delta }
}

/// Both sides of the `U`-valued square-function inequality for
/// `f(t, x, θ) = Σ_q a_q(t) h_q(x) 1_{θ ∈ Θ_q}`, with `Θ_q` the `slices`
/// equal parts of `(0, 1)` and time window `(0, 2T)`.
fn square_function_sides(
    grid: SpatialGrid,
    hurst: f64,
    p: f64,
    horizon: f64,
    steps: usize,
    slices: usize,
) -> Result<(f64, f64)> {
    let delta = 1.0 / steps as f64;
    let n = (2.0 * horizon * steps as f64).round() as usize;
    let dtheta = 1.0 / slices as f64;
    let q = 1.0 / hurst;
    let n_x = grid.len();
    let dv = grid.cell_volume();
    let profiles: Vec<GridField> = (0..slices)
        .map(|j| {
            let c = -2.0 + 4.0 * j as f64 / (slices.max(2) - 1) as f64;
            let amp = 1.0 + j as f64 / slices as f64;
            GridField::from_fn(grid, move |x| {
                let r2: f64 = (0..grid.dimension()).map(|i| (x[i] - c * (1 - i) as f64).powi(2)).sum();
                amp * (-r2 / (2.0 * 0.64)).exp()
            })
        })
        .collect();
    let times: Vec<Vec<f64>> = (0..slices)
        .map(|j| {
            let a = horizon * j as f64 / (2.0 * slices as f64);
            (0..=n).map(|i| bump(i as f64 * delta, a, a + horizon / 2.0)).collect()
        })
        .collect();
    let moduli: Vec<Vec<Vec<f64>>> = profiles.iter().map(|h| gradient_moduli(h, delta, n + 1)).collect::<Result<_>>()?;

    let mut lhs = 0.0;
    let mut inner = vec![0.0; n_x];
    for i in 1..=n {
        inner.fill(0.0);
        let w_s = trapezoid(i, delta);
        for j in 0..=i {
            let ws = w_s(j);
            let tau = i - j;
            for (x, acc) in inner.iter_mut().enumerate() {
                let mut theta = 0.0;
                for s in 0..slices {
                    theta += dtheta * (times[s][j].abs() * moduli[s][tau][x]).powf(q);
                }
                *acc += ws * theta.powf(2.0 * hurst);
            }
        }
        let w_t = trapezoid(n, delta)(i);
        lhs += w_t * inner.iter().map(|v| v.powf(p / 2.0)).sum::<f64>() * dv;
    }

    let lp: Vec<f64> = profiles.iter().map(|h| h.values().iter().map(|v| v.abs().powf(p)).sum::<f64>() * dv).collect();
    let w_t = trapezoid(n, delta);
    let mut rhs = 0.0;
    for i in 0..=n {
        let theta: f64 = (0..slices).map(|s| dtheta * (times[s][i].abs().powf(p) * lp[s]).powf(1.0 / (p * hurst))).sum();
        rhs += w_t(i) * theta.powf(p * hurst);
    }
    Ok((lhs, rhs))
}

/// `∫_0^∞ ‖∇T_τ h‖²_{L₂} dτ` by quadrature, and its Fourier-side value
/// `Σ_ξ w(ξ)|ĥ(ξ)|² ΔV/N` with `w = Σ_a ξ_a² / (2|ξ|²)` over the non-Nyquist axes.
fn plancherel_pair(h: &GridField) -> Result<(f64, f64)> {
    let grid = h.grid();
    let dv = grid.cell_volume();
    let xi_max2 = grid.frequency_sq(0).max((std::f64::consts::PI / grid.dx()).powi(2) * grid.dimension() as f64);
    let xi_min2 = (std::f64::consts::PI / grid.half_width()).powi(2);
    let tau0 = 0.25 / xi_max2;
    let tau_max = 40.0 / xi_min2;
    let mut err = None;
    let quad = doubling_panels(tau0, tau_max, 20, |tau| {
        let g = match semigroup_apply(h, tau) {
            Ok(v) => gradient_field(&v),
            Err(e) => {
                err = Some(e);
                return 0.0;
            }
        };
        g.iter().map(|c| c.values().iter().map(|v| v * v).sum::<f64>()).sum::<f64>() * dv
    });
    if let Some(e) = err {
        return Err(e);
    }
    let n = grid.len() as f64;
    let mut fourier = 0.0;
    for (i, z) in h.spectrum().iter().enumerate() {
        let xi = grid.frequency(i);
        let k2 = grid.frequency_sq(i);
        if k2 == 0.0 {
            continue;
        }
        let num: f64 = (0..grid.dimension()).filter(|a| !grid.is_nyquist(i, *a)).map(|a| xi[a] * xi[a]).sum();
        fourier += num / (2.0 * k2) * z.norm_sqr();
    }
    Ok((quad, fourier * dv / n))
}

/// The square-function inequality for `L_{1/H}`-valued fields.
///
/// At `p = 2` with one `θ` slice the time integral of the left side reduces to
/// `∫_0^∞ ‖∇T_τ h‖² dτ`, which is compared against its Fourier-side value. For
/// every `p` the ratio of the two sides must be finite and move by at most 20%
/// when the time step and the spatial step are both halved.
pub fn littlewood_paley_experiment(config: &VerifyConfig) -> Result<ExperimentReport> {
    let c = &config.littlewood_paley;
    let mut report = ExperimentReport::new(
        "littlewood_paley",
        "p=2 slice matches the Fourier identity to the tolerance; every ratio finite and refinement-stable within 20%",
    );
    report.param("hurst", c.hurst).param("exponents", &c.exponents).param("half_width", c.half_width);
    report.param("points", c.points).param("horizon", c.horizon).param("steps", c.steps).param("slices", c.slices);
    report.param("identity_tolerance", c.identity_tolerance);

    let slab = 0.5f64;
    let slab_factor = slab.powf(2.0 * c.hurst);
    let g1 = SpatialGrid::new(1, c.half_width, c.points)?;
    let g2 = SpatialGrid::new(2, c.half_width, c.points.min(64))?;
    let identity_fields = [
        ("d=1 gaussian", GridField::from_fn(g1, |x| (-(x[0] - 0.5).powi(2) / 1.5).exp())),
        ("d=1 two bumps", GridField::from_fn(g1, |x| (-(x[0] + 1.0).powi(2)).exp() - 0.5 * (-(x[0] - 2.0).powi(2) / 0.5).exp())),
        ("d=2 gaussian", GridField::from_fn(g2, |x| (-(x[0] * x[0] + (x[1] - 0.5).powi(2)) / 1.2).exp())),
    ];
    for (label, h) in identity_fields {
        let (quad, fourier) = plancherel_pair(&h)?;
        let norm_sq = h.values().iter().map(|v| v * v).sum::<f64>() * h.grid().cell_volume();
        let row = Row::deviation(format!("p=2 identity {label}"), (quad - fourier) / fourier, c.identity_tolerance, 0.0)
            .with("lhs", slab_factor * quad)
            .with("fourier_side", slab_factor * fourier)
            .with("ratio_to_rhs", quad / norm_sq);
        report.push(row);
    }

    let mut headline = (0.0, 0.0);
    let mut points = Vec::new();
    for &p in &c.exponents {
        let coarse = square_function_sides(g1, c.hurst, p, c.horizon, c.steps, c.slices)?;
        let fine_grid = SpatialGrid::new(1, c.half_width, 2 * c.points)?;
        let fine = square_function_sides(fine_grid, c.hurst, p, c.horizon, 2 * c.steps, c.slices)?;
        let (r0, r1) = (coarse.0 / coarse.1, fine.0 / fine.1);
        let stable = r0.is_finite() && r1.is_finite() && (r1 - r0).abs() <= STABILITY * r0.abs();
        let row = Row::new(format!("p={p} ratio"), fine.0, fine.1, 0.0, stable).with("coarse_ratio", r0);
        if p == 4.0 || headline == (0.0, 0.0) {
            headline = (fine.0, fine.1);
        }
        points.push((p, r1));
        report.push(row);
    }
    report.series.push(Series::new("square_function_ratio", "p", "ratio", points));
    report.conclude(headline.0, headline.1, 0.0);
    Ok(report)
}
