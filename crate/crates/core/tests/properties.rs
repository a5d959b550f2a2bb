//! Invariants of the closed forms, checked on random inputs.

use proptest::prelude::*;

use fracheat::fbm::{increment_covariance, FbmGenerator, HurstIndex, SamplerKind, TimeGrid};
use fracheat::kernel::{abs_h_norm, h_inner, lp_time_norm, StepFunction};
use fracheat::malliavin::{wiener_integral, CylindricalRV, Family, SmoothFunctional};
use fracheat::solver::{deterministic_part, solve, solve_with_events, Events, ProblemSpec};
use fracheat::spectral::{
    bessel_potential, semigroup_apply, sobolev_norm, wrapped_kernel_convolution, GridField, SpatialGrid,
};
use fracheat::verify::oracle::h_inner_reference;

fn hurst() -> impl Strategy<Value = f64> {
    0.51f64..0.97
}

/// Grid with `m` cells and coefficient vectors `a`, `b` on it.
fn step_pair() -> impl Strategy<Value = (f64, Vec<f64>, Vec<f64>)> {
    (1usize..20, 0.3f64..3.0).prop_flat_map(|(m, t)| {
        (Just(t), prop::collection::vec(-3.0f64..3.0, m), prop::collection::vec(-3.0f64..3.0, m))
    })
}

fn steps(t: f64, a: &[f64]) -> StepFunction {
    StepFunction::new(TimeGrid::new(t, a.len()).unwrap(), a.to_vec()).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn h_inner_is_symmetric_bilinear_and_cauchy_schwarz((t, a, b) in step_pair(), h in hurst(), c in -2.0f64..2.0) {
        let hu = HurstIndex::new(h).unwrap();
        let (phi, psi) = (steps(t, &a), steps(t, &b));
        let ab = h_inner(&phi, &psi, hu).unwrap();
        let ba = h_inner(&psi, &phi, hu).unwrap();
        prop_assert!(close(ab, ba, 1e-12));
        let aa = h_inner(&phi, &phi, hu).unwrap();
        let bb = h_inner(&psi, &psi, hu).unwrap();
        prop_assert!(aa >= -1e-12 && bb >= -1e-12);
        prop_assert!(ab * ab <= aa * bb * (1.0 + 1e-10) + 1e-12);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c * x + y).collect();
        let lin = h_inner(&steps(t, &sum), &psi, hu).unwrap();
        prop_assert!(close(lin, c * ab + bb, 1e-10));
    }

    #[test]
    fn h_inner_matches_the_quadrature_oracle((t, a, b) in step_pair(), h in hurst()) {
        let hu = HurstIndex::new(h).unwrap();
        let dt = t / a.len() as f64;
        let (reference, scale) = h_inner_reference(&a, &b, dt, h);
        let value = h_inner(&steps(t, &a), &steps(t, &b), hu).unwrap();
        prop_assert!((value - reference).abs() <= 1e-6 * scale);
    }

    #[test]
    fn indicator_pairs_are_increment_covariances(m in 2usize..24, i in 0usize..24, j in 0usize..24, k in 0usize..24, l in 0usize..24, h in hurst()) {
        let grid = TimeGrid::new(1.0, m).unwrap();
        let hu = HurstIndex::new(h).unwrap();
        let (a, b) = (i.min(j) % m, (i.max(j) % m) + 1);
        let (c, d) = (k.min(l) % m, (k.max(l) % m) + 1);
        let (a, b) = (a.min(b - 1), b);
        let (c, d) = (c.min(d - 1), d);
        let (ta, tb, tc, td) = (grid.node(a), grid.node(b), grid.node(c), grid.node(d));
        let phi = StepFunction::indicator(grid, ta, tb, 1.0).unwrap();
        let psi = StepFunction::indicator(grid, tc, td, 1.0).unwrap();
        let v = h_inner(&phi, &psi, hu).unwrap();
        prop_assert!(close(v, increment_covariance(ta, tb, tc, td, hu), 1e-12));
    }

    #[test]
    fn abs_norm_dominates_and_time_norms_order((t, a, _b) in step_pair(), h in hurst()) {
        let hu = HurstIndex::new(h).unwrap();
        let phi = steps(t, &a);
        let hn = h_inner(&phi, &phi, hu).unwrap();
        let abs = abs_h_norm(&phi, hu);
        prop_assert!(abs * abs >= hn * (1.0 - 1e-12) - 1e-12);
        let l1h = lp_time_norm(&phi, 1.0 / h).unwrap();
        let l2 = lp_time_norm(&phi, 2.0).unwrap();
        prop_assert!(l1h <= t.powf(h - 0.5) * l2 * (1.0 + 1e-12) + 1e-12);
        if t <= 1.0 {
            prop_assert!(l1h <= l2 * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn wiener_integral_of_an_indicator_is_the_increment(m in 1usize..40, i in 0usize..40, j in 0usize..40, h in hurst(), seed in any::<u64>()) {
        let grid = TimeGrid::new(1.0, m).unwrap();
        let hu = HurstIndex::new(h).unwrap();
        let path = FbmGenerator::cholesky(grid, hu, false).unwrap().path(seed, 0, 0);
        let (a, b) = (i.min(j) % m, i.max(j) % m + 1);
        let (a, b) = (a.min(b - 1), b);
        let phi = StepFunction::indicator(grid, grid.node(a), grid.node(b), 1.0).unwrap();
        let w = wiener_integral(&phi, &path).unwrap();
        prop_assert_eq!(w, (a..b).map(|c| path.values[c + 1] - path.values[c]).sum::<f64>());
        prop_assert!((w - (path.values[b] - path.values[a])).abs() <= 1e-12 * (1.0 + w.abs()));
    }

    #[test]
    fn equal_seeds_give_identical_paths(m in 1usize..64, h in hurst(), seed in any::<u64>(), r in 0u64..1000, circulant in any::<bool>()) {
        let grid = TimeGrid::new(1.0, m).unwrap();
        let kind = if circulant { SamplerKind::Circulant } else { SamplerKind::Cholesky };
        let g1 = FbmGenerator::new(kind, grid, HurstIndex::new(h).unwrap()).unwrap();
        let g2 = FbmGenerator::new(kind, grid, HurstIndex::new(h).unwrap()).unwrap();
        prop_assert_eq!(g1.path(seed, r, 3).values, g2.path(seed, r, 3).values);
        prop_assert_ne!(g1.path(seed, r, 3).values, g1.path(seed, r, 4).values);
    }

    #[test]
    fn partials_match_central_differences(
        damped in any::<bool>(),
        coefs in prop::collection::vec(-2.0f64..2.0, 3),
        x in prop::collection::vec(-1.5f64..1.5, 2),
    ) {
        let family = if damped { Family::Damped } else { Family::Polynomial };
        let monomials = vec![(coefs[0], vec![2, 1]), (coefs[1], vec![0, 3]), (coefs[2], vec![1, 0])];
        let f = SmoothFunctional::new(2, family, &monomials).unwrap();
        for i in 0..2 {
            let step = 1e-5;
            let (mut up, mut down) = (x.clone(), x.clone());
            up[i] += step;
            down[i] -= step;
            let fd = (f.eval(&up) - f.eval(&down)) / (2.0 * step);
            let exact = f.partial(i).eval(&x);
            prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{fd} vs {exact}");
        }
    }

    #[test]
    fn malliavin_derivative_is_linear(
        a in -2.0f64..2.0, b in -2.0f64..2.0,
        c1 in prop::collection::vec(-1.0f64..1.0, 8), c2 in prop::collection::vec(-1.0f64..1.0, 8),
        x in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let args = vec![StepFunction::new(grid, c1).unwrap(), StepFunction::new(grid, c2).unwrap()];
        let f = SmoothFunctional::new(2, Family::Polynomial, &[(1.0, vec![2, 0]), (0.5, vec![1, 1])]).unwrap();
        let g = SmoothFunctional::new(2, Family::Polynomial, &[(-1.0, vec![0, 3]), (2.0, vec![1, 0])]).unwrap();
        let ff = CylindricalRV::new(grid, f, args.clone(), 0).unwrap();
        let gg = CylindricalRV::new(grid, g, args, 0).unwrap();
        let combo = CylindricalRV::combine(a, &ff, b, &gg).unwrap();
        let (df, dg, dc) = (ff.gradient_at(&x), gg.gradient_at(&x), combo.gradient_at(&x));
        for ((p, q), r) in df.iter().zip(&dg).zip(&dc) {
            prop_assert!((a * p + b * q - r).abs() <= 1e-12 * (1.0 + r.abs()));
        }
    }
}

fn random_field(grid: SpatialGrid, values: &[f64]) -> GridField {
    GridField::new(grid, values.to_vec()).unwrap()
}

fn field_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn semigroup_laws_and_bessel_composition(v in field_values(64), s in 0.0f64..1.0, t in 0.0f64..1.0, n in -2.0f64..2.0, m in -2.0f64..2.0) {
        let grid = SpatialGrid::new(1, 8.0, 64).unwrap();
        let u = random_field(grid, &v);
        let scale = u.max_abs().max(1e-300);
        prop_assert!(semigroup_apply(&u, 0.0).unwrap().max_abs_diff(&u).unwrap() <= 1e-10 * scale);
        let two = semigroup_apply(&semigroup_apply(&u, t).unwrap(), s).unwrap();
        let one = semigroup_apply(&u, s + t).unwrap();
        prop_assert!(two.max_abs_diff(&one).unwrap() <= 1e-10 * scale);
        let composed = bessel_potential(&bessel_potential(&u, n), m);
        let direct = bessel_potential(&u, n + m);
        prop_assert!(composed.max_abs_diff(&direct).unwrap() <= 1e-10 * direct.max_abs().max(1e-300));
        for p in [2.0, 4.0] {
            let a = sobolev_norm(&bessel_potential(&u, m), n, p).unwrap();
            let b = sobolev_norm(&u, n + m, p).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b);
        }
    }

    #[test]
    fn heat_flow_contracts_lp(v in field_values(16 * 16), k in 1.0f64..400.0, d2 in any::<bool>()) {
        let grid = if d2 { SpatialGrid::new(2, 4.0, 16).unwrap() } else { SpatialGrid::new(1, 4.0, 256).unwrap() };
        let u = random_field(grid, &v[..grid.len()]);
        let t = k * grid.dx().powi(2);
        let tu = semigroup_apply(&u, t).unwrap();
        for p in [2.0, 4.0] {
            prop_assert!(tu.lp_norm(p).unwrap() <= u.lp_norm(p).unwrap() * (1.0 + 1e-8));
        }
        // The p = 2 multiplier has modulus at most one, so no slack is needed beyond roundoff.
        prop_assert!(tu.lp_norm(2.0).unwrap() <= u.lp_norm(2.0).unwrap() * (1.0 + 1e-14));
    }

    #[test]
    fn semigroup_matches_the_wrapped_kernel_on_resolved_fields(
        amps in prop::collection::vec(-1.0f64..1.0, 6),
        t in 0.05f64..0.9,
    ) {
        // Band-limited data: the sampled kernel is exact up to its Nyquist alias.
        let grid = SpatialGrid::new(1, 8.0, 128).unwrap();
        let l = grid.half_width();
        let u = GridField::from_fn(grid, |[x, _]| {
            amps.iter()
                .enumerate()
                .map(|(k, a)| a * (std::f64::consts::PI * (k + 1) as f64 * x / l + k as f64).cos())
                .sum()
        });
        prop_assume!(4.0 * t.sqrt() < l / 2.0);
        let spectral = semigroup_apply(&u, t).unwrap();
        let direct = wrapped_kernel_convolution(&u, t, 2).unwrap();
        prop_assert!(spectral.max_abs_diff(&direct).unwrap() <= 1e-8 * u.max_abs().max(1e-300));
    }
}

const SOLVER_PROBLEM: &str = r#"
[time]
horizon = 1.0
cells = 16
hurst = 0.7
[space]
dimension = 1
half_width = 8.0
points = 32
[initial]
profile = { kind = "gaussian", center = [0.5], width = 1.0 }
[[forcing]]
interval = [0.25, 0.75]
profile = { kind = "gaussian", center = [-1.0], width = 0.7, amplitude = 0.5 }
[[noise]]
[[noise.term]]
interval = [0.0, 0.5]
profile = { kind = "gaussian", center = [0.0], width = 0.6 }
functional = { monomials = [[1.0, [1]]], args = [[[0.0, 0.5, 1.0]]] }
[[noise.term]]
interval = [0.5, 1.0]
profile = { kind = "gaussian", center = [0.5], width = 0.5, amplitude = -1.0 }
[run]
seed = 1
"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solution_parts_add_up_and_scale_with_the_noise(seed in any::<u64>(), r in 0u64..100) {
        let spec = ProblemSpec::from_toml_str(SOLVER_PROBLEM).unwrap();
        let mut problem = spec.build().unwrap();
        problem.seed = seed;
        let gen = problem.generator().unwrap();
        let paths = problem.paths(&gen, r);
        let sol = solve(&problem, &paths, r).unwrap();
        for ((u, a), b) in sol.u.iter().zip(&sol.u1).zip(&sol.u2) {
            prop_assert_eq!(u, &a.add(b).unwrap());
        }

        let mut doubled_spec = spec.clone();
        for n in &mut doubled_spec.noise {
            for term in &mut n.terms {
                if let fracheat::solver::FieldProfile::Gaussian { amplitude, .. } = &mut term.profile {
                    *amplitude *= 2.0;
                }
            }
        }
        let mut doubled = doubled_spec.build().unwrap();
        doubled.seed = seed;
        let twice = solve(&doubled, &paths, r).unwrap();
        for (a, b) in sol.u2.iter().zip(&twice.u2) {
            prop_assert!(b.max_abs_diff(&a.scaled(2.0)).unwrap() <= 1e-12 * (1.0 + b.max_abs()));
        }
    }

    #[test]
    fn zero_noise_reduces_to_the_heat_flow(shift in -2.0f64..2.0, width in 0.5f64..1.2) {
        let mut spec = ProblemSpec::from_toml_str(SOLVER_PROBLEM).unwrap();
        spec.noise.clear();
        spec.initial.profile = fracheat::solver::FieldProfile::Gaussian { center: vec![shift], width, amplitude: 1.0 };
        let problem = spec.build().unwrap();
        let events = Events::certain(&problem);
        let sol = solve_with_events(&problem, &[], 0, events.clone()).unwrap();
        for (j, u) in sol.u.iter().enumerate() {
            let exact = deterministic_part(&problem, &events, j).unwrap();
            prop_assert!(u.max_abs_diff(&exact).unwrap() <= 1e-10 * exact.max_abs().max(1.0));
        }
    }
}
