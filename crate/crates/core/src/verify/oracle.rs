//! Quadrature references that share no code with the closed forms they check.

use gauss_quad::legendre::GaussLegendre;

fn rule(n: usize) -> GaussLegendre {
    GaussLegendre::new(n.try_into().expect("positive degree"))
}

/// `∫_{I_j} ∫_{I_k} |t - s|^{2H-2} ds dt` for two cells of width `h` that are
/// `gap` cells apart.
///
/// Diagonal cells reduce to `2∫_0^h (h - u) u^{2H-2} du`, integrated after
/// `v = u^{2H-1}` removes the singularity. Adjacent cells meet at a corner
/// singularity, removed by a Duffy split. Distant cells use a tensor rule.
pub fn cell_pair_integral(gap: usize, h: f64, hurst: f64) -> f64 {
    let e = 2.0 * hurst - 2.0;
    match gap {
        0 => {
            let k = 1.0 / (2.0 * hurst - 1.0);
            let top = h.powf(2.0 * hurst - 1.0);
            2.0 * k * rule(96).integrate(0.0, top, |v| h - v.powf(k))
        }
        1 => {
            // x = h - s, y = t - h; on y ≤ x put y = x w, then ∫_0^h x^{2H-1} dx = h^{2H}/(2H).
            let inner = rule(48).integrate(0.0, 1.0, |w| (1.0 + w).powf(e));
            2.0 * h.powf(2.0 * hurst) / (2.0 * hurst) * inner
        }
        g => {
            let q = rule(24);
            let lo = g as f64 * h;
            q.integrate(0.0, h, |s| q.integrate(lo, lo + h, |t| (t - s).powf(e)))
        }
    }
}

/// Reference `⟨φ, ψ⟩_ℋ` and its absolute-kernel scale `α Σ |c_j||d_k| I_{jk}`
/// for step functions on a uniform grid of `m` cells of width `h`.
pub fn h_inner_reference(c: &[f64], d: &[f64], h: f64, hurst: f64) -> (f64, f64) {
    let m = c.len();
    let alpha = hurst * (2.0 * hurst - 1.0);
    let table: Vec<f64> = (0..m).map(|g| cell_pair_integral(g, h, hurst)).collect();
    let mut value = 0.0;
    let mut scale = 0.0;
    for j in 0..m {
        for k in 0..m {
            let i = table[j.abs_diff(k)];
            value += c[j] * d[k] * i;
            scale += (c[j] * d[k]).abs() * i;
        }
    }
    (alpha * value, alpha * scale)
}

/// `∫_0^∞ f(τ) dτ` by Gauss–Legendre panels `[0, τ₀]`, `[τ₀, 2τ₀]`, ... up to `τ_max`,
/// for integrands that decay on `[τ_max, ∞)` below working precision.
pub fn doubling_panels(tau0: f64, tau_max: f64, points: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let q = rule(points);
    let mut total = q.integrate(0.0, tau0, &mut f);
    let mut a = tau0;
    while a < tau_max {
        total += q.integrate(a, 2.0 * a, &mut f);
        a *= 2.0;
    }
    total
}
