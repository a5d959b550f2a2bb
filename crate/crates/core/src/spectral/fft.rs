use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::SpatialGrid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Unnormalized transform along every axis of a row-major `M^d` array.
fn transform(grid: &SpatialGrid, data: &mut [Complex64], forward: bool) {
    let m = grid.points();
    let fft = plan(m, forward);
    // Last axis is contiguous.
    fft.process(data);
    if grid.dimension() == 2 {
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..m {
            for i in 0..m {
                col[i] = data[i * m + j];
            }
            fft.process(&mut col);
            for i in 0..m {
                data[i * m + j] = col[i];
            }
        }
    }
}

pub(crate) fn forward(grid: &SpatialGrid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut data, true);
    data
}

/// Inverse transform, normalized by `1/N`, keeping the real part.
pub(crate) fn inverse_real(grid: &SpatialGrid, mut spectrum: Vec<Complex64>) -> Vec<f64> {
    transform(grid, &mut spectrum, false);
    let n = spectrum.len() as f64;
    spectrum.into_iter().map(|z| z.re / n).collect()
}
