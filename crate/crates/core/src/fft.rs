//! Unscaled forward and `1/N^n`-scaled inverse transforms over every axis of a grid.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

fn transform_axes(grid: &GridSpec, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
    let n = grid.n_points();
    let dim = grid.dim();
    assert_eq!(data.len(), grid.len());
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    // Last axis is contiguous.
    for line in data.chunks_exact_mut(n) {
        plan.process_with_scratch(line, &mut scratch);
    }
    if dim == 1 {
        return;
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = data[start + i * stride];
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                for (i, b) in buf.iter().enumerate() {
                    data[start + i * stride] = *b;
                }
            }
        }
    }
}

/// In-place unscaled forward transform.
pub fn forward(grid: &GridSpec, data: &mut [Complex64]) {
    let (fwd, _) = plans(grid.n_points());
    transform_axes(grid, data, &fwd);
}

/// In-place inverse transform including the `1/N^n` factor.
pub fn inverse(grid: &GridSpec, data: &mut [Complex64]) {
    let (_, inv) = plans(grid.n_points());
    transform_axes(grid, data, &inv);
    let scale = 1.0 / grid.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}
