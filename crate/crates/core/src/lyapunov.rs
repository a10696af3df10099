//! Finite-scale Lyapunov exponents, large-deviation profiles of the
//! Dirichlet determinants, and the uniform upper bound probe.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{mahler_d, Frequency, ModelSpec};
use crate::error::{LabError, Result};
use crate::stats;
use crate::transfer::monodromy_a_range;

/// Thresholds `H` at which deviation profiles are reported.
pub const DEVIATION_LEVELS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Default power of `log N` in the deviation scale.
pub const DEVIATION_EXPONENT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Rate of the regularized cocycle, nats per site.
    pub l_a: f64,
    /// `l_a − d`.
    pub l: f64,
    /// Mean of `log|b(x+iy)|` over the torus.
    pub d: f64,
    pub y: f64,
    pub n: usize,
    pub samples: usize,
    pub std_error: f64,
}

/// `log‖M^a_N(x + iy)‖` at every phase of the grid, in grid order.
pub fn log_norms_on_grid(model: &ModelSpec, y: f64, omega: &Frequency, e: Complex64, n: usize, phases: &[f64]) -> Vec<f64> {
    phases
        .par_iter()
        .map(|&x| {
            monodromy_a_range(model, Complex64::new(x, y), omega, e, 0, n as i64 - 1)
                .log_two_norm()
                .unwrap_or(f64::NEG_INFINITY)
        })
        .collect()
}

pub fn estimate_l(model: &ModelSpec, y: f64, omega: &Frequency, e: Complex64, n: usize, m: usize, seed: u64) -> Result<LyapunovEstimate> {
    if n == 0 || m < 2 {
        return Err(LabError::InvalidArgument(format!("need N ≥ 1 and M ≥ 2, got N = {n}, M = {m}")));
    }
    let phases = stats::phase_grid(m, seed);
    let per_site: Vec<f64> = log_norms_on_grid(model, y, omega, e, n, &phases).into_iter().map(|v| v / n as f64).collect();
    let (l_a, std_error) = stats::mean_and_stderr(&per_site);
    let d = mahler_d(&model.b, y)?;
    Ok(LyapunovEstimate { l_a, l: l_a - d, d, y, n, samples: m, std_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationProfile {
    pub n: usize,
    pub y: f64,
    /// The levels `H`; absolute thresholds are `H·(log N)^scaling_exponent`.
    pub thresholds: Vec<f64>,
    pub scaling_exponent: f64,
    /// `N·L^a_N` measured on the same grid.
    pub center: f64,
    /// Exceedance measures of `log|f^a_N|`, one per threshold.
    pub exceedance_measure: Vec<f64>,
    /// The same for the top-right, bottom-left and bottom-right entries of `M^a_N`.
    pub entry_exceedance: [Vec<f64>; 3],
    /// Largest observed `|log|f^a_N| − N·L^a_N|`.
    pub max_deviation: f64,
}

/// Profile with the default scaling `(log N)³`.
pub fn deviation_profile(model: &ModelSpec, y: f64, omega: &Frequency, e: Complex64, n: usize, grid_size: usize, seed: u64) -> Result<DeviationProfile> {
    deviation_profile_scaled(model, y, omega, e, n, grid_size, seed, DEVIATION_EXPONENT)
}

#[allow(clippy::too_many_arguments)]
pub fn deviation_profile_scaled(
    model: &ModelSpec,
    y: f64,
    omega: &Frequency,
    e: Complex64,
    n: usize,
    grid_size: usize,
    seed: u64,
    scaling_exponent: f64,
) -> Result<DeviationProfile> {
    if n < 2 || grid_size < 2 {
        return Err(LabError::InvalidArgument(format!("need N ≥ 2 and a grid, got N = {n}, grid = {grid_size}")));
    }
    let phases = stats::phase_grid(grid_size, seed);
    let samples: Vec<(f64, [f64; 4])> = phases
        .par_iter()
        .map(|&x| {
            let m = monodromy_a_range(model, Complex64::new(x, y), omega, e, 0, n as i64 - 1);
            let logs = [0, 1, 2, 3].map(|i| m.entry(i / 2, i % 2).log_abs());
            (m.log_two_norm().unwrap_or(f64::NEG_INFINITY), logs)
        })
        .collect();
    let norms: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let center = stats::mean(&norms);
    let scale = (n as f64).ln().powf(scaling_exponent);
    let thresholds = DEVIATION_LEVELS.to_vec();
    let measure = |entry: usize| -> Vec<f64> {
        thresholds
            .iter()
            .map(|h| {
                let hits = samples.iter().filter(|s| !((s.1[entry] - center).abs() <= h * scale)).count();
                hits as f64 / grid_size as f64
            })
            .collect()
    };
    let max_deviation = samples.iter().map(|s| (s.1[0] - center).abs()).fold(0.0, f64::max);
    Ok(DeviationProfile {
        n,
        y,
        thresholds: thresholds.clone(),
        scaling_exponent,
        center,
        exceedance_measure: measure(0),
        entry_exceedance: [measure(1), measure(2), measure(3)],
        max_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupProbe {
    pub n: usize,
    /// `max log‖M^a_N(x+iy)‖ − N·L^a_N` over the grid and `y ∈ {0, ±1/N}`.
    pub value: f64,
    /// `value / (log N)³`.
    pub normalized: f64,
}

pub fn sup_probe(model: &ModelSpec, omega: &Frequency, e: Complex64, n: usize, grid_size: usize, seed: u64) -> Result<SupProbe> {
    if n < 2 || grid_size < 2 {
        return Err(LabError::InvalidArgument(format!("need N ≥ 2 and a grid, got N = {n}, grid = {grid_size}")));
    }
    let phases = stats::phase_grid(grid_size, seed);
    let on_axis = log_norms_on_grid(model, 0.0, omega, e, n, &phases);
    let center = stats::mean(&on_axis);
    let h = 1.0 / n as f64;
    let mut top = on_axis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for y in [h, -h] {
        let v = log_norms_on_grid(model, y, omega, e, n, &phases);
        top = v.into_iter().fold(top, f64::max);
    }
    let value = top - center;
    Ok(SupProbe { n, value, normalized: value / (n as f64).ln().powi(3) })
}
