//! Integrated density of states, Wegner integrals, the multiscale IDS
//! inequality, Hölder-exponent fits and the end-to-end theorem gate.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{check_diophantine, Frequency, ModelSpec};
use crate::error::{LabError, Result};
use crate::lyapunov::estimate_l;
use crate::operator::{IndexInterval, RealTridiag};
use crate::stats;

/// Default `ε` in the exponent `p − ε`.
pub const DEFAULT_EPS_HOLDER: f64 = 0.1;
/// Lower end of the admissible `η` range is this multiple of `(1/N)^{1/p}`.
pub const ETA_RANGE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsCurve {
    pub n: usize,
    pub samples: usize,
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

fn restrictions(model: &ModelSpec, omega: &Frequency, n: usize, m: usize, seed: u64) -> Result<Vec<RealTridiag>> {
    let lam = IndexInterval::first(n)?;
    Ok(stats::phase_grid(m, seed).par_iter().map(|&x| RealTridiag::new(model, x, omega, lam)).collect())
}

/// `𝒩_N(E, x, ω)`.
pub fn ids_finite(model: &ModelSpec, x: f64, omega: &Frequency, n: usize, e: f64) -> Result<f64> {
    let rt = RealTridiag::new(model, x, omega, IndexInterval::first(n)?);
    Ok(rt.count_below(e) as f64 / n as f64)
}

/// Phase average of `𝒩_N(E, ·, ω)` and its standard error.
pub fn ids_avg(model: &ModelSpec, omega: &Frequency, n: usize, e: f64, m: usize, seed: u64) -> Result<(f64, f64)> {
    let curve = ids_curve(model, omega, n, &[e], m, seed)?;
    Ok((curve.values[0], curve.std_errors[0]))
}

/// `ids_avg` on a list of energies, sharing the per-phase matrices.
pub fn ids_curve(model: &ModelSpec, omega: &Frequency, n: usize, energies: &[f64], m: usize, seed: u64) -> Result<IdsCurve> {
    if m < 2 {
        return Err(LabError::InvalidArgument(format!("need at least two phases, got {m}")));
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rts = restrictions(model, omega, n, m, seed)?;
    let per_phase: Vec<Vec<f64>> = rts
        .par_iter()
        .map(|rt| sorted.iter().map(|&e| rt.count_below(e) as f64 / n as f64).collect())
        .collect();
    let mut values = Vec::with_capacity(sorted.len());
    let mut std_errors = Vec::with_capacity(sorted.len());
    for i in 0..sorted.len() {
        let col: Vec<f64> = per_phase.iter().map(|row| row[i]).collect();
        let (v, se) = stats::mean_and_stderr(&col);
        values.push(v);
        std_errors.push(se);
    }
    Ok(IdsCurve { n, samples: m, energies: sorted, values, std_errors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WegnerIntegral {
    pub n: usize,
    pub e: f64,
    pub eta: f64,
    /// Phase average of the eigenvalue count in `[E − η, E + η)`.
    pub integral: f64,
    pub std_error: f64,
    /// `N·η^{p − ε}`.
    pub bound: f64,
    pub pass: bool,
}

/// The admissible window `[10·(1/N)^{1/p}, 1/N]`.
pub fn eta_range(n: usize, p: f64) -> (f64, f64) {
    let inv = 1.0 / n as f64;
    (ETA_RANGE_FACTOR * inv.powf(1.0 / p), inv)
}

fn model_p(model: &ModelSpec) -> Result<f64> {
    model
        .p()
        .ok_or_else(|| LabError::InvalidArgument("both coefficients are constant: the Hölder exponent is undefined".into()))
}

/// Wegner integral with the `η` range enforced.
#[allow(clippy::too_many_arguments)]
pub fn wegner_integral(model: &ModelSpec, omega: &Frequency, n: usize, e: f64, eta: f64, m: usize, seed: u64, eps_holder: f64) -> Result<WegnerIntegral> {
    let p = model_p(model)?;
    let (lo, hi) = eta_range(n, p);
    if !(lo..=hi * (1.0 + 1e-12)).contains(&eta) {
        return Err(LabError::EtaOutOfRange { eta, lo, hi });
    }
    wegner_integral_unchecked(model, omega, n, e, eta, m, seed, eps_holder)
}

/// Wegner integral for exploratory sweeps: no range check.
#[allow(clippy::too_many_arguments)]
pub fn wegner_integral_unchecked(model: &ModelSpec, omega: &Frequency, n: usize, e: f64, eta: f64, m: usize, seed: u64, eps_holder: f64) -> Result<WegnerIntegral> {
    let p = model_p(model)?;
    if eta <= 0.0 || m < 2 {
        return Err(LabError::InvalidArgument(format!("need η > 0 and M ≥ 2, got η = {eta}, M = {m}")));
    }
    let rts = restrictions(model, omega, n, m, seed)?;
    let counts: Vec<f64> = rts.par_iter().map(|rt| rt.window_count(e, eta) as f64).collect();
    let (integral, std_error) = stats::mean_and_stderr(&counts);
    let bound = n as f64 * eta.powf(p - eps_holder);
    Ok(WegnerIntegral { n, e, eta, integral, std_error, bound, pass: integral <= bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleIdsCheck {
    pub n: usize,
    pub m: usize,
    /// `(1/mN)·avg_x |σ(H_{mN}(x)) ∩ I|`.
    pub lhs: f64,
    /// `(1/mN)·avg_x Σ_k |σ(H_N(x + kNω)) ∩ I| + 4/N`.
    pub rhs: f64,
    /// `(1/N)·avg_x |σ(H_N(x)) ∩ I| + 4/N` on the same grid.
    pub rhs_plain: f64,
    pub std_error: f64,
    pub pass: bool,
}

/// Both sides of the multiscale IDS inequality on one phase grid, for the
/// energy window `[lo, hi)`.
pub fn multiscale_ids_check(model: &ModelSpec, omega: &Frequency, n: usize, m: usize, window: (f64, f64), phases: usize, seed: u64) -> Result<MultiscaleIdsCheck> {
    if m < 2 || phases < 2 || n == 0 || window.1 < window.0 {
        return Err(LabError::InvalidArgument(format!("need m ≥ 2, M ≥ 2, N ≥ 1 and an ordered window; got m = {m}, M = {phases}")));
    }
    let (lo, hi) = window;
    let xs = stats::phase_grid(phases, seed);
    let rows: Vec<(f64, f64)> = xs
        .par_iter()
        .map(|&x| {
            let count = |rt: &RealTridiag| (rt.count_below(hi) - rt.count_below(lo)) as f64;
            let big = RealTridiag::new(model, x, omega, IndexInterval::first(m * n).expect("nonempty"));
            let blocks: f64 = (0..m as i64)
                .map(|k| {
                    let lam = IndexInterval::new(k * n as i64, (k + 1) * n as i64 - 1).expect("nonempty");
                    count(&RealTridiag::new(model, x, omega, lam))
                })
                .sum();
            (count(&big) / (m * n) as f64, blocks / (m * n) as f64)
        })
        .collect();
    let big: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let blocks: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let plain: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            let rt = RealTridiag::new(model, x, omega, IndexInterval::first(n).expect("nonempty"));
            (rt.count_below(hi) - rt.count_below(lo)) as f64 / n as f64
        })
        .collect();
    let (lhs, se_l) = stats::mean_and_stderr(&big);
    let (rhs_blocks, se_r) = stats::mean_and_stderr(&blocks);
    let rhs = rhs_blocks + 4.0 / n as f64;
    let rhs_plain = stats::mean(&plain) + 4.0 / n as f64;
    let std_error = se_l.hypot(se_r);
    Ok(MultiscaleIdsCheck { n, m, lhs, rhs, rhs_plain, std_error, pass: lhs <= rhs + 2.0 * std_error })
}

/// Least-squares slope of `log y` against `log x` and its `r²`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(LabError::InvalidArgument("need at least two positive pairs".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (mx, my) = (stats::mean(&lx), stats::mean(&ly));
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(LabError::InvalidArgument("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).min(1.0) };
    Ok((slope, r_squared))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub e: f64,
    pub eta_grid: Vec<f64>,
    /// `𝒩(E+η) − 𝒩(E−η)` at every grid point.
    pub moduli: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Grid points above the noise floor, which enter the fit.
    pub used: Vec<bool>,
    pub exponent: f64,
    pub r_squared: f64,
    pub predicted_p: f64,
    pub eps_holder: f64,
    /// `exponent − (p − ε)`.
    pub exponent_vs_p: f64,
}

/// Fits the local modulus of continuity of the phase-averaged IDS at `E`.
#[allow(clippy::too_many_arguments)]
pub fn holder_fit(model: &ModelSpec, omega: &Frequency, n: usize, e: f64, eta_grid: &[f64], m: usize, seed: u64, eps_holder: f64) -> Result<HolderFit> {
    if eta_grid.len() < 6 || eta_grid.windows(2).any(|w| w[1] <= w[0]) || eta_grid[0] <= 0.0 {
        return Err(LabError::InvalidArgument("η grid needs at least six strictly increasing positive points".into()));
    }
    let predicted_p = model_p(model)?;
    let rts = restrictions(model, omega, n, m, seed)?;
    // paired differences per phase: the modulus is a window count
    let per_phase: Vec<Vec<f64>> = rts
        .par_iter()
        .map(|rt| eta_grid.iter().map(|&eta| rt.window_count(e, eta) as f64 / n as f64).collect())
        .collect();
    let mut moduli = Vec::with_capacity(eta_grid.len());
    let mut std_errors = Vec::with_capacity(eta_grid.len());
    for i in 0..eta_grid.len() {
        let col: Vec<f64> = per_phase.iter().map(|row| row[i]).collect();
        let (v, se) = stats::mean_and_stderr(&col);
        moduli.push(v);
        std_errors.push(se);
    }
    let used: Vec<bool> = moduli.iter().zip(&std_errors).map(|(v, se)| *v > 0.0 && *v > 3.0 * se).collect();
    let usable = used.iter().filter(|u| **u).count();
    if usable < 4 {
        return Err(LabError::InsufficientSignal { usable, needed: 4 });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = eta_grid.iter().zip(&moduli).zip(&used).filter(|(_, u)| **u).map(|((x, y), _)| (*x, *y)).unzip();
    let (exponent, r_squared) = fit_log_log(&xs, &ys)?;
    Ok(HolderFit {
        e,
        eta_grid: eta_grid.to_vec(),
        moduli,
        std_errors,
        used,
        exponent,
        r_squared,
        predicted_p,
        eps_holder,
        exponent_vs_p: exponent - (predicted_p - eps_holder),
    })
}

/// `count` log-spaced points from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Candidate energies for Hölder fits: eigenvalues of `H_N(x)` at evenly
/// spaced indices in the middle half of the spectrum, restricted to `[lo, hi]`.
pub fn bulk_energies(model: &ModelSpec, omega: &Frequency, n: usize, x: f64, count: usize, window: (f64, f64)) -> Result<Vec<f64>> {
    let rt = RealTridiag::new(model, x, omega, IndexInterval::first(n)?);
    let (k0, k1) = (rt.count_below(window.0).max(n / 4), rt.count_below(window.1).min(3 * n / 4));
    if k1 <= k0 || count == 0 {
        return Ok(Vec::new());
    }
    let span = k1 - k0;
    Ok((0..count).map(|i| rt.eigenvalue(k0 + (2 * i + 1) * span / (2 * count))).collect())
}

/// Everything the end-to-end gate needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    pub model: ModelSpec,
    pub omega: f64,
    pub diophantine_c: f64,
    pub diophantine_alpha: f64,
    pub certify_up_to: u64,
    /// Energy interval `[lo, hi]`.
    pub energy_interval: (f64, f64),
    pub energy_count: usize,
    /// Scales `N` for the Wegner integrals.
    pub scales: Vec<usize>,
    /// `η = N^{−t}` for every `t` listed.
    pub eta_exponents: Vec<f64>,
    pub phases: usize,
    pub lyapunov_n: usize,
    pub lyapunov_phases: usize,
    /// Lyapunov floor `γ`.
    pub gamma: f64,
    pub eps_holder: f64,
    pub holder_n: usize,
    pub holder_phases: usize,
    pub holder_etas: Vec<f64>,
    pub holder_energies: usize,
    /// Required fraction of fits with exponent `≥ p − ε` and `r² ≥ 0.9`.
    pub holder_pass_fraction: f64,
    pub seed: u64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::almost_mathieu(3.0),
            omega: crate::coeffs::GOLDEN_MEAN,
            diophantine_c: 0.2,
            diophantine_alpha: 2.0,
            certify_up_to: 100_000,
            energy_interval: (-1.0, 1.0),
            energy_count: 9,
            scales: vec![256, 512, 1024],
            eta_exponents: vec![1.0],
            phases: 64,
            lyapunov_n: 500,
            lyapunov_phases: 32,
            gamma: 0.5,
            eps_holder: DEFAULT_EPS_HOLDER,
            holder_n: 2048,
            holder_phases: 64,
            holder_etas: log_spaced(1e-3, 1e-2, 6),
            holder_energies: 5,
            holder_pass_fraction: 0.8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRow {
    pub e: f64,
    pub l: f64,
    pub std_error: f64,
    pub above_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerRow {
    pub n: usize,
    pub e: f64,
    pub eta: f64,
    pub result: std::result::Result<WegnerIntegral, LabError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderRow {
    pub e: f64,
    pub ids: f64,
    pub result: std::result::Result<HolderFit, LabError>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub omega: f64,
    pub frequency_certified: bool,
    pub n_b: usize,
    pub d0: usize,
    pub p: Option<f64>,
    pub eps_holder: f64,
    pub gamma: f64,
    pub lyapunov: Vec<LyapunovRow>,
    pub hypothesis_violated: bool,
    pub wegner: Vec<WegnerRow>,
    pub wegner_pass: bool,
    pub holder: Vec<HolderRow>,
    pub holder_fraction: f64,
    pub holder_pass: bool,
    pub passed: bool,
    pub errors: Vec<String>,
    pub notes: Vec<String>,
}

fn gate_notes(cfg: &GateConfig) -> Vec<String> {
    vec![
        "n_b counts torus zeros of b̃ with multiplicity".into(),
        format!("η range lower end uses factor {ETA_RANGE_FACTOR} over (1/N)^(1/p)"),
        "spectral windows are half-open [E−η, E+η)".into(),
        format!("Hölder fits compare against p − ε with ε = {}", cfg.eps_holder),
        "Hölder energies are bulk eigenvalues with phase-averaged IDS in [0.2, 0.8]".into(),
    ]
}

/// Runs the full pipeline; sub-operation failures are recorded, never fatal.
pub fn theorem_gate(cfg: &GateConfig) -> GateReport {
    let mut errors = Vec::new();
    let model = &cfg.model;
    let (n_b, d0, p) = (model.n_b(), model.d0(), model.p());
    let mut report = GateReport {
        omega: cfg.omega,
        frequency_certified: false,
        n_b,
        d0,
        p,
        eps_holder: cfg.eps_holder,
        gamma: cfg.gamma,
        lyapunov: Vec::new(),
        hypothesis_violated: false,
        wegner: Vec::new(),
        wegner_pass: false,
        holder: Vec::new(),
        holder_fraction: 0.0,
        holder_pass: false,
        passed: false,
        errors: Vec::new(),
        notes: gate_notes(cfg),
    };

    let omega = match check_diophantine(cfg.omega, cfg.diophantine_c, cfg.diophantine_alpha, cfg.certify_up_to) {
        Ok(f) => {
            report.frequency_certified = true;
            f
        }
        Err(err) => {
            errors.push(format!("frequency: {err}"));
            report.hypothesis_violated = true;
            Frequency::uncertified(cfg.omega)
        }
    };
    let p = match p {
        Some(p) => p,
        None => {
            errors.push("Hölder exponent undefined for constant coefficients".into());
            report.hypothesis_violated = true;
            report.errors = errors;
            return report;
        }
    };

    let (lo, hi) = cfg.energy_interval;
    let energies: Vec<f64> = if cfg.energy_count <= 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..cfg.energy_count).map(|i| lo + (hi - lo) * i as f64 / (cfg.energy_count - 1) as f64).collect()
    };
    for &e in &energies {
        match estimate_l(model, 0.0, &omega, Complex64::new(e, 0.0), cfg.lyapunov_n, cfg.lyapunov_phases, cfg.seed) {
            Ok(est) => report.lyapunov.push(LyapunovRow { e, l: est.l, std_error: est.std_error, above_floor: est.l > cfg.gamma }),
            Err(err) => errors.push(format!("lyapunov at E = {e}: {err}")),
        }
    }
    if report.lyapunov.len() != energies.len() || report.lyapunov.iter().any(|r| !r.above_floor) {
        report.hypothesis_violated = true;
    }
    if report.hypothesis_violated {
        report.errors = errors;
        return report;
    }

    for &n in &cfg.scales {
        for &t in &cfg.eta_exponents {
            let eta = (n as f64).powf(-t);
            for &e in &energies {
                let result = wegner_integral(model, &omega, n, e, eta, cfg.phases, cfg.seed, cfg.eps_holder);
                if let Err(err) = &result {
                    errors.push(format!("wegner at N = {n}, E = {e}, η = {eta}: {err}"));
                }
                report.wegner.push(WegnerRow { n, e, eta, result });
            }
        }
    }
    report.wegner_pass = !report.wegner.is_empty() && report.wegner.iter().all(|r| matches!(&r.result, Ok(w) if w.pass));

    let target = p - cfg.eps_holder;
    match bulk_energies(model, &omega, cfg.holder_n, stats::seeded_offset(cfg.seed), cfg.holder_energies, cfg.energy_interval) {
        Ok(candidates) => {
            let curve = ids_curve(model, &omega, cfg.holder_n, &candidates, cfg.holder_phases, cfg.seed);
            match curve {
                Ok(curve) => {
                    for (e, ids) in curve.energies.iter().zip(&curve.values) {
                        if !(0.2..=0.8).contains(ids) {
                            continue;
                        }
                        let result = holder_fit(model, &omega, cfg.holder_n, *e, &cfg.holder_etas, cfg.holder_phases, cfg.seed, cfg.eps_holder);
                        let pass = matches!(&result, Ok(f) if f.exponent >= target && f.r_squared >= 0.9);
                        if let Err(err) = &result {
                            errors.push(format!("hölder fit at E = {e}: {err}"));
                        }
                        report.holder.push(HolderRow { e: *e, ids: *ids, result, pass });
                    }
                }
                Err(err) => errors.push(format!("ids: {err}")),
            }
        }
        Err(err) => errors.push(format!("energy selection: {err}")),
    }
    if !report.holder.is_empty() {
        report.holder_fraction = report.holder.iter().filter(|r| r.pass).count() as f64 / report.holder.len() as f64;
    }
    report.holder_pass = !report.holder.is_empty() && report.holder_fraction >= cfg.holder_pass_fraction;
    report.passed = report.wegner_pass && report.holder_pass;
    report.errors = errors;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::GOLDEN_MEAN;
    use approx::assert_abs_diff_eq;

    fn w() -> Frequency {
        Frequency::golden(1000).unwrap()
    }

    #[test]
    fn finite_ids_extremes() {
        let m = ModelSpec::almost_mathieu(3.0);
        let r = m.spectral_bound();
        assert_eq!(ids_finite(&m, 0.3, &w(), 50, -r - 1.0).unwrap(), 0.0);
        assert_eq!(ids_finite(&m, 0.3, &w(), 50, r + 1.0).unwrap(), 1.0);
        assert_eq!(ids_finite(&ModelSpec::free(), 0.3, &w(), 2, 0.0).unwrap(), 0.5);
        let (v, se) = ids_avg(&m, &w(), 50, r + 1.0, 8, 1).unwrap();
        assert_eq!((v, se), (1.0, 0.0));
    }

    #[test]
    fn free_ids_matches_explicit_spectrum() {
        let n = 100;
        for e in [-1.5, -0.3, 0.0, 0.7, 1.9] {
            let explicit = (1..=n)
                .filter(|k| -2.0 * (std::f64::consts::PI * *k as f64 / (n + 1) as f64).cos() < e)
                .count() as f64
                / n as f64;
            let (v, _) = ids_avg(&ModelSpec::free(), &w(), n, e, 4, 2).unwrap();
            assert_abs_diff_eq!(v, explicit, epsilon = 1e-3);
        }
    }

    #[test]
    fn curve_is_monotone() {
        let m = ModelSpec::extended_harper(2.0, 1.0, 0.5, 0.7, GOLDEN_MEAN).unwrap();
        let energies: Vec<f64> = (0..41).map(|i| -8.0 + 0.4 * i as f64).collect();
        let c = ids_curve(&m, &w(), 128, &energies, 16, 3).unwrap();
        assert!(c.values.windows(2).all(|v| v[0] <= v[1]));
        assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn wegner_examples() {
        let m = ModelSpec::almost_mathieu(3.0);
        let n = 512;
        let eta = 1.0 / n as f64;
        let out = wegner_integral(&m, &w(), n, 20.0, eta, 16, 1, 0.1).unwrap();
        assert_eq!(out.integral, 0.0);
        assert!(out.pass);
        let bulk = wegner_integral(&m, &w(), n, 0.3, eta, 32, 1, 0.1).unwrap();
        assert_abs_diff_eq!(bulk.bound, 512f64.powf(0.6), epsilon = 1e-9);
        assert!(bulk.pass && bulk.integral < 10.0, "{bulk:?}");
        let err = wegner_integral(&m, &w(), n, 0.3, 0.5, 16, 1, 0.1);
        assert!(matches!(err, Err(LabError::EtaOutOfRange { .. })));
        assert!(wegner_integral(&ModelSpec::free(), &w(), n, 0.0, eta, 16, 1, 0.1).is_err());
    }

    #[test]
    fn multiscale_ids_examples() {
        let m = ModelSpec::almost_mathieu(3.0);
        let outside = multiscale_ids_check(&m, &w(), 64, 2, (20.0, 21.0), 8, 1).unwrap();
        assert_eq!(outside.lhs, 0.0);
        assert!(outside.pass);
        let all = multiscale_ids_check(&m, &w(), 64, 2, (-20.0, 20.0), 8, 1).unwrap();
        assert_eq!((all.lhs, all.rhs - 4.0 / 64.0), (1.0, 1.0));
        assert!(all.pass);
        let mid = multiscale_ids_check(&m, &w(), 128, 4, (-1.0, 1.0), 16, 5).unwrap();
        assert!(mid.pass && mid.lhs <= mid.rhs, "{mid:?}");
    }

    #[test]
    fn log_log_fit_recovers_power_laws() {
        let xs = log_spaced(1e-3, 1e-2, 8);
        let half: Vec<f64> = xs.iter().map(|x| x.sqrt()).collect();
        let (s, r2) = fit_log_log(&xs, &half).unwrap();
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-6);
        let lin: Vec<f64> = xs.iter().map(|x| 3.7 * x).collect();
        assert_abs_diff_eq!(fit_log_log(&xs, &lin).unwrap().0, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn holder_fit_in_the_bulk() {
        let m = ModelSpec::almost_mathieu(3.0);
        let energies = bulk_energies(&m, &w(), 1024, 0.3, 3, (-1.0, 1.0)).unwrap();
        assert_eq!(energies.len(), 3);
        let f = holder_fit(&m, &w(), 1024, energies[1], &log_spaced(4e-3, 4e-2, 6), 32, 2, 0.1).unwrap();
        assert_eq!(f.predicted_p, 0.5);
        assert!(f.exponent > 0.0, "{f:?}");
        let err = holder_fit(&m, &w(), 64, 30.0, &log_spaced(4e-3, 4e-2, 6), 4, 2, 0.1);
        assert!(matches!(err, Err(LabError::InsufficientSignal { usable: 0, .. })));
    }

    #[test]
    fn gate_on_amo_reports_half() {
        let cfg = GateConfig { scales: vec![128, 256], holder_n: 512, holder_etas: log_spaced(8e-3, 8e-2, 6), ..GateConfig::default() };
        let r = theorem_gate(&cfg);
        assert_eq!(r.p, Some(0.5));
        assert_eq!((r.n_b, r.d0), (0, 1));
        assert!(!r.hypothesis_violated);
        assert!(r.wegner_pass, "{:?}", r.errors);
        assert_eq!(r, theorem_gate(&cfg));
    }

    #[test]
    fn gate_flags_small_lyapunov() {
        let cfg = GateConfig { model: ModelSpec::almost_mathieu(0.5), ..GateConfig::default() };
        let r = theorem_gate(&cfg);
        assert!(r.hypothesis_violated);
        assert!(r.wegner.is_empty());
        let harper = ModelSpec::extended_harper(3.0, 1.0, 1.0, 1.0, GOLDEN_MEAN).unwrap();
        assert_eq!(harper.d0(), 1);
        assert_eq!(harper.p(), Some(1.0 / (harper.n_b() + 2) as f64));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn averaged_ids_is_monotone(e1 in -5.0f64..5.0, gap in 0.0f64..2.0, seed in 0u64..1000) {
            let m = ModelSpec::almost_mathieu(2.5);
            let (lo, _) = ids_avg(&m, &w(), 64, e1, 8, seed).unwrap();
            let (hi, _) = ids_avg(&m, &w(), 64, e1 + gap, 8, seed).unwrap();
            proptest::prop_assert!(lo <= hi);
            proptest::prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }

        #[test]
        fn multiscale_bound_holds_for_small_scales(n in 8usize..64, blocks in 2usize..5, centre in -3.0f64..3.0, width in 0.01f64..1.0, seed in 0u64..1000) {
            let m = ModelSpec::almost_mathieu(3.0);
            let r = multiscale_ids_check(&m, &w(), n, blocks, (centre - width, centre + width), 8, seed).unwrap();
            proptest::prop_assert!(r.pass, "{:?}", r);
        }

        #[test]
        fn log_log_fit_recovers_random_exponents(s in 0.05f64..3.0, scale in 0.1f64..10.0, lo in 1e-5f64..1e-2) {
            let xs = log_spaced(lo, 10.0 * lo, 7);
            let ys: Vec<f64> = xs.iter().map(|x| scale * x.powf(s)).collect();
            let (slope, r2) = fit_log_log(&xs, &ys).unwrap();
            proptest::prop_assert!((slope - s).abs() < 1e-6);
            proptest::prop_assert!((r2 - 1.0).abs() < 1e-6);
        }
    }
}
