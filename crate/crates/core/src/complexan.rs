//! Zero counting in disks, Jensen averages, adjusted integers and the
//! multiscale Jensen experiment.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{Frequency, ModelSpec};
use crate::error::{LabError, Result};
use crate::operator::IndexInterval;
use crate::scalednum::ScaledComplex;
use crate::transfer::{det_f_a_range, monodromy_a_range};

/// Contour nodes before adaptive refinement.
pub const INITIAL_NODES: usize = 64;
/// Refinement cap.
pub const MAX_NODES: usize = 1 << 20;
/// Radius nudges before giving up on a contour.
pub const MAX_NUDGES: usize = 8;
/// `min|f| < CONTOUR_FLOOR·max|f|` on the contour triggers a nudge.
pub const CONTOUR_FLOOR: f64 = 1e-13;
/// Default Jensen grid divisor: spacing is `εr / divisor`.
pub const DEFAULT_SPACING_DIVISOR: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(LabError::InvalidArgument(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    pub count: i64,
    /// `min|f|` on the final contour (may underflow to 0 for huge dynamic range).
    pub min_modulus_on_contour: f64,
    /// `log min|f|` on the final contour.
    pub min_log_modulus: f64,
    pub nodes_used: usize,
    pub radius_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenResult {
    pub value: f64,
    pub epsilon: f64,
    pub grid_spacing: f64,
    pub samples_outer: usize,
}

/// Radii tried in order: the requested one, then ±1%, ±2%, …
fn nudged_radius(r: f64, attempt: usize) -> f64 {
    if attempt == 0 {
        return r;
    }
    let step = attempt.div_ceil(2) as f64 * 0.01;
    if attempt % 2 == 1 {
        r * (1.0 + step)
    } else {
        r * (1.0 - step)
    }
}

#[inline]
fn phase_step(a: ScaledComplex, b: ScaledComplex) -> f64 {
    (b / a).arg()
}

struct Tally {
    all_zero: Vec<bool>,
    any_zero: Vec<bool>,
    min_log: Vec<f64>,
    max_log: Vec<f64>,
}

impl Tally {
    fn new(k: usize) -> Self {
        Self { all_zero: vec![true; k], any_zero: vec![false; k], min_log: vec![f64::INFINITY; k], max_log: vec![f64::NEG_INFINITY; k] }
    }

    fn note(&mut self, v: &[ScaledComplex]) {
        note(v, &mut self.all_zero, &mut self.any_zero, &mut self.min_log, &mut self.max_log);
    }
}

fn note(v: &[ScaledComplex], all_zero: &mut [bool], any_zero: &mut [bool], min_log: &mut [f64], max_log: &mut [f64]) {
    for c in 0..v.len() {
        if v[c].is_zero() {
            any_zero[c] = true;
        } else {
            all_zero[c] = false;
            let l = v[c].log_abs();
            min_log[c] = min_log[c].min(l);
            max_log[c] = max_log[c].max(l);
        }
    }
}

struct ContourPass {
    counts: Vec<i64>,
    min_log: Vec<f64>,
    nodes: usize,
    /// Component is exactly zero at every node.
    vanishing: Vec<bool>,
    degenerate: bool,
}

/// One adaptive pass over the circle for all components at once.
fn contour_pass<F>(f: &F, k: usize, center: Complex64, radius: f64) -> Result<ContourPass>
where
    F: Fn(Complex64) -> Vec<ScaledComplex> + Sync,
{
    let at = |t: f64| center + Complex64::from_polar(radius, t);
    let ts: Vec<f64> = (0..=INITIAL_NODES).map(|i| TAU * i as f64 / INITIAL_NODES as f64).collect();
    let mut vals: Vec<Vec<ScaledComplex>> = ts[..INITIAL_NODES].par_iter().map(|&t| f(at(t))).collect();
    vals.push(vals[0].clone());
    let mut nodes = INITIAL_NODES;

    let mut tally = Tally::new(k);
    for v in &vals[..INITIAL_NODES] {
        tally.note(v);
    }
    let Tally { all_zero, any_zero, min_log, max_log } = &mut tally;
    if (0..k).any(|c| any_zero[c] && !all_zero[c]) {
        return Ok(ContourPass { counts: vec![0; k], min_log: min_log.clone(), nodes, vanishing: all_zero.clone(), degenerate: true });
    }

    let mut total = vec![0.0f64; k];
    // explicit stack of segments (t0, v0, t1, v1), processed left to right
    let mut stack: Vec<(f64, Vec<ScaledComplex>, f64, Vec<ScaledComplex>)> = Vec::new();
    for i in (0..INITIAL_NODES).rev() {
        stack.push((ts[i], vals[i].clone(), ts[i + 1], vals[i + 1].clone()));
    }
    while let Some((t0, v0, t1, v1)) = stack.pop() {
        let steps: Vec<f64> = (0..k)
            .map(|c| if all_zero[c] { 0.0 } else { phase_step(v0[c], v1[c]) })
            .collect();
        if steps.iter().all(|s| s.abs() < FRAC_PI_2) {
            for c in 0..k {
                total[c] += steps[c];
            }
            continue;
        }
        if nodes >= MAX_NODES {
            return Err(LabError::WindingNonConvergence { nodes });
        }
        let tm = 0.5 * (t0 + t1);
        let vm = f(at(tm));
        nodes += 1;
        note(&vm, all_zero, any_zero, min_log, max_log);
        if (0..k).any(|c| vm[c].is_zero() && !all_zero[c]) {
            return Ok(ContourPass { counts: vec![0; k], min_log: min_log.clone(), nodes, vanishing: all_zero.clone(), degenerate: true });
        }
        stack.push((tm, vm.clone(), t1, v1));
        stack.push((t0, v0, tm, vm));
    }
    let floor = CONTOUR_FLOOR.ln();
    let degenerate = (0..k).any(|c| !all_zero[c] && min_log[c] - max_log[c] < floor);
    let counts = total.iter().map(|t| (t / TAU).round() as i64).collect();
    Ok(ContourPass { counts, min_log: min_log.clone(), nodes, vanishing: all_zero.clone(), degenerate })
}

/// Winding numbers of several functions around one circle, refined until
/// every phase step of every component is below π/2. Components that vanish
/// at every node are reported with count 0.
pub fn winding_counts<F>(f: F, k: usize, disk: Disk) -> Result<Vec<WindingResult>>
where
    F: Fn(Complex64) -> Vec<ScaledComplex> + Sync,
{
    for attempt in 0..=MAX_NUDGES {
        let radius = nudged_radius(disk.radius, attempt);
        let pass = contour_pass(&f, k, disk.center, radius)?;
        if pass.degenerate {
            continue;
        }
        return Ok((0..k)
            .map(|c| {
                let min_log = if pass.vanishing[c] { f64::NEG_INFINITY } else { pass.min_log[c] };
                WindingResult {
                    count: pass.counts[c],
                    min_modulus_on_contour: min_log.exp(),
                    min_log_modulus: min_log,
                    nodes_used: pass.nodes,
                    radius_used: radius,
                }
            })
            .collect());
    }
    Err(LabError::ContourThroughZero { attempts: MAX_NUDGES })
}

/// Number of zeros of `f` inside the disk, with multiplicity.
pub fn winding_count<F>(f: F, disk: Disk) -> Result<WindingResult>
where
    F: Fn(Complex64) -> ScaledComplex + Sync,
{
    let mut out = winding_counts(|z| vec![f(z)], 1, disk)?;
    let res = out.pop().expect("one component");
    if res.min_log_modulus == f64::NEG_INFINITY {
        return Err(LabError::IdenticallyZero);
    }
    Ok(res)
}

/// `J_ε` for several functions sampled on one shared grid.
pub fn jensen_average_multi<U>(u: U, k: usize, z0: Complex64, r: f64, epsilon: f64, spacing_divisor: usize) -> Result<Vec<JensenResult>>
where
    U: Fn(Complex64) -> Vec<f64> + Sync,
{
    if !(epsilon > 0.0 && epsilon < 1.0) || r <= 0.0 || spacing_divisor == 0 {
        return Err(LabError::InvalidArgument(format!("need ε ∈ (0,1), r > 0, divisor ≥ 1; got ε = {epsilon}, r = {r}")));
    }
    let inner = epsilon * r;
    let h = inner / spacing_divisor as f64;
    let (ox, oy) = (h / 2f64.sqrt(), h / 3f64.sqrt());
    let reach = (1.0 + epsilon) * r;
    let half = (reach / h).ceil() as i64 + 1;
    let side = (2 * half + 1) as usize;
    let coord = |i: i64, off: f64| i as f64 * h + off;
    let inside = |i: i64, j: i64, rad: f64| coord(i, ox).hypot(coord(j, oy)) < rad;

    // rows of samples: row j, column i; NaN marks nodes outside the big disk
    let rows: Vec<Vec<Vec<f64>>> = (-half..=half)
        .into_par_iter()
        .map(|j| {
            (-half..=half)
                .map(|i| {
                    if inside(i, j, reach) {
                        u(z0 + Complex64::new(coord(i, ox), coord(j, oy)))
                    } else {
                        vec![f64::NAN; k]
                    }
                })
                .collect()
        })
        .collect();
    for (jj, row) in rows.iter().enumerate() {
        for (ii, v) in row.iter().enumerate() {
            let (i, j) = (ii as i64 - half, jj as i64 - half);
            if inside(i, j, reach) && v.iter().any(|x| !x.is_finite()) {
                let z = z0 + Complex64::new(coord(i, ox), coord(j, oy));
                return Err(LabError::SingularSample { re: z.re, im: z.im });
            }
        }
    }

    // per-component row prefix sums
    let prefix: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|c| {
            rows.iter()
                .map(|row| {
                    let mut p = Vec::with_capacity(side + 1);
                    let mut s = 0.0;
                    p.push(0.0);
                    for v in row {
                        if v[c].is_finite() {
                            s += v[c];
                        }
                        p.push(s);
                    }
                    p
                })
                .collect()
        })
        .collect();

    let span = (inner / h).ceil() as i64 + 1;
    let mut outer_count = 0usize;
    let mut sum_inner = vec![0.0; k];
    let mut sum_u = vec![0.0; k];
    for j in -half..=half {
        for i in -half..=half {
            if !inside(i, j, r) {
                continue;
            }
            outer_count += 1;
            let (x, y) = (coord(i, ox), coord(j, oy));
            let mut acc = vec![0.0; k];
            let mut cnt = 0usize;
            for dj in -span..=span {
                let jj = j + dj;
                if jj < -half || jj > half {
                    continue;
                }
                let dy = coord(jj, oy) - y;
                let w2 = inner * inner - dy * dy;
                if w2 <= 0.0 {
                    continue;
                }
                let w = w2.sqrt();
                // columns with |coord(ii) − x| < w
                let lo_i = (((x - w - ox) / h).floor() as i64 + 1).max(-half);
                let hi_i = (((x + w - ox) / h).ceil() as i64 - 1).min(half);
                let (mut lo_i, mut hi_i) = (lo_i, hi_i);
                while lo_i <= hi_i && (coord(lo_i, ox) - x).abs() >= w {
                    lo_i += 1;
                }
                while hi_i >= lo_i && (coord(hi_i, ox) - x).abs() >= w {
                    hi_i -= 1;
                }
                if hi_i < lo_i {
                    continue;
                }
                let row = (jj + half) as usize;
                let (a, b) = ((lo_i + half) as usize, (hi_i + half) as usize + 1);
                for c in 0..k {
                    acc[c] += prefix[c][row][b] - prefix[c][row][a];
                }
                cnt += b - a;
            }
            let own = &rows[(j + half) as usize][(i + half) as usize];
            for c in 0..k {
                sum_inner[c] += acc[c] / cnt as f64;
                sum_u[c] += own[c];
            }
        }
    }
    // second moment of the node-centred inner stencil; ε²r²/2 in the continuum
    let mut moment = 0.0;
    let mut stencil = 0usize;
    for dj in -span..=span {
        for di in -span..=span {
            let d2 = ((di * di + dj * dj) as f64) * h * h;
            if d2 < inner * inner {
                moment += d2;
                stencil += 1;
            }
        }
    }
    let scale = 2.0 * r * r / (moment / stencil as f64);
    Ok((0..k)
        .map(|c| JensenResult {
            value: scale * (sum_inner[c] - sum_u[c]) / outer_count as f64,
            epsilon,
            grid_spacing: h,
            samples_outer: outer_count,
        })
        .collect())
}

pub fn jensen_average<U>(u: U, z0: Complex64, r: f64, epsilon: f64, spacing_divisor: usize) -> Result<JensenResult>
where
    U: Fn(Complex64) -> f64 + Sync,
{
    let mut out = jensen_average_multi(|z| vec![u(z)], 1, z0, r, epsilon, spacing_divisor)?;
    Ok(out.pop().expect("one component"))
}

/// Winding count of `f^a_Λ(·, ω, E)` together with the two reference
/// bounds: `(log N)³` for radius `1/N` and `2·d_0` for adjusted disks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub winding: WindingResult,
    pub log_benchmark: f64,
    pub degree_benchmark: usize,
}

pub fn zero_count_disk(model: &ModelSpec, omega: &Frequency, e: Complex64, lam: IndexInterval, x0: f64, r: f64) -> Result<ZeroCount> {
    if r > 1.0 {
        return Err(LabError::InvalidArgument(format!("disk radius {r} exceeds 1")));
    }
    let disk = Disk::new(Complex64::new(x0, 0.0), r)?;
    let winding = winding_count(|z| det_f_a_range(model, z, omega, e, lam.lo, lam.hi), disk)?;
    Ok(ZeroCount {
        winding,
        log_benchmark: (lam.len() as f64).ln().powi(3),
        degree_benchmark: 2 * model.d0(),
    })
}

/// Whether all four entries of `M^a` over `[start, start+len-1]` are zero-free
/// on the disk (identically vanishing entries pass).
pub fn window_is_zero_free(model: &ModelSpec, omega: &Frequency, e: Complex64, start: i64, len: usize, disk: Disk) -> Result<bool> {
    let entries = |z: Complex64| {
        let m = monodromy_a_range(model, z, omega, e, start, start + len as i64 - 1);
        (0..4).map(|i| m.entry(i / 2, i % 2)).collect::<Vec<_>>()
    };
    let res = winding_counts(entries, 4, disk)?;
    Ok(res.iter().all(|w| w.count == 0))
}

/// Whether `s` is adjusted to `(disk, ω, E)` for the given window lengths
/// and shifts.
pub fn is_adjusted(model: &ModelSpec, omega: &Frequency, e: Complex64, disk: Disk, s: i64, k_set: &[usize], m_max: i64) -> Result<bool> {
    for &k in k_set {
        for m in -m_max..=m_max {
            // a contour that cannot avoid zeros means zeros sit on the disk boundary
            match window_is_zero_free(model, omega, e, s + m, k, disk) {
                Ok(true) => {}
                Ok(false) | Err(LabError::ContourThroughZero { .. }) => return Ok(false),
                Err(err) => return Err(err),
            }
        }
    }
    Ok(true)
}

/// Search parameters for [`find_adjusted`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustSearch {
    pub l: usize,
    pub s0: i64,
    pub search_radius: i64,
    pub k_set: Vec<usize>,
    pub m_max: i64,
}

impl AdjustSearch {
    /// `k ∈ {l, 2l}`, `|m| ≤ 2`, range `l³`.
    pub fn desk_scale(l: usize, s0: i64) -> Self {
        Self { l, s0, search_radius: (l as i64).pow(3), k_set: vec![l, 2 * l], m_max: 2 }
    }
}

/// The integer closest to `s0` (ties go to the smaller one) that is
/// adjusted to `(𝒟(x0, r0), ω, E)`.
pub fn find_adjusted(model: &ModelSpec, omega: &Frequency, e: Complex64, x0: f64, r0: f64, search: &AdjustSearch) -> Result<i64> {
    if search.m_max > 100 || search.k_set.is_empty() {
        return Err(LabError::InvalidArgument("need a nonempty k set and m_max ≤ 100".into()));
    }
    let disk = Disk::new(Complex64::new(x0, 0.0), r0)?;
    for d in 0..=search.search_radius {
        let candidates = if d == 0 { vec![search.s0] } else { vec![search.s0 - d, search.s0 + d] };
        for s in candidates {
            if is_adjusted(model, omega, e, disk, s, &search.k_set, search.m_max)? {
                return Ok(s);
            }
        }
    }
    Err(LabError::NoAdjustedInteger { center: search.s0, radius: search.search_radius })
}

/// `J_ε(log|f^a_Λ|) − Σ_j J_ε(log|f^a_{Λ_j}|)` on `𝒟(x0, r)`, with all
/// determinants sampled on one grid.
pub fn multiscale_jensen_residual(
    model: &ModelSpec,
    omega: &Frequency,
    e: Complex64,
    partition: &[IndexInterval],
    x0: f64,
    r: f64,
    epsilon: f64,
    spacing_divisor: usize,
) -> Result<f64> {
    if partition.is_empty() {
        return Err(LabError::InvalidArgument("empty partition".into()));
    }
    for pair in partition.windows(2) {
        if pair[1].lo != pair[0].hi + 1 {
            return Err(LabError::InvalidArgument("partition intervals must be consecutive".into()));
        }
    }
    if partition.len() == 1 {
        return Ok(0.0);
    }
    let whole = IndexInterval::new(partition[0].lo, partition[partition.len() - 1].hi)?;
    let m = partition.len();
    let u = |z: Complex64| {
        let mut out = Vec::with_capacity(m + 1);
        out.push(det_f_a_range(model, z, omega, e, whole.lo, whole.hi).log_abs());
        for p in partition {
            out.push(det_f_a_range(model, z, omega, e, p.lo, p.hi).log_abs());
        }
        out
    };
    let j = jensen_average_multi(u, m + 1, Complex64::new(x0, 0.0), r, epsilon, spacing_divisor)?;
    Ok(j[0].value - j[1..].iter().map(|v| v.value).sum::<f64>())
}

/// Zeros of `f` inside `disk` counted directly from known roots.
pub fn count_roots_inside(roots: &[Complex64], disk: Disk) -> i64 {
    roots.iter().filter(|z| (**z - disk.center).norm() < disk.radius).count() as i64
}
