//! Avalanche-Principle residuals, the `W_{N,k}` ratios, and the pointwise
//! Wegner-type bound built from them.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::coeffs::{dist_to_int, Frequency, ModelSpec};
use crate::complexan::{winding_count, Disk};
use crate::error::{LabError, Result};
use crate::operator::{spectral_interval_count, IndexInterval};
use crate::scalednum::{ldexp, ScaledMatrix2};
use crate::transfer::{det_f_a_range, monodromy_a_range, step_matrix};

/// An ordered partition of an interval into consecutive pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionScheme {
    pub whole: IndexInterval,
    pub parts: Vec<IndexInterval>,
    pub unit_scale: usize,
    pub exponent_cap: f64,
}

impl PartitionScheme {
    pub fn new(parts: Vec<IndexInterval>, unit_scale: usize, exponent_cap: f64) -> Result<Self> {
        let (first, last) = match (parts.first(), parts.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(LabError::InvalidArgument("empty partition".into())),
        };
        for pair in parts.windows(2) {
            if pair[1].lo != pair[0].hi + 1 {
                return Err(LabError::InvalidArgument(format!(
                    "parts [{}, {}] and [{}, {}] are not consecutive",
                    pair[0].lo, pair[0].hi, pair[1].lo, pair[1].hi
                )));
            }
        }
        let cap = (unit_scale as f64).powf(exponent_cap);
        if let Some(p) = parts.iter().find(|p| p.len() < unit_scale || p.len() as f64 > cap) {
            return Err(LabError::InvalidArgument(format!(
                "part length {} outside [{unit_scale}, {cap}]",
                p.len()
            )));
        }
        Ok(Self { whole: IndexInterval::new(first.lo, last.hi)?, parts, unit_scale, exponent_cap })
    }

    /// `m` consecutive pieces of length `l` starting at `start`.
    pub fn uniform(start: i64, m: usize, l: usize) -> Result<Self> {
        let parts = (0..m as i64)
            .map(|j| IndexInterval::new(start + j * l as i64, start + (j + 1) * l as i64 - 1))
            .collect::<Result<Vec<_>>>()?;
        Self::new(parts, l, 1.0)
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApVariant {
    Determinant,
    Monodromy,
}

type Dd = TwoFloat;
type Cdd = Complex<TwoFloat>;

fn dd(z: Complex64) -> Cdd {
    Cdd::new(Dd::from(z.re), Dd::from(z.im))
}

/// 2×2 product in double-double arithmetic.
fn dd_mul(a: &[Cdd; 4], b: &[Cdd; 4]) -> [Cdd; 4] {
    [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
}

fn dd_norm(m: &[Cdd; 4]) -> Dd {
    let zero = Dd::from(0.0);
    let frob = m.iter().fold(zero, |acc, z| acc + z.norm_sqr());
    let det = m[0] * m[3] - m[1] * m[2];
    let twice_det = det.norm_sqr().sqrt() * Dd::from(2.0);
    let gap = frob - twice_det;
    let gap = if gap < zero { zero } else { gap };
    ((frob + twice_det).sqrt() + gap.sqrt()) * Dd::from(0.5)
}

/// `M^a` over `lo..=hi` as `2^exponent · mantissa` with double-double
/// mantissa entries of modulus at most about 1.
fn dd_monodromy(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lo: i64, hi: i64) -> ([Cdd; 4], i64) {
    let one = Cdd::new(Dd::from(1.0), Dd::from(0.0));
    let zero = Cdd::new(Dd::from(0.0), Dd::from(0.0));
    let mut m = [one, zero, zero, one];
    let mut exponent = 0i64;
    let mut here = model.site(omega.shift(z, lo));
    for j in lo..=hi {
        let next = model.site(omega.shift(z, j + 1));
        let t = step_matrix(&here, &next, e).map(dd);
        m = dd_mul(&t, &m);
        let top = m.iter().map(|c| c.re.hi().abs().max(c.im.hi().abs())).fold(0.0, f64::max);
        if top > 0.0 {
            let shift = top.log2().ceil() as i64;
            let factor = Dd::from(ldexp(1.0, -shift));
            for c in m.iter_mut() {
                *c = Cdd::new(c.re * factor, c.im * factor);
            }
            exponent += shift;
        }
        here = next;
    }
    (m, exponent)
}

/// Residual of the Avalanche-Principle expansion over the scheme.
///
/// Every factor is written as `2^e·Â` with the exponents cancelling exactly
/// between the three sums, so the residual reduces to `|log R|` for a ratio
/// `R` of mantissa norms; `R − 1` is formed in double-double arithmetic,
/// which resolves residuals far below f64 round-off of the individual logs.
pub fn ap_residual(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, scheme: &PartitionScheme, variant: ApVariant) -> Result<f64> {
    let m = scheme.len();
    if m < 2 {
        return Err(LabError::InvalidArgument(format!("need at least two parts, got {m}")));
    }
    let mut factors: Vec<[Cdd; 4]> = scheme.parts.iter().map(|p| dd_monodromy(model, z, omega, e, p.lo, p.hi).0).collect();
    if variant == ApVariant::Determinant {
        let zero = Cdd::new(Dd::from(0.0), Dd::from(0.0));
        let first = &mut factors[0];
        first[1] = zero;
        first[3] = zero;
        let last = &mut factors[m - 1];
        last[2] = zero;
        last[3] = zero;
    }
    let mut product = factors[0];
    for f in &factors[1..] {
        product = dd_mul(f, &product);
    }
    let head = match variant {
        ApVariant::Monodromy => dd_norm(&product),
        ApVariant::Determinant => product[0].norm_sqr().sqrt(),
    };
    let mut numerator = head;
    for f in &factors[1..m - 1] {
        numerator = numerator * dd_norm(f);
    }
    let mut denominator = Dd::from(1.0);
    for j in 0..m - 1 {
        denominator = denominator * dd_norm(&dd_mul(&factors[j + 1], &factors[j]));
    }
    if denominator == Dd::from(0.0) || numerator == Dd::from(0.0) {
        return Ok(if numerator == denominator { 0.0 } else { f64::INFINITY });
    }
    let delta = (numerator - denominator) / denominator;
    Ok((delta.hi() + delta.lo()).ln_1p().abs())
}

/// `log W`: `log‖M^a_{[lo,k-1]}‖ + log‖M^a_{[k,hi]}‖ − log‖M^a_Λ‖`.
pub fn log_w(model: &ModelSpec, x: f64, omega: &Frequency, e: Complex64, lam: IndexInterval, k: i64) -> Result<f64> {
    if k <= lam.lo || k > lam.hi {
        return Err(LabError::InvalidArgument(format!("split {k} must leave both sides of [{}, {}] nonempty", lam.lo, lam.hi)));
    }
    let z = Complex64::new(x, 0.0);
    let left = monodromy_a_range(model, z, omega, e, lam.lo, k - 1);
    let right = monodromy_a_range(model, z, omega, e, k, lam.hi);
    let whole = right * left;
    Ok(left.log_two_norm()? + right.log_two_norm()? - whole.log_two_norm()?)
}

/// `log W_{N,k}(x, E+iη) − log W_Λ(x+(k−1)ω, E+iη)`.
#[allow(clippy::too_many_arguments)]
pub fn w_concat_residual(model: &ModelSpec, x: f64, omega: &Frequency, e: f64, eta: f64, n: usize, k: i64, window: IndexInterval) -> Result<f64> {
    if !(window.contains(0) && window.contains(1)) {
        return Err(LabError::InvalidArgument(format!("window [{}, {}] must contain 0 and 1", window.lo, window.hi)));
    }
    let ec = Complex64::new(e, eta);
    let full = log_w(model, x, omega, ec, IndexInterval::first(n)?, k)?;
    let local = log_w(model, x, omega, ec, window.shifted(k - 1), k)?;
    Ok(full - local)
}

/// `log W_{N,k}` for every `k = 1..N-1` from one prefix and one suffix sweep;
/// entry `k` of the result, entry 0 is 0 (`W_{N,0} = 1`).
pub fn log_w_all(model: &ModelSpec, x: f64, omega: &Frequency, e: Complex64, n: usize) -> Result<Vec<f64>> {
    let z = Complex64::new(x, 0.0);
    let sites: Vec<_> = (0..=n as i64).map(|j| model.site(omega.shift(z, j))).collect();
    let steps: Vec<ScaledMatrix2> = (0..n).map(|j| ScaledMatrix2::from_plain(step_matrix(&sites[j], &sites[j + 1], e))).collect();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(ScaledMatrix2::identity());
    for s in &steps {
        let next = *s * *prefix.last().expect("nonempty");
        prefix.push(next);
    }
    let mut suffix = vec![ScaledMatrix2::identity(); n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] * steps[j];
    }
    let total = prefix[n].log_two_norm()?;
    let mut out = vec![0.0; n];
    for k in 1..n {
        out[k] = prefix[k].log_two_norm()? + suffix[k].log_two_norm()? - total;
    }
    Ok(out)
}

/// Pointwise Wegner-type bound at one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerReport {
    pub e: f64,
    pub eta: f64,
    pub x: f64,
    pub lhs_count: usize,
    pub rhs_bound: f64,
    pub excluded_k: Vec<i64>,
    pub k_size: usize,
    /// `(k, 4η·W_{N,k}/|b̃(x+kω)|)` for every retained `k`.
    pub terms: Vec<(i64, f64)>,
    /// Indices within this distance of either end are excluded.
    pub margin: usize,
    /// Half-width of the local determinant window `[−w, w]`.
    pub window: usize,
    pub rho0: f64,
}

impl WegnerReport {
    pub fn holds(&self) -> bool {
        self.lhs_count as f64 <= self.rhs_bound
    }
}

/// Builds the excluded set and evaluates both sides of the pointwise bound
/// with a local window of half-width `⌈log N⌉`.
pub fn pregner_bound(model: &ModelSpec, x: f64, omega: &Frequency, e: f64, eta: f64, n: usize, rho0: f64) -> Result<WegnerReport> {
    let w = (n as f64).ln().ceil().max(1.0) as usize;
    pregner_bound_with_window(model, x, omega, e, eta, n, rho0, w)
}

#[allow(clippy::too_many_arguments)]
pub fn pregner_bound_with_window(model: &ModelSpec, x: f64, omega: &Frequency, e: f64, eta: f64, n: usize, rho0: f64, w: usize) -> Result<WegnerReport> {
    if eta <= 0.0 || !(rho0 > 0.0 && rho0 < 0.5) || n < 2 {
        return Err(LabError::InvalidArgument(format!("need η > 0, ρ₀ ∈ (0, 1/2), N ≥ 2; got η = {eta}, ρ₀ = {rho0}, N = {n}")));
    }
    let lam = IndexInterval::first(n)?;
    let lhs_count = spectral_interval_count(model, x, omega, lam, e, eta);
    let ec = Complex64::new(e, eta);
    let zeros = model.b_tilde_torus_zeros()?;
    let margin = 2 * (2 * w + 1);
    let z = Complex64::new(x, 0.0);

    let excluded: Vec<bool> = (0..n as i64)
        .into_par_iter()
        .map(|k| {
            if k < margin as i64 || k > n as i64 - 1 - margin as i64 {
                return true;
            }
            let phase = omega.shift(z, k).re;
            if zeros.iter().any(|t| dist_to_int(phase - t) < rho0) {
                return true;
            }
            // zeros of the local determinant near x + (k−1)ω
            let center = omega.shift(z, k - 1);
            let disk = Disk { center: Complex64::new(center.re, 0.0), radius: rho0 };
            let local = |zz: Complex64| det_f_a_range(model, zz, omega, ec, -(w as i64), w as i64);
            !matches!(winding_count(local, disk), Ok(r) if r.count == 0)
        })
        .collect();

    let logs = log_w_all(model, x, omega, ec, n)?;
    let bt = model.b_tilde();
    let mut terms = Vec::new();
    let mut excluded_k = Vec::new();
    for k in 0..n {
        if excluded[k] {
            excluded_k.push(k as i64);
            continue;
        }
        let denom = bt.eval(omega.shift(z, k as i64)).norm();
        terms.push((k as i64, 4.0 * eta * logs[k].exp() / denom));
    }
    let sum: f64 = crate::stats::pairwise_sum(&terms.iter().map(|t| t.1).collect::<Vec<_>>());
    let k_size = excluded_k.len();
    Ok(WegnerReport {
        e,
        eta,
        x,
        lhs_count,
        rhs_bound: sum + 2.0 * k_size as f64 + 10.0,
        excluded_k,
        k_size,
        terms,
        margin,
        window: w,
        rho0,
    })
}
