//! Finite-volume Jacobi matrices, Sturm eigenvalue counts, bisection
//! eigenvalues, and the diagonal of the Green function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{Frequency, ModelSpec};
use crate::error::{LabError, Result};
use crate::transfer::{det_f_a_range, prefix_determinants, suffix_determinants};

/// Zero-pivot guard, relative to the matrix norm.
pub const PIVOT_GUARD: f64 = 1e-30;

/// A nonempty integer interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexInterval {
    pub lo: i64,
    pub hi: i64,
}

impl IndexInterval {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(LabError::InvalidArgument(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// `[0, n-1]`.
    pub fn first(n: usize) -> Result<Self> {
        Self::new(0, n as i64 - 1)
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: i64) -> bool {
        self.lo <= k && k <= self.hi
    }

    pub fn shifted(&self, by: i64) -> Self {
        Self { lo: self.lo + by, hi: self.hi + by }
    }
}

/// Energy, window half-width and phase of a spectral question.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralQuery {
    pub e: f64,
    pub eta: f64,
    pub x: f64,
}

/// `H_Λ(z, ω)` as three diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagMatrix {
    pub diag: Vec<Complex64>,
    /// `sup[i] = H[i][i+1] = −b(z+(α+i+1)ω)`
    pub sup: Vec<Complex64>,
    /// `sub[i] = H[i+1][i] = −b̃(z+(α+i+1)ω)`
    pub sub: Vec<Complex64>,
}

pub fn build_h(model: &ModelSpec, z: Complex64, omega: &Frequency, lam: IndexInterval) -> TridiagMatrix {
    let n = lam.len();
    let mut diag = Vec::with_capacity(n);
    let mut sup = Vec::with_capacity(n.saturating_sub(1));
    let mut sub = Vec::with_capacity(n.saturating_sub(1));
    for j in lam.lo..=lam.hi {
        diag.push(model.a.eval(omega.shift(z, j)));
        if j < lam.hi {
            let s = model.site(omega.shift(z, j + 1));
            sup.push(-s.b);
            sub.push(-s.b_tilde);
        }
    }
    TridiagMatrix { diag, sup, sub }
}

/// The real symmetric tridiagonal unitarily equivalent to `H_Λ(x, ω)` for
/// real `x`: off-diagonals `|b|`, phases gauged away.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTridiag {
    pub diag: Vec<f64>,
    /// squared off-diagonals `|b(x+(α+i+1)ω)|²`
    pub offsq: Vec<f64>,
    norm_bound: f64,
}

impl RealTridiag {
    pub fn new(model: &ModelSpec, x: f64, omega: &Frequency, lam: IndexInterval) -> Self {
        let z = Complex64::new(x, 0.0);
        let mut diag = Vec::with_capacity(lam.len());
        let mut offsq = Vec::with_capacity(lam.len().saturating_sub(1));
        for j in lam.lo..=lam.hi {
            diag.push(model.a.eval(omega.shift(z, j)).re);
            if j < lam.hi {
                offsq.push(model.b.eval(omega.shift(z, j + 1)).norm_sqr());
            }
        }
        Self::from_parts(diag, offsq)
    }

    pub fn from_parts(diag: Vec<f64>, offsq: Vec<f64>) -> Self {
        let n = diag.len();
        let mut norm_bound: f64 = 0.0;
        for i in 0..n {
            let left = if i > 0 { offsq[i - 1].sqrt() } else { 0.0 };
            let right = if i + 1 < n { offsq[i].sqrt() } else { 0.0 };
            norm_bound = norm_bound.max(diag[i].abs() + left + right);
        }
        Self { diag, offsq, norm_bound: norm_bound.max(f64::MIN_POSITIVE) }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// Number of eigenvalues strictly below `e` (negative Sturm pivots).
    pub fn count_below(&self, e: f64) -> usize {
        let guard = -PIVOT_GUARD * self.norm_bound;
        let mut count = 0;
        let mut d = 1.0;
        for (i, &a) in self.diag.iter().enumerate() {
            d = if i == 0 { a - e } else { (a - e) - self.offsq[i - 1] / d };
            if d == 0.0 {
                d = guard;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Eigenvalues in `[e − η, e + η)`.
    pub fn window_count(&self, e: f64, eta: f64) -> usize {
        self.count_below(e + eta) - self.count_below(e - eta)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let r = self.norm_bound;
        self.bisect(k, -r - 1.0, r + 1.0)
    }

    fn bisect(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        let tol = 1e-12 * self.norm_bound;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.len();
        let r = self.norm_bound + 1.0;
        let mut out = vec![0.0; n];
        self.fill(&mut out, 0, n, -r, r);
        out
    }

    /// Recursive spectrum slicing: `[lo, hi)` holds eigenvalues `k0..k1`.
    fn fill(&self, out: &mut [f64], k0: usize, k1: usize, lo: f64, hi: f64) {
        if k0 >= k1 {
            return;
        }
        if k1 - k0 == 1 || hi - lo <= 1e-12 * self.norm_bound {
            for (k, slot) in out.iter_mut().enumerate().take(k1).skip(k0) {
                *slot = self.bisect(k, lo, hi);
            }
            return;
        }
        let mid = 0.5 * (lo + hi);
        let c = self.count_below(mid).clamp(k0, k1);
        self.fill(out, k0, c, lo, mid);
        self.fill(out, c, k1, mid, hi);
    }
}

pub fn count_below(model: &ModelSpec, x: f64, omega: &Frequency, lam: IndexInterval, e: f64) -> usize {
    RealTridiag::new(model, x, omega, lam).count_below(e)
}

/// Eigenvalues of `H_Λ(x, ω)` in the half-open window `[E − η, E + η)`.
pub fn spectral_interval_count(model: &ModelSpec, x: f64, omega: &Frequency, lam: IndexInterval, e: f64, eta: f64) -> usize {
    RealTridiag::new(model, x, omega, lam).window_count(e, eta)
}

pub fn eigenvalues_full(model: &ModelSpec, x: f64, omega: &Frequency, lam: IndexInterval) -> Vec<f64> {
    RealTridiag::new(model, x, omega, lam).eigenvalues()
}

/// `⟨δ_k, (H_Λ(x, ω) − E − iη)^{−1} δ_k⟩` by Cramer's rule.
pub fn green_diag(model: &ModelSpec, x: f64, omega: &Frequency, lam: IndexInterval, e: f64, eta: f64, k: i64) -> Result<Complex64> {
    if !lam.contains(k) {
        return Err(LabError::InvalidArgument(format!("site {k} outside [{}, {}]", lam.lo, lam.hi)));
    }
    let z = Complex64::new(x, 0.0);
    let ec = Complex64::new(e, eta);
    let den = det_f_a_range(model, z, omega, ec, lam.lo, lam.hi);
    if den.is_zero() {
        return Err(LabError::SingularDenominator);
    }
    let left = det_f_a_range(model, z, omega, ec, lam.lo, k - 1);
    let right = det_f_a_range(model, z, omega, ec, k + 1, lam.hi);
    Ok((left * right / den).to_complex())
}

/// All diagonal Green function entries of `Λ` in one prefix/suffix sweep.
pub fn green_diag_all(model: &ModelSpec, x: f64, omega: &Frequency, lam: IndexInterval, e: f64, eta: f64) -> Result<Vec<Complex64>> {
    let z = Complex64::new(x, 0.0);
    let ec = Complex64::new(e, eta);
    let pre = prefix_determinants(model, z, omega, ec, lam.lo, lam.hi);
    let suf = suffix_determinants(model, z, omega, ec, lam.lo, lam.hi);
    let n = lam.len();
    let den = pre[n];
    if den.is_zero() {
        return Err(LabError::SingularDenominator);
    }
    Ok((0..n).map(|i| (pre[i] * suf[i + 1] / den).to_complex()).collect())
}
