//! Trigonometric-polynomial coefficients, their zeros on the torus, the
//! mean of `log|b|` along horizontal lines, and arithmetic of the rotation
//! frequency.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{LabError, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Default tolerance for deciding that a root of the `w`-polynomial lies on
/// the unit circle.
pub const TORUS_TOL: f64 = 1e-8;

/// Finite Fourier series `Σ_{|k|≤d} c_k e^{2πikz}` with exact degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    /// `coeffs[k + degree]` holds `c_k`.
    coeffs: Vec<Complex64>,
    degree: usize,
    real_on_torus: bool,
}

impl TrigPoly {
    /// Builds a polynomial from `(k, c_k)` pairs; repeated modes are summed
    /// and vanishing outer modes are trimmed so the degree is exact.
    pub fn new(modes: &[(i64, Complex64)]) -> Self {
        let d = modes.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * d + 1];
        for &(k, c) in modes {
            coeffs[(k + d as i64) as usize] += c;
        }
        Self::from_dense(coeffs)
    }

    /// Builds from a dense slice indexed `k + d`, `k = -d..=d`.
    pub fn from_dense(mut coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "dense coefficient table must have odd length");
        let is_zero = |z: &Complex64| z.re == 0.0 && z.im == 0.0;
        while coeffs.len() > 1 && is_zero(&coeffs[0]) && is_zero(&coeffs[coeffs.len() - 1]) {
            coeffs.pop();
            coeffs.remove(0);
        }
        let degree = coeffs.len() / 2;
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let real_on_torus = (0..=degree).all(|j| {
            let (lo, hi) = (coeffs[degree - j], coeffs[degree + j]);
            (lo - hi.conj()).norm() <= 1e-14 * scale
        });
        Self { coeffs, degree, real_on_torus }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(&[(0, Complex64::new(c, 0.0))])
    }

    /// `2·amplitude·cos(2πx)`.
    pub fn two_cos(amplitude: f64) -> Self {
        let c = Complex64::new(amplitude, 0.0);
        Self::new(&[(-1, c), (1, c)])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_real_on_torus(&self) -> bool {
        self.real_on_torus
    }

    pub fn is_identically_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// `c_k`, zero outside the support.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let d = self.degree as i64;
        if k.abs() > d {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + d) as usize]
        }
    }

    /// `(k, c_k)` for every nonzero mode.
    pub fn modes(&self) -> Vec<(i64, Complex64)> {
        let d = self.degree as i64;
        (-d..=d).map(|k| (k, self.coeff(k))).filter(|(_, c)| c.re != 0.0 || c.im != 0.0).collect()
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Sup of `|poly|` on the real line is at most this.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Width of the strip of analyticity; entire functions have no limit.
    pub fn analyticity_width(&self) -> f64 {
        f64::INFINITY
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let w = (Complex64::i() * TWO_PI * z).exp();
        self.eval_w(w, w.inv())
    }

    /// Evaluation from precomputed `w = e^{2πiz}` and `1/w`.
    #[inline]
    pub fn eval_w(&self, w: Complex64, w_inv: Complex64) -> Complex64 {
        let d = self.degree;
        let mut pos = Complex64::new(0.0, 0.0);
        for k in (1..=d).rev() {
            pos = (pos + self.coeffs[d + k]) * w;
        }
        let mut neg = Complex64::new(0.0, 0.0);
        for k in (1..=d).rev() {
            neg = (neg + self.coeffs[d - k]) * w_inv;
        }
        pos + neg + self.coeffs[d]
    }

    /// `b̃(z) = conj(b(conj z))`: coefficients `c'_k = conj(c_{-k})`.
    pub fn tilde(&self) -> Self {
        let coeffs: Vec<Complex64> = self.coeffs.iter().rev().map(|c| c.conj()).collect();
        Self { coeffs, degree: self.degree, real_on_torus: self.real_on_torus }
    }

    /// Coefficients `p_0..p_{2d}` of `P(w)` with `poly(z) = e^{-2πidz} P(e^{2πiz})`.
    pub fn w_polynomial(&self) -> Vec<Complex64> {
        self.coeffs.clone()
    }
}

/// Roots of the algebraic polynomial `P(w)` attached to a [`TrigPoly`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    pub on_torus_count: usize,
    /// Modulus of the leading (highest nonzero) coefficient of `P`.
    pub leading_modulus: f64,
}

impl RootSet {
    /// Points `x ∈ [0,1)` on the torus where the roots with `|w| ≈ 1` sit.
    pub fn torus_points(&self, torus_tol: f64) -> Vec<f64> {
        self.roots
            .iter()
            .filter(|w| (w.norm() - 1.0).abs() < torus_tol)
            .map(|w| (w.arg() / TWO_PI).rem_euclid(1.0))
            .collect()
    }
}

/// All roots of the `w`-polynomial of `poly`, with multiplicity.
pub fn torus_roots(poly: &TrigPoly, torus_tol: f64) -> Result<RootSet> {
    if poly.is_identically_zero() {
        return Err(LabError::IdenticallyZero);
    }
    let mut p = poly.w_polynomial();
    while p.last().is_some_and(|c| c.re == 0.0 && c.im == 0.0) {
        p.pop();
    }
    let leading_modulus = p.last().map(|c| c.norm()).unwrap_or(0.0);
    let zero_roots = p.iter().take_while(|c| c.re == 0.0 && c.im == 0.0).count();
    let reduced = &p[zero_roots..];
    let mut roots = vec![Complex64::new(0.0, 0.0); zero_roots];
    roots.extend(aberth_roots(reduced)?);
    let on_torus_count = roots.iter().filter(|w| (w.norm() - 1.0).abs() < torus_tol).count();
    Ok(RootSet { roots, on_torus_count, leading_modulus })
}

fn horner_with_derivative(p: &[Complex64], z: Complex64) -> (Complex64, Complex64, f64) {
    let mut val = Complex64::new(0.0, 0.0);
    let mut der = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    let az = z.norm();
    for c in p.iter().rev() {
        der = der * z + val;
        val = val * z + c;
        scale = scale * az + c.norm();
    }
    (val, der, scale)
}

const ABERTH_MAX_ITER: usize = 200;
const ABERTH_RESTARTS: usize = 8;
const RESIDUAL_TOL: f64 = 1e-12;

/// Simultaneous (Aberth–Ehrlich) iteration for all roots of `p`
/// (coefficients low to high, nonzero constant and leading terms).
fn aberth_roots(p: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = p.len().saturating_sub(1);
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![-p[0] / p[1]]);
    }
    let lead = p[n];
    let radius = (p[0].norm() / lead.norm()).powf(1.0 / n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut last_residual = f64::INFINITY;
    for attempt in 0..ABERTH_RESTARTS {
        let mut z: Vec<Complex64> = (0..n)
            .map(|j| {
                let jitter = if attempt == 0 { 0.0 } else { rng.gen_range(-0.3..0.3) };
                let theta = TWO_PI * j as f64 / n as f64 + 0.4 + jitter;
                Complex64::from_polar(radius * (1.0 + jitter), theta)
            })
            .collect();
        for _ in 0..ABERTH_MAX_ITER {
            let mut max_step = 0.0f64;
            for i in 0..n {
                let (val, der, _) = horner_with_derivative(p, z[i]);
                if val.re == 0.0 && val.im == 0.0 {
                    continue;
                }
                let ratio = val / der;
                let repulsion: Complex64 =
                    (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
                let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
                if step.is_finite() {
                    z[i] -= step;
                    max_step = max_step.max(step.norm() / z[i].norm().max(1e-300));
                }
            }
            if max_step < 1e-15 {
                break;
            }
        }
        polish_clusters(&mut z);
        last_residual = z
            .iter()
            .map(|&w| {
                let (val, _, scale) = horner_with_derivative(p, w);
                val.norm() / scale
            })
            .fold(0.0, f64::max);
        if z.iter().all(|w| w.is_finite()) && last_residual <= RESIDUAL_TOL {
            return Ok(z);
        }
    }
    Err(LabError::NoConvergence { iterations: ABERTH_MAX_ITER * ABERTH_RESTARTS, residual: last_residual })
}

/// Multiple roots converge only to `O(√ε)`; the centroid of a cluster is
/// accurate to `O(ε)`, so clustered approximations are replaced by it.
fn polish_clusters(z: &mut [Complex64]) {
    let n = z.len();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let members: Vec<usize> = (i..n)
            .filter(|&j| !assigned[j] && (z[j] - z[i]).norm() <= 1e-6 * z[i].norm().max(1e-3))
            .collect();
        if members.len() > 1 {
            let centroid = members.iter().map(|&j| z[j]).sum::<Complex64>() / members.len() as f64;
            for &j in &members {
                z[j] = centroid;
            }
        }
        for &j in &members {
            assigned[j] = true;
        }
    }
}

/// `∫_𝕋 log|poly(x+iy)| dx` by the closed Jensen form over the roots of
/// the `w`-polynomial.
pub fn mahler_d(poly: &TrigPoly, y: f64) -> Result<f64> {
    let roots = torus_roots(poly, TORUS_TOL)?;
    Ok(mahler_d_from_roots(poly.degree(), &roots, y))
}

pub fn mahler_d_from_roots(degree: usize, roots: &RootSet, y: f64) -> f64 {
    let r = (-TWO_PI * y).exp();
    TWO_PI * degree as f64 * y
        + roots.leading_modulus.ln()
        + roots.roots.iter().map(|w| w.norm().max(r).ln()).sum::<f64>()
}

/// Distance from `x` to the nearest integer.
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// An irrational rotation number with the range over which
/// `‖nω‖ ≥ c / (n·max(1, log n)^α)` was verified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub omega: f64,
    pub c: f64,
    pub alpha: f64,
    pub verified_up_to: u64,
}

pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_9;

impl Frequency {
    /// A frequency with no certificate (`verified_up_to = 0`).
    pub fn uncertified(omega: f64) -> Self {
        Self { omega, c: 0.0, alpha: 2.0, verified_up_to: 0 }
    }

    /// Golden mean with `(c, α) = (0.2, 2)`, certified up to `n`.
    pub fn golden(n: u64) -> Result<Self> {
        check_diophantine(GOLDEN_MEAN, 0.2, 2.0, n)
    }

    /// `j·ω mod 1` in `[0, 1)`, with the rounding error of the product
    /// compensated through an FMA.
    #[inline]
    pub fn frac_mult(&self, j: i64) -> f64 {
        frac_mult(self.omega, j)
    }

    /// The orbit point `z + jω`, reduced modulo 1 in the real part.
    #[inline]
    pub fn shift(&self, z: Complex64, j: i64) -> Complex64 {
        Complex64::new(z.re + self.frac_mult(j), z.im)
    }

    /// `‖jω‖`.
    pub fn norm_mult(&self, j: i64) -> f64 {
        let f = self.frac_mult(j);
        f.min(1.0 - f)
    }
}

#[inline]
fn frac_mult(omega: f64, j: i64) -> f64 {
    let jf = j as f64;
    let prod = jf * omega;
    let err = jf.mul_add(omega, -prod);
    let f = (prod - prod.floor()) + err;
    f.rem_euclid(1.0)
}

/// The Diophantine lower bound `c / (n·max(1, log n)^α)`.
pub fn diophantine_bound(c: f64, alpha: f64, n: u64) -> f64 {
    c / (n as f64 * (n as f64).ln().max(1.0).powf(alpha))
}

/// Scans `n = 1..=n_max` and certifies the Diophantine inequality, or
/// reports the first `n` attaining the worst ratio `‖nω‖ / bound`.
pub fn check_diophantine(omega: f64, c: f64, alpha: f64, n_max: u64) -> Result<Frequency> {
    if n_max < 1 || c <= 0.0 || alpha <= 1.0 {
        return Err(LabError::InvalidArgument(format!(
            "check_diophantine needs N >= 1, c > 0, alpha > 1 (got N={n_max}, c={c}, alpha={alpha})"
        )));
    }
    let mut worst: Option<(f64, u64, f64, f64)> = None;
    for n in 1..=n_max {
        let f = frac_mult(omega, n as i64);
        let distance = f.min(1.0 - f);
        let required = diophantine_bound(c, alpha, n);
        if distance < required {
            let ratio = distance / required;
            if worst.is_none_or(|(r, ..)| ratio < r) {
                worst = Some((ratio, n, distance, required));
            }
        }
    }
    match worst {
        None => Ok(Frequency { omega, c, alpha, verified_up_to: n_max }),
        Some((_, n, distance, required)) => Err(LabError::DiophantineViolation { n, distance, required }),
    }
}

/// `#{m ∈ [0, N-1] : mω mod 1 ∈ [u, v)}` on the circle; `v - u ≥ 1` is
/// the whole torus.
pub fn orbit_interval_count(freq: &Frequency, n: u64, u: f64, v: f64) -> u64 {
    let len = v - u;
    if len <= 0.0 {
        return 0;
    }
    if len >= 1.0 {
        return n;
    }
    let start = u.rem_euclid(1.0);
    (0..n as i64).filter(|&m| (freq.frac_mult(m) - start).rem_euclid(1.0) < len).count() as u64
}

/// Minimum and maximum circular gap between consecutive orbit points
/// `{mω : 0 ≤ m < N}`.
pub fn orbit_gaps(freq: &Frequency, n: u64) -> (f64, f64) {
    assert!(n >= 2, "orbit_gaps needs at least two points");
    let mut pts: Vec<f64> = (0..n as i64).map(|m| freq.frac_mult(m)).collect();
    pts.sort_by(f64::total_cmp);
    let mut min_gap = 1.0 - pts[pts.len() - 1] + pts[0];
    let mut max_gap = min_gap;
    for w in pts.windows(2) {
        let g = w[1] - w[0];
        min_gap = min_gap.min(g);
        max_gap = max_gap.max(g);
    }
    (min_gap, max_gap)
}

/// `Σ ‖kω‖^{-p}` over `k ∈ [0, N-1]` with `‖kω‖ ≥ ρ`, together with the
/// reference scale `N·max(1, log N)^α·ρ^{1-p}`.
pub fn shift_power_sum(freq: &Frequency, n: u64, p: f64, rho: f64) -> (f64, f64) {
    let sum = (0..n as i64).map(|k| freq.norm_mult(k)).filter(|&d| d >= rho).map(|d| d.powf(-p)).sum();
    let bound = n as f64 * (n as f64).ln().max(1.0).powf(freq.alpha) * rho.powf(1.0 - p);
    (sum, bound)
}

/// Coefficients `a`, `b` of the Jacobi operator and their derived data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub a: TrigPoly,
    pub b: TrigPoly,
    b_tilde: TrigPoly,
    d0: usize,
    n_b: usize,
}

/// Values of `a(z)`, `b(z)`, `b̃(z)` at one point.
#[derive(Debug, Clone, Copy)]
pub struct SiteValues {
    pub a: Complex64,
    pub b: Complex64,
    pub b_tilde: Complex64,
}

impl ModelSpec {
    pub fn new(a: TrigPoly, b: TrigPoly) -> Result<Self> {
        if !a.is_real_on_torus() {
            return Err(LabError::InvalidArgument("diagonal coefficient a must be real on the torus".into()));
        }
        let roots = torus_roots(&b, TORUS_TOL)?;
        let d0 = a.degree().max(b.degree());
        let b_tilde = b.tilde();
        Ok(Self { a, b, b_tilde, d0, n_b: roots.on_torus_count })
    }

    /// Almost Mathieu: `a = 2λcos(2πx)`, `b = 1`.
    pub fn almost_mathieu(lambda: f64) -> Self {
        Self::new(TrigPoly::two_cos(lambda), TrigPoly::constant(1.0)).expect("valid preset")
    }

    /// Extended Harper:
    /// `b(x) = λ3 e^{-2πi(x+ω/2)} + λ2 + λ1 e^{2πi(x+ω/2)}`, `a = 2λcos(2πx)`.
    pub fn extended_harper(lambda: f64, l1: f64, l2: f64, l3: f64, omega: f64) -> Result<Self> {
        let phase = Complex64::from_polar(1.0, PI * omega);
        let b = TrigPoly::new(&[
            (-1, phase.conj() * l3),
            (0, Complex64::new(l2, 0.0)),
            (1, phase * l1),
        ]);
        Self::new(TrigPoly::two_cos(lambda), b)
    }

    /// Free discrete Laplacian: `a = 0`, `b = 1`.
    pub fn free() -> Self {
        Self::new(TrigPoly::constant(0.0), TrigPoly::constant(1.0)).expect("valid preset")
    }

    pub fn b_tilde(&self) -> &TrigPoly {
        &self.b_tilde
    }

    /// `max(deg a, deg b)`.
    pub fn d0(&self) -> usize {
        self.d0
    }

    /// Zeros of `b` on the torus, counted with multiplicity.
    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// `n_b + 2·d0`.
    pub fn holder_denominator(&self) -> usize {
        self.n_b + 2 * self.d0
    }

    /// Predicted Hölder exponent `1/(n_b + 2d0)`; `None` for constant
    /// coefficients.
    pub fn p(&self) -> Option<f64> {
        match self.holder_denominator() {
            0 => None,
            den => Some(1.0 / den as f64),
        }
    }

    #[inline]
    pub fn site(&self, z: Complex64) -> SiteValues {
        let w = (Complex64::i() * TWO_PI * z).exp();
        let wi = w.inv();
        SiteValues { a: self.a.eval_w(w, wi), b: self.b.eval_w(w, wi), b_tilde: self.b_tilde.eval_w(w, wi) }
    }

    /// Bound for the spectral radius of every real-phase restriction.
    pub fn spectral_bound(&self) -> f64 {
        self.a.sup_bound() + 2.0 * self.b.sup_bound()
    }

    /// Torus points of the zeros of `b̃`.
    pub fn b_tilde_torus_zeros(&self) -> Result<Vec<f64>> {
        Ok(torus_roots(&self.b_tilde, TORUS_TOL)?.torus_points(TORUS_TOL))
    }
}
