//! Regularized transfer matrices `M^a_Λ`, Dirichlet determinants `f^a_Λ`,
//! Birkhoff sums of `log|b|`, and the exact identities connecting them.
//!
//! All routines take the energy as a complex number; real energies are the
//! special case `Im E = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{Frequency, ModelSpec, SiteValues};
use crate::error::{LabError, Result};
use crate::operator::IndexInterval;
use crate::scalednum::{ldexp, ScaledComplex, ScaledMatrix2};

const RESCALE_HI: f64 = 1e150;
const RESCALE_LO: f64 = 1e-150;

#[inline]
fn site(model: &ModelSpec, omega: &Frequency, z: Complex64, j: i64) -> SiteValues {
    model.site(omega.shift(z, j))
}

#[inline]
fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max)
}

/// Plain entries with a lazily renormalized shared exponent.
struct LazyScaled<const K: usize> {
    v: [Complex64; K],
    exponent: i64,
}

impl<const K: usize> LazyScaled<K> {
    #[inline]
    fn renormalize(&mut self) {
        let m = max_abs(&self.v);
        if m > RESCALE_HI || (m < RESCALE_LO && m > 0.0) {
            let shift = m.log2().round() as i64;
            for z in self.v.iter_mut() {
                *z = Complex64::new(ldexp(z.re, -shift), ldexp(z.im, -shift));
            }
            self.exponent += shift;
        }
    }
}

/// One factor `[[a(z+jω) − E, −b̃(z+jω)], [b(z+(j+1)ω), 0]]` as plain entries.
pub fn step_matrix(here: &SiteValues, next: &SiteValues, e: Complex64) -> [Complex64; 4] {
    [here.a - e, -here.b_tilde, next.b, Complex64::new(0.0, 0.0)]
}

/// `M^a` over the sites `lo..=hi` at base point `z`: the ordered product
/// `T_hi ⋯ T_lo`. An empty range gives the identity.
pub fn monodromy_a_range(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lo: i64, hi: i64) -> ScaledMatrix2 {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = LazyScaled { v: [one, zero, zero, one], exponent: 0 };
    if hi < lo {
        return ScaledMatrix2::identity();
    }
    let mut here = site(model, omega, z, lo);
    for j in lo..=hi {
        let next = site(model, omega, z, j + 1);
        let [m11, m12, m21, m22] = acc.v;
        let d = here.a - e;
        acc.v = [d * m11 - here.b_tilde * m21, d * m12 - here.b_tilde * m22, next.b * m11, next.b * m12];
        acc.renormalize();
        here = next;
    }
    ScaledMatrix2::new(acc.v, acc.exponent)
}

/// `M^a_Λ(z, ω, E) = M^a_{|Λ|}(z + αω, ω, E)`.
pub fn monodromy_a(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lam: IndexInterval) -> ScaledMatrix2 {
    monodromy_a_range(model, z, omega, e, lam.lo, lam.hi)
}

/// The unregularized transfer matrix over `lo..=hi`: every factor divided
/// by `b(z+(j+1)ω)`.
pub fn monodromy_range(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lo: i64, hi: i64) -> Result<ScaledMatrix2> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = LazyScaled { v: [one, zero, zero, one], exponent: 0 };
    if hi < lo {
        return Ok(ScaledMatrix2::identity());
    }
    let mut here = site(model, omega, z, lo);
    for j in lo..=hi {
        let next = site(model, omega, z, j + 1);
        if next.b.re == 0.0 && next.b.im == 0.0 {
            return Err(LabError::MinusInfinity { index: j + 1 });
        }
        let inv = next.b.inv();
        let [m11, m12, m21, m22] = acc.v;
        let d = (here.a - e) * inv;
        let bt = here.b_tilde * inv;
        acc.v = [d * m11 - bt * m21, d * m12 - bt * m22, m11, m12];
        acc.renormalize();
        here = next;
    }
    Ok(ScaledMatrix2::new(acc.v, acc.exponent))
}

/// Current and previous Dirichlet determinants of a growing interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPair {
    /// `f_n^a`
    pub f_curr: ScaledComplex,
    /// `f_{n-1}^a`
    pub f_prev: ScaledComplex,
}

impl DetPair {
    /// `f_0 = 1`, `f_{-1} = 0`.
    pub fn empty() -> Self {
        Self { f_curr: ScaledComplex::ONE, f_prev: ScaledComplex::ZERO }
    }
}

/// Runs the three-term recurrence over the sites `lo..=hi`.
pub fn det_pair_range(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lo: i64, hi: i64) -> DetPair {
    if hi < lo {
        return DetPair::empty();
    }
    let mut acc = LazyScaled { v: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], exponent: 0 };
    for j in lo..=hi {
        let s = site(model, omega, z, j);
        let [curr, prev] = acc.v;
        // the coupling to the previous site only exists past the first one
        let coupling = if j == lo { Complex64::new(0.0, 0.0) } else { s.b * s.b_tilde };
        acc.v = [(s.a - e) * curr - coupling * prev, curr];
        acc.renormalize();
    }
    DetPair {
        f_curr: ScaledComplex::new(acc.v[0], acc.exponent),
        f_prev: ScaledComplex::new(acc.v[1], acc.exponent),
    }
}

/// `f^a` over `lo..=hi`; the empty interval gives 1 and the "length −1"
/// interval gives 0, matching `f_0 = 1`, `f_{-1} = 0`.
pub fn det_f_a_range(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lo: i64, hi: i64) -> ScaledComplex {
    if hi == lo - 1 {
        ScaledComplex::ONE
    } else if hi < lo - 1 {
        ScaledComplex::ZERO
    } else {
        det_pair_range(model, z, omega, e, lo, hi).f_curr
    }
}

/// `f^a_Λ(z, ω, E) = det(H_Λ(z, ω) − E)`.
pub fn det_f_a(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lam: IndexInterval) -> ScaledComplex {
    det_f_a_range(model, z, omega, e, lam.lo, lam.hi)
}

/// Determinants of all leading blocks: `out[i] = f^a_{[lo, lo+i-1]}` for
/// `i = 0..=len` (so `out[0] = 1`).
pub fn prefix_determinants(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lo: i64, hi: i64) -> Vec<ScaledComplex> {
    let len = (hi - lo + 1).max(0) as usize;
    let mut out = Vec::with_capacity(len + 1);
    out.push(ScaledComplex::ONE);
    let mut curr = ScaledComplex::ONE;
    let mut prev = ScaledComplex::ZERO;
    for j in lo..=hi {
        let s = site(model, omega, z, j);
        let coupling = if j == lo { Complex64::new(0.0, 0.0) } else { s.b * s.b_tilde };
        let next = curr.scale(s.a - e) - prev.scale(coupling);
        prev = curr;
        curr = next;
        out.push(curr);
    }
    out
}

/// Determinants of all trailing blocks: `out[i] = f^a_{[lo+i, hi]}` for
/// `i = 0..=len` (so `out[len] = 1`).
pub fn suffix_determinants(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lo: i64, hi: i64) -> Vec<ScaledComplex> {
    let len = (hi - lo + 1).max(0) as usize;
    let mut out = vec![ScaledComplex::ONE; len + 1];
    let mut curr = ScaledComplex::ONE;
    let mut prev = ScaledComplex::ZERO;
    let mut upper = site(model, omega, z, hi + 1);
    for j in (lo..=hi).rev() {
        let s = site(model, omega, z, j);
        // coupling between j and j+1 lives at b(z+(j+1)ω)
        let coupling = if j == hi { Complex64::new(0.0, 0.0) } else { upper.b * upper.b_tilde };
        let next = curr.scale(s.a - e) - prev.scale(coupling);
        prev = curr;
        curr = next;
        out[(j - lo) as usize] = curr;
        upper = s;
    }
    out
}

/// `S_N(z) = Σ_{k<N} log|b(z+kω)|`, or the same sum with `b̃`.
pub fn birkhoff_s(model: &ModelSpec, z: Complex64, omega: &Frequency, n: usize, use_tilde: bool) -> Result<f64> {
    birkhoff_s_from(model, z, omega, 0, n, use_tilde)
}

fn birkhoff_s_from(model: &ModelSpec, z: Complex64, omega: &Frequency, start: i64, n: usize, use_tilde: bool) -> Result<f64> {
    let poly = if use_tilde { model.b_tilde() } else { &model.b };
    let mut terms = Vec::with_capacity(n);
    for k in 0..n as i64 {
        let v = poly.eval(omega.shift(z, start + k));
        if v.re == 0.0 && v.im == 0.0 {
            return Err(LabError::MinusInfinity { index: start + k });
        }
        terms.push(v.norm().ln());
    }
    Ok(crate::stats::pairwise_sum(&terms))
}

/// `log|det M^a|` over `lo..=hi` by QR accumulation (Gram–Schmidt on each
/// step), which stays accurate where the determinant of the final product
/// cancels catastrophically.
pub fn log_abs_det_accumulated(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lo: i64, hi: i64) -> f64 {
    let mut q = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let mut log_det = 0.0;
    if hi < lo {
        return 0.0;
    }
    let mut here = site(model, omega, z, lo);
    for j in lo..=hi {
        let next = site(model, omega, z, j + 1);
        let t = step_matrix(&here, &next, e);
        // B = T·Q
        let b = [
            t[0] * q[0] + t[1] * q[2],
            t[0] * q[1] + t[1] * q[3],
            t[2] * q[0] + t[3] * q[2],
            t[2] * q[1] + t[3] * q[3],
        ];
        let (c1, c2) = ([b[0], b[2]], [b[1], b[3]]);
        let r11 = (c1[0].norm_sqr() + c1[1].norm_sqr()).sqrt();
        if r11 == 0.0 {
            return f64::NEG_INFINITY;
        }
        let q1 = [c1[0] / r11, c1[1] / r11];
        let r12 = q1[0].conj() * c2[0] + q1[1].conj() * c2[1];
        let mut v = [c2[0] - r12 * q1[0], c2[1] - r12 * q1[1]];
        // one reorthogonalization pass
        let s = q1[0].conj() * v[0] + q1[1].conj() * v[1];
        v = [v[0] - s * q1[0], v[1] - s * q1[1]];
        let r22 = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        if r22 == 0.0 {
            return f64::NEG_INFINITY;
        }
        log_det += r11.ln() + r22.ln();
        let q2 = [v[0] / r22, v[1] / r22];
        q = [q1[0], q2[0], q1[1], q2[1]];
        here = next;
    }
    log_det
}

/// Rounding-level residuals of the three exact identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `|log‖M_N‖ − (−S_N(z+ω) + log‖M^a_N‖)|`; `None` when an orbit
    /// point hits a zero of `b`.
    pub mu_ma: Option<f64>,
    /// Largest `|log|M^a_ij| − log|F_ij||` over the four entries, where
    /// `F` is the determinant expression of the entry.
    pub ma_fa: f64,
    /// Largest phase mismatch `|arg(M^a_ij / F_ij)|` over the four entries.
    pub ma_fa_phase: f64,
    /// `|log|det M^a_N| − (S̃_N(z) + S_N(z+ω))|`.
    pub det: f64,
}

fn log_mismatch(m: ScaledComplex, f: ScaledComplex) -> (f64, f64) {
    match (m.is_zero(), f.is_zero()) {
        (true, true) => (0.0, 0.0),
        (false, false) => {
            let ratio = m / f;
            (ratio.log_abs().abs(), ratio.arg().abs())
        }
        _ => (f64::INFINITY, f64::INFINITY),
    }
}

/// The determinant expressions of the four entries of `M^a_Λ(z)`.
pub fn ma_fa_entries(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lam: IndexInterval) -> [ScaledComplex; 4] {
    let (lo, hi) = (lam.lo, lam.hi);
    let bt = ScaledComplex::from(model.b_tilde().eval(omega.shift(z, lo)));
    let b_end = ScaledComplex::from(model.b.eval(omega.shift(z, hi + 1)));
    [
        det_f_a_range(model, z, omega, e, lo, hi),
        -(bt * det_f_a_range(model, z, omega, e, lo + 1, hi)),
        b_end * det_f_a_range(model, z, omega, e, lo, hi - 1),
        -(bt * b_end * det_f_a_range(model, z, omega, e, lo + 1, hi - 1)),
    ]
}

pub fn identity_residuals(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, lam: IndexInterval) -> IdentityResiduals {
    let (lo, hi) = (lam.lo, lam.hi);
    let n = lam.len();
    let ma = monodromy_a(model, z, omega, e, lam);
    let log_ma = ma.log_two_norm().unwrap_or(f64::NEG_INFINITY);

    let mu_ma = match (monodromy_range(model, z, omega, e, lo, hi), birkhoff_s_from(model, z, omega, lo + 1, n, false)) {
        (Ok(m), Ok(s)) => m.log_two_norm().ok().map(|l| (l - (-s + log_ma)).abs()),
        _ => None,
    };

    let fa = ma_fa_entries(model, z, omega, e, lam);
    let (mut ma_fa, mut ma_fa_phase) = (0.0f64, 0.0f64);
    for (i, f) in fa.iter().enumerate() {
        let (mag, ph) = log_mismatch(ma.entry(i / 2, i % 2), *f);
        ma_fa = ma_fa.max(mag);
        ma_fa_phase = ma_fa_phase.max(ph);
    }

    let log_det = log_abs_det_accumulated(model, z, omega, e, lo, hi);
    let sums = birkhoff_s_from(model, z, omega, lo, n, true)
        .and_then(|st| birkhoff_s_from(model, z, omega, lo + 1, n, false).map(|s| st + s));
    let det = match sums {
        Ok(s) => (log_det - s).abs(),
        // both sides are −∞ when an orbit point is a zero of b or b̃
        Err(_) if log_det == f64::NEG_INFINITY => 0.0,
        Err(_) => f64::INFINITY,
    };
    IdentityResiduals { mu_ma, ma_fa, ma_fa_phase, det }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{TrigPoly, GOLDEN_MEAN};
    use crate::operator::build_h;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn golden() -> Frequency {
        Frequency::golden(1000).unwrap()
    }

    fn harper() -> ModelSpec {
        ModelSpec::extended_harper(3.0, 1.0, 1.0, 1.0, GOLDEN_MEAN).unwrap()
    }

    fn lam(lo: i64, hi: i64) -> IndexInterval {
        IndexInterval::new(lo, hi).unwrap()
    }

    #[test]
    fn single_factor_monodromy() {
        let m = harper();
        let w = golden();
        let z = c(0.31, 0.02);
        let e = c(0.4, 0.0);
        let got = monodromy_a(&m, z, &w, e, lam(3, 3)).to_plain();
        let zz = w.shift(z, 3);
        let next = w.shift(z, 4);
        let expected = [m.a.eval(zz) - e, -m.b_tilde().eval(zz), m.b.eval(next), c(0.0, 0.0)];
        for (g, x) in got.iter().zip(expected.iter()) {
            assert_abs_diff_eq!((g - x).norm(), 0.0, epsilon = 1e-13);
        }
        let two = monodromy_a(&m, z, &w, e, lam(3, 4));
        let prod = monodromy_a(&m, z, &w, e, lam(4, 4)) * monodromy_a(&m, z, &w, e, lam(3, 3));
        for (g, x) in two.to_plain().iter().zip(prod.to_plain().iter()) {
            assert_abs_diff_eq!((g - x).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn free_rotation_has_unit_norm() {
        let m = ModelSpec::free();
        let w = golden();
        for len in [1, 2, 7, 100, 1001] {
            let mm = monodromy_a(&m, c(0.2, 0.0), &w, c(0.0, 0.0), lam(0, len - 1));
            assert_abs_diff_eq!(mm.log_two_norm().unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn determinant_small_cases() {
        let m = harper();
        let w = golden();
        let z = c(0.17, -0.01);
        let e = c(-0.3, 0.05);
        let f1 = det_f_a(&m, z, &w, e, lam(2, 2)).to_complex();
        assert_abs_diff_eq!((f1 - (m.a.eval(w.shift(z, 2)) - e)).norm(), 0.0, epsilon = 1e-13);
        let f2 = det_f_a(&m, z, &w, e, lam(2, 3)).to_complex();
        let (s2, s3) = (m.site(w.shift(z, 2)), m.site(w.shift(z, 3)));
        let expected = (s2.a - e) * (s3.a - e) - s3.b * s3.b_tilde;
        assert_abs_diff_eq!((f2 - expected).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(det_f_a_range(&m, z, &w, e, 5, 4), ScaledComplex::ONE);
        assert_eq!(det_f_a_range(&m, z, &w, e, 5, 3), ScaledComplex::ZERO);
    }

    /// Dense LU determinant of `H_Λ − E` with partial pivoting, via nalgebra.
    fn dense_det(model: &ModelSpec, z: Complex64, omega: &Frequency, e: Complex64, l: IndexInterval) -> Complex64 {
        let h = build_h(model, z, omega, l);
        let n = l.len();
        let mut mat = nalgebra::DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            mat[(i, i)] = h.diag[i] - e;
            if i + 1 < n {
                mat[(i, i + 1)] = h.sup[i];
                mat[(i + 1, i)] = h.sub[i];
            }
        }
        mat.lu().determinant()
    }

    #[test]
    fn determinant_matches_dense_lu() {
        let mut rng = crate::stats::rng(3);
        let w = golden();
        for model in [ModelSpec::almost_mathieu(3.0), harper()] {
            for _ in 0..20 {
                let n = rng.gen_range(1..=64);
                let lo = rng.gen_range(-10..10);
                let z = c(rng.gen(), rng.gen_range(-0.05..0.05));
                let e = c(rng.gen_range(-6.0..6.0), rng.gen_range(-0.1..0.1));
                let l = lam(lo, lo + n - 1);
                let got = det_f_a(&model, z, &w, e, l).to_complex();
                let want = dense_det(&model, z, &w, e, l);
                assert!((got - want).norm() <= 1e-8 * want.norm(), "n={n} got={got} want={want}");
            }
        }
    }

    #[test]
    fn prefix_and_suffix_determinants_agree_with_direct() {
        let m = harper();
        let w = golden();
        let (z, e) = (c(0.41, 0.0), c(0.7, 0.01));
        let (lo, hi) = (-3, 12);
        let pre = prefix_determinants(&m, z, &w, e, lo, hi);
        let suf = suffix_determinants(&m, z, &w, e, lo, hi);
        for i in 0..=(hi - lo + 1) as usize {
            let direct_pre = det_f_a_range(&m, z, &w, e, lo, lo + i as i64 - 1);
            let direct_suf = det_f_a_range(&m, z, &w, e, lo + i as i64, hi);
            assert_abs_diff_eq!((pre[i] / direct_pre).log_abs(), 0.0, epsilon = 1e-11);
            assert_abs_diff_eq!((suf[i] / direct_suf).log_abs(), 0.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn birkhoff_examples() {
        let w = golden();
        let amo = ModelSpec::almost_mathieu(2.0);
        assert_eq!(birkhoff_s(&amo, c(0.3, 0.1), &w, 50, false).unwrap(), 0.0);
        let m = harper();
        let z = c(0.123, 0.04);
        assert_abs_diff_eq!(birkhoff_s(&m, z, &w, 1, false).unwrap(), m.b.eval(z).norm().ln(), epsilon = 1e-15);
        let x = c(0.377, 0.0);
        assert_abs_diff_eq!(
            birkhoff_s(&m, x, &w, 200, false).unwrap(),
            birkhoff_s(&m, x, &w, 200, true).unwrap(),
            epsilon = 1e-11
        );
        // zero of b: 1 + 2cos(2π(x+ω/2)) vanishes at x + ω/2 = 1/3
        let x0 = c(1.0 / 3.0 - GOLDEN_MEAN / 2.0, 0.0);
        let bad = ModelSpec::new(
            TrigPoly::two_cos(3.0),
            TrigPoly::new(&[(0, c(1.0, 0.0)), (1, c(-1.0, 0.0))]),
        )
        .unwrap();
        assert!(m.b.eval(x0).norm() < 1e-12);
        assert_eq!(birkhoff_s(&bad, c(0.0, 0.0), &w, 3, false), Err(LabError::MinusInfinity { index: 0 }));
    }

    #[test]
    fn identity_trivial_cases() {
        let w = golden();
        let amo = ModelSpec::almost_mathieu(3.0);
        let r = identity_residuals(&amo, c(0.2, 0.0), &w, c(0.5, 0.0), lam(0, 49));
        assert_eq!(r.mu_ma, Some(0.0));
        let free = ModelSpec::free();
        let r = identity_residuals(&free, c(0.2, 0.0), &w, c(0.0, 0.0), lam(0, 49));
        assert_abs_diff_eq!(r.det, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn identities_hold_at_rounding_level() {
        let w = golden();
        let mut rng = crate::stats::rng(5);
        for model in [ModelSpec::almost_mathieu(3.0), harper()] {
            for _ in 0..10 {
                let z = c(rng.gen(), rng.gen_range(-0.01..0.01));
                let e = c(rng.gen_range(-7.0..7.0), 0.0);
                let r = identity_residuals(&model, z, &w, e, lam(0, 499));
                assert!(r.mu_ma.unwrap() < 1e-9, "{r:?}");
                assert!(r.ma_fa < 1e-9, "{r:?}");
                assert!(r.det < 1e-9, "{r:?}");
            }
        }
    }

    #[test]
    fn accumulated_det_matches_factor_determinants() {
        let w = golden();
        let m = harper();
        let (z, e) = (c(0.77, 0.003), c(1.1, 0.0));
        let acc = log_abs_det_accumulated(&m, z, &w, e, 0, 39);
        // det T_j = b̃(z+jω)·b(z+(j+1)ω)
        let want: f64 = (0..40)
            .map(|j| (m.b_tilde().eval(w.shift(z, j)) * m.b.eval(w.shift(z, j + 1))).norm().ln())
            .sum();
        assert_abs_diff_eq!(acc, want, epsilon = 1e-11);
        let direct = monodromy_a(&m, z, &w, e, lam(0, 1)).log_abs_det().unwrap();
        assert_abs_diff_eq!(direct, log_abs_det_accumulated(&m, z, &w, e, 0, 1), epsilon = 1e-12);
    }

    #[test]
    fn cocycle_partition_property() {
        let w = golden();
        let m = ModelSpec::almost_mathieu(3.0);
        let (z, e) = (c(0.29, 0.0), c(0.3, 0.0));
        let whole = monodromy_a(&m, z, &w, e, lam(0, 9999));
        let cuts = [0, 17, 1000, 4321, 9000, 10000];
        let mut prod = ScaledMatrix2::identity();
        for pair in cuts.windows(2) {
            prod = monodromy_a(&m, z, &w, e, lam(pair[0], pair[1] - 1)) * prod;
        }
        assert_abs_diff_eq!(whole.log_two_norm().unwrap(), prod.log_two_norm().unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn top_left_entry_is_determinant_and_real_on_real_axis() {
        let w = golden();
        let m = harper();
        let (x, e) = (c(0.613, 0.0), c(-0.25, 0.0));
        let l = lam(0, 299);
        let top = monodromy_a(&m, x, &w, e, l).entry(0, 0);
        let f = det_f_a(&m, x, &w, e, l);
        let ratio = top / f;
        assert!(ratio.log_abs().abs() < 1e-9 && ratio.arg().abs() < 1e-9);
        let fm = f.mantissa();
        assert!(fm.im.abs() <= 1e-12 * fm.norm(), "{fm}");
    }

    #[test]
    fn determinant_is_finite_at_zeros_of_b() {
        let w = golden();
        let m = harper();
        let x0 = c(1.0 / 3.0 - GOLDEN_MEAN / 2.0, 0.0);
        let f = det_f_a(&m, x0, &w, c(0.1, 0.0), lam(0, 40));
        assert!(f.log_abs().is_finite());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn partition_and_reality(x in 0.0f64..1.0, e in -7.0f64..7.0, n in 2i64..400, cut in 0.0f64..1.0) {
            let m = harper();
            let w = golden();
            let z = c(x, 0.0);
            let k = ((n - 1) as f64 * cut) as i64;
            let whole = monodromy_a(&m, z, &w, c(e, 0.0), lam(0, n - 1));
            let left = monodromy_a_range(&m, z, &w, c(e, 0.0), 0, k);
            let right = monodromy_a_range(&m, z, &w, c(e, 0.0), k + 1, n - 1);
            let prod = right * left;
            proptest::prop_assert!((whole.log_two_norm().unwrap() - prod.log_two_norm().unwrap()).abs() < 1e-9);
            let f = det_f_a(&m, z, &w, c(e, 0.0), lam(0, n - 1));
            let v = f.mantissa();
            proptest::prop_assert!(v.im.abs() <= 1e-12 * v.norm());
            proptest::prop_assert!(f.log_abs().is_finite() || f.is_zero());
        }
    }
}
