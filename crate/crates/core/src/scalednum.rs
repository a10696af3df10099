//! Extended-exponent complex scalars and 2×2 matrices.
//!
//! Transfer-matrix products over `N` sites have magnitude `e^{N·L}`; for
//! `N = 10⁴` and `L ≈ 2` that is far outside the `f64` range. Values here
//! are stored as a mantissa of order one plus a power-of-two exponent, so
//! only the log-magnitude ever grows.

use num_complex::Complex64;
use std::f64::consts::LN_2;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{LabError, Result};

/// Entries (and summands) smaller than `2^-FLUSH_BITS` relative to the
/// leading magnitude are dropped.
pub const FLUSH_BITS: i64 = 200;

/// `x · 2^k`, exact whenever the result is representable.
pub fn ldexp(mut x: f64, mut k: i64) -> f64 {
    while k > 1000 {
        x *= f64::from_bits(((1023 + 1000) as u64) << 52);
        k -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while k < -1000 {
        x *= f64::from_bits(((1023 - 1000) as u64) << 52);
        k += 1000;
        if x == 0.0 {
            return x;
        }
    }
    if k >= -1022 {
        x * f64::from_bits(((1023 + k) as u64) << 52)
    } else {
        // two steps so the scale factor itself stays normal
        x * f64::from_bits(((1023 - 600) as u64) << 52)
            * f64::from_bits(((1023 + k + 600) as u64) << 52)
    }
}

/// Binary exponent `e` with `x = m·2^e`, `1/2 ≤ |m| < 1`. Requires finite nonzero `x`.
fn binary_exponent(x: f64) -> i64 {
    let x = x.abs();
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        // subnormal
        binary_exponent(x * f64::from_bits(((1023 + 64) as u64) << 52)) - 64
    } else {
        raw - 1022
    }
}

fn cscale(z: Complex64, k: i64) -> Complex64 {
    Complex64::new(ldexp(z.re, k), ldexp(z.im, k))
}

/// Complex number `mantissa · 2^exponent` with `1/2 ≤ |mantissa| < 1`, or
/// the canonical zero `(0, 0)`.
#[derive(Clone, Copy, PartialEq)]
pub struct ScaledComplex {
    mantissa: Complex64,
    exponent: i64,
}

impl fmt::Debug for ScaledComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?})·2^{}", self.mantissa, self.exponent)
    }
}

impl Default for ScaledComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl ScaledComplex {
    pub const ZERO: Self = Self { mantissa: Complex64::new(0.0, 0.0), exponent: 0 };
    pub const ONE: Self = Self { mantissa: Complex64::new(0.5, 0.0), exponent: 1 };

    /// Builds `m · 2^e` and renormalizes.
    pub fn new(mantissa: Complex64, exponent: i64) -> Self {
        if mantissa.re == 0.0 && mantissa.im == 0.0 {
            return Self::ZERO;
        }
        let scale = mantissa.re.abs().max(mantissa.im.abs());
        // pre-scale so the modulus is computed without overflow
        let pre = binary_exponent(scale);
        let mut m = cscale(mantissa, -pre);
        let mut e = exponent + pre;
        let modulus = m.norm();
        let shift = binary_exponent(modulus);
        m = cscale(m, -shift);
        e += shift;
        // rounding in hypot can leave |m| at exactly 1
        if m.norm() >= 1.0 {
            m = cscale(m, -1);
            e += 1;
        }
        Self { mantissa: m, exponent: e }
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z, 0)
    }

    pub fn from_real(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0), 0)
    }

    pub fn mantissa(&self) -> Complex64 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.re == 0.0 && self.mantissa.im == 0.0
    }

    /// `log|z|`; `-inf` for the canonical zero.
    pub fn log_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.norm().ln() + self.exponent as f64 * LN_2
        }
    }

    /// Argument in `(-π, π]`; independent of the exponent.
    pub fn arg(&self) -> f64 {
        self.mantissa.arg()
    }

    /// Plain complex value; overflows to infinity or underflows to zero
    /// outside the `f64` range.
    pub fn to_complex(&self) -> Complex64 {
        cscale(self.mantissa, self.exponent)
    }

    pub fn conj(&self) -> Self {
        Self { mantissa: self.mantissa.conj(), exponent: self.exponent }
    }

    pub fn recip(&self) -> Self {
        Self::new(1.0 / self.mantissa, -self.exponent)
    }

    /// Multiplication by a plain complex number.
    pub fn scale(&self, z: Complex64) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.mantissa * z, self.exponent)
    }
}

impl From<Complex64> for ScaledComplex {
    fn from(z: Complex64) -> Self {
        Self::from_complex(z)
    }
}

impl Mul for ScaledComplex {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Div for ScaledComplex {
    type Output = Self;
    /// Division by the canonical zero yields a non-finite mantissa; callers
    /// that can hit it check [`ScaledComplex::is_zero`] first.
    fn div(self, rhs: Self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.mantissa / rhs.mantissa, self.exponent - rhs.exponent)
    }
}

impl Add for ScaledComplex {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.exponent >= rhs.exponent { (self, rhs) } else { (rhs, self) };
        let gap = big.exponent - small.exponent;
        if gap > FLUSH_BITS {
            return big;
        }
        Self::new(big.mantissa + cscale(small.mantissa, -gap), big.exponent)
    }
}

impl Neg for ScaledComplex {
    type Output = Self;
    fn neg(self) -> Self {
        Self { mantissa: -self.mantissa, exponent: self.exponent }
    }
}

impl Sub for ScaledComplex {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

/// 2×2 complex matrix `2^exponent · entries` with one exponent shared by
/// all four entries. Entries are row-major `[a11, a12, a21, a22]`.
#[derive(Clone, Copy, PartialEq)]
pub struct ScaledMatrix2 {
    entries: [Complex64; 4],
    exponent: i64,
}

impl fmt::Debug for ScaledMatrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}·2^{}", self.entries, self.exponent)
    }
}

impl ScaledMatrix2 {
    pub fn new(entries: [Complex64; 4], exponent: i64) -> Self {
        let max = entries.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
        if max == 0.0 {
            return Self { entries: [Complex64::new(0.0, 0.0); 4], exponent: 0 };
        }
        let pre = binary_exponent(max);
        let mut m = entries.map(|z| cscale(z, -pre));
        let mut e = exponent + pre;
        let max_mod = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let shift = binary_exponent(max_mod);
        m = m.map(|z| cscale(z, -shift));
        e += shift;
        if m.iter().any(|z| z.norm() >= 1.0) {
            m = m.map(|z| cscale(z, -1));
            e += 1;
        }
        let floor = ldexp(1.0, -FLUSH_BITS);
        for z in m.iter_mut() {
            if z.norm() < floor {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        Self { entries: m, exponent: e }
    }

    pub fn from_plain(entries: [Complex64; 4]) -> Self {
        Self::new(entries, 0)
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::new([one, zero, zero, one], 0)
    }

    pub fn diag(d1: Complex64, d2: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self::new([d1, zero, zero, d2], 0)
    }

    /// The projection `diag(1, 0)`.
    pub fn top_projection() -> Self {
        Self::diag(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn entries(&self) -> [Complex64; 4] {
        self.entries
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Entry `(row, col)`, zero-based, as a scaled scalar.
    pub fn entry(&self, row: usize, col: usize) -> ScaledComplex {
        ScaledComplex::new(self.entries[2 * row + col], self.exponent)
    }

    /// Plain `f64` entries; may overflow for large exponents.
    pub fn to_plain(&self) -> [Complex64; 4] {
        self.entries.map(|z| cscale(z, self.exponent))
    }

    /// Largest singular value, `log σ_max`.
    pub fn log_two_norm(&self) -> Result<f64> {
        if self.is_zero() {
            return Err(LabError::ZeroMatrix);
        }
        Ok(self.mantissa_two_norm().ln() + self.exponent as f64 * LN_2)
    }

    /// Smallest singular value `σ_min = |det| / σ_max`, as a logarithm.
    pub fn log_min_singular(&self) -> Result<f64> {
        Ok(self.log_abs_det()? - self.log_two_norm()?)
    }

    // σ_max = (√(F + 2|det|) + √(F − 2|det|)) / 2 with F = ‖A‖_F².
    fn mantissa_two_norm(&self) -> f64 {
        let [a, b, c, d] = self.entries;
        let frob = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
        let det = (a * d - b * c).norm();
        let plus = (frob + 2.0 * det).sqrt();
        let minus = (frob - 2.0 * det).max(0.0).sqrt();
        0.5 * (plus + minus)
    }

    /// `log|a11·a22 − a12·a21|`, evaluated on the mantissas.
    ///
    /// Loses relative accuracy when the matrix is close to rank one at the
    /// mantissa level (long hyperbolic products); use an accumulated
    /// determinant for those.
    pub fn log_abs_det(&self) -> Result<f64> {
        let [a, b, c, d] = self.entries;
        let det = a * d - b * c;
        if det.re == 0.0 && det.im == 0.0 {
            return Err(LabError::SingularMatrix);
        }
        Ok(det.norm().ln() + 2.0 * self.exponent as f64 * LN_2)
    }

    pub fn det(&self) -> ScaledComplex {
        let [a, b, c, d] = self.entries;
        ScaledComplex::new(a * d - b * c, 2 * self.exponent)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        smat_mul(self, rhs)
    }
}

/// Renormalized product `A·B`.
pub fn smat_mul(a: &ScaledMatrix2, b: &ScaledMatrix2) -> ScaledMatrix2 {
    let [a11, a12, a21, a22] = a.entries;
    let [b11, b12, b21, b22] = b.entries;
    ScaledMatrix2::new(
        [
            a11 * b11 + a12 * b21,
            a11 * b12 + a12 * b22,
            a21 * b11 + a22 * b21,
            a21 * b12 + a22 * b22,
        ],
        a.exponent + b.exponent,
    )
}

impl Mul for ScaledMatrix2 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        smat_mul(&self, &rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng) -> [Complex64; 4] {
        [(); 4].map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
    }

    fn plain_mul(a: [Complex64; 4], b: [Complex64; 4]) -> [Complex64; 4] {
        [
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ]
    }

    #[test]
    fn ldexp_matches_powi() {
        for k in [-1074, -1030, -1022, -3, 0, 5, 1023] {
            assert_eq!(ldexp(1.0, k), 2f64.powi(k as i32));
        }
        assert!(ldexp(1.0, 5000).is_infinite());
        assert_eq!(ldexp(1.0, -5000), 0.0);
    }

    #[test]
    fn scaled_complex_normalization() {
        let z = ScaledComplex::from_complex(c(3.0, 4.0));
        let m = z.mantissa().norm();
        assert!((0.5..1.0).contains(&m));
        assert_abs_diff_eq!(z.log_abs(), 5f64.ln(), epsilon = 1e-15);
        assert_eq!(ScaledComplex::from_real(0.0), ScaledComplex::ZERO);
        assert_eq!(ScaledComplex::ONE.to_complex(), c(1.0, 0.0));
    }

    #[test]
    fn scaled_complex_arithmetic_beyond_f64_range() {
        let big = ScaledComplex::new(c(0.75, 0.0), 5000);
        let sq = big * big;
        assert_eq!(sq.exponent(), 10000);
        assert_abs_diff_eq!(sq.log_abs(), 2.0 * big.log_abs(), epsilon = 1e-9);
        let back = sq / big;
        assert_abs_diff_eq!(back.log_abs(), big.log_abs(), epsilon = 1e-9);
        // tiny summand more than FLUSH_BITS below is dropped
        let tiny = ScaledComplex::new(c(0.5, 0.0), 5000 - 300);
        assert_eq!(big + tiny, big);
        let diff = big - big;
        assert!(diff.is_zero());
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = ScaledMatrix2::from_plain(random_matrix(&mut rng));
        let prod = smat_mul(&a, &ScaledMatrix2::identity());
        assert_abs_diff_eq!(prod.log_two_norm().unwrap(), a.log_two_norm().unwrap(), epsilon = 1e-15);
        assert_eq!(prod.exponent(), a.exponent());
    }

    #[test]
    fn huge_diagonal_exponent_addition() {
        let d = ScaledMatrix2::new([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], 1000);
        let p = smat_mul(&d, &d);
        // mantissa 1/2 normalization puts 2^2000 at exponent 2001
        assert_eq!(p.exponent(), 2001);
        assert_eq!(p.entries()[0], c(0.5, 0.0));
        assert_abs_diff_eq!(p.log_two_norm().unwrap(), 2000.0 * LN_2, epsilon = 1e-9);
    }

    #[test]
    fn associativity_against_plain_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (pa, pb, pc) = (random_matrix(&mut rng), random_matrix(&mut rng), random_matrix(&mut rng));
            let (a, b, cc) = (
                ScaledMatrix2::from_plain(pa),
                ScaledMatrix2::from_plain(pb),
                ScaledMatrix2::from_plain(pc),
            );
            let left = smat_mul(&smat_mul(&a, &b), &cc);
            let right = smat_mul(&a, &smat_mul(&b, &cc));
            let plain = ScaledMatrix2::from_plain(plain_mul(plain_mul(pa, pb), pc));
            let l = left.log_two_norm().unwrap();
            assert_abs_diff_eq!(l, right.log_two_norm().unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(l, plain.log_two_norm().unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_norm_examples() {
        assert_abs_diff_eq!(ScaledMatrix2::identity().log_two_norm().unwrap(), 0.0, epsilon = 1e-15);
        let ones = ScaledMatrix2::from_plain([c(1.0, 0.0); 4]);
        assert_abs_diff_eq!(ones.log_two_norm().unwrap(), 2f64.ln(), epsilon = 1e-15);
        let d = ScaledMatrix2::diag(c(3.0, 0.0), c(1.0 / 3.0, 0.0));
        assert_abs_diff_eq!(d.log_two_norm().unwrap(), 3f64.ln(), epsilon = 1e-15);
        let zero = ScaledMatrix2::from_plain([c(0.0, 0.0); 4]);
        assert_eq!(zero.log_two_norm(), Err(LabError::ZeroMatrix));
    }

    #[test]
    fn two_norm_matches_dense_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = random_matrix(&mut rng);
            let m = nalgebra::Matrix2::new(p[0], p[1], p[2], p[3]);
            let sv = m.singular_values();
            let expected = sv.max().ln();
            let got = ScaledMatrix2::from_plain(p).log_two_norm().unwrap();
            assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn determinant_examples() {
        assert_abs_diff_eq!(ScaledMatrix2::identity().log_abs_det().unwrap(), 0.0, epsilon = 1e-15);
        let d = ScaledMatrix2::diag(c(2.0, 0.0), c(2.0, 0.0));
        assert_abs_diff_eq!(d.log_abs_det().unwrap(), 4f64.ln(), epsilon = 1e-15);
        let t: f64 = 0.731;
        let rot = ScaledMatrix2::from_plain([c(t.cos(), 0.0), c(-t.sin(), 0.0), c(t.sin(), 0.0), c(t.cos(), 0.0)]);
        assert_abs_diff_eq!(rot.log_abs_det().unwrap(), 0.0, epsilon = 1e-15);
        let rank_one = ScaledMatrix2::from_plain([c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert_eq!(rank_one.log_abs_det(), Err(LabError::SingularMatrix));
    }

    proptest! {
        #[test]
        fn submultiplicative_and_det_multiplicative(
            a in proptest::array::uniform8(-3.0f64..3.0),
            b in proptest::array::uniform8(-3.0f64..3.0),
            ea in -3000i64..3000,
            eb in -3000i64..3000,
        ) {
            let ma = ScaledMatrix2::new([c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]), c(a[6], a[7])], ea);
            let mb = ScaledMatrix2::new([c(b[0], b[1]), c(b[2], b[3]), c(b[4], b[5]), c(b[6], b[7])], eb);
            prop_assume!(!ma.is_zero() && !mb.is_zero());
            let p = smat_mul(&ma, &mb);
            if !p.is_zero() {
                prop_assert!(p.log_two_norm().unwrap()
                    <= ma.log_two_norm().unwrap() + mb.log_two_norm().unwrap() + 1e-10);
            }
            if let (Ok(da), Ok(db)) = (ma.log_abs_det(), mb.log_abs_det()) {
                // only well-conditioned pairs: det not cancelled at mantissa level
                let cond_a = 2.0 * ma.log_two_norm().unwrap() - da;
                let cond_b = 2.0 * mb.log_two_norm().unwrap() - db;
                prop_assume!(cond_a < 5.0 && cond_b < 5.0);
                prop_assert!((p.log_abs_det().unwrap() - da - db).abs() < 1e-10);
            }
        }

        #[test]
        fn plain_round_trip(
            mags in proptest::array::uniform4(-3.0f64..3.0),
            phases in proptest::array::uniform4(0.0f64..6.283),
        ) {
            let entries: [Complex64; 4] =
                std::array::from_fn(|i| Complex64::from_polar(10f64.powf(mags[i]), phases[i]));
            let back = ScaledMatrix2::from_plain(entries).to_plain();
            for (x, y) in entries.iter().zip(back.iter()) {
                prop_assert!((x - y).norm() <= 1e-14 * x.norm());
            }
        }
    }
}
