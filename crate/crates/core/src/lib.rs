//! Numerical laboratory for quasi-periodic Jacobi operators
//!
//! ```text
//! (H(x,ω)φ)_n = −b(x+(n+1)ω)φ_{n+1} − conj(b(x+nω))φ_{n−1} + a(x+nω)φ_n
//! ```
//!
//! with trigonometric-polynomial coefficients `a`, `b`. The crate computes
//! Dirichlet determinants, regularized transfer matrices, Lyapunov
//! exponents, Jensen averages, zero counts, Avalanche-Principle residuals,
//! Wegner-type spectral counts and integrated densities of states, and
//! assembles them into an end-to-end Hölder-regularity gate.
//!
//! Module map:
//!
//! - [`coeffs`]: coefficient polynomials, torus zeros, `D(y)`, frequency arithmetic
//! - [`scalednum`]: extended-exponent complex scalars and 2×2 matrices
//! - [`operator`]: finite-volume matrices, Sturm counts, Green function diagonal
//! - [`transfer`]: monodromies, determinants, Birkhoff sums, exact identities
//! - [`lyapunov`]: finite-scale Lyapunov exponents and deviation profiles
//! - [`complexan`]: winding numbers, Jensen averages, adjusted integers
//! - [`avalanche`]: AP residuals, `W_{N,k}` ratios, the pointwise Wegner bound
//! - [`ids`]: integrated density of states, Hölder fits, the theorem gate

pub mod avalanche;
pub mod coeffs;
pub mod complexan;
pub mod error;
pub mod ids;
pub mod lyapunov;
pub mod operator;
pub mod scalednum;
pub mod stats;
pub mod transfer;

pub use coeffs::{Frequency, ModelSpec, TrigPoly};
pub use error::{LabError, Result};
pub use operator::IndexInterval;
pub use scalednum::{ScaledComplex, ScaledMatrix2};

pub use num_complex::Complex64;
