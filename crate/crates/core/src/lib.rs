//! Global pseudo-differential operator calculus on SU(2).
//!
//! Functions on the group are handled through their noncommutative Fourier
//! coefficients, operators through their matrix symbols `σ(x, ξ)`, and the
//! calculus (differences, composition, adjoints, parametrices) acts on those
//! symbols directly.
//!
//! Conventions used throughout:
//! - `t^l(x)` is [`wigner::wigner_matrix`], a unitary homomorphism with
//!   `t^{1/2}(g) = g`; row index `0` corresponds to `m = -l`.
//! - `f^(l) = ∫ f(x) t^l(x)* dμ(x)` and `f(x) = Σ (2l+1) Tr(t^l(x) f^(l))`.
//! - `σ_A(x, l) = t^l(x)* (A t^l)(x)` and
//!   `Af(x) = Σ (2l+1) Tr(t^l(x) σ_A(x, l) f^(l))`.

pub mod calculus;
pub mod checks;
pub mod error;
pub mod expr;
pub mod fourier;
pub mod group;
pub mod io;
pub mod symbol;
pub mod wigner;

pub use error::{Error, Result};
pub use fourier::{CoefficientStack, GridFunction, QuadratureGrid};
pub use group::{AlgebraVector, EulerAngles, GroupElement};
pub use symbol::Symbol;
pub use wigner::HalfInteger;

/// Complex scalar used everywhere.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;

/// Largest entry modulus of a complex matrix.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
