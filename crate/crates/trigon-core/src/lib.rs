//! Exact and numeric kernels for q-series identities of the triangular-number
//! generating function
//!
//! ```text
//! D(q) = prod_{n>=1} (1 - q^{2n}) / (1 - q^{2n-1}) = sum_{n>=0} q^{n(n+1)/2}
//! ```
//!
//! and for the signature-(m,m) indefinite theta functions whose special values
//! recover powers of `D`.
//!
//! The crate splits into an exact half and a numeric half:
//!
//! * [`qseries`] — truncated formal power series in `q^{1/16}` over exact
//!   rationals; the common currency of every identity check.
//! * [`arithfun`] — divisor sums, the odd-quotient divisor sum, Ramanujan tau,
//!   and the signed Eulerian-type polynomials.
//! * [`polyalgebra`] — multivariate polynomials in `x_1..x_m, y_1..y_m`, the
//!   spherical families `f1, f2, f3`, the Laplacian, and cone-directional
//!   derivatives.
//! * [`lattice_identities`] — both sides of the orthant-sum identities
//!   (Legendre, the weight-12 combination, the level-2 Eisenstein product,
//!   and the three spherical-weight lattice sums).
//! * [`denominator_identities`] — the sign-coupled full-lattice sums (gl, sl,
//!   spo families) and their change-of-variable bridges.
//! * [`indefinite_theta`] — floating-point evaluation of the theta functions
//!   and numeric checks of their modular transformation laws.
//!
//! Everything here is `no_std + alloc`; IO and reporting live in the
//! companion CLI crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;

pub mod arithfun;
pub mod denominator_identities;
pub mod indefinite_theta;
pub mod lattice_identities;
pub mod polyalgebra;
pub mod qseries;

pub use error::{Error, Result};
