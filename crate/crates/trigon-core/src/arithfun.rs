//! Arithmetic functions and the signed Eulerian-type polynomials.
//!
//! Covers the number-theoretic inputs of the weight-12 identity and the
//! level-2 Eisenstein series: the divisor sums `sigma_k(n)`, the odd-quotient
//! divisor sum `sigma_k^{(2)}(n)` (divisors whose cofactor is odd), the
//! Ramanujan tau function (through the 24th-power eta-type product), and the
//! polynomials `E_k(x)` defined by
//!
//! ```text
//! sum_{n>=0} (-1)^n n^k x^n = E_k(x) / (1 + x)^{k+1}.
//! ```

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::qseries::{qs_product_family, ProductFactor, UNITS_PER_Q};
use crate::{Error, Result};

/// Integer polynomial with `coeffs[i]` the coefficient of `x^i`.
///
/// The leading coefficient is nonzero unless the polynomial is zero
/// (represented by an empty coefficient list).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    /// Builds a polynomial from low-to-high coefficients, trimming trailing zeros.
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    /// Coefficient list, low degree first; empty for the zero polynomial.
    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Coefficient of `x^i` (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_else(BigInt::zero)
    }
}

/// Divisor power sum `sigma_k(n) = sum_{d | n} d^k`.
pub fn sigma(k: u32, n: i64) -> Result<BigInt> {
    if n <= 0 {
        return Err(Error::NonPositiveArgument { name: "n", value: n });
    }
    let mut total = BigInt::zero();
    for d in divisors(n) {
        total += BigInt::from(d).pow(k);
    }
    Ok(total)
}

/// Odd-quotient divisor sum `sigma_k^{(2)}(n)`: the sum of `d^k` over the
/// divisors `d` of `n` whose cofactor `n/d` is odd.
pub fn sigma_odd_quotient(k: u32, n: i64) -> Result<BigInt> {
    if n <= 0 {
        return Err(Error::NonPositiveArgument { name: "n", value: n });
    }
    let mut total = BigInt::zero();
    for d in divisors(n) {
        if (n / d) % 2 == 1 {
            total += BigInt::from(d).pow(k);
        }
    }
    Ok(total)
}

/// All positive divisors of `n > 0`, ascending.
fn divisors(n: i64) -> Vec<i64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    large.reverse();
    small.extend(large);
    small
}

/// Ramanujan tau: the coefficient of `q^n` in `q * prod_{m>=1} (1 - q^m)^24`,
/// expanded through the product-family machinery.
pub fn ramanujan_tau(n: i64) -> Result<BigInt> {
    if n <= 0 {
        return Err(Error::NonPositiveArgument { name: "n", value: n });
    }
    let series = tau_series(n)?;
    let c = series.coeff(n * UNITS_PER_Q);
    debug_assert!(c.is_integer());
    Ok(c.to_integer())
}

/// The generating series `sum tau(n) q^n` exact through `q^upto`.
pub fn tau_series(upto: i64) -> Result<crate::qseries::QSeries> {
    let eta24 = qs_product_family(
        &[ProductFactor::new(UNITS_PER_Q, 0, -1, 24)],
        upto * UNITS_PER_Q,
    )?;
    Ok(crate::qseries::qs_shift(&eta24, UNITS_PER_Q).truncated(upto * UNITS_PER_Q))
}

/// The signed Eulerian-type polynomial `E_k`, computed by exact truncated
/// division: multiply the truncated series `sum (-1)^n n^k x^n` by
/// `(1 + x)^{k+1}` and read off the stabilized low-order coefficients.
pub fn eulerian_sign_poly(k: u32) -> IntPoly {
    // Degree of E_k is at most k, so truncating at N = k + 2 terms leaves the
    // first N - k coefficients of the product exact and the rest garbage.
    let k = k as usize;
    let n_terms = 2 * k + 4;
    let mut series: Vec<BigInt> = Vec::with_capacity(n_terms);
    for n in 0..n_terms {
        // 0^0 = 1 convention matches the geometric-series case k = 0.
        let power = if k == 0 { BigInt::one() } else { BigInt::from(n).pow(k as u32) };
        series.push(if n % 2 == 0 { power } else { -power });
    }
    let mut binom: Vec<BigInt> = vec![BigInt::zero(); k + 2];
    binom[0] = BigInt::one();
    for _ in 0..(k + 1) {
        for i in (1..binom.len()).rev() {
            let prev = binom[i - 1].clone();
            binom[i] += prev;
        }
    }
    let keep = n_terms - k;
    let mut product = vec![BigInt::zero(); keep];
    for (i, b) in binom.iter().enumerate() {
        for (j, s) in series.iter().enumerate() {
            if i + j < keep {
                product[i + j] += b * s;
            }
        }
    }
    // The product is the polynomial E_k plus terms of degree >= keep; since
    // deg E_k <= k < keep, the kept window is all of E_k.
    IntPoly::new(product)
}
