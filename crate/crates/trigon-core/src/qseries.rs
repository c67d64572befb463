//! Truncated formal power series in `q^{1/16}` with exact rational coefficients.
//!
//! Every exponent that occurs in the identities handled by this crate —
//! `q^{1/16}`, `q^{m^2/4}`, `q^{1/2}`, plain integer powers — lies on the
//! grid `(1/16)Z`, so exponents are stored as plain integers counting units
//! of 1/16 (see [`UNITS_PER_Q`]).  A [`QSeries`] carries the truncation
//! `order` in the same units: its coefficients are exact for every exponent
//! up to `order` and unspecified beyond.
//!
//! Operations follow the "exact up to order, silent beyond" contract: sums
//! and products are exact up to the minimum of the input orders and never
//! fabricate terms past it, and [`qs_equal_upto`] refuses to compare past the
//! known range of either side.
//!
//! Main entry points: [`qs_add`], [`qs_sub`], [`qs_mul`], [`qs_pow`],
//! [`qs_inverse`], [`qs_product_family`], [`qs_equal_upto`], plus the
//! regrading helpers [`qs_shift`], [`qs_scale`], [`qs_scale_units`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::{Error, Result};

/// Number of exponent units per power of `q`: the grading denominator is
/// globally fixed at 16.
pub const UNITS_PER_Q: i64 = 16;

/// Truncated formal power series in `q^{1/16}`.
///
/// `terms` maps exponent units (possibly negative) to nonzero rational
/// coefficients; every stored exponent is at most `order`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSeries {
    order: i64,
    terms: BTreeMap<i64, BigRational>,
}

impl QSeries {
    /// The zero series at the given truncation order.
    pub fn zero(order: i64) -> Self {
        QSeries { order, terms: BTreeMap::new() }
    }

    /// The constant series `1` at the given truncation order.
    pub fn one(order: i64) -> Self {
        QSeries::monomial(0, BigRational::one(), order)
    }

    /// The single term `coeff * q^{units/16}`, dropped silently if it lies
    /// beyond the truncation order.
    pub fn monomial(units: i64, coeff: BigRational, order: i64) -> Self {
        let mut terms = BTreeMap::new();
        if units <= order && !coeff.is_zero() {
            terms.insert(units, coeff);
        }
        QSeries { order, terms }
    }

    /// Builds a series from `(exponent-units, coefficient)` pairs, summing
    /// duplicates, pruning zeros, and dropping terms beyond the order.
    pub fn from_terms<I>(order: i64, pairs: I) -> Self
    where
        I: IntoIterator<Item = (i64, BigRational)>,
    {
        let mut terms: BTreeMap<i64, BigRational> = BTreeMap::new();
        for (units, coeff) in pairs {
            if units > order || coeff.is_zero() {
                continue;
            }
            let entry = terms.entry(units).or_insert_with(BigRational::zero);
            *entry += coeff;
            if entry.is_zero() {
                terms.remove(&units);
            }
        }
        QSeries { order, terms }
    }

    /// Truncation order in 1/16-units.
    pub fn order(&self) -> i64 {
        self.order
    }

    /// Number of stored (nonzero) terms.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Iterates over `(exponent-units, coefficient)` in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigRational)> {
        self.terms.iter().map(|(&u, c)| (u, c))
    }

    /// The coefficient at `units`, which must not exceed the truncation order.
    pub fn coeff(&self, units: i64) -> BigRational {
        assert!(
            units <= self.order,
            "coefficient query at {units} units exceeds truncation order {}",
            self.order
        );
        self.terms.get(&units).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Lowest-order term, if any.
    pub fn leading(&self) -> Option<(i64, &BigRational)> {
        self.terms.iter().next().map(|(&u, c)| (u, c))
    }

    /// True if no term is stored (the series is `O(q^{(order+1)/16})`).
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The same series re-truncated at `order` (which may be lower, dropping
    /// terms, or higher, in which case the extra range is claimed exact only
    /// if the caller knows it to be).
    pub fn truncated(&self, order: i64) -> QSeries {
        let terms = self
            .terms
            .iter()
            .filter(|(&u, _)| u <= order)
            .map(|(&u, c)| (u, c.clone()))
            .collect();
        QSeries { order, terms }
    }
}

impl core::fmt::Display for QSeries {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "O(q^{{{}/16}})", self.order + 1);
        }
        for (i, (&u, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if u == 0 {
                write!(f, "{c}")?;
            } else if u % UNITS_PER_Q == 0 {
                write!(f, "{c}*q^{}", u / UNITS_PER_Q)?;
            } else {
                write!(f, "{c}*q^{{{u}/16}}")?;
            }
        }
        write!(f, " + O(q^{{{}/16}})", self.order + 1)
    }
}

/// First disagreeing coefficient reported by [`qs_equal_upto`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    /// Exponent in 1/16-units at which the two series first differ.
    pub exponent_units: i64,
    /// Coefficient of the first series there.
    pub lhs: BigRational,
    /// Coefficient of the second series there.
    pub rhs: BigRational,
}

/// One factor family `(1 + sign * q^{(stride*n + offset)/16})^exponent`,
/// `n = 1, 2, ...`, of an infinite product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductFactor {
    /// Exponent step per `n`, in 1/16-units; must be positive.
    pub stride: i64,
    /// Constant exponent offset, in 1/16-units.
    pub offset: i64,
    /// `+1` or `-1`.
    pub sign: i8,
    /// Integer power of the factor (negative for denominators).
    pub exponent: i64,
}

impl ProductFactor {
    /// Convenience constructor; `sign` must be `+1` or `-1`.
    pub fn new(stride: i64, offset: i64, sign: i8, exponent: i64) -> Self {
        assert!(sign == 1 || sign == -1, "sign must be +1 or -1");
        ProductFactor { stride, offset, sign, exponent }
    }
}

/// Coefficientwise sum; the result is exact up to `min(a.order, b.order)`.
pub fn qs_add(a: &QSeries, b: &QSeries) -> QSeries {
    let order = a.order.min(b.order);
    let pairs = a
        .terms
        .iter()
        .chain(b.terms.iter())
        .map(|(&u, c)| (u, c.clone()));
    QSeries::from_terms(order, pairs)
}

/// Coefficientwise difference `a - b`.
pub fn qs_sub(a: &QSeries, b: &QSeries) -> QSeries {
    let order = a.order.min(b.order);
    let pairs = a
        .terms
        .iter()
        .map(|(&u, c)| (u, c.clone()))
        .chain(b.terms.iter().map(|(&u, c)| (u, -c.clone())));
    QSeries::from_terms(order, pairs)
}

/// Multiplies by the exact scalar `s`.
pub fn qs_scale(a: &QSeries, s: &BigRational) -> QSeries {
    if s.is_zero() {
        return QSeries::zero(a.order);
    }
    let terms = a.terms.iter().map(|(&u, c)| (u, c * s)).collect();
    QSeries { order: a.order, terms }
}

/// Multiplies by the exact monomial `q^{units/16}`; exactness shifts with the
/// terms, so the order moves by the same amount.
pub fn qs_shift(a: &QSeries, units: i64) -> QSeries {
    let terms = a.terms.iter().map(|(&u, c)| (u + units, c.clone())).collect();
    QSeries { order: a.order + units, terms }
}

/// Regrades exponents by the exact factor `num/den` (e.g. `q -> q^{1/2}`
/// halves every exponent: `num = 1, den = 2`).  Fails if any stored exponent
/// would leave the integer unit grid.
pub fn qs_scale_units(a: &QSeries, num: i64, den: i64) -> Result<QSeries> {
    assert!(num > 0 && den > 0, "regrading factor must be positive");
    let mut terms = BTreeMap::new();
    for (&u, c) in &a.terms {
        let scaled = u * num;
        if scaled % den != 0 {
            return Err(Error::ExponentNotDivisible { exponent_units: u, divisor: den });
        }
        terms.insert(scaled / den, c.clone());
    }
    Ok(QSeries { order: a.order * num / den, terms })
}

/// Cauchy product, exact up to `min(a.order + min_exp(b), b.order + min_exp(a))`
/// where `min_exp` is the lowest retained exponent.
pub fn qs_mul(a: &QSeries, b: &QSeries) -> QSeries {
    // Unknown terms of `a` (beyond its order) pair with the lowest known
    // exponent of `b` and vice versa; the product is exact strictly below
    // the smaller of those two frontiers.  An empty window's unknown tail
    // starts right after its order.
    let a_min = a.terms.keys().next().copied().unwrap_or(a.order + 1);
    let b_min = b.terms.keys().next().copied().unwrap_or(b.order + 1);
    let order = (a.order + b_min).min(b.order + a_min);
    let mut acc: BTreeMap<i64, BigRational> = BTreeMap::new();
    for (&ua, ca) in &a.terms {
        for (&ub, cb) in &b.terms {
            let u = ua + ub;
            if u > order {
                break;
            }
            let entry = acc.entry(u).or_insert_with(BigRational::zero);
            *entry += ca * cb;
        }
    }
    acc.retain(|_, c| !c.is_zero());
    QSeries { order, terms: acc }
}

/// `a^k` by repeated squaring; `a^0` is `1` at `a`'s order.
pub fn qs_pow(a: &QSeries, k: u32) -> QSeries {
    let mut result = QSeries::one(a.order);
    let mut base = a.clone();
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            result = qs_mul(&result, &base);
        }
        k >>= 1;
        if k > 0 {
            base = qs_mul(&base, &base);
        }
    }
    result
}

/// Laurent inverse: factors out the lowest term `c0 * q^{e0/16}` and inverts
/// the remaining unit series by the coefficient recurrence.  The result is
/// exact up to `a.order - 2*e0`, so that `a * inverse(a) = 1` holds up to the
/// common order.
pub fn qs_inverse(a: &QSeries) -> Result<QSeries> {
    let (e0, c0) = match a.leading() {
        Some((u, c)) => (u, c.clone()),
        None => return Err(Error::ZeroSeries),
    };
    let n = a.order - e0;
    // Unit part u = a * q^{-e0} / c0 = 1 + x with x of positive valuation,
    // exact up to n.  Invert by b_0 = 1, b_e = -sum_{0<d<=e} x_d b_{e-d}.
    let mut x: Vec<(i64, BigRational)> = Vec::new();
    for (&u, c) in &a.terms {
        if u > e0 {
            x.push((u - e0, c / &c0));
        }
    }
    let len = usize::try_from(n).unwrap_or(0) + 1;
    let mut b: Vec<BigRational> = Vec::with_capacity(len);
    b.push(BigRational::one());
    for e in 1..=n {
        let mut acc = BigRational::zero();
        for (d, xd) in &x {
            if *d > e {
                break;
            }
            acc += xd * &b[(e - d) as usize];
        }
        b.push(-acc);
    }
    let pairs = b
        .into_iter()
        .enumerate()
        .map(|(e, c)| (e as i64 - e0, c / &c0));
    Ok(QSeries::from_terms(n - e0, pairs))
}

/// Expands `prod over factor families` of
/// `(1 + sign * q^{(stride*n + offset)/16})^exponent` for `n = 1, 2, ...`,
/// truncated at `order`.  Each stride must be positive, so only finitely many
/// factors differ from `1` below the truncation.
pub fn qs_product_family(factors: &[ProductFactor], order: i64) -> Result<QSeries> {
    let mut acc = QSeries::one(order);
    for f in factors {
        if f.stride <= 0 {
            return Err(Error::NonPositiveStride { stride: f.stride });
        }
        assert!(f.sign == 1 || f.sign == -1, "sign must be +1 or -1");
        let mut n = 1;
        loop {
            let e = f.stride * n + f.offset;
            if e > order {
                break;
            }
            let factor = binomial_factor(e, i64::from(f.sign), f.exponent, order)?;
            acc = qs_mul(&acc, &factor);
            n += 1;
        }
    }
    Ok(acc)
}

/// `(1 + sign * q^{e/16})^k` truncated at `order`, for any integer `k` and
/// any exponent `e` (negative `e` is rewritten through the unit
/// `1 + s q^e = s q^e (1 + s q^{-e})` so the binomial series applies).
fn binomial_factor(e: i64, sign: i64, k: i64, order: i64) -> Result<QSeries> {
    if e == 0 {
        // Constant factor (1 + sign)^k.
        return if sign == 1 {
            let two = BigRational::from_integer(BigInt::from(2));
            let c = if k >= 0 {
                num_traits::pow::pow(two, k as usize)
            } else {
                num_traits::pow::pow(two, (-k) as usize).recip()
            };
            Ok(QSeries::monomial(0, c, order))
        } else if k > 0 {
            Ok(QSeries::zero(order))
        } else if k == 0 {
            Ok(QSeries::one(order))
        } else {
            Err(Error::ZeroFactorInverse)
        };
    }
    if e < 0 {
        let inner = binomial_series(-e, sign, k, order - k * e)?;
        let shifted = qs_shift(&inner, k * e);
        let scaled = if sign == -1 && k.rem_euclid(2) == 1 {
            qs_scale(&shifted, &-BigRational::one())
        } else {
            shifted
        };
        return Ok(scaled.truncated(order));
    }
    binomial_series(e, sign, k, order)
}

/// Generalized binomial series `sum_j C(k, j) sign^j q^{je/16}` for `e > 0`.
fn binomial_series(e: i64, sign: i64, k: i64, order: i64) -> Result<QSeries> {
    debug_assert!(e > 0);
    let mut pairs: Vec<(i64, BigRational)> = Vec::new();
    let mut c = BigRational::one();
    let mut j: i64 = 0;
    loop {
        let exp = j * e;
        if exp > order || (k >= 0 && j > k) {
            break;
        }
        let coeff = if sign == -1 && j % 2 == 1 { -c.clone() } else { c.clone() };
        pairs.push((exp, coeff));
        c = c * BigRational::from_integer(BigInt::from(k - j))
            / BigRational::from_integer(BigInt::from(j + 1));
        j += 1;
    }
    Ok(QSeries::from_terms(order, pairs))
}

/// Compares coefficients up to `upto` units (inclusive).  Returns
/// `(true, None)` on agreement, or `(false, Some(first mismatch))`.  Refuses
/// to compare past the truncation order of either input.
pub fn qs_equal_upto(a: &QSeries, b: &QSeries, upto: i64) -> Result<(bool, Option<Mismatch>)> {
    let available = a.order.min(b.order);
    if upto > available {
        return Err(Error::OrderBeyondTruncation { requested: upto, available });
    }
    let mut keys: Vec<i64> = a
        .terms
        .keys()
        .chain(b.terms.keys())
        .copied()
        .filter(|&u| u <= upto)
        .collect();
    keys.sort_unstable();
    keys.dedup();
    for u in keys {
        let ca = a.terms.get(&u).cloned().unwrap_or_else(BigRational::zero);
        let cb = b.terms.get(&u).cloned().unwrap_or_else(BigRational::zero);
        if ca != cb {
            return Ok((false, Some(Mismatch { exponent_units: u, lhs: ca, rhs: cb })));
        }
    }
    Ok((true, None))
}

/// Evaluates the truncated series at a real point `0 < q < 1`, summing the
/// stored terms in double precision.
pub fn qs_eval_f64(a: &QSeries, q: f64) -> f64 {
    let mut acc = 0.0;
    for (&u, c) in &a.terms {
        acc += rational_to_f64(c) * libm::pow(q, u as f64 / UNITS_PER_Q as f64);
    }
    acc
}

/// Exact rational to nearest double.
pub fn rational_to_f64(c: &BigRational) -> f64 {
    let numer = num_traits::ToPrimitive::to_f64(c.numer()).unwrap_or(f64::INFINITY);
    let denom = num_traits::ToPrimitive::to_f64(c.denom()).unwrap_or(f64::INFINITY);
    numer / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qr(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn binomial_factor_negative_power_is_geometric() {
        // (1 - q)^{-1} = 1 + q + q^2 + ...
        let s = binomial_factor(16, -1, -1, 64).unwrap();
        for u in [0, 16, 32, 48, 64] {
            assert_eq!(s.coeff(u), qr(1));
        }
    }

    #[test]
    fn binomial_factor_negative_exponent_unit() {
        // (1 + q^{-1/16})^2 = q^{-2/16} (q^{1/16} + 1)^2 = q^{-2/16} + 2 q^{-1/16} + 1.
        let s = binomial_factor(-1, 1, 2, 32).unwrap();
        assert_eq!(s.coeff(-2), qr(1));
        assert_eq!(s.coeff(-1), qr(2));
        assert_eq!(s.coeff(0), qr(1));
        assert!(s.coeff(1).is_zero());
    }

    #[test]
    fn inverse_of_shifted_unit() {
        // inverse(q^{1/16}) = q^{-1/16}.
        let a = QSeries::monomial(1, qr(1), 32);
        let inv = qs_inverse(&a).unwrap();
        assert_eq!(inv.coeff(-1), qr(1));
        assert_eq!(inv.term_count(), 1);
    }
}
