//! Exact q-series for both sides of the orthant-sum identities.
//!
//! Builds the triangular-number series and its theta normalization, the
//! level-2 Eisenstein series, the classical weight-2 and weight-12 right-hand
//! sides, and the three spherical-weight lattice sums
//!
//! ```text
//! (4^m (2m)!/prod (2j)!^2) * sum f1(x) q^{2 sum x_j y_j}   x, y half-integer > 0
//! (4^m       /prod (2j)!^2) * sum f2(x) q^{2 sum x_j y_j}   x integer >= 0, y half-integer > 0
//! (2^m (2m)!/prod (2j)!^2) * sum f3(x,y) q^{2 sum x_j y_j}  x, y half-integer > 0
//! ```
//!
//! Half-integers are carried as odd integers over 2, so every exponent is an
//! exact integer count of 1/16-units.  Per-coordinate enumeration caps follow
//! from positivity of each `2 x_j y_j`, with running partial-sum pruning; no
//! stabilization heuristic is needed for these orthant sums.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::arithfun::{sigma, sigma_odd_quotient, tau_series};
use crate::polyalgebra::{mp_eval, spherical_f, MPoly, SphericalFamily};
use crate::qseries::{
    qs_mul, qs_pow, qs_scale, qs_scale_units, qs_shift, qs_sub, QSeries, UNITS_PER_Q,
};
use crate::{Error, Result};

/// Names of the fixed-`m` and spherical-weight identity families handled here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityName {
    /// `q D(q^2)^4 = sum sigma_1(2n+1) q^{2n+1}`.
    Legendre,
    /// `q^3 D(q)^24` as the weight-12 divisor/tau combination.
    Orw12,
    /// `q^3 D(q)^24` as the level-2 Eisenstein product combination.
    EisenM2,
    /// `q^{m^2/2} D(q)^{4m^2}` as the f1-weighted half-integer orthant sum.
    ZagierFirst,
    /// `q^{m(m+1)/2} D(q)^{4m(m+1)}` as the f2-weighted mixed orthant sum.
    ZagierSecond,
    /// `q^{m^2/2} D(q)^{4m^2}` as the f3-weighted half-integer orthant sum.
    DmmThird,
}

/// One concrete identity check: a family name, a rank, and a truncation.
///
/// The first three families are single identities; their rank is forced to 1
/// at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityInstance {
    /// Which identity family.
    pub name: IdentityName,
    /// Number of coordinate pairs (1 for the fixed identities).
    pub m: usize,
    /// Truncation order in 1/16-units.
    pub order_units: i64,
}

impl IdentityInstance {
    /// Builds an instance, forcing `m = 1` for the fixed-rank families.
    pub fn new(name: IdentityName, m: usize, order_units: i64) -> Result<Self> {
        let m = match name {
            IdentityName::Legendre | IdentityName::Orw12 | IdentityName::EisenM2 => 1,
            _ => m,
        };
        if m == 0 {
            return Err(Error::NonPositiveArgument { name: "m", value: 0 });
        }
        Ok(IdentityInstance { name, m, order_units })
    }

    /// Builds the two sides of the identity as series exact to `order_units`.
    pub fn build_sides(&self) -> Result<(QSeries, QSeries)> {
        let n = self.order_units;
        let m = self.m;
        match self.name {
            IdentityName::Legendre => Ok((legendre_lhs(n), legendre_rhs(n))),
            IdentityName::Orw12 => {
                let lhs = qs_shift(&delta_power(24, (n - 48).max(0)), 48);
                Ok((lhs, orw12_rhs(n)?))
            }
            IdentityName::EisenM2 => {
                let lhs = qs_shift(&delta_power(24, (n - 48).max(0)), 48);
                Ok((lhs, eisen_m2_rhs(n)?))
            }
            IdentityName::ZagierFirst => {
                let shift = 8 * (m * m) as i64;
                let lhs = qs_shift(&delta_power((4 * m * m) as u32, (n - shift).max(0)), shift);
                Ok((lhs, rhs_zagier_first(m, n)?))
            }
            IdentityName::ZagierSecond => {
                let shift = 8 * (m * (m + 1)) as i64;
                let lhs =
                    qs_shift(&delta_power((4 * m * (m + 1)) as u32, (n - shift).max(0)), shift);
                Ok((lhs, rhs_zagier_second(m, n)?))
            }
            IdentityName::DmmThird => {
                let shift = 8 * (m * m) as i64;
                let lhs = qs_shift(&delta_power((4 * m * m) as u32, (n - shift).max(0)), shift);
                Ok((lhs, rhs_dmm_third(m, n)?))
            }
        }
    }
}

/// The triangular-number generating function `sum q^{n(n+1)/2}`, truncated.
pub fn triangle_series(order_units: i64) -> QSeries {
    let mut pairs = Vec::new();
    let mut n: i64 = 0;
    loop {
        let t = n * (n + 1) / 2 * UNITS_PER_Q;
        if t > order_units {
            break;
        }
        pairs.push((t, BigRational::one()));
        n += 1;
    }
    QSeries::from_terms(order_units, pairs)
}

/// `D(q)^p` truncated at `order_units`.
pub fn delta_power(p: u32, order_units: i64) -> QSeries {
    qs_pow(&triangle_series(order_units), p)
}

/// The theta normalization `q^{1/16} D(q^{1/2})`: the half-integer-square
/// series `sum_{j>=0} q^{(2j+1)^2/16}` with unit coefficients.
pub fn theta_triangle_series(order_units: i64) -> QSeries {
    let mut pairs = Vec::new();
    let mut j: i64 = 0;
    loop {
        let u = (2 * j + 1) * (2 * j + 1);
        if u > order_units {
            break;
        }
        pairs.push((u, BigRational::one()));
        j += 1;
    }
    QSeries::from_terms(order_units, pairs)
}

/// `(q^{1/16} D(q^{1/2}))^p` truncated at `order_units`, built by regrading
/// the triangular series.
pub fn theta_delta_power(p: u32, order_units: i64) -> QSeries {
    let half = qs_scale_units(&triangle_series(2 * order_units.max(0)), 1, 2)
        .expect("triangular exponents are even in 1/32 grading");
    qs_shift(&qs_pow(&half.truncated(order_units), p), p as i64).truncated(order_units)
}

/// Level-2 Eisenstein-type series `sum_{n>=1} sigma_{k-1}^{(2)}(n) q^n`.
///
/// `k` must be at least 2 (the identities use even `k`).  Debug builds
/// recheck the coefficients against the defining double sum
/// `sum x^{k-1} q^{2xy}` over `x >= 1` integer, `y` positive half-integer.
pub fn eisenstein2(k: u32, order_units: i64) -> Result<QSeries> {
    if k < 2 {
        return Err(Error::NonPositiveArgument { name: "k - 1", value: i64::from(k) - 1 });
    }
    let nq = order_units.div_euclid(UNITS_PER_Q);
    let mut pairs = Vec::new();
    for n in 1..=nq {
        let c = sigma_odd_quotient(k - 1, n)?;
        pairs.push((n * UNITS_PER_Q, BigRational::from_integer(c)));
    }
    let series = QSeries::from_terms(order_units, pairs);
    #[cfg(debug_assertions)]
    if nq <= 40 {
        let mut double: BTreeMap<i64, BigRational> = BTreeMap::new();
        for x in 1..=nq {
            for w in (1..).step_by(2) {
                let e = x * w;
                if e > nq {
                    break;
                }
                let c = BigRational::from_integer(BigInt::from(x).pow(k - 1));
                *double.entry(e * UNITS_PER_Q).or_insert_with(BigRational::zero) += c;
            }
        }
        let alt = QSeries::from_terms(order_units, double);
        debug_assert_eq!(series, alt, "divisor-sum and double-sum forms disagree");
    }
    Ok(series)
}

/// Right-hand side of the weight-2 identity: `sum sigma_1(2n+1) q^{2n+1}`.
pub fn legendre_rhs(order_units: i64) -> QSeries {
    let nq = order_units.div_euclid(UNITS_PER_Q);
    let mut pairs = Vec::new();
    let mut n = 1;
    while n <= nq {
        let c = sigma(1, n).expect("n positive");
        pairs.push((n * UNITS_PER_Q, BigRational::from_integer(c)));
        n += 2;
    }
    QSeries::from_terms(order_units, pairs)
}

/// Left-hand side of the weight-2 identity: `q D(q^2)^4`.
pub fn legendre_lhs(order_units: i64) -> QSeries {
    let doubled = qs_scale_units(&triangle_series(order_units.max(0)), 2, 1)
        .expect("integral regrading");
    qs_shift(&qs_pow(&doubled.truncated(order_units), 4), UNITS_PER_Q).truncated(order_units)
}

/// Right-hand side of the weight-12 identity:
/// `(1/176896) sum_{n>=3} (sigma_11^{(2)}(n) - tau(n) - 2072 tau(n/2)) q^n`.
pub fn orw12_rhs(order_units: i64) -> Result<QSeries> {
    let nq = order_units.div_euclid(UNITS_PER_Q);
    let prefactor = BigRational::new(BigInt::one(), BigInt::from(176896));
    if nq < 3 {
        return Ok(QSeries::zero(order_units));
    }
    let tau = tau_series(nq)?;
    let mut pairs = Vec::new();
    for n in 3..=nq {
        let mut bracket = BigRational::from_integer(sigma_odd_quotient(11, n)?);
        bracket -= tau.coeff(n * UNITS_PER_Q);
        if n % 2 == 0 {
            bracket -= BigRational::from_integer(BigInt::from(2072)) * tau.coeff(n / 2 * UNITS_PER_Q);
        }
        pairs.push((n * UNITS_PER_Q, bracket * &prefactor));
    }
    Ok(QSeries::from_terms(order_units, pairs))
}

/// Right-hand side of the Eisenstein-product identity:
/// `(1/72) (E_4^{(2)} E_8^{(2)} - (E_6^{(2)})^2)`.
pub fn eisen_m2_rhs(order_units: i64) -> Result<QSeries> {
    let e4 = eisenstein2(4, order_units)?;
    let e6 = eisenstein2(6, order_units)?;
    let e8 = eisenstein2(8, order_units)?;
    let combo = qs_sub(&qs_mul(&e4, &e8), &qs_mul(&e6, &e6));
    Ok(qs_scale(&combo, &BigRational::new(BigInt::one(), BigInt::from(72))))
}

fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}

fn even_factorial_square_product(m: u64) -> BigInt {
    // prod_{j=1}^m ((2j)!)^2
    let mut acc = BigInt::one();
    for j in 1..=m {
        let f = factorial(2 * j);
        acc *= &f * &f;
    }
    acc
}

/// The f1-weighted orthant sum over positive half-integers `x_j, y_j`,
/// with prefactor `4^m (2m)! / prod (2j)!^2`.
pub fn rhs_zagier_first(m: usize, order_units: i64) -> Result<QSeries> {
    let f = spherical_f(SphericalFamily::F1, m)?;
    let pref = BigRational::new(
        BigInt::from(4).pow(m as u32) * factorial(2 * m as u64),
        even_factorial_square_product(m as u64),
    );
    Ok(half_half_orthant_sum(&f, m, order_units, &pref))
}

/// The f2-weighted orthant sum over integer `x_j >= 0` (terms with
/// `x_j = 0` vanish under the `x_j^3` weight) and positive half-integer
/// `y_j`, with prefactor `4^m / prod (2j)!^2`.
pub fn rhs_zagier_second(m: usize, order_units: i64) -> Result<QSeries> {
    let f = spherical_f(SphericalFamily::F2, m)?;
    if m == 0 {
        return Err(Error::NonPositiveArgument { name: "m", value: 0 });
    }
    let pref = BigRational::new(
        BigInt::from(4).pow(m as u32),
        even_factorial_square_product(m as u64),
    );
    let mut acc: BTreeMap<i64, BigRational> = BTreeMap::new();
    let mut xs: Vec<i64> = Vec::new();
    let mut ws: Vec<i64> = Vec::new();
    int_half_recurse(&f, m, order_units, &mut xs, &mut ws, &mut acc);
    let scaled = acc.into_iter().map(|(u, c)| (u, c * &pref));
    Ok(QSeries::from_terms(order_units, scaled))
}

/// The f3-weighted orthant sum over positive half-integers, with prefactor
/// `2^m (2m)! / prod (2j)!^2`.
pub fn rhs_dmm_third(m: usize, order_units: i64) -> Result<QSeries> {
    let f = spherical_f(SphericalFamily::F3, m)?;
    let pref = BigRational::new(
        BigInt::from(2).pow(m as u32) * factorial(2 * m as u64),
        even_factorial_square_product(m as u64),
    );
    Ok(half_half_orthant_sum(&f, m, order_units, &pref))
}

/// Shared enumerator for the two half-integer-orthant sums: coordinates are
/// carried as odd positive integers `u_j = 2 x_j`, `w_j = 2 y_j`, the slot
/// exponent is `8 u_j w_j` units, and slots are pruned against the remaining
/// budget.
fn half_half_orthant_sum(f: &MPoly, m: usize, order_units: i64, pref: &BigRational) -> QSeries {
    let mut acc: BTreeMap<i64, BigRational> = BTreeMap::new();
    let mut us: Vec<i64> = Vec::new();
    let mut ws: Vec<i64> = Vec::new();
    half_half_recurse(f, m, order_units, &mut us, &mut ws, &mut acc);
    let scaled = acc.into_iter().map(|(u, c)| (u, c * pref));
    QSeries::from_terms(order_units, scaled)
}

fn half_half_recurse(
    f: &MPoly,
    m: usize,
    budget: i64,
    us: &mut Vec<i64>,
    ws: &mut Vec<i64>,
    acc: &mut BTreeMap<i64, BigRational>,
) {
    if us.len() == m {
        let point = half_point(us, ws);
        let w = mp_eval(f, &point).expect("point length matches");
        if !w.is_zero() {
            let spent: i64 = us.iter().zip(ws.iter()).map(|(&u, &w)| 8 * u * w).sum();
            *acc.entry(spent).or_insert_with(BigRational::zero) += w;
        }
        return;
    }
    let mut u = 1;
    while 8 * u <= budget {
        let mut w = 1;
        while 8 * u * w <= budget {
            us.push(u);
            ws.push(w);
            half_half_recurse(f, m, budget - 8 * u * w, us, ws, acc);
            ws.pop();
            us.pop();
            w += 2;
        }
        u += 2;
    }
}

fn int_half_recurse(
    f: &MPoly,
    m: usize,
    budget: i64,
    xs: &mut Vec<i64>,
    ws: &mut Vec<i64>,
    acc: &mut BTreeMap<i64, BigRational>,
) {
    if xs.len() == m {
        let point: Vec<BigRational> = xs
            .iter()
            .map(|&x| BigRational::from_integer(BigInt::from(x)))
            .chain(ws.iter().map(|&w| BigRational::new(BigInt::from(w), BigInt::from(2))))
            .collect();
        let w = mp_eval(f, &point).expect("point length matches");
        if !w.is_zero() {
            let spent: i64 = xs.iter().zip(ws.iter()).map(|(&x, &w)| 16 * x * w).sum();
            *acc.entry(spent).or_insert_with(BigRational::zero) += w;
        }
        return;
    }
    let mut x = 1;
    while 16 * x <= budget {
        let mut w = 1;
        while 16 * x * w <= budget {
            xs.push(x);
            ws.push(w);
            int_half_recurse(f, m, budget - 16 * x * w, xs, ws, acc);
            ws.pop();
            xs.pop();
            w += 2;
        }
        x += 1;
    }
}

fn half_point(us: &[i64], ws: &[i64]) -> Vec<BigRational> {
    us.iter()
        .chain(ws.iter())
        .map(|&v| BigRational::new(BigInt::from(v), BigInt::from(2)))
        .collect()
}
