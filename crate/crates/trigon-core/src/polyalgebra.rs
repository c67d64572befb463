//! Exact multivariate polynomial algebra in `x_1..x_m, y_1..y_m`.
//!
//! Provides the spherical weight polynomials
//!
//! ```text
//! f1 = prod_j x_j              * prod_{i<j} (x_i^2 - x_j^2)^2
//! f2 = prod_j x_j^3            * prod_{i<j} (x_i^2 - x_j^2)^2
//! f3 = prod_j (x_j + y_j)      * prod_{i<j} ((x_i-y_i)^2 - (x_j-y_j)^2)
//!                                          * ((x_i+y_i)^2 - (x_j+y_j)^2)
//! ```
//!
//! together with the signature-(m,m) Laplacian `2 sum_j d^2/dx_j dy_j`, the
//! cone-directional derivatives used by the theta kernel, and exact/floating
//! evaluation.  Cone 2-vectors are classified at construction into the
//! negative cone (`x y < 0, y > 0`), the cusp set (coprime integer isotropic
//! vectors with `c1 < c2`), or neither.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::qseries::rational_to_f64;
use crate::{Error, Result};

/// Exact polynomial in the `2m` variables `x_1..x_m, y_1..y_m`.
///
/// Exponent vectors have length `2m`: entries `0..m` are the `x` powers,
/// entries `m..2m` the `y` powers.  No zero coefficient is stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MPoly {
    m: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl MPoly {
    /// The zero polynomial on `m` coordinate pairs.
    pub fn zero(m: usize) -> Self {
        MPoly { m, terms: BTreeMap::new() }
    }

    /// A constant polynomial.
    pub fn constant(m: usize, c: BigRational) -> Self {
        let mut p = MPoly::zero(m);
        if !c.is_zero() {
            p.terms.insert(vec![0; 2 * m], c);
        }
        p
    }

    /// A single monomial; `exps` must have length `2m`.
    pub fn monomial(m: usize, exps: Vec<u32>, c: BigRational) -> Self {
        assert_eq!(exps.len(), 2 * m, "exponent vector must have length 2m");
        let mut p = MPoly::zero(m);
        if !c.is_zero() {
            p.terms.insert(exps, c);
        }
        p
    }

    /// The variable `x_j` (1-based `j`).
    pub fn var_x(m: usize, j: usize) -> Result<Self> {
        if j == 0 || j > m {
            return Err(Error::VarIndexOutOfRange { index: j, vars: m });
        }
        let mut exps = vec![0; 2 * m];
        exps[j - 1] = 1;
        Ok(MPoly::monomial(m, exps, BigRational::one()))
    }

    /// The variable `y_j` (1-based `j`).
    pub fn var_y(m: usize, j: usize) -> Result<Self> {
        if j == 0 || j > m {
            return Err(Error::VarIndexOutOfRange { index: j, vars: m });
        }
        let mut exps = vec![0; 2 * m];
        exps[m + j - 1] = 1;
        Ok(MPoly::monomial(m, exps, BigRational::one()))
    }

    /// Number of coordinate pairs.
    pub fn m(&self) -> usize {
        self.m
    }

    /// True when no term is stored.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of stored monomials.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Iterates `(exponent vector, coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &BigRational)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    /// Maximum total degree over stored monomials, `None` for zero.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }
}

/// Sum of two polynomials on the same number of coordinate pairs.
pub fn mp_add(a: &MPoly, b: &MPoly) -> MPoly {
    assert_eq!(a.m, b.m, "mismatched coordinate-pair counts");
    let mut terms = a.terms.clone();
    for (e, c) in &b.terms {
        let entry = terms.entry(e.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            terms.remove(e);
        }
    }
    MPoly { m: a.m, terms }
}

/// Difference `a - b`.
pub fn mp_sub(a: &MPoly, b: &MPoly) -> MPoly {
    mp_add(a, &mp_scale(b, &-BigRational::one()))
}

/// Scalar multiple.
pub fn mp_scale(a: &MPoly, s: &BigRational) -> MPoly {
    if s.is_zero() {
        return MPoly::zero(a.m);
    }
    let terms = a.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect();
    MPoly { m: a.m, terms }
}

/// Product of two polynomials on the same number of coordinate pairs.
pub fn mp_mul(a: &MPoly, b: &MPoly) -> MPoly {
    assert_eq!(a.m, b.m, "mismatched coordinate-pair counts");
    let mut terms: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
    for (ea, ca) in &a.terms {
        for (eb, cb) in &b.terms {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(&p, &q)| p + q).collect();
            let entry = terms.entry(e).or_insert_with(BigRational::zero);
            *entry += ca * cb;
        }
    }
    terms.retain(|_, c| !c.is_zero());
    MPoly { m: a.m, terms }
}

/// Exact partial derivative with respect to the 1-based variable index
/// (`1..=m` are `x_1..x_m`, `m+1..=2m` are `y_1..y_m`).
pub fn mp_partial(p: &MPoly, var: usize) -> Result<MPoly> {
    if var == 0 || var > 2 * p.m {
        return Err(Error::VarIndexOutOfRange { index: var, vars: 2 * p.m });
    }
    let i = var - 1;
    let mut terms: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
    for (e, c) in &p.terms {
        if e[i] == 0 {
            continue;
        }
        let mut d = e.clone();
        d[i] -= 1;
        let coeff = c * BigRational::from_integer(BigInt::from(e[i]));
        let entry = terms.entry(d).or_insert_with(BigRational::zero);
        *entry += coeff;
    }
    terms.retain(|_, c| !c.is_zero());
    Ok(MPoly { m: p.m, terms })
}

/// The signature-(m,m) Laplacian `2 sum_j d^2/(dx_j dy_j)` applied exactly.
pub fn laplacian_m(p: &MPoly) -> MPoly {
    let mut acc = MPoly::zero(p.m);
    for j in 1..=p.m {
        let dj = mp_partial(&mp_partial(p, j).expect("x index in range"), p.m + j)
            .expect("y index in range");
        acc = mp_add(&acc, &dj);
    }
    mp_scale(&acc, &BigRational::from_integer(BigInt::from(2)))
}

/// The three spherical weight families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphericalFamily {
    /// `prod x_j * prod (x_i^2 - x_j^2)^2`, degree `2m^2 - m`.
    F1,
    /// `prod x_j^3 * prod (x_i^2 - x_j^2)^2`, degree `2m^2 + m`.
    F2,
    /// `prod (x_j + y_j) * prod ((x_i-y_i)^2-(x_j-y_j)^2)((x_i+y_i)^2-(x_j+y_j)^2)`,
    /// degree `2m^2 - m`.
    F3,
}

/// Builds the exact spherical polynomial of the given family.
pub fn spherical_f(family: SphericalFamily, m: usize) -> Result<MPoly> {
    if m == 0 {
        return Err(Error::NonPositiveArgument { name: "m", value: 0 });
    }
    let x = |j: usize| MPoly::var_x(m, j).expect("index in range");
    let y = |j: usize| MPoly::var_y(m, j).expect("index in range");
    let sq = |p: &MPoly| mp_mul(p, p);
    let mut acc = MPoly::constant(m, BigRational::one());
    match family {
        SphericalFamily::F1 | SphericalFamily::F2 => {
            for j in 1..=m {
                acc = mp_mul(&acc, &x(j));
                if family == SphericalFamily::F2 {
                    acc = mp_mul(&acc, &sq(&x(j)));
                }
            }
            for i in 1..=m {
                for j in (i + 1)..=m {
                    let diff = mp_sub(&sq(&x(i)), &sq(&x(j)));
                    acc = mp_mul(&acc, &sq(&diff));
                }
            }
        }
        SphericalFamily::F3 => {
            for j in 1..=m {
                acc = mp_mul(&acc, &mp_add(&x(j), &y(j)));
            }
            for i in 1..=m {
                for j in (i + 1)..=m {
                    let di = mp_sub(&x(i), &y(i));
                    let dj = mp_sub(&x(j), &y(j));
                    let si = mp_add(&x(i), &y(i));
                    let sj = mp_add(&x(j), &y(j));
                    let minus = mp_sub(&sq(&di), &sq(&dj));
                    let plus = mp_sub(&sq(&si), &sq(&sj));
                    acc = mp_mul(&acc, &mp_mul(&minus, &plus));
                }
            }
        }
    }
    Ok(acc)
}

/// Classification of a cone 2-vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeClass {
    /// The negative cone: `c1 c2 < 0` and `c2 > 0` (error-function kernel).
    Negative,
    /// The cusp set: coprime integers with `c1 c2 = 0` and `c1 < c2`
    /// (sign-function kernel).
    Cusp,
    /// Neither; rejected by every operation that consumes cones.
    Invalid,
}

/// A cone parameter vector `(c1, c2)` with its classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeVector {
    c1: BigRational,
    c2: BigRational,
    class: ConeClass,
}

impl ConeVector {
    /// Classifies `(c1, c2)` on construction.
    pub fn new(c1: BigRational, c2: BigRational) -> Self {
        let class = classify(&c1, &c2);
        ConeVector { c1, c2, class }
    }

    /// Integer-entry convenience constructor.
    pub fn from_ints(c1: i64, c2: i64) -> Self {
        ConeVector::new(
            BigRational::from_integer(BigInt::from(c1)),
            BigRational::from_integer(BigInt::from(c2)),
        )
    }

    /// First entry.
    pub fn c1(&self) -> &BigRational {
        &self.c1
    }

    /// Second entry.
    pub fn c2(&self) -> &BigRational {
        &self.c2
    }

    /// Classification assigned at construction.
    pub fn class(&self) -> ConeClass {
        self.class
    }

    /// `Q_1(c) = c1 * c2`.
    pub fn q1(&self) -> BigRational {
        &self.c1 * &self.c2
    }

    /// The deformed vector `c + t * dir`, reclassified.
    pub fn offset_by(&self, t: &BigRational, dir: &ConeVector) -> ConeVector {
        ConeVector::new(&self.c1 + t * &dir.c1, &self.c2 + t * &dir.c2)
    }

    /// Both entries as doubles.
    pub fn as_f64(&self) -> (f64, f64) {
        (rational_to_f64(&self.c1), rational_to_f64(&self.c2))
    }
}

fn classify(c1: &BigRational, c2: &BigRational) -> ConeClass {
    let q = c1 * c2;
    if q.is_negative() && c2.is_positive() {
        return ConeClass::Negative;
    }
    if q.is_zero() && c1.is_integer() && c2.is_integer() && c1 < c2 {
        let g = c1.to_integer().abs().gcd(&c2.to_integer().abs());
        if g.is_one() {
            return ConeClass::Cusp;
        }
    }
    ConeClass::Invalid
}

/// Image of a polynomial under one application of a cone-directional
/// derivative, with the irrational normalizer kept symbolic.
///
/// The true image is `poly * normalizer_base^(-half_powers/2)`; the square
/// root is deferred to numeric evaluation so coefficients stay rational.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionalImage {
    /// Rational-coefficient part of the image.
    pub poly: MPoly,
    /// Base `-c1 c2` of the suppressed normalizer (`1` for cusp vectors).
    pub normalizer_base: BigRational,
    /// Number of accumulated `base^{-1/2}` factors (0 or 1 per application).
    pub half_powers: u32,
}

/// Applies the directional derivative attached to the cone `c` in coordinate
/// pair `j` (1-based): `(c1 d/dx_j + c2 d/dy_j)` scaled by `(-c1 c2)^{-1/2}`
/// for negative-cone vectors, or the identity for cusp vectors.
pub fn directional_derivative(c: &ConeVector, j: usize, p: &MPoly) -> Result<DirectionalImage> {
    if j == 0 || j > p.m {
        return Err(Error::VarIndexOutOfRange { index: j, vars: p.m });
    }
    match c.class {
        ConeClass::Cusp => Ok(DirectionalImage {
            poly: p.clone(),
            normalizer_base: BigRational::one(),
            half_powers: 0,
        }),
        ConeClass::Negative => {
            let dx = mp_partial(p, j)?;
            let dy = mp_partial(p, p.m + j)?;
            let poly = mp_add(&mp_scale(&dx, &c.c1), &mp_scale(&dy, &c.c2));
            Ok(DirectionalImage { poly, normalizer_base: -c.q1(), half_powers: 1 })
        }
        ConeClass::Invalid => Err(Error::InvalidConeClass),
    }
}

/// Exact evaluation at a rational point of length `2m`.
pub fn mp_eval(p: &MPoly, point: &[BigRational]) -> Result<BigRational> {
    if point.len() != 2 * p.m {
        return Err(Error::PointLengthMismatch { expected: 2 * p.m, got: point.len() });
    }
    let mut acc = BigRational::zero();
    for (e, c) in &p.terms {
        let mut term = c.clone();
        for (xi, &pow) in point.iter().zip(e.iter()) {
            if pow > 0 {
                term *= power(xi, pow);
            }
        }
        acc += term;
    }
    Ok(acc)
}

/// Floating evaluation at a real point of length `2m`.
pub fn mp_eval_f64(p: &MPoly, point: &[f64]) -> Result<f64> {
    if point.len() != 2 * p.m {
        return Err(Error::PointLengthMismatch { expected: 2 * p.m, got: point.len() });
    }
    let mut acc = 0.0;
    for (e, c) in &p.terms {
        let mut term = rational_to_f64(c);
        for (xi, &pow) in point.iter().zip(e.iter()) {
            for _ in 0..pow {
                term *= xi;
            }
        }
        acc += term;
    }
    Ok(acc)
}

fn power(base: &BigRational, mut exp: u32) -> BigRational {
    let mut result = BigRational::one();
    let mut b = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result *= &b;
        }
        exp >>= 1;
        if exp > 0 {
            b = &b * &b;
        }
    }
    result
}
