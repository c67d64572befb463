//! Exact q-series for the sign-coupled double sums over `Z^m_J`.
//!
//! Each series here sums over subsets `J` of the coordinates with sign
//! `(-1)^{|J|}`, where a tuple lies in the `J`-sector exactly when its
//! negative-or-zero coordinates are the ones in `J`.  Coupling `k` and `r`
//! to the same sector makes every per-coordinate exponent contribution
//! nonnegative, which is what turns the double sums into well-defined
//! truncated series and yields finite enumeration boxes:
//!
//! * `sl`-type: exponent `K^2 + sum_j (k_j^2 + (2k_j-1) r_j) - m(m+1)/2`
//!   with `K = sum k_j`; per coordinate `k_j^2 + |r_j|` is bounded by the
//!   shifted order.
//! * `spo`-type (even): per-coordinate term `2 k_j (k_j - 1) + (2k_j-1) r_j`,
//!   bounded below by both `2 k_j (k_j - 1)` and `|r_j|`.
//! * `spo`-type (plus-2): per-coordinate term `(2k_j - 1) r_j >= |r_j|`, and
//!   the `r_j^3` weight removes `r_j = 0`, so `|k_j|` is bounded once `r_j`
//!   is fixed.
//! * `gl`-type: `r`-tuples with a repeated value are killed by the squared
//!   Vandermonde weight, so at most one `r_j` vanishes and the remaining
//!   coordinates bound the whole `k`-block through the sector coupling.
//!
//! Because the caps are hand-derived, every enumerator accepts a box `pad`
//! and [`check_stabilization`] verifies that two successive enlargements of
//! the box leave every retained coefficient unchanged.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::qseries::{qs_equal_upto, qs_mul, qs_sub, QSeries, UNITS_PER_Q};
use crate::{Error, Result};

/// The sign-sector `Z^m_J`: integer tuples whose non-positive coordinates
/// are exactly the ones indexed by `J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedBox {
    in_j: Vec<bool>,
}

impl SignedBox {
    /// Builds the sector for an explicit membership mask (`true` = in `J`).
    pub fn new(in_j: Vec<bool>) -> Result<Self> {
        if in_j.is_empty() {
            return Err(Error::NonPositiveArgument { name: "m", value: 0 });
        }
        Ok(SignedBox { in_j })
    }

    /// The sector a given tuple belongs to (`J = {j : v_j <= 0}`).
    pub fn from_point(v: &[i64]) -> Result<Self> {
        SignedBox::new(v.iter().map(|&x| x <= 0).collect())
    }

    /// Number of coordinates.
    pub fn m(&self) -> usize {
        self.in_j.len()
    }

    /// Whether coordinate `j` (0-based) lies in `J`.
    pub fn in_j(&self, j: usize) -> bool {
        self.in_j[j]
    }

    /// Membership test: `v` is in `Z^m_J` iff `J = {j : v_j <= 0}`.
    pub fn contains(&self, v: &[i64]) -> bool {
        v.len() == self.in_j.len()
            && v.iter().zip(self.in_j.iter()).all(|(&x, &neg)| (x <= 0) == neg)
    }

    /// The sector sign `(-1)^{|J|}`.
    pub fn sign(&self) -> i64 {
        if self.in_j.iter().filter(|&&b| b).count() % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

/// The five sign-coupled sum families handled by this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenominatorFamily {
    /// `D^{2m^2-2}` for odd `m >= 3`, with the `(1 - q^m)` prefactor.
    Gl,
    /// `D^{2m(m+1)}`.
    Sl,
    /// `D^{4m^2}`.
    SpoEven,
    /// `D^{4m^2+4m}`.
    SpoPlus2,
    /// The signed full-lattice form equal to `(q^{1/16} D(q^{1/2}))^{2m(m+1)}`.
    SlTheta,
}

/// Dispatches to the family's series builder.
pub fn rhs_series(family: DenominatorFamily, m: usize, order_units: i64) -> Result<QSeries> {
    rhs_series_padded(family, m, order_units, 0)
}

/// Same as [`rhs_series`] with every enumeration box enlarged by `pad`.
pub fn rhs_series_padded(
    family: DenominatorFamily,
    m: usize,
    order_units: i64,
    pad: i64,
) -> Result<QSeries> {
    match family {
        DenominatorFamily::Gl => rhs_gl_padded(m, order_units, pad),
        DenominatorFamily::Sl => rhs_sl_padded(m, order_units, pad),
        DenominatorFamily::SpoEven => rhs_spo_even_padded(m, order_units, pad),
        DenominatorFamily::SpoPlus2 => rhs_spo_plus2_padded(m, order_units, pad),
        DenominatorFamily::SlTheta => rhs_sl_reformulated_padded(m, order_units, pad),
    }
}

/// Verifies that enlarging the enumeration box by +2 and then +4 leaves all
/// coefficients up to the order unchanged.
pub fn check_stabilization(
    family: DenominatorFamily,
    m: usize,
    order_units: i64,
) -> Result<bool> {
    let base = rhs_series_padded(family, m, order_units, 0)?;
    for pad in [2, 4] {
        let wider = rhs_series_padded(family, m, order_units, pad)?;
        let (eq, _) = qs_equal_upto(&base, &wider, order_units)?;
        if !eq {
            return Ok(false);
        }
    }
    Ok(true)
}

fn require_positive_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::NonPositiveArgument { name: "m", value: 0 });
    }
    Ok(())
}

fn factorial_big(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}

fn isqrt_i64(n: i64) -> i64 {
    if n <= 0 {
        0
    } else {
        n.isqrt()
    }
}

fn map_to_series(
    acc: BTreeMap<i64, i128>,
    prefactor: &BigRational,
    order_units: i64,
) -> QSeries {
    let terms = acc
        .into_iter()
        .map(|(u, c)| (u, BigRational::from_integer(BigInt::from(c)) * prefactor));
    QSeries::from_terms(order_units, terms)
}

// --------------------------------------------------------------------------
// sl family: D^{2m(m+1)}
// --------------------------------------------------------------------------

/// The sign-coupled sum equal to `D(q)^{2m(m+1)}`, with prefactor
/// `1 / prod_{i=1}^m (i!)^2`, exponent
/// `2 sum_{i<=j} k_i k_j + sum_j (2k_j - 1) r_j - m(m+1)/2`
/// and weight `prod_i (k_i + r_i + K) * prod_{i<j} (k_i+r_i-k_j-r_j)(r_i-r_j)`.
pub fn rhs_sl(m: usize, order_units: i64) -> Result<QSeries> {
    rhs_sl_padded(m, order_units, 0)
}

/// [`rhs_sl`] with the enumeration box enlarged by `pad` in every coordinate.
pub fn rhs_sl_padded(m: usize, order_units: i64, pad: i64) -> Result<QSeries> {
    require_positive_m(m)?;
    let uq = order_units.div_euclid(UNITS_PER_Q);
    let shift = (m * (m + 1) / 2) as i64;
    let budget = uq + shift;
    let kcap = isqrt_i64(budget) + pad;
    let rcap = budget + pad;

    let mut acc: BTreeMap<i64, i128> = BTreeMap::new();
    let mut ks = vec![0i64; m];
    let mut rs = vec![0i64; m];
    sl_recurse(0, m, kcap, rcap, uq, shift, &mut ks, &mut rs, &mut acc);

    let mut denom = BigInt::one();
    for i in 1..=m as u64 {
        let f = factorial_big(i);
        denom *= &f * &f;
    }
    let pref = BigRational::new(BigInt::one(), denom);
    Ok(map_to_series(acc, &pref, order_units))
}

#[allow(clippy::too_many_arguments)]
fn sl_recurse(
    depth: usize,
    m: usize,
    kcap: i64,
    rcap: i64,
    uq: i64,
    shift: i64,
    ks: &mut [i64],
    rs: &mut [i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    if depth == m {
        sl_leaf(m, uq, shift, ks, rs, acc);
        return;
    }
    for k in -kcap..=kcap {
        ks[depth] = k;
        // Sector coupling: r shares the sign side of k (zero counts negative).
        let (rlo, rhi) = if k >= 1 { (1, rcap) } else { (-rcap, 0) };
        for r in rlo..=rhi {
            rs[depth] = r;
            sl_recurse(depth + 1, m, kcap, rcap, uq, shift, ks, rs, acc);
        }
    }
}

fn sl_leaf(
    m: usize,
    uq: i64,
    shift: i64,
    ks: &[i64],
    rs: &[i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    let ksum: i64 = ks.iter().sum();
    let mut e = ksum * ksum - shift;
    for j in 0..m {
        e += ks[j] * ks[j] + (2 * ks[j] - 1) * rs[j];
    }
    if e > uq {
        return;
    }
    let mut w: i128 = 1;
    for i in 0..m {
        w *= (ks[i] + rs[i] + ksum) as i128;
        for j in (i + 1)..m {
            w *= (ks[i] + rs[i] - ks[j] - rs[j]) as i128;
            w *= (rs[i] - rs[j]) as i128;
        }
    }
    if w == 0 {
        return;
    }
    let neg = ks.iter().filter(|&&k| k <= 0).count();
    if neg % 2 == 1 {
        w = -w;
    }
    *acc.entry(e * UNITS_PER_Q).or_insert(0) += w;
}

// --------------------------------------------------------------------------
// spo family, even rank: D^{4m^2}
// --------------------------------------------------------------------------

/// The sign-coupled sum equal to `D(q)^{4m^2}`, with prefactor
/// `(2m-1)! / (2^{m-1} m! (m-1)! prod_{i=1}^m ((2i-1)!)^2)`, exponent
/// `sum_j (2(k_j^2 + k_j r_j - k_j) - r_j) - m(m-1)/2` and weight
/// `prod_i (r_i + 2k_i - 1) * prod_{i<j} (r_i-r_j)(r_i+r_j)
///  (r_i+2k_i-r_j-2k_j)(r_i+2k_i+r_j+2k_j-2)`.
pub fn rhs_spo_even(m: usize, order_units: i64) -> Result<QSeries> {
    rhs_spo_even_padded(m, order_units, 0)
}

/// [`rhs_spo_even`] with the enumeration box enlarged by `pad`.
pub fn rhs_spo_even_padded(m: usize, order_units: i64, pad: i64) -> Result<QSeries> {
    require_positive_m(m)?;
    let uq = order_units.div_euclid(UNITS_PER_Q);
    let shift = (m * (m - 1) / 2) as i64;
    let budget = uq + shift;
    // 2k(k-1) <= budget gives k in [-(s-1)/2, (s+1)/2] for s = isqrt(1+2*budget).
    let s = isqrt_i64(1 + 2 * budget);
    let klo = -((s - 1) / 2) - pad;
    let khi = (s + 1) / 2 + pad;
    let rcap = budget + pad;

    let mut acc: BTreeMap<i64, i128> = BTreeMap::new();
    let mut ks = vec![0i64; m];
    let mut rs = vec![0i64; m];
    spo_even_recurse(0, m, klo, khi, rcap, uq, shift, &mut ks, &mut rs, &mut acc);

    let mut denom = BigInt::from(2).pow(m as u32 - 1)
        * factorial_big(m as u64)
        * factorial_big(m as u64 - 1);
    for i in 1..=m as u64 {
        let f = factorial_big(2 * i - 1);
        denom *= &f * &f;
    }
    let pref = BigRational::new(factorial_big(2 * m as u64 - 1), denom);
    Ok(map_to_series(acc, &pref, order_units))
}

#[allow(clippy::too_many_arguments)]
fn spo_even_recurse(
    depth: usize,
    m: usize,
    klo: i64,
    khi: i64,
    rcap: i64,
    uq: i64,
    shift: i64,
    ks: &mut [i64],
    rs: &mut [i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    if depth == m {
        spo_even_leaf(m, uq, shift, ks, rs, acc);
        return;
    }
    for k in klo..=khi {
        ks[depth] = k;
        let (rlo, rhi) = if k >= 1 { (1, rcap) } else { (-rcap, 0) };
        for r in rlo..=rhi {
            rs[depth] = r;
            spo_even_recurse(depth + 1, m, klo, khi, rcap, uq, shift, ks, rs, acc);
        }
    }
}

fn spo_even_leaf(
    m: usize,
    uq: i64,
    shift: i64,
    ks: &[i64],
    rs: &[i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    let mut e = -shift;
    for j in 0..m {
        e += 2 * (ks[j] * ks[j] + ks[j] * rs[j] - ks[j]) - rs[j];
    }
    if e > uq {
        return;
    }
    let mut w: i128 = 1;
    for i in 0..m {
        w *= (rs[i] + 2 * ks[i] - 1) as i128;
        for j in (i + 1)..m {
            w *= (rs[i] - rs[j]) as i128;
            w *= (rs[i] + rs[j]) as i128;
            w *= (rs[i] + 2 * ks[i] - rs[j] - 2 * ks[j]) as i128;
            w *= (rs[i] + 2 * ks[i] + rs[j] + 2 * ks[j] - 2) as i128;
        }
    }
    if w == 0 {
        return;
    }
    let neg = ks.iter().filter(|&&k| k <= 0).count();
    if neg % 2 == 1 {
        w = -w;
    }
    *acc.entry(e * UNITS_PER_Q).or_insert(0) += w;
}

// --------------------------------------------------------------------------
// spo family, plus-2 rank: D^{4m^2+4m}
// --------------------------------------------------------------------------

/// The sign-coupled sum equal to `D(q)^{4m^2+4m}`, with prefactor
/// `1 / (2^m (m!)^2 prod_{i=1}^m ((2i-1)!)^2)`, exponent
/// `sum_j (2 k_j - 1) r_j - m(m+1)/2` and weight
/// `prod_i r_i^3 * prod_{i<j} (r_i-r_j)^2 (r_i+r_j)^2`.
pub fn rhs_spo_plus2(m: usize, order_units: i64) -> Result<QSeries> {
    rhs_spo_plus2_padded(m, order_units, 0)
}

/// [`rhs_spo_plus2`] with the enumeration box enlarged by `pad`.
pub fn rhs_spo_plus2_padded(m: usize, order_units: i64, pad: i64) -> Result<QSeries> {
    require_positive_m(m)?;
    let uq = order_units.div_euclid(UNITS_PER_Q);
    let shift = (m * (m + 1) / 2) as i64;
    let budget = uq + shift;
    let rcap = budget + pad;

    let mut acc: BTreeMap<i64, i128> = BTreeMap::new();
    let mut ks = vec![0i64; m];
    let mut rs = vec![0i64; m];
    spo_plus2_recurse(0, m, budget, rcap, pad, uq, shift, &mut ks, &mut rs, &mut acc);

    let mut denom = BigInt::from(2).pow(m as u32);
    let fm = factorial_big(m as u64);
    denom *= &fm * &fm;
    for i in 1..=m as u64 {
        let f = factorial_big(2 * i - 1);
        denom *= &f * &f;
    }
    let pref = BigRational::new(BigInt::one(), denom);
    Ok(map_to_series(acc, &pref, order_units))
}

#[allow(clippy::too_many_arguments)]
fn spo_plus2_recurse(
    depth: usize,
    m: usize,
    budget: i64,
    rcap: i64,
    pad: i64,
    uq: i64,
    shift: i64,
    ks: &mut [i64],
    rs: &mut [i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    if depth == m {
        spo_plus2_leaf(m, uq, shift, ks, rs, acc);
        return;
    }
    for r in -rcap..=rcap {
        if r == 0 {
            // Killed by the r^3 weight.
            continue;
        }
        rs[depth] = r;
        // (2k-1)r <= budget bounds |k| once r is fixed.
        let kcap = (budget / r.abs() + 1) / 2 + pad;
        let (klo, khi) = if r >= 1 { (1, kcap) } else { (-kcap, 0) };
        for k in klo..=khi {
            ks[depth] = k;
            spo_plus2_recurse(depth + 1, m, budget, rcap, pad, uq, shift, ks, rs, acc);
        }
    }
}

fn spo_plus2_leaf(
    m: usize,
    uq: i64,
    shift: i64,
    ks: &[i64],
    rs: &[i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    let mut e = -shift;
    for j in 0..m {
        e += (2 * ks[j] - 1) * rs[j];
    }
    if e > uq {
        return;
    }
    let mut w: i128 = 1;
    for i in 0..m {
        let r = rs[i] as i128;
        w *= r * r * r;
        for j in (i + 1)..m {
            let d = (rs[i] - rs[j]) as i128;
            let s = (rs[i] + rs[j]) as i128;
            w *= d * d * s * s;
        }
    }
    if w == 0 {
        return;
    }
    let neg = ks.iter().filter(|&&k| k <= 0).count();
    if neg % 2 == 1 {
        w = -w;
    }
    *acc.entry(e * UNITS_PER_Q).or_insert(0) += w;
}

// --------------------------------------------------------------------------
// gl family: D^{2m^2-2}, odd m >= 3
// --------------------------------------------------------------------------

/// The sign-coupled sum equal to `D(q)^{2m^2-2}` for odd `m >= 3`:
/// prefactor `(-1)^{m(m+1)/2} (1 - q^m) / (m! (prod_{i=1}^{m-1} i!)^2)`,
/// summation over `k in Z^{m-1}` with the closing coordinate
/// `k~_m = -sum k_j`, `r in Z^m` in the sector of `k~`, exponent
/// `sum_j (2 k~_j - 1) r_j - (m^2-1)/4` and weight `prod_{i<j} (r_i-r_j)^2`.
///
/// Even `m` (where the would-be prefactor degenerates) and `m = 1` are
/// rejected.
pub fn rhs_gl(m: usize, order_units: i64) -> Result<QSeries> {
    rhs_gl_padded(m, order_units, 0)
}

/// [`rhs_gl`] with the enumeration box enlarged by `pad`.
pub fn rhs_gl_padded(m: usize, order_units: i64, pad: i64) -> Result<QSeries> {
    if m % 2 == 0 || m < 3 {
        return Err(Error::GlRankUnsupported { m });
    }
    let uq = order_units.div_euclid(UNITS_PER_Q);
    let shift = ((m * m - 1) / 4) as i64;
    let budget = uq + shift;
    let rcap = budget + pad;

    let mut acc: BTreeMap<i64, i128> = BTreeMap::new();
    let mut rs = vec![0i64; m];
    gl_r_recurse(0, m, rcap, budget, pad, uq, shift, &mut rs, &mut acc);

    let mut denom = factorial_big(m as u64);
    for i in 1..m as u64 {
        let f = factorial_big(i);
        denom *= &f * &f;
    }
    let mut pref = BigRational::new(BigInt::one(), denom);
    if (m * (m + 1) / 2) % 2 == 1 {
        pref = -pref;
    }
    let raw = map_to_series(acc, &pref, order_units);
    let one_minus_qm = qs_sub(
        &QSeries::one(order_units),
        &QSeries::monomial(m as i64 * UNITS_PER_Q, BigRational::one(), order_units),
    );
    Ok(qs_mul(&raw, &one_minus_qm))
}

#[allow(clippy::too_many_arguments)]
fn gl_r_recurse(
    depth: usize,
    m: usize,
    rcap: i64,
    budget: i64,
    pad: i64,
    uq: i64,
    shift: i64,
    rs: &mut [i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    if depth == m {
        gl_k_phase(m, budget, pad, uq, shift, rs, acc);
        return;
    }
    'next: for r in -rcap..=rcap {
        // A repeated r-value is killed by the squared Vandermonde weight.
        for &prev in rs[..depth].iter() {
            if prev == r {
                continue 'next;
            }
        }
        rs[depth] = r;
        gl_r_recurse(depth + 1, m, rcap, budget, pad, uq, shift, rs, acc);
    }
}

/// For a fixed distinct `r`-tuple, enumerates the compatible closing-sum
/// `k~` vectors.  The sector is read off `r` (`j in J` iff `r_j <= 0`); the
/// at-most-one coordinate with `r_j = 0` leaves its `k~_j` free of exponent
/// cost, so that coordinate is reconstructed from the constraint
/// `sum_j k~_j = 0` instead of being scanned.
fn gl_k_phase(
    m: usize,
    budget: i64,
    pad: i64,
    uq: i64,
    shift: i64,
    rs: &[i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    let sector = SignedBox::from_point(rs).expect("m >= 3");
    let zero_pos = rs.iter().position(|&r| r == 0);
    // Scan every coordinate except the reconstructed one: the closing
    // coordinate m-1 normally, else the unique zero-r coordinate.
    let rebuilt = zero_pos.unwrap_or(m - 1);

    let mut weight: i128 = 1;
    for i in 0..m {
        for j in (i + 1)..m {
            let d = (rs[i] - rs[j]) as i128;
            weight *= d * d;
        }
    }
    let w = weight * i128::from(sector.sign());

    let mut ks = vec![0i64; m];
    gl_k_recurse(0, m, rebuilt, &sector, budget, pad, uq, shift, rs, &mut ks, w, acc);
}

#[allow(clippy::too_many_arguments)]
fn gl_k_recurse(
    depth: usize,
    m: usize,
    rebuilt: usize,
    sector: &SignedBox,
    budget: i64,
    pad: i64,
    uq: i64,
    shift: i64,
    rs: &[i64],
    ks: &mut [i64],
    w: i128,
    acc: &mut BTreeMap<i64, i128>,
) {
    if depth == m {
        let scanned: i64 =
            ks.iter().enumerate().filter(|&(j, _)| j != rebuilt).map(|(_, &k)| k).sum();
        ks[rebuilt] = -scanned;
        if !sector.contains(ks) {
            return;
        }
        let mut e = -shift;
        for j in 0..m {
            e += (2 * ks[j] - 1) * rs[j];
        }
        if e > uq {
            return;
        }
        *acc.entry(e * UNITS_PER_Q).or_insert(0) += w;
        return;
    }
    if depth == rebuilt {
        gl_k_recurse(depth + 1, m, rebuilt, sector, budget, pad, uq, shift, rs, ks, w, acc);
        return;
    }
    // (2k - 1) r <= budget bounds |k| for the scanned coordinates (r != 0
    // there except when the closing coordinate is the zero one, in which
    // case r = 0 only ever occupies the rebuilt slot).
    let kcap = (budget / rs[depth].abs().max(1) + 1) / 2 + pad;
    let (klo, khi) = if sector.in_j(depth) { (-kcap, 0) } else { (1, kcap) };
    for k in klo..=khi {
        ks[depth] = k;
        gl_k_recurse(depth + 1, m, rebuilt, sector, budget, pad, uq, shift, rs, ks, w, acc);
    }
}

// --------------------------------------------------------------------------
// sl family, signed full-lattice form
// --------------------------------------------------------------------------

/// The signed full-lattice form of the `sl` sum, equal to
/// `(q^{1/16} D(q^{1/2}))^{2m(m+1)}`: prefactor `1/(2^m prod_{j=1}^m (j!)^2)`,
/// summand `prod_j (sgn(k_j) + sgn(r_j)) * g(k, r)` with `sgn(0) = -1` and
/// `g` the `sl` weight, exponent in 1/16-units
/// `16 sum_{i<=j} k_i k_j + 8 sum_j (2 k_j - 1) r_j - 2m(m+1)`.
pub fn rhs_sl_reformulated(m: usize, order_units: i64) -> Result<QSeries> {
    rhs_sl_reformulated_padded(m, order_units, 0)
}

/// [`rhs_sl_reformulated`] with the enumeration box enlarged by `pad`.
pub fn rhs_sl_reformulated_padded(m: usize, order_units: i64, pad: i64) -> Result<QSeries> {
    require_positive_m(m)?;
    // Per coordinate, 8 (k_j^2 + |r_j|) <= order + 2m(m+1) on the surviving
    // (sign-matched) tuples.
    let bu = order_units + 2 * (m * (m + 1)) as i64;
    let kcap = isqrt_i64(bu / 8) + pad;
    let rcap = bu / 8 + pad;

    let mut acc: BTreeMap<i64, i128> = BTreeMap::new();
    let mut ks = vec![0i64; m];
    let mut rs = vec![0i64; m];
    sl_theta_recurse(0, m, kcap, rcap, order_units, &mut ks, &mut rs, &mut acc);

    let mut denom = BigInt::from(2).pow(m as u32);
    for j in 1..=m as u64 {
        let f = factorial_big(j);
        denom *= &f * &f;
    }
    let pref = BigRational::new(BigInt::one(), denom);
    Ok(map_to_series(acc, &pref, order_units))
}

#[allow(clippy::too_many_arguments)]
fn sl_theta_recurse(
    depth: usize,
    m: usize,
    kcap: i64,
    rcap: i64,
    order_units: i64,
    ks: &mut [i64],
    rs: &mut [i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    if depth == m {
        sl_theta_leaf(m, order_units, ks, rs, acc);
        return;
    }
    for k in -kcap..=kcap {
        ks[depth] = k;
        // sgn(k) + sgn(r) vanishes unless both signs match (sgn(0) = -1).
        let (rlo, rhi) = if k >= 1 { (1, rcap) } else { (-rcap, 0) };
        for r in rlo..=rhi {
            rs[depth] = r;
            sl_theta_recurse(depth + 1, m, kcap, rcap, order_units, ks, rs, acc);
        }
    }
}

fn sl_theta_leaf(
    m: usize,
    order_units: i64,
    ks: &[i64],
    rs: &[i64],
    acc: &mut BTreeMap<i64, i128>,
) {
    let ksum: i64 = ks.iter().sum();
    let mut u = 8 * ksum * ksum - 2 * (m * (m + 1)) as i64;
    for j in 0..m {
        u += 8 * (ks[j] * ks[j] + 2 * ks[j] * rs[j] - rs[j]);
    }
    if u > order_units {
        return;
    }
    let mut w: i128 = 1;
    for i in 0..m {
        w *= (ks[i] + rs[i] + ksum) as i128;
        for j in (i + 1)..m {
            w *= (ks[i] + rs[i] - ks[j] - rs[j]) as i128;
            w *= (rs[i] - rs[j]) as i128;
        }
    }
    if w == 0 {
        return;
    }
    // Each sign-matched coordinate contributes sgn + sgn = +/-2.
    for &k in ks {
        w *= if k >= 1 { 2 } else { -2 };
    }
    *acc.entry(u).or_insert(0) += w;
}
