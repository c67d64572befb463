//! Floating-point evaluation of signature-(m,m) indefinite theta functions
//! and numeric checks of their modular transformation laws.
//!
//! # Setting
//!
//! The quadratic form is `Q_m(x) = sum_j x_j y_j` on `R^{2m}` with bilinear
//! form `B_m(x, y) = sum_j (x_j y'_j + y_j x'_j)`; a vector is stored as
//! `[x_1..x_m, y_1..y_m]`, matching the polynomial module's evaluation
//! points.  On a single pair, `Q_1(c) = c_1 c_2` and
//! `B_1(c, (x, y)) = c_1 y + c_2 x`.
//!
//! A theta function is parameterised by a [`ThetaSpec`]: characteristics
//! `a, b`, two lists of cone vectors (one pair per coordinate), and a
//! spherical weight polynomial `f` (homogeneous, annihilated by the paired
//! Laplacian).  Cone vectors are either *negative* (`Q_1(c) < 0`, `c_2 > 0`,
//! smooth error-function kernel) or *cusp* vectors (`(0,1)` and `(-1,0)`,
//! sign-function kernel).  Throughout, `sgn(0) = -1`.
//!
//! The kernel attached to a spec is
//!
//! ```text
//! p[f](x) = sum_{sigma in {0,1}^m} (-1)^{|sigma|} sum_{k0 <= d}
//!           ((-1)^k / (4 pi)^k) sum_{|kvec| = k}
//!           prod_j (rho_{c_j^{sigma_j}, k_j}(x_j) / k_j!) * G_{sigma,kvec}(x)
//! ```
//!
//! where `rho_{c,k}` is the `k`-th derivative of the error function
//! `E(z) = 2 int_0^z e^{-pi u^2} du` at `B_1(c, x_j) / sqrt(-Q_1(c))` for
//! negative cones, the bare sign `sgn(B_1(c, x_j))` for cusp vectors at
//! `k = 0` (and `0` for `k > 0`), and `G` applies the normalised directional
//! derivatives `(c_1 d/dx_j + c_2 d/dy_j) / sqrt(-Q_1(c))`.  The theta
//! function itself is
//!
//! ```text
//! theta_{a,b}[f](tau) = v^{-d/2} sum_{x in a + Z^{2m}}
//!                       p[f](x sqrt(v)) q^{Q_m(x)} e^{2 pi i B_m(x, b)}
//! ```
//!
//! with `q = e^{2 pi i tau}`, `v = Im(tau) > 0`.
//!
//! # Evaluation strategy
//!
//! [`p_eval`] follows the definition verbatim (it is the oracle the checks
//! differentiate).  [`theta_eval`] instead regroups the lattice sum: for each
//! monomial `prod_j x_j^{alpha_j} y_j^{beta_j}` of `f` and each derivative
//! multi-index, the sum factorises into per-pair two-dimensional sums whose
//! summand is the *difference* of the two cone kernels,
//!
//! ```text
//! U_j(k, alpha, beta) = sum_{(x,y)} [rho0 P0 - rho1 P1](x,y)
//!                       e^{2 pi i tau x y} e^{2 pi i (x b_y + y b_x)} .
//! ```
//!
//! Only the difference decays in the indefinite directions, so the grouping
//! is forced: the identity `B_1(c,w)^2 / (-2 Q_1(c)) - |xy| = M_c(w) >= 0`
//! for `xy <= 0`, with `M_c` the positive-definite majorant
//! `M_c(x,y) = -(c_2/2c_1) x^2 - (c_1/2c_2) y^2`, shows every summand is
//! bounded by a Gaussian in `|w|`; all exponentials are combined before
//! calling `exp` so no overflow can occur in the growing directions.
//!
//! Each pair sum is truncated adaptively: scan extents are floored by the
//! majorant radius (degree-adjusted Gaussian tail below the cutoff) or, for
//! cusp kernels, by the linear decay rate set by the distance of the lattice
//! from the coordinate axes, and then extended until several consecutive
//! lines fall below the cutoff.  Every evaluation is performed twice, the
//! second time with a far smaller cutoff and wider floors; if the two totals
//! differ by more than the requested tolerance the evaluation reports
//! [`Error::ConvergenceFailure`] instead of returning a value.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::Zero;

use crate::polyalgebra::{
    directional_derivative, mp_eval_f64, laplacian_m, spherical_f, ConeClass, ConeVector, MPoly,
    SphericalFamily,
};
use crate::qseries::rational_to_f64;
use crate::{Error, Result};

/// Complex double-precision value used by every numeric theta operation.
pub type ComplexValue = num_complex::Complex<f64>;

const PI: f64 = core::f64::consts::PI;
const SQRT_PI: f64 = 1.772_453_850_905_516_027_3;
/// Hard cap on scan extents of a single pair sum.
const MAX_STEPS: i64 = 400_000;
/// Default tolerance for the transformation checks.
const TOL_CHECK: f64 = 1e-10;
/// Default tolerance for the limit checks (their targets go down to 1e-6).
const TOL_LIMIT: f64 = 1e-11;

// ---------------------------------------------------------------------------
// Error function, its derivatives, and the complementary beta function
// ---------------------------------------------------------------------------

/// The error integral `E(z) = 2 int_0^z e^{-pi u^2} du = erf(sqrt(pi) z)`.
#[allow(non_snake_case)]
pub fn error_E(z: f64) -> f64 {
    libm::erf(SQRT_PI * z)
}

/// Coefficients of the polynomial `H_{k-1}` with
/// `E^{(k)}(z) = H_{k-1}(z) * 2 e^{-pi z^2}`, from `H_0 = 1` and
/// `H_{j+1} = H_j' - 2 pi z H_j`.
fn gaussian_factor_poly(k: u32) -> Vec<f64> {
    let mut h = vec![1.0f64];
    for _ in 1..k {
        let mut next = vec![0.0f64; h.len() + 1];
        for (i, &c) in h.iter().enumerate() {
            if i + 1 < h.len() {
                next[i] += h[i + 1] * (i as f64 + 1.0);
            }
            next[i + 1] -= 2.0 * PI * c;
        }
        h = next;
    }
    h
}

fn poly_eval(coeffs: &[f64], z: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// `k`-th derivative of [`error_E`] for `k >= 1`, via the closed form
/// `E^{(k)}(z) = H_{k-1}(z) * 2 e^{-pi z^2}`.
///
/// `E'(0) = 2` and `E''(1) = -4 pi e^{-pi}`.
#[allow(non_snake_case)]
pub fn error_E_deriv(k: u32, z: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::NonPositiveArgument { name: "derivative order", value: 0 });
    }
    let h = gaussian_factor_poly(k);
    Ok(poly_eval(&h, z) * 2.0 * libm::exp(-PI * z * z))
}

/// Complementary error integral `beta(x) = int_x^inf u^{-1/2} e^{-pi u} du`
/// for `x >= 0`, computed through the identity `beta(x) = 1 - E(sqrt(x))`.
pub fn beta_comp(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::NegativeArgument { name: "beta argument" });
    }
    Ok(libm::erfc(SQRT_PI * libm::sqrt(x)))
}

/// `beta(z^2) * e^{pi z^2}`, bounded by 1, safe for arbitrarily large `z`.
///
/// Used to combine the Gaussian decay of the kernel with the growing
/// `q`-factor in one exponential.  For large arguments the scaled
/// complementary error function is evaluated by its asymptotic series.
fn beta_scaled(z: f64) -> f64 {
    let t = SQRT_PI * libm::fabs(z);
    if t <= 26.0 {
        libm::erfc(t) * libm::exp(t * t)
    } else {
        let ti = 1.0 / t;
        (1.0 - 0.5 * ti * ti + 0.75 * ti * ti * ti * ti) * ti / SQRT_PI
    }
}

/// Sign function with the `sgn(0) = -1` convention used by the sign kernels.
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn dist_to_int(x: f64) -> f64 {
    libm::fabs(x - libm::round(x))
}

fn b1(c: (f64, f64), x: f64, y: f64) -> f64 {
    c.0 * y + c.1 * x
}

/// Kernel factor `rho_{c,k}` at one coordinate pair: the `k`-th error-function
/// derivative at `B_1(c, w) / sqrt(-Q_1(c))` for a negative cone vector, the
/// sign `sgn(B_1(c, w))` for a cusp vector at `k = 0`, and `0` for a cusp
/// vector at `k > 0`.
pub fn rho_eval(c: &ConeVector, k: u32, pair: (f64, f64)) -> Result<f64> {
    match c.class() {
        ConeClass::Invalid => Err(Error::InvalidConeClass),
        ConeClass::Cusp => {
            let (c1, c2) = c.as_f64();
            if k == 0 {
                Ok(sgn(b1((c1, c2), pair.0, pair.1)))
            } else {
                Ok(0.0)
            }
        }
        ConeClass::Negative => {
            let (c1, c2) = c.as_f64();
            let nq = -(c1 * c2);
            let z = b1((c1, c2), pair.0, pair.1) / libm::sqrt(nq);
            if k == 0 {
                Ok(error_E(z))
            } else {
                error_E_deriv(k, z)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Theta parameter packs
// ---------------------------------------------------------------------------

/// One fully expanded kernel term: a choice of cone per pair (`mask`), a
/// derivative multi-index, the scalar prefactor (sigma sign, `(4 pi)` powers,
/// factorials, and derivative normalisers), and the derivative image of the
/// weight polynomial.
struct KernelTerm {
    mask: u32,
    ks: Vec<u32>,
    coeff: f64,
    poly: MPoly,
}

/// Validated parameter pack for an indefinite theta function.
pub struct ThetaSpec {
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    cones0: Vec<ConeVector>,
    cones1: Vec<ConeVector>,
    f: MPoly,
    degree: u32,
    terms: Vec<KernelTerm>,
}

impl ThetaSpec {
    /// Validates and expands a theta parameter pack.
    ///
    /// Requirements: one cone pair per coordinate pair, every cone vector
    /// negative or cusp, `a` and `b` of length `2m` (layout
    /// `[x_1..x_m, y_1..y_m]`), `B_1(c, a_j)` away from the integers for
    /// every cusp vector `c` of pair `j`, and `f` homogeneous (in the
    /// variables of the same `m` pairs) with `laplacian_m(f) = 0` exactly.
    pub fn new(
        a: &[f64],
        b: &[f64],
        cones0: &[ConeVector],
        cones1: &[ConeVector],
        f: &MPoly,
    ) -> Result<ThetaSpec> {
        let m = cones0.len();
        if m == 0 {
            return Err(Error::InvalidThetaSpec { reason: "at least one coordinate pair is required" });
        }
        if m > 8 {
            return Err(Error::InvalidThetaSpec { reason: "coordinate rank too large for the kernel expansion" });
        }
        if cones1.len() != m {
            return Err(Error::InvalidThetaSpec { reason: "the two cone lists must have equal length" });
        }
        if f.m() != m {
            return Err(Error::InvalidThetaSpec { reason: "weight polynomial has the wrong number of variable pairs" });
        }
        if a.len() != 2 * m {
            return Err(Error::PointLengthMismatch { expected: 2 * m, got: a.len() });
        }
        if b.len() != 2 * m {
            return Err(Error::PointLengthMismatch { expected: 2 * m, got: b.len() });
        }
        if !a.iter().chain(b.iter()).all(|t| t.is_finite()) {
            return Err(Error::InvalidThetaSpec { reason: "characteristics must be finite" });
        }
        for j in 0..m {
            for c in [&cones0[j], &cones1[j]] {
                match c.class() {
                    ConeClass::Invalid => return Err(Error::InvalidConeClass),
                    ConeClass::Cusp => {
                        let cf = c.as_f64();
                        if dist_to_int(b1(cf, a[j], a[m + j])) <= 1e-9 {
                            return Err(Error::InvalidThetaSpec {
                                reason: "cusp kernels require B_1(c, a_j) away from the integers",
                            });
                        }
                    }
                    ConeClass::Negative => {}
                }
            }
        }
        let mut degree: Option<u32> = None;
        for (exps, _) in f.terms() {
            let td: u32 = exps.iter().sum();
            match degree {
                None => degree = Some(td),
                Some(d) if d != td => {
                    return Err(Error::InvalidThetaSpec { reason: "weight polynomial must be homogeneous" })
                }
                Some(_) => {}
            }
        }
        let degree = degree.unwrap_or(0);
        if !laplacian_m(f).is_zero() {
            return Err(Error::InvalidThetaSpec {
                reason: "weight polynomial must be annihilated by the paired Laplacian",
            });
        }
        let terms = expand_kernel(m, degree, cones0, cones1, f)?;
        Ok(ThetaSpec {
            m,
            a: a.to_vec(),
            b: b.to_vec(),
            cones0: cones0.to_vec(),
            cones1: cones1.to_vec(),
            f: f.clone(),
            degree,
            terms,
        })
    }

    /// Number of coordinate pairs.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Degree of the weight polynomial.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Characteristic shifting the lattice, layout `[x_1..x_m, y_1..y_m]`.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Characteristic entering the phases, same layout.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// First cone list.
    pub fn cones0(&self) -> &[ConeVector] {
        &self.cones0
    }

    /// Second cone list.
    pub fn cones1(&self) -> &[ConeVector] {
        &self.cones1
    }

    /// Weight polynomial.
    pub fn weight(&self) -> &MPoly {
        &self.f
    }
}

fn factorial_f64(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Per-pair kernel coefficient `(-1)^k / ((4 pi)^k k!)`.
fn k_coeff(k: u32) -> f64 {
    let mut c = 1.0;
    for _ in 0..k {
        c *= -1.0 / (4.0 * PI);
    }
    c / factorial_f64(k)
}

fn expand_kernel(
    m: usize,
    degree: u32,
    cones0: &[ConeVector],
    cones1: &[ConeVector],
    f: &MPoly,
) -> Result<Vec<KernelTerm>> {
    let mut terms = Vec::new();
    if f.is_zero() {
        return Ok(terms);
    }
    for mask in 0..(1u32 << m) {
        let sel: Vec<&ConeVector> =
            (0..m).map(|j| if mask >> j & 1 == 1 { &cones1[j] } else { &cones0[j] }).collect();
        let sigma_sign = if (mask.count_ones() % 2) == 1 { -1.0 } else { 1.0 };
        let caps: Vec<u32> = sel
            .iter()
            .map(|c| if c.class() == ConeClass::Cusp { 0 } else { degree })
            .collect();
        let mut ks = vec![0u32; m];
        'odometer: loop {
            if ks.iter().sum::<u32>() <= degree {
                let mut img = f.clone();
                let mut norm = 1.0f64;
                for (j, c) in sel.iter().enumerate() {
                    for _ in 0..ks[j] {
                        img = directional_derivative(c, j + 1, &img)?.poly;
                    }
                    if ks[j] > 0 {
                        let (c1, c2) = c.as_f64();
                        norm *= libm::pow(-(c1 * c2), -(ks[j] as f64) / 2.0);
                    }
                }
                if !img.is_zero() {
                    let coeff =
                        sigma_sign * norm * ks.iter().map(|&k| k_coeff(k)).product::<f64>();
                    terms.push(KernelTerm { mask, ks: ks.clone(), coeff, poly: img });
                }
            }
            let mut idx = 0;
            loop {
                if idx == m {
                    break 'odometer;
                }
                if ks[idx] < caps[idx] {
                    ks[idx] += 1;
                    break;
                }
                ks[idx] = 0;
                idx += 1;
            }
        }
    }
    Ok(terms)
}

/// Evaluates the completed kernel `p[f]` at a real point, exactly following
/// its defining double sum over cone selections and derivative multi-indices.
pub fn p_eval(spec: &ThetaSpec, x: &[f64]) -> Result<f64> {
    let m = spec.m;
    if x.len() != 2 * m {
        return Err(Error::PointLengthMismatch { expected: 2 * m, got: x.len() });
    }
    let mut acc = 0.0;
    for term in &spec.terms {
        let mut val = term.coeff;
        for j in 0..m {
            let c = if term.mask >> j & 1 == 1 { &spec.cones1[j] } else { &spec.cones0[j] };
            val *= rho_eval(c, term.ks[j], (x[j], x[m + j]))?;
            if val == 0.0 {
                break;
            }
        }
        if val != 0.0 {
            acc += val * mp_eval_f64(&term.poly, x)?;
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Factorised lattice summation
// ---------------------------------------------------------------------------

/// Frozen per-pair data for the factorised theta sum.
struct PairCtx {
    c0: (f64, f64),
    c1: (f64, f64),
    class0: ConeClass,
    class1: ConeClass,
    nq0: f64,
    nq1: f64,
    same_cones: bool,
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
}

impl PairCtx {
    fn from_cones(c0: &ConeVector, c1: &ConeVector, ax: f64, ay: f64, bx: f64, by: f64) -> PairCtx {
        let f0 = c0.as_f64();
        let f1 = c1.as_f64();
        PairCtx {
            c0: f0,
            c1: f1,
            class0: c0.class(),
            class1: c1.class(),
            nq0: -(f0.0 * f0.1),
            nq1: -(f1.0 * f1.1),
            same_cones: c0.c1() == c1.c1() && c0.c2() == c1.c2(),
            ax,
            ay,
            bx,
            by,
        }
    }
}

fn powi_f64(base: f64, exp: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

fn falling(n: u32, i: u32) -> f64 {
    if i > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for t in 0..i {
        acc *= (n - t) as f64;
    }
    acc
}

fn binom_f64(n: u32, i: u32) -> f64 {
    let mut acc = 1.0;
    for t in 0..i {
        acc = acc * (n - t) as f64 / (t + 1) as f64;
    }
    acc
}

/// `k`-fold normalised directional derivative of `x^alpha y^beta`, evaluated:
/// `(-Q_1)^{-k/2} sum_i C(k,i) c_1^i c_2^{k-i} (alpha)_i (beta)_{k-i}
///  x^{alpha-i} y^{beta-k+i}`.
fn mono_deriv(c: (f64, f64), nq: f64, k: u32, alpha: u32, beta: u32, xs: f64, ys: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..=k {
        let j = k - i;
        if i > alpha || j > beta {
            continue;
        }
        s += binom_f64(k, i)
            * powi_f64(c.0, i)
            * powi_f64(c.1, j)
            * falling(alpha, i)
            * falling(beta, j)
            * powi_f64(xs, alpha - i)
            * powi_f64(ys, beta - j);
    }
    s * libm::pow(nq, -(k as f64) / 2.0)
}

fn cis(t: f64) -> ComplexValue {
    ComplexValue::new(libm::cos(t), libm::sin(t))
}

/// One lattice-point term of the per-pair difference kernel.
///
/// All Gaussian factors are combined with the `q`-exponent before
/// exponentiating: for `xy <= 0` the sign parts of the two kernels cancel
/// exactly and the remaining exponent is `-2 pi v M_c(x, y) <= 0`, so the
/// growing directions of the indefinite form never reach `exp`.
#[allow(clippy::too_many_arguments)]
fn pair_term(
    ctx: &PairCtx,
    k: u32,
    alpha: u32,
    beta: u32,
    x: f64,
    y: f64,
    tau_re: f64,
    v: f64,
    sv: f64,
    herm: &[f64],
) -> ComplexValue {
    let xs = x * sv;
    let ys = y * sv;
    let e_q = -2.0 * PI * v * x * y;
    let mut factor = 0.0;
    if k == 0 {
        let mono = powi_f64(xs, alpha) * powi_f64(ys, beta);
        if mono != 0.0 {
            let s0 = sgn(b1(ctx.c0, xs, ys));
            let s1 = sgn(b1(ctx.c1, xs, ys));
            // The sign parts differ only between the cone lines, where
            // `x y >= 0`; there `e_q <= 0` and the bare exponential is safe.
            if s0 != s1 {
                factor += (s0 - s1) * mono * libm::exp(e_q);
            }
            // Error-function tails `-sgn(z) beta(z^2)` of each negative cone.
            if ctx.class0 == ConeClass::Negative {
                let z = b1(ctx.c0, xs, ys) / libm::sqrt(ctx.nq0);
                factor -= sgn(z) * beta_scaled(z) * mono * libm::exp(-PI * z * z + e_q);
            }
            if ctx.class1 == ConeClass::Negative {
                let z = b1(ctx.c1, xs, ys) / libm::sqrt(ctx.nq1);
                factor += sgn(z) * beta_scaled(z) * mono * libm::exp(-PI * z * z + e_q);
            }
        }
    } else {
        if ctx.class0 == ConeClass::Negative {
            let z = b1(ctx.c0, xs, ys) / libm::sqrt(ctx.nq0);
            factor += 2.0
                * poly_eval(herm, z)
                * mono_deriv(ctx.c0, ctx.nq0, k, alpha, beta, xs, ys)
                * libm::exp(-PI * z * z + e_q);
        }
        if ctx.class1 == ConeClass::Negative {
            let z = b1(ctx.c1, xs, ys) / libm::sqrt(ctx.nq1);
            factor -= 2.0
                * poly_eval(herm, z)
                * mono_deriv(ctx.c1, ctx.nq1, k, alpha, beta, xs, ys)
                * libm::exp(-PI * z * z + e_q);
        }
    }
    if factor == 0.0 {
        return ComplexValue::new(0.0, 0.0);
    }
    let phase = 2.0 * PI * (tau_re * x * y + x * ctx.by + y * ctx.bx);
    factor * cis(phase)
}

/// Minimum outer scan extent: Gaussian majorant radius over the negative
/// cones, and the linear-decay extent set by the lattice distance from the
/// axis for cusp kernels, both adjusted for the polynomial degree.
fn outer_extent_floor(ctx: &PairCtx, deg_adj: f64, v: f64, cut: f64, refined: bool) -> i64 {
    let l = libm::log(1.0 / cut.max(1e-300));
    let mut floor = 4.0f64;
    let mut lambda = f64::INFINITY;
    for (class, c) in [(ctx.class0, ctx.c0), (ctx.class1, ctx.c1)] {
        if class == ConeClass::Negative {
            lambda = lambda.min((-c.1 / (2.0 * c.0)).min(-c.0 / (2.0 * c.1)));
        }
    }
    if lambda.is_finite() && lambda > 0.0 {
        let mut r = 2.0f64;
        for _ in 0..30 {
            r = libm::sqrt((l + deg_adj * libm::log(1.0 + r)) / (2.0 * PI * v * lambda));
        }
        floor = floor.max(r);
    }
    if ctx.class0 == ConeClass::Cusp || ctx.class1 == ConeClass::Cusp {
        let dy = dist_to_int(ctx.ay);
        if dy > 1e-9 {
            let mut r = 2.0f64;
            for _ in 0..30 {
                r = (l + deg_adj * libm::log(1.0 + r)) / (2.0 * PI * v * dy);
            }
            floor = floor.max(r);
        }
    }
    if refined {
        floor *= 1.3;
    }
    (libm::ceil(floor) as i64).min(MAX_STEPS)
}

#[allow(clippy::too_many_arguments)]
fn line_sum(
    ctx: &PairCtx,
    x: f64,
    k: u32,
    alpha: u32,
    beta: u32,
    tau_re: f64,
    v: f64,
    sv: f64,
    herm: &[f64],
    cut_point: f64,
    need: u32,
    min_inner: i64,
) -> Result<ComplexValue> {
    let mut total = ComplexValue::new(0.0, 0.0);
    for dir in [1i64, -1] {
        let mut step: i64 = if dir > 0 { 0 } else { 1 };
        let mut consec = 0u32;
        loop {
            let y = ctx.ay + (dir * step) as f64;
            let t = pair_term(ctx, k, alpha, beta, x, y, tau_re, v, sv, herm);
            total += t;
            if t.norm() < cut_point {
                consec += 1;
            } else {
                consec = 0;
            }
            if consec >= need && step >= min_inner {
                break;
            }
            step += 1;
            if step > MAX_STEPS {
                return Err(Error::ConvergenceFailure { what: "pair lattice sum" });
            }
        }
    }
    Ok(total)
}

/// Adaptively truncated two-dimensional sum of the pair-difference kernel.
fn pair_sum(
    ctx: &PairCtx,
    k: u32,
    alpha: u32,
    beta: u32,
    tau: ComplexValue,
    tol_pair: f64,
    refined: bool,
) -> Result<ComplexValue> {
    if ctx.same_cones {
        return Ok(ComplexValue::new(0.0, 0.0));
    }
    if k > 0 && ctx.class0 == ConeClass::Cusp && ctx.class1 == ConeClass::Cusp {
        return Ok(ComplexValue::new(0.0, 0.0));
    }
    let v = tau.im;
    let sv = libm::sqrt(v);
    let herm = if k >= 1 { gaussian_factor_poly(k) } else { Vec::new() };
    let scale = if refined { 1.0 / 64.0 } else { 1.0 };
    let cut_point = tol_pair * 1e-4 * scale;
    let cut_line = tol_pair * 1e-3 * scale;
    let need: u32 = if refined { 7 } else { 5 };
    let min_inner: i64 = if refined { 12 } else { 8 };
    let deg_adj = (alpha + beta + k) as f64 + 4.0;
    let rmin_x = outer_extent_floor(ctx, deg_adj, v, cut_line, refined);
    let mut total = ComplexValue::new(0.0, 0.0);
    for dir in [1i64, -1] {
        let mut step: i64 = if dir > 0 { 0 } else { 1 };
        let mut consec = 0u32;
        loop {
            let x = ctx.ax + (dir * step) as f64;
            let line = line_sum(ctx, x, k, alpha, beta, tau.re, v, sv, &herm, cut_point, need, min_inner)?;
            total += line;
            if line.norm() < cut_line {
                consec += 1;
            } else {
                consec = 0;
            }
            if consec >= need && step >= rmin_x {
                break;
            }
            step += 1;
            if step > MAX_STEPS {
                return Err(Error::ConvergenceFailure { what: "pair lattice sum" });
            }
        }
    }
    Ok(total)
}

/// Factorised theta sum shared by [`theta_eval`] and [`f2_direct_eval`]:
/// for each weight monomial and derivative multi-index the full lattice sum
/// splits into a product of per-pair difference-kernel sums, evaluated twice
/// (normal and refined cutoffs) and compared as an internal convergence check.
fn factored_theta(
    ctxs: &[PairCtx],
    f: &MPoly,
    degree: u32,
    tau: ComplexValue,
    tol_eff: f64,
    what: &'static str,
) -> Result<ComplexValue> {
    let m = ctxs.len();
    let v = tau.im;
    let tol_pair = tol_eff * 1e-2;
    let monos: Vec<(Vec<u32>, f64)> =
        f.terms().map(|(e, c)| (e.to_vec(), rational_to_f64(c))).collect();
    if monos.is_empty() {
        return Ok(ComplexValue::new(0.0, 0.0));
    }
    let mut cache: BTreeMap<(usize, u32, u32, u32), (ComplexValue, ComplexValue)> = BTreeMap::new();
    let mut tot_base = ComplexValue::new(0.0, 0.0);
    let mut tot_ref = ComplexValue::new(0.0, 0.0);
    for (exps, fc) in &monos {
        let ab: Vec<(u32, u32)> = (0..m).map(|j| (exps[j], exps[m + j])).collect();
        let caps: Vec<u32> = (0..m)
            .map(|j| {
                if ctxs[j].class0 == ConeClass::Cusp && ctxs[j].class1 == ConeClass::Cusp {
                    0
                } else {
                    ab[j].0 + ab[j].1
                }
            })
            .collect();
        let mut kv = vec![0u32; m];
        'odometer: loop {
            let mut c_base = ComplexValue::new(*fc, 0.0);
            let mut c_ref = c_base;
            for j in 0..m {
                let key = (j, kv[j], ab[j].0, ab[j].1);
                let (ub, ur) = match cache.get(&key) {
                    Some(&pair) => pair,
                    None => {
                        let ub = pair_sum(&ctxs[j], kv[j], ab[j].0, ab[j].1, tau, tol_pair, false)?;
                        let ur = pair_sum(&ctxs[j], kv[j], ab[j].0, ab[j].1, tau, tol_pair, true)?;
                        cache.insert(key, (ub, ur));
                        (ub, ur)
                    }
                };
                let cf = k_coeff(kv[j]);
                c_base = c_base * ub * cf;
                c_ref = c_ref * ur * cf;
            }
            tot_base += c_base;
            tot_ref += c_ref;
            let mut idx = 0;
            loop {
                if idx == m {
                    break 'odometer;
                }
                if kv[idx] < caps[idx] {
                    kv[idx] += 1;
                    break;
                }
                kv[idx] = 0;
                idx += 1;
            }
        }
    }
    let vpow = libm::pow(v, -(degree as f64) / 2.0);
    let base = tot_base * vpow;
    let refined = tot_ref * vpow;
    if !refined.re.is_finite() || !refined.im.is_finite() {
        return Err(Error::ConvergenceFailure { what });
    }
    if (base - refined).norm() > tol_eff {
        return Err(Error::ConvergenceFailure { what });
    }
    Ok(refined)
}

/// Evaluates the indefinite theta function attached to `spec` at `tau` in the
/// upper half-plane, to absolute accuracy `tol` (floored at `1e-12`).
///
/// The lattice sum is regrouped into per-pair two-dimensional sums of the
/// cone-difference kernel (see the module documentation); each evaluation is
/// repeated with tightened truncation, and a discrepancy above `tol` raises
/// [`Error::ConvergenceFailure`] rather than returning an unreliable value.
pub fn theta_eval(spec: &ThetaSpec, tau: ComplexValue, tol: f64) -> Result<ComplexValue> {
    if !(tau.im > 0.0) || !tau.re.is_finite() {
        return Err(Error::NonPositiveImaginaryPart);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidThetaSpec { reason: "tolerance must be positive" });
    }
    let tol_eff = tol.max(1e-12);
    let m = spec.m;
    let ctxs: Vec<PairCtx> = (0..m)
        .map(|j| {
            PairCtx::from_cones(
                &spec.cones0[j],
                &spec.cones1[j],
                spec.a[j],
                spec.a[m + j],
                spec.b[j],
                spec.b[m + j],
            )
        })
        .collect();
    factored_theta(&ctxs, &spec.f, spec.degree, tau, tol_eff, "theta lattice sum")
}

// ---------------------------------------------------------------------------
// The triangular-number theta function
// ---------------------------------------------------------------------------

/// `q^e` for real exponent `e` and `q = e^{2 pi i tau}`.
fn q_power(tau: ComplexValue, e: f64) -> ComplexValue {
    libm::exp(-2.0 * PI * tau.im * e) * cis(2.0 * PI * tau.re * e)
}

/// The half-integer Gaussian sum
/// `theta_D(tau) = (1/2) sum_{n in 1/2 + Z} q^{n^2 / 4}
///              = sum_{j >= 0} q^{(2j+1)^2 / 16}`,
/// truncated once the tail is below `1e-14`.
pub fn theta_triangle_eval(tau: ComplexValue) -> Result<ComplexValue> {
    if !(tau.im > 0.0) || !tau.re.is_finite() {
        return Err(Error::NonPositiveImaginaryPart);
    }
    let mut acc = ComplexValue::new(0.0, 0.0);
    let mut j: u64 = 0;
    loop {
        let e = ((2 * j + 1) * (2 * j + 1)) as f64 / 16.0;
        let term = q_power(tau, e);
        acc += term;
        if term.norm() < 1e-18 && j >= 4 {
            break;
        }
        j += 1;
        if j > 1_000_000 {
            return Err(Error::ConvergenceFailure { what: "triangular theta sum" });
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Sign-kernel specs and the direct second-family sum
// ---------------------------------------------------------------------------

/// The two cusp vectors `(0, 1)` and `(-1, 0)` whose sign kernels weight the
/// full lattice by `prod_j (sgn(x_j) + sgn(y_j))`.
pub fn cusp_pair() -> (ConeVector, ConeVector) {
    (ConeVector::from_ints(0, 1), ConeVector::from_ints(-1, 0))
}

/// All-cusp theta spec with characteristic `a = (1/2, ..., 1/2)`, `b = 0`,
/// and the requested spherical weight family; its lattice sum reproduces the
/// signed full-lattice form of the first/third orthant families.  The second
/// family needs a shifted characteristic and is built by
/// [`f2_shifted_spec`].
pub fn sign_kernel_spec(family: SphericalFamily, m: usize) -> Result<ThetaSpec> {
    if family == SphericalFamily::F2 {
        return Err(Error::InvalidThetaSpec {
            reason: "the second family sits on an integer x-lattice; use the shifted spec",
        });
    }
    let f = spherical_f(family, m)?;
    let (s0, s1) = cusp_pair();
    let a = vec![0.5; 2 * m];
    let b = vec![0.0; 2 * m];
    ThetaSpec::new(&a, &b, &vec![s0; m], &vec![s1; m], &f)
}

/// All-cusp theta spec for the second spherical family with characteristic
/// `a = (eps, ..., eps, 1/2, ..., 1/2)` and `b = 0`; valid for `0 < eps < 1`.
pub fn f2_shifted_spec(m: usize, eps: f64) -> Result<ThetaSpec> {
    if !(eps > 0.0) || !(eps < 1.0) {
        return Err(Error::InvalidThetaSpec { reason: "the x-lattice shift must lie strictly between 0 and 1" });
    }
    let f = spherical_f(SphericalFamily::F2, m)?;
    let (s0, s1) = cusp_pair();
    let mut a = vec![eps; m];
    a.extend(vec![0.5; m]);
    let b = vec![0.0; 2 * m];
    ThetaSpec::new(&a, &b, &vec![s0; m], &vec![s1; m], &f)
}

/// Direct evaluation of the limiting signed lattice sum of the second
/// spherical family,
/// `sum_{x in Z^m, y in (1/2 + Z)^m} prod_j (sgn(x_j) + sgn(y_j))
///  f_2(x, y) q^{sum_j x_j y_j}`,
/// where the `x_j = 0` rows vanish through the cubed-variable factors of the
/// weight.  This is the target of the shifted-characteristic limit checked by
/// [`check_f2_limit`].
pub fn f2_direct_eval(m: usize, tau: ComplexValue) -> Result<ComplexValue> {
    if !(tau.im > 0.0) || !tau.re.is_finite() {
        return Err(Error::NonPositiveImaginaryPart);
    }
    let f = spherical_f(SphericalFamily::F2, m)?;
    let degree = (2 * m * m + m) as u32;
    let (s0, s1) = cusp_pair();
    let ctxs: Vec<PairCtx> =
        (0..m).map(|_| PairCtx::from_cones(&s0, &s1, 0.0, 0.5, 0.0, 0.0)).collect();
    factored_theta(&ctxs, &f, degree, tau, 1e-12, "direct signed lattice sum")
}

// ---------------------------------------------------------------------------
// Transformation and limit checks
// ---------------------------------------------------------------------------

fn q_m_value(x: &[f64], m: usize) -> f64 {
    (0..m).map(|j| x[j] * x[m + j]).sum()
}

fn b_m_value(x: &[f64], y: &[f64], m: usize) -> f64 {
    (0..m).map(|j| x[j] * y[m + j] + x[m + j] * y[j]).sum()
}

fn cpow_int(z: ComplexValue, n: u32) -> ComplexValue {
    let mut acc = ComplexValue::new(1.0, 0.0);
    let mut base = z;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

fn require_negative_cones(spec: &ThetaSpec, reason: &'static str) -> Result<()> {
    let all = spec
        .cones0
        .iter()
        .chain(spec.cones1.iter())
        .all(|c| c.class() == ConeClass::Negative);
    if all {
        Ok(())
    } else {
        Err(Error::InvalidThetaSpec { reason })
    }
}

/// Finite-difference residual of the eigenvalue equation
/// `(E - Delta_m / 4 pi) p = d p` satisfied by the smooth kernel, at `x`:
/// the Euler operator and the paired Laplacian are applied to [`p_eval`] by
/// second-order central differences with step `1e-4`.
pub fn check_vigneras(spec: &ThetaSpec, x: &[f64]) -> Result<f64> {
    let m = spec.m;
    if x.len() != 2 * m {
        return Err(Error::PointLengthMismatch { expected: 2 * m, got: x.len() });
    }
    require_negative_cones(spec, "the eigenvalue check requires smooth (negative-cone) kernels")?;
    let h = 1e-4;
    let p0 = p_eval(spec, x)?;
    let mut euler = 0.0;
    let mut pt = x.to_vec();
    for i in 0..2 * m {
        pt[i] = x[i] + h;
        let up = p_eval(spec, &pt)?;
        pt[i] = x[i] - h;
        let dn = p_eval(spec, &pt)?;
        pt[i] = x[i];
        euler += x[i] * (up - dn) / (2.0 * h);
    }
    let mut lap = 0.0;
    for j in 0..m {
        let mut corner = |sx: f64, sy: f64| -> Result<f64> {
            pt[j] = x[j] + sx * h;
            pt[m + j] = x[m + j] + sy * h;
            let val = p_eval(spec, &pt);
            pt[j] = x[j];
            pt[m + j] = x[m + j];
            val
        };
        let mixed = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
            + corner(-1.0, -1.0)?)
            / (4.0 * h * h);
        lap += 2.0 * mixed;
    }
    let resid = euler - lap / (4.0 * PI) - spec.degree as f64 * p0;
    Ok(libm::fabs(resid))
}

/// Residual `|theta_{a,b}(-1/tau) - (-tau)^{m+d} e^{2 pi i B_m(a,b)}
/// theta_{-b,a}(tau)|`, both sides via [`theta_eval`].
#[allow(non_snake_case)]
pub fn check_transform_S(spec: &ThetaSpec, tau: ComplexValue) -> Result<f64> {
    require_negative_cones(spec, "the inversion law is checked for smooth kernels only")?;
    if !(tau.im > 0.0) || !tau.re.is_finite() {
        return Err(Error::NonPositiveImaginaryPart);
    }
    let lhs = theta_eval(spec, -1.0 / tau, TOL_CHECK)?;
    let neg_b: Vec<f64> = spec.b.iter().map(|t| -t).collect();
    let swapped = ThetaSpec::new(&neg_b, &spec.a, &spec.cones0, &spec.cones1, &spec.f)?;
    let phase = cis(2.0 * PI * b_m_value(&spec.a, &spec.b, spec.m));
    let rhs = cpow_int(-tau, spec.m as u32 + spec.degree) * phase * theta_eval(&swapped, tau, TOL_CHECK)?;
    Ok((lhs - rhs).norm())
}

/// Residual `|theta_{a,b}(tau + 1) - e^{-2 pi i Q_m(a)} theta_{a,a+b}(tau)|`.
#[allow(non_snake_case)]
pub fn check_transform_T(spec: &ThetaSpec, tau: ComplexValue) -> Result<f64> {
    require_negative_cones(spec, "the shift law is checked for smooth kernels only")?;
    if !(tau.im > 0.0) || !tau.re.is_finite() {
        return Err(Error::NonPositiveImaginaryPart);
    }
    let lhs = theta_eval(spec, tau + 1.0, TOL_CHECK)?;
    let shifted_b: Vec<f64> = (0..2 * spec.m).map(|i| spec.a[i] + spec.b[i]).collect();
    let shifted = ThetaSpec::new(&spec.a, &shifted_b, &spec.cones0, &spec.cones1, &spec.f)?;
    let phase = cis(-2.0 * PI * q_m_value(&spec.a, spec.m));
    let rhs = phase * theta_eval(&shifted, tau, TOL_CHECK)?;
    Ok((lhs - rhs).norm())
}

/// Residuals `|theta^{c(t)}(tau) - theta^{c}(tau)|` along a sequence of
/// offsets `t`, where every cusp vector `c` of the spec is deformed to
/// `c(t) = c + t c'` (the negative-cone direction `c'` defaults to
/// `(-1, 1)` in callers).  A zero offset contributes an exact `0` residual.
pub fn check_cusp_limit(
    spec: &ThetaSpec,
    c_prime: &ConeVector,
    tau: ComplexValue,
    ts: &[BigRational],
) -> Result<Vec<f64>> {
    if c_prime.class() != ConeClass::Negative {
        return Err(Error::InvalidConeClass);
    }
    let base = theta_eval(spec, tau, TOL_LIMIT)?;
    let mut out = Vec::with_capacity(ts.len());
    for t in ts {
        if t < &BigRational::zero() {
            return Err(Error::InvalidThetaSpec { reason: "cone offsets must be nonnegative" });
        }
        if t.is_zero() {
            out.push(0.0);
            continue;
        }
        let deform = |c: &ConeVector| -> ConeVector {
            if c.class() == ConeClass::Cusp {
                c.offset_by(t, c_prime)
            } else {
                c.clone()
            }
        };
        let c0: Vec<ConeVector> = spec.cones0.iter().map(deform).collect();
        let c1: Vec<ConeVector> = spec.cones1.iter().map(deform).collect();
        let moved = ThetaSpec::new(&spec.a, &spec.b, &c0, &c1, &spec.f)?;
        let val = theta_eval(&moved, tau, TOL_LIMIT)?;
        out.push((val - base).norm());
    }
    Ok(out)
}

/// Residuals `|theta_{a' + eps}(tau) - F2-direct(tau)|` for each shift in
/// `eps`, where `a' = (0, ..., 0, 1/2, ..., 1/2)` and the shift moves every
/// `x`-coordinate.  The target is the direct signed sum of
/// [`f2_direct_eval`]; the unshifted characteristic itself violates the
/// cusp-kernel lattice condition, which is why the family is reached by this
/// limit instead of a single evaluation.
pub fn check_f2_limit(m: usize, tau: ComplexValue, eps: &[f64]) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::NonPositiveArgument { name: "m", value: 0 });
    }
    let target = f2_direct_eval(m, tau)?;
    let mut out = Vec::with_capacity(eps.len());
    for &e in eps {
        let spec = f2_shifted_spec(m, e)?;
        let val = theta_eval(&spec, tau, TOL_LIMIT)?;
        out.push((val - target).norm());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The closed form behind error_E_deriv starts at `H_0 = 1` and each step
    /// is `H' - 2 pi z H`, so `H_1 = -2 pi z` and
    /// `H_2 = -2 pi + 4 pi^2 z^2`.
    #[test]
    fn gaussian_factor_polys() {
        assert_eq!(gaussian_factor_poly(1), vec![1.0]);
        assert_eq!(gaussian_factor_poly(2), vec![0.0, -2.0 * PI]);
        assert_eq!(gaussian_factor_poly(3), vec![-2.0 * PI, 0.0, 4.0 * PI * PI]);
    }

    /// The evaluated closed-form monomial derivative must match the exact
    /// polynomial route through `directional_derivative`.
    #[test]
    fn mono_deriv_matches_polynomial_route() {
        let c = ConeVector::from_ints(-1, 2);
        let (cf, nq) = (c.as_f64(), 2.0);
        // (x, y) |-> x^3 y^2, twice differentiated along c, at (0.7, -1.3).
        let m = 1usize;
        let mono = MPoly::monomial(m, vec![3, 2], BigRational::from_integer(1.into()));
        let once = directional_derivative(&c, 1, &mono).unwrap();
        let twice = directional_derivative(&c, 1, &once.poly).unwrap();
        let pt = [0.7, -1.3];
        let exact = mp_eval_f64(&twice.poly, &pt).unwrap() / nq;
        let closed = mono_deriv(cf, nq, 2, 3, 2, 0.7, -1.3);
        assert!(
            (exact - closed).abs() < 1e-12,
            "closed-form directional derivative mismatch: {exact} vs {closed}"
        );
    }

    /// beta_scaled is the Gaussian-normalised tail; spot-check against the
    /// direct product in the safe range and positivity far out.
    #[test]
    fn beta_scaled_matches_direct_product() {
        for z in [0.0, 0.4, 1.0, 2.5, 6.0] {
            let direct = beta_comp(z * z).unwrap() * libm::exp(PI * z * z);
            assert!((beta_scaled(z) - direct).abs() < 1e-12 * (1.0 + direct));
        }
        assert!(beta_scaled(40.0) > 0.0 && beta_scaled(40.0) < 1.0);
    }
}
