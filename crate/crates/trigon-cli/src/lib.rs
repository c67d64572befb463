//! Report plumbing and verification runners behind the `trigon` binary.
//!
//! This is the library half of the command-line driver.  It maps identity
//! names onto the exact q-series builders of `trigon-core`, maps analytic
//! check names onto the numeric indefinite-theta checks, times each run, and
//! packages the outcome into a serializable [`VerificationReport`].  Argument
//! parsing, rendering, and the exit-code policy live in the binary.
//!
//! Conventions shared with the core crate:
//!   * every series exponent is measured in 1/16-units of `q`, so `q^n`
//!     lives at `16 n` units; orders are accepted in either grading and the
//!     reports echo both;
//!   * rational coefficients are serialized as exact `p/q` strings (an
//!     integer prints without the `/1`), never as floating point;
//!   * numeric residuals are plain doubles.
//!
//! Environment variables (also documented in `docs/report-schema.md`):
//!   * `TRIGON_THREADS` caps the worker count used by the aggregate runner;
//!   * `TRIGON_CORRUPT_PREFACTOR` (any non-empty value) doubles the product
//!     side of the `legendre` identity — a fault-injection hook that lets
//!     tests watch a verification fail honestly.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::ValueEnum;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use trigon_core::denominator_identities::{check_stabilization, rhs_series, DenominatorFamily};
use trigon_core::indefinite_theta::{
    check_cusp_limit, check_f2_limit, check_transform_S, check_transform_T, check_vigneras,
    sign_kernel_spec, theta_triangle_eval, ComplexValue, ThetaSpec,
};
use trigon_core::lattice_identities::{
    delta_power, eisen_m2_rhs, legendre_lhs, legendre_rhs, orw12_rhs, rhs_dmm_third,
    rhs_zagier_first, rhs_zagier_second, theta_delta_power,
};
use trigon_core::polyalgebra::{spherical_f, ConeVector, MPoly, SphericalFamily};
use trigon_core::qseries::{qs_equal_upto, qs_scale, qs_shift, QSeries, UNITS_PER_Q};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "TRIGON_THREADS";

/// Environment variable enabling the legendre fault-injection hook.
pub const FAULT_ENV: &str = "TRIGON_CORRUPT_PREFACTOR";

// ---------------------------------------------------------------------------
// Report types and JSON helpers
// ---------------------------------------------------------------------------

/// Pass/fail outcome of one verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// Failure evidence or numeric figure of merit attached to a report.
///
/// Exact identity checks report the first disagreeing coefficient; numeric
/// checks report the largest residual seen (also on success, as the figure
/// of merit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReportDetail {
    /// First exponent (in 1/16-units) where the two series disagree, with
    /// both coefficients as exact rational strings.
    FirstMismatch {
        exponent_units: i64,
        lhs: String,
        rhs: String,
    },
    /// Largest residual observed across the check's sub-cases.
    MaxResidual { max_residual: f64 },
}

/// Outcome of a single named verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Identity or check name as given on the command line.
    pub name: String,
    /// Echoed parameters: rank, orders in both gradings, tolerances, and
    /// check-specific settings.  Values are strings so the map is uniform.
    pub parameters: BTreeMap<String, String>,
    /// Overall outcome; `Fail` always comes with a populated `detail`.
    pub status: Status,
    /// Failure evidence or numeric figure of merit; see [`ReportDetail`].
    pub detail: Option<ReportDetail>,
    /// Wall-clock time of the verification in milliseconds.
    pub elapsed_ms: u64,
}

impl VerificationReport {
    /// True when the run passed.
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Serializes one report as pretty-printed JSON.
pub fn emit_report(r: &VerificationReport) -> String {
    serde_json::to_string_pretty(r).expect("report serialization cannot fail")
}

/// Parses one report back from JSON.
pub fn parse_report(s: &str) -> Result<VerificationReport, serde_json::Error> {
    serde_json::from_str(s)
}

/// Serializes a report list as one pretty-printed JSON document.
pub fn emit_reports(rs: &[VerificationReport]) -> String {
    serde_json::to_string_pretty(rs).expect("report serialization cannot fail")
}

/// Parses a report list back from JSON.
pub fn parse_reports(s: &str) -> Result<Vec<VerificationReport>, serde_json::Error> {
    serde_json::from_str(s)
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Driver-level failure: bad parameters or an unexpected core-library error.
/// Both are usage-class problems (exit code 2), distinct from a verification
/// that ran and found a mismatch (exit code 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError(pub String);

impl core::fmt::Display for CliError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

impl From<trigon_core::Error> for CliError {
    fn from(e: trigon_core::Error) -> Self {
        CliError(format!("core computation failed: {e}"))
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError(msg.into())
}

// ---------------------------------------------------------------------------
// Order handling
// ---------------------------------------------------------------------------

/// Truncation order, stored in 1/16-units of `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order {
    units: i64,
}

impl Order {
    /// Order from a count of 1/16-units; must be positive.
    pub fn from_units(units: i64) -> Result<Order, CliError> {
        if units <= 0 {
            return Err(usage(format!("order must be positive, got {units} units")));
        }
        Ok(Order { units })
    }

    /// Order from a natural `q`-power; must be positive.
    pub fn from_q_power(q: i64) -> Result<Order, CliError> {
        if q <= 0 {
            return Err(usage(format!("order must be positive, got q^{q}")));
        }
        Ok(Order { units: q * UNITS_PER_Q })
    }

    /// The order in 1/16-units.
    pub fn units(&self) -> i64 {
        self.units
    }

    /// The order as an exact `q`-power string (`"50"` or `"25/2"`).
    pub fn q_power_string(&self) -> String {
        BigRational::new(BigInt::from(self.units), BigInt::from(UNITS_PER_Q)).to_string()
    }
}

/// Resolves the two order flags (at most one may be set) against a default.
pub fn resolve_order(
    units_flag: Option<i64>,
    q_flag: Option<i64>,
    default: Order,
) -> Result<Order, CliError> {
    match (units_flag, q_flag) {
        (Some(_), Some(_)) => Err(usage("give the order either in 1/16-units or in q-powers, not both")),
        (Some(u), None) => Order::from_units(u),
        (None, Some(q)) => Order::from_q_power(q),
        (None, None) => Ok(default),
    }
}

// ---------------------------------------------------------------------------
// tau parsing and formatting
// ---------------------------------------------------------------------------

/// Parses an upper-half-plane point from forms like `i`, `2i`, `0.3+0.9i`,
/// `-0.25+0.75i`, or `1.5e-1+9e-1i`.
pub fn parse_tau(s: &str) -> Result<ComplexValue, CliError> {
    let t = s.trim();
    let bad = || usage(format!("cannot parse tau from {t:?}; expected forms like i, 2i, 0.3+0.9i"));
    if t.is_empty() {
        return Err(bad());
    }
    let tau = if let Some(head) = t.strip_suffix(['i', 'I']) {
        // Split an optional real part from the imaginary coefficient at the
        // last +/- that is neither leading nor an exponent sign.
        let bytes = head.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            if (bytes[k] == b'+' || bytes[k] == b'-')
                && bytes[k - 1] != b'e'
                && bytes[k - 1] != b'E'
            {
                split = Some(k);
                break;
            }
        }
        let (re_str, im_str) = match split {
            Some(k) => (&head[..k], &head[k..]),
            None => ("0", head),
        };
        let im: f64 = match im_str {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse().map_err(|_| bad())?,
        };
        let re: f64 = re_str.parse().map_err(|_| bad())?;
        ComplexValue::new(re, im)
    } else {
        ComplexValue::new(t.parse().map_err(|_| bad())?, 0.0)
    };
    if !(tau.im > 0.0) || !tau.re.is_finite() {
        return Err(usage(format!("tau must lie in the upper half-plane, got {}", fmt_tau(tau))));
    }
    Ok(tau)
}

/// Compact `a+bi` rendering used when echoing tau values in reports.
pub fn fmt_tau(tau: ComplexValue) -> String {
    if tau.re == 0.0 {
        format!("{}i", tau.im)
    } else if tau.im < 0.0 {
        format!("{}{}i", tau.re, tau.im)
    } else {
        format!("{}+{}i", tau.re, tau.im)
    }
}

// ---------------------------------------------------------------------------
// Identity names and runners
// ---------------------------------------------------------------------------

/// The verifiable identity families, keyed by their command-line names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdentityName {
    /// `q D(q^2)^4` against the odd divisor sum `sum sigma_1(2n+1) q^{2n+1}`.
    Legendre,
    /// `q^3 D(q)^24` against the weight-12 divisor/tau bracket.
    Orw12,
    /// `q^3 D(q)^24` against the level-2 Eisenstein combination and the
    /// equivalent double lattice sum.
    EisenM2,
    /// First orthant sum: `q^{m^2/2} D(q)^{4m^2}`.
    Zagier1,
    /// Second orthant sum: `q^{m(m+1)/2} D(q)^{4m(m+1)}`.
    Zagier2,
    /// Third orthant sum: `q^{m^2/2} D(q)^{4m^2}` with the cubic weight.
    Dmm,
    /// Sign-coupled sum equal to `D(q)^{2m^2-2}` (odd `m >= 3`).
    Gl,
    /// Sign-coupled sum equal to `D(q)^{2m(m+1)}`.
    Sl,
    /// Signed full-lattice form equal to `(q^{1/16} D(q^{1/2}))^{2m(m+1)}`.
    SlTheta,
    /// Sign-coupled sum equal to `D(q)^{4m^2}`.
    Spo,
    /// Sign-coupled sum equal to `D(q)^{4m^2+4m}`.
    Spo2,
}

impl IdentityName {
    /// Command-line spelling.
    pub fn as_str(&self) -> &'static str {
        match self {
            IdentityName::Legendre => "legendre",
            IdentityName::Orw12 => "orw12",
            IdentityName::EisenM2 => "eisen-m2",
            IdentityName::Zagier1 => "zagier1",
            IdentityName::Zagier2 => "zagier2",
            IdentityName::Dmm => "dmm",
            IdentityName::Gl => "gl",
            IdentityName::Sl => "sl",
            IdentityName::SlTheta => "sl-theta",
            IdentityName::Spo => "spo",
            IdentityName::Spo2 => "spo2",
        }
    }

    /// Whether the identity takes a rank parameter `m`.
    pub fn takes_m(&self) -> bool {
        !matches!(self, IdentityName::Legendre | IdentityName::Orw12 | IdentityName::EisenM2)
    }

    /// Default rank when `--m` is not given.
    pub fn default_m(&self) -> usize {
        match self {
            IdentityName::Gl => 3,
            _ => 1,
        }
    }

    /// Default truncation order when no order flag is given.
    pub fn default_order(&self, m: usize) -> Order {
        let q = match self {
            IdentityName::Legendre => 50,
            IdentityName::Orw12 | IdentityName::EisenM2 => 40,
            IdentityName::Zagier1 => {
                if m <= 2 {
                    24
                } else {
                    12
                }
            }
            IdentityName::Zagier2 => 20,
            IdentityName::Dmm => 16,
            IdentityName::Gl => 20,
            IdentityName::Sl => {
                if m == 1 {
                    30
                } else {
                    20
                }
            }
            IdentityName::SlTheta => return Order { units: 200 },
            IdentityName::Spo | IdentityName::Spo2 => {
                if m == 1 {
                    30
                } else {
                    16
                }
            }
        };
        Order { units: q * UNITS_PER_Q }
    }
}

/// Validates `--m` for the identity: rejects the flag when the identity has
/// no rank parameter, fills in the default otherwise, and enforces the
/// `gl` hypothesis (the sign-coupled `gl` sum telescopes only for odd rank,
/// so even or small `m` lies outside the identity).
pub fn resolve_identity_m(name: IdentityName, m_flag: Option<usize>) -> Result<usize, CliError> {
    if !name.takes_m() {
        return match m_flag {
            None => Ok(0),
            Some(_) => Err(usage(format!("identity {:?} has no rank parameter m", name.as_str()))),
        };
    }
    let m = m_flag.unwrap_or_else(|| name.default_m());
    if m == 0 {
        return Err(usage("rank m must be at least 1"));
    }
    if name == IdentityName::Gl && (m < 3 || m % 2 == 0) {
        return Err(usage(format!(
            "the gl identity holds for odd rank m >= 3 only; m = {m} is outside its hypothesis"
        )));
    }
    Ok(m)
}

/// `q^{shift/16} D(q)^p` truncated at `units`, built safely even when the
/// window ends before the leading exponent.
fn shifted_power(p: u32, shift: i64, units: i64) -> QSeries {
    qs_shift(&delta_power(p, (units - shift).max(0)), shift)
}

/// Both sides of each coefficientwise comparison run for an identity, in
/// order.  Most identities are a single comparison; `eisen-m2` checks the
/// Eisenstein-combination form and the double-lattice-sum form.
fn identity_comparisons(
    name: IdentityName,
    m: usize,
    units: i64,
) -> Result<Vec<(&'static str, QSeries, QSeries)>, CliError> {
    let out = match name {
        IdentityName::Legendre => {
            let mut lhs = legendre_lhs(units);
            if std::env::var(FAULT_ENV).map(|v| !v.is_empty()).unwrap_or(false) {
                // Fault-injection hook: double the product side so the
                // verification fails at the leading coefficient.
                lhs = qs_scale(&lhs, &BigRational::from_integer(BigInt::from(2)));
            }
            vec![("odd-divisor-sum", lhs, legendre_rhs(units))]
        }
        IdentityName::Orw12 => {
            vec![("weight-12-bracket", shifted_power(24, 48, units), orw12_rhs(units)?)]
        }
        IdentityName::EisenM2 => vec![
            ("eisenstein-combination", shifted_power(24, 48, units), eisen_m2_rhs(units)?),
            ("double-lattice-sum", shifted_power(24, 48, units), rhs_zagier_second(2, units)?),
        ],
        IdentityName::Zagier1 => {
            let shift = 8 * (m * m) as i64;
            vec![(
                "first-orthant-sum",
                shifted_power((4 * m * m) as u32, shift, units),
                rhs_zagier_first(m, units)?,
            )]
        }
        IdentityName::Zagier2 => {
            let shift = 8 * (m * (m + 1)) as i64;
            vec![(
                "second-orthant-sum",
                shifted_power((4 * m * (m + 1)) as u32, shift, units),
                rhs_zagier_second(m, units)?,
            )]
        }
        IdentityName::Dmm => {
            let shift = 8 * (m * m) as i64;
            vec![(
                "third-orthant-sum",
                shifted_power((4 * m * m) as u32, shift, units),
                rhs_dmm_third(m, units)?,
            )]
        }
        IdentityName::Gl => vec![(
            "gl-sum",
            delta_power((2 * m * m - 2) as u32, units),
            rhs_series(DenominatorFamily::Gl, m, units)?,
        )],
        IdentityName::Sl => vec![(
            "sl-sum",
            delta_power((2 * m * (m + 1)) as u32, units),
            rhs_series(DenominatorFamily::Sl, m, units)?,
        )],
        IdentityName::SlTheta => vec![(
            "signed-full-lattice",
            theta_delta_power((2 * m * (m + 1)) as u32, units),
            rhs_series(DenominatorFamily::SlTheta, m, units)?,
        )],
        IdentityName::Spo => vec![(
            "spo-sum",
            delta_power((4 * m * m) as u32, units),
            rhs_series(DenominatorFamily::SpoEven, m, units)?,
        )],
        IdentityName::Spo2 => vec![(
            "spo-plus2-sum",
            delta_power((4 * m * m + 4 * m) as u32, units),
            rhs_series(DenominatorFamily::SpoPlus2, m, units)?,
        )],
    };
    Ok(out)
}

/// First up-to-five nonzero coefficients of a series, as rational strings.
fn leading_coefficients(s: &QSeries) -> String {
    let coeffs: Vec<String> = s.terms().take(5).map(|(_, c)| c.to_string()).collect();
    coeffs.join(", ")
}

/// Runs one identity verification: builds both sides as truncated series and
/// compares coefficientwise over the full window.  `m` is ignored by the
/// rank-free identities (pass the value from [`resolve_identity_m`]).
pub fn run_identity(
    name: IdentityName,
    m: usize,
    order: Order,
) -> Result<VerificationReport, CliError> {
    let start = Instant::now();
    let units = order.units();
    let mut parameters = BTreeMap::new();
    parameters.insert("order_units".into(), units.to_string());
    parameters.insert("order_q".into(), order.q_power_string());
    parameters.insert("tolerance".into(), "0".into());
    if name.takes_m() {
        parameters.insert("m".into(), m.to_string());
    }

    let mut status = Status::Pass;
    let mut detail = None;
    for (label, lhs, rhs) in identity_comparisons(name, m, units)? {
        if parameters.get("leading_coefficients").is_none() {
            parameters.insert("leading_coefficients".into(), leading_coefficients(&rhs));
        }
        let (equal, mismatch) = qs_equal_upto(&lhs, &rhs, units)?;
        if !equal {
            let mm = mismatch.expect("unequal series must report a first mismatch");
            status = Status::Fail;
            detail = Some(ReportDetail::FirstMismatch {
                exponent_units: mm.exponent_units,
                lhs: mm.lhs.to_string(),
                rhs: mm.rhs.to_string(),
            });
            parameters.insert("failed_form".into(), label.into());
            break;
        }
    }

    // The telescoping gl sum is additionally required to have stabilized:
    // enlarging its enumeration box must not change any kept coefficient.
    if name == IdentityName::Gl && status == Status::Pass {
        let stable = check_stabilization(DenominatorFamily::Gl, m, units)?;
        parameters.insert("stabilized".into(), stable.to_string());
        if !stable {
            status = Status::Fail;
            detail = Some(ReportDetail::MaxResidual { max_residual: f64::MAX });
            parameters.insert("failed_form".into(), "stabilization".into());
        }
    }

    Ok(VerificationReport {
        name: name.as_str().into(),
        parameters,
        status,
        detail,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

// ---------------------------------------------------------------------------
// Analytic checks
// ---------------------------------------------------------------------------

/// The numeric transformation/limit checks, keyed by command-line names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyticCheck {
    /// `theta(-1/tau)` against `(-tau)^{m+d} e^{2 pi i B(a,b)} theta` with
    /// swapped characteristics, over the built-in spec matrix.
    #[value(alias = "transform-S")]
    TransformS,
    /// `theta(tau+1)` against `e^{-2 pi i Q(a)} theta` with shifted `b`.
    #[value(alias = "transform-T")]
    TransformT,
    /// Finite-difference check that the weight kernel satisfies the
    /// eigen-equation of the theta differential operator, on random points.
    Vigneras,
    /// Cone deformation `c + t c'`: residuals must decrease in `t` and end
    /// below the per-rank bound.
    CuspLimit,
    /// Characteristic shift `a + eps`: residuals against the direct signed
    /// sum must decrease in `eps` and end below the per-rank bound.
    F2Limit,
    /// The triangular-number theta function's two transformation laws and
    /// its cusp value.
    ThetaTriangle,
}

impl AnalyticCheck {
    /// Command-line spelling.
    pub fn as_str(&self) -> &'static str {
        match self {
            AnalyticCheck::TransformS => "transform-s",
            AnalyticCheck::TransformT => "transform-t",
            AnalyticCheck::Vigneras => "vigneras",
            AnalyticCheck::CuspLimit => "cusp-limit",
            AnalyticCheck::F2Limit => "f2-limit",
            AnalyticCheck::ThetaTriangle => "theta-triangle",
        }
    }

    /// Every check, in report order.
    pub fn all() -> [AnalyticCheck; 6] {
        [
            AnalyticCheck::TransformS,
            AnalyticCheck::TransformT,
            AnalyticCheck::Vigneras,
            AnalyticCheck::CuspLimit,
            AnalyticCheck::F2Limit,
            AnalyticCheck::ThetaTriangle,
        ]
    }

    /// Default residual tolerance.
    pub fn default_tol(&self) -> f64 {
        match self {
            AnalyticCheck::TransformS | AnalyticCheck::TransformT => 1e-6,
            AnalyticCheck::Vigneras => 1e-4,
            // Limit checks default to the looser rank-2 bound; rank 1 is
            // additionally held to 1e-6 internally.
            AnalyticCheck::CuspLimit | AnalyticCheck::F2Limit => 1e-5,
            AnalyticCheck::ThetaTriangle => 1e-10,
        }
    }
}

/// Optional overrides for an analytic run; `None` means the built-in matrix.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyticOptions {
    /// Restrict the matrix to one rank (1 or 2).
    pub m: Option<usize>,
    /// Replace the built-in tau sample list.
    pub tau: Option<ComplexValue>,
    /// Replace the default residual tolerance.
    pub tol: Option<f64>,
}

/// The built-in smooth spec used by the transformation matrix: two distinct
/// negative cones per pair and generic characteristics.
fn matrix_spec(m: usize, f: &MPoly) -> Result<ThetaSpec, CliError> {
    let (c0, c1, a, b): (Vec<ConeVector>, Vec<ConeVector>, Vec<f64>, Vec<f64>) = match m {
        1 => (
            vec![ConeVector::from_ints(-1, 2)],
            vec![ConeVector::from_ints(-2, 1)],
            vec![0.3, 0.7],
            vec![0.1, 0.2],
        ),
        2 => (
            vec![ConeVector::from_ints(-1, 2), ConeVector::from_ints(-1, 3)],
            vec![ConeVector::from_ints(-2, 1), ConeVector::from_ints(-3, 1)],
            vec![0.3, 0.7, 0.2, 0.6],
            vec![0.1, 0.2, -0.15, 0.05],
        ),
        other => return Err(usage(format!("the built-in spec matrix covers m = 1, 2; got {other}"))),
    };
    Ok(ThetaSpec::new(&a, &b, &c0, &c1, f)?)
}

/// The weight polynomials in the matrix: the constant, the first coordinate,
/// and the first and third spherical families.
fn matrix_weights(m: usize) -> Result<Vec<(&'static str, MPoly)>, CliError> {
    Ok(vec![
        ("1", MPoly::constant(m, BigRational::one())),
        ("x1", MPoly::var_x(m, 1)?),
        ("f1", spherical_f(SphericalFamily::F1, m)?),
        ("f3", spherical_f(SphericalFamily::F3, m)?),
    ])
}

fn matrix_ms(opts: &AnalyticOptions) -> Result<Vec<usize>, CliError> {
    match opts.m {
        None => Ok(vec![1, 2]),
        Some(m @ (1 | 2)) => Ok(vec![m]),
        Some(other) => Err(usage(format!("the built-in spec matrix covers m = 1, 2; got {other}"))),
    }
}

fn matrix_taus(opts: &AnalyticOptions) -> Vec<ComplexValue> {
    match opts.tau {
        Some(tau) => vec![tau],
        None => vec![
            ComplexValue::new(0.0, 1.0),
            ComplexValue::new(0.3, 0.9),
            ComplexValue::new(-0.25, 0.75),
        ],
    }
}

/// Halving sequence `1/2, 1/4, ..., 1/2^k` as exact rationals.
fn halvings(k: u32) -> Vec<BigRational> {
    (1..=k).map(|j| BigRational::new(BigInt::one(), BigInt::from(2i64.pow(j)))).collect()
}

/// Checks that a residual sequence decreases (up to roundoff slack).
fn is_decreasing(rs: &[f64]) -> bool {
    rs.windows(2).all(|w| w[1] <= w[0] + 1e-10)
}

/// Runs one analytic check over the built-in matrix (or the overrides in
/// `opts`) and reports the largest residual seen.
pub fn run_analytic(
    check: AnalyticCheck,
    opts: &AnalyticOptions,
) -> Result<VerificationReport, CliError> {
    let start = Instant::now();
    let tol = opts.tol.unwrap_or_else(|| check.default_tol());
    if !(tol > 0.0) {
        return Err(usage("tolerance must be a positive number"));
    }
    let mut parameters = BTreeMap::new();
    parameters.insert("tolerance".into(), format!("{tol:e}"));
    let mut max_residual: f64 = 0.0;
    let mut violations: Vec<String> = Vec::new();

    match check {
        AnalyticCheck::TransformS | AnalyticCheck::TransformT => {
            let ms = matrix_ms(opts)?;
            let taus = matrix_taus(opts);
            parameters.insert("m".into(), join(&ms));
            parameters.insert("weights".into(), "1, x1, f1, f3".into());
            parameters
                .insert("taus".into(), taus.iter().map(|&t| fmt_tau(t)).collect::<Vec<_>>().join(", "));
            for &m in &ms {
                for (label, f) in matrix_weights(m)? {
                    let spec = matrix_spec(m, &f)?;
                    for &tau in &taus {
                        let r = match check {
                            AnalyticCheck::TransformS => check_transform_S(&spec, tau)?,
                            _ => check_transform_T(&spec, tau)?,
                        };
                        max_residual = max_residual.max(r);
                        if r > tol {
                            violations.push(format!("m={m} f={label} tau={}", fmt_tau(tau)));
                        }
                    }
                }
            }
        }
        AnalyticCheck::Vigneras => {
            if opts.tau.is_some() {
                return Err(usage("the vigneras check tests the weight kernel and takes no tau"));
            }
            use rand::{Rng, SeedableRng};
            let ms = matrix_ms(opts)?;
            parameters.insert("m".into(), join(&ms));
            parameters.insert("weights".into(), "1, x1, f1, f3".into());
            parameters.insert("points_per_spec".into(), "20".into());
            let mut rng = rand::rngs::StdRng::seed_from_u64(0x7516_0ECD);
            for &m in &ms {
                for (label, f) in matrix_weights(m)? {
                    let spec = matrix_spec(m, &f)?;
                    for _ in 0..20 {
                        let x: Vec<f64> = (0..2 * m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                        let r = check_vigneras(&spec, &x)?;
                        max_residual = max_residual.max(r);
                        if r > tol {
                            violations.push(format!("m={m} f={label} x={x:?}"));
                        }
                    }
                }
            }
        }
        AnalyticCheck::CuspLimit => {
            let ms = matrix_ms(opts)?;
            let tau = opts.tau.unwrap_or_else(|| ComplexValue::new(0.0, 1.0));
            let c_prime = ConeVector::from_ints(-1, 1);
            let mut ts = halvings(6);
            ts.push(BigRational::new(BigInt::from(0), BigInt::one()));
            parameters.insert("m".into(), join(&ms));
            parameters.insert("tau".into(), fmt_tau(tau));
            parameters.insert("t_sequence".into(), "1/2 .. 1/64, 0".into());
            for &m in &ms {
                let family = if m == 1 { SphericalFamily::F1 } else { SphericalFamily::F3 };
                let spec = sign_kernel_spec(family, m)?;
                let rs = check_cusp_limit(&spec, &c_prime, tau, &ts)?;
                let (zero_entry, nonzero) = rs.split_last().expect("sequence is nonempty");
                let bound = tol.min(if m == 1 { 1e-6 } else { 1e-5 });
                let last = *nonzero.last().expect("sequence is nonempty");
                max_residual = max_residual.max(last);
                if !is_decreasing(nonzero) {
                    violations.push(format!("m={m}: residuals not decreasing: {nonzero:?}"));
                }
                if last > bound {
                    violations.push(format!("m={m}: final residual {last:e} above {bound:e}"));
                }
                if *zero_entry != 0.0 {
                    violations.push(format!("m={m}: t=0 entry {zero_entry:e} not exactly zero"));
                }
            }
        }
        AnalyticCheck::F2Limit => {
            let ms = matrix_ms(opts)?;
            let tau = opts.tau.unwrap_or_else(|| ComplexValue::new(0.0, 1.0));
            let eps: Vec<f64> = (2..=9).map(|j| 0.5f64.powi(j)).collect();
            parameters.insert("m".into(), join(&ms));
            parameters.insert("tau".into(), fmt_tau(tau));
            parameters.insert("eps_sequence".into(), "1/4 .. 1/512".into());
            for &m in &ms {
                let rs = check_f2_limit(m, tau, &eps)?;
                let bound = tol.min(if m == 1 { 1e-6 } else { 1e-5 });
                let last = *rs.last().expect("sequence is nonempty");
                max_residual = max_residual.max(last);
                if !is_decreasing(&rs) {
                    violations.push(format!("m={m}: residuals not decreasing: {rs:?}"));
                }
                if last > bound {
                    violations.push(format!("m={m}: final residual {last:e} above {bound:e}"));
                }
            }
        }
        AnalyticCheck::ThetaTriangle => {
            if opts.m.is_some() {
                return Err(usage("the theta-triangle check has no rank parameter m"));
            }
            let taus = match opts.tau {
                Some(tau) => vec![tau],
                None => vec![
                    ComplexValue::new(0.0, 1.0),
                    ComplexValue::new(0.0, 2.0),
                    ComplexValue::new(0.3, 0.9),
                    ComplexValue::new(-0.25, 0.75),
                    ComplexValue::new(-1.2, 0.4),
                ],
            };
            parameters
                .insert("taus".into(), taus.iter().map(|&t| fmt_tau(t)).collect::<Vec<_>>().join(", "));
            for &tau in &taus {
                let base = theta_triangle_eval(tau)?;
                // Shift law: theta(tau + 2) = e^{i pi/4} theta(tau).
                let shifted = theta_triangle_eval(tau + 2.0)?;
                let phase = ComplexValue::new(0.0, std::f64::consts::PI / 4.0).exp();
                let r1 = (shifted - phase * base).norm();
                // Lower-triangular law:
                // theta(tau / (2 tau + 1)) = (2 tau + 1)^{1/2} theta(tau).
                let moebius = tau / (2.0 * tau + 1.0);
                let r2 = (theta_triangle_eval(moebius)? - (2.0 * tau + 1.0).sqrt() * base).norm();
                max_residual = max_residual.max(r1).max(r2);
                if r1 > tol || r2 > tol {
                    violations.push(format!("tau={}", fmt_tau(tau)));
                }
            }
            // Cusp value: (-i tau)^{-1/2} theta(-1/tau) -> 1/sqrt(2); at
            // tau = 10i the correction is far below any tolerance here.
            let tau = ComplexValue::new(0.0, 10.0);
            let val = theta_triangle_eval(-1.0 / tau)?;
            let scaled = (-ComplexValue::i() * tau).powf(-0.5) * val;
            let r3 = (scaled - ComplexValue::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm();
            max_residual = max_residual.max(r3);
            if r3 > tol {
                violations.push("cusp value at tau=10i".into());
            }
        }
    }

    let status = if violations.is_empty() { Status::Pass } else { Status::Fail };
    if !violations.is_empty() {
        parameters.insert("violations".into(), violations.join("; "));
    }
    Ok(VerificationReport {
        name: check.as_str().into(),
        parameters,
        status,
        detail: Some(ReportDetail::MaxResidual { max_residual }),
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

fn join(ms: &[usize]) -> String {
    ms.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", ")
}

// ---------------------------------------------------------------------------
// Aggregate runner
// ---------------------------------------------------------------------------

/// One entry of the aggregate matrix.
#[derive(Debug, Clone, Copy)]
enum Job {
    Identity(IdentityName, usize, Option<i64>),
    Analytic(AnalyticCheck),
}

/// Worker count: `TRIGON_THREADS` when set to a positive integer, otherwise
/// the machine's available parallelism.
pub fn thread_cap() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(Into::into).unwrap_or(1))
}

/// Runs the full verification matrix — every identity at its default order
/// (or at `order_units` when given) plus every analytic check — and returns
/// the reports in matrix order.  Independent reports run in parallel on at
/// most [`thread_cap`] workers; any unexpected core error is surfaced as a
/// failing report rather than a panic.
pub fn run_report_all(order_units: Option<i64>) -> Vec<VerificationReport> {
    let mut jobs = Vec::new();
    let identity_matrix: [(IdentityName, &[usize]); 11] = [
        (IdentityName::Legendre, &[0]),
        (IdentityName::Orw12, &[0]),
        (IdentityName::EisenM2, &[0]),
        (IdentityName::Zagier1, &[1, 2, 3]),
        (IdentityName::Zagier2, &[1, 2]),
        (IdentityName::Dmm, &[1, 2]),
        (IdentityName::Gl, &[3]),
        (IdentityName::Sl, &[1, 2]),
        (IdentityName::SlTheta, &[1, 2]),
        (IdentityName::Spo, &[1, 2]),
        (IdentityName::Spo2, &[1, 2]),
    ];
    for (name, ms) in identity_matrix {
        for &m in ms {
            jobs.push(Job::Identity(name, m, order_units));
        }
    }
    for check in AnalyticCheck::all() {
        jobs.push(Job::Analytic(check));
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<VerificationReport>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let workers = thread_cap().min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= jobs.len() {
                    break;
                }
                let report = run_job(&jobs[k]);
                *slots[k].lock().expect("report slot poisoned") = Some(report);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("report slot poisoned").expect("job completed"))
        .collect()
}

fn run_job(job: &Job) -> VerificationReport {
    let attempt = match *job {
        Job::Identity(name, m, order_units) => {
            let order = match order_units {
                Some(u) => Order::from_units(u),
                None => Ok(name.default_order(m)),
            };
            order.and_then(|o| run_identity(name, m, o))
        }
        Job::Analytic(check) => run_analytic(check, &AnalyticOptions::default()),
    };
    match attempt {
        Ok(report) => report,
        Err(e) => {
            // Built-in jobs should never error; if one does, report it as a
            // failure with the message attached instead of tearing down the
            // whole aggregate run.
            let (name, mut parameters) = match *job {
                Job::Identity(name, m, _) => {
                    let mut p = BTreeMap::new();
                    p.insert("m".into(), m.to_string());
                    (name.as_str(), p)
                }
                Job::Analytic(check) => (check.as_str(), BTreeMap::new()),
            };
            parameters.insert("error".into(), e.to_string());
            VerificationReport {
                name: name.into(),
                parameters,
                status: Status::Fail,
                detail: Some(ReportDetail::MaxResidual { max_residual: f64::MAX }),
                elapsed_ms: 0,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// One-paragraph human rendering of a report.
pub fn render_human(r: &VerificationReport) -> String {
    let mut out = String::new();
    let status = if r.passed() { "PASS" } else { "FAIL" };
    out.push_str(&format!("{}: {} ({} ms)\n", r.name, status, r.elapsed_ms));
    for (k, v) in &r.parameters {
        out.push_str(&format!("  {k}: {v}\n"));
    }
    match &r.detail {
        Some(ReportDetail::FirstMismatch { exponent_units, lhs, rhs }) => {
            let q = BigRational::new(BigInt::from(*exponent_units), BigInt::from(UNITS_PER_Q));
            out.push_str(&format!(
                "  first mismatch at {exponent_units} units = q^{q}: lhs {lhs} vs rhs {rhs}\n"
            ));
        }
        Some(ReportDetail::MaxResidual { max_residual }) => {
            out.push_str(&format!("  max residual: {max_residual:.3e}\n"));
        }
        None => {}
    }
    out
}

/// Fixed-width summary table over many reports, with a final tally line.
pub fn render_table(rs: &[VerificationReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<14} {:<4} {:<12} {:<6} {:>10}  detail\n", "name", "m", "order", "status", "elapsed"));
    for r in rs {
        let m = r.parameters.get("m").cloned().unwrap_or_else(|| "-".into());
        let order = r
            .parameters
            .get("order_q")
            .map(|q| format!("q^{q}"))
            .unwrap_or_else(|| "-".into());
        let status = if r.passed() { "pass" } else { "FAIL" };
        let detail = match &r.detail {
            Some(ReportDetail::FirstMismatch { exponent_units, lhs, rhs }) => {
                format!("first mismatch at {exponent_units} units: {lhs} vs {rhs}")
            }
            Some(ReportDetail::MaxResidual { max_residual }) => {
                format!("max residual {max_residual:.3e}")
            }
            None => "exact match".into(),
        };
        out.push_str(&format!(
            "{:<14} {:<4} {:<12} {:<6} {:>7} ms  {}\n",
            r.name, m, order, status, r.elapsed_ms, detail
        ));
    }
    let passed = rs.iter().filter(|r| r.passed()).count();
    out.push_str(&format!("summary: {passed}/{} passed\n", rs.len()));
    out
}

// ---------------------------------------------------------------------------
// Inline tests: pure helpers (the spawned-binary tests live in tests/)
// ---------------------------------------------------------------------------
