//! Integration tests for the `trigon` binary and the report JSON contract:
//! spawned-process checks of the exit-code policy (0 pass / 1 mismatch /
//! 2 usage), the dual order gradings, the fault-injection hook, and a
//! property test that reports survive a JSON round-trip unchanged.

use std::collections::BTreeMap;
use std::process::{Command, Output};

use proptest::prelude::*;
use trigon_cli::{
    emit_report, emit_reports, parse_report, parse_reports, ReportDetail, Status,
    VerificationReport, FAULT_ENV, THREADS_ENV,
};

/// Runs the built binary with a clean fault-hook environment.
fn trigon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trigon"))
        .args(args)
        .env_remove(FAULT_ENV)
        .output()
        .expect("binary must spawn")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

// ---------------------------------------------------------------------------
// verify-identity behaviour
// ---------------------------------------------------------------------------

#[test]
fn identity_pass_exits_zero_and_echoes_both_gradings() {
    let out = trigon(&["verify-identity", "legendre", "--order-q", "30", "--json"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let report = parse_report(&stdout_of(&out)).expect("stdout must be one JSON report");
    assert_eq!(report.name, "legendre");
    assert_eq!(report.status, Status::Pass);
    assert_eq!(report.detail, None);
    assert_eq!(report.parameters.get("order_q").map(String::as_str), Some("30"));
    assert_eq!(report.parameters.get("order_units").map(String::as_str), Some("480"));
}

#[test]
fn identity_accepts_orders_in_sixteenth_units() {
    // 320 units = q^20; the leading coefficients of the rank-1 first orthant
    // sum are the fourth-power triangular counts 1, 4, 6, 8, 13.
    let out = trigon(&["verify-identity", "zagier1", "--m", "1", "--order", "320", "--json"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let report = parse_report(&stdout_of(&out)).expect("stdout must be one JSON report");
    assert_eq!(report.status, Status::Pass);
    assert_eq!(report.parameters.get("order_units").map(String::as_str), Some("320"));
    assert_eq!(report.parameters.get("order_q").map(String::as_str), Some("20"));
    assert_eq!(
        report.parameters.get("leading_coefficients").map(String::as_str),
        Some("1, 4, 6, 8, 13")
    );
}

#[test]
fn gl_outside_its_hypothesis_is_a_usage_error() {
    let out = trigon(&["verify-identity", "gl", "--m", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("odd rank m >= 3"),
        "stderr should state the odd-rank hypothesis: {}",
        stderr_of(&out)
    );
    let out = trigon(&["verify-identity", "gl", "--m", "3"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
}

#[test]
fn usage_errors_exit_two() {
    // Unknown identity name (rejected by the argument parser).
    let out = trigon(&["verify-identity", "no-such-identity"]);
    assert_eq!(out.status.code(), Some(2));
    // Both order gradings at once.
    let out = trigon(&["verify-identity", "legendre", "--order", "16", "--order-q", "1"]);
    assert_eq!(out.status.code(), Some(2));
    // A rank flag on a rank-free identity.
    let out = trigon(&["verify-identity", "legendre", "--m", "1"]);
    assert_eq!(out.status.code(), Some(2));
    // A tau on the kernel-only differential check.
    let out = trigon(&["verify-analytic", "vigneras", "--tau", "i"]);
    assert_eq!(out.status.code(), Some(2));
    // An unparsable tau.
    let out = trigon(&["verify-analytic", "transform-S", "--tau", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupted_prefactor_hook_fails_at_the_leading_power() {
    let out = Command::new(env!("CARGO_BIN_EXE_trigon"))
        .args(["verify-identity", "legendre", "--json"])
        .env(FAULT_ENV, "1")
        .output()
        .expect("binary must spawn");
    assert_eq!(out.status.code(), Some(1), "corrupted run must exit 1");
    let report = parse_report(&stdout_of(&out)).expect("stdout must be one JSON report");
    assert_eq!(report.status, Status::Fail);
    assert_eq!(
        report.detail,
        Some(ReportDetail::FirstMismatch {
            exponent_units: 16,
            lhs: "2".into(),
            rhs: "1".into(),
        }),
        "doubling the product side must first show at q^1 = 16 units"
    );
}

// ---------------------------------------------------------------------------
// verify-analytic behaviour
// ---------------------------------------------------------------------------

#[test]
fn analytic_checks_pass_with_documented_flags() {
    let out = trigon(&["verify-analytic", "transform-S", "--m", "1", "--tau", "i", "--tol", "1e-8"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let out = trigon(&["verify-analytic", "theta-triangle", "--json"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let report = parse_report(&stdout_of(&out)).expect("stdout must be one JSON report");
    match report.detail {
        Some(ReportDetail::MaxResidual { max_residual }) => {
            assert!(max_residual < 1e-10, "three displays must hold to 1e-10, got {max_residual}");
        }
        other => panic!("analytic reports carry a residual, got {other:?}"),
    }
}

#[test]
fn analytic_residual_above_tolerance_exits_one() {
    // An absurd tolerance below machine precision cannot be met.
    let out = trigon(&["verify-analytic", "theta-triangle", "--tol", "1e-20", "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let report = parse_report(&stdout_of(&out)).expect("stdout must be one JSON report");
    assert_eq!(report.status, Status::Fail);
    assert!(report.detail.is_some(), "a failing report must carry detail");
}

// ---------------------------------------------------------------------------
// report-all behaviour
// ---------------------------------------------------------------------------

#[test]
fn report_all_tiny_order_writes_a_round_tripping_document() {
    let path = std::env::temp_dir().join(format!("trigon-tiny-report-{}.json", std::process::id()));
    let path_str = path.to_str().expect("temp path is valid UTF-8");
    let out = Command::new(env!("CARGO_BIN_EXE_trigon"))
        .args(["report-all", "--order", "16", "--json-path", path_str])
        .env_remove(FAULT_ENV)
        .env(THREADS_ENV, "2")
        .output()
        .expect("binary must spawn");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = std::fs::read_to_string(&path).expect("report file must exist");
    std::fs::remove_file(&path).ok();

    let reports = parse_reports(&text).expect("file must hold a JSON report list");
    assert!(reports.len() >= 20, "the matrix has dozens of entries, got {}", reports.len());
    for r in &reports {
        assert_eq!(r.status, Status::Pass, "tiny order must pass trivially: {}", r.name);
        // Every failing report must carry detail; passing ones may.
        if r.status == Status::Fail {
            assert!(r.detail.is_some());
        }
        // Round-trip each individual report too.
        assert_eq!(parse_report(&emit_report(r)).expect("round-trip"), *r);
    }
    let summary = stdout_of(&out);
    assert!(summary.contains("summary:"), "summary table expected, got: {summary}");
}

// ---------------------------------------------------------------------------
// JSON round-trip property
// ---------------------------------------------------------------------------

fn status_strategy() -> impl Strategy<Value = Status> {
    prop_oneof![Just(Status::Pass), Just(Status::Fail)]
}

fn detail_strategy() -> impl Strategy<Value = Option<ReportDetail>> {
    let mismatch = (any::<i64>(), any::<i64>(), any::<i64>(), 1u64..1000, 1u64..1000).prop_map(
        |(e, l, r, ld, rd)| ReportDetail::FirstMismatch {
            exponent_units: e,
            lhs: format!("{l}/{ld}"),
            rhs: format!("{r}/{rd}"),
        },
    );
    let residual = any::<f64>()
        .prop_filter("JSON has no non-finite numbers", |x| x.is_finite())
        .prop_map(|max_residual| ReportDetail::MaxResidual { max_residual });
    prop_oneof![Just(None), mismatch.prop_map(Some), residual.prop_map(Some)]
}

fn report_strategy() -> impl Strategy<Value = VerificationReport> {
    (
        "[a-z][a-z0-9-]{0,15}",
        prop::collection::btree_map("[a-z_]{1,10}", "[ -~]{0,20}", 0..5),
        status_strategy(),
        detail_strategy(),
        any::<u64>(),
    )
        .prop_map(|(name, parameters, status, detail, elapsed_ms)| VerificationReport {
            name,
            parameters: parameters.into_iter().collect::<BTreeMap<_, _>>(),
            status,
            detail,
            elapsed_ms,
        })
}

proptest! {
    /// parse(emit(r)) = r for single reports and report lists.
    #[test]
    fn reports_round_trip_through_json(r in report_strategy(), rest in prop::collection::vec(report_strategy(), 0..4)) {
        prop_assert_eq!(&parse_report(&emit_report(&r)).unwrap(), &r);
        let mut all = vec![r];
        all.extend(rest);
        prop_assert_eq!(parse_reports(&emit_reports(&all)).unwrap(), all);
    }
}
