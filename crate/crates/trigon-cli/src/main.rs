//! `trigon` — verify triangular-number q-series identities exactly and the
//! indefinite-theta transformation laws numerically.
//!
//! Subcommands:
//!   * `verify-identity <name>` compares both sides of one identity
//!     coefficientwise as exact rational q-series;
//!   * `verify-analytic <check>` runs one numeric check over the built-in
//!     spec matrix and reports the largest residual;
//!   * `report-all` runs the whole matrix and prints a summary table,
//!     optionally writing all reports as one JSON document.
//!
//! Exit codes: 0 when every verification passed, 1 when a verification ran
//! and failed, 2 on usage errors (unknown names, impossible parameters).
//! The JSON report schema is documented in `docs/report-schema.md`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use trigon_cli::{
    emit_report, emit_reports, parse_tau, render_human, render_table, resolve_identity_m,
    resolve_order, run_analytic, run_identity, run_report_all, AnalyticCheck, AnalyticOptions,
    CliError, IdentityName, Order,
};

#[derive(Parser)]
#[command(
    name = "trigon",
    version,
    about = "Verifier for triangular-number q-series identities and indefinite-theta transformation laws",
    after_help = "Orders may be given in 1/16-units of q (--order) or as natural q-powers \
                  (--order-q); reports echo both gradings.  Set TRIGON_THREADS to cap the \
                  worker count of report-all.  JSON schema: docs/report-schema.md."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare both sides of one exact identity coefficientwise.
    VerifyIdentity {
        /// Identity to verify.
        #[arg(value_enum)]
        name: IdentityName,
        /// Rank parameter m; rank-free identities reject this flag.
        #[arg(long)]
        m: Option<usize>,
        /// Truncation order in 1/16-units of q (e.g. 800 = q^50).
        #[arg(long, conflicts_with = "order_q")]
        order: Option<i64>,
        /// Truncation order as a natural q-power (e.g. 50 = 800 units).
        #[arg(long)]
        order_q: Option<i64>,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run one numeric transformation/limit check over the built-in matrix.
    VerifyAnalytic {
        /// Check to run.
        #[arg(value_enum)]
        check: AnalyticCheck,
        /// Restrict the matrix to one rank (1 or 2).
        #[arg(long)]
        m: Option<usize>,
        /// Upper-half-plane sample point, e.g. `i`, `2i`, or `0.3+0.9i`.
        #[arg(long)]
        tau: Option<String>,
        /// Residual tolerance (defaults depend on the check).
        #[arg(long)]
        tol: Option<f64>,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run every identity and analytic check; print a summary table.
    ReportAll {
        /// Override every identity's truncation order, in 1/16-units.
        #[arg(long, conflicts_with = "order_q")]
        order: Option<i64>,
        /// Override every identity's truncation order, as a q-power.
        #[arg(long)]
        order_q: Option<i64>,
        /// Also write all reports as one JSON document to this path.
        #[arg(long)]
        json_path: Option<PathBuf>,
    },
}

fn main() {
    match run(Cli::parse()) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::VerifyIdentity { name, m, order, order_q, json } => {
            let m = resolve_identity_m(name, m)?;
            let order = resolve_order(order, order_q, name.default_order(m))?;
            let report = run_identity(name, m, order)?;
            if json {
                println!("{}", emit_report(&report));
            } else {
                print!("{}", render_human(&report));
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::VerifyAnalytic { check, m, tau, tol, json } => {
            let tau = tau.as_deref().map(parse_tau).transpose()?;
            let report = run_analytic(check, &AnalyticOptions { m, tau, tol })?;
            if json {
                println!("{}", emit_report(&report));
            } else {
                print!("{}", render_human(&report));
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::ReportAll { order, order_q, json_path } => {
            let order_units = match (order, order_q) {
                (None, None) => None,
                (u, q) => {
                    // Validate through the shared resolver; the default is
                    // never used because at least one flag is set.
                    Some(resolve_order(u, q, Order::from_units(1)?)?.units())
                }
            };
            let reports = run_report_all(order_units);
            print!("{}", render_table(&reports));
            if let Some(path) = &json_path {
                std::fs::write(path, emit_reports(&reports) + "\n")
                    .map_err(|e| CliError(format!("cannot write {}: {e}", path.display())))?;
                println!("wrote {} reports to {}", reports.len(), path.display());
            }
            Ok(if reports.iter().all(|r| r.passed()) { 0 } else { 1 })
        }
    }
}
