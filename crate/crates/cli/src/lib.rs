//! Command-line front end: scenario ingestion, verification, KMS solving
//! and report emission.

pub mod commands;
pub mod report;
pub mod scenario;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{Options, Outcome};
use scenario::{beta_sweep, Scenario};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Environment variable overriding the default tolerance.
pub const TOL_ENV: &str = "FELLKMS_TOL";

#[derive(Debug, Parser)]
#[command(
    name = "fellkms",
    version,
    about = "KMS states on C*-algebras of Fell bundles over finite groupoids"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check groupoid, cocycle, bundle and action axioms.
    Validate(Args),
    /// Certify a state as KMS and disintegrate it.
    CheckKms(Args),
    /// Search for KMS states.
    Solve(Args),
    /// Integrate/disintegrate round trips.
    Roundtrip(Args),
}

#[derive(Debug, clap::Args)]
pub struct Args {
    pub scenario: PathBuf,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "beta_range")]
    pub beta: Option<f64>,
    /// START END STEPS
    #[arg(long, num_args = 3, value_names = ["A", "B", "STEPS"], allow_hyphen_values = true)]
    pub beta_range: Option<Vec<String>>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
}

/// `--tol`, then `FELLKMS_TOL`, then the library default.
pub fn resolve_tol(flag: Option<f64>, env: Option<String>) -> Result<f64, String> {
    let tol = match (flag, env) {
        (Some(t), _) => t,
        (None, Some(s)) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("{TOL_ENV}=`{s}` is not a number"))?,
        (None, None) => fellkms::DEFAULT_TOL,
    };
    if !(tol.is_finite() && tol > 0.0) {
        return Err(format!("tolerance must be positive, got {tol}"));
    }
    Ok(tol)
}

fn parse_range(v: &[String]) -> Result<Vec<f64>, String> {
    let a: f64 = v[0]
        .parse()
        .map_err(|_| format!("bad β start `{}`", v[0]))?;
    let b: f64 = v[1].parse().map_err(|_| format!("bad β end `{}`", v[1]))?;
    let n: usize = v[2]
        .parse()
        .map_err(|_| format!("bad step count `{}`", v[2]))?;
    beta_sweep(a, b, n)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_PASS
            };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    let (name, args) = match &cli.command {
        Command::Validate(a) => ("validate", a),
        Command::CheckKms(a) => ("check-kms", a),
        Command::Solve(a) => ("solve", a),
        Command::Roundtrip(a) => ("roundtrip", a),
    };
    let fail = |stderr: &mut dyn Write, msg: String| {
        let _ = writeln!(stderr, "fellkms {name}: {msg}");
        EXIT_INPUT
    };
    let tol = match resolve_tol(args.tol, std::env::var(TOL_ENV).ok()) {
        Ok(t) => t,
        Err(m) => return fail(stderr, m),
    };
    let betas = match (&args.beta, &args.beta_range) {
        (Some(b), _) if !b.is_finite() => return fail(stderr, "β must be finite".into()),
        (Some(b), _) => Some(vec![*b]),
        (None, Some(r)) => match parse_range(r) {
            Ok(v) => Some(v),
            Err(m) => return fail(stderr, m),
        },
        (None, None) => None,
    };
    let scenario = match Scenario::load(&args.scenario, tol) {
        Ok(s) => s,
        Err(e) => return fail(stderr, e.to_string()),
    };
    let opts = Options { tol, betas };
    let outcome: Outcome = match cli.command {
        Command::Validate(_) => commands::cmd_validate(&scenario, &opts),
        Command::CheckKms(_) => match commands::cmd_check_kms(&scenario, &opts) {
            Ok(o) => o,
            Err(e) => return fail(stderr, e.to_string()),
        },
        Command::Solve(_) => match commands::cmd_solve(&scenario, &opts) {
            Ok(o) => o,
            Err(e) => return fail(stderr, e.to_string()),
        },
        Command::Roundtrip(_) => match commands::cmd_roundtrip(&scenario, &opts) {
            Ok(o) => o,
            Err(e) => return fail(stderr, e.to_string()),
        },
    };
    let json = report::to_json_string(&outcome.json);
    if let Some(path) = &args.out {
        if let Err(e) = std::fs::write(path, &json) {
            return fail(stderr, format!("{}: {e}", path.display()));
        }
    }
    let _ = if args.json {
        write!(stdout, "{json}")
    } else {
        write!(stdout, "{}", outcome.text)
    };
    outcome.status.code()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_precedence() {
        assert_eq!(resolve_tol(Some(1e-6), Some("1e-3".into())), Ok(1e-6));
        assert_eq!(resolve_tol(None, Some("1e-3".into())), Ok(1e-3));
        assert_eq!(resolve_tol(None, None), Ok(fellkms::DEFAULT_TOL));
        assert!(resolve_tol(None, Some("x".into())).is_err());
        assert!(resolve_tol(Some(-1.0), None).is_err());
    }

    #[test]
    fn beta_range_parses() {
        let v = parse_range(&["0".into(), "2".into(), "3".into()]).unwrap();
        assert_eq!(v, vec![0.0, 1.0, 2.0]);
        assert!(parse_range(&["0".into(), "2".into(), "0".into()]).is_err());
    }
}
