//! `pnpqkd` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 statistical test
//! rejected.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::{error::ErrorKind, Parser, Subcommand};
use pnpqkd_core::experiments::{
    delay_scan, fock_density_matrix, symmetric_delays, uniformity_chisq, write_scan_csv,
};
use pnpqkd_core::protocol::{estimate_qber, run_session, sift, write_records_csv};
use pnpqkd_core::randomizer::{generate_pattern, read_codes, PHASE_STEP};
use pnpqkd_core::rng::{stream, Role};
use pnpqkd_core::Error;

pub use config::{Opts, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pnpqkd",
    version,
    about = "Plug-and-play QKD with active phase randomization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one QKD session and print its QBER
    Session(Opts),
    /// Sweep the functional-generator delay and write QBER per delay as CSV
    Scan(Opts),
    /// Chi-square audit of the randomizer's phase codes
    VerifyUniformity(Opts),
    /// Fock-basis density matrix of a phase-randomized coherent state as CSV
    Density(Opts),
}

impl Command {
    fn opts(&self) -> &Opts {
        match self {
            Command::Session(o)
            | Command::Scan(o)
            | Command::VerifyUniformity(o)
            | Command::Density(o) => o,
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Csv(c) if c.is_io_error() => EXIT_IO,
        Error::ScanPoint { source, .. } => exit_code(source),
        _ => EXIT_INVALID,
    }
}

fn execute(command: &Command) -> pnpqkd_core::Result<i32> {
    let cfg = RunConfig::resolve(command.opts().clone())?;
    match command {
        Command::Session(_) => session(&cfg),
        Command::Scan(_) => scan(&cfg),
        Command::VerifyUniformity(_) => verify_uniformity(&cfg),
        Command::Density(_) => density(&cfg),
    }
}

fn session(cfg: &RunConfig) -> pnpqkd_core::Result<i32> {
    let out = run_session(&cfg.session)?;
    let q = estimate_qber(&sift(&out.records))?;
    println!(
        "qber={} std_error={} n_sifted={} n_errors={}",
        q.qber, q.std_error, q.n_sifted, q.n_errors
    );
    if let Some(path) = &cfg.output {
        write_output(Some(path), |w| write_records_csv(&out.records, w))?;
    }
    Ok(EXIT_OK)
}

fn scan(cfg: &RunConfig) -> pnpqkd_core::Result<i32> {
    let delays = symmetric_delays(cfg.scan_range_ns, cfg.scan_step_ns)?;
    let result = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter {
                name: "threads",
                reason: e.to_string(),
            })?
            .install(|| delay_scan(&cfg.session, &delays))?,
        None => delay_scan(&cfg.session, &delays)?,
    };
    write_output(cfg.output.as_deref(), |w| write_scan_csv(&result, w))?;
    Ok(EXIT_OK)
}

/// Codes audited by `verify-uniformity`: the file if given, otherwise
/// `cfg.codes` codes from the seeded pattern stream, frame by frame.
pub fn audit_codes(cfg: &RunConfig) -> pnpqkd_core::Result<Vec<u16>> {
    if let Some(path) = &cfg.pattern_file {
        return read_codes(path);
    }
    let mut rng = stream(cfg.session.seed, Role::Pattern);
    let mut codes = Vec::with_capacity(cfg.codes);
    while codes.len() < cfg.codes {
        let frame = generate_pattern(&mut rng, cfg.session.frame_len)?;
        let take = (cfg.codes - codes.len()).min(frame.len());
        codes.extend_from_slice(&frame.codes()[..take]);
    }
    Ok(codes)
}

fn verify_uniformity(cfg: &RunConfig) -> pnpqkd_core::Result<i32> {
    let phases: Vec<f64> = audit_codes(cfg)?
        .into_iter()
        .map(|c| f64::from(c) * PHASE_STEP)
        .collect();
    let audit = uniformity_chisq(&phases, cfg.bins)?;
    let verdict = if audit.passes() { "pass" } else { "reject" };
    println!(
        "samples={} bins={} statistic={:.3} threshold_p99={:.3} result={verdict}",
        phases.len(),
        cfg.bins,
        audit.statistic,
        audit.threshold_p99
    );
    Ok(if audit.passes() {
        EXIT_OK
    } else {
        EXIT_REJECTED
    })
}

fn density(cfg: &RunConfig) -> pnpqkd_core::Result<i32> {
    let rho = fock_density_matrix(cfg.session.mean_photon, cfg.phase_dist, cfg.n_max)?;
    write_output(cfg.output.as_deref(), |w| rho.write_csv(w))?;
    Ok(EXIT_OK)
}

fn write_output(
    path: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> pnpqkd_core::Result<()>,
) -> pnpqkd_core::Result<()> {
    match path {
        Some(path) => {
            let io_err = |e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            };
            let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
            body(&mut w).map_err(|e| match e {
                Error::Csv(c) if c.is_io_error() => Error::Io {
                    path: path.to_path_buf(),
                    source: io::Error::other(c),
                },
                other => other,
            })?;
            w.flush().map_err(io_err)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)
        }
    }
}
