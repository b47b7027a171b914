//! Run configuration: `key = value` files and command-line flags.
//!
//! Every config key has a flag of the same name with `_` spelled `-`. A file
//! is turned into the equivalent flag list and parsed by the same clap
//! definition, so both routes share one set of value parsers. Flags given on
//! the command line win over file values.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use pnpqkd_core::experiments::PhaseDistribution;
use pnpqkd_core::protocol::{DoubleClickPolicy, PhotonBudget, Polarization, SessionConfig};
use pnpqkd_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BudgetArg {
    PerBit,
    PerSignal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DoubleClickArg {
    Discard,
    Random,
}

/// Options shared by all subcommands.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Opts {
    /// `key = value` configuration file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bits per session
    #[arg(long)]
    pub bits: Option<u64>,
    /// Mean photon number leaving Alice
    #[arg(long)]
    pub mean_photon: Option<f64>,
    /// Whether the mean photon number counts both pulses or the signal only
    #[arg(long, value_enum)]
    pub photon_budget: Option<BudgetArg>,
    /// Functional-generator hold delay
    #[arg(long, allow_negative_numbers = true)]
    pub delay_ns: Option<f64>,
    #[arg(long)]
    pub period_ns: Option<f64>,
    /// Modulator -> mirror -> modulator time
    #[arg(long)]
    pub roundtrip_ns: Option<f64>,
    #[arg(long)]
    pub frame_len: Option<usize>,
    #[arg(long)]
    pub tau_mzi_ns: Option<f64>,
    #[arg(long)]
    pub mzi_loss_db: Option<f64>,
    #[arg(long)]
    pub fiber_km: Option<f64>,
    #[arg(long)]
    pub fiber_loss_db_per_km: Option<f64>,
    /// Detector efficiency
    #[arg(long)]
    pub efficiency: Option<f64>,
    /// Dark-count probability per gate
    #[arg(long)]
    pub dark_prob: Option<f64>,
    /// `uniform` or the H-power fraction of a fixed input polarization
    #[arg(long, value_parser = parse_polarization)]
    pub polarization: Option<Polarization>,
    #[arg(long, value_enum)]
    pub randomizer: Option<OnOff>,
    #[arg(long, value_enum)]
    pub double_click: Option<DoubleClickArg>,
    /// Scan covers [-range, +range]
    #[arg(long)]
    pub scan_range_ns: Option<f64>,
    #[arg(long)]
    pub scan_step_ns: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads for the scan
    #[arg(long)]
    pub threads: Option<usize>,
    /// Photon-number truncation of the density matrix
    #[arg(long)]
    pub n_max: Option<usize>,
    /// `continuous`, `discrete:N` or `fixed:PHASE`
    #[arg(long, value_parser = parse_phase_dist)]
    pub phase_dist: Option<PhaseDistribution>,
    /// Number of generator codes to audit
    #[arg(long)]
    pub codes: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Audit the codes in this file (one per line) instead of generating them
    #[arg(long)]
    pub pattern_file: Option<PathBuf>,
}

fn parse_polarization(s: &str) -> std::result::Result<Polarization, String> {
    if s.eq_ignore_ascii_case("uniform") {
        return Ok(Polarization::Uniform);
    }
    let f: f64 = s
        .parse()
        .map_err(|_| format!("expected `uniform` or an H-power fraction, got `{s}`"))?;
    if !(0.0..=1.0).contains(&f) {
        return Err(format!("H-power fraction {f} not in [0, 1]"));
    }
    Ok(Polarization::fixed_split(f))
}

fn parse_phase_dist(s: &str) -> std::result::Result<PhaseDistribution, String> {
    let bad = || format!("expected `continuous`, `discrete:N` or `fixed:PHASE`, got `{s}`");
    match s.split_once(':') {
        None if s == "continuous" => Ok(PhaseDistribution::ContinuousUniform),
        Some(("discrete", n)) => match n.parse::<u32>() {
            Ok(n) if n > 0 => Ok(PhaseDistribution::Discrete(n)),
            _ => Err(bad()),
        },
        Some(("fixed", phi)) => phi
            .parse::<f64>()
            .ok()
            .filter(|p| p.is_finite())
            .map(PhaseDistribution::Fixed)
            .ok_or_else(bad),
        _ => Err(bad()),
    }
}

macro_rules! prefer {
    ($hi:expr, $lo:expr; $($field:ident),+ $(,)?) => {
        Opts { $($field: $hi.$field.or($lo.$field)),+ }
    };
}

impl Opts {
    /// Field-wise `self` over `fallback`.
    pub fn or(self, fallback: Opts) -> Opts {
        prefer!(self, fallback;
            config, seed, bits, mean_photon, photon_budget, delay_ns, period_ns,
            roundtrip_ns, frame_len, tau_mzi_ns, mzi_loss_db, fiber_km,
            fiber_loss_db_per_km, efficiency, dark_prob, polarization, randomizer,
            double_click, scan_range_ns, scan_step_ns, output, threads, n_max,
            phase_dist, codes, bins, pattern_file,
        )
    }

    /// Parse a `key = value` file (blank lines and `#` comments ignored).
    pub fn from_file(path: &Path) -> Result<Opts> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_text(&text, path)
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Opts> {
        #[derive(Parser)]
        #[command(no_binary_name = true)]
        struct FileOpts {
            #[command(flatten)]
            opts: Opts,
        }

        let parse_err = |line: usize, reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut opts = Opts::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "config" {
                return Err(parse_err(
                    i + 1,
                    "config files cannot include other config files".into(),
                ));
            }
            let flag = format!("--{}", key.replace('_', "-"));
            let single = FileOpts::try_parse_from([flag.as_str(), value])
                .map_err(|e| parse_err(i + 1, first_line(&e.to_string())))?;
            opts = single.opts.or(opts);
        }
        Ok(opts)
    }
}

fn first_line(s: &str) -> String {
    s.lines()
        .next()
        .unwrap_or("")
        .trim_start_matches("error: ")
        .to_owned()
}

/// Fully resolved settings for one CLI invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub session: SessionConfig,
    pub output: Option<PathBuf>,
    pub scan_range_ns: f64,
    pub scan_step_ns: f64,
    pub threads: Option<usize>,
    pub n_max: usize,
    pub phase_dist: PhaseDistribution,
    pub codes: usize,
    pub bins: usize,
    pub pattern_file: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            output: None,
            scan_range_ns: 200.0,
            scan_step_ns: 10.0,
            threads: None,
            n_max: 20,
            phase_dist: PhaseDistribution::ContinuousUniform,
            codes: 1_000_000,
            bins: 256,
            pattern_file: None,
        }
    }
}

impl RunConfig {
    /// Resolve command-line options (reading `--config` if given) and
    /// validate every physical parameter.
    pub fn resolve(flags: Opts) -> Result<RunConfig> {
        let merged = match &flags.config {
            Some(path) => flags.clone().or(Opts::from_file(path)?),
            None => flags,
        };
        let cfg = Self::from_opts(&merged);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_opts(o: &Opts) -> RunConfig {
        let mut c = RunConfig::default();
        let s = &mut c.session;
        macro_rules! set {
            ($($src:ident => $dst:expr),+ $(,)?) => {
                $(if let Some(v) = o.$src.clone() { $dst = v; })+
            };
        }
        set! {
            seed => s.seed,
            bits => s.n_bits,
            mean_photon => s.mean_photon,
            delay_ns => s.timing.delay_ns,
            period_ns => s.timing.period_ns,
            roundtrip_ns => s.timing.roundtrip_ns,
            frame_len => s.frame_len,
            tau_mzi_ns => s.optics.tau_mzi_ns,
            mzi_loss_db => s.optics.mzi_loss_db,
            fiber_km => s.optics.fiber_km,
            fiber_loss_db_per_km => s.optics.fiber_loss_db_per_km,
            efficiency => s.optics.detector.efficiency,
            dark_prob => s.optics.detector.dark_prob,
            polarization => s.polarization,
            scan_range_ns => c.scan_range_ns,
            scan_step_ns => c.scan_step_ns,
            n_max => c.n_max,
            phase_dist => c.phase_dist,
            codes => c.codes,
            bins => c.bins,
        }
        if let Some(b) = o.photon_budget {
            s.photon_budget = match b {
                BudgetArg::PerBit => PhotonBudget::PerBit,
                BudgetArg::PerSignal => PhotonBudget::PerSignalPulse,
            };
        }
        if let Some(r) = o.randomizer {
            s.randomizer_enabled = r == OnOff::On;
        }
        if let Some(d) = o.double_click {
            s.double_click = match d {
                DoubleClickArg::Discard => DoubleClickPolicy::Discard,
                DoubleClickArg::Random => DoubleClickPolicy::RandomAssign,
            };
        }
        c.output = o.output.clone();
        c.threads = o.threads;
        c.pattern_file = o.pattern_file.clone();
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.session.validate()?;
        pnpqkd_core::experiments::symmetric_delays(self.scan_range_ns, self.scan_step_ns)?;
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter {
                name: "threads",
                reason: "must be > 0".into(),
            });
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: "must be >= 1".into(),
            });
        }
        if self.bins < 2 {
            return Err(Error::InvalidParameter {
                name: "bins",
                reason: "must be >= 2".into(),
            });
        }
        Ok(())
    }
}
