//! Delay scan, phase-uniformity audit and the photon-number picture of
//! phase-randomized weak coherent states.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::protocol::{session_qber, QberEstimate, SessionConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub delay_ns: f64,
    pub estimate: QberEstimate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DelayScanResult {
    pub points: Vec<ScanPoint>,
}

/// Seed of the session run at scan position `index`.
pub fn scan_point_seed(base_seed: u64, index: usize) -> u64 {
    derive_seed(base_seed, index as u64)
}

/// `-range, -range + step, …, +range`.
pub fn symmetric_delays(range_ns: f64, step_ns: f64) -> Result<Vec<f64>> {
    if !(range_ns >= 0.0) || !range_ns.is_finite() {
        return Err(Error::invalid(
            "scan_range_ns",
            format!("{range_ns} must be >= 0"),
        ));
    }
    if !(step_ns > 0.0) || !step_ns.is_finite() {
        return Err(Error::invalid(
            "scan_step_ns",
            format!("{step_ns} must be > 0"),
        ));
    }
    let n = (2.0 * range_ns / step_ns + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| -range_ns + i as f64 * step_ns).collect())
}

/// One independent session per delay. Points run in parallel on the current
/// rayon pool; the result is ordered by delay and does not depend on the
/// schedule.
pub fn delay_scan(base: &SessionConfig, delays: &[f64]) -> Result<DelayScanResult> {
    if delays.is_empty() {
        return Err(Error::invalid("delays", "scan needs at least one delay"));
    }
    if delays.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("delays", "must be strictly increasing"));
    }
    base.validate()?;
    let points = delays
        .par_iter()
        .enumerate()
        .map(|(i, &delay_ns)| {
            let mut cfg = base.clone();
            cfg.timing.delay_ns = delay_ns;
            cfg.seed = scan_point_seed(base.seed, i);
            session_qber(&cfg)
                .map(|estimate| ScanPoint { delay_ns, estimate })
                .map_err(|e| Error::ScanPoint {
                    delay_ns,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayScanResult { points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareAudit {
    pub statistic: f64,
    /// 0.99 quantile of χ² with `dof` degrees of freedom.
    pub threshold_p99: f64,
    pub dof: usize,
}

impl ChiSquareAudit {
    pub fn passes(&self) -> bool {
        self.statistic < self.threshold_p99
    }
}

pub fn chi_square_quantile(dof: usize, p: f64) -> f64 {
    ChiSquared::new(dof as f64).expect("dof > 0").inverse_cdf(p)
}

/// Equal-width bin of `[0, 2π)` holding `phase`.
///
/// Bin edges are `k·(2π/n)`; the initial estimate is corrected against those
/// exact edge values so grid phases such as `c·2π/4096` never slip into a
/// neighbouring bin through rounding.
pub fn phase_bin(phase: f64, n_bins: usize) -> usize {
    let width = TAU / n_bins as f64;
    let phase = phase.rem_euclid(TAU);
    let mut bin = ((phase / width).floor() as usize).min(n_bins - 1);
    if bin + 1 < n_bins && phase >= (bin + 1) as f64 * width {
        bin += 1;
    } else if bin > 0 && phase < bin as f64 * width {
        bin -= 1;
    }
    bin
}

/// Pearson χ² of `phases` against the uniform distribution on `[0, 2π)`.
pub fn uniformity_chisq(phases: &[f64], n_bins: usize) -> Result<ChiSquareAudit> {
    if n_bins < 2 {
        return Err(Error::invalid("bins", format!("{n_bins} < 2")));
    }
    let required = 10 * n_bins;
    if phases.len() < required {
        return Err(Error::Undersampled {
            bins: n_bins,
            required,
            found: phases.len(),
        });
    }
    let mut counts = vec![0u64; n_bins];
    for &p in phases {
        counts[phase_bin(p, n_bins)] += 1;
    }
    let expected = phases.len() as f64 / n_bins as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    Ok(ChiSquareAudit {
        statistic,
        threshold_p99: chi_square_quantile(n_bins - 1, 0.99),
        dof: n_bins - 1,
    })
}

/// Distribution of the global phase applied to a coherent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseDistribution {
    ContinuousUniform,
    /// Uniform over the `N` phases `2πk/N`.
    Discrete(u32),
    Fixed(f64),
}

impl PhaseDistribution {
    /// Characteristic function `E[e^{ikφ}]`.
    pub fn moment(&self, k: i64) -> Complex64 {
        match *self {
            PhaseDistribution::ContinuousUniform => unit_if(k == 0),
            PhaseDistribution::Discrete(n) => unit_if(k.rem_euclid(i64::from(n)) == 0),
            PhaseDistribution::Fixed(phi) => Complex64::cis(k as f64 * phi),
        }
    }
}

fn unit_if(cond: bool) -> Complex64 {
    Complex64::new(if cond { 1.0 } else { 0.0 }, 0.0)
}

/// Density matrix in the photon-number basis, truncated at `n_max` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    entries: Vec<Complex64>,
    pub mu: f64,
    pub n_max: usize,
}

impl FockDensityMatrix {
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.entries[n * self.dim() + m]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|n| self.get(n, n).re).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "m", "re", "im"])?;
        for n in 0..self.dim() {
            for m in 0..self.dim() {
                let v = self.get(n, m);
                // `+ 0.0` folds the -0.0 left by conjugation.
                let v = Complex64::new(v.re + 0.0, v.im + 0.0);
                w.write_record([
                    n.to_string(),
                    m.to_string(),
                    v.re.to_string(),
                    v.im.to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// `ρ_nm = e^{-μ} μ^{(n+m)/2} / √(n! m!) · E[e^{i(n-m)φ}]`.
pub fn fock_density_matrix(
    mu: f64,
    phase_dist: PhaseDistribution,
    n_max: usize,
) -> Result<FockDensityMatrix> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::invalid(
            "mean_photon",
            format!("{mu} must be finite and >= 0"),
        ));
    }
    if n_max < 1 {
        return Err(Error::invalid("n_max", "must be >= 1"));
    }
    if matches!(phase_dist, PhaseDistribution::Discrete(0)) {
        return Err(Error::invalid(
            "phase_dist",
            "discrete distribution needs at least one phase",
        ));
    }
    let dim = n_max + 1;
    // Coherent amplitude magnitudes e^{-μ/2} μ^{n/2} / √n!, in log space.
    let mut ln_fact = 0.0;
    let magnitudes: Vec<f64> = (0..dim)
        .map(|n| {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            if mu == 0.0 {
                return if n == 0 { 1.0 } else { 0.0 };
            }
            (-mu / 2.0 + n as f64 / 2.0 * mu.ln() - ln_fact / 2.0).exp()
        })
        .collect();

    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for n in 0..dim {
        for m in n..dim {
            let value = phase_dist.moment(n as i64 - m as i64) * (magnitudes[n] * magnitudes[m]);
            entries[n * dim + m] = value;
            entries[m * dim + n] = value.conj();
        }
    }
    Ok(FockDensityMatrix { entries, mu, n_max })
}

/// Largest off-diagonal magnitude.
pub fn offdiag_norm(rho: &FockDensityMatrix) -> f64 {
    let dim = rho.dim();
    (0..dim)
        .flat_map(|n| (0..dim).filter(move |&m| m != n).map(move |m| (n, m)))
        .map(|(n, m)| rho.get(n, m).norm())
        .fold(0.0, f64::max)
}

pub const SCAN_CSV_HEADER: [&str; 5] = ["delay_ns", "qber", "std_error", "n_sifted", "n_errors"];

pub fn write_scan_csv<W: Write>(result: &DelayScanResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCAN_CSV_HEADER)?;
    for p in &result.points {
        let e = &p.estimate;
        w.write_record([
            p.delay_ns.to_string(),
            e.qber.to_string(),
            e.std_error.to_string(),
            e.n_sifted.to_string(),
            e.n_errors.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn export_csv(result: &DelayScanResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_scan_csv(result, &mut out).map_err(|e| with_path(e, path))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scan_csv<R: Read>(reader: R) -> Result<DelayScanResult> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(SCAN_CSV_HEADER) {
        return Err(Error::invalid(
            "csv",
            format!("unexpected header {:?}", header),
        ));
    }
    let mut points = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let float = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|e| Error::invalid("csv", format!("field `{}`: {e}", &row[i])))
        };
        let int = |i: usize| -> Result<u64> {
            row[i]
                .parse()
                .map_err(|e| Error::invalid("csv", format!("field `{}`: {e}", &row[i])))
        };
        points.push(ScanPoint {
            delay_ns: float(0)?,
            estimate: QberEstimate {
                qber: float(1)?,
                std_error: float(2)?,
                n_sifted: int(3)?,
                n_errors: int(4)?,
            },
        });
    }
    Ok(DelayScanResult { points })
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        },
        other => other,
    }
}
