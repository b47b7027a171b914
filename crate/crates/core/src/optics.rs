//! Coherent-state polarization optics.
//!
//! Pulses are weak coherent states described by their complex field amplitude
//! in the H and V polarization modes, normalized so that `|h|² + |v|²` is the
//! mean photon number. Every element here is a linear map on that amplitude,
//! except detection, which turns a mean photon number into a Bernoulli click.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Power transmission of a loss given in decibels.
pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Complex field amplitude per polarization mode, in √photons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizedAmplitude {
    pub h: Complex64,
    pub v: Complex64,
}

impl PolarizedAmplitude {
    pub const VACUUM: Self = Self {
        h: Complex64::new(0.0, 0.0),
        v: Complex64::new(0.0, 0.0),
    };

    pub fn new(h: Complex64, v: Complex64) -> Self {
        Self { h, v }
    }

    /// Horizontally polarized coherent state with mean photon number `mu`.
    pub fn horizontal(mu: f64) -> Self {
        Self::new(Complex64::new(mu.sqrt(), 0.0), Complex64::new(0.0, 0.0))
    }

    /// Unit-power state with H-power fraction `h_fraction` and V leading H by
    /// `relative_phase`.
    pub fn from_power_split(h_fraction: f64, relative_phase: f64) -> Self {
        Self::new(
            Complex64::new(h_fraction.sqrt(), 0.0),
            Complex64::from_polar((1.0 - h_fraction).max(0.0).sqrt(), relative_phase),
        )
    }

    pub fn photon_number(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.v.is_finite()
    }

    /// Scale both field components by a real factor (power scales by its square).
    pub fn scale(self, factor: f64) -> Self {
        Self::new(self.h * factor, self.v * factor)
    }
}

impl Add for PolarizedAmplitude {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.h + rhs.h, self.v + rhs.v)
    }
}

impl Sub for PolarizedAmplitude {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.h - rhs.h, self.v - rhs.v)
    }
}

impl Mul<Complex64> for PolarizedAmplitude {
    type Output = Self;
    fn mul(self, rhs: Complex64) -> Self {
        Self::new(self.h * rhs, self.v * rhs)
    }
}

/// A pulse and its arrival time at the randomizer's modulator, measured from
/// the frame start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub amplitude: PolarizedAmplitude,
    pub t_ns: f64,
}

impl Pulse {
    pub fn new(amplitude: PolarizedAmplitude, t_ns: f64) -> Self {
        Self { amplitude, t_ns }
    }

    pub fn mean_photon(&self) -> f64 {
        self.amplitude.photon_number()
    }

    fn with_amplitude(self, amplitude: PolarizedAmplitude) -> Self {
        Self { amplitude, ..self }
    }
}

/// The two halves of one bit after the asymmetric interferometer: the
/// reference took the short arm, the signal the long one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsePair {
    pub reference: Pulse,
    pub signal: Pulse,
    pub bit_index: usize,
}

impl PulsePair {
    pub fn mean_photon(&self) -> f64 {
        self.reference.mean_photon() + self.signal.mean_photon()
    }

    pub fn map(self, mut f: impl FnMut(Pulse) -> Pulse) -> Self {
        Self {
            reference: f(self.reference),
            signal: f(self.signal),
            bit_index: self.bit_index,
        }
    }
}

/// Threshold detector: efficiency and per-gate dark-count probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub dark_prob: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            efficiency: 0.5,
            dark_prob: 1e-5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid(
                "efficiency",
                format!("{} not in [0, 1]", self.efficiency),
            ));
        }
        if !(0.0..1.0).contains(&self.dark_prob) {
            return Err(Error::invalid(
                "dark_prob",
                format!("{} not in [0, 1)", self.dark_prob),
            ));
        }
        Ok(())
    }

    /// Probability that a gate with `mu` incident photons on average clicks.
    ///
    /// Signal and dark counts are independent: the gate stays silent only if
    /// neither fires.
    pub fn click_probability(&self, mu: f64) -> f64 {
        1.0 - (1.0 - self.dark_prob) * (-self.efficiency * mu).exp()
    }
}

/// Split a pulse in the asymmetric Mach-Zehnder interferometer.
///
/// The long arm carries the modulator whose insertion loss makes the signal
/// weaker than the reference; it also delays the signal by `tau_mzi_ns`.
pub fn mzi_split(
    input: &Pulse,
    insertion_loss_db: f64,
    tau_mzi_ns: f64,
    bit_index: usize,
) -> Result<PulsePair> {
    if !(insertion_loss_db >= 0.0) {
        return Err(Error::invalid(
            "insertion_loss_db",
            format!("{insertion_loss_db} < 0"),
        ));
    }
    if !(tau_mzi_ns >= 0.0) {
        return Err(Error::invalid("tau_mzi_ns", format!("{tau_mzi_ns} < 0")));
    }
    if !input.amplitude.is_finite() {
        return Err(Error::invalid("input", "non-finite amplitude"));
    }
    let half = input.amplitude.scale(std::f64::consts::FRAC_1_SQRT_2);
    let long_arm = db_to_transmission(insertion_loss_db).sqrt();
    Ok(PulsePair {
        reference: Pulse::new(half, input.t_ns),
        signal: Pulse::new(half.scale(long_arm), input.t_ns + tau_mzi_ns),
        bit_index,
    })
}

/// Ideal Faraday mirror: swaps the orthogonal polarization components.
///
/// The common reflection phase is dropped; it is shared by both pulses of a
/// bit and cancels in interference.
pub fn faraday_swap(a: PolarizedAmplitude) -> PolarizedAmplitude {
    PolarizedAmplitude::new(a.v, a.h)
}

pub fn apply_phase(a: PolarizedAmplitude, phi_h: f64, phi_v: f64) -> PolarizedAmplitude {
    PolarizedAmplitude::new(a.h * Complex64::cis(phi_h), a.v * Complex64::cis(phi_v))
}

/// Common real scaling of both pulses so their summed mean photon number is
/// `target`.
pub fn attenuate_to_mean_photon(pair: PulsePair, target: f64) -> Result<PulsePair> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::invalid(
            "mean_photon",
            format!("{target} is not a finite value >= 0"),
        ));
    }
    let current = pair.mean_photon();
    if target == 0.0 {
        return Ok(pair.map(|p| p.with_amplitude(PolarizedAmplitude::VACUUM)));
    }
    if current == 0.0 {
        return Err(Error::VacuumAmplification { target });
    }
    if current == target {
        return Ok(pair);
    }
    let factor = (target / current).sqrt();
    Ok(pair.map(|p| p.with_amplitude(p.amplitude.scale(factor))))
}

/// Mean photon numbers at the two coupler outputs `(d0, d1)`.
///
/// Constructive interference (equal phases) sends everything to `d0`.
/// Orthogonal polarization components do not interfere.
pub fn interfere(signal: PolarizedAmplitude, reference: PolarizedAmplitude) -> (f64, f64) {
    let d0 = (signal + reference).photon_number() / 2.0;
    let d1 = (signal - reference).photon_number() / 2.0;
    (d0, d1)
}

pub fn detect<R: Rng + ?Sized>(mu: f64, cfg: &DetectorConfig, rng: &mut R) -> Result<bool> {
    if !(mu >= 0.0) {
        return Err(Error::invalid(
            "mean_photon",
            format!("{mu} < 0 at detector"),
        ));
    }
    Ok(rng.random::<f64>() < cfg.click_probability(mu))
}

/// Fiber attenuation. Propagation delay is common to all pulses and not tracked.
pub fn propagate_fiber(p: Pulse, length_km: f64, loss_db_per_km: f64) -> Pulse {
    debug_assert!(length_km >= 0.0 && loss_db_per_km >= 0.0);
    let loss_db = length_km * loss_db_per_km;
    if loss_db == 0.0 {
        return p;
    }
    p.with_amplitude(p.amplitude.scale(db_to_transmission(loss_db).sqrt()))
}

/// Pass a returning pulse through Bob's long arm: his phase modulator applies
/// `phase` to both polarizations and its insertion loss.
pub fn pass_long_arm(p: Pulse, insertion_loss_db: f64, phase: f64) -> Pulse {
    let amp = p.amplitude * Complex64::cis(phase);
    p.with_amplitude(amp.scale(db_to_transmission(insertion_loss_db).sqrt()))
}
