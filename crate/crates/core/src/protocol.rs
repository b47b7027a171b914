//! The plug-and-play BB84 round trip.
//!
//! Bob emits a frame of bright pulses, his asymmetric interferometer splits
//! each into a reference and a delayed signal, Alice phase-codes the signal,
//! the randomizer adds the pattern phase, Alice attenuates and returns the
//! pair, and Bob applies his measurement phase to the reference as it crosses
//! his long arm before the two pulses interfere on the detectors.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::optics::{
    apply_phase, attenuate_to_mean_photon, detect, faraday_swap, interfere, mzi_split,
    pass_long_arm, propagate_fiber, DetectorConfig, PolarizedAmplitude, Pulse, PulsePair,
};
use crate::randomizer::{
    generate_pattern, modulate_pi, phase_at, RandomizerTiming, DEFAULT_FRAME_LEN,
};
use crate::rng::{stream, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Y,
}

impl Basis {
    /// Bob's measurement phase for this basis.
    pub fn measurement_phase(self) -> f64 {
        match self {
            Basis::X => 0.0,
            Basis::Y => FRAC_PI_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Basis::X => "X",
            Basis::Y => "Y",
        }
    }

    fn from_bit(b: bool) -> Self {
        if b {
            Basis::Y
        } else {
            Basis::X
        }
    }
}

/// Alice's choice for one bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisBit {
    pub basis: Basis,
    pub bit: u8,
}

impl BasisBit {
    pub fn new(basis: Basis, bit: u8) -> Self {
        debug_assert!(bit <= 1);
        Self { basis, bit }
    }

    /// Coding phase: {0, π} in X, {π/2, 3π/2} in Y.
    pub fn coding_phase(self) -> f64 {
        self.basis.measurement_phase() + if self.bit == 1 { PI } else { 0.0 }
    }
}

/// What the target mean photon number counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhotonBudget {
    /// Reference plus signal.
    #[default]
    PerBit,
    /// Signal pulse alone.
    PerSignalPulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DoubleClickPolicy {
    #[default]
    Discard,
    /// Keep one of the two clicks at random.
    RandomAssign,
}

/// Polarization entering Alice's randomizer, fixed for a session.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Polarization {
    /// Uniform over the Poincaré sphere, drawn once per session.
    #[default]
    Uniform,
    /// Fixed state; normalized before use.
    Fixed(PolarizedAmplitude),
}

impl Polarization {
    /// Fixed state with H-power fraction `h_fraction` and real amplitudes.
    pub fn fixed_split(h_fraction: f64) -> Self {
        Polarization::Fixed(PolarizedAmplitude::from_power_split(h_fraction, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticsConfig {
    /// Arm time difference of Bob's interferometer.
    pub tau_mzi_ns: f64,
    /// Insertion loss of the long arm.
    pub mzi_loss_db: f64,
    pub fiber_km: f64,
    pub fiber_loss_db_per_km: f64,
    pub detector: DetectorConfig,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            tau_mzi_ns: 50.0,
            mzi_loss_db: 3.0,
            fiber_km: 5.0,
            fiber_loss_db_per_km: 0.2,
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub n_bits: u64,
    pub mean_photon: f64,
    pub photon_budget: PhotonBudget,
    pub frame_len: usize,
    pub timing: RandomizerTiming,
    pub optics: OpticsConfig,
    pub polarization: Polarization,
    pub randomizer_enabled: bool,
    pub double_click: DoubleClickPolicy,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_bits: 843_000,
            mean_photon: 0.1,
            photon_budget: PhotonBudget::PerBit,
            frame_len: DEFAULT_FRAME_LEN,
            timing: RandomizerTiming::default(),
            optics: OpticsConfig::default(),
            polarization: Polarization::Uniform,
            randomizer_enabled: true,
            double_click: DoubleClickPolicy::Discard,
            seed: 0,
        }
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("{value} must be finite and >= 0"),
        ))
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bits == 0 {
            return Err(Error::invalid("bits", "must be > 0"));
        }
        if self.frame_len == 0 {
            return Err(Error::invalid("frame_len", "must be > 0"));
        }
        non_negative("mean_photon", self.mean_photon)?;
        non_negative("tau_mzi_ns", self.optics.tau_mzi_ns)?;
        non_negative("mzi_loss_db", self.optics.mzi_loss_db)?;
        non_negative("fiber_km", self.optics.fiber_km)?;
        non_negative("fiber_loss_db_per_km", self.optics.fiber_loss_db_per_km)?;
        self.optics.detector.validate()?;
        self.timing.validate()?;
        if self.optics.tau_mzi_ns + self.timing.roundtrip_ns >= self.timing.period_ns {
            return Err(Error::invalid(
                "tau_mzi_ns",
                format!(
                    "interferometer delay {} plus modulator round trip {} must fit inside the {} ns period",
                    self.optics.tau_mzi_ns, self.timing.roundtrip_ns, self.timing.period_ns
                ),
            ));
        }
        if let Polarization::Fixed(p) = self.polarization {
            if !p.is_finite() || p.photon_number() == 0.0 {
                return Err(Error::invalid(
                    "polarization",
                    "fixed state must be finite and nonzero",
                ));
            }
        }
        Ok(())
    }

    /// Time of the reference pulse's forward pass through the randomizer,
    /// relative to the start of its pulse period.
    ///
    /// Centers the busy window `[reference forward, signal return]` between
    /// two pattern transitions when `delay_ns` is 0.
    pub fn arrival_offset_ns(&self) -> f64 {
        (self.timing.period_ns - self.optics.tau_mzi_ns - self.timing.roundtrip_ns) / 2.0
    }
}

/// One bit as seen at the end of the round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub bit_index: u64,
    pub alice: BasisBit,
    pub bob_basis: Basis,
    pub clicked_d0: bool,
    pub clicked_d1: bool,
    /// Mean photon numbers incident on D0 and D1.
    pub mean_d0: f64,
    pub mean_d1: f64,
}

impl DetectionRecord {
    /// Bob's bit if exactly one detector fired.
    pub fn conclusive_bit(&self) -> Option<u8> {
        match (self.clicked_d0, self.clicked_d1) {
            (true, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        }
    }

    pub fn bases_match(&self) -> bool {
        self.alice.basis == self.bob_basis
    }

    pub fn clicked(&self) -> bool {
        self.clicked_d0 || self.clicked_d1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub records: Vec<DetectionRecord>,
    /// Global phase the randomizer applied to each bit.
    pub emitted_phases: Vec<f64>,
}

/// Run a session and keep every record.
pub fn run_session(cfg: &SessionConfig) -> Result<SessionOutput> {
    let n = usize::try_from(cfg.n_bits).map_err(|_| Error::invalid("bits", "too large"))?;
    let mut out = SessionOutput {
        records: Vec::with_capacity(n),
        emitted_phases: Vec::with_capacity(n),
    };
    simulate_session(cfg, |record, phase| {
        out.records.push(*record);
        out.emitted_phases.push(phase);
    })?;
    Ok(out)
}

/// Run a session, handing each record and its emitted global phase to
/// `visit` in bit order.
pub fn simulate_session(
    cfg: &SessionConfig,
    mut visit: impl FnMut(&DetectionRecord, f64),
) -> Result<()> {
    cfg.validate()?;
    let mut pattern_rng = stream(cfg.seed, Role::Pattern);
    let mut alice_rng = stream(cfg.seed, Role::AliceChoice);
    let mut bob_rng = stream(cfg.seed, Role::BobChoice);
    let mut detection_rng = stream(cfg.seed, Role::Detection);
    let jones = session_polarization(cfg);

    let optics = &cfg.optics;
    let offset = cfg.arrival_offset_ns();

    let mut bit_index = 0u64;
    while bit_index < cfg.n_bits {
        let pattern = if cfg.randomizer_enabled {
            Some(generate_pattern(&mut pattern_rng, cfg.frame_len)?)
        } else {
            None
        };
        let in_frame = (cfg.n_bits - bit_index).min(cfg.frame_len as u64) as usize;
        for slot in 0..in_frame {
            let alice = BasisBit::new(
                Basis::from_bit(alice_rng.random()),
                alice_rng.random::<bool>() as u8,
            );
            let bob_basis = Basis::from_bit(bob_rng.random());

            // Bob -> Alice
            let emitted = Pulse::new(jones, slot as f64 * cfg.timing.period_ns + offset);
            let pair = mzi_split(&emitted, optics.mzi_loss_db, optics.tau_mzi_ns, slot)?
                .map(|p| propagate_fiber(p, optics.fiber_km, optics.fiber_loss_db_per_km));

            // Alice
            let phi_a = alice.coding_phase();
            let pair = PulsePair {
                signal: Pulse::new(
                    apply_phase(pair.signal.amplitude, phi_a, phi_a),
                    pair.signal.t_ns,
                ),
                ..pair
            };
            let (pair, emitted_phase) = match &pattern {
                Some(pattern) => {
                    let phase = phase_at(pair.reference.t_ns, pattern, &cfg.timing);
                    (pair.map(|p| modulate_pi(p, pattern, &cfg.timing)), phase)
                }
                // Zero drive: the double pass reduces to the mirror's swap.
                None => (
                    pair.map(|p| Pulse::new(faraday_swap(p.amplitude), p.t_ns)),
                    0.0,
                ),
            };
            let pair = attenuate_to_mean_photon(pair, pair_target(cfg, &pair))?;

            // Alice -> Bob
            let pair =
                pair.map(|p| propagate_fiber(p, optics.fiber_km, optics.fiber_loss_db_per_km));
            let reference = pass_long_arm(
                pair.reference,
                optics.mzi_loss_db,
                bob_basis.measurement_phase(),
            );
            let (mean_d0, mean_d1) = interfere(pair.signal.amplitude, reference.amplitude);

            let mut clicked_d0 = detect(mean_d0, &optics.detector, &mut detection_rng)?;
            let mut clicked_d1 = detect(mean_d1, &optics.detector, &mut detection_rng)?;
            if clicked_d0 && clicked_d1 && cfg.double_click == DoubleClickPolicy::RandomAssign {
                if detection_rng.random() {
                    clicked_d1 = false;
                } else {
                    clicked_d0 = false;
                }
            }

            let record = DetectionRecord {
                bit_index,
                alice,
                bob_basis,
                clicked_d0,
                clicked_d1,
                mean_d0,
                mean_d1,
            };
            visit(&record, emitted_phase);
            bit_index += 1;
        }
    }
    Ok(())
}

fn session_polarization(cfg: &SessionConfig) -> PolarizedAmplitude {
    match cfg.polarization {
        Polarization::Uniform => {
            let mut rng = stream(cfg.seed, Role::Polarization);
            // H fraction uniform on [0, 1] and relative phase uniform on
            // [0, 2π) is the uniform measure on the Poincaré sphere.
            let h_fraction: f64 = rng.random();
            let phase: f64 = rng.random::<f64>() * TAU;
            PolarizedAmplitude::from_power_split(h_fraction, phase)
        }
        Polarization::Fixed(p) => p.scale(p.photon_number().sqrt().recip()),
    }
}

fn pair_target(cfg: &SessionConfig, pair: &PulsePair) -> f64 {
    match cfg.photon_budget {
        PhotonBudget::PerBit => cfg.mean_photon,
        PhotonBudget::PerSignalPulse => {
            cfg.mean_photon * pair.mean_photon() / pair.signal.mean_photon()
        }
    }
}

/// Keep basis-matched records with exactly one click, as `(alice_bit, bob_bit)`.
pub fn sift(records: &[DetectionRecord]) -> Vec<(u8, u8)> {
    records.iter().filter_map(sifted_pair).collect()
}

fn sifted_pair(r: &DetectionRecord) -> Option<(u8, u8)> {
    if !r.bases_match() {
        return None;
    }
    r.conclusive_bit().map(|bob| (r.alice.bit, bob))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberEstimate {
    pub qber: f64,
    /// Binomial standard error, `sqrt(q(1-q)/n)`.
    pub std_error: f64,
    pub n_sifted: u64,
    pub n_errors: u64,
}

impl QberEstimate {
    pub fn from_counts(n_sifted: u64, n_errors: u64) -> Result<Self> {
        if n_sifted == 0 {
            return Err(Error::InsufficientStatistics);
        }
        let qber = n_errors as f64 / n_sifted as f64;
        Ok(Self {
            qber,
            std_error: (qber * (1.0 - qber) / n_sifted as f64).sqrt(),
            n_sifted,
            n_errors,
        })
    }
}

pub fn estimate_qber(sifted: &[(u8, u8)]) -> Result<QberEstimate> {
    let errors = sifted.iter().filter(|(a, b)| a != b).count();
    QberEstimate::from_counts(sifted.len() as u64, errors as u64)
}

/// Streaming sift + error count, for sessions too long to keep in memory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QberTally {
    pub n_sifted: u64,
    pub n_errors: u64,
}

impl QberTally {
    pub fn push(&mut self, record: &DetectionRecord) {
        if let Some((a, b)) = sifted_pair(record) {
            self.n_sifted += 1;
            self.n_errors += u64::from(a != b);
        }
    }

    pub fn estimate(&self) -> Result<QberEstimate> {
        QberEstimate::from_counts(self.n_sifted, self.n_errors)
    }
}

/// Session QBER without materializing the records.
pub fn session_qber(cfg: &SessionConfig) -> Result<QberEstimate> {
    let mut tally = QberTally::default();
    simulate_session(cfg, |r, _| tally.push(r))?;
    tally.estimate()
}

pub const RECORD_CSV_HEADER: [&str; 6] = [
    "bit_index",
    "alice_basis",
    "alice_bit",
    "bob_basis",
    "click_d0",
    "click_d1",
];

/// Write session records as CSV (clicks as 0/1).
pub fn write_records_csv<W: Write>(records: &[DetectionRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORD_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.bit_index.to_string(),
            r.alice.basis.as_str().to_owned(),
            r.alice.bit.to_string(),
            r.bob_basis.as_str().to_owned(),
            u8::from(r.clicked_d0).to_string(),
            u8::from(r.clicked_d1).to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
