//! Functional generator and polarization-insensitive phase modulator.
//!
//! The generator is triggered at the frame start, holds for `delay_ns`, then
//! steps through one 12-bit code per pulse period. Codes map linearly onto
//! `[0, 2π)`. The modulator phases one polarization axis per pass; a Faraday
//! mirror between the two passes swaps the axes, so each component is phased
//! once, `roundtrip_ns` apart.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::optics::{faraday_swap, PolarizedAmplitude, Pulse};

pub const CODE_BITS: u32 = 12;
pub const CODE_LEVELS: u32 = 1 << CODE_BITS;
pub const MAX_CODE: u32 = CODE_LEVELS - 1;
pub const DEFAULT_FRAME_LEN: usize = 504;

/// Phase step between adjacent codes, 2π/4096.
pub const PHASE_STEP: f64 = TAU / CODE_LEVELS as f64;

/// One frame of generator codes, one per pulse period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasePattern {
    codes: Vec<u16>,
}

impl PhasePattern {
    /// Validates range and frame length.
    pub fn new(codes: Vec<u16>, frame_len: usize) -> Result<Self> {
        if codes.len() != frame_len {
            return Err(Error::PatternLength {
                expected: frame_len,
                found: codes.len(),
            });
        }
        if let Some(&bad) = codes.iter().find(|&&c| u32::from(c) > MAX_CODE) {
            return Err(Error::CodeOutOfRange(bad.into()));
        }
        Ok(Self { codes })
    }

    /// A frame holding `code` in every slot.
    pub fn constant(code: u16, frame_len: usize) -> Result<Self> {
        Self::new(vec![code; frame_len], frame_len)
    }

    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Phase of slot `slot`, or 0 when the generator is idle.
    pub fn slot_phase(&self, slot: i64) -> f64 {
        usize::try_from(slot)
            .ok()
            .and_then(|s| self.codes.get(s))
            .map_or(0.0, |&c| f64::from(c) * PHASE_STEP)
    }

    /// One code per line.
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::with_capacity(self.codes.len() * 5);
        for c in &self.codes {
            writeln!(out, "{c}").expect("writing to a String cannot fail");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: impl AsRef<Path>, frame_len: usize) -> Result<Self> {
        Self::new(read_codes(path)?, frame_len)
    }
}

/// Read a code file (one integer per line, blank lines and `#` comments
/// skipped). Each code must lie in `[0, 4095]`; the count is unconstrained.
pub fn read_codes(path: impl AsRef<Path>) -> Result<Vec<u16>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut codes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let value: i64 = line
            .parse()
            .map_err(|e| parse_err(format!("`{line}`: {e}")))?;
        if !(0..=i64::from(MAX_CODE)).contains(&value) {
            return Err(parse_err(Error::CodeOutOfRange(value).to_string()));
        }
        codes.push(value as u16);
    }
    Ok(codes)
}

/// Generator timing. `delay_ns` is the hold after the trigger and may be
/// negative; it is the variable of the delay scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizerTiming {
    pub period_ns: f64,
    pub delay_ns: f64,
    pub roundtrip_ns: f64,
}

impl Default for RandomizerTiming {
    fn default() -> Self {
        Self {
            period_ns: 200.0,
            delay_ns: 0.0,
            roundtrip_ns: 20.0,
        }
    }
}

impl RandomizerTiming {
    pub fn validate(&self) -> Result<()> {
        if !(self.period_ns > 0.0) || !self.period_ns.is_finite() {
            return Err(Error::invalid(
                "period_ns",
                format!("{} must be > 0", self.period_ns),
            ));
        }
        if !(self.roundtrip_ns >= 0.0) || !self.roundtrip_ns.is_finite() {
            return Err(Error::invalid(
                "roundtrip_ns",
                format!("{} must be >= 0", self.roundtrip_ns),
            ));
        }
        if !self.delay_ns.is_finite() {
            return Err(Error::invalid("delay_ns", "must be finite"));
        }
        Ok(())
    }

    /// Pattern slot active at time `t_ns`.
    pub fn slot_at(&self, t_ns: f64) -> i64 {
        ((t_ns - self.delay_ns) / self.period_ns).floor() as i64
    }
}

/// Draw a frame of i.i.d. uniform 12-bit codes.
pub fn generate_pattern<R: Rng + ?Sized>(rng: &mut R, frame_len: usize) -> Result<PhasePattern> {
    if frame_len == 0 {
        return Err(Error::invalid("frame_len", "must be > 0"));
    }
    let codes = (0..frame_len)
        .map(|_| rng.random_range(0..CODE_LEVELS as u16))
        .collect();
    Ok(PhasePattern { codes })
}

pub fn code_to_phase(code: i64) -> Result<f64> {
    if !(0..=i64::from(MAX_CODE)).contains(&code) {
        return Err(Error::CodeOutOfRange(code));
    }
    Ok(code as f64 * PHASE_STEP)
}

/// Modulator phase at time `t_ns`.
pub fn phase_at(t_ns: f64, pattern: &PhasePattern, timing: &RandomizerTiming) -> f64 {
    pattern.slot_phase(timing.slot_at(t_ns))
}

/// Double pass through the polarization-insensitive modulator.
///
/// The forward pass at `t` phases H, the mirror swaps the axes, the return
/// pass at `t + roundtrip_ns` phases the new H. The pulse leaves with
/// `h = v_in·e^{iφ_ret}` and `v = h_in·e^{iφ_fwd}`.
pub fn modulate_pi(pulse: Pulse, pattern: &PhasePattern, timing: &RandomizerTiming) -> Pulse {
    let forward = phase_at(pulse.t_ns, pattern, timing);
    let back = phase_at(pulse.t_ns + timing.roundtrip_ns, pattern, timing);
    modulate_with(pulse, forward, back)
}

/// [`modulate_pi`] with the two pass phases given directly.
pub fn modulate_with(pulse: Pulse, forward: f64, back: f64) -> Pulse {
    use num_complex::Complex64;
    let a = pulse.amplitude;
    let after_forward = PolarizedAmplitude::new(a.h * Complex64::cis(forward), a.v);
    let swapped = faraday_swap(after_forward);
    let out = PolarizedAmplitude::new(swapped.h * Complex64::cis(back), swapped.v);
    Pulse::new(out, pulse.t_ns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{apply_phase, interfere};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pattern(codes: &[u16]) -> PhasePattern {
        PhasePattern::new(codes.to_vec(), codes.len()).unwrap()
    }

    #[test]
    fn generated_frame_has_frame_length_and_valid_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = generate_pattern(&mut rng, DEFAULT_FRAME_LEN).unwrap();
        assert_eq!(p.len(), 504);
        assert!(p.codes().iter().all(|&c| u32::from(c) <= MAX_CODE));
        assert!(generate_pattern(&mut rng, 0).is_err());
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = generate_pattern(&mut ChaCha8Rng::seed_from_u64(11), 504).unwrap();
        let b = generate_pattern(&mut ChaCha8Rng::seed_from_u64(11), 504).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn code_to_phase_examples() {
        assert_eq!(code_to_phase(0).unwrap(), 0.0);
        assert!((code_to_phase(2048).unwrap() - PI).abs() < 1e-15);
        assert!((code_to_phase(1024).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(code_to_phase(4096).is_err());
        assert!(code_to_phase(-1).is_err());
    }

    #[test]
    fn code_to_phase_is_affine_and_monotone() {
        let phases: Vec<f64> = (0..4096).map(|c| code_to_phase(c).unwrap()).collect();
        for w in phases.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - TAU / 4096.0).abs() < 1e-14);
        }
    }

    #[test]
    fn phase_at_slot_boundaries() {
        let p = pattern(&[100, 200, 300]);
        let timing = RandomizerTiming {
            delay_ns: 37.0,
            ..Default::default()
        };
        assert_eq!(phase_at(37.0, &p, &timing), code_to_phase(100).unwrap());
        assert_eq!(phase_at(237.0, &p, &timing), code_to_phase(200).unwrap());
        assert_eq!(phase_at(36.0, &p, &timing), 0.0);
        assert_eq!(phase_at(37.0 + 600.0, &p, &timing), 0.0);
    }

    #[test]
    fn phase_at_is_piecewise_constant_with_exact_breakpoints() {
        let p = pattern(&[1, 2, 3, 4, 5]);
        let timing = RandomizerTiming {
            delay_ns: -30.0,
            ..Default::default()
        };
        for k in 0..5i64 {
            let start = timing.delay_ns + k as f64 * timing.period_ns;
            let expected = p.slot_phase(k);
            for dt in [0.0, 1.0, 99.5, 199.0] {
                assert_eq!(phase_at(start + dt, &p, &timing), expected);
            }
            assert_ne!(phase_at(start - 0.5, &p, &timing), expected);
        }
    }

    #[test]
    fn shifting_delay_by_a_period_relabels_slots() {
        let p = pattern(&[7, 8, 9, 10]);
        let base = RandomizerTiming::default();
        let shifted = RandomizerTiming {
            delay_ns: base.delay_ns + base.period_ns,
            ..base
        };
        for t in (0..800).step_by(10) {
            let t = t as f64;
            assert_eq!(base.slot_at(t), shifted.slot_at(t) + 1);
            assert_eq!(
                phase_at(t + base.period_ns, &p, &shifted),
                phase_at(t, &p, &base)
            );
        }
    }

    #[test]
    fn pure_h_takes_forward_phase_then_swaps() {
        let p = Pulse::new(PolarizedAmplitude::horizontal(1.0), 0.0);
        let out = modulate_with(p, FRAC_PI_2, 2.7);
        assert_eq!(out.amplitude.h, Complex64::new(0.0, 0.0));
        assert!((out.amplitude.v - Complex64::cis(FRAC_PI_2)).norm() < 1e-15);
    }

    #[test]
    fn no_transition_means_common_phase() {
        // Exhaustive over transition positions on a small frame: whenever the
        // window [t, t + roundtrip] holds no breakpoint the modulator is a
        // Faraday swap followed by a global phase.
        let p = pattern(&[512, 3000, 17, 4095]);
        let a = PolarizedAmplitude::new(Complex64::new(0.6, 0.1), Complex64::new(-0.3, 0.7));
        for delay in (-250..250).map(|d| d as f64) {
            let timing = RandomizerTiming {
                delay_ns: delay,
                ..Default::default()
            };
            for t in (0..800).step_by(7).map(|t| t as f64) {
                let pulse = Pulse::new(a, t);
                let crosses = timing.slot_at(t) != timing.slot_at(t + timing.roundtrip_ns);
                if crosses {
                    continue;
                }
                let phi = phase_at(t, &p, &timing);
                let out = modulate_pi(pulse, &p, &timing);
                let expect = apply_phase(faraday_swap(a), phi, phi);
                assert_eq!(out.amplitude, expect);
                assert!((out.mean_photon() - a.photon_number()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mismatched_passes_degrade_visibility_by_mismatched_fraction() {
        // Monte Carlo over random Jones vectors: the reference straddles a
        // transition while the signal does not; the error fraction at the
        // coupler must equal f·sin²(Δ/2), f being the power the reference's
        // forward pass phases (its input H).
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let f: f64 = rng.random();
            let theta: f64 = rng.random::<f64>() * TAU;
            let old: f64 = rng.random::<f64>() * TAU;
            let new: f64 = rng.random::<f64>() * TAU;
            let jones = PolarizedAmplitude::from_power_split(f, theta);
            let reference = modulate_with(Pulse::new(jones, 0.0), old, new);
            let signal = modulate_with(Pulse::new(jones, 50.0), new, new);
            let (d0, d1) = interfere(signal.amplitude, reference.amplitude);
            let expect = f * ((new - old) / 2.0).sin().powi(2);
            assert!((d1 / (d0 + d1) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pattern_file_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pattern.txt");
        let p = generate_pattern(&mut ChaCha8Rng::seed_from_u64(3), 504).unwrap();
        p.write_to(&path).unwrap();
        assert_eq!(PhasePattern::read_from(&path, 504).unwrap(), p);
        assert!(matches!(
            PhasePattern::read_from(&path, 503),
            Err(Error::PatternLength {
                expected: 503,
                found: 504
            })
        ));

        fs::write(&path, "1\n4096\n").unwrap();
        assert!(matches!(
            read_codes(&path),
            Err(Error::Parse { line: 2, .. })
        ));
        fs::write(&path, "1\nabc\n").unwrap();
        assert!(matches!(
            read_codes(&path),
            Err(Error::Parse { line: 2, .. })
        ));
        fs::write(&path, "# header\n5\n\n6\n").unwrap();
        assert_eq!(read_codes(&path).unwrap(), vec![5, 6]);
    }

    #[test]
    fn pattern_rejects_out_of_range_codes() {
        assert!(matches!(
            PhasePattern::new(vec![4096], 1),
            Err(Error::CodeOutOfRange(4096))
        ));
        assert!(PhasePattern::constant(4095, 3).is_ok());
    }
}
