//! Autocorrelation pitch and voicing.

/// Peaks within this fraction of the global maximum count as candidates;
/// the shortest such lag wins, which suppresses octave-down errors.
const PEAK_FRACTION: f64 = 0.9;

pub const VOICING_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchConfig {
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            fmin: 60.0,
            fmax: 400.0,
        }
    }
}

/// Normalized autocorrelation at `lag`.
pub fn normalized_autocorrelation(frame: &[f64], lag: usize) -> f64 {
    let n = frame.len();
    if lag >= n {
        return 0.0;
    }
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for t in 0..n - lag {
        let a = frame[t];
        let b = frame[t + lag];
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    let denom = (xx * yy).sqrt();
    if denom > 0.0 {
        xy / denom
    } else {
        0.0
    }
}

/// Returns `(f0 Hz, voicing)`; `f0` is 0 when voicing is below 0.3.
pub fn estimate_f0(frame: &[f64], sample_rate: u32, config: &PitchConfig) -> (f64, f64) {
    let sr = sample_rate as f64;
    let lag_min = ((sr / config.fmax).floor() as usize).max(1);
    let lag_max = ((sr / config.fmin).ceil() as usize).min(frame.len().saturating_sub(2));
    if lag_max <= lag_min || frame.iter().all(|&v| v == 0.0) {
        return (0.0, 0.0);
    }
    // r[i] holds the correlation at lag_min - 1 + i
    let r: Vec<f64> = (lag_min - 1..=lag_max + 1)
        .map(|lag| normalized_autocorrelation(frame, lag))
        .collect();
    let at = |lag: usize| r[lag + 1 - lag_min];
    let global = (lag_min..=lag_max).map(at).fold(f64::NEG_INFINITY, f64::max);
    if global <= 0.0 {
        return (0.0, 0.0);
    }
    let peak = (lag_min..=lag_max)
        .find(|&lag| {
            let v = at(lag);
            v >= PEAK_FRACTION * global && v >= at(lag - 1) && v >= at(lag + 1)
        })
        .unwrap_or_else(|| (lag_min..=lag_max).find(|&lag| at(lag) == global).unwrap());
    let voicing = at(peak).clamp(0.0, 1.0);
    if voicing < VOICING_THRESHOLD {
        return (0.0, voicing);
    }
    let (a, b, c) = (at(peak - 1), at(peak), at(peak + 1));
    let curvature = a - 2.0 * b + c;
    let offset = if curvature < 0.0 {
        (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    (sr / (peak as f64 + offset), voicing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::seeded_rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn sine(freq: f64, sr: f64, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr).sin())
            .collect()
    }

    #[test]
    fn pure_tone() {
        let frame = sine(220.0, 16000.0, 1488, 0.5);
        let (f0, v) = estimate_f0(&frame, 16000, &PitchConfig::default());
        assert!((f0 - 220.0).abs() <= 5.0, "f0 {f0}");
        assert!(v > 0.9);
    }

    #[test]
    fn tones_across_the_range() {
        for freq in [80.0, 120.0, 175.0, 260.0, 390.0] {
            let frame = sine(freq, 16000.0, 1488, 0.3);
            let (f0, _) = estimate_f0(&frame, 16000, &PitchConfig::default());
            assert!((f0 - freq).abs() <= 0.02 * freq, "{freq}: {f0}");
        }
    }

    #[test]
    fn white_noise_is_unvoiced() {
        let mut rng = seeded_rng(3, 0);
        let mut pass = 0;
        for _ in 0..100 {
            let frame: Vec<f64> = (0..1488)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.3 * z
                })
                .collect();
            let (f0, v) = estimate_f0(&frame, 16000, &PitchConfig::default());
            if v < VOICING_THRESHOLD && f0 == 0.0 {
                pass += 1;
            }
        }
        assert!(pass >= 95, "{pass} of 100");
    }

    #[test]
    fn silence_is_unvoiced() {
        assert_eq!(estimate_f0(&[0.0; 1488], 16000, &PitchConfig::default()), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn amplitude_invariant(freq in 70.0f64..380.0, scale in 0.01f64..10.0) {
            let frame = sine(freq, 16000.0, 1488, 0.4);
            let scaled: Vec<f64> = frame.iter().map(|v| v * scale).collect();
            let a = estimate_f0(&frame, 16000, &PitchConfig::default());
            let b = estimate_f0(&scaled, 16000, &PitchConfig::default());
            prop_assert!((a.0 - b.0).abs() <= 1e-9);
            prop_assert!((a.1 - b.1).abs() <= 1e-9);
        }
    }
}
