//! Mel-frequency cepstral coefficients.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Symmetric Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Triangular filters over FFT bins `0..=nfft/2`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mel` rows of `nfft/2 + 1` weights
    pub weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    /// `n_mel` filters with centres equally spaced on the HTK mel scale
    /// between 0 Hz and the Nyquist frequency.
    pub fn htk(n_mel: usize, nfft: usize, sample_rate: u32) -> Self {
        let sr = sample_rate as f64;
        let top = hz_to_mel(sr / 2.0);
        let edges: Vec<f64> = (0..n_mel + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mel + 1) as f64))
            .collect();
        let bins = nfft / 2 + 1;
        let weights = (0..n_mel)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..bins)
                    .map(|k| {
                        let f = k as f64 * sr / nfft as f64;
                        if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        MelFilterbank { weights }
    }

    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }
}

/// Orthonormal DCT-II, first `n_out` coefficients.
pub fn dct_ii_orthonormal(x: &[f64], n_out: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * m)).cos())
                .sum();
            let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            scale * s
        })
        .collect()
}

/// MFCC extractor for a fixed frame length and sample rate.
#[derive(Clone)]
pub struct MfccExtractor {
    pub frame_len: usize,
    pub nfft: usize,
    pub n_coef: usize,
    window: Vec<f64>,
    filterbank: MelFilterbank,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor")
            .field("frame_len", &self.frame_len)
            .field("nfft", &self.nfft)
            .field("n_mel", &self.filterbank.n_filters())
            .field("n_coef", &self.n_coef)
            .finish()
    }
}

impl MfccExtractor {
    pub fn new(frame_len: usize, sample_rate: u32, n_mel: usize, n_coef: usize) -> Self {
        let nfft = frame_len.next_power_of_two();
        Self::with_filterbank(frame_len, MelFilterbank::htk(n_mel, nfft, sample_rate), n_coef)
    }

    /// Uses a caller-supplied filterbank; its row length fixes the FFT size.
    pub fn with_filterbank(frame_len: usize, filterbank: MelFilterbank, n_coef: usize) -> Self {
        let bins = filterbank.weights.first().map_or(1, |w| w.len());
        let nfft = 2 * (bins - 1);
        assert!(nfft >= frame_len, "filterbank too narrow for frame length");
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        MfccExtractor {
            frame_len,
            nfft,
            n_coef,
            window: hann(frame_len),
            filterbank,
            fft,
        }
    }

    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex::new(x * w, 0.0))
            .collect();
        buf.resize(self.nfft, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf[..=self.nfft / 2].iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn compute(&self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), self.frame_len, "frame length");
        let power = self.power_spectrum(frame);
        let log_mel: Vec<f64> = self
            .filterbank
            .weights
            .iter()
            .map(|w| {
                let e: f64 = w.iter().zip(&power).map(|(a, b)| a * b).sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect();
        dct_ii_orthonormal(&log_mel, self.n_coef)
    }
}
