//! Fixed-length overlapping windows over a sampled stream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Window length and hop in seconds. The default is 2 s windows with 50% overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_len_s: f64,
    pub hop_s: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            window_len_s: 2.0,
            hop_s: 1.0,
        }
    }
}

impl WindowSpec {
    pub fn new(window_len_s: f64, hop_s: f64) -> Result<Self> {
        if !(window_len_s > 0.0 && window_len_s.is_finite()) {
            return Err(Error::Config(format!(
                "window length must be positive, got {window_len_s}"
            )));
        }
        if !(hop_s > 0.0 && hop_s <= window_len_s) {
            return Err(Error::Config(format!(
                "hop must satisfy 0 < hop <= window length, got {hop_s}"
            )));
        }
        Ok(WindowSpec { window_len_s, hop_s })
    }

    /// Samples per window at `rate`.
    pub fn window_samples(&self, rate: f64) -> usize {
        (self.window_len_s * rate).round() as usize
    }

    pub fn plan(&self, stream_len: usize, rate: f64) -> Result<WindowPlan> {
        plan_windows(stream_len, rate, self.window_len_s, self.hop_s)
    }
}

/// Concrete window boundaries over one stream. Boundaries are half-open
/// `[start, end)` sample ranges in increasing start order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window_len_s: f64,
    pub hop_s: f64,
    pub rate: f64,
    pub n_windows: usize,
    pub boundaries: Vec<(usize, usize)>,
}

impl WindowPlan {
    pub fn window_samples(&self) -> usize {
        self.boundaries.first().map(|&(s, e)| e - s).unwrap_or(0)
    }
}

/// Lays out windows over a stream of `stream_len` samples at `rate` samples per second.
///
/// Window `i` spans `[round(i*hop*rate), round(i*hop*rate) + round(window*rate))`;
/// a trailing partial window is dropped.
pub fn plan_windows(stream_len: usize, rate: f64, window_len_s: f64, hop_s: f64) -> Result<WindowPlan> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Config(format!("rate must be positive, got {rate}")));
    }
    let spec = WindowSpec::new(window_len_s, hop_s)?;
    let width = spec.window_samples(rate);
    if width == 0 {
        return Err(Error::Config("window shorter than one sample".into()));
    }
    if stream_len < width {
        return Err(Error::TooShort(format!(
            "stream of {stream_len} samples is shorter than one {window_len_s} s window ({width} samples)"
        )));
    }
    let mut boundaries = Vec::new();
    for i in 0.. {
        let start = (i as f64 * hop_s * rate).round() as usize;
        let end = start + width;
        if end > stream_len {
            break;
        }
        boundaries.push((start, end));
    }
    Ok(WindowPlan {
        window_len_s,
        hop_s,
        rate,
        n_windows: boundaries.len(),
        boundaries,
    })
}
