//! Parsing of pose/AU CSVs and PCM audio, resampling, and window planning.
//!
//! Every downstream encoder consumes streams through [`WindowPlan`]: 2 s windows
//! with a 1 s hop unless configured otherwise. Pose and AU streams are brought
//! to a common frame rate ([`CANONICAL_FPS`]) before windowing.

mod au;
mod csv_util;
mod pose;
mod wav;
mod window;

pub use au::{au_name, parse_au_csv, AUSeries, AuColumns, AuFrame, AU_MAX_INTENSITY, AU_NUMBERS, N_AUS};
pub use pose::{parse_pose_csv, HeadPoseSeries, PoseColumns, PoseCsvOptions};
pub use wav::{read_wav, AudioTrack, MIN_SAMPLE_RATE};
pub use window::{plan_windows, WindowPlan, WindowSpec};

/// Frame rate all pose and AU streams are resampled to before windowing.
pub const CANONICAL_FPS: f64 = 30.0;

/// Linear interpolation of a uniformly sampled signal onto a new rate.
/// The output covers the same time span, `[0, (n-1)/from]`.
pub fn resample_linear(values: &[f64], from_rate: f64, to_rate: f64) -> Vec<f64> {
    if values.len() <= 1 {
        return values.to_vec();
    }
    let span = (values.len() - 1) as f64 / from_rate;
    let n_out = (span * to_rate + 1e-9).floor() as usize + 1;
    (0..n_out)
        .map(|k| {
            let pos = k as f64 / to_rate * from_rate;
            let i = pos.floor() as usize;
            if i + 1 >= values.len() {
                return values[values.len() - 1];
            }
            let frac = pos - i as f64;
            values[i] + frac * (values[i + 1] - values[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_identity_rate() {
        let v = vec![1.0, 2.0, 4.0];
        assert_eq!(resample_linear(&v, 30.0, 30.0), v);
    }

    #[test]
    fn resample_upsamples_linearly() {
        let v = vec![0.0, 1.0];
        let r = resample_linear(&v, 1.0, 4.0);
        assert_eq!(r, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
