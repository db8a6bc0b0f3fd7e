//! Windowed time- and frequency-domain features, 27 per sensor.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::{Domain, FeatureMatrix, Label, RawRecording};
use crate::error::{Error, Result};

pub const FEATURES_PER_SENSOR: usize = 27;
pub const SENSORS_PER_POSITION: usize = 3;
pub const MIN_WINDOW: usize = 8;
const MODE_BINS: usize = 10;
const NUM_PEAKS: usize = 5;

/// Names of the per-sensor features in output order. This order is part of
/// the feature-matrix file contract.
pub const FEATURE_NAMES: [&str; FEATURES_PER_SENSOR] = [
    "mean",
    "std",
    "min",
    "max",
    "mode",
    "range",
    "mean_crossing_rate",
    "dc",
    "peak1_mag",
    "peak2_mag",
    "peak3_mag",
    "peak4_mag",
    "peak5_mag",
    "peak1_freq",
    "peak2_freq",
    "peak3_freq",
    "peak4_freq",
    "peak5_freq",
    "energy",
    "spectral_mean",
    "spectral_std",
    "spectral_skewness",
    "spectral_kurtosis",
    "amplitude_mean",
    "amplitude_std",
    "amplitude_skewness",
    "amplitude_kurtosis",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    MajorityLabel,
    CenterLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowingConfig {
    pub window_seconds: f64,
    pub overlap_fraction: f64,
    pub label_rule: LabelRule,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self {
            window_seconds: 5.0,
            overlap_fraction: 0.5,
            label_rule: LabelRule::MajorityLabel,
        }
    }
}

impl WindowingConfig {
    /// Window length and stride in samples at `sample_rate`.
    pub fn geometry(&self, sample_rate: f64) -> Result<(usize, usize)> {
        if !(self.window_seconds.is_finite() && self.window_seconds > 0.0) {
            return Err(Error::InvalidArgument("window_seconds must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::InvalidArgument("overlap_fraction must lie in [0, 1)".into()));
        }
        let len = (self.window_seconds * sample_rate).round() as usize;
        if len < MIN_WINDOW {
            return Err(Error::WindowTooShort(len));
        }
        let stride = ((len as f64) * (1.0 - self.overlap_fraction)).round().max(1.0) as usize;
        Ok((len, stride))
    }
}

/// Sample range and label of one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledWindow {
    pub start: usize,
    pub len: usize,
    pub label: Label,
}

impl LabeledWindow {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Element-wise Euclidean norm of three axis series.
pub fn fuse_axes(x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: if x.len() != y.len() { y.len() } else { z.len() },
        });
    }
    Ok(x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
        .collect())
}

fn window_label(labels: &[Label], rule: LabelRule) -> Label {
    match rule {
        LabelRule::CenterLabel => labels[labels.len() / 2],
        LabelRule::MajorityLabel => {
            let mut counts = std::collections::BTreeMap::new();
            for &l in labels {
                *counts.entry(l).or_insert(0usize) += 1;
            }
            // ties go to the smallest class id
            let best = counts.values().copied().max().unwrap_or(0);
            counts
                .into_iter()
                .find(|&(_, n)| n == best)
                .map(|(l, _)| l)
                .unwrap_or(labels[0])
        }
    }
}

/// Sliding windows over a recording; the trailing partial window is dropped.
pub fn window_slices(recording: &RawRecording, cfg: &WindowingConfig) -> Result<Vec<LabeledWindow>> {
    let (len, stride) = cfg.geometry(recording.sample_rate)?;
    let n = recording.len();
    if n < len {
        return Err(Error::RecordingTooShort { len: n, window: len });
    }
    Ok((0..=(n - len) / stride)
        .map(|k| {
            let start = k * stride;
            LabeledWindow {
                start,
                len,
                label: window_label(&recording.labels[start..start + len], cfg.label_rule),
            }
        })
        .collect())
}

fn moments(values: &[f64], weights: Option<&[f64]>) -> [f64; 4] {
    let total: f64 = match weights {
        Some(w) => w.iter().sum(),
        None => values.len() as f64,
    };
    if total <= 0.0 {
        return [0.0; 4];
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mean = values.iter().enumerate().map(|(i, v)| w(i) * v).sum::<f64>() / total;
    let central = |p: i32| {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| w(i) * (v - mean).powi(p))
            .sum::<f64>()
            / total
    };
    let var = central(2);
    let std = var.sqrt();
    // relative cutoff: round-off leaves a tiny variance on constant input
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if std <= 1e-12 * scale {
        return [mean, 0.0, 0.0, 0.0];
    }
    [mean, std, central(3) / (var * std), central(4) / (var * var)]
}

fn histogram_mode(window: &[f64], min: f64, max: f64) -> f64 {
    if max <= min {
        return min;
    }
    let width = (max - min) / MODE_BINS as f64;
    let mut counts = [0usize; MODE_BINS];
    for &v in window {
        let bin = (((v - min) / width) as usize).min(MODE_BINS - 1);
        counts[bin] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    min + (best as f64 + 0.5) * width
}

/// One-sided magnitude spectrum |X_k| / n for k = 0..=n/2.
fn magnitude_spectrum(window: &[f64]) -> Vec<f64> {
    let n = window.len();
    let mut buf: Vec<Complex<f64>> = window.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut mags: Vec<f64> = buf[..=n / 2].iter().map(|c| c.norm() / n as f64).collect();
    // round-off floor: exact zeros keep constant windows free of phantom peaks
    let floor = 1e-12 * mags.iter().copied().fold(0.0, f64::max);
    mags.iter_mut().skip(1).filter(|m| **m < floor).for_each(|m| *m = 0.0);
    mags
}

/// Bins 1..=n/2 that are local maxima: strictly above the left neighbour and
/// not below the right one. The edges compare against their single in-range
/// neighbour.
fn spectral_peaks(mags: &[f64]) -> Vec<(usize, f64)> {
    let last = mags.len() - 1;
    let mut peaks: Vec<(usize, f64)> = (1..=last)
        .filter(|&k| {
            let left_ok = k == 1 || mags[k] > mags[k - 1];
            let right_ok = k == last || mags[k] >= mags[k + 1];
            left_ok && right_ok && mags[k] > 0.0
        })
        .map(|k| (k, mags[k]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks.truncate(NUM_PEAKS);
    peaks
}

/// The 27 per-sensor features of one window, in [`FEATURE_NAMES`] order.
pub fn extract_sensor_features(window: &[f64], sample_rate: f64) -> Result<[f64; FEATURES_PER_SENSOR]> {
    let n = window.len();
    if n < MIN_WINDOW {
        return Err(Error::WindowTooShort(n));
    }
    if let Some(col) = window.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0, col });
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }

    let amplitude = moments(window, None);
    let mean = amplitude[0];
    let std = amplitude[1];
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mode = histogram_mode(window, min, max);

    let crossings = window
        .windows(2)
        .filter(|p| (p[0] - mean) * (p[1] - mean) < 0.0)
        .count();
    let mcr = crossings as f64 / (n - 1) as f64;

    let mags = magnitude_spectrum(window);
    let dc = mags[0];
    let bin_hz = sample_rate / n as f64;
    let peaks = spectral_peaks(&mags);
    let mut peak_mags = [0.0; NUM_PEAKS];
    let mut peak_freqs = [0.0; NUM_PEAKS];
    for (i, &(k, m)) in peaks.iter().enumerate() {
        peak_mags[i] = m;
        peak_freqs[i] = k as f64 * bin_hz;
    }

    let energy = window.iter().map(|v| v * v).sum::<f64>() / n as f64;

    let freqs: Vec<f64> = (1..mags.len()).map(|k| k as f64 * bin_hz).collect();
    let spectral = moments(&freqs, Some(&mags[1..]));

    let mut out = [0.0; FEATURES_PER_SENSOR];
    out[0] = mean;
    out[1] = std;
    out[2] = min;
    out[3] = max;
    out[4] = mode;
    out[5] = max - min;
    out[6] = mcr;
    out[7] = dc;
    out[8..13].copy_from_slice(&peak_mags);
    out[13..18].copy_from_slice(&peak_freqs);
    out[18] = energy;
    out[19..23].copy_from_slice(&spectral);
    out[23..27].copy_from_slice(&amplitude);
    Ok(out)
}

/// Windows a three-sensor recording into an 81-column labeled domain.
pub fn extract_position_features(recording: &RawRecording, cfg: &WindowingConfig) -> Result<Domain> {
    if recording.channels.len() != SENSORS_PER_POSITION {
        return Err(Error::ChannelCount {
            expected: SENSORS_PER_POSITION,
            got: recording.channels.len(),
        });
    }
    let windows = window_slices(recording, cfg)?;
    let rows = windows
        .par_iter()
        .map(|w| {
            let mut row = Vec::with_capacity(FEATURES_PER_SENSOR * SENSORS_PER_POSITION);
            for ch in &recording.channels {
                row.extend_from_slice(&extract_sensor_features(&ch[w.range()], recording.sample_rate)?);
            }
            Ok(row)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let labels = windows.iter().map(|w| w.label).collect();
    let features = FeatureMatrix::from_rows(&rows)?;
    Ok(Domain::labeled(features, labels)?
        .with_ids(recording.dataset_id.clone(), recording.position_id.clone()))
}

/// Column names for a position feature matrix: `<channel>_<feature>`.
pub fn position_feature_names(channel_names: &[String]) -> Vec<String> {
    channel_names
        .iter()
        .flat_map(|ch| FEATURE_NAMES.iter().map(move |f| format!("{ch}_{f}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn recording(n: usize, rate: f64, channels: usize) -> RawRecording {
        let chans = (0..channels)
            .map(|c| (0..n).map(|i| ((i + c) as f64 * 0.37).sin() + 2.0).collect())
            .collect();
        RawRecording::new(
            rate,
            (0..channels).map(|c| format!("s{c}")).collect(),
            chans,
            vec![1; n],
        )
        .unwrap()
    }

    #[test]
    fn fuse_axes_cases() {
        assert_eq!(fuse_axes(&[3.0], &[4.0], &[0.0]).unwrap(), vec![5.0]);
        assert_eq!(fuse_axes(&[0.0], &[0.0], &[0.0]).unwrap(), vec![0.0]);
        let v = fuse_axes(&[1.0], &[1.0], &[1.0]).unwrap()[0];
        assert!((v - 1.7320508075688772).abs() < 1e-12);
        assert!(fuse_axes(&[1.0, 2.0], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn window_counting() {
        let rec = recording(100, 10.0, 1);
        let w = window_slices(&rec, &WindowingConfig::default()).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|w| w.len == 50));
        assert_eq!(w[1].start, 25);

        let cfg = WindowingConfig {
            overlap_fraction: 0.0,
            ..Default::default()
        };
        let w = window_slices(&rec, &cfg).unwrap();
        assert_eq!(w.iter().map(|w| w.start).collect::<Vec<_>>(), vec![0, 50]);
    }

    #[test]
    fn short_recording_rejected() {
        let rec = recording(40, 10.0, 1);
        assert!(matches!(
            window_slices(&rec, &WindowingConfig::default()),
            Err(Error::RecordingTooShort { len: 40, window: 50 })
        ));
        let rec = recording(40, 1.0, 1);
        assert!(matches!(
            window_slices(&rec, &WindowingConfig::default()),
            Err(Error::WindowTooShort(5))
        ));
    }

    #[test]
    fn label_rules() {
        assert_eq!(window_label(&[1, 1, 1, 2], LabelRule::MajorityLabel), 1);
        assert_eq!(window_label(&[2, 2, 1, 1], LabelRule::MajorityLabel), 1);
        assert_eq!(window_label(&[1, 1, 3, 2], LabelRule::CenterLabel), 3);
    }

    #[test]
    fn constant_window() {
        let f = extract_sensor_features(&[2.0; 32], 10.0).unwrap();
        assert_eq!(&f[0..7], &[2.0, 0.0, 2.0, 2.0, 2.0, 0.0, 0.0]);
        assert!((f[7] - 2.0).abs() < 1e-12);
        assert!(f[8..18].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn alternating_window() {
        let w: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let f = extract_sensor_features(&w, 32.0).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[6], 1.0);
        // all energy sits in the Nyquist bin
        assert!((f[8] - 1.0).abs() < 1e-12);
        assert!((f[13] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_peak() {
        let rate = 32.0;
        let w: Vec<f64> = (0..320).map(|i| (2.0 * PI * 2.0 * i as f64 / rate).sin()).collect();
        let f = extract_sensor_features(&w, rate).unwrap();
        assert!((f[13] - 2.0).abs() < 1e-9);
        assert!((f[8] - 0.5).abs() < 1e-9);
        assert!((f[18] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn short_or_non_finite_window() {
        assert!(matches!(extract_sensor_features(&[1.0; 7], 1.0), Err(Error::WindowTooShort(7))));
        let mut w = vec![1.0; 8];
        w[3] = f64::INFINITY;
        assert!(matches!(extract_sensor_features(&w, 1.0), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn position_features_shape_and_channel_check() {
        let rec = recording(125, 10.0, 3);
        let d = extract_position_features(&rec, &WindowingConfig::default()).unwrap();
        assert_eq!(d.n_rows(), 4);
        assert_eq!(d.dim(), 81);
        let again = extract_position_features(&rec, &WindowingConfig::default()).unwrap();
        assert_eq!(d, again);

        let rec = recording(125, 10.0, 2);
        assert!(matches!(
            extract_position_features(&rec, &WindowingConfig::default()),
            Err(Error::ChannelCount { expected: 3, got: 2 })
        ));
    }
}
