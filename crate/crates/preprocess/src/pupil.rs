//! Pupil trace cleaning: reject implausible samples, bridge blinks, resample
//! to a uniform grid, smooth, and subtract the onset baseline.

use gazefusion_core::{GazeSample, StimulusConfig};

use crate::config::PreprocessConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CleanPupilTrace {
    /// Baseline-corrected diameter (mm) on the uniform grid `k / gaze_hz`.
    pub values: Vec<f64>,
    /// True where no valid raw sample backed the grid point.
    pub interpolated_mask: Vec<bool>,
    pub baseline_mm: f64,
    pub rate_hz: u32,
}

fn usable(s: &GazeSample, cfg: &PreprocessConfig) -> bool {
    s.valid && s.pupil_mm.is_finite() && s.t.is_finite() && (cfg.pupil_min_mm..=cfg.pupil_max_mm).contains(&s.pupil_mm)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Resample valid `(t, value)` points onto `n` grid times `k / hz`.
///
/// A grid point between two valid samples whose spacing is at most
/// `max_gap_s` is linearly interpolated; anything inside a longer gap (or
/// beyond the ends by more than `max_gap_s`) gets `fill`.
pub fn resample(points: &[(f64, f64)], n: usize, hz: f64, max_gap_s: f64, fill: f64) -> (Vec<f64>, Vec<bool>) {
    let eps = 1e-9;
    let half = 0.5 / hz;
    let mut out = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut j = 0; // first point with t >= tk
    for k in 0..n {
        let tk = k as f64 / hz;
        while j < points.len() && points[j].0 < tk - eps {
            j += 1;
        }
        let next = points.get(j);
        let prev = if j > 0 { points.get(j - 1) } else { None };
        let backed = next.is_some_and(|p| (p.0 - tk).abs() < half) || prev.is_some_and(|p| (tk - p.0).abs() < half);
        let v = match (prev, next) {
            (_, Some(&(tn, vn))) if (tn - tk).abs() <= eps => vn,
            (Some(&(tp, vp)), Some(&(tn, vn))) => {
                if tn - tp <= max_gap_s + eps {
                    vp + (vn - vp) * (tk - tp) / (tn - tp)
                } else {
                    fill
                }
            }
            (None, Some(&(tn, vn))) if tn - tk <= max_gap_s + eps => vn,
            (Some(&(tp, vp)), None) if tk - tp <= max_gap_s + eps => vp,
            _ => fill,
        };
        out.push(v);
        mask.push(!backed);
    }
    (out, mask)
}

/// Centered moving average with edge truncation.
pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 || x.is_empty() {
        return x.to_vec();
    }
    let left = width / 2;
    let right = width - 1 - left;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let a = i.saturating_sub(left);
            let b = (i + right + 1).min(x.len());
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

pub fn clean_pupil(gaze: &[GazeSample], stimulus: &StimulusConfig, cfg: &PreprocessConfig) -> Result<CleanPupilTrace> {
    let total = gaze.len();
    let points: Vec<(f64, f64)> = gaze.iter().filter(|s| usable(s, cfg)).map(|s| (s.t, s.pupil_mm)).collect();
    let valid_fraction = if total == 0 { 0.0 } else { points.len() as f64 / total as f64 };
    if valid_fraction < cfg.min_valid_fraction || points.is_empty() {
        return Err(Error::Quality { valid_fraction, required: cfg.min_valid_fraction });
    }
    let hz = stimulus.gaze_hz as f64;
    let n = stimulus.nominal_gaze_samples();
    let fill = median(&mut points.iter().map(|p| p.1).collect::<Vec<_>>());
    let (raw, mask) = resample(&points, n, hz, cfg.max_gap_ms / 1000.0, fill);
    let width = ((cfg.smooth_ms / 1000.0) * hz).round().max(1.0) as usize;
    let smooth = moving_average(&raw, width);
    let nb = (((cfg.baseline_ms / 1000.0) * hz).round() as usize).clamp(1, n);
    let baseline_mm = smooth[..nb].iter().sum::<f64>() / nb as f64;
    if !(baseline_mm > 0.0) {
        return Err(Error::Invalid(format!("non-positive pupil baseline {baseline_mm}")));
    }
    let values = smooth.iter().map(|v| v - baseline_mm).collect();
    Ok(CleanPupilTrace { values, interpolated_mask: mask, baseline_mm, rate_hz: stimulus.gaze_hz })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: usize, f: impl Fn(usize) -> (f64, bool)) -> Vec<GazeSample> {
        (0..n)
            .map(|k| {
                let (p, valid) = f(k);
                GazeSample { t: k as f64 / 60.0, x: 960.0, y: 540.0, pupil_mm: p, valid }
            })
            .collect()
    }

    #[test]
    fn constant_trace() {
        let g = trace(4800, |_| (4.0, true));
        let c = clean_pupil(&g, &StimulusConfig::default(), &PreprocessConfig::default()).unwrap();
        assert_eq!(c.values.len(), 4800);
        assert_eq!(c.baseline_mm, 4.0);
        assert!(c.values.iter().all(|v| v.abs() < 1e-12));
        assert!(c.interpolated_mask.iter().all(|m| !m));
    }

    #[test]
    fn short_gap_lies_on_ramp() {
        // two dropped samples = 50 ms between the surrounding valid ones
        let ramp = |k: usize| 3.0 + 0.001 * k as f64;
        let g = trace(4800, |k| (ramp(k), !(1000..1002).contains(&k)));
        let pts: Vec<(f64, f64)> = g.iter().filter(|s| s.valid).map(|s| (s.t, s.pupil_mm)).collect();
        let (v, mask) = resample(&pts, 4800, 60.0, 0.075, -1.0);
        for k in 998..1004 {
            assert!((v[k] - ramp(k)).abs() < 1e-9, "k={k}: {} vs {}", v[k], ramp(k));
        }
        assert!(mask[1000] && mask[1001] && !mask[999]);
        // after smoothing the interior is still linear
        let c = clean_pupil(&g, &StimulusConfig::default(), &PreprocessConfig::default()).unwrap();
        for k in 995..1006 {
            let d2 = c.values[k + 1] - 2.0 * c.values[k] + c.values[k - 1];
            assert!(d2.abs() < 1e-9);
        }
    }

    #[test]
    fn long_gap_filled_with_median() {
        let g = trace(4800, |k| (if k < 2400 { 3.0 } else { 5.0 }, !(100..130).contains(&k)));
        let pts: Vec<(f64, f64)> = g.iter().filter(|s| s.valid).map(|s| (s.t, s.pupil_mm)).collect();
        let (v, _) = resample(&pts, 4800, 60.0, 0.075, 4.0);
        assert!(v[100..130].iter().all(|&x| x == 4.0));
    }

    #[test]
    fn out_of_range_pupil_rejected_and_quality_threshold() {
        let g = trace(4800, |k| (if k % 10 < 6 { 12.0 } else { 4.0 }, true));
        match clean_pupil(&g, &StimulusConfig::default(), &PreprocessConfig::default()) {
            Err(Error::Quality { valid_fraction, .. }) => assert!((valid_fraction - 0.4).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let g = trace(4800, |k| (4.0, k % 10 >= 6));
        assert!(matches!(clean_pupil(&g, &StimulusConfig::default(), &PreprocessConfig::default()), Err(Error::Quality { .. })));
    }

    #[test]
    fn moving_average_preserves_constants() {
        assert_eq!(moving_average(&[2.0; 9], 6), vec![2.0; 9]);
        assert_eq!(moving_average(&[1.0, 2.0, 3.0], 1), vec![1.0, 2.0, 3.0]);
    }
}
