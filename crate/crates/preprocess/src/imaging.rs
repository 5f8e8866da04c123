//! Time-series imaging of the pupil trace: piecewise aggregate approximation
//! followed by a Gramian angular summation field and a Markov transition
//! field per window.

use crate::error::{Error, Result};
use crate::pupil::CleanPupilTrace;

/// Per-window pupil images, `[window][channel][row][col]` with channel 0 the
/// GASF and channel 1 the MTF.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilImageSequence {
    pub windows: usize,
    pub size: usize,
    pub window_seconds: u32,
    pub data: Vec<f32>,
}

impl PupilImageSequence {
    pub fn image(&self, t: usize, channel: usize) -> &[f32] {
        let s2 = self.size * self.size;
        let off = (t * 2 + channel) * s2;
        &self.data[off..off + s2]
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.windows, 2, self.size, self.size]
    }
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Piecewise aggregate approximation to `segments` points. Lengths that do
/// not divide evenly are handled with fractional sample weights.
pub fn paa(x: &[f64], segments: usize) -> Vec<f64> {
    let n = x.len();
    assert!(segments > 0 && n > 0);
    if n % segments == 0 {
        let w = n / segments;
        return x.chunks(w).map(|c| c.iter().sum::<f64>() / w as f64).collect();
    }
    // work in units of 1/segments of a sample so every boundary is an integer
    let seg_len = n; // each segment spans n units, each sample spans `segments` units
    (0..segments)
        .map(|j| {
            let (a, b) = (j * seg_len, (j + 1) * seg_len);
            let mut acc = 0.0;
            for i in a / segments..=((b - 1) / segments).min(n - 1) {
                let (lo, hi) = (i * segments, (i + 1) * segments);
                let overlap = hi.min(b).saturating_sub(lo.max(a));
                acc += x[i] * overlap as f64;
            }
            acc / seg_len as f64
        })
        .collect()
}

/// Rescale to [-1, 1]; a constant window maps to all zeros.
pub fn rescale_unit(x: &[f64]) -> Vec<f64> {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi == lo {
        return vec![0.0; x.len()];
    }
    x.iter().map(|&v| ((2.0 * v - hi - lo) / (hi - lo)).clamp(-1.0, 1.0)).collect()
}

/// Gramian angular summation field, row-major `S x S`.
pub fn gaf(window: &[f64]) -> Result<Vec<f64>> {
    check_finite(window)?;
    let phi: Vec<f64> = rescale_unit(window).into_iter().map(f64::acos).collect();
    let s = phi.len();
    let mut g = vec![0.0; s * s];
    for i in 0..s {
        for j in i..s {
            let v = (phi[i] + phi[j]).cos();
            g[i * s + j] = v;
            g[j * s + i] = v;
        }
    }
    Ok(g)
}

/// Quantile bin index per sample, `0..q`. Bin edges are the interior
/// `k/q` quantiles (linear interpolation); a value equal to an edge falls
/// in the lower bin.
pub fn quantile_bins(x: &[f64], q: usize) -> Vec<usize> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let edges: Vec<f64> = (1..q)
        .map(|k| {
            let pos = k as f64 / q as f64 * (n - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 < n {
                sorted[i] + frac * (sorted[i + 1] - sorted[i])
            } else {
                sorted[n - 1]
            }
        })
        .collect();
    x.iter().map(|&v| edges.iter().filter(|&&e| e < v).count()).collect()
}

/// Row-normalized first-order transition matrix of a bin sequence. Rows
/// with no outgoing transitions are uniform.
pub fn transition_matrix(bins: &[usize], q: usize) -> Vec<f64> {
    let mut w = vec![0.0; q * q];
    for pair in bins.windows(2) {
        w[pair[0] * q + pair[1]] += 1.0;
    }
    for row in w.chunks_mut(q) {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / q as f64);
        }
    }
    w
}

pub fn mtf_from_bins(bins: &[usize], q: usize) -> Vec<f64> {
    let w = transition_matrix(bins, q);
    let s = bins.len();
    let mut m = vec![0.0; s * s];
    for i in 0..s {
        for j in 0..s {
            m[i * s + j] = w[bins[i] * q + bins[j]];
        }
    }
    m
}

/// Markov transition field with `q` per-window quantile bins.
pub fn mtf(window: &[f64], q: usize) -> Result<Vec<f64>> {
    check_finite(window)?;
    if window.len() < 2 || q < 2 {
        return Err(Error::Invalid(format!("mtf needs S >= 2 and Q >= 2, got S={} Q={q}", window.len())));
    }
    Ok(mtf_from_bins(&quantile_bins(window, q), q))
}

/// Cut the trace into `window_seconds` windows, PAA each to `size` points
/// and stack GASF and MTF as two channels.
pub fn pupil_image_sequence(
    trace: &CleanPupilTrace,
    duration_s: u32,
    window_seconds: u32,
    size: usize,
    q: usize,
) -> Result<PupilImageSequence> {
    let per_window = (trace.rate_hz * window_seconds) as usize;
    let windows = (duration_s / window_seconds) as usize;
    if trace.values.len() != per_window * windows {
        return Err(Error::Invalid(format!("pupil trace has {} samples, expected {}", trace.values.len(), per_window * windows)));
    }
    let mut data = Vec::with_capacity(windows * 2 * size * size);
    for w in trace.values.chunks(per_window) {
        let reduced = paa(w, size);
        data.extend(gaf(&reduced)?.into_iter().map(|v| v as f32));
        data.extend(mtf(&reduced, q)?.into_iter().map(|v| v as f32));
    }
    Ok(PupilImageSequence { windows, size, window_seconds, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaf_three_point_window() {
        let g = gaf(&[1.0, 0.0, -1.0]).unwrap();
        let want = [1.0, 0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 1.0];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn gaf_constant_window_is_minus_one() {
        let g = gaf(&[3.3; 5]).unwrap();
        assert!(g.iter().all(|v| (v + 1.0).abs() < 1e-12));
        assert!(gaf(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn mtf_hand_counted() {
        let m = mtf_from_bins(&[0, 0, 1, 1], 2);
        let want = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0];
        assert_eq!(m, want);
        assert_eq!(transition_matrix(&[0, 0, 1, 1], 2), [0.5, 0.5, 0.0, 1.0]);
    }

    #[test]
    fn mtf_constant_window_is_constant() {
        let m = mtf(&[2.0; 6], 8).unwrap();
        assert!(m.iter().all(|&v| v == 1.0));
        assert!(mtf(&[1.0], 8).is_err());
        assert!(mtf(&[1.0, 2.0], 1).is_err());
        assert!(mtf(&[1.0, f64::INFINITY], 2).is_err());
    }

    #[test]
    fn absorbing_bin_row_is_uniform() {
        // last sample sits alone in the top bin: no outgoing transition
        let w = transition_matrix(&[0, 0, 1], 2);
        assert_eq!(&w[2..], &[0.5, 0.5]);
    }

    #[test]
    fn paa_examples() {
        assert_eq!(paa(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 3.5]);
        // 3 samples into 2 segments: [1, 0.5*2] / 1.5 and [0.5*2, 3] / 1.5
        let p = paa(&[1.0, 2.0, 3.0], 2);
        assert!((p[0] - 2.0 / 1.5).abs() < 1e-12 && (p[1] - 4.0 / 1.5).abs() < 1e-12);
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.3).sin()).collect();
        let p = paa(&x, 32);
        assert_eq!(p.len(), 32);
        assert!((p.iter().sum::<f64>() / 32.0 - x.iter().sum::<f64>() / 60.0).abs() < 1e-12);
    }

    fn trace(values: Vec<f64>) -> CleanPupilTrace {
        let n = values.len();
        CleanPupilTrace { values, interpolated_mask: vec![false; n], baseline_mm: 4.0, rate_hz: 60 }
    }

    #[test]
    fn constant_trace_images() {
        let seq = pupil_image_sequence(&trace(vec![0.0; 4800]), 80, 1, 32, 8).unwrap();
        assert_eq!(seq.shape(), [80, 2, 32, 32]);
        for t in 0..80 {
            assert!(seq.image(t, 0).iter().all(|&v| v == -1.0));
            assert_eq!(seq.image(t, 1), seq.image(0, 1));
        }
        assert!(pupil_image_sequence(&trace(vec![0.0; 4799]), 80, 1, 32, 8).is_err());
    }

    #[test]
    fn slow_sine_matches_per_window_oracle() {
        let x: Vec<f64> = (0..4800).map(|k| 0.3 * (k as f64 / 60.0 * 0.2).sin()).collect();
        let seq = pupil_image_sequence(&trace(x.clone()), 80, 1, 32, 8).unwrap();
        for t in [0, 17, 79] {
            let w = &x[t * 60..(t + 1) * 60];
            // independent segment means: 60 -> 32 with 15/8-sample segments
            let oracle: Vec<f64> = (0..32)
                .map(|j| {
                    let (a, b) = (j as f64 * 60.0 / 32.0, (j + 1) as f64 * 60.0 / 32.0);
                    (0..60)
                        .map(|i| {
                            let ov = (b.min(i as f64 + 1.0) - a.max(i as f64)).max(0.0);
                            w[i] * ov
                        })
                        .sum::<f64>()
                        / (b - a)
                })
                .collect();
            let g = gaf(&oracle).unwrap();
            let m = mtf(&oracle, 8).unwrap();
            for (a, b) in seq.image(t, 0).iter().zip(&g) {
                assert!((*a as f64 - b).abs() < 1e-6);
            }
            for (a, b) in seq.image(t, 1).iter().zip(&m) {
                assert!((*a as f64 - b).abs() < 1e-6);
            }
        }
        // neighbouring windows of a slow sine differ only slightly in GASF
        let d: f32 = seq.image(10, 0).iter().zip(seq.image(11, 0)).map(|(a, b)| (a - b).abs()).sum::<f32>() / 1024.0;
        assert!(d < 0.2, "{d}");
    }

    proptest! {
        #[test]
        fn gaf_symmetric_bounded(x in proptest::collection::vec(-100.0f64..100.0, 2..40)) {
            let s = x.len();
            let g = gaf(&x).unwrap();
            for i in 0..s {
                for j in 0..s {
                    prop_assert_eq!(g[i * s + j], g[j * s + i]);
                    prop_assert!(g[i * s + j].abs() <= 1.0 + 1e-12);
                }
            }
        }

        #[test]
        fn mtf_rows_stochastic(x in proptest::collection::vec(-5.0f64..5.0, 2..40), q in 2usize..10) {
            let bins = quantile_bins(&x, q);
            prop_assert!(bins.iter().all(|&b| b < q));
            let w = transition_matrix(&bins, q);
            for row in w.chunks(q) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            let m = mtf(&x, q).unwrap();
            prop_assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
