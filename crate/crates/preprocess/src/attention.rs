//! Gaze heatmaps per one-second window.
//!
//! The full-resolution pipeline is: histogram valid gaze points at screen
//! resolution, blur with a truncated isotropic Gaussian (zero outside the
//! screen), box-average down to the working grid, then normalize to unit
//! mass. All three steps are linear and the kernel is separable, so each
//! point's contribution to a working cell factors into a column weight times
//! a row weight; that is what is computed here, without materializing the
//! full-resolution image.

use gazefusion_core::{GazeSample, ScreenGeometry};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMapSequence {
    pub windows: usize,
    pub height: usize,
    pub width: usize,
    pub sigma_px: f64,
    /// `[window][row][col]`
    pub data: Vec<f32>,
}

impl AttentionMapSequence {
    pub fn map(&self, t: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[t * n..(t + 1) * n]
    }
}

/// Pixels subtended by one degree of visual angle at the screen center.
pub fn sigma_pixels(g: &ScreenGeometry) -> f64 {
    let aspect = g.height_px as f64 / g.width_px as f64;
    let width_cm = g.diagonal_inches * 2.54 * aspect.atan().cos();
    let pitch_cm = width_cm / g.width_px as f64;
    2.0 * g.viewing_distance_cm * 0.5f64.to_radians().tan() / pitch_cm
}

/// Normalized 1-D Gaussian on integer offsets `-r..=r`, `r = ceil(3 sigma)`.
fn kernel_1d(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-r..=r).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Weight each working cell along one axis receives from a point at screen
/// pixel `p`: the mean of the blurred profile over the cell's pixels.
fn axis_weights(p: i64, screen: usize, cells: usize, kernel: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let r = (kernel.len() / 2) as i64;
    let cell_px = screen as f64 / cells as f64;
    for (ki, &kv) in kernel.iter().enumerate() {
        let px = p + ki as i64 - r;
        if px < 0 || px >= screen as i64 {
            continue;
        }
        // screen pixel -> cell; exact when cells divide the screen
        let cell = ((px as f64 + 0.5) / cell_px).floor() as usize;
        out[cell.min(cells - 1)] += kv / cell_px;
    }
}

/// One heatmap per `window_s` window over `[0, duration_s)`.
pub fn attention_maps(
    gaze: &[GazeSample],
    sigma_px: f64,
    screen: &ScreenGeometry,
    duration_s: u32,
    window_s: u32,
    height: usize,
    width: usize,
) -> Result<AttentionMapSequence> {
    if !(sigma_px > 0.0) {
        return Err(Error::Invalid(format!("sigma_px must be positive, got {sigma_px}")));
    }
    let windows = (duration_s / window_s) as usize;
    let (sw, sh) = (screen.width_px as usize, screen.height_px as usize);
    let kernel = kernel_1d(sigma_px);
    let mut data = vec![0f64; windows * height * width];
    let mut wx = vec![0.0; width];
    let mut wy = vec![0.0; height];
    for s in gaze {
        if !s.valid || !s.x.is_finite() || !s.y.is_finite() || !s.t.is_finite() || s.t < 0.0 {
            continue;
        }
        let (px, py) = (s.x.floor() as i64, s.y.floor() as i64);
        if px < 0 || py < 0 || px >= sw as i64 || py >= sh as i64 {
            continue;
        }
        let w = (s.t / window_s as f64).floor() as usize;
        if w >= windows {
            continue;
        }
        axis_weights(px, sw, width, &kernel, &mut wx);
        axis_weights(py, sh, height, &kernel, &mut wy);
        let map = &mut data[w * height * width..(w + 1) * height * width];
        for (row, &a) in wy.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (col, &b) in wx.iter().enumerate() {
                map[row * width + col] += a * b;
            }
        }
    }
    for map in data.chunks_mut(height * width) {
        let total: f64 = map.iter().sum();
        if total > 0.0 {
            map.iter_mut().for_each(|v| *v /= total);
        }
    }
    Ok(AttentionMapSequence { windows, height, width, sigma_px, data: data.into_iter().map(|v| v as f32).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixation(x: f64, y: f64, t0: f64, t1: f64) -> Vec<GazeSample> {
        let n = ((t1 - t0) * 60.0).round() as usize;
        (0..n).map(|k| GazeSample { t: t0 + k as f64 / 60.0, x, y, pupil_mm: 4.0, valid: true }).collect()
    }

    fn maps(g: &[GazeSample], sigma: f64) -> AttentionMapSequence {
        attention_maps(g, sigma, &ScreenGeometry::default(), 80, 1, 90, 160).unwrap()
    }

    #[test]
    fn sigma_for_default_setup() {
        // independent route: pixel pitch from the diagonal pixel count
        let diag_px = (1920f64.powi(2) + 1080f64.powi(2)).sqrt();
        let pitch = 27.0 * 2.54 / diag_px;
        let oracle = 2.0 * 65.0 * (0.5f64 * std::f64::consts::PI / 180.0).tan() / pitch;
        let s = sigma_pixels(&ScreenGeometry::default());
        assert!((s - oracle).abs() < 1e-9);
        assert!((s - 36.44).abs() < 0.1, "{s}");
    }

    #[test]
    fn sigma_scales_with_distance() {
        let g = ScreenGeometry::default();
        let far = ScreenGeometry { viewing_distance_cm: 130.0, ..g };
        let ratio = sigma_pixels(&far) / sigma_pixels(&g);
        assert!((ratio - 2.0).abs() < 2e-3);
        assert_eq!(sigma_pixels(&ScreenGeometry { viewing_distance_cm: 0.0, ..g }), 0.0);
    }

    #[test]
    fn center_fixation_peaks_at_center_cell() {
        let m = maps(&fixation(960.0, 540.0, 0.0, 80.0), 36.4);
        for t in [0, 40, 79] {
            let map = m.map(t);
            let (arg, _) = map.iter().enumerate().fold((0, f32::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
            assert_eq!((arg / 160, arg % 160), (45, 80));
            let sum: f64 = map.iter().map(|&v| v as f64).sum();
            assert!((sum - 1.0).abs() < 1e-5);
            assert!(map.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn empty_window_is_zero() {
        let mut g = fixation(500.0, 300.0, 0.0, 17.0);
        g.extend(fixation(500.0, 300.0, 18.0, 80.0));
        g.extend(fixation(800.0, 300.0, 17.0, 18.0).into_iter().map(|s| GazeSample { valid: false, ..s }));
        let m = maps(&g, 36.4);
        assert!(m.map(17).iter().all(|&v| v == 0.0));
        assert!((m.map(16).iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs() < 1e-5);
        assert!(attention_maps(&g, 0.0, &ScreenGeometry::default(), 80, 1, 90, 160).is_err());
    }

    #[test]
    fn two_fixations_split_mass_evenly() {
        let mut g = fixation(480.0, 540.0, 0.0, 0.5);
        g.extend(fixation(1440.0, 540.0, 0.5, 1.0));
        let m = maps(&g, 36.4);
        let map = m.map(0);
        let left: f64 = (0..90).flat_map(|r| (0..80).map(move |c| r * 160 + c)).map(|i| map[i] as f64).sum();
        let right: f64 = (0..90).flat_map(|r| (80..160).map(move |c| r * 160 + c)).map(|i| map[i] as f64).sum();
        assert!((left - right).abs() < 1e-3, "{left} {right}");
        // bimodal: the midline is a valley
        assert!(map[45 * 160 + 80] < map[45 * 160 + 40] * 1e-3);
    }

    #[test]
    fn matches_full_resolution_pipeline() {
        // brute force on a small screen: histogram, 2-D truncated blur, box average
        let screen = ScreenGeometry { width_px: 48, height_px: 24, ..ScreenGeometry::default() };
        let pts = [(5.3, 7.9), (40.0, 20.0), (23.5, 0.2)];
        let g: Vec<GazeSample> = pts.iter().map(|&(x, y)| GazeSample { t: 0.25, x, y, pupil_mm: 4.0, valid: true }).collect();
        let sigma = 2.2;
        let fast = attention_maps(&g, sigma, &screen, 1, 1, 6, 12).unwrap();
        let r = (3.0 * sigma).ceil() as i64;
        let k1: Vec<f64> = (-r..=r).map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()).collect();
        let z: f64 = k1.iter().sum::<f64>().powi(2);
        let mut full = vec![0.0; 48 * 24];
        for &(x, y) in &pts {
            let (px, py) = (x as i64, y as i64);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (qx, qy) = (px + dx, py + dy);
                    if (0..48).contains(&qx) && (0..24).contains(&qy) {
                        full[(qy * 48 + qx) as usize] += k1[(dx + r) as usize] * k1[(dy + r) as usize] / z;
                    }
                }
            }
        }
        let mut small = vec![0.0; 72];
        for y in 0..24 {
            for x in 0..48 {
                small[(y / 4) * 12 + x / 4] += full[y * 48 + x] / 16.0;
            }
        }
        let total: f64 = small.iter().sum();
        for (a, b) in fast.map(0).iter().zip(&small) {
            assert!((*a as f64 - b / total).abs() < 1e-6);
        }
    }
}
