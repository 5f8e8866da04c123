use gazefusion_core::manifest::FrameStack;
use gazefusion_core::{GazeSample, ScreenGeometry, StimulusConfig};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::observer::{SimObserver, TrialLatents};
use crate::scene::Scene;
use crate::seed;

/// Pupil baseline, mm.
pub const BASE_PUPIL_MM: f64 = 4.0;
pub const LIGHT_COUPLING: f64 = 0.8;
pub const INTEREST_COUPLING: f64 = 0.4;
/// Light-reflex time constant, s.
const REFLEX_TAU_S: f64 = 0.3;
/// Time to peak of one phasic dilation, s.
const DILATION_PEAK_S: f64 = 0.5;
const DILATION_SPAN_S: f64 = 4.0;
const AR_COEF: f64 = 0.97;
/// Half side of the luminance window, as a fraction of frame width.
const LUMA_WINDOW: f64 = 0.08;

/// Summary of what the simulated eye did; written to the ground-truth
/// sidecar for probes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GazeStats {
    pub fixations: usize,
    /// Mean fixation duration, s.
    pub mean_fixation_s: f64,
    /// Mean jump between consecutive fixation targets, in screen widths.
    pub mean_saccade: f64,
    /// Share of fixations not placed on a rectangle.
    pub off_object_share: f64,
    /// Share of fixation time spent on natural rectangles.
    pub natural_dwell: f64,
    pub dilation_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeTrace {
    pub samples: Vec<GazeSample>,
    pub stats: GazeStats,
    /// Latent interest process at each sample.
    pub interest: Vec<f64>,
}

enum Target {
    Rect(usize),
    Point(f64, f64),
}

/// Mean luminance of a square window, from a summed-area table.
struct LumaCache {
    frame: usize,
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl LumaCache {
    fn new(frames: &FrameStack) -> Self {
        let mut c = LumaCache { frame: usize::MAX, width: frames.width, height: frames.height, table: Vec::new() };
        c.load(frames, 0);
        c
    }

    fn load(&mut self, frames: &FrameStack, k: usize) {
        if self.frame == k {
            return;
        }
        let (w, h) = (self.width, self.height);
        let f = frames.frame(k);
        self.table = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                let p = &f[(y * w + x) * 3..];
                row += (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0;
                self.table[(y + 1) * (w + 1) + x + 1] = self.table[y * (w + 1) + x + 1] + row;
            }
        }
        self.frame = k;
    }

    /// `u`, `v` are screen fractions.
    fn mean(&self, u: f64, v: f64) -> f64 {
        let (w, h) = (self.width as f64, self.height as f64);
        let r = (LUMA_WINDOW * w).max(0.5);
        let cl = |a: f64, hi: f64| a.round().clamp(0.0, hi) as usize;
        let (x0, x1) = (cl(u * w - r, w), cl(u * w + r, w));
        let (y0, y1) = (cl(v * h - r, h), cl(v * h + r, h));
        let (x1, y1) = (x1.max((x0 + 1).min(self.width)), y1.max((y0 + 1).min(self.height)));
        let (x0, y0) = (x0.min(x1 - 1), y0.min(y1 - 1));
        let s = |y: usize, x: usize| self.table[y * (self.width + 1) + x];
        (s(y1, x1) - s(y0, x1) - s(y1, x0) + s(y0, x0)) / ((x1 - x0) * (y1 - y0)) as f64
    }
}

fn dilation(s: f64) -> f64 {
    if !(0.0..DILATION_SPAN_S).contains(&s) {
        return 0.0;
    }
    let r = s / DILATION_PEAK_S;
    r * (1.0 - r).exp()
}

/// Simulate one viewing of `scene`.
///
/// Gaze jumps between fixation targets and tracks a target rectangle's
/// centroid while the camera pans. Targets are rectangles on screen, drawn
/// with probability proportional to salience, or with probability
/// `exploration / 2` a random screen point. Fixation durations shrink as
/// exploration grows. The pupil follows the light reflex to the luminance
/// around the gaze point plus phasic dilations arriving at a rate set by
/// interest.
pub fn gen_gaze(
    scene: &Scene,
    frames: &FrameStack,
    stimulus: &StimulusConfig,
    geometry: &ScreenGeometry,
    observer: &SimObserver,
    latents: &TrialLatents,
    seed: u64,
) -> GazeTrace {
    let mut rng = seed::rng(seed, seed::GAZE, 0);
    let hz = stimulus.gaze_hz as f64;
    let duration = stimulus.duration_s as f64;
    let n = stimulus.nominal_gaze_samples();
    let (sw, sh) = (geometry.width_px as f64, geometry.height_px as f64);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let ex = latents.exploration.clamp(0.0, 1.0);
    let p_off = 0.5 * ex;
    let mean_fix = 0.65 - 0.45 * ex;

    // fixation schedule
    let mut positions = Vec::with_capacity(n);
    let mut stats = GazeStats::default();
    let mut natural_time = 0.0;
    let mut last_target: Option<(f64, f64)> = None;
    let mut saccade_sum = 0.0;
    let mut off_object = 0usize;
    let mut k = 0usize;
    while k < n {
        let t = k as f64 / hz;
        let visible: Vec<usize> = (0..scene.rects.len())
            .filter(|&i| {
                let (u, _) = scene.screen_center(i, t, duration);
                (0.05..0.95).contains(&u)
            })
            .collect();
        let off = visible.is_empty() || rng.random::<f64>() < p_off;
        let target = if off {
            off_object += 1;
            if visible.is_empty() && scene.rects.is_empty() {
                Target::Point(0.5 + 0.15 * (rng.random::<f64>() - 0.5), 0.5 + 0.15 * (rng.random::<f64>() - 0.5))
            } else {
                Target::Point(rng.random_range(0.1..0.9), rng.random_range(0.1..0.9))
            }
        } else {
            let total: f64 = visible.iter().map(|&i| scene.rects[i].salience).sum();
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = visible[visible.len() - 1];
            for &i in &visible {
                pick -= scene.rects[i].salience;
                if pick < 0.0 {
                    chosen = i;
                    break;
                }
            }
            Target::Rect(chosen)
        };
        let len = ((mean_fix * rng.random_range(0.5..1.5) * hz).round() as usize).max(1).min(n - k);
        let noise = observer.gaze_noise_px;
        let offset = (noise * std_normal.sample(&mut rng), noise * std_normal.sample(&mut rng));
        let at = |t: f64| match target {
            Target::Rect(i) => scene.screen_center(i, t, duration),
            Target::Point(u, v) => (u, v),
        };
        let start = at(t);
        if let Some((pu, pv)) = last_target {
            saccade_sum += ((start.0 - pu).powi(2) + (start.1 - pv).powi(2)).sqrt();
        }
        last_target = Some(start);
        if let Target::Rect(i) = target {
            if scene.rects[i].natural {
                natural_time += len as f64 / hz;
            }
        }
        for j in k..k + len {
            let (u, v) = at(j as f64 / hz);
            let jx = 0.3 * noise * std_normal.sample(&mut rng);
            let jy = 0.3 * noise * std_normal.sample(&mut rng);
            let x = (u * sw + offset.0 + jx).clamp(0.0, sw - 1.0);
            let y = (v * sh + offset.1 + jy).clamp(0.0, sh - 1.0);
            positions.push((x, y));
        }
        stats.fixations += 1;
        k += len;
    }
    stats.mean_fixation_s = duration / stats.fixations as f64;
    stats.mean_saccade = if stats.fixations > 1 { saccade_sum / (stats.fixations - 1) as f64 } else { 0.0 };
    stats.off_object_share = off_object as f64 / stats.fixations as f64;
    stats.natural_dwell = natural_time / duration;

    // phasic dilation onsets, Poisson with rate set by interest
    let rate = 0.05 + 0.6 * latents.interest.clamp(0.0, 1.0);
    let mut onsets = Vec::new();
    let mut t = 0.0;
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / rate;
        if t >= duration {
            break;
        }
        onsets.push(t);
    }
    stats.dilation_events = onsets.len();

    // blinks: short invalid runs
    let mut invalid = vec![false; n];
    if observer.blink_rate_hz > 0.0 {
        let mut t = 0.0;
        loop {
            t += -(1.0 - rng.random::<f64>()).ln() / observer.blink_rate_hz;
            if t >= duration {
                break;
            }
            let first = (t * hz) as usize;
            let len = rng.random_range(2..=4);
            invalid[first..(first + len).min(n)].iter_mut().for_each(|v| *v = true);
        }
    }

    let mut luma = LumaCache::new(frames);
    let mut reflex = None;
    let mut ar = 0.0;
    let mut interest = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    let mut next_onset = 0usize;
    for (k, &(x, y)) in positions.iter().enumerate() {
        let t = k as f64 / hz;
        let fk = ((t * stimulus.fps as f64) as usize).min(frames.frames - 1);
        luma.load(frames, fk);
        let l = luma.mean(x / sw, y / sh);
        let r = match reflex {
            None => l,
            Some(prev) => prev + (l - prev) * (1.0 / hz) / REFLEX_TAU_S,
        };
        reflex = Some(r);
        while next_onset < onsets.len() && onsets[next_onset] + DILATION_SPAN_S < t {
            next_onset += 1;
        }
        let it: f64 = onsets[next_onset..].iter().take_while(|&&o| o <= t).map(|&o| dilation(t - o)).sum();
        interest.push(it);
        ar = AR_COEF * ar + observer.pupil_noise_mm * std_normal.sample(&mut rng);
        let pupil = BASE_PUPIL_MM + observer.pupil_gain * (LIGHT_COUPLING * (1.0 - r) + INTEREST_COUPLING * it) + ar;
        samples.push(if invalid[k] {
            GazeSample { t, x: 0.0, y: 0.0, pupil_mm: 0.0, valid: false }
        } else {
            GazeSample { t, x, y, pupil_mm: pupil, valid: true }
        });
    }
    GazeTrace { samples, stats, interest }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_kernel_peaks_at_one() {
        assert!((dilation(DILATION_PEAK_S) - 1.0).abs() < 1e-12);
        assert_eq!(dilation(-0.1), 0.0);
        assert_eq!(dilation(DILATION_SPAN_S), 0.0);
        assert!(dilation(0.2) < 1.0 && dilation(1.0) < 1.0);
    }

    #[test]
    fn luma_window_mean_of_uniform_frame() {
        let frames = FrameStack { frames: 1, height: 9, width: 16, data: vec![51; 9 * 16 * 3] };
        let c = LumaCache::new(&frames);
        for (u, v) in [(0.0, 0.0), (0.5, 0.5), (0.999, 0.999)] {
            assert!((c.mean(u, v) - 0.2).abs() < 1e-9);
        }
    }
}
