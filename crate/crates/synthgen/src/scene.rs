use gazefusion_core::manifest::FrameStack;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const MAX_CLUTTER: u32 = 12;

/// Stimulus factors of one video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub brightness: f64,
    pub clutter_count: u32,
    /// Grid-snap strength.
    pub alignment: f64,
    /// Share of rectangles with wood or foliage fills.
    pub natural_fraction: f64,
    pub style_seed: u64,
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("brightness", self.brightness)?;
        unit("alignment", self.alignment)?;
        unit("natural_fraction", self.natural_fraction)?;
        if self.clutter_count > MAX_CLUTTER {
            return Err(Error::Invalid(format!("clutter_count = {} above {MAX_CLUTTER}", self.clutter_count)));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        SceneParams {
            brightness: rng.random_range(0.05..0.95),
            clutter_count: rng.random_range(0..=MAX_CLUTTER),
            alignment: rng.random(),
            natural_fraction: rng.random(),
            style_seed: rng.random(),
        }
    }
}

/// Axis-aligned rectangle in world units: x in screen widths from the left
/// end of the pan, y in screen heights from the top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    /// Linear RGB in [0, 1] under full light.
    pub color: [f64; 3],
    pub natural: bool,
    /// Relative pull on the observer's gaze.
    pub salience: f64,
}

impl Rect {
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub params: SceneParams,
    /// Painted in order; later rectangles cover earlier ones.
    pub rects: Vec<Rect>,
    /// Camera travel over the whole clip, in screen widths.
    pub pan: f64,
    /// Background luminance per second of the clip. Empty means constant
    /// `params.brightness`.
    #[serde(default)]
    pub brightness_track: Vec<f64>,
}

/// Output raster and timing of a render.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub width: usize,
    pub height: usize,
    pub fps: u32,
    pub duration_s: u32,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec { width: 160, height: 90, fps: 30, duration_s: 80 }
    }
}

impl RenderSpec {
    pub fn frames(&self) -> usize {
        (self.fps * self.duration_s) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.fps == 0 || self.duration_s == 0 {
            return Err(Error::Invalid("render size, rate and duration must be positive".into()));
        }
        Ok(())
    }
}

const NATURAL: [[f64; 3]; 4] = [[0.55, 0.36, 0.18], [0.22, 0.55, 0.20], [0.42, 0.48, 0.20], [0.72, 0.55, 0.33]];
const ARTIFICIAL: [[f64; 3]; 6] =
    [[0.15, 0.30, 0.85], [0.85, 0.15, 0.25], [0.65, 0.20, 0.75], [0.95, 0.85, 0.15], [0.15, 0.80, 0.85], [0.90, 0.90, 0.95]];
const GRID_X: f64 = 0.2;
const GRID_Y: f64 = 0.25;

pub fn luminance(c: [f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

pub(crate) fn pick_color<R: Rng>(rng: &mut R, natural: bool) -> [f64; 3] {
    let base =
        if natural { NATURAL[rng.random_range(0..NATURAL.len())] } else { ARTIFICIAL[rng.random_range(0..ARTIFICIAL.len())] };
    base.map(|c: f64| (c + rng.random_range(-0.04..0.04)).clamp(0.0, 1.0))
}

pub(crate) fn salience<R: Rng>(rng: &mut R, w: f64, h: f64, color: [f64; 3], background: f64) -> f64 {
    (w * h).sqrt() * (0.5 + (luminance(color) - background).abs()) * rng.random_range(0.5..1.5)
}

/// Lay out the rectangles of a scene. Layout depends on `seed` and
/// `params.style_seed` only.
pub fn build_scene(params: SceneParams, seed: u64) -> Result<Scene> {
    params.validate()?;
    let mut rng = seed::rng(seed ^ params.style_seed, seed::SCENE, 0);
    let pan = 0.5;
    let n = params.clutter_count as usize;
    let n_natural = (params.natural_fraction * n as f64).round() as usize;
    let mut natural: Vec<bool> = (0..n).map(|i| i < n_natural).collect();
    natural.shuffle(&mut rng);
    let a = params.alignment;
    let world = 1.0 + pan;
    let rects = natural
        .into_iter()
        .map(|nat| {
            let w = (1.0 - a) * rng.random_range(0.08..0.22) + a * 0.14;
            let h = (1.0 - a) * rng.random_range(0.12..0.32) + a * 0.2;
            let cx: f64 = rng.random_range(w / 2.0..world - w / 2.0);
            let cy: f64 = rng.random_range(h / 2.0..1.0 - h / 2.0);
            let sx = ((cx / GRID_X).round() * GRID_X).clamp(w / 2.0, world - w / 2.0);
            let sy = ((cy / GRID_Y).round() * GRID_Y).clamp(h / 2.0, 1.0 - h / 2.0);
            let (cx, cy) = ((1.0 - a) * cx + a * sx, (1.0 - a) * cy + a * sy);
            let color = pick_color(&mut rng, nat);
            let s = salience(&mut rng, w, h, color, params.brightness);
            Rect { x: cx - w / 2.0, y: cy - h / 2.0, w, h, color, natural: nat, salience: s }
        })
        .collect();
    Ok(Scene { params, rects, pan, brightness_track: Vec::new() })
}

impl Scene {
    /// Left edge of the visible window at time `t`, in world units.
    pub fn offset(&self, t: f64, duration_s: f64) -> f64 {
        self.pan * (t / duration_s).clamp(0.0, 1.0)
    }

    pub fn background_at(&self, t: f64) -> f64 {
        if self.brightness_track.is_empty() {
            return self.params.brightness;
        }
        let i = (t.max(0.0) as usize).min(self.brightness_track.len() - 1);
        self.brightness_track[i]
    }

    /// Rectangle shading follows the room light but never goes fully dark.
    pub fn light_at(&self, t: f64) -> f64 {
        0.3 + 0.7 * self.background_at(t)
    }

    /// Screen-space (fractional) center of rectangle `i` at time `t`.
    pub fn screen_center(&self, i: usize, t: f64, duration_s: f64) -> (f64, f64) {
        let (cx, cy) = self.rects[i].center();
        (cx - self.offset(t, duration_s), cy)
    }
}

/// Render every frame as interleaved RGB.
pub fn render(scene: &Scene, spec: &RenderSpec) -> Result<FrameStack> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let n = spec.frames();
    let duration = spec.duration_s as f64;
    let mut data = vec![0u8; n * h * w * 3];
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    for (k, frame) in data.chunks_exact_mut(h * w * 3).enumerate() {
        let t = k as f64 / spec.fps as f64;
        let bg = to_u8(scene.background_at(t));
        frame.fill(bg);
        let light = scene.light_at(t);
        let off = scene.offset(t, duration);
        for r in &scene.rects {
            let x0 = (((r.x - off) * w as f64).round().max(0.0) as usize).min(w);
            let x1 = (((r.x + r.w - off) * w as f64).round().max(0.0) as usize).min(w);
            let y0 = ((r.y * h as f64).round().max(0.0) as usize).min(h);
            let y1 = (((r.y + r.h) * h as f64).round().max(0.0) as usize).min(h);
            let rgb = r.color.map(|c| to_u8(c * light));
            for y in y0..y1 {
                for x in x0..x1 {
                    frame[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&rgb);
                }
            }
        }
    }
    Ok(FrameStack { frames: n, height: h, width: w, data })
}

/// Lay out and render a scene.
pub fn gen_scene(params: SceneParams, spec: &RenderSpec, seed: u64) -> Result<(Scene, FrameStack)> {
    let scene = build_scene(params, seed)?;
    let frames = render(&scene, spec)?;
    Ok((scene, frames))
}

/// Fraction of horizontally or vertically adjacent pixel pairs whose
/// luminance differs by more than 8 grey levels.
pub fn edge_density(frame: &[u8], height: usize, width: usize) -> f64 {
    let lum = |y: usize, x: usize| {
        let p = &frame[(y * width + x) * 3..];
        0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
    };
    let mut edges = 0usize;
    let mut pairs = 0usize;
    for y in 0..height {
        for x in 0..width {
            if x + 1 < width {
                pairs += 1;
                edges += ((lum(y, x) - lum(y, x + 1)).abs() > 8.0) as usize;
            }
            if y + 1 < height {
                pairs += 1;
                edges += ((lum(y, x) - lum(y + 1, x)).abs() > 8.0) as usize;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        edges as f64 / pairs as f64
    }
}
