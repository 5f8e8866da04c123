//! Static image renderings of saliency results.

use std::path::Path;

use gazefusion_preprocess::AlignedSample;
use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::saliency::{bilinear_upsample, SaliencyResult, OUT_HEIGHT, OUT_WIDTH};

/// Opacity of the heat layer at map value 1.
const HEAT_ALPHA: f64 = 0.6;

/// Black-red-yellow-white ramp over [0, 1].
fn heat(v: f64) -> [f64; 3] {
    let v = v.clamp(0.0, 1.0);
    [(3.0 * v).min(1.0), (3.0 * v - 1.0).clamp(0.0, 1.0), (3.0 * v - 2.0).clamp(0.0, 1.0)]
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// One row of tiles, timestep `t` of the sample's frames at 160x90 with
/// its map blended on top. `every` picks every n-th timestep.
pub fn write_overlay_png(path: &Path, sample: &AlignedSample, r: &SaliencyResult, every: usize) -> Result<()> {
    if every == 0 {
        return Err(Error::Invalid("timestep stride must be positive".into()));
    }
    if sample.steps != r.spatial.steps {
        return Err(Error::Invalid(format!("sample has {} steps, maps have {}", sample.steps, r.spatial.steps)));
    }
    let steps: Vec<usize> = (0..sample.steps).step_by(every).collect();
    let (fh, fw) = (sample.frame_height, sample.frame_width);
    let plane = fh * fw;
    let mut img = RgbImage::new((steps.len() * OUT_WIDTH) as u32, OUT_HEIGHT as u32);
    for (col, &t) in steps.iter().enumerate() {
        let frame = &sample.frames[t * 3 * plane..(t + 1) * 3 * plane];
        let channels: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                let src: Vec<f64> = frame[c * plane..(c + 1) * plane].iter().map(|&v| v as f64).collect();
                bilinear_upsample(&src, fh, fw, OUT_HEIGHT, OUT_WIDTH)
            })
            .collect();
        for (i, &m) in r.spatial.frame(t).iter().enumerate() {
            let a = HEAT_ALPHA * m as f64;
            let h = heat(m as f64);
            let px: [u8; 3] = std::array::from_fn(|c| to_u8((1.0 - a) * channels[c][i] + a * h[c]));
            img.put_pixel((col * OUT_WIDTH + i % OUT_WIDTH) as u32, (i / OUT_WIDTH) as u32, Rgb(px));
        }
    }
    img.save(path)?;
    Ok(())
}

/// Bar chart of per-timestep weights: temporal branch, spatial branch and
/// combined, stacked top to bottom.
pub fn write_curve_png(path: &Path, r: &SaliencyResult) -> Result<()> {
    const BAR: usize = 6;
    const ROW: usize = 80;
    let rows = [&r.temporal.temporal_branch, &r.temporal.spatial_branch, &r.temporal.combined];
    let steps = r.temporal.combined.len();
    let colors = [Rgb([70, 110, 200]), Rgb([200, 110, 70]), Rgb([40, 40, 40])];
    let mut img = RgbImage::from_pixel((steps * BAR).max(1) as u32, (3 * ROW) as u32, Rgb([255, 255, 255]));
    for (k, w) in rows.iter().enumerate() {
        let peak = w.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            continue;
        }
        for (t, &v) in w.iter().enumerate() {
            let height = ((v / peak) * (ROW - 4) as f64).round() as usize;
            for y in 0..height {
                for x in 0..BAR - 1 {
                    img.put_pixel((t * BAR + x) as u32, ((k + 1) * ROW - 1 - y) as u32, colors[k]);
                }
            }
        }
    }
    img.save(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_ramp_endpoints() {
        assert_eq!(heat(0.0), [0.0, 0.0, 0.0]);
        assert_eq!(heat(1.0), [1.0, 1.0, 1.0]);
        assert_eq!(heat(-3.0), heat(0.0));
    }
}
