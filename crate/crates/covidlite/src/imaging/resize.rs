//! Normalization to [0, 1] floats and bilinear resampling.

use super::{Image, NormalizedImage};

/// Divides pixels by 255, replicates grayscale to 3 channels, then resamples
/// to `target x target` with half-pixel-center bilinear interpolation. When
/// the input is already `target x target` the geometry is untouched.
pub fn normalize_and_resize(img: &Image, target: usize) -> NormalizedImage {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut floats = Vec::with_capacity(h * w * 3);
    for p in 0..h * w {
        if c == 1 {
            let v = f32::from(img.data()[p]) / 255.0;
            floats.extend_from_slice(&[v, v, v]);
        } else {
            for ch in 0..3 {
                floats.push(f32::from(img.data()[p * 3 + ch]) / 255.0);
            }
        }
    }
    if h == target && w == target {
        return NormalizedImage::from_raw(h, w, floats);
    }
    let resized = resize_bilinear(&floats, h, w, 3, target, target);
    NormalizedImage::from_raw(target, target, resized)
}

/// Half-pixel-center bilinear resampling of interleaved float data.
///
/// Source coordinates are `(dst + 0.5) * src / dst - 0.5`, clamped into the
/// source grid. Interpolation uses the `a + t * (b - a)` form, so constant
/// inputs are preserved exactly.
pub(crate) fn resize_bilinear(
    src: &[f32],
    src_h: usize,
    src_w: usize,
    channels: usize,
    dst_h: usize,
    dst_w: usize,
) -> Vec<f32> {
    let mut out = Vec::with_capacity(dst_h * dst_w * channels);
    let scale_y = src_h as f32 / dst_h as f32;
    let scale_x = src_w as f32 / dst_w as f32;
    for y in 0..dst_h {
        let sy = ((y as f32 + 0.5) * scale_y - 0.5).clamp(0.0, (src_h - 1) as f32);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f32;
        for x in 0..dst_w {
            let sx = ((x as f32 + 0.5) * scale_x - 0.5).clamp(0.0, (src_w - 1) as f32);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f32;
            for ch in 0..channels {
                let v00 = src[(y0 * src_w + x0) * channels + ch];
                let v01 = src[(y0 * src_w + x1) * channels + ch];
                let v10 = src[(y1 * src_w + x0) * channels + ch];
                let v11 = src[(y1 * src_w + x1) * channels + ch];
                let top = v00 + fx * (v01 - v00);
                let bot = v10 + fx * (v11 - v10);
                out.push(top + fy * (bot - top));
            }
        }
    }
    out
}
