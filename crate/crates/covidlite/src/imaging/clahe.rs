//! Contrast-limited adaptive histogram equalization.

use super::{round_half_up_u8, Image};

/// Applies CLAHE to each channel independently.
///
/// The channel is padded by edge replication (bottom/right) to a multiple of
/// the tile size and divided into `tiles x tiles` regions. Each tile gets a
/// 256-bin histogram clipped at `clip * tile_pixels / 256`, with the excess
/// redistributed uniformly over all bins in a single pass. The tile remap of
/// gray level `f` is `(p_max - p_min) * P(f) + p_min`, where `P` is the CDF
/// of the clipped histogram (counts accumulated first, divided by the tile
/// pixel count once) and `p_min`/`p_max` are the tile extrema. Output
/// pixels blend the four surrounding tile remaps bilinearly (tile centers at
/// half-tile offsets, clamped at the borders), then round half up. Padding is
/// cropped before return.
pub fn clahe(img: &Image, tiles: usize, clip: f64) -> Image {
    assert!(tiles >= 1, "tiles must be >= 1");
    assert!(clip >= 1.0, "clip must be >= 1.0");
    let mut out = img.clone();
    for c in 0..img.channels() {
        let plane = img.channel_plane(c);
        let mapped = clahe_plane(&plane, img.height(), img.width(), tiles, clip);
        out.set_channel_plane(c, &mapped);
    }
    out
}

fn clahe_plane(plane: &[u8], height: usize, width: usize, tiles: usize, clip: f64) -> Vec<u8> {
    let tile_h = height.div_ceil(tiles);
    let tile_w = width.div_ceil(tiles);
    let pad_h = tile_h * tiles;
    let pad_w = tile_w * tiles;

    // Edge-replication padding on the bottom/right.
    let mut padded = vec![0u8; pad_h * pad_w];
    for y in 0..pad_h {
        let sy = y.min(height - 1);
        for x in 0..pad_w {
            let sx = x.min(width - 1);
            padded[y * pad_w + x] = plane[sy * width + sx];
        }
    }

    let luts = tile_remaps(&padded, pad_w, tiles, tile_h, tile_w, clip);

    let mut out = vec![0u8; height * width];
    for y in 0..height {
        let (ty0, ty1, wy) = axis_blend(y, tile_h, tiles);
        for x in 0..width {
            let (tx0, tx1, wx) = axis_blend(x, tile_w, tiles);
            let v = padded[y * pad_w + x] as usize;
            let top = lerp(luts[ty0 * tiles + tx0][v], luts[ty0 * tiles + tx1][v], wx);
            let bot = lerp(luts[ty1 * tiles + tx0][v], luts[ty1 * tiles + tx1][v], wx);
            out[y * width + x] = round_half_up_u8(lerp(top, bot, wy));
        }
    }
    out
}

/// Clip-redistribute remap table for every tile. Values stay within the
/// tile's [p_min, p_max] and are monotone in the gray level.
fn tile_remaps(
    padded: &[u8],
    pad_w: usize,
    tiles: usize,
    tile_h: usize,
    tile_w: usize,
    clip: f64,
) -> Vec<Vec<f64>> {
    let tile_pixels = (tile_h * tile_w) as f64;
    let limit = clip * tile_pixels / 256.0;
    let mut luts = Vec::with_capacity(tiles * tiles);
    for ty in 0..tiles {
        for tx in 0..tiles {
            let mut hist = [0.0f64; 256];
            let mut p_min = 255u8;
            let mut p_max = 0u8;
            for y in ty * tile_h..(ty + 1) * tile_h {
                for x in tx * tile_w..(tx + 1) * tile_w {
                    let v = padded[y * pad_w + x];
                    hist[v as usize] += 1.0;
                    p_min = p_min.min(v);
                    p_max = p_max.max(v);
                }
            }
            let mut excess = 0.0;
            for h in hist.iter_mut() {
                if *h > limit {
                    excess += *h - limit;
                    *h = limit;
                }
            }
            let bonus = excess / 256.0;
            let span = f64::from(p_max) - f64::from(p_min);
            let mut lut = Vec::with_capacity(256);
            let mut cum = 0.0;
            for h in &hist {
                cum += h + bonus;
                lut.push(span * (cum / tile_pixels) + f64::from(p_min));
            }
            luts.push(lut);
        }
    }
    luts
}

/// Neighbouring tile pair and blend weight along one axis. Tile centers sit
/// at `t * tile + (tile - 1) / 2`; pixels outside the first/last center
/// collapse onto the edge tile.
fn axis_blend(pos: usize, tile: usize, tiles: usize) -> (usize, usize, f64) {
    let u = (pos as f64 - (tile as f64 - 1.0) / 2.0) / tile as f64;
    if u <= 0.0 || tiles == 1 {
        return (0, 0, 0.0);
    }
    let t0 = u.floor() as usize;
    if t0 >= tiles - 1 {
        return (tiles - 1, tiles - 1, 0.0);
    }
    (t0, t0 + 1, u - t0 as f64)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    /// Literal clip-redistribute-interpolate oracle, written independently of
    /// the production path (no shared helpers beyond the blending convention).
    fn oracle(img: &Image, tiles: usize, clip: f64) -> Image {
        let mut out = img.clone();
        let (h, w) = (img.height(), img.width());
        let tile_h = h.div_ceil(tiles);
        let tile_w = w.div_ceil(tiles);
        for c in 0..img.channels() {
            // Padded copy via clamped indexing.
            let value = |y: usize, x: usize| img.at(y.min(h - 1), x.min(w - 1), c);
            // Per-tile lookup tables.
            let mut luts = vec![vec![0.0f64; 256]; tiles * tiles];
            for ty in 0..tiles {
                for tx in 0..tiles {
                    let mut hist = vec![0.0f64; 256];
                    let mut lo = 255u8;
                    let mut hi = 0u8;
                    for dy in 0..tile_h {
                        for dx in 0..tile_w {
                            let v = value(ty * tile_h + dy, tx * tile_w + dx);
                            hist[v as usize] += 1.0;
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    let total = (tile_h * tile_w) as f64;
                    let limit = clip * total / 256.0;
                    let mut clipped = 0.0;
                    for b in hist.iter_mut() {
                        if *b > limit {
                            clipped += *b - limit;
                            *b = limit;
                        }
                    }
                    for b in hist.iter_mut() {
                        *b += clipped / 256.0;
                    }
                    // CDF accumulates counts and divides once, as documented.
                    let mut cum = 0.0;
                    for (g, b) in hist.iter().enumerate() {
                        cum += b;
                        luts[ty * tiles + tx][g] =
                            (f64::from(hi) - f64::from(lo)) * (cum / total) + f64::from(lo);
                    }
                }
            }
            // Bilinear blend of the four surrounding tile remaps.
            let blend = |pos: usize, tile: usize| -> (usize, usize, f64) {
                let center0 = (tile as f64 - 1.0) / 2.0;
                let u = (pos as f64 - center0) / tile as f64;
                if u <= 0.0 || tiles == 1 {
                    (0, 0, 0.0)
                } else if u >= (tiles - 1) as f64 {
                    (tiles - 1, tiles - 1, 0.0)
                } else {
                    (u.floor() as usize, u.floor() as usize + 1, u.fract())
                }
            };
            let mut plane = vec![0u8; h * w];
            for y in 0..h {
                for x in 0..w {
                    let (ty0, ty1, fy) = blend(y, tile_h);
                    let (tx0, tx1, fx) = blend(x, tile_w);
                    let g = img.at(y, x, c) as usize;
                    let v00 = luts[ty0 * tiles + tx0][g];
                    let v01 = luts[ty0 * tiles + tx1][g];
                    let v10 = luts[ty1 * tiles + tx0][g];
                    let v11 = luts[ty1 * tiles + tx1][g];
                    let top = v00 + fx * (v01 - v00);
                    let bot = v10 + fx * (v11 - v10);
                    let v = top + fy * (bot - top);
                    plane[y * w + x] = ((v + 0.5).floor()).clamp(0.0, 255.0) as u8;
                }
            }
            out.set_channel_plane(c, &plane);
        }
        out
    }

    /// Plain histogram equalization through the same CDF remap, no clipping.
    fn plain_hist_eq(img: &Image) -> Image {
        let mut out = img.clone();
        for c in 0..img.channels() {
            let plane = img.channel_plane(c);
            let mut hist = [0u64; 256];
            for &v in &plane {
                hist[v as usize] += 1;
            }
            let lo = *plane.iter().min().unwrap() as f64;
            let hi = *plane.iter().max().unwrap() as f64;
            let total = plane.len() as f64;
            let mut cdf = [0.0f64; 256];
            let mut cum = 0u64;
            for (g, &count) in hist.iter().enumerate() {
                cum += count;
                cdf[g] = cum as f64 / total;
            }
            let mapped: Vec<u8> = plane
                .iter()
                .map(|&v| (((hi - lo) * cdf[v as usize] + lo + 0.5).floor()) as u8)
                .collect();
            out.set_channel_plane(c, &mapped);
        }
        out
    }

    #[test]
    fn constant_image_is_unchanged() {
        let img = Image::filled(20, 20, 1, 77);
        assert_eq!(clahe(&img, 8, 2.0), img);
        let img3 = Image::filled(16, 24, 3, 3);
        assert_eq!(clahe(&img3, 4, 2.0), img3);
    }

    #[test]
    fn single_tile_with_huge_clip_is_plain_equalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<u8> = (0..16 * 16).map(|_| rng.random_range(30..220)).collect();
        let img = Image::new(16, 16, 1, data).unwrap();
        // clip of 256 puts the limit at tile_pixels, so nothing clips.
        assert_eq!(clahe(&img, 1, 256.0), plain_hist_eq(&img));
    }

    #[test]
    fn matches_literal_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &(h, w, tiles, clip) in &[
            (32usize, 32usize, 2usize, 2.0f64),
            (33, 31, 2, 2.0),
            (64, 48, 4, 3.0),
            (24, 24, 3, 1.5),
        ] {
            let data: Vec<u8> = (0..h * w).map(|_| rng.random()).collect();
            let img = Image::new(h, w, 1, data).unwrap();
            assert_eq!(clahe(&img, tiles, clip), oracle(&img, tiles, clip));
        }
    }

    #[test]
    fn output_stays_in_range_and_tile_maps_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let data: Vec<u8> = (0..40 * 40).map(|_| rng.random()).collect();
        let img = Image::new(40, 40, 1, data.clone()).unwrap();
        let _ = clahe(&img, 4, 2.0);

        // Inspect the tile remaps directly.
        let luts = tile_remaps(&data, 40, 4, 10, 10, 2.0);
        for lut in &luts {
            let lo = lut.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = lut.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo >= 0.0 && hi <= 255.0);
            for pair in lut.windows(2) {
                assert!(pair[0] <= pair[1] + 1e-12);
            }
        }
    }
}
