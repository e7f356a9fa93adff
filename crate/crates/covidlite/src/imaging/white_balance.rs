//! Percentile channel stretch.

use super::{round_half_up_u8, Image};

/// Stretches each channel independently to the full 8-bit range, discarding
/// `percentile` of the pixels at each tail before picking the stretch bounds.
///
/// Bounds use the nearest-rank convention on the sorted channel: the lower
/// bound is the value at rank `ceil(percentile * n)` (at least 1) and the
/// upper bound at rank `ceil((1 - percentile) * n)`, both 1-based. Each pixel
/// maps to `clip((v - lo) * 255 / (hi - lo), 0, 255)` rounded half up. A
/// channel whose two bounds coincide is returned unchanged.
pub fn white_balance(img: &Image, percentile: f64) -> Image {
    let mut out = img.clone();
    let n = img.height() * img.width();
    for c in 0..img.channels() {
        let plane = img.channel_plane(c);
        let mut sorted = plane.clone();
        sorted.sort_unstable();
        let (lo, hi) = percentile_bounds(&sorted, percentile);
        if lo == hi {
            continue;
        }
        let scale = 255.0 / (f64::from(hi) - f64::from(lo));
        let mut mapped = Vec::with_capacity(n);
        for &v in &plane {
            let stretched = (f64::from(v) - f64::from(lo)) * scale;
            mapped.push(round_half_up_u8(stretched.clamp(0.0, 255.0)));
        }
        out.set_channel_plane(c, &mapped);
    }
    out
}

/// Nearest-rank tail bounds of an ascending-sorted channel.
pub(crate) fn percentile_bounds(sorted: &[u8], percentile: f64) -> (u8, u8) {
    let n = sorted.len();
    let rank_lo = ((percentile * n as f64).ceil() as usize).max(1);
    let rank_hi = (((1.0 - percentile) * n as f64).ceil() as usize).clamp(rank_lo, n);
    (sorted[rank_lo - 1], sorted[rank_hi - 1])
}
