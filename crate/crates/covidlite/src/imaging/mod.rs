//! Raster decode/encode and the preprocessing pipeline.
//!
//! The pipeline runs in a fixed order: white balance, CLAHE, then
//! normalize + resize. The toggles in [`PreprocessConfig`] can disable the
//! first two steps but never reorder them. All steps are pure functions of
//! their inputs, so the whole pipeline is deterministic and safe to run
//! concurrently on distinct images.

mod clahe;
mod image_io;
mod resize;
mod white_balance;

pub use clahe::clahe;
pub use image_io::{decode_image, encode_image, load_image};
pub use resize::normalize_and_resize;
pub use white_balance::white_balance;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from image decoding, encoding, and validation.
#[derive(Debug, Error)]
pub enum ImagingError {
    /// The byte stream could not be decoded as PNG or JPEG.
    #[error("failed to decode image: {0}")]
    Decode(#[from] image::ImageError),
    /// Reading or writing an image file failed.
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Pixel buffer does not match the stated geometry.
    #[error("invalid image geometry: {0}")]
    Geometry(String),
    /// A configuration field is outside its documented range.
    #[error("invalid preprocess config: {0}")]
    Config(String),
}

/// 8-bit raster, row-major and channel-interleaved. The preprocessing currency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    /// Builds an image, checking `data.len() == height * width * channels`,
    /// `height >= 1`, `width >= 1` and `channels` in {1, 3}.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, ImagingError> {
        if height == 0 || width == 0 {
            return Err(ImagingError::Geometry(format!(
                "dimensions must be >= 1, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImagingError::Geometry(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(ImagingError::Geometry(format!(
                "buffer length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Constant-valued image.
    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels])
            .expect("filled() called with valid geometry")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Pixel value at (row, col, channel).
    pub fn at(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Copies one channel out as a contiguous plane.
    pub(crate) fn channel_plane(&self, c: usize) -> Vec<u8> {
        let mut plane = Vec::with_capacity(self.height * self.width);
        for p in 0..self.height * self.width {
            plane.push(self.data[p * self.channels + c]);
        }
        plane
    }

    /// Writes a plane back into one channel.
    pub(crate) fn set_channel_plane(&mut self, c: usize, plane: &[u8]) {
        debug_assert_eq!(plane.len(), self.height * self.width);
        for (p, &v) in plane.iter().enumerate() {
            self.data[p * self.channels + c] = v;
        }
    }
}

/// 3-channel float image in [0, 1], the bridge into the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl NormalizedImage {
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width * 3);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Always 3; grayscale sources are replicated on the way in.
    pub fn channels(&self) -> usize {
        3
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    /// Back to 8-bit (times 255, round half up). Used for overlay rendering.
    pub fn to_image(&self) -> Image {
        let data = self
            .data
            .iter()
            .map(|&v| round_half_up_u8(f64::from(v) * 255.0))
            .collect();
        Image::new(self.height, self.width, 3, data).expect("normalized image has valid geometry")
    }
}

/// Settings for the preprocessing pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Stretch each channel to the full 8-bit range.
    pub apply_white_balance: bool,
    /// Contrast-limited adaptive histogram equalization.
    pub apply_clahe: bool,
    /// CLAHE grid count per axis.
    pub clahe_tiles: usize,
    /// Relative histogram clip limit (1.0 = no headroom above uniform).
    pub clahe_clip: f64,
    /// Output side length in pixels.
    pub target_size: usize,
    /// Fraction of pixels discarded per tail during white balance.
    pub percentile: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            apply_white_balance: true,
            apply_clahe: true,
            clahe_tiles: 8,
            clahe_clip: 2.0,
            target_size: 224,
            percentile: 0.0005,
        }
    }
}

impl PreprocessConfig {
    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<(), ImagingError> {
        if self.clahe_tiles < 1 {
            return Err(ImagingError::Config("clahe_tiles must be >= 1".into()));
        }
        if !(self.clahe_clip >= 1.0) {
            return Err(ImagingError::Config("clahe_clip must be >= 1.0".into()));
        }
        if !(0.0..0.5).contains(&self.percentile) {
            return Err(ImagingError::Config(
                "percentile must lie in [0, 0.5)".into(),
            ));
        }
        if self.target_size < 8 {
            return Err(ImagingError::Config("target_size must be >= 8".into()));
        }
        Ok(())
    }
}

/// Runs the full pipeline: white balance, CLAHE, normalize + resize.
pub fn preprocess(img: &Image, cfg: &PreprocessConfig) -> Result<NormalizedImage, ImagingError> {
    cfg.validate()?;
    let mut work = img.clone();
    if cfg.apply_white_balance {
        work = white_balance(&work, cfg.percentile);
    }
    if cfg.apply_clahe {
        work = clahe(&work, cfg.clahe_tiles, cfg.clahe_clip);
    }
    Ok(normalize_and_resize(&work, cfg.target_size))
}

/// Round half up and saturate into an 8-bit value.
pub(crate) fn round_half_up_u8(x: f64) -> u8 {
    (x + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_geometry_is_checked() {
        assert!(Image::new(0, 4, 1, vec![]).is_err());
        assert!(Image::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(Image::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(Image::new(2, 2, 3, vec![0; 12]).is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = PreprocessConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.percentile = 0.5;
        assert!(cfg.validate().is_err());
        cfg.percentile = 0.0;
        cfg.clahe_clip = 0.5;
        assert!(cfg.validate().is_err());
        cfg.clahe_clip = 1.0;
        cfg.target_size = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let mut data = Vec::new();
        for i in 0..64 * 64 {
            data.push((i * 37 % 256) as u8);
        }
        let img = Image::new(64, 64, 1, data).unwrap();
        let cfg = PreprocessConfig {
            target_size: 32,
            ..PreprocessConfig::default()
        };
        let a = preprocess(&img, &cfg).unwrap();
        let b = preprocess(&img, &cfg).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn round_half_up_convention() {
        assert_eq!(round_half_up_u8(127.5), 128);
        assert_eq!(round_half_up_u8(127.4999), 127);
        assert_eq!(round_half_up_u8(-3.0), 0);
        assert_eq!(round_half_up_u8(255.7), 255);
    }
}
