//! PNG/JPEG decode and lossless PNG encode.

use std::path::Path;

use image::{DynamicImage, ImageFormat};

use super::{Image, ImagingError};

/// Decodes a PNG or JPEG byte stream.
///
/// 16-bit sources are rescaled to 8 bits by integer division by 257; an
/// alpha channel, if present, is dropped.
pub fn decode_image(bytes: &[u8]) -> Result<Image, ImagingError> {
    let dynimg = image::load_from_memory(bytes)?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let (channels, data) = match dynimg {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
        DynamicImage::ImageLumaA8(buf) => {
            (1, buf.into_raw().chunks_exact(2).map(|px| px[0]).collect())
        }
        DynamicImage::ImageRgba8(buf) => (
            3,
            buf.into_raw()
                .chunks_exact(4)
                .flat_map(|px| [px[0], px[1], px[2]])
                .collect(),
        ),
        DynamicImage::ImageLuma16(buf) => {
            (1, buf.into_raw().iter().map(|&v| (v / 257) as u8).collect())
        }
        DynamicImage::ImageLumaA16(buf) => (
            1,
            buf.into_raw()
                .chunks_exact(2)
                .map(|px| (px[0] / 257) as u8)
                .collect(),
        ),
        DynamicImage::ImageRgb16(buf) => {
            (3, buf.into_raw().iter().map(|&v| (v / 257) as u8).collect())
        }
        DynamicImage::ImageRgba16(buf) => (
            3,
            buf.into_raw()
                .chunks_exact(4)
                .flat_map(|px| [(px[0] / 257) as u8, (px[1] / 257) as u8, (px[2] / 257) as u8])
                .collect(),
        ),
        other => (3, other.to_rgb8().into_raw()),
    };
    Image::new(h, w, channels, data)
}

/// Reads and decodes an image file.
pub fn load_image(path: &Path) -> Result<Image, ImagingError> {
    let bytes = std::fs::read(path).map_err(|source| ImagingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_image(&bytes)
}

/// Writes a lossless PNG; round-trips bit-exactly through [`decode_image`].
pub fn encode_image(img: &Image, path: &Path) -> Result<(), ImagingError> {
    let color = match img.channels() {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        color,
        ImageFormat::Png,
    )
    .map_err(|err| match err {
        image::ImageError::IoError(source) => ImagingError::Io {
            path: path.display().to_string(),
            source,
        },
        other => ImagingError::Decode(other),
    })
}
