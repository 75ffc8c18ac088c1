use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, ImageReader, RgbImage};

use super::Image;
use crate::error::{Error, Result};

/// Decode a PNG, PPM or JPEG file; 8-bit values map to `v / 255` and
/// 16-bit values to `v / 65535`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::Decode {
        path: path.to_path_buf(),
        message,
    })
}

/// Decode an in-memory PNG/PPM/JPEG.
pub fn decode(bytes: &[u8]) -> std::result::Result<Image, String> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| e.to_string())?;
    if reader.format().is_none() {
        return Err("unsupported image format".into());
    }
    let decoded = reader.decode().map_err(|e| e.to_string())?;
    let color = decoded.color();
    if color.bits_per_pixel() / u16::from(color.channel_count()) > 8 {
        let rgb = decoded.to_rgb16();
        let data = rgb.as_raw().iter().map(|&v| v as f32 / 65535.0).collect();
        return Image::new(rgb.width() as usize, rgb.height() as usize, data).map_err(|e| e.to_string());
    }
    from_rgb8(&decoded.to_rgb8()).map_err(|e| e.to_string())
}

pub(crate) fn from_rgb8(rgb: &RgbImage) -> Result<Image> {
    let data = rgb.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
    Image::new(rgb.width() as usize, rgb.height() as usize, data)
}

/// Quantize to 8 bits with round-half-up.
pub fn to_rgb8(image: &Image) -> Vec<u8> {
    image
        .data()
        .iter()
        .map(|&v| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Encode by file extension (`.png`, `.ppm`) and write atomically: the
/// target is only replaced once the encoded bytes are fully on disk.
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let bytes = match ext.as_str() {
        "ppm" => encode_ppm(image),
        "png" => encode_png(image).map_err(|message| Error::Decode {
            path: path.to_path_buf(),
            message,
        })?,
        other => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                message: format!("unsupported output format {other:?} (use .png or .ppm)"),
            })
        }
    };
    write_atomic(path, &bytes)
}

/// Write via a sibling `.partial` file and rename, so a failure never leaves
/// a half-written `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Binary PPM (P6), maxval 255.
pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(to_rgb8(image));
    out
}

pub fn encode_png(image: &Image) -> std::result::Result<Vec<u8>, String> {
    let rgb = RgbImage::from_raw(image.width() as u32, image.height() as u32, to_rgb8(image))
        .ok_or("image buffer size mismatch")?;
    let mut out = Cursor::new(Vec::new());
    rgb.write_to(&mut out, ImageFormat::Png).map_err(|e| e.to_string())?;
    Ok(out.into_inner())
}
