use std::io::Cursor;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use image::{GrayImage, ImageFormat};

/// Base64 of an 8-bit grayscale PNG.
pub(crate) fn encode_gray_png(width: u32, height: u32, pixels: Vec<u8>) -> Result<String, String> {
    let img = GrayImage::from_raw(width, height, pixels)
        .ok_or("pixel count does not match image size")?;
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| e.to_string())?;
    Ok(STANDARD.encode(buf.into_inner()))
}
