//! PNG IO for 32x32 RGB visual frames.
//!
//! In-memory frames are channel-major `[3, 32, 32]` f64 data in [0, 1];
//! on disk they are 8-bit RGB PNGs. Writing quantizes to u8, so a
//! round trip is exact only for values already on the 1/255 grid.

use std::path::Path;

use image::{ImageReader, Rgb, RgbImage};

use crate::error::{Error, Result};

pub const SIDE: usize = 32;
pub const PIXELS: usize = 3 * SIDE * SIDE;

pub fn write_png(path: &Path, frame: &[f64]) -> Result<()> {
    if frame.len() != PIXELS {
        return Err(Error::Data(format!(
            "image frame has {} values, expected {PIXELS}",
            frame.len()
        )));
    }
    let mut img = RgbImage::new(SIDE as u32, SIDE as u32);
    for y in 0..SIDE {
        for x in 0..SIDE {
            let px = |c: usize| {
                let v = frame[c * SIDE * SIDE + y * SIDE + x].clamp(0.0, 1.0);
                (v * 255.0).round() as u8
            };
            img.put_pixel(x as u32, y as u32, Rgb([px(0), px(1), px(2)]));
        }
    }
    img.save(path)
        .map_err(|e| Error::Data(format!("{}: png encode: {e}", path.display())))
}

pub fn read_png(path: &Path) -> Result<Vec<f64>> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?
        .decode()
        .map_err(|e| Error::Data(format!("{}: png decode: {e}", path.display())))?
        .to_rgb8();
    if img.width() as usize != SIDE || img.height() as usize != SIDE {
        return Err(Error::Data(format!(
            "{}: image is {}x{}, expected {SIDE}x{SIDE}",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    let mut out = vec![0.0; PIXELS];
    for (x, y, Rgb(rgb)) in img.enumerate_pixels() {
        for (c, &v) in rgb.iter().enumerate() {
            out[c * SIDE * SIDE + y as usize * SIDE + x as usize] = v as f64 / 255.0;
        }
    }
    Ok(out)
}
