//! In-memory image grids and the decode/encode/resize helpers the pipeline
//! needs. Grids are row-major `f64` planes.

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Rgb};

use crate::color::{lab_to_rgb_unclamped, rgb_to_lab};
use crate::error::{Error, Result};

/// Single-channel grid with values in `[0,1]`. Used for grayscale inputs,
/// where the value is Lab lightness divided by 100.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl LumaGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation("image must be non-empty"));
        }
        if data.len() != width * height {
            return Err(Error::Dimension {
                what: "luma grid",
                expected: width * height,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("grayscale value {v} outside [0,1]")));
        }
        Ok(LumaGrid { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        LumaGrid {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn resize(&self, width: usize, height: usize) -> LumaGrid {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let data = resize_plane(&self.data, self.width, self.height, width, height);
        LumaGrid { width, height, data }
    }
}

/// Three-channel sRGB grid, channels in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbGrid {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl RgbGrid {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.is_empty() {
            return Err(Error::validation("image must be non-empty"));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension {
                what: "rgb grid",
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(RgbGrid { width, height, pixels })
    }

    /// Lab lightness per pixel, scaled to `[0,1]`.
    pub fn luma(&self) -> LumaGrid {
        LumaGrid {
            width: self.width,
            height: self.height,
            data: self.pixels.iter().map(|p| luma_of(*p)).collect(),
        }
    }

    pub fn lab_planes(&self) -> [Vec<f64>; 3] {
        let mut planes = [
            Vec::with_capacity(self.pixels.len()),
            Vec::with_capacity(self.pixels.len()),
            Vec::with_capacity(self.pixels.len()),
        ];
        for p in &self.pixels {
            let lab = rgb_to_lab(*p);
            for c in 0..3 {
                planes[c].push(lab[c]);
            }
        }
        planes
    }

    pub fn resize(&self, width: usize, height: usize) -> RgbGrid {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let planes: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                let plane: Vec<f64> = self.pixels.iter().map(|p| p[c]).collect();
                resize_plane(&plane, self.width, self.height, width, height)
            })
            .collect();
        let pixels = (0..width * height)
            .map(|i| [planes[0][i], planes[1][i], planes[2][i]])
            .collect();
        RgbGrid { width, height, pixels }
    }
}

/// Lab lightness of an sRGB pixel, scaled to `[0,1]`.
pub fn luma_of(rgb: [f64; 3]) -> f64 {
    (rgb_to_lab(rgb)[0] / 100.0).clamp(0.0, 1.0)
}

/// Bilinear resampling with pixel-center alignment.
pub fn resize_plane(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dw * dh);
    let sx = sw as f64 / dw as f64;
    let sy = sh as f64 / dh as f64;
    for y in 0..dh {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let ty = fy - y0 as f64;
        for x in 0..dw {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let tx = fx - x0 as f64;
            let top = src[y0 * sw + x0] * (1.0 - tx) + src[y0 * sw + x1] * tx;
            let bottom = src[y1 * sw + x0] * (1.0 - tx) + src[y1 * sw + x1] * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Nearest-neighbor resampling.
pub fn upscale_nearest(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let ys = ((y as f64 + 0.5) * sh as f64 / dh as f64) as usize;
        let ys = ys.min(sh - 1);
        for x in 0..dw {
            let xs = (((x as f64 + 0.5) * sw as f64 / dw as f64) as usize).min(sw - 1);
            out.push(src[ys * sw + xs]);
        }
    }
    out
}

pub fn decode_rgb(bytes: &[u8]) -> Result<RgbGrid> {
    let img = image::load_from_memory(bytes)?;
    Ok(from_dynamic(img))
}

pub fn load_rgb(path: &Path) -> Result<RgbGrid> {
    let img = image::open(path)?;
    Ok(from_dynamic(img))
}

fn from_dynamic(img: image::DynamicImage) -> RgbGrid {
    // 16-bit decode keeps precision for 16-bit PNGs and is exact for 8-bit.
    let rgb = img.to_rgb16();
    let (w, h) = rgb.dimensions();
    let pixels = rgb
        .pixels()
        .map(|p| p.0.map(|v| v as f64 / 65535.0))
        .collect();
    RgbGrid {
        width: w as usize,
        height: h as usize,
        pixels,
    }
}

/// Encodes as a 16-bit-per-channel RGB PNG.
pub fn encode_png16(img: &RgbGrid) -> Result<Vec<u8>> {
    let raw: Vec<u16> = img
        .pixels
        .iter()
        .flat_map(|p| p.map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16))
        .collect();
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, raw)
            .ok_or_else(|| Error::validation("pixel buffer does not match dimensions"))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Encodes as an 8-bit RGB PNG.
pub fn encode_png8(img: &RgbGrid) -> Result<Vec<u8>> {
    let raw: Vec<u8> = img
        .pixels
        .iter()
        .flat_map(|p| p.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, raw)
            .ok_or_else(|| Error::validation("pixel buffer does not match dimensions"))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Renders a grayscale grid (Lab lightness / 100) as neutral sRGB.
pub fn luma_to_rgb(grid: &LumaGrid) -> RgbGrid {
    RgbGrid {
        width: grid.width,
        height: grid.height,
        pixels: grid
            .data
            .iter()
            .map(|l| lab_to_rgb_unclamped([l * 100.0, 0.0, 0.0]).map(|v| v.clamp(0.0, 1.0)))
            .collect(),
    }
}
