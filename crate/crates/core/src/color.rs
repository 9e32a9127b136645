//! Color values in sRGB, HSL and CIELAB, conversions between them, the
//! `#RRGGBB` wire codec and Lab-based color and palette distances.
//!
//! Lab conversions assume sRGB primaries with a D65 white point. Distances
//! are CIE76 (Euclidean in Lab).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of colors in a palette.
pub const PALETTE_LEN: usize = 5;

const RANGE_SLACK: f64 = 1e-9;

// Linear sRGB -> XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// The white point is the image of RGB (1,1,1) so that white lands on a = b = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const LAB_EPSILON: f64 = 6.0 / 29.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    Hsl,
    Lab,
}

impl ColorSpace {
    fn check(self, c: [f64; 3]) -> Result<[f64; 3]> {
        let (lo, hi): ([f64; 3], [f64; 3]) = match self {
            ColorSpace::Rgb => ([0.0; 3], [1.0; 3]),
            ColorSpace::Hsl => ([0.0; 3], [360.0, 1.0, 1.0]),
            ColorSpace::Lab => ([0.0, -128.0, -128.0], [100.0, 127.0, 127.0]),
        };
        for i in 0..3 {
            if !c[i].is_finite() || c[i] < lo[i] - RANGE_SLACK || c[i] > hi[i] + RANGE_SLACK {
                return Err(Error::validation(format!(
                    "{self:?} channel {i} = {} outside [{}, {}]",
                    c[i], lo[i], hi[i]
                )));
            }
        }
        Ok(self.clamp(c))
    }

    fn clamp(self, c: [f64; 3]) -> [f64; 3] {
        match self {
            ColorSpace::Rgb => c.map(|v| v.clamp(0.0, 1.0)),
            ColorSpace::Hsl => {
                let s = c[1].clamp(0.0, 1.0);
                let l = c[2].clamp(0.0, 1.0);
                let mut h = c[0].rem_euclid(360.0);
                if h >= 360.0 || s == 0.0 {
                    h = 0.0;
                }
                [h, s, l]
            }
            ColorSpace::Lab => [
                c[0].clamp(0.0, 100.0),
                c[1].clamp(-128.0, 127.0),
                c[2].clamp(-128.0, 127.0),
            ],
        }
    }
}

/// A color tagged with its space. Channels are always within the space's
/// range: RGB in `[0,1]`, HSL as hue degrees `[0,360)` plus saturation and
/// lightness in `[0,1]`, Lab with `L` in `[0,100]` and `a`, `b` in `[-128,127]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Color {
    space: ColorSpace,
    channels: [f64; 3],
}

impl Color {
    pub fn new(space: ColorSpace, channels: [f64; 3]) -> Result<Self> {
        Ok(Color {
            space,
            channels: space.check(channels)?,
        })
    }

    pub fn rgb(r: f64, g: f64, b: f64) -> Result<Self> {
        Self::new(ColorSpace::Rgb, [r, g, b])
    }

    pub fn hsl(h: f64, s: f64, l: f64) -> Result<Self> {
        Self::new(ColorSpace::Hsl, [h, s, l])
    }

    pub fn lab(l: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(ColorSpace::Lab, [l, a, b])
    }

    pub fn from_rgb8(rgb: [u8; 3]) -> Self {
        Color {
            space: ColorSpace::Rgb,
            channels: rgb.map(|v| v as f64 / 255.0),
        }
    }

    /// Builds a color from channels that may sit marginally outside the
    /// range because of floating point error; they are clamped.
    pub(crate) fn clamped(space: ColorSpace, channels: [f64; 3]) -> Self {
        Color {
            space,
            channels: space.clamp(channels),
        }
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn channels(&self) -> [f64; 3] {
        self.channels
    }

    /// Converts to `target`. Converting into the current space is the identity.
    pub fn to(&self, target: ColorSpace) -> Color {
        if target == self.space {
            return *self;
        }
        let rgb = match self.space {
            ColorSpace::Rgb => self.channels,
            ColorSpace::Hsl => hsl_to_rgb(self.channels),
            ColorSpace::Lab => lab_to_rgb_unclamped(self.channels).map(|v| v.clamp(0.0, 1.0)),
        };
        let out = match target {
            ColorSpace::Rgb => rgb,
            ColorSpace::Hsl => rgb_to_hsl(rgb),
            ColorSpace::Lab => rgb_to_lab(rgb),
        };
        Color::clamped(target, out)
    }

    pub fn to_rgb(&self) -> [f64; 3] {
        self.to(ColorSpace::Rgb).channels
    }

    pub fn to_lab(&self) -> [f64; 3] {
        self.to(ColorSpace::Lab).channels
    }

    pub fn to_hsl(&self) -> [f64; 3] {
        self.to(ColorSpace::Hsl).channels
    }

    pub fn to_rgb8(&self) -> [u8; 3] {
        self.to_rgb().map(|v| (v * 255.0).round() as u8)
    }

    /// Uppercase `#RRGGBB`.
    pub fn to_hex(&self) -> String {
        let [r, g, b] = self.to_rgb8();
        format!("#{r:02X}{g:02X}{b:02X}")
    }

    /// Parses `#RRGGBB` (hex digits in either case) into an RGB color.
    pub fn from_hex(s: &str) -> Result<Self> {
        let parse_err = |reason: &str| Error::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let digits = s
            .strip_prefix('#')
            .ok_or_else(|| parse_err("expected leading '#'"))?;
        if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(parse_err("expected six hex digits"));
        }
        let mut rgb = [0u8; 3];
        for (i, slot) in rgb.iter_mut().enumerate() {
            *slot = u8::from_str_radix(&digits[2 * i..2 * i + 2], 16)
                .map_err(|e| parse_err(&e.to_string()))?;
        }
        Ok(Color::from_rgb8(rgb))
    }
}

impl FromStr for Color {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Color::from_hex(s)
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Free-function form of [`Color::to`].
pub fn convert(color: &Color, target: ColorSpace) -> Color {
    color.to(target)
}

pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON.powi(3) {
        t.cbrt()
    } else {
        t / (3.0 * LAB_EPSILON * LAB_EPSILON) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.powi(3)
    } else {
        3.0 * LAB_EPSILON * LAB_EPSILON * (t - 4.0 / 29.0)
    }
}

/// sRGB in `[0,1]` to Lab (D65).
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz: [f64; 3] =
        std::array::from_fn(|i| (0..3).map(|j| RGB_TO_XYZ[i][j] * lin[j]).sum::<f64>() / WHITE[i]);
    let [fx, fy, fz] = xyz.map(lab_f);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Lab (D65) to sRGB without gamut clipping; channels may leave `[0,1]`.
pub fn lab_to_rgb_unclamped(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        lab_f_inv(fx) * WHITE[0],
        lab_f_inv(fy) * WHITE[1],
        lab_f_inv(fz) * WHITE[2],
    ];
    let lin: [f64; 3] =
        std::array::from_fn(|i| (0..3).map(|j| XYZ_TO_RGB[i][j] * xyz[j]).sum::<f64>());
    lin.map(|v| {
        if v < 0.0 {
            -linear_to_srgb(-v)
        } else {
            linear_to_srgb(v)
        }
    })
}

const XYZ_TO_RGB: [[f64; 3]; 3] = invert3(RGB_TO_XYZ);

const fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    [
        [
            c00 / det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
        ],
        [
            c01 / det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
        ],
        [
            c02 / det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
        ],
    ]
}

pub fn rgb_to_hsl(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let l = (max + min) / 2.0;
    let delta = max - min;
    if delta <= f64::EPSILON {
        return [0.0, 0.0, l];
    }
    let s = delta / (1.0 - (2.0 * l - 1.0).abs());
    let h = if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    [h.rem_euclid(360.0), s.min(1.0), l]
}

pub fn hsl_to_rgb(hsl: [f64; 3]) -> [f64; 3] {
    let [h, s, l] = hsl;
    let chroma = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = chroma * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    let m = l - chroma / 2.0;
    [r + m, g + m, b + m].map(|v| v.clamp(0.0, 1.0))
}

/// CIE76 color difference.
pub fn delta_e76(a: &Color, b: &Color) -> f64 {
    lab_distance(a.to_lab(), b.to_lab())
}

pub fn lab_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// An ordered palette of exactly five colors in one space. Index 0 is the
/// most representative color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Palette {
    colors: [Color; PALETTE_LEN],
}

impl Palette {
    pub fn new(colors: Vec<Color>) -> Result<Self> {
        let colors: [Color; PALETTE_LEN] = colors.try_into().map_err(|v: Vec<Color>| {
            Error::validation(format!(
                "palette length must be {PALETTE_LEN}, got {}",
                v.len()
            ))
        })?;
        let space = colors[0].space();
        if colors.iter().any(|c| c.space() != space) {
            return Err(Error::validation("palette colors must share one color space"));
        }
        Ok(Palette { colors })
    }

    pub fn from_hex<S: AsRef<str>>(hex: &[S]) -> Result<Self> {
        let colors = hex
            .iter()
            .map(|s| Color::from_hex(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Palette::new(colors)
    }

    pub fn colors(&self) -> &[Color; PALETTE_LEN] {
        &self.colors
    }

    pub fn space(&self) -> ColorSpace {
        self.colors[0].space()
    }

    pub fn to_space(&self, space: ColorSpace) -> Palette {
        Palette {
            colors: self.colors.map(|c| c.to(space)),
        }
    }

    pub fn to_hex(&self) -> Vec<String> {
        self.colors.iter().map(Color::to_hex).collect()
    }

    pub fn lab(&self) -> [[f64; 3]; PALETTE_LEN] {
        self.colors.map(|c| c.to_lab())
    }

    pub fn rgb(&self) -> [[f64; 3]; PALETTE_LEN] {
        self.colors.map(|c| c.to_rgb())
    }
}

impl Serialize for Palette {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_hex().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Palette {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let hex = Vec::<String>::deserialize(deserializer)?;
        Palette::from_hex(&hex).map_err(serde::de::Error::custom)
    }
}

/// Minimum-cost perfect matching between the two palettes under pairwise
/// ΔE76, divided by the palette length. Order-insensitive.
pub fn palette_distance(a: &Palette, b: &Palette) -> f64 {
    let la = a.lab();
    let lb = b.lab();
    let mut cost = [[0.0; PALETTE_LEN]; PALETTE_LEN];
    for i in 0..PALETTE_LEN {
        for j in 0..PALETTE_LEN {
            cost[i][j] = lab_distance(la[i], lb[j]);
        }
    }
    // best[mask] = cheapest assignment of the first popcount(mask) rows onto the columns in mask
    let full = (1usize << PALETTE_LEN) - 1;
    let mut best = vec![f64::INFINITY; full + 1];
    best[0] = 0.0;
    for mask in 0..full {
        if !best[mask].is_finite() {
            continue;
        }
        let row = mask.count_ones() as usize;
        for (col, c) in cost[row].iter().enumerate() {
            if mask & (1 << col) == 0 {
                let next = mask | (1 << col);
                best[next] = best[next].min(best[mask] + c);
            }
        }
    }
    best[full] / PALETTE_LEN as f64
}
