//! Color representations and the two distance functions used throughout.
//!
//! Colors enter the system as HSL or RGB (at ingestion boundaries) and are
//! converted once to CIELAB. Everything downstream works on [`LabColor`].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::ColorError;

/// sRGB color with channels normalized to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgbColor {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl RgbColor {
    pub fn new(r: f64, g: f64, b: f64) -> Result<Self, ColorError> {
        for (name, v) in [("r", r), ("g", g), ("b", b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ColorError::OutOfRange { channel: name, value: v });
            }
        }
        Ok(Self { r, g, b })
    }

    /// 8-bit channels, divided by 255.
    pub fn from_u8(r: u8, g: u8, b: u8) -> Self {
        Self { r: f64::from(r) / 255.0, g: f64::from(g) / 255.0, b: f64::from(b) / 255.0 }
    }

    pub fn to_lab(self) -> LabColor {
        rgb_to_lab(self)
    }
}

/// HSL color: hue in degrees `[0, 360)`, saturation and lightness in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HslColor {
    pub h: f64,
    pub s: f64,
    pub l: f64,
}

impl HslColor {
    pub fn new(h: f64, s: f64, l: f64) -> Result<Self, ColorError> {
        if !(0.0..360.0).contains(&h) {
            return Err(ColorError::OutOfRange { channel: "h", value: h });
        }
        if !(0.0..=100.0).contains(&s) {
            return Err(ColorError::OutOfRange { channel: "s", value: s });
        }
        if !(0.0..=100.0).contains(&l) {
            return Err(ColorError::OutOfRange { channel: "l", value: l });
        }
        Ok(Self { h, s, l })
    }
}

/// A point in CIELAB (D65).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }

    /// Bit-exact identity key, used to group repeated chips.
    pub fn key(self) -> [u64; 3] {
        [self.l.to_bits(), self.a.to_bits(), self.b.to_bits()]
    }

    pub fn scaled(self, k: f64) -> Self {
        Self::new(self.l * k, self.a * k, self.b * k)
    }
}

/// Standard HSL to RGB conversion.
pub fn hsl_to_rgb(c: HslColor) -> Result<RgbColor, ColorError> {
    let HslColor { h, s, l } = HslColor::new(c.h, c.s, c.l)?;
    let s = s / 100.0;
    let l = l / 100.0;
    let chroma = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let h6 = h / 60.0;
    let x = chroma * (1.0 - (h6 % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match h6 as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    let m = l - chroma / 2.0;
    let clamp = |v: f64| (v + m).clamp(0.0, 1.0);
    Ok(RgbColor { r: clamp(r1), g: clamp(g1), b: clamp(b1) })
}

// sRGB primaries -> XYZ, D65. The reference white is the image of (1, 1, 1)
// under this matrix so that white maps to a = b = 0 exactly.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [[0.4124, 0.3576, 0.1805], [0.2126, 0.7152, 0.0722], [0.0193, 0.1192, 0.9505]];

fn white_point() -> [f64; 3] {
    SRGB_TO_XYZ.map(|row| row.iter().sum())
}

fn srgb_linearize(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB -> linear RGB -> XYZ -> CIELAB.
pub fn rgb_to_lab(c: RgbColor) -> LabColor {
    let lin = [srgb_linearize(c.r), srgb_linearize(c.g), srgb_linearize(c.b)];
    let white = white_point();
    let mut f = [0.0; 3];
    for (i, row) in SRGB_TO_XYZ.iter().enumerate() {
        let xyz: f64 = row.iter().zip(lin.iter()).map(|(m, v)| m * v).sum();
        f[i] = lab_f(xyz / white[i]);
    }
    LabColor { l: (116.0 * f[1] - 16.0).clamp(0.0, 100.0), a: 500.0 * (f[0] - f[1]), b: 200.0 * (f[1] - f[2]) }
}

pub fn hsl_to_lab(c: HslColor) -> Result<LabColor, ColorError> {
    hsl_to_rgb(c).map(rgb_to_lab)
}

/// Euclidean distance in CIELAB.
pub fn lab_euclidean(x: LabColor, y: LabColor) -> f64 {
    let dl = x.l - y.l;
    let da = x.a - y.a;
    let db = x.b - y.b;
    (dl * dl + da * da + db * db).sqrt()
}

/// CIEDE2000 color difference with kL = kC = kH = 1.
pub fn ciede2000(x: LabColor, y: LabColor) -> f64 {
    let pow7 = |v: f64| v.powi(7);
    let twenty_five_7 = 25f64.powi(7);

    let c1 = x.a.hypot(x.b);
    let c2 = y.a.hypot(y.b);
    let c_bar = (c1 + c2) / 2.0;
    let g = 0.5 * (1.0 - (pow7(c_bar) / (pow7(c_bar) + twenty_five_7)).sqrt());

    let a1p = (1.0 + g) * x.a;
    let a2p = (1.0 + g) * y.a;
    let c1p = a1p.hypot(x.b);
    let c2p = a2p.hypot(y.b);

    let hue = |b: f64, ap: f64| {
        if b == 0.0 && ap == 0.0 {
            0.0
        } else {
            let h = b.atan2(ap).to_degrees();
            if h < 0.0 {
                h + 360.0
            } else {
                h
            }
        }
    };
    let h1p = hue(x.b, a1p);
    let h2p = hue(y.b, a2p);

    let dl = y.l - x.l;
    let dc = c2p - c1p;
    let dh_angle = if c1p * c2p == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dh = 2.0 * (c1p * c2p).sqrt() * (dh_angle.to_radians() / 2.0).sin();

    let l_bar = (x.l + y.l) / 2.0;
    let cp_bar = (c1p + c2p) / 2.0;
    let hp_bar = if c1p * c2p == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        (h1p + h2p) / 2.0
    } else if h1p + h2p < 360.0 {
        (h1p + h2p + 360.0) / 2.0
    } else {
        (h1p + h2p - 360.0) / 2.0
    };

    let t = 1.0 - 0.17 * (hp_bar - 30.0).to_radians().cos()
        + 0.24 * (2.0 * hp_bar).to_radians().cos()
        + 0.32 * (3.0 * hp_bar + 6.0).to_radians().cos()
        - 0.20 * (4.0 * hp_bar - 63.0).to_radians().cos();
    let d_theta = 30.0 * (-((hp_bar - 275.0) / 25.0).powi(2)).exp();
    let r_c = 2.0 * (pow7(cp_bar) / (pow7(cp_bar) + twenty_five_7)).sqrt();
    let l50 = (l_bar - 50.0).powi(2);
    let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let s_c = 1.0 + 0.045 * cp_bar;
    let s_h = 1.0 + 0.015 * cp_bar * t;
    let r_t = -(2.0 * d_theta * PI / 180.0).sin() * r_c;

    let tl = dl / s_l;
    let tc = dc / s_c;
    let th = dh / s_h;
    (tl * tl + tc * tc + th * th + r_t * tc * th).sqrt()
}
