//! sRGB to CIE 1976 L*a*b* and L*u*v*, D65 reference white.

use super::RoiFrame;

const WHITE_X: f64 = 0.95047;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.08883;

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

/// Per-pixel (L*, a*, b*), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<[f64; 3]>,
}

/// Per-pixel (L*, u*, v*), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LuvGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<[f64; 3]>,
}

impl LabGrid {
    pub fn a_star(&self) -> impl ExactSizeIterator<Item = f64> + Clone + '_ {
        self.values.iter().map(|p| p[1])
    }
}

impl LuvGrid {
    pub fn u_star(&self) -> impl ExactSizeIterator<Item = f64> + Clone + '_ {
        self.values.iter().map(|p| p[1])
    }
}

#[inline]
fn linearize(c: u8) -> f64 {
    let c = f64::from(c) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn srgb_to_xyz([r, g, b]: [u8; 3]) -> [f64; 3] {
    let (r, g, b) = (linearize(r), linearize(g), linearize(b));
    [
        0.4124564 * r + 0.3575761 * g + 0.1804375 * b,
        0.2126729 * r + 0.7151522 * g + 0.0721750 * b,
        0.0193339 * r + 0.1191920 * g + 0.9503041 * b,
    ]
}

#[inline]
fn lightness(y_rel: f64) -> f64 {
    let l = if y_rel > EPSILON {
        116.0 * y_rel.cbrt() - 16.0
    } else {
        KAPPA * y_rel
    };
    // The sRGB matrix maps white to Y = 1.0000001.
    l.min(100.0)
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let [x, y, z] = srgb_to_xyz(rgb);
    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);
    [lightness(y / WHITE_Y), 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn chromaticity(x: f64, y: f64, z: f64) -> Option<(f64, f64)> {
    let d = x + 15.0 * y + 3.0 * z;
    (d > 0.0).then(|| (4.0 * x / d, 9.0 * y / d))
}

fn pixel_to_luv(rgb: [u8; 3]) -> [f64; 3] {
    let [x, y, z] = srgb_to_xyz(rgb);
    let l = lightness(y / WHITE_Y);
    let (un, vn) = chromaticity(WHITE_X, WHITE_Y, WHITE_Z).expect("white point");
    match chromaticity(x, y, z) {
        Some((u, v)) => [l, 13.0 * l * (u - un), 13.0 * l * (v - vn)],
        None => [0.0, 0.0, 0.0],
    }
}

pub fn srgb_to_lab(frame: &RoiFrame) -> LabGrid {
    LabGrid {
        width: frame.width(),
        height: frame.height(),
        values: frame.pixels().iter().map(|&p| pixel_to_lab(p)).collect(),
    }
}

pub fn srgb_to_luv(frame: &RoiFrame) -> LuvGrid {
    LuvGrid {
        width: frame.width(),
        height: frame.height(),
        values: frame.pixels().iter().map(|&p| pixel_to_luv(p)).collect(),
    }
}
