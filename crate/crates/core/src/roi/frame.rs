use crate::error::{Error, Result};

/// One cropped RGB mouth image. The grid size is the original crop size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiFrame {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RoiFrame {
    /// Builds a frame from row-major pixels.
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "crop size must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }
}

/// Real-valued single-channel grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "grid size must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::SizeMismatch(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFrame("non-finite grid value".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn transpose(&self) -> GrayGrid {
        let mut values = Vec::with_capacity(self.values.len());
        for x in 0..self.width {
            for y in 0..self.height {
                values.push(self.at(x, y));
            }
        }
        GrayGrid {
            width: self.height,
            height: self.width,
            values,
        }
    }
}

/// Rec. 601 luma, left unrounded.
pub fn to_grayscale(frame: &RoiFrame) -> GrayGrid {
    // Integer numerator keeps white at exactly 255.0.
    let values = frame
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            (299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b)) as f64 / 1000.0
        })
        .collect();
    GrayGrid {
        width: frame.width,
        height: frame.height,
        values,
    }
}

/// Corner-aligned bilinear resampling: output corners sample input corners.
pub fn resample_bilinear(g: &GrayGrid, out_w: usize, out_h: usize) -> Result<GrayGrid> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidParameter(format!(
            "output size must be positive, got {out_w}x{out_h}"
        )));
    }
    if out_w == g.width && out_h == g.height {
        return Ok(g.clone());
    }
    let xs = sample_positions(g.width, out_w);
    let ys = sample_positions(g.height, out_h);
    let mut values = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let top = lerp(g.at(x0, y0), g.at(x1, y0), tx);
            let bottom = lerp(g.at(x0, y1), g.at(x1, y1), tx);
            values.push(lerp(top, bottom, ty));
        }
    }
    Ok(GrayGrid {
        width: out_w,
        height: out_h,
        values,
    })
}

fn sample_positions(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    (0..out_len)
        .map(|j| {
            if out_len == 1 || in_len == 1 {
                return (0, 0, 0.0);
            }
            let pos = (j * (in_len - 1)) as f64 / (out_len - 1) as f64;
            let i0 = (pos.floor() as usize).min(in_len - 1);
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}

/// `a + t (b - a)`, clamped to the segment so the result never leaves [a, b].
#[inline]
pub(crate) fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if a == b {
        return a;
    }
    let v = a + t * (b - a);
    v.clamp(a.min(b), a.max(b))
}
