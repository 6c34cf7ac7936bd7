//! Single-level 2-D Haar DWT and Sobel edge-response sums.

use crate::error::{Error, Result};
use crate::numeric::fsum;
use crate::roi::GrayGrid;

/// Sub-bands of a single-level orthonormal Haar transform.
///
/// Naming follows the usual image convention: HL holds vertical detail
/// (horizontal differences), LH holds horizontal detail (vertical differences).
#[derive(Debug, Clone, PartialEq)]
pub struct DwtDecomposition {
    width: usize,
    height: usize,
    pub ll: Vec<f64>,
    pub lh: Vec<f64>,
    pub hl: Vec<f64>,
    pub hh: Vec<f64>,
}

impl DwtDecomposition {
    /// Assembles a decomposition from four equally sized sub-bands.
    pub fn from_bands(
        width: usize,
        height: usize,
        ll: Vec<f64>,
        lh: Vec<f64>,
        hl: Vec<f64>,
        hh: Vec<f64>,
    ) -> Result<Self> {
        let n = width * height;
        if [ll.len(), lh.len(), hl.len(), hh.len()]
            .iter()
            .any(|&len| len != n)
        {
            return Err(Error::SizeMismatch(format!(
                "every sub-band must hold {width}x{height} coefficients"
            )));
        }
        Ok(Self {
            width,
            height,
            ll,
            lh,
            hl,
            hh,
        })
    }

    /// Sub-band width.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Sub-band height.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Total number of coefficients across all four sub-bands.
    pub fn len(&self) -> usize {
        4 * self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All coefficients, flattened in the fixed order LL, LH, HL, HH.
    pub fn coefficients(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.ll
            .iter()
            .chain(&self.lh)
            .chain(&self.hl)
            .chain(&self.hh)
            .copied()
    }

    pub fn energy(&self) -> f64 {
        self.coefficients().map(|c| c * c).sum()
    }
}

pub fn haar_dwt2(g: &GrayGrid) -> Result<DwtDecomposition> {
    let (w, h) = (g.width(), g.height());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::OddDimension {
            width: w,
            height: h,
        });
    }
    let (bw, bh) = (w / 2, h / 2);
    let n = bw * bh;
    let (mut ll, mut lh, mut hl, mut hh) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for by in 0..bh {
        for bx in 0..bw {
            let (x, y) = (2 * bx, 2 * by);
            let a = g.at(x, y);
            let b = g.at(x + 1, y);
            let c = g.at(x, y + 1);
            let d = g.at(x + 1, y + 1);
            ll.push((a + b + c + d) / 2.0);
            hl.push((a - b + c - d) / 2.0);
            lh.push((a + b - c - d) / 2.0);
            hh.push((a - b - c + d) / 2.0);
        }
    }
    Ok(DwtDecomposition {
        width: bw,
        height: bh,
        ll,
        lh,
        hl,
        hh,
    })
}

/// Aggregate absolute Sobel responses over the valid (interior) region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobelResponse {
    /// Σ |g ⊛ S_v|, where S_v = [[-1,0,1],[-2,0,2],[-1,0,1]] responds to vertical edges.
    pub vertical_sum: f64,
    /// Σ |g ⊛ S_h|, with S_h the transpose of S_v.
    pub horizontal_sum: f64,
}

pub fn sobel_response(g: &GrayGrid) -> Result<SobelResponse> {
    let (w, h) = (g.width(), g.height());
    if w < 3 || h < 3 {
        return Err(Error::RoiTooSmall {
            width: w,
            height: h,
        });
    }
    let mut vertical = Vec::with_capacity((w - 2) * (h - 2));
    let mut horizontal = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            // Term order is mirrored between the two kernels so that
            // transposing the grid swaps the sums bit for bit.
            let v = (g.at(x + 1, y - 1) - g.at(x - 1, y - 1))
                + 2.0 * (g.at(x + 1, y) - g.at(x - 1, y))
                + (g.at(x + 1, y + 1) - g.at(x - 1, y + 1));
            let hz = (g.at(x - 1, y + 1) - g.at(x - 1, y - 1))
                + 2.0 * (g.at(x, y + 1) - g.at(x, y - 1))
                + (g.at(x + 1, y + 1) - g.at(x + 1, y - 1));
            vertical.push(v.abs());
            horizontal.push(hz.abs());
        }
    }
    Ok(SobelResponse {
        vertical_sum: fsum(vertical),
        horizontal_sum: fsum(horizontal),
    })
}
