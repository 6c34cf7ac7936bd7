//! Per-frame visual features and word signatures.
//!
//! Each frame yields nine measurements: crop height and width, mutual
//! information and quality index against the previous frame (both in the
//! Haar domain), the vertical/horizontal detail ratio, the Sobel edge ratio,
//! the red fraction, the teeth pixel count, and a chi-square distance of the
//! intensity histogram against the word's first (silent) frame.

mod signature;

pub use signature::{
    parse_signature_csv, read_signature_csv, signature_to_csv, write_signature_csv, Condition,
    FrameFeatures, SignatureLabels, WordSignature, CHANNELS, CHANNEL_NAMES,
};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numeric::fsum;
use crate::roi::{
    intensity_histogram, resample_bilinear, srgb_to_lab, srgb_to_luv, to_grayscale, GrayGrid,
    Histogram256, LabGrid, LuvGrid, RoiFrame,
};
use crate::transforms::{haar_dwt2, sobel_response, DwtDecomposition};

/// Side of the square grid every ROI is resampled to before DWT and Sobel.
pub const CANONICAL_SIZE: usize = 64;

/// Number of equal-width bins used to quantize wavelet coefficients for MI.
pub const MI_BINS: usize = 32;

/// Minimum red-channel lead over green and blue for a pixel to count as red.
pub const RED_MARGIN: u8 = 20;

/// Standard deviations at or below this are treated as zero by the teeth test.
const DEGENERATE_SIGMA: f64 = 1e-9;

fn check_same_len(cur: &DwtDecomposition, prev: &DwtDecomposition) -> Result<()> {
    if cur.len() != prev.len() {
        return Err(Error::SizeMismatch(format!(
            "coefficient counts differ ({} vs {})",
            cur.len(),
            prev.len()
        )));
    }
    Ok(())
}

/// Bin index of `v` among [`MI_BINS`] equal-width bins over `[lo, hi]`.
#[inline]
fn mi_bin(v: f64, lo: f64, hi: f64) -> usize {
    let b = ((v - lo) / (hi - lo) * MI_BINS as f64).floor() as usize;
    b.min(MI_BINS - 1)
}

/// Histogram estimate of the mutual information, in bits, between the
/// coefficients of two decompositions paired by position.
pub fn mutual_information(cur: &DwtDecomposition, prev: &DwtDecomposition) -> Result<f64> {
    check_same_len(cur, prev)?;
    let (lo, hi) = cur
        .coefficients()
        .chain(prev.coefficients())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi || cur.is_empty() {
        return Ok(0.0);
    }

    let mut joint = [[0u64; MI_BINS]; MI_BINS];
    let mut cur_marginal = [0u64; MI_BINS];
    let mut prev_marginal = [0u64; MI_BINS];
    for (c, p) in cur.coefficients().zip(prev.coefficients()) {
        let (bc, bp) = (mi_bin(c, lo, hi), mi_bin(p, lo, hi));
        joint[bc][bp] += 1;
        cur_marginal[bc] += 1;
        prev_marginal[bp] += 1;
    }

    let n = cur.len() as f64;
    let mut terms = Vec::new();
    for (bc, row) in joint.iter().enumerate() {
        for (bp, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let pxy = count as f64 / n;
            let px = cur_marginal[bc] as f64 / n;
            let py = prev_marginal[bp] as f64 / n;
            terms.push(pxy * (pxy / (px * py)).log2());
        }
    }
    Ok(fsum(terms).max(0.0))
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    var_x: f64,
    var_y: f64,
    cov: f64,
}

fn moments(x: &[f64], y: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut var_x, mut var_y, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mean_x, b - mean_y);
        var_x += dx * dx;
        var_y += dy * dy;
        cov += dx * dy;
    }
    Moments {
        mean_x,
        mean_y,
        var_x: var_x / n,
        var_y: var_y / n,
        cov: cov / n,
    }
}

/// Universal quality index of `cur` with reference to `prev`, computed over
/// all four sub-bands. Degenerate denominators yield 1 for identical
/// coefficient sets and 0 otherwise.
pub fn quality_index(cur: &DwtDecomposition, prev: &DwtDecomposition) -> Result<f64> {
    check_same_len(cur, prev)?;
    let x: Vec<f64> = prev.coefficients().collect();
    let y: Vec<f64> = cur.coefficients().collect();
    if x.is_empty() {
        return Ok(1.0);
    }
    let m = moments(&x, &y);
    let denom = (m.var_x + m.var_y) * (m.mean_x * m.mean_x + m.mean_y * m.mean_y);
    if denom == 0.0 {
        return Ok(if x == y { 1.0 } else { 0.0 });
    }
    let q = 4.0 * m.cov * m.mean_x * m.mean_y / denom;
    Ok(q.clamp(-1.0, 1.0))
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Coefficients lying outside `median ± σ` of their band.
fn detail_count(band: &[f64]) -> usize {
    if band.is_empty() {
        return 0;
    }
    let (med, sigma) = (median(band), population_std(band));
    let (lo, hi) = (med - sigma, med + sigma);
    band.iter().filter(|&&v| v < lo || v > hi).count()
}

/// Ratio of vertical (HL) to horizontal (LH) detail coefficients. A zero
/// horizontal count is replaced by 1.
pub fn vh_ratio(d: &DwtDecomposition) -> f64 {
    let v = detail_count(&d.hl);
    let h = detail_count(&d.lh);
    v as f64 / h.max(1) as f64
}

/// Vertical over horizontal Sobel energy. A zero denominator is replaced by 1.
pub fn edge_ratio(g: &GrayGrid) -> Result<f64> {
    let s = sobel_response(g)?;
    if s.horizontal_sum == 0.0 {
        Ok(s.vertical_sum)
    } else {
        Ok(s.vertical_sum / s.horizontal_sum)
    }
}

#[inline]
pub fn is_red([r, g, b]: [u8; 3]) -> bool {
    let lead = g.max(b);
    r > lead && r - lead >= RED_MARGIN
}

/// Fraction of ROI pixels classified as red.
pub fn red_amount(frame: &RoiFrame) -> f64 {
    let red = frame.pixels().iter().filter(|&&p| is_red(p)).count();
    red as f64 / frame.pixel_count() as f64
}

fn low_cut(values: impl ExactSizeIterator<Item = f64> + Clone) -> Option<f64> {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma = var.sqrt();
    (sigma > DEGENERATE_SIGMA).then_some(mean - sigma)
}

/// Number of teeth pixels: a* at least one σ below its ROI mean, or u*
/// likewise. A test whose σ is zero never fires.
pub fn teeth_amount(lab: &LabGrid, luv: &LuvGrid) -> Result<u64> {
    if (lab.width, lab.height) != (luv.width, luv.height) || lab.values.len() != luv.values.len() {
        return Err(Error::SizeMismatch(format!(
            "Lab grid is {}x{}, Luv grid is {}x{}",
            lab.width, lab.height, luv.width, luv.height
        )));
    }
    if lab.values.is_empty() {
        return Ok(0);
    }
    let a_cut = low_cut(lab.a_star());
    let u_cut = low_cut(luv.u_star());
    let count = lab
        .a_star()
        .zip(luv.u_star())
        .filter(|&(a, u)| a_cut.is_some_and(|c| a <= c) || u_cut.is_some_and(|c| u <= c))
        .count();
    Ok(count as u64)
}

/// Chi-square distance between intensity probabilities of the current frame
/// (observed) and the first frame (expected). Bins empty in the first frame
/// are skipped.
pub fn chi_square(cur: &Histogram256, first: &Histogram256) -> Result<f64> {
    if cur.total() == 0 || first.total() == 0 {
        return Err(Error::Empty("histogram with zero total"));
    }
    let (nc, nf) = (cur.total() as f64, first.total() as f64);
    let mut chi = 0.0;
    for (&o, &e) in cur.counts().iter().zip(first.counts()) {
        if e == 0 {
            continue;
        }
        let o = o as f64 / nc;
        let e = e as f64 / nf;
        chi += (o - e) * (o - e) / e;
    }
    Ok(chi)
}

/// Everything about one frame that neighbouring frames need.
struct FrameAnalysis {
    canonical: GrayGrid,
    dwt: DwtDecomposition,
    histogram: Histogram256,
}

fn analyze(frame: &RoiFrame) -> Result<FrameAnalysis> {
    let gray = to_grayscale(frame);
    let histogram = intensity_histogram(&gray);
    let canonical = resample_bilinear(&gray, CANONICAL_SIZE, CANONICAL_SIZE)?;
    let dwt = haar_dwt2(&canonical)?;
    Ok(FrameAnalysis {
        canonical,
        dwt,
        histogram,
    })
}

fn features_from(
    frame: &RoiFrame,
    cur: &FrameAnalysis,
    prev: &FrameAnalysis,
    first: &FrameAnalysis,
) -> Result<FrameFeatures> {
    let lab = srgb_to_lab(frame);
    let luv = srgb_to_luv(frame);
    Ok(FrameFeatures {
        h: frame.height() as u32,
        w: frame.width() as u32,
        m: mutual_information(&cur.dwt, &prev.dwt)?,
        q: quality_index(&cur.dwt, &prev.dwt)?,
        r: vh_ratio(&cur.dwt),
        er: edge_ratio(&cur.canonical)?,
        rc: red_amount(frame),
        t: teeth_amount(&lab, &luv)?,
        chi: chi_square(&cur.histogram, &first.histogram)?,
    })
}

/// Features of `frame`, with temporal features taken against `prev_frame`
/// and the histogram distance against `first_frame`. For the first frame of
/// a word pass the frame itself for both.
pub fn extract_frame_features(
    frame: &RoiFrame,
    prev_frame: &RoiFrame,
    first_frame: &RoiFrame,
) -> Result<FrameFeatures> {
    let cur = analyze(frame)?;
    let prev = if std::ptr::eq(frame, prev_frame) {
        None
    } else {
        Some(analyze(prev_frame)?)
    };
    let first = if std::ptr::eq(frame, first_frame) {
        None
    } else {
        Some(analyze(first_frame)?)
    };
    features_from(
        frame,
        &cur,
        prev.as_ref().unwrap_or(&cur),
        first.as_ref().unwrap_or(&cur),
    )
}

/// Extracts one feature row per frame, in temporal order.
pub fn extract_signature(
    frames: &[RoiFrame],
    labels: SignatureLabels,
    exec: Execution,
) -> Result<WordSignature> {
    if frames.is_empty() {
        return Err(Error::Empty("utterance has no frames"));
    }
    let analyses = exec.try_map(frames, analyze)?;
    let indices: Vec<usize> = (0..frames.len()).collect();
    let rows = exec.try_map(&indices, |&i| {
        let prev = &analyses[i.saturating_sub(1)];
        features_from(&frames[i], &analyses[i], prev, &analyses[0])
    })?;
    WordSignature::new(rows, labels)
}
