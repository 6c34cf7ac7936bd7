//! Signature comparison: per-channel min-max normalization, linear temporal
//! stretching, mean per-frame Euclidean distance, and nearest-neighbour search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{SignatureLabels, WordSignature, CHANNELS};
use crate::roi::lerp;

pub type Row = [f64; CHANNELS];

/// Per-channel min/max fitted on a client's enrollment signatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationMap {
    pub min: Row,
    pub max: Row,
}

impl NormalizationMap {
    pub fn new(min: Row, max: Row) -> Result<Self> {
        if min
            .iter()
            .zip(&max)
            .any(|(lo, hi)| lo.partial_cmp(hi).is_none_or(|o| o.is_gt()))
        {
            return Err(Error::InvalidParameter(
                "normalization min must not exceed max".into(),
            ));
        }
        Ok(Self { min, max })
    }

    fn apply_row(&self, row: &Row) -> Row {
        let mut out = [0.0; CHANNELS];
        for c in 0..CHANNELS {
            let (lo, hi) = (self.min[c], self.max[c]);
            out[c] = if lo == hi {
                0.5
            } else {
                (row[c] - lo) / (hi - lo)
            };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSignature {
    rows: Vec<Row>,
    pub labels: SignatureLabels,
}

impl NormalizedSignature {
    pub fn new(rows: Vec<Row>, labels: SignatureLabels) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("signature has no rows"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite signature value".into()));
        }
        Ok(Self { rows, labels })
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &NormalizedSignature) -> NormalizedSignature {
        let mut rows = Vec::with_capacity(self.len() + other.len());
        rows.extend_from_slice(&self.rows);
        rows.extend_from_slice(&other.rows);
        NormalizedSignature {
            rows,
            labels: concat_labels(&self.labels, &other.labels),
        }
    }
}

fn concat_labels(a: &SignatureLabels, b: &SignatureLabels) -> SignatureLabels {
    SignatureLabels {
        word: format!("{}+{}", a.word, b.word),
        ..a.clone()
    }
}

pub fn fit_normalization<'a>(
    signatures: impl IntoIterator<Item = &'a WordSignature>,
) -> Result<NormalizationMap> {
    let mut min = [f64::INFINITY; CHANNELS];
    let mut max = [f64::NEG_INFINITY; CHANNELS];
    let mut any = false;
    for sig in signatures {
        any = true;
        for row in sig.rows() {
            for (c, v) in row.to_row().into_iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
    }
    if !any {
        return Err(Error::Empty("no signatures to fit normalization on"));
    }
    Ok(NormalizationMap { min, max })
}

/// Maps each channel to `(v - min) / (max - min)`; constant channels map to
/// 0.5. Values outside the fitted range are not clamped.
pub fn apply_normalization(s: &WordSignature, map: &NormalizationMap) -> NormalizedSignature {
    NormalizedSignature {
        rows: s
            .rows()
            .iter()
            .map(|r| map.apply_row(&r.to_row()))
            .collect(),
        labels: s.labels.clone(),
    }
}

/// Source position of output row `j` when stretching `len` rows to `target`.
#[inline]
fn stretch_source(j: usize, len: usize, target: usize) -> (usize, usize, f64) {
    if len == 1 || target == 1 {
        return (0, 0, 0.0);
    }
    let pos = (j * (len - 1)) as f64 / (target - 1) as f64;
    let i0 = (pos.floor() as usize).min(len - 1);
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, pos - i0 as f64)
}

#[inline]
fn stretched_row(rows: &[Row], j: usize, target: usize) -> Row {
    let (i0, i1, t) = stretch_source(j, rows.len(), target);
    if t == 0.0 {
        return rows[i0];
    }
    let (a, b) = (&rows[i0], &rows[i1]);
    let mut out = [0.0; CHANNELS];
    for c in 0..CHANNELS {
        out[c] = lerp(a[c], b[c], t);
    }
    out
}

/// Linearly stretches every channel to `target_len` rows; endpoints are kept.
pub fn interpolate_rows(s: &NormalizedSignature, target_len: usize) -> Result<NormalizedSignature> {
    if target_len < s.len() {
        return Err(Error::ShrinkNotSupported {
            len: s.len(),
            target: target_len,
        });
    }
    let rows = (0..target_len)
        .map(|j| stretched_row(&s.rows, j, target_len))
        .collect();
    Ok(NormalizedSignature {
        rows,
        labels: s.labels.clone(),
    })
}

#[inline]
fn row_distance(a: &Row, b: &Row) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean per-frame Euclidean distance after stretching the shorter signature
/// to the longer one's length.
pub fn signature_distance(a: &NormalizedSignature, b: &NormalizedSignature) -> f64 {
    bounded_distance(a, b, f64::INFINITY).expect("unbounded distance always completes")
}

/// [`signature_distance`] that gives up with `None` once the distance is
/// known to be at least `bound`. Per-frame terms are non-negative, so the
/// running total never decreases and a completed result is bit-identical to
/// the unbounded one.
fn bounded_distance(a: &NormalizedSignature, b: &NormalizedSignature, bound: f64) -> Option<f64> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let n = long.len();
    let limit = bound * n as f64;
    let mut total = 0.0;
    for j in 0..n {
        let d = if short.len() == n {
            row_distance(&long.rows[j], &short.rows[j])
        } else {
            row_distance(&long.rows[j], &stretched_row(&short.rows, j, n))
        };
        total += d;
        if total >= limit && total / n as f64 >= bound {
            return None;
        }
    }
    Some(total / n as f64)
}

/// Rows of `a` then rows of `b`; the word label becomes `a+b`.
pub fn concat_signatures(a: &WordSignature, b: &WordSignature) -> WordSignature {
    let mut rows = Vec::with_capacity(a.len() + b.len());
    rows.extend_from_slice(a.rows());
    rows.extend_from_slice(b.rows());
    WordSignature::new(rows, concat_labels(&a.labels, &b.labels))
        .expect("concatenation of valid signatures is valid")
}

/// Smallest distance from `probe` to any enrolled signature.
pub fn nearest_distance(
    probe: &NormalizedSignature,
    enrolled: &[NormalizedSignature],
) -> Result<f64> {
    if enrolled.is_empty() {
        return Err(Error::Empty("enrolled set is empty"));
    }
    let mut best = f64::INFINITY;
    for e in enrolled {
        if let Some(d) = bounded_distance(probe, e, best) {
            best = best.min(d);
        }
    }
    Ok(best)
}
