use super::GrayGrid;

/// 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    counts: [u64; 256],
    total: u64,
}

impl Histogram256 {
    /// Builds a histogram from raw counts; the total is their sum.
    pub fn from_counts(counts: [u64; 256]) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Bins by rounding each intensity to the nearest integer, clamped to 0..=255.
pub fn intensity_histogram(g: &GrayGrid) -> Histogram256 {
    let mut counts = [0u64; 256];
    for &v in g.values() {
        counts[v.round().clamp(0.0, 255.0) as usize] += 1;
    }
    Histogram256::from_counts(counts)
}
