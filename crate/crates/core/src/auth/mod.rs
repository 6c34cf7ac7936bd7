//! Enrollment, threshold calibration, thresholded verification with try
//! counting and blocking, and error-rate computation.

mod store;

pub use store::{SpeakerLock, Store};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::WordSignature;
use crate::matching::{
    apply_normalization, fit_normalization, nearest_distance, NormalizationMap, NormalizedSignature,
};

pub const DEFAULT_MAX_TRIES: u32 = 3;

/// Number of thresholds in the calibration sweep.
pub const SWEEP_STEPS: usize = 90;

/// Thresholds 1.0, 1.1, ..., 9.9.
pub fn sweep_thresholds() -> impl Iterator<Item = f64> {
    (0..SWEEP_STEPS).map(|i| (10 + i) as f64 / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Granted,
    Denied,
    Blocked,
}

/// Result of one verification attempt. `distance` is `None` when the record
/// was already blocked and no comparison took place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attempt {
    pub outcome: Outcome,
    pub distance: Option<f64>,
}

/// FRR, FAR and their mean. Rates are fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTriple {
    frr: f64,
    far: f64,
    aer: f64,
}

impl RateTriple {
    pub fn new(frr: f64, far: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&frr) || !(0.0..=1.0).contains(&far) {
            return Err(Error::InvalidParameter(format!(
                "rates must lie in [0, 1] (frr {frr}, far {far})"
            )));
        }
        Ok(Self {
            frr,
            far,
            aer: (frr + far) / 2.0,
        })
    }

    pub fn frr(&self) -> f64 {
        self.frr
    }

    pub fn far(&self) -> f64 {
        self.far
    }

    pub fn aer(&self) -> f64 {
        self.aer
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub frr: f64,
    pub far: f64,
}

/// FRR/FAR at each swept threshold, in increasing threshold order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCurve {
    pub points: Vec<CurvePoint>,
}

impl ThresholdCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,frr,far\n");
        for p in &self.points {
            out.push_str(&format!("{:.1},{:.6},{:.6}\n", p.threshold, p.frr, p.far));
        }
        out
    }
}

/// Sweeps the fixed threshold grid over precomputed nearest distances and
/// returns the threshold minimizing FRR + FAR (smallest on ties).
///
/// A client probe is rejected when its distance is `>= T`; an impostor probe
/// is accepted when its distance is `< T`.
pub fn calibrate_from_distances(client: &[f64], impostor: &[f64]) -> Result<(f64, ThresholdCurve)> {
    if client.is_empty() {
        return Err(Error::Empty("no client probes for calibration"));
    }
    if impostor.is_empty() {
        return Err(Error::Empty("no impostor probes for calibration"));
    }
    let (nc, ni) = (client.len() as u64, impostor.len() as u64);
    let mut points = Vec::with_capacity(SWEEP_STEPS);
    let mut best: Option<(u64, f64)> = None;
    for threshold in sweep_thresholds() {
        let rejected = client.iter().filter(|&&d| d >= threshold).count() as u64;
        let accepted = impostor.iter().filter(|&&d| d < threshold).count() as u64;
        // FRR + FAR scaled by nc * ni, compared exactly.
        let cost = rejected * ni + accepted * nc;
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, threshold));
        }
        points.push(CurvePoint {
            threshold,
            frr: rejected as f64 / nc as f64,
            far: accepted as f64 / ni as f64,
        });
    }
    let (_, threshold) = best.expect("sweep is non-empty");
    Ok((threshold, ThresholdCurve { points }))
}

/// FRR over client decisions (anything but a grant is a rejection) and FAR
/// over impostor decisions.
pub fn compute_rates(client: &[Outcome], impostor: &[Outcome]) -> Result<RateTriple> {
    if client.is_empty() || impostor.is_empty() {
        return Err(Error::Empty(
            "rate computation needs both client and impostor decisions",
        ));
    }
    let rejected = client.iter().filter(|&&o| o != Outcome::Granted).count();
    let accepted = impostor.iter().filter(|&&o| o == Outcome::Granted).count();
    RateTriple::new(
        rejected as f64 / client.len() as f64,
        accepted as f64 / impostor.len() as f64,
    )
}

/// A client's stored visual password and verification state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentRecord {
    speaker_id: String,
    password_labels: Vec<String>,
    enrolled: Vec<WordSignature>,
    normalized: Vec<NormalizedSignature>,
    norm_map: NormalizationMap,
    threshold: Option<f64>,
    tries_used: u32,
    max_tries: u32,
    blocked: bool,
}

/// Distinct word labels in first-seen order.
fn distinct_labels(signatures: &[WordSignature]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for s in signatures {
        if !labels.contains(&s.labels.word) {
            labels.push(s.labels.word.clone());
        }
    }
    labels
}

pub fn enroll(
    speaker_id: &str,
    signatures: Vec<WordSignature>,
    max_tries: u32,
) -> Result<EnrollmentRecord> {
    if signatures.is_empty() {
        return Err(Error::Empty("enrollment needs at least one signature"));
    }
    if max_tries == 0 {
        return Err(Error::InvalidParameter(
            "max_tries must be at least 1".into(),
        ));
    }
    let norm_map = fit_normalization(&signatures)?;
    let normalized = signatures
        .iter()
        .map(|s| apply_normalization(s, &norm_map))
        .collect();
    Ok(EnrollmentRecord {
        speaker_id: speaker_id.to_string(),
        password_labels: distinct_labels(&signatures),
        enrolled: signatures,
        normalized,
        norm_map,
        threshold: None,
        tries_used: 0,
        max_tries,
        blocked: false,
    })
}

impl EnrollmentRecord {
    /// Reassembles a record from stored state. The normalization map is taken
    /// as stored, not refitted.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        speaker_id: String,
        password_labels: Vec<String>,
        enrolled: Vec<WordSignature>,
        norm_map: NormalizationMap,
        threshold: Option<f64>,
        tries_used: u32,
        max_tries: u32,
        blocked: bool,
    ) -> Result<Self> {
        if enrolled.is_empty() {
            return Err(Error::Empty("record has no enrolled signatures"));
        }
        if max_tries == 0 || tries_used > max_tries {
            return Err(Error::InvalidParameter(format!(
                "tries_used {tries_used} / max_tries {max_tries} is inconsistent"
            )));
        }
        if threshold.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
            return Err(Error::InvalidParameter("threshold must be positive".into()));
        }
        let normalized = enrolled
            .iter()
            .map(|s| apply_normalization(s, &norm_map))
            .collect();
        Ok(Self {
            speaker_id,
            password_labels,
            enrolled,
            normalized,
            norm_map,
            threshold,
            tries_used,
            max_tries,
            blocked,
        })
    }

    pub fn speaker_id(&self) -> &str {
        &self.speaker_id
    }

    pub fn password_labels(&self) -> &[String] {
        &self.password_labels
    }

    pub fn enrolled(&self) -> &[WordSignature] {
        &self.enrolled
    }

    pub fn normalized(&self) -> &[NormalizedSignature] {
        &self.normalized
    }

    pub fn norm_map(&self) -> &NormalizationMap {
        &self.norm_map
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::InvalidParameter("threshold must be positive".into()));
        }
        self.threshold = Some(threshold);
        Ok(())
    }

    pub fn tries_used(&self) -> u32 {
        self.tries_used
    }

    pub fn max_tries(&self) -> u32 {
        self.max_tries
    }

    pub fn is_blocked(&self) -> bool {
        self.blocked
    }

    /// Administrative unblock.
    pub fn reset(&mut self) {
        self.tries_used = 0;
        self.blocked = false;
    }

    /// Nearest-neighbour distance of a raw probe to the enrolled password,
    /// measured in this record's normalized space.
    pub fn score(&self, probe: &WordSignature) -> f64 {
        let p = apply_normalization(probe, &self.norm_map);
        nearest_distance(&p, &self.normalized).expect("records are never empty")
    }

    /// Scores already-normalized probes against the enrolled set.
    pub fn score_normalized(&self, probes: &[NormalizedSignature], exec: Execution) -> Vec<f64> {
        exec.map(probes, |p| {
            nearest_distance(p, &self.normalized).expect("records are never empty")
        })
    }
}

/// Calibrates and stores the record's threshold from client and impostor probes.
pub fn calibrate_threshold(
    record: &mut EnrollmentRecord,
    client_probes: &[WordSignature],
    impostor_probes: &[WordSignature],
    exec: Execution,
) -> Result<(f64, ThresholdCurve)> {
    if client_probes.is_empty() || impostor_probes.is_empty() {
        return Err(Error::Empty("calibration needs client and impostor probes"));
    }
    let client = exec.map(client_probes, |p| record.score(p));
    let impostor = exec.map(impostor_probes, |p| record.score(p));
    let (threshold, curve) = calibrate_from_distances(&client, &impostor)?;
    record.set_threshold(threshold)?;
    Ok((threshold, curve))
}

/// One verification attempt. Grants when the nearest distance is strictly
/// below the threshold; consecutive failures block the record once
/// `max_tries` is reached.
pub fn verify_attempt(record: &mut EnrollmentRecord, probe: &WordSignature) -> Result<Attempt> {
    let threshold = record
        .threshold
        .ok_or_else(|| Error::Uncalibrated(record.speaker_id.clone()))?;
    if record.blocked {
        return Ok(Attempt {
            outcome: Outcome::Blocked,
            distance: None,
        });
    }
    let d = record.score(probe);
    let outcome = if d < threshold {
        record.tries_used = 0;
        Outcome::Granted
    } else {
        record.tries_used += 1;
        if record.tries_used >= record.max_tries {
            record.blocked = true;
            Outcome::Blocked
        } else {
            Outcome::Denied
        }
    };
    Ok(Attempt {
        outcome,
        distance: Some(d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FrameFeatures, SignatureLabels};
    use proptest::prelude::*;

    fn sig(word: &str, base: f64, len: usize) -> WordSignature {
        let rows = (0..len)
            .map(|i| FrameFeatures {
                h: 20 + (base * 4.0) as u32 + (i % 3) as u32,
                w: 50 + i as u32 % 2,
                m: base + 0.1 * i as f64,
                q: 0.9 - 0.01 * i as f64,
                r: 1.0 + base,
                er: 1.0 + 0.05 * i as f64,
                rc: (0.2 + 0.1 * base).min(1.0),
                t: (base * 10.0) as u64 + i as u64,
                chi: 0.05 * i as f64,
            })
            .collect();
        WordSignature::new(rows, SignatureLabels::new(word, "S01", "1")).unwrap()
    }

    fn far_probe() -> WordSignature {
        sig("zero", 9.0, 6)
    }

    fn calibrated(max_tries: u32) -> EnrollmentRecord {
        let mut r = enroll(
            "S01",
            vec![sig("zero", 0.0, 5), sig("zero", 0.5, 6)],
            max_tries,
        )
        .unwrap();
        r.set_threshold(1.0).unwrap();
        r
    }

    #[test]
    fn sweep_grid() {
        let t: Vec<f64> = sweep_thresholds().collect();
        assert_eq!(t.len(), 90);
        assert_eq!((t[0], t[2], t[89]), (1.0, 1.2, 9.9));
    }

    #[test]
    fn calibration_separated_populations() {
        let (t, curve) = calibrate_from_distances(&[1.15; 5], &[5.0; 95]).unwrap();
        assert_eq!(t, 1.2);
        let p = curve.points[2];
        assert_eq!((p.frr, p.far), (0.0, 0.0));
        assert_eq!(curve.points[1].frr, 1.0);
    }

    #[test]
    fn calibration_indistinguishable_populations() {
        let d = [0.5, 1.3, 2.2, 4.4, 7.0];
        let (t, curve) = calibrate_from_distances(&d, &d).unwrap();
        assert_eq!(t, 1.0);
        for p in &curve.points {
            assert!((p.frr + p.far - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_rejects_empty() {
        assert!(calibrate_from_distances(&[], &[1.0]).is_err());
        assert!(calibrate_from_distances(&[1.0], &[]).is_err());
    }

    #[test]
    fn curve_csv_has_one_row_per_threshold() {
        let (_, curve) = calibrate_from_distances(&[1.15], &[5.0]).unwrap();
        let csv = curve.to_csv();
        assert_eq!(csv.lines().count(), 91);
        assert_eq!(csv.lines().nth(3).unwrap(), "1.2,0.000000,0.000000");
    }

    #[test]
    fn rates_from_table_rows() {
        let r = RateTriple::new(0.20, 0.0753).unwrap();
        assert!((r.aer() * 100.0 - 13.765).abs() < 1e-9);
        let r = RateTriple::new(0.15, 0.2803).unwrap();
        assert!((r.aer() * 100.0 - 21.515).abs() < 1e-9);
        assert!(RateTriple::new(1.5, 0.0).is_err());
    }

    #[test]
    fn rates_from_decisions() {
        use Outcome::*;
        let r = compute_rates(&[Granted; 4], &[Denied, Blocked, Denied]).unwrap();
        assert_eq!((r.frr(), r.far(), r.aer()), (0.0, 0.0, 0.0));
        let client = [Granted, Granted, Denied, Granted, Blocked];
        let mut impostor = vec![Denied; 93];
        impostor[..7].fill(Granted);
        let r = compute_rates(&client, &impostor).unwrap();
        assert_eq!(r.frr(), 0.4);
        assert_eq!(r.far(), 7.0 / 93.0);
        assert!(compute_rates(&[], &impostor).is_err());
    }

    #[test]
    fn enroll_counts_and_labels() {
        let sigs: Vec<_> = (0..5).map(|i| sig("zero", i as f64 * 0.1, 30)).collect();
        let r = enroll("S03", sigs, DEFAULT_MAX_TRIES).unwrap();
        assert_eq!(r.enrolled().len(), 5);
        assert_eq!(r.password_labels(), ["zero"]);
        assert_eq!(r.threshold(), None);
        assert!(!r.is_blocked());
        assert!(enroll("S03", vec![], 3).is_err());
        assert!(enroll("S03", vec![sig("zero", 0.0, 3)], 0).is_err());
    }

    #[test]
    fn verify_requires_calibration() {
        let mut r = enroll("S01", vec![sig("zero", 0.0, 5)], 3).unwrap();
        assert!(matches!(
            verify_attempt(&mut r, &sig("zero", 0.0, 5)),
            Err(Error::Uncalibrated(_))
        ));
    }

    #[test]
    fn enrolled_probe_is_granted() {
        let mut r = calibrated(3);
        let a = verify_attempt(&mut r, &sig("zero", 0.5, 6)).unwrap();
        assert_eq!(a.outcome, Outcome::Granted);
        assert_eq!(a.distance, Some(0.0));
    }

    #[test]
    fn three_failures_block() {
        let mut r = calibrated(3);
        let outcomes: Vec<_> = (0..4)
            .map(|_| verify_attempt(&mut r, &far_probe()).unwrap().outcome)
            .collect();
        assert_eq!(
            outcomes,
            [
                Outcome::Denied,
                Outcome::Denied,
                Outcome::Blocked,
                Outcome::Blocked
            ]
        );
        // Blocked is absorbing, even for the genuine password.
        let a = verify_attempt(&mut r, &sig("zero", 0.0, 5)).unwrap();
        assert_eq!(a.outcome, Outcome::Blocked);
        assert_eq!(a.distance, None);
        r.reset();
        assert_eq!(
            verify_attempt(&mut r, &sig("zero", 0.0, 5))
                .unwrap()
                .outcome,
            Outcome::Granted
        );
    }

    #[test]
    fn single_try_blocks_immediately() {
        let mut r = calibrated(1);
        assert_eq!(
            verify_attempt(&mut r, &far_probe()).unwrap().outcome,
            Outcome::Blocked
        );
    }

    #[test]
    fn success_resets_tries() {
        let mut r = calibrated(3);
        verify_attempt(&mut r, &far_probe()).unwrap();
        assert_eq!(r.tries_used(), 1);
        verify_attempt(&mut r, &sig("zero", 0.0, 5)).unwrap();
        assert_eq!(r.tries_used(), 0);
    }

    #[test]
    fn boundary_distance_is_denied() {
        let mut r = enroll("S01", vec![sig("zero", 0.0, 5), sig("zero", 0.5, 6)], 3).unwrap();
        let probe = sig("zero", 0.2, 5);
        let d = r.score(&probe);
        r.set_threshold(d).unwrap();
        assert_eq!(
            verify_attempt(&mut r, &probe).unwrap().outcome,
            Outcome::Denied
        );
    }

    #[test]
    fn calibrate_sets_threshold() {
        let mut r = enroll("S01", vec![sig("zero", 0.0, 5), sig("zero", 0.5, 6)], 3).unwrap();
        let (t, curve) = calibrate_threshold(
            &mut r,
            &[sig("zero", 0.1, 5), sig("zero", 0.4, 6)],
            &[far_probe(), sig("zero", 7.0, 8)],
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(r.threshold(), Some(t));
        assert_eq!(curve.points.len(), SWEEP_STEPS);
        assert!(calibrate_threshold(&mut r, &[], &[far_probe()], Execution::Sequential).is_err());
    }

    proptest! {
        #[test]
        fn sweep_is_monotone_and_optimal(
            client in proptest::collection::vec(0.0f64..12.0, 1..40),
            impostor in proptest::collection::vec(0.0f64..12.0, 1..120),
        ) {
            let (t, curve) = calibrate_from_distances(&client, &impostor).unwrap();
            for w in curve.points.windows(2) {
                prop_assert!(w[0].threshold < w[1].threshold);
                prop_assert!(w[1].frr <= w[0].frr);
                prop_assert!(w[1].far >= w[0].far);
            }
            let best = curve.points.iter().find(|p| p.threshold == t).unwrap();
            for p in &curve.points {
                prop_assert!(best.frr + best.far <= p.frr + p.far + 1e-12);
            }
        }

        #[test]
        fn aer_identity(frr in 0.0f64..=1.0, far in 0.0f64..=1.0) {
            let r = RateTriple::new(frr, far).unwrap();
            prop_assert_eq!(r.aer(), (frr + far) / 2.0);
        }
    }
}
