//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines are always printed; exits non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vispass_core::auth::{calibrate_from_distances, compute_rates, Outcome};
use vispass_core::eval::synth::{generate_corpus, render_utterance, SynthConfig};
use vispass_core::eval::{
    format_percent, report_csv, run_all_experiments, ExperimentKind, ExperimentReport, UtteranceKey,
};
use vispass_core::features::{
    chi_square, extract_signature, mutual_information, quality_index, Condition, SignatureLabels,
    MI_BINS,
};
use vispass_core::matching::{signature_distance, NormalizedSignature};
use vispass_core::numeric::fsum;
use vispass_core::roi::{intensity_histogram, GrayGrid, RoiFrame};
use vispass_core::transforms::{haar_dwt2, DwtDecomposition};
use vispass_core::Execution;

/// Percentage-point tolerance for the rate identity.
const RATE_TOL_PP: f64 = 0.005;
/// Binary representation slack: the paper's rounded decimals sit exactly on
/// the tolerance boundary.
const REPR_SLACK: f64 = 1e-9;
const QUALITY_TOL: f64 = 1e-9;
const ENERGY_REL_TOL: f64 = 1e-6;
const INVARIANT_CASES: usize = 200;
const ORACLE_CASES: usize = 100;
const SWEEP_CASES: usize = 100;
const RANK_CORRELATION_MIN: f64 = 0.9;
const EXTRACT_BUDGET: Duration = Duration::from_secs(1);
const SCALING_RANGE: (f64, f64) = (2.5, 6.0);
const EVALUATION_BUDGET: Duration = Duration::from_secs(300);

/// `overall_average` report lines for the default synthetic corpus (seed 42,
/// 20 speakers), derived by running the harness.
const PINNED_OVERALL: [(ExperimentKind, &str); 4] = [
    (
        ExperimentKind::SingleVPknown,
        "overall_average,,21.00,15.37,18.18",
    ),
    (
        ExperimentKind::SingleVPunknown,
        "overall_average,,21.00,8.58,14.79",
    ),
    (
        ExperimentKind::DoubleVPknown,
        "overall_average,,3.40,22.56,12.98",
    ),
    (
        ExperimentKind::DoubleVPunknown,
        "overall_average,,3.40,16.69,10.05",
    ),
];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x00ac_ce97 ^ tag)
}

fn random_grid(r: &mut impl Rng, w: usize, h: usize) -> GrayGrid {
    GrayGrid::new(
        w,
        h,
        (0..w * h).map(|_| r.random_range(0.0..=255.0)).collect(),
    )
    .unwrap()
}

fn random_bands(r: &mut impl Rng, w: usize, h: usize) -> DwtDecomposition {
    let mut band = || {
        (0..w * h)
            .map(|_| r.random_range(-300.0..300.0))
            .collect::<Vec<f64>>()
    };
    DwtDecomposition::from_bands(w, h, band(), band(), band(), band()).unwrap()
}

// --- criterion 1 --------------------------------------------------------

fn outcomes(granted: usize, total: usize) -> Vec<Outcome> {
    (0..total)
        .map(|i| {
            if i < granted {
                Outcome::Granted
            } else {
                Outcome::Denied
            }
        })
        .collect()
}

fn rate_identity() -> Check {
    // (FRR, FAR) -> AER in percent, from the paper's Table 1.
    let rows = [
        ((1, 5), (753, 10_000), 13.77),
        ((3, 20), (2_803, 10_000), 21.51),
    ];
    let mut seen = Vec::new();
    for ((rej, nc), (acc, ni), want) in rows {
        let rates = compute_rates(&outcomes(nc - rej, nc), &outcomes(acc, ni)).unwrap();
        let aer = rates.aer() * 100.0;
        ensure((aer - want).abs() <= RATE_TOL_PP + REPR_SLACK, || {
            format!("AER {aer} vs {want}")
        })?;
        seen.push(format!("{aer:.3}"));
    }
    Ok(format!(
        "AER {} (tolerance {RATE_TOL_PP} pp)",
        seen.join(", ")
    ))
}

// --- criterion 3a-c -----------------------------------------------------

fn feature_invariants() -> Check {
    let mut r = rng(1);
    for _ in 0..INVARIANT_CASES {
        let g = random_grid(&mut r, 64, 64);
        let d = haar_dwt2(&g).unwrap();
        let q = quality_index(&d, &d).unwrap();
        ensure((q - 1.0).abs() <= QUALITY_TOL, || format!("Q(x,x) = {q}"))?;
        let hist = intensity_histogram(&g);
        let chi = chi_square(&hist, &hist).unwrap();
        ensure(chi == 0.0, || format!("chi(x,x) = {chi}"))?;
        let energy_in = fsum(g.values().iter().map(|v| v * v));
        let energy_out = d.energy();
        let rel = (energy_in - energy_out).abs() / energy_in;
        ensure(rel <= ENERGY_REL_TOL, || {
            format!("energy relative error {rel}")
        })?;
    }
    for _ in 0..INVARIANT_CASES {
        let (a, b) = (random_bands(&mut r, 8, 8), random_bands(&mut r, 8, 8));
        let (ab, ba) = (
            mutual_information(&a, &b).unwrap(),
            mutual_information(&b, &a).unwrap(),
        );
        ensure(ab >= 0.0 && ab == ba, || {
            format!("M(a,b)={ab}, M(b,a)={ba}")
        })?;
    }
    for _ in 0..INVARIANT_CASES {
        let mut sig = || {
            let len = r.random_range(1..40);
            let rows = (0..len)
                .map(|_| std::array::from_fn(|_| r.random_range(-0.5..1.5)))
                .collect();
            NormalizedSignature::new(rows, SignatureLabels::default()).unwrap()
        };
        let (a, b) = (sig(), sig());
        let (ab, ba) = (signature_distance(&a, &b), signature_distance(&b, &a));
        ensure(ab >= 0.0 && ab == ba, || {
            format!("D(a,b)={ab}, D(b,a)={ba}")
        })?;
        ensure(signature_distance(&a, &a) == 0.0, || "D(a,a) != 0".into())?;
    }
    Ok(format!(
        "Q, chi, energy, M and distance invariants hold on {INVARIANT_CASES} cases each"
    ))
}

/// Brute-force mutual information: every bin pair counted by a full scan.
fn mi_oracle(a: &DwtDecomposition, b: &DwtDecomposition) -> f64 {
    let flat = |d: &DwtDecomposition| -> Vec<f64> {
        [&d.ll, &d.lh, &d.hl, &d.hh]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    };
    let (x, y) = (flat(a), flat(b));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in x.iter().chain(&y) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        return 0.0;
    }
    let bin = |v: f64| (((v - lo) / (hi - lo) * MI_BINS as f64).floor() as usize).min(MI_BINS - 1);
    let n = x.len() as f64;
    let mut terms = Vec::new();
    for i in 0..MI_BINS {
        let px = x.iter().filter(|&&v| bin(v) == i).count() as f64 / n;
        for j in 0..MI_BINS {
            let joint = (0..x.len())
                .filter(|&k| bin(x[k]) == i && bin(y[k]) == j)
                .count();
            if joint == 0 {
                continue;
            }
            let py = y.iter().filter(|&&v| bin(v) == j).count() as f64 / n;
            let pxy = joint as f64 / n;
            terms.push(pxy * (pxy / (px * py)).log2());
        }
    }
    fsum(terms).max(0.0)
}

/// Brute-force chi-square over rounded intensities.
fn chi_oracle(cur: &GrayGrid, first: &GrayGrid) -> f64 {
    let count = |g: &GrayGrid, level: f64| {
        g.values()
            .iter()
            .filter(|v| v.round().clamp(0.0, 255.0) == level)
            .count() as f64
    };
    let (nc, nf) = (cur.values().len() as f64, first.values().len() as f64);
    let mut chi = 0.0;
    for level in 0..256 {
        let e = count(first, f64::from(level));
        if e == 0.0 {
            continue;
        }
        let o = count(cur, f64::from(level)) / nc;
        let e = e / nf;
        chi += (o - e) * (o - e) / e;
    }
    chi
}

fn oracle_equivalence() -> Check {
    let mut r = rng(2);
    for case in 0..ORACLE_CASES {
        // Four 4x4 sub-bands: 8x8 coefficients.
        let (a, b) = (random_bands(&mut r, 4, 4), random_bands(&mut r, 4, 4));
        let got = mutual_information(&a, &b).unwrap();
        let want = mi_oracle(&a, &b);
        ensure(got == want, || {
            format!("case {case}: M {got} vs oracle {want}")
        })?;
    }
    for case in 0..ORACLE_CASES {
        // A narrow intensity range keeps the histograms overlapping.
        let levels = r.random_range(2.0..40.0);
        let base = r.random_range(0.0..200.0);
        let mut grid = || {
            GrayGrid::new(
                8,
                8,
                (0..64)
                    .map(|_| base + r.random_range(0.0..levels))
                    .collect(),
            )
            .unwrap()
        };
        let (cur, first) = (grid(), grid());
        let got = chi_square(&intensity_histogram(&cur), &intensity_histogram(&first)).unwrap();
        let want = chi_oracle(&cur, &first);
        ensure(got == want, || {
            format!("case {case}: chi {got} vs oracle {want}")
        })?;
    }
    Ok(format!(
        "M and chi bit-identical to brute force on {ORACLE_CASES} inputs each"
    ))
}

fn sweep_properties() -> Check {
    let mut r = rng(3);
    for case in 0..SWEEP_CASES {
        let nc = r.random_range(1..30);
        let ni = r.random_range(1..200);
        // Values near sweep steps exercise the D = T boundary.
        let mut draw = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..n)
                .map(|_| (r.random_range(lo..hi) * 10.0).round() / 10.0 + r.random_range(0.0..0.05))
                .collect()
        };
        let client = draw(nc, 0.0, 6.0);
        let impostor = draw(ni, 0.5, 11.0);
        let (t, curve) = calibrate_from_distances(&client, &impostor).unwrap();
        let pts = &curve.points;
        ensure(pts.len() == 90, || {
            format!("case {case}: {} points", pts.len())
        })?;
        for w in pts.windows(2) {
            ensure(
                w[1].threshold > w[0].threshold && w[1].frr <= w[0].frr && w[1].far >= w[0].far,
                || format!("case {case}: non-monotone at T={}", w[1].threshold),
            )?;
        }
        // Minimum of FRR + FAR counted independently of the library.
        let cost = |th: f64| {
            let rej = client.iter().filter(|&&d| d >= th).count() as f64 / nc as f64;
            let acc = impostor.iter().filter(|&&d| d < th).count() as f64 / ni as f64;
            rej + acc
        };
        let best = pts
            .iter()
            .map(|p| cost(p.threshold))
            .fold(f64::INFINITY, f64::min);
        ensure((cost(t) - best).abs() < 1e-12, || {
            format!("case {case}: T={t} costs {} but minimum is {best}", cost(t))
        })?;
    }
    Ok(format!(
        "monotone curves and optimal T on {SWEEP_CASES} random multisets"
    ))
}

// --- criterion 3e -------------------------------------------------------

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn pixel_end_to_end() -> Check {
    let cfg = SynthConfig {
        speakers: 4,
        words: vec!["zero".into(), "four".into()],
        ..SynthConfig::default()
    };
    let mut worst = f64::INFINITY;
    let (mut frames_seen, mut teeth_frames) = (0, 0);
    for s in cfg.speaker_list() {
        for word in &cfg.words {
            for session in 1..=2 {
                for repetition in 1..=5 {
                    let key = UtteranceKey {
                        speaker: s.id.clone(),
                        word: word.clone(),
                        session,
                        repetition,
                        condition: Condition::Normal,
                    };
                    let rendered = render_utterance(&cfg, &key);
                    let sig = extract_signature(
                        &rendered.frames,
                        SignatureLabels::new(word, &s.id, &session.to_string()),
                        Execution::Parallel,
                    )
                    .unwrap();
                    let h: Vec<f64> = sig.rows().iter().map(|r| f64::from(r.h)).collect();
                    let opening: Vec<f64> = rendered.truth.iter().map(|t| t.opening).collect();
                    worst = worst.min(spearman(&h, &opening));
                    for (i, (row, truth)) in sig.rows().iter().zip(&rendered.truth).enumerate() {
                        ensure(row.rc > 0.0, || format!("{key:?} frame {i}: RC = 0"))?;
                        ensure((row.t > 0) == truth.teeth_visible, || {
                            format!(
                                "{key:?} frame {i}: T = {} but teeth {}",
                                row.t, truth.teeth_visible
                            )
                        })?;
                        frames_seen += 1;
                        teeth_frames += usize::from(truth.teeth_visible);
                    }
                }
            }
        }
    }
    ensure(worst > RANK_CORRELATION_MIN, || {
        format!("rank correlation {worst:.4}")
    })?;
    ensure(teeth_frames > 0 && teeth_frames < frames_seen, || {
        "teeth never toggled".into()
    })?;
    Ok(format!(
        "min rank correlation {worst:.4}; RC > 0 on {frames_seen} frames; T > 0 exactly on {teeth_frames} teeth frames"
    ))
}

// --- criterion 4a-b -----------------------------------------------------

fn test_frames(side: usize, count: usize) -> Vec<RoiFrame> {
    let mut r = rng(side as u64);
    (0..count)
        .map(|f| {
            let pixels = (0..side * side)
                .map(|i| {
                    let (x, y) = (i % side, i / side);
                    let lip = ((x + y + f) % 7) as u8;
                    [180 + lip, r.random_range(20..140), r.random_range(30..140)]
                })
                .collect();
            RoiFrame::new(side, side, pixels).unwrap()
        })
        .collect()
}

fn median_extraction_time(frames: &[RoiFrame], repeats: usize) -> Duration {
    let mut times: Vec<Duration> = (0..repeats)
        .map(|_| {
            let start = Instant::now();
            extract_signature(frames, SignatureLabels::default(), Execution::Sequential).unwrap();
            start.elapsed()
        })
        .collect();
    times.sort();
    times[repeats / 2]
}

fn extraction_budget() -> Check {
    let frames = test_frames(64, 60);
    let start = Instant::now();
    let sig =
        extract_signature(&frames, SignatureLabels::default(), Execution::Sequential).unwrap();
    let elapsed = start.elapsed();
    ensure(sig.len() == 60, || "wrong row count".into())?;
    ensure(elapsed < EXTRACT_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "60 frames of 64x64 in {elapsed:.2?} (budget {EXTRACT_BUDGET:?})"
    ))
}

fn extraction_scaling() -> Check {
    let (small, large) = (test_frames(64, 60), test_frames(128, 60));
    median_extraction_time(&small, 1);
    let t1 = median_extraction_time(&small, 7);
    let t2 = median_extraction_time(&large, 7);
    let factor = t2.as_secs_f64() / t1.as_secs_f64();
    ensure(
        (SCALING_RANGE.0..=SCALING_RANGE.1).contains(&factor),
        || format!("factor {factor:.2} ({t1:.2?} -> {t2:.2?})"),
    )?;
    Ok(format!(
        "64 -> 128 side scales time by {factor:.2} ({t1:.2?} -> {t2:.2?})"
    ))
}

// --- criteria 2, 3d, 4c (one shared evaluation) -------------------------

fn combination_counts(reports: &[ExperimentReport]) -> Check {
    for rep in reports {
        let (enrolled, client, impostor) = if rep.kind.is_double() {
            (25, 25, 9025)
        } else {
            (5, 5, 95)
        };
        ensure(rep.rows.len() == 20, || {
            format!("{}: {} subjects", rep.kind, rep.rows.len())
        })?;
        for row in &rep.rows {
            ensure(
                row.enrolled == enrolled
                    && row.client_probes == client
                    && row.impostor_probes == impostor,
                || format!("{} {}: {row:?}", rep.kind, row.subject),
            )?;
        }
    }
    Ok(
        "doubles: 25 enrolled, 25 client and 9025 impostor probes per subject; singles: 5 + 95"
            .into(),
    )
}

fn trends(reports: &[ExperimentReport]) -> Check {
    let get = |k: ExperimentKind| reports.iter().find(|r| r.kind == k).unwrap();
    let (sk, su) = (
        get(ExperimentKind::SingleVPknown),
        get(ExperimentKind::SingleVPunknown),
    );
    let (dk, du) = (
        get(ExperimentKind::DoubleVPknown),
        get(ExperimentKind::DoubleVPunknown),
    );
    ensure(su.overall.far() <= sk.overall.far(), || {
        format!(
            "single unknown FAR {} > known {}",
            su.overall.far(),
            sk.overall.far()
        )
    })?;
    ensure(du.overall.far() <= dk.overall.far(), || {
        format!(
            "double unknown FAR {} > known {}",
            du.overall.far(),
            dk.overall.far()
        )
    })?;
    ensure(
        dk.overall.aer() <= sk.overall.aer() && du.overall.aer() <= su.overall.aer(),
        || {
            format!(
                "double AER {}/{} vs single {}/{}",
                dk.overall.aer(),
                du.overall.aer(),
                sk.overall.aer(),
                su.overall.aer()
            )
        },
    )?;
    for (kind, want) in PINNED_OVERALL {
        let csv = report_csv(get(kind));
        let got = csv.lines().last().unwrap();
        ensure(got == want, || format!("{kind}: {got} != pinned {want}"))?;
    }
    Ok(format!(
        "FAR unknown<=known ({} <= {}), AER double<=single ({} <= {}); fixtures match",
        format_percent(su.overall.far()),
        format_percent(sk.overall.far()),
        format_percent(dk.overall.aer()),
        format_percent(sk.overall.aer()),
    ))
}

fn main() {
    let mut failures = 0;
    let mut report = |id: &str, name: &str, check: &mut dyn FnMut() -> Check| {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {id} {name}: {detail}");
            }
        }
    };

    report("1", "rate identity", &mut rate_identity);
    report("3a", "feature invariants", &mut feature_invariants);
    report("3b", "oracle equivalence", &mut oracle_equivalence);
    report("3c", "threshold sweep", &mut sweep_properties);
    report("3e", "pixel end to end", &mut pixel_end_to_end);
    report("4a", "extraction budget", &mut extraction_budget);
    report("4b", "extraction scaling", &mut extraction_scaling);

    let start = Instant::now();
    let evaluation = generate_corpus(&SynthConfig::default())
        .and_then(|c| run_all_experiments(&c, Execution::Parallel));
    let elapsed = start.elapsed();
    match evaluation {
        Ok(reports) => {
            report("2", "combination counts", &mut || {
                combination_counts(&reports)
            });
            report("3d", "synthetic trends", &mut || trends(&reports));
            report("4c", "evaluation budget", &mut || {
                ensure(elapsed < EVALUATION_BUDGET, || {
                    format!("took {elapsed:.1?}")
                })?;
                Ok(format!("4 experiments, 20 speakers in {elapsed:.1?}"))
            });
        }
        Err(e) => {
            for (id, name) in [
                ("2", "combination counts"),
                ("3d", "synthetic trends"),
                ("4c", "evaluation budget"),
            ] {
                report(id, name, &mut || Err(format!("evaluation failed: {e}")));
            }
        }
    }

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
