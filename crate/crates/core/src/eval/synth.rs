//! Deterministic synthetic corpora.
//!
//! Every utterance is driven by a nine-channel latent curve: a word template
//! shared by all speakers, a speaker component scaled by `separation`, and a
//! small per-session perturbation. Signature mode maps the latent straight
//! onto feature channels; pixel mode renders mouth frames from it so the full
//! extraction pipeline runs.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::corpus::{Corpus, Speaker, Utterance, UtteranceKey, UtteranceSource, REPETITIONS};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{Condition, FrameFeatures, SignatureLabels, WordSignature, CHANNELS};
use crate::roi::ppm::write_frame_dir;
use crate::roi::RoiFrame;

pub const MIN_FRAMES: usize = 30;
pub const MAX_FRAMES: usize = 60;

/// Largest rendered mouth opening in pixels.
pub const MAX_OPENING: f64 = 24.0;

const SINUSOIDS: usize = 3;

/// How strongly the word template drives each channel. Crop width and lip
/// redness are mostly speaker traits and move little with the word.
const WORD_WEIGHT: [f64; CHANNELS] = [0.5, 0.05, 0.5, 0.5, 0.5, 0.5, 0.05, 0.5, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub speakers: usize,
    pub words: Vec<String>,
    /// Scale of the speaker-specific latent component.
    pub separation: f64,
    /// Standard deviation of per-frame white noise, in latent units.
    pub noise: f64,
    /// Scale of the per-session latent perturbation.
    pub session_drift: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            speakers: 20,
            words: ["zero", "one", "four", "five", "six", "seven"]
                .iter()
                .map(|w| w.to_string())
                .collect(),
            separation: 1.0,
            noise: 0.3,
            session_drift: 1.5,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.speakers < 2 {
            return Err(Error::InvalidParameter("need at least two speakers".into()));
        }
        if self.words.is_empty() {
            return Err(Error::InvalidParameter("need at least one word".into()));
        }
        for (name, v) in [
            ("separation", self.separation),
            ("noise", self.noise),
            ("session drift", self.session_drift),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn speaker_list(&self) -> Vec<Speaker> {
        let half = self.speakers.div_ceil(2);
        (0..self.speakers)
            .map(|i| Speaker {
                id: format!("S{:02}", i + 1),
                group: if i < half { "A" } else { "B" }.to_string(),
            })
            .collect()
    }

    fn keys(&self) -> Vec<UtteranceKey> {
        let mut keys = Vec::new();
        for s in self.speaker_list() {
            for w in &self.words {
                for session in 1..=2 {
                    for repetition in 1..=REPETITIONS {
                        keys.push(UtteranceKey {
                            speaker: s.id.clone(),
                            word: w.clone(),
                            session,
                            repetition,
                            condition: Condition::Normal,
                        });
                    }
                }
            }
        }
        keys
    }

    fn rng(&self, tags: &[&str]) -> ChaCha8Rng {
        let mut state = self.seed;
        for tag in tags {
            state = splitmix(state ^ fnv1a(tag.as_bytes()));
        }
        ChaCha8Rng::seed_from_u64(state)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A sum of low-frequency sinusoids over normalized time in [0, 1].
#[derive(Debug, Clone, Copy)]
struct Curve {
    terms: [(f64, f64, f64); SINUSOIDS],
}

impl Curve {
    fn draw(rng: &mut impl Rng) -> Self {
        let amp = Normal::new(0.0, 0.6).expect("valid normal");
        let terms = std::array::from_fn(|_| {
            (
                amp.sample(rng),
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..2.0 * PI),
            )
        });
        Self { terms }
    }

    fn at(&self, tau: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, f, p)| a * (2.0 * PI * f * tau + p).sin())
            .sum()
    }
}

fn curves(rng: &mut impl Rng) -> [Curve; CHANNELS] {
    std::array::from_fn(|_| Curve::draw(rng))
}

fn sample_times(len: usize) -> impl Iterator<Item = f64> {
    let last = (len.max(2) - 1) as f64;
    (0..len).map(move |i| i as f64 / last)
}

/// Linear resampling of a sequence of rows to `len` rows, endpoints aligned.
fn resample(rows: &[[f64; CHANNELS]], len: usize) -> Vec<[f64; CHANNELS]> {
    let last = (rows.len() - 1) as f64;
    sample_times(len)
        .map(|t| {
            let pos = t * last;
            let i = (pos.floor() as usize).min(rows.len() - 1);
            let j = (i + 1).min(rows.len() - 1);
            let frac = pos - i as f64;
            std::array::from_fn(|c| rows[i][c] + (rows[j][c] - rows[i][c]) * frac)
        })
        .collect()
}

/// Latent rows of one repetition, in latent units (roughly zero-mean, unit scale).
pub fn latent_utterance(cfg: &SynthConfig, key: &UtteranceKey) -> Vec<[f64; CHANNELS]> {
    let (spk, word) = (key.speaker.as_str(), key.word.as_str());
    let session = key.session.to_string();
    let repetition = key.repetition.to_string();

    let template = curves(&mut cfg.rng(&["word", word]));
    let mut speaker_rng = cfg.rng(&["speaker", spk]);
    let offsets: [f64; CHANNELS] = std::array::from_fn(|_| speaker_rng.random_range(-1.0..1.0));
    let mut sw_rng = cfg.rng(&["speaker-word", spk, word]);
    let personal = curves(&mut sw_rng);
    let base_len = sw_rng.random_range(MIN_FRAMES..=MAX_FRAMES);
    let drift = curves(&mut cfg.rng(&["session", spk, word, &session]));

    let latent: Vec<[f64; CHANNELS]> = sample_times(base_len)
        .map(|t| {
            std::array::from_fn(|c| {
                WORD_WEIGHT[c] * template[c].at(t)
                    + cfg.separation * (offsets[c] + personal[c].at(t))
                    + cfg.session_drift * drift[c].at(t)
            })
        })
        .collect();

    let mut rep_rng = cfg.rng(&["repetition", spk, word, &session, &repetition]);
    let len = rep_rng.random_range(MIN_FRAMES..=MAX_FRAMES);
    let mut rows = resample(&latent, len);
    if cfg.noise > 0.0 {
        let noise = Normal::new(0.0, cfg.noise).expect("validated noise");
        for row in &mut rows {
            for v in row.iter_mut() {
                *v += noise.sample(&mut rep_rng);
            }
        }
    }
    rows
}

/// Channel (center, scale) pairs mapping latent units onto feature ranges.
const CHANNEL_SCALE: [(f64, f64); CHANNELS] = [
    (30.0, 6.0),
    (60.0, 5.0),
    (2.0, 0.4),
    (0.85, 0.08),
    (1.0, 0.25),
    (1.1, 0.25),
    (0.35, 0.1),
    (60.0, 30.0),
    (0.4, 0.2),
];

fn features_from_latent(row: &[f64; CHANNELS]) -> FrameFeatures {
    let v: [f64; CHANNELS] =
        std::array::from_fn(|c| CHANNEL_SCALE[c].0 + CHANNEL_SCALE[c].1 * row[c]);
    FrameFeatures {
        h: v[0].round().max(1.0) as u32,
        w: v[1].round().max(1.0) as u32,
        m: v[2].max(0.0),
        q: v[3].clamp(-1.0, 1.0),
        r: v[4].max(0.0),
        er: v[5].max(0.0),
        rc: v[6].clamp(0.0, 1.0),
        t: v[7].round().max(0.0) as u64,
        chi: v[8].max(0.0),
    }
}

fn labels_of(key: &UtteranceKey) -> SignatureLabels {
    SignatureLabels {
        word: key.word.clone(),
        speaker: key.speaker.clone(),
        session: key.session.to_string(),
        condition: key.condition,
    }
}

pub fn synth_signature(cfg: &SynthConfig, key: &UtteranceKey) -> Result<WordSignature> {
    let rows = latent_utterance(cfg, key)
        .iter()
        .map(features_from_latent)
        .collect();
    WordSignature::new(rows, labels_of(key))
}

/// Signature-level corpus: every speaker utters every word five times in
/// each of two sessions.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Corpus> {
    generate_corpus_with(cfg, Execution::default())
}

pub fn generate_corpus_with(cfg: &SynthConfig, exec: Execution) -> Result<Corpus> {
    cfg.validate()?;
    let keys = cfg.keys();
    let utterances = exec.try_map(&keys, |k| {
        Ok::<_, Error>(Utterance {
            key: k.clone(),
            source: UtteranceSource::Signature(synth_signature(cfg, k)?),
        })
    })?;
    Corpus::new(cfg.speaker_list(), utterances)
}

const LIP_BASE: [f64; 3] = [185.0, 135.0, 140.0];
const INTERIOR: [u8; 3] = [120, 20, 35];
const TEETH: [u8; 3] = [235, 232, 225];

/// Ground truth for one rendered frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTruth {
    /// Rendered opening height in pixels.
    pub opening_px: u32,
    /// Continuous opening before rasterization.
    pub opening: f64,
    pub teeth_visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedUtterance {
    pub frames: Vec<RoiFrame>,
    pub truth: Vec<FrameTruth>,
}

struct Appearance {
    lip: [u8; 3],
    thickness: u32,
    base_width: f64,
}

fn appearance(cfg: &SynthConfig, speaker: &str) -> Appearance {
    let mut rng = cfg.rng(&["appearance", speaker]);
    let lip = std::array::from_fn(|c| (LIP_BASE[c] + rng.random_range(-8.0..=8.0)).round() as u8);
    Appearance {
        lip,
        thickness: rng.random_range(7..=9),
        base_width: rng.random_range(52.0..=60.0),
    }
}

/// Lip-colored crop with a dark elliptical opening and, when the opening
/// exceeds half its maximum, a white teeth band along its top.
pub fn render_mouth(
    width: u32,
    thickness: u32,
    opening: f64,
    lip: [u8; 3],
) -> (RoiFrame, FrameTruth) {
    let open_px = opening.round().max(0.0) as u32;
    let height = 2 * thickness + open_px;
    let mut pixels = vec![lip; (width * height) as usize];
    let (cx, cy) = (f64::from(width) / 2.0, f64::from(height) / 2.0);
    let ax = 0.32 * f64::from(width);
    let ay = f64::from(open_px) / 2.0;
    let teeth_band = if opening > MAX_OPENING / 2.0 {
        (0.25 * f64::from(open_px)).round().max(2.0)
    } else {
        0.0
    };
    let mut teeth = false;
    if open_px > 0 {
        for y in 0..height {
            let py = f64::from(y) + 0.5;
            for x in 0..width {
                let px = f64::from(x) + 0.5;
                let d = ((px - cx) / ax).powi(2) + ((py - cy) / ay).powi(2);
                if d <= 1.0 {
                    let idx = (y * width + x) as usize;
                    if py < cy - ay + teeth_band {
                        pixels[idx] = TEETH;
                        teeth = true;
                    } else {
                        pixels[idx] = INTERIOR;
                    }
                }
            }
        }
    }
    let frame = RoiFrame::new(width as usize, height as usize, pixels)
        .expect("rendered frame is well formed");
    (
        frame,
        FrameTruth {
            opening_px: open_px,
            opening,
            teeth_visible: teeth,
        },
    )
}

/// Renders the frames of one utterance. The opening follows a closed-open-closed
/// envelope modulated by the first latent channel; the crop width follows the
/// second.
pub fn render_utterance(cfg: &SynthConfig, key: &UtteranceKey) -> RenderedUtterance {
    let look = appearance(cfg, &key.speaker);
    let latent = latent_utterance(cfg, key);
    let mut frames = Vec::with_capacity(latent.len());
    let mut truth = Vec::with_capacity(latent.len());
    for (row, tau) in latent.iter().zip(sample_times(latent.len())) {
        let opening = MAX_OPENING * (PI * tau).sin() * (0.55 + 0.3 * row[0]).clamp(0.0, 1.0);
        let width = (look.base_width + 4.0 * row[1]).round().max(16.0) as u32;
        let (frame, t) = render_mouth(width, look.thickness, opening, look.lip);
        frames.push(frame);
        truth.push(t);
    }
    RenderedUtterance { frames, truth }
}

/// Pixel-level corpus: renders every utterance to `root/frames/<utterance>/`
/// and returns a corpus whose sources are those frame directories.
pub fn generate_pixel_corpus(cfg: &SynthConfig, root: &Path, exec: Execution) -> Result<Corpus> {
    cfg.validate()?;
    let keys = cfg.keys();
    let utterances = exec.try_map(&keys, |k| {
        let dir = root.join("frames").join(format!(
            "{}_{}_s{}_r{}_{}",
            k.speaker, k.word, k.session, k.repetition, k.condition
        ));
        write_frame_dir(&dir, &render_utterance(cfg, k).frames)?;
        Ok::<_, Error>(Utterance {
            key: k.clone(),
            source: UtteranceSource::Frames(dir),
        })
    })?;
    Corpus::new(cfg.speaker_list(), utterances)
}
