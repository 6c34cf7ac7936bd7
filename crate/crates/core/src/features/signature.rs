use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 9;
pub const CHANNEL_NAMES: [&str; CHANNELS] = ["h", "w", "m", "q", "r", "er", "rc", "t", "chi"];

/// The nine measurements of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameFeatures {
    /// ROI crop height in pixels.
    pub h: u32,
    /// ROI crop width in pixels.
    pub w: u32,
    /// Mutual information with the previous frame, bits.
    pub m: f64,
    /// Quality index relative to the previous frame.
    pub q: f64,
    /// Vertical/horizontal detail ratio.
    pub r: f64,
    /// Sobel vertical/horizontal edge ratio.
    pub er: f64,
    /// Red pixel fraction.
    pub rc: f64,
    /// Teeth pixel count.
    pub t: u64,
    /// Chi-square distance to the first frame.
    pub chi: f64,
}

impl FrameFeatures {
    pub fn to_row(&self) -> [f64; CHANNELS] {
        [
            f64::from(self.h),
            f64::from(self.w),
            self.m,
            self.q,
            self.r,
            self.er,
            self.rc,
            self.t as f64,
            self.chi,
        ]
    }

    fn is_finite(&self) -> bool {
        self.to_row().iter().all(|v| v.is_finite())
    }
}

/// Recording condition of an utterance.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    #[default]
    Normal,
    Whisper,
    Mute,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Normal => "normal",
            Condition::Whisper => "whisper",
            Condition::Mute => "mute",
        })
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Condition::Normal),
            "whisper" => Ok(Condition::Whisper),
            "mute" => Ok(Condition::Mute),
            other => Err(Error::InvalidParameter(format!(
                "unknown condition '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignatureLabels {
    pub word: String,
    pub speaker: String,
    pub session: String,
    pub condition: Condition,
}

impl SignatureLabels {
    pub fn new(word: &str, speaker: &str, session: &str) -> Self {
        Self {
            word: word.into(),
            speaker: speaker.into(),
            session: session.into(),
            condition: Condition::Normal,
        }
    }
}

/// Feature rows of one uttered word, in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSignature {
    rows: Vec<FrameFeatures>,
    pub labels: SignatureLabels,
}

impl WordSignature {
    pub fn new(rows: Vec<FrameFeatures>, labels: SignatureLabels) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("signature has no rows"));
        }
        if !rows.iter().all(FrameFeatures::is_finite) {
            return Err(Error::InvalidParameter("non-finite feature value".into()));
        }
        Ok(Self { rows, labels })
    }

    pub fn rows(&self) -> &[FrameFeatures] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Serializes a signature as commented CSV with one row per frame.
pub fn signature_to_csv(sig: &WordSignature) -> String {
    let l = &sig.labels;
    let mut out = format!(
        "# word={}\n# speaker={}\n# session={}\n# condition={}\nframe,{}\n",
        l.word,
        l.speaker,
        l.session,
        l.condition,
        CHANNEL_NAMES.join(",")
    );
    for (i, r) in sig.rows.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            i + 1,
            r.h,
            r.w,
            r.m,
            r.q,
            r.r,
            r.er,
            r.rc,
            r.t,
            r.chi
        ));
    }
    out
}

pub fn parse_signature_csv(text: &str, origin: &str) -> Result<WordSignature> {
    let mut labels = SignatureLabels::default();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let at = || format!("{origin}:{}", lineno + 1);
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.trim().split_once('=') {
                let value = value.trim().to_string();
                match key.trim() {
                    "word" => labels.word = value,
                    "speaker" => labels.speaker = value,
                    "session" => labels.session = value,
                    "condition" => {
                        labels.condition = value.parse().map_err(|e: Error| {
                            Error::parse("signature csv", at(), e.to_string())
                        })?
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !saw_header {
            let expected = format!("frame,{}", CHANNEL_NAMES.join(","));
            if line.replace(' ', "") != expected {
                return Err(Error::parse(
                    "signature csv",
                    at(),
                    format!("expected header '{expected}'"),
                ));
            }
            saw_header = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != CHANNELS + 1 {
            return Err(Error::parse(
                "signature csv",
                at(),
                format!("expected {} columns, got {}", CHANNELS + 1, cells.len()),
            ));
        }
        let int = |s: &str, name: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::parse("signature csv", at(), format!("bad {name} '{s}'")))
        };
        let real = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse("signature csv", at(), format!("bad {name} '{s}'")))
        };
        let to_u32 = |v: u64, name: &str| -> Result<u32> {
            u32::try_from(v)
                .map_err(|_| Error::parse("signature csv", at(), format!("{name} out of range")))
        };
        rows.push(FrameFeatures {
            h: to_u32(int(cells[1], "h")?, "h")?,
            w: to_u32(int(cells[2], "w")?, "w")?,
            m: real(cells[3], "m")?,
            q: real(cells[4], "q")?,
            r: real(cells[5], "r")?,
            er: real(cells[6], "er")?,
            rc: real(cells[7], "rc")?,
            t: int(cells[8], "t")?,
            chi: real(cells[9], "chi")?,
        });
    }
    if rows.is_empty() {
        return Err(Error::parse("signature csv", origin, "no frame rows"));
    }
    WordSignature::new(rows, labels)
}

pub fn read_signature_csv(path: &Path) -> Result<WordSignature> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_signature_csv(&text, &path.display().to_string())
}

pub fn write_signature_csv(path: &Path, sig: &WordSignature) -> Result<()> {
    fs::write(path, signature_to_csv(sig)).map_err(|e| Error::io(path, e))
}
