use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{
    extract_signature, read_signature_csv, Condition, FrameFeatures, SignatureLabels,
    WordSignature, CHANNELS,
};
use crate::roi::ppm::read_frame_dir;

/// Repetitions recorded per (speaker, word, session).
pub const REPETITIONS: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UtteranceKey {
    pub speaker: String,
    pub word: String,
    pub session: u8,
    pub repetition: u8,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UtteranceSource {
    /// Directory of `frame_NNNN.ppm` files, extracted on demand.
    Frames(PathBuf),
    Signature(WordSignature),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub key: UtteranceKey,
    pub source: UtteranceSource,
}

impl Utterance {
    fn labels(&self) -> SignatureLabels {
        SignatureLabels {
            word: self.key.word.clone(),
            speaker: self.key.speaker.clone(),
            session: self.key.session.to_string(),
            condition: self.key.condition,
        }
    }

    /// The utterance's signature, extracting from frames when needed.
    pub fn signature(&self, exec: Execution) -> Result<WordSignature> {
        match &self.source {
            UtteranceSource::Signature(s) => Ok(s.clone()),
            UtteranceSource::Frames(dir) => {
                let frames = read_frame_dir(dir)?;
                extract_signature(&frames, self.labels(), exec)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Speaker {
    pub id: String,
    /// Grouping tag for per-group averages (may be empty).
    pub group: String,
}

/// Utterances of at least two speakers, each (speaker, word, session,
/// condition) holding exactly [`REPETITIONS`] repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    speakers: Vec<Speaker>,
    utterances: BTreeMap<UtteranceKey, Utterance>,
}

impl Corpus {
    pub fn new(speakers: Vec<Speaker>, utterances: Vec<Utterance>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &speakers {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate speaker '{}'",
                    s.id
                )));
            }
        }
        if speakers.len() < 2 {
            return Err(Error::InvalidParameter(
                "a corpus needs at least two speakers".into(),
            ));
        }
        let mut map = BTreeMap::new();
        for u in utterances {
            if !seen.contains(u.key.speaker.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "utterance of undeclared speaker '{}'",
                    u.key.speaker
                )));
            }
            if !(1..=2).contains(&u.key.session) {
                return Err(Error::InvalidParameter(format!(
                    "session must be 1 or 2, got {}",
                    u.key.session
                )));
            }
            if !(1..=REPETITIONS).contains(&u.key.repetition) {
                return Err(Error::InvalidParameter(format!(
                    "repetition must be 1..={REPETITIONS}, got {}",
                    u.key.repetition
                )));
            }
            if map.insert(u.key.clone(), u).is_some() {
                return Err(Error::InvalidParameter("duplicate utterance".into()));
            }
        }
        let mut reps: BTreeMap<(&str, &str, u8, Condition), u8> = BTreeMap::new();
        for k in map.keys() {
            *reps
                .entry((&k.speaker, &k.word, k.session, k.condition))
                .or_default() += 1;
        }
        if let Some(((spk, word, session, cond), n)) = reps.iter().find(|(_, &n)| n != REPETITIONS)
        {
            return Err(Error::InvalidParameter(format!(
                "{spk}/{word}/session {session}/{cond} has {n} repetitions, expected {REPETITIONS}"
            )));
        }
        Ok(Self {
            speakers,
            utterances: map,
        })
    }

    pub fn speakers(&self) -> &[Speaker] {
        &self.speakers
    }

    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances.values()
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, key: &UtteranceKey) -> Option<&Utterance> {
        self.utterances.get(key)
    }

    /// Distinct word labels present in the corpus.
    pub fn words(&self) -> BTreeSet<&str> {
        self.utterances.keys().map(|k| k.word.as_str()).collect()
    }

    /// Converts every frame-directory utterance into a signature.
    pub fn resolve(&self, exec: Execution) -> Result<Corpus> {
        let items: Vec<&Utterance> = self.utterances.values().collect();
        let resolved = exec.try_map(&items, |u| {
            Ok::<_, Error>(Utterance {
                key: u.key.clone(),
                source: UtteranceSource::Signature(u.signature(Execution::Sequential)?),
            })
        })?;
        Corpus::new(self.speakers.clone(), resolved)
    }
}

const MANIFEST_HEADER: &str = "speaker,group,word,repetition,session,condition,source";

fn parse_inline(text: &str, at: &str) -> Result<Vec<FrameFeatures>> {
    text.split(';')
        .map(|row| {
            let v: Vec<f64> = row
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse("manifest", at, "bad inline value"))?;
            if v.len() != CHANNELS || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(
                    "manifest",
                    at,
                    format!("inline rows need {CHANNELS} finite values"),
                ));
            }
            let count = |x: f64, name: &str| {
                if x >= 0.0 && x.fract() == 0.0 && x <= f64::from(u32::MAX) {
                    Ok(x)
                } else {
                    Err(Error::parse(
                        "manifest",
                        at,
                        format!("inline {name} must be a count"),
                    ))
                }
            };
            Ok(FrameFeatures {
                h: count(v[0], "h")? as u32,
                w: count(v[1], "w")? as u32,
                m: v[2],
                q: v[3],
                r: v[4],
                er: v[5],
                rc: v[6],
                t: count(v[7], "t")? as u64,
                chi: v[8],
            })
        })
        .collect()
}

/// Reads a corpus manifest. `source` is `frames:<dir>`, `signature:<csv>`
/// (paths relative to the manifest) or `inline:<row>;<row>...` with nine
/// space-separated values per row.
pub fn read_manifest(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut speakers: Vec<Speaker> = Vec::new();
    let mut utterances = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let at = format!("{}:{}", path.display(), lineno + 1);
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != MANIFEST_HEADER {
                return Err(Error::parse(
                    "manifest",
                    at,
                    format!("expected header '{MANIFEST_HEADER}'"),
                ));
            }
            saw_header = true;
            continue;
        }
        let cells: Vec<&str> = line.splitn(7, ',').map(str::trim).collect();
        if cells.len() != 7 {
            return Err(Error::parse("manifest", at, "expected 7 columns"));
        }
        let num = |s: &str, what: &str| -> Result<u8> {
            s.parse()
                .map_err(|_| Error::parse("manifest", at.clone(), format!("bad {what} '{s}'")))
        };
        let key = UtteranceKey {
            speaker: cells[0].to_string(),
            word: cells[2].to_string(),
            repetition: num(cells[3], "repetition")?,
            session: num(cells[4], "session")?,
            condition: cells[5]
                .parse()
                .map_err(|e: Error| Error::parse("manifest", at.clone(), e.to_string()))?,
        };
        match speakers.iter().find(|s| s.id == key.speaker) {
            Some(s) if s.group != cells[1] => {
                return Err(Error::parse(
                    "manifest",
                    at,
                    format!("speaker '{}' listed with two groups", key.speaker),
                ))
            }
            Some(_) => {}
            None => speakers.push(Speaker {
                id: key.speaker.clone(),
                group: cells[1].to_string(),
            }),
        }
        let (kind, value) = cells[6]
            .split_once(':')
            .ok_or_else(|| Error::parse("manifest", at.clone(), "source needs a kind prefix"))?;
        let source = match kind {
            "frames" => UtteranceSource::Frames(base.join(value)),
            "signature" => {
                let mut sig = read_signature_csv(&base.join(value))?;
                sig.labels = SignatureLabels {
                    word: key.word.clone(),
                    speaker: key.speaker.clone(),
                    session: key.session.to_string(),
                    condition: key.condition,
                };
                UtteranceSource::Signature(sig)
            }
            "inline" => {
                let rows = parse_inline(value, &at)?;
                let labels = SignatureLabels {
                    word: key.word.clone(),
                    speaker: key.speaker.clone(),
                    session: key.session.to_string(),
                    condition: key.condition,
                };
                UtteranceSource::Signature(
                    WordSignature::new(rows, labels)
                        .map_err(|e| Error::parse("manifest", at.clone(), e.to_string()))?,
                )
            }
            other => {
                return Err(Error::parse(
                    "manifest",
                    at,
                    format!("unknown source kind '{other}'"),
                ))
            }
        };
        utterances.push(Utterance { key, source });
    }
    if !saw_header {
        return Err(Error::parse(
            "manifest",
            path.display().to_string(),
            "empty manifest",
        ));
    }
    Corpus::new(speakers, utterances).map_err(|e| match e {
        Error::InvalidParameter(msg) => Error::parse("manifest", path.display().to_string(), msg),
        other => other,
    })
}

/// Writes `corpus` as a manifest at `path`. Signature sources are written
/// as CSV files under `signatures/` next to the manifest.
pub fn write_manifest(path: &Path, corpus: &Corpus) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let group_of = |id: &str| {
        corpus
            .speakers
            .iter()
            .find(|s| s.id == id)
            .map(|s| s.group.as_str())
            .unwrap_or("")
    };
    let mut out = format!("{MANIFEST_HEADER}\n");
    for u in corpus.utterances() {
        let k = &u.key;
        let source = match &u.source {
            UtteranceSource::Frames(dir) => {
                let rel = dir.strip_prefix(base).unwrap_or(dir);
                format!("frames:{}", rel.display())
            }
            UtteranceSource::Signature(sig) => {
                let rel = PathBuf::from("signatures").join(format!(
                    "{}_{}_s{}_r{}_{}.csv",
                    k.speaker, k.word, k.session, k.repetition, k.condition
                ));
                let full = base.join(&rel);
                if let Some(parent) = full.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                crate::features::write_signature_csv(&full, sig)?;
                format!("signature:{}", rel.display())
            }
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            k.speaker,
            group_of(&k.speaker),
            k.word,
            k.repetition,
            k.session,
            k.condition,
            source
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
