//! On-disk enrollment store: one directory per speaker holding `record.toml`
//! and the enrolled signature CSVs it references.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EnrollmentRecord;
use crate::error::{Error, Result};
use crate::features::{read_signature_csv, write_signature_csv};
use crate::matching::NormalizationMap;

const RECORD_FILE: &str = "record.toml";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Serialize, Deserialize)]
struct RecordDocument {
    speaker_id: String,
    password_labels: Vec<String>,
    max_tries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    tries_used: u32,
    blocked: bool,
    signatures: Vec<String>,
    norm_map: NormalizationMap,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// Advisory per-speaker lock; released on drop.
#[derive(Debug)]
pub struct SpeakerLock {
    path: PathBuf,
}

impl Drop for SpeakerLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn check_speaker_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "speaker id '{id}' must be non-empty and use only letters, digits, '-', '_' or '.'"
        )))
    }
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn speaker_dir(&self, speaker: &str) -> Result<PathBuf> {
        check_speaker_id(speaker)?;
        Ok(self.root.join(speaker))
    }

    pub fn exists(&self, speaker: &str) -> Result<bool> {
        Ok(self.speaker_dir(speaker)?.join(RECORD_FILE).is_file())
    }

    pub fn lock(&self, speaker: &str) -> Result<SpeakerLock> {
        let dir = self.speaker_dir(speaker)?;
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(SpeakerLock { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Store(format!(
                "speaker '{speaker}' is locked by another process ({})",
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    /// Writes the full record, including enrolled signature files.
    pub fn save(&self, record: &EnrollmentRecord) -> Result<()> {
        let dir = self.speaker_dir(record.speaker_id())?;
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        // Drop signature files from a previous enrollment.
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            let stale = path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("enrolled_") && n.ends_with(".csv"));
            if stale {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        let mut names = Vec::with_capacity(record.enrolled().len());
        for (i, sig) in record.enrolled().iter().enumerate() {
            let name = format!("enrolled_{:03}.csv", i + 1);
            write_signature_csv(&dir.join(&name), sig)?;
            names.push(name);
        }
        self.write_document(record, names)
    }

    /// Rewrites only the mutable state (threshold, tries, blocked flag).
    pub fn save_state(&self, record: &EnrollmentRecord) -> Result<()> {
        let existing = self.read_document(record.speaker_id())?;
        self.write_document(record, existing.signatures)
    }

    fn write_document(&self, record: &EnrollmentRecord, signatures: Vec<String>) -> Result<()> {
        let doc = RecordDocument {
            speaker_id: record.speaker_id().to_string(),
            password_labels: record.password_labels().to_vec(),
            max_tries: record.max_tries(),
            threshold: record.threshold(),
            tries_used: record.tries_used(),
            blocked: record.is_blocked(),
            signatures,
            norm_map: *record.norm_map(),
        };
        let text = toml::to_string(&doc).map_err(|e| Error::Store(e.to_string()))?;
        let path = self.speaker_dir(record.speaker_id())?.join(RECORD_FILE);
        let tmp = path.with_extension("toml.tmp");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn read_document(&self, speaker: &str) -> Result<RecordDocument> {
        let path = self.speaker_dir(speaker)?.join(RECORD_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => {
                return Err(Error::Store(format!(
                    "no enrollment record for speaker '{speaker}'"
                )))
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        toml::from_str(&text).map_err(|e| {
            Error::parse(
                "enrollment record",
                path.display().to_string(),
                e.to_string(),
            )
        })
    }

    pub fn load(&self, speaker: &str) -> Result<EnrollmentRecord> {
        let doc = self.read_document(speaker)?;
        if doc.speaker_id != speaker {
            return Err(Error::Store(format!(
                "record in '{speaker}' belongs to '{}'",
                doc.speaker_id
            )));
        }
        let dir = self.speaker_dir(speaker)?;
        let enrolled = doc
            .signatures
            .iter()
            .map(|name| read_signature_csv(&dir.join(name)))
            .collect::<Result<Vec<_>>>()?;
        let norm_map = NormalizationMap::new(doc.norm_map.min, doc.norm_map.max)?;
        EnrollmentRecord::from_parts(
            doc.speaker_id,
            doc.password_labels,
            enrolled,
            norm_map,
            doc.threshold,
            doc.tries_used,
            doc.max_tries,
            doc.blocked,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::{enroll, verify_attempt};
    use crate::features::{FrameFeatures, SignatureLabels, WordSignature};

    fn sig(scale: f64) -> WordSignature {
        let rows = (0..4)
            .map(|i| FrameFeatures {
                h: 10 + i,
                w: 30,
                m: 0.3 * scale + f64::from(i) / 7.0,
                q: 0.99,
                r: 1.0 / 3.0,
                er: scale,
                rc: 0.25,
                t: u64::from(i) * 3,
                chi: 0.1 * f64::from(i),
            })
            .collect();
        WordSignature::new(rows, SignatureLabels::new("zero", "S01", "2")).unwrap()
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        let mut rec = enroll("S01", vec![sig(1.0), sig(2.5)], 3).unwrap();
        rec.set_threshold(1.7).unwrap();
        store.save(&rec).unwrap();
        assert!(store.exists("S01").unwrap());
        assert_eq!(store.load("S01").unwrap(), rec);

        verify_attempt(&mut rec, &sig(40.0)).unwrap();
        store.save_state(&rec).unwrap();
        let back = store.load("S01").unwrap();
        assert_eq!(back.tries_used(), 1);
        assert_eq!(back, rec);
    }

    #[test]
    fn re_enrollment_replaces_signatures() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        store
            .save(&enroll("S01", vec![sig(1.0), sig(2.0), sig(3.0)], 3).unwrap())
            .unwrap();
        let rec = enroll("S01", vec![sig(5.0)], 2).unwrap();
        store.save(&rec).unwrap();
        assert_eq!(store.load("S01").unwrap(), rec);
        let csvs = fs::read_dir(dir.path().join("S01"))
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .is_some_and(|x| x == "csv")
            })
            .count();
        assert_eq!(csvs, 1);
    }

    #[test]
    fn missing_record() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        assert!(!store.exists("nobody").unwrap());
        assert!(matches!(store.load("nobody"), Err(Error::Store(_))));
    }

    #[test]
    fn rejects_path_like_ids() {
        let store = Store::new("/tmp");
        assert!(store.speaker_dir("../etc").is_err());
        assert!(store.speaker_dir("").is_err());
        assert!(store.speaker_dir("a/b").is_err());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        let held = store.lock("S02").unwrap();
        assert!(store.lock("S02").is_err());
        drop(held);
        assert!(store.lock("S02").is_ok());
    }
}
