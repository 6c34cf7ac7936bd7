//! Per-client evaluation: thresholds are calibrated with the client's
//! session-2 password enrolled and session-1 probes, then applied with the
//! session-1 password enrolled against session-2 probes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::corpus::{Corpus, Speaker, UtteranceKey, REPETITIONS};
use crate::auth::{calibrate_from_distances, compute_rates, enroll, Outcome, RateTriple};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{Condition, WordSignature};
use crate::matching::{
    apply_normalization, nearest_distance, NormalizationMap, NormalizedSignature,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    SingleVPknown,
    SingleVPunknown,
    DoubleVPknown,
    DoubleVPunknown,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::SingleVPknown,
        ExperimentKind::SingleVPunknown,
        ExperimentKind::DoubleVPknown,
        ExperimentKind::DoubleVPunknown,
    ];

    pub fn is_double(self) -> bool {
        matches!(
            self,
            ExperimentKind::DoubleVPknown | ExperimentKind::DoubleVPunknown
        )
    }

    pub fn is_known(self) -> bool {
        matches!(
            self,
            ExperimentKind::SingleVPknown | ExperimentKind::DoubleVPknown
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SingleVPknown => "SingleVPknown",
            ExperimentKind::SingleVPunknown => "SingleVPunknown",
            ExperimentKind::DoubleVPknown => "DoubleVPknown",
            ExperimentKind::DoubleVPunknown => "DoubleVPunknown",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown experiment '{s}' (expected one of SingleVPknown, SingleVPunknown, DoubleVPknown, DoubleVPunknown)"
                ))
            })
    }
}

/// Which words form the client's password and which words impostors utter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentSpec {
    kind: ExperimentKind,
    client_words: Vec<String>,
    impostor_words: Vec<String>,
    pub condition: Condition,
}

impl ExperimentSpec {
    pub fn new(
        kind: ExperimentKind,
        client_words: Vec<String>,
        impostor_words: Vec<String>,
    ) -> Result<Self> {
        let n = if kind.is_double() { 2 } else { 1 };
        if client_words.len() != n || impostor_words.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{kind} needs {n} client word(s) and {n} impostor word(s)"
            )));
        }
        if kind.is_known() && client_words != impostor_words {
            return Err(Error::InvalidParameter(format!(
                "{kind}: impostors must utter the client's password"
            )));
        }
        if !kind.is_known() && client_words.iter().any(|w| impostor_words.contains(w)) {
            return Err(Error::InvalidParameter(format!(
                "{kind}: impostor words must differ from the password"
            )));
        }
        Ok(Self {
            kind,
            client_words,
            impostor_words,
            condition: Condition::Normal,
        })
    }

    /// The standard word choices: zero / one for single passwords,
    /// four+five / six+seven for double passwords.
    pub fn standard(kind: ExperimentKind) -> Self {
        let words = |ws: &[&str]| ws.iter().map(|w| w.to_string()).collect::<Vec<_>>();
        let (client, impostor) = match kind {
            ExperimentKind::SingleVPknown => (words(&["zero"]), words(&["zero"])),
            ExperimentKind::SingleVPunknown => (words(&["zero"]), words(&["one"])),
            ExperimentKind::DoubleVPknown => (words(&["four", "five"]), words(&["four", "five"])),
            ExperimentKind::DoubleVPunknown => (words(&["four", "five"]), words(&["six", "seven"])),
        };
        Self::new(kind, client, impostor).expect("standard specs are valid")
    }

    pub fn kind(&self) -> ExperimentKind {
        self.kind
    }

    pub fn client_words(&self) -> &[String] {
        &self.client_words
    }

    pub fn impostor_words(&self) -> &[String] {
        &self.impostor_words
    }
}

/// One client's result. Probe counts refer to the evaluation phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub subject: String,
    pub group: String,
    pub threshold: f64,
    pub rates: RateTriple,
    pub enrolled: usize,
    pub client_probes: usize,
    pub impostor_probes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAverage {
    pub group: String,
    pub rates: RateTriple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    /// Per-subject rows, ordered by group (first appearance) then corpus order.
    pub rows: Vec<ReportRow>,
    pub group_averages: Vec<GroupAverage>,
    pub overall: RateTriple,
}

impl ExperimentReport {
    pub fn rows_in_group<'a>(&'a self, group: &'a str) -> impl Iterator<Item = &'a ReportRow> {
        self.rows.iter().filter(move |r| r.group == group)
    }
}

/// Unweighted mean of per-subject FRR and FAR.
fn mean_rates<'a>(rows: impl Iterator<Item = &'a ReportRow>) -> Result<RateTriple> {
    let (mut frr, mut far, mut n) = (0.0, 0.0, 0usize);
    for r in rows {
        frr += r.rates.frr();
        far += r.rates.far();
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("no rows to average"));
    }
    RateTriple::new((frr / n as f64).min(1.0), (far / n as f64).min(1.0))
}

/// Single-word or concatenated probes, generated on demand so that the
/// quadratic number of impostor doubles is never materialized.
enum ProbeSet {
    Singles(Vec<NormalizedSignature>),
    Pairs {
        first: Vec<NormalizedSignature>,
        second: Vec<NormalizedSignature>,
    },
}

impl ProbeSet {
    fn len(&self) -> usize {
        match self {
            ProbeSet::Singles(v) => v.len(),
            ProbeSet::Pairs { first, second } => first.len() * second.len(),
        }
    }

    fn nearest_distances(&self, enrolled: &[NormalizedSignature], exec: Execution) -> Vec<f64> {
        let nearest = |p: &NormalizedSignature| {
            nearest_distance(p, enrolled).expect("enrolled set is never empty")
        };
        match self {
            ProbeSet::Singles(v) => exec.map(v, nearest),
            ProbeSet::Pairs { first, second } => {
                let idx: Vec<usize> = (0..self.len()).collect();
                exec.map(&idx, |&i| {
                    let (a, b) = (i / second.len(), i % second.len());
                    nearest(&first[a].concat(&second[b]))
                })
            }
        }
    }
}

/// Signatures of the corpus, looked up by key.
struct SignatureTable<'a> {
    corpus: &'a Corpus,
    table: BTreeMap<&'a UtteranceKey, WordSignature>,
}

impl<'a> SignatureTable<'a> {
    fn build(corpus: &'a Corpus, spec: &ExperimentSpec, exec: Execution) -> Result<Self> {
        let mut needed = Vec::new();
        let words: Vec<&String> = spec
            .client_words
            .iter()
            .chain(&spec.impostor_words)
            .collect();
        for speaker in corpus.speakers() {
            for word in &words {
                for session in 1..=2 {
                    for repetition in 1..=REPETITIONS {
                        let key = UtteranceKey {
                            speaker: speaker.id.clone(),
                            word: word.to_string(),
                            session,
                            repetition,
                            condition: spec.condition,
                        };
                        let u = corpus.get(&key).ok_or_else(|| {
                            Error::MissingData(format!(
                                "speaker '{}', word '{word}', session {session}, repetition {repetition} ({})",
                                speaker.id, spec.condition
                            ))
                        })?;
                        needed.push(u);
                    }
                }
            }
        }
        needed.sort_by(|a, b| a.key.cmp(&b.key));
        needed.dedup_by(|a, b| a.key == b.key);
        let sigs = exec.try_map(&needed, |u| u.signature(Execution::Sequential))?;
        Ok(Self {
            corpus,
            table: needed.iter().map(|u| &u.key).zip(sigs).collect(),
        })
    }

    fn get(
        &self,
        speaker: &str,
        word: &str,
        session: u8,
        repetition: u8,
        condition: Condition,
    ) -> &WordSignature {
        let key = UtteranceKey {
            speaker: speaker.to_string(),
            word: word.to_string(),
            session,
            repetition,
            condition,
        };
        &self.table[&key]
    }

    fn repetitions(
        &self,
        speaker: &str,
        word: &str,
        session: u8,
        condition: Condition,
    ) -> Vec<&WordSignature> {
        (1..=REPETITIONS)
            .map(|r| self.get(speaker, word, session, r, condition))
            .collect()
    }

    fn impostors<'b>(&'b self, client: &'b str) -> impl Iterator<Item = &'b Speaker> + 'b {
        self.corpus
            .speakers()
            .iter()
            .filter(move |s| s.id != client)
    }
}

struct Phase<'t> {
    enrolled: Vec<WordSignature>,
    client_probes: Vec<&'t WordSignature>,
    client_second: Vec<&'t WordSignature>,
    impostor_first: Vec<&'t WordSignature>,
    impostor_second: Vec<&'t WordSignature>,
}

fn build_phase<'t>(
    table: &'t SignatureTable<'_>,
    spec: &ExperimentSpec,
    client: &str,
    enroll_session: u8,
    probe_session: u8,
) -> Phase<'t> {
    let cond = spec.condition;
    let cw = &spec.client_words;
    let iw = &spec.impostor_words;
    let password = |session| table.repetitions(client, &cw[0], session, cond);
    let enrolled = if spec.kind.is_double() {
        let a = table.repetitions(client, &cw[0], enroll_session, cond);
        let b = table.repetitions(client, &cw[1], enroll_session, cond);
        a.iter()
            .flat_map(|x| {
                b.iter()
                    .map(move |y| crate::matching::concat_signatures(x, y))
            })
            .collect()
    } else {
        password(enroll_session).into_iter().cloned().collect()
    };
    let impostor_word = |w: &str| -> Vec<&WordSignature> {
        table
            .impostors(client)
            .flat_map(|s| table.repetitions(&s.id, w, probe_session, cond))
            .collect()
    };
    let (client_second, impostor_second) = if spec.kind.is_double() {
        (
            table.repetitions(client, &cw[1], probe_session, cond),
            impostor_word(&iw[1]),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    Phase {
        enrolled,
        client_probes: password(probe_session),
        client_second,
        impostor_first: impostor_word(&iw[0]),
        impostor_second,
    }
}

fn probe_set(
    map: &NormalizationMap,
    first: &[&WordSignature],
    second: &[&WordSignature],
) -> ProbeSet {
    let norm = |v: &[&WordSignature]| -> Vec<NormalizedSignature> {
        v.iter().map(|s| apply_normalization(s, map)).collect()
    };
    if second.is_empty() {
        ProbeSet::Singles(norm(first))
    } else {
        ProbeSet::Pairs {
            first: norm(first),
            second: norm(second),
        }
    }
}

struct PhaseScores {
    enrolled: usize,
    client: Vec<f64>,
    impostor: Vec<f64>,
}

fn score_phase(phase: &Phase<'_>, client: &str, exec: Execution) -> Result<PhaseScores> {
    let record = enroll(client, phase.enrolled.clone(), 1)?;
    let map = record.norm_map();
    let clients = probe_set(map, &phase.client_probes, &phase.client_second);
    let impostors = probe_set(map, &phase.impostor_first, &phase.impostor_second);
    Ok(PhaseScores {
        enrolled: record.normalized().len(),
        client: clients.nearest_distances(record.normalized(), exec),
        impostor: impostors.nearest_distances(record.normalized(), exec),
    })
}

fn evaluate_client(
    table: &SignatureTable<'_>,
    spec: &ExperimentSpec,
    speaker: &Speaker,
    exec: Execution,
) -> Result<ReportRow> {
    // Thresholding: enroll session 2, probe session 1.
    let calib = score_phase(
        &build_phase(table, spec, &speaker.id, 2, 1),
        &speaker.id,
        exec,
    )?;
    let (threshold, _) = calibrate_from_distances(&calib.client, &calib.impostor)?;

    // Evaluation: enroll session 1, probe session 2 with the fixed threshold.
    let eval = score_phase(
        &build_phase(table, spec, &speaker.id, 1, 2),
        &speaker.id,
        exec,
    )?;
    let decide = |d: &f64| {
        if *d < threshold {
            Outcome::Granted
        } else {
            Outcome::Denied
        }
    };
    let client: Vec<Outcome> = eval.client.iter().map(decide).collect();
    let impostor: Vec<Outcome> = eval.impostor.iter().map(decide).collect();
    Ok(ReportRow {
        subject: speaker.id.clone(),
        group: speaker.group.clone(),
        threshold,
        rates: compute_rates(&client, &impostor)?,
        enrolled: eval.enrolled,
        client_probes: client.len(),
        impostor_probes: impostor.len(),
    })
}

/// Runs one experiment with every speaker taking a turn as the client.
pub fn run_experiment(
    corpus: &Corpus,
    spec: &ExperimentSpec,
    exec: Execution,
) -> Result<ExperimentReport> {
    let table = SignatureTable::build(corpus, spec, exec)?;
    let speakers: Vec<&Speaker> = corpus.speakers().iter().collect();
    let rows = exec.try_map(&speakers, |s| evaluate_client(&table, spec, s, exec))?;

    let mut groups: Vec<&str> = Vec::new();
    for s in corpus.speakers() {
        if !groups.contains(&s.group.as_str()) {
            groups.push(&s.group);
        }
    }
    let mut ordered = Vec::with_capacity(rows.len());
    let mut group_averages = Vec::new();
    for g in &groups {
        let members: Vec<ReportRow> = rows.iter().filter(|r| r.group == *g).cloned().collect();
        if members.is_empty() {
            continue;
        }
        group_averages.push(GroupAverage {
            group: g.to_string(),
            rates: mean_rates(members.iter())?,
        });
        ordered.extend(members);
    }
    let overall = mean_rates(ordered.iter())?;
    Ok(ExperimentReport {
        kind: spec.kind,
        rows: ordered,
        group_averages,
        overall,
    })
}

/// Runs the four standard experiments in order.
pub fn run_all_experiments(corpus: &Corpus, exec: Execution) -> Result<Vec<ExperimentReport>> {
    ExperimentKind::ALL
        .iter()
        .map(|&k| run_experiment(corpus, &ExperimentSpec::standard(k), exec))
        .collect()
}
