use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vispass_core::auth::{
    calibrate_threshold, enroll, verify_attempt, Outcome, SpeakerLock, Store, DEFAULT_MAX_TRIES,
};
use vispass_core::eval::synth::{generate_corpus_with, generate_pixel_corpus, SynthConfig};
use vispass_core::eval::{
    read_manifest, report_csv, run_experiment, write_manifest, ExperimentKind, ExperimentSpec,
};
use vispass_core::features::{
    extract_signature, read_signature_csv, write_signature_csv, SignatureLabels, WordSignature,
};
use vispass_core::roi::ppm::read_frame_dir;
use vispass_core::{Error, Execution};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DENIED: u8 = 3;
const EXIT_BLOCKED: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "vispass",
    version,
    about = "Visual-password speaker verification from mouth frames"
)]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct StoreArg {
    /// Enrollment store directory.
    #[arg(long, env = "VISPASS_STORE", default_value = "vispass-store")]
    store: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract a signature CSV from a directory of frame_NNNN.ppm files.
    Extract {
        frames_dir: PathBuf,
        out_csv: PathBuf,
        #[arg(long, default_value = "")]
        word: String,
        #[arg(long, default_value = "")]
        speaker: String,
        #[arg(long, default_value = "")]
        session: String,
    },
    /// Enroll a speaker's password signatures.
    Enroll {
        #[command(flatten)]
        store: StoreArg,
        speaker: String,
        #[arg(required = true)]
        signatures: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_TRIES)]
        max_tries: u32,
        /// Replace an existing record.
        #[arg(long)]
        force: bool,
    },
    /// Sweep thresholds over client and impostor probes; prints the curve as CSV.
    Calibrate {
        #[command(flatten)]
        store: StoreArg,
        speaker: String,
        #[arg(long, required = true, num_args = 1..)]
        client: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        impostor: Vec<PathBuf>,
    },
    /// One verification attempt; prints the decision distance.
    Verify {
        #[command(flatten)]
        store: StoreArg,
        speaker: String,
        probe: PathBuf,
    },
    /// Run one experiment over a corpus manifest.
    Evaluate {
        manifest: PathBuf,
        #[arg(long, value_parser = parse_experiment)]
        experiment: ExperimentKind,
        /// Report destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic corpus and its manifest.
    Synth {
        #[arg(long, default_value_t = 20)]
        speakers: usize,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "zero,one,four,five,six,seven"
        )]
        words: Vec<String>,
        #[arg(long, default_value_t = SynthConfig::default().separation)]
        separation: f64,
        #[arg(long, default_value_t = SynthConfig::default().noise)]
        noise: f64,
        #[arg(long, default_value_t = SynthConfig::default().session_drift)]
        session_drift: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Render mouth frames instead of writing signatures directly.
        #[arg(long)]
        pixel: bool,
    },
}

fn parse_experiment(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failed command: exit code plus diagnostic.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn read_all(paths: &[PathBuf]) -> Result<Vec<WordSignature>, Error> {
    paths.iter().map(|p| read_signature_csv(p)).collect()
}

/// Locks an existing record without creating anything for unknown speakers.
fn lock_enrolled(store: &Store, speaker: &str) -> Result<SpeakerLock, Error> {
    if !store.exists(speaker)? {
        store.load(speaker)?;
    }
    store.lock(speaker)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)?;
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Extract {
            frames_dir,
            out_csv,
            word,
            speaker,
            session,
        } => {
            let frames = read_frame_dir(&frames_dir)?;
            let sig = extract_signature(
                &frames,
                SignatureLabels::new(&word, &speaker, &session),
                exec,
            )?;
            write_signature_csv(&out_csv, &sig)?;
            eprintln!("{} frames -> {}", sig.len(), out_csv.display());
            Ok(EXIT_OK)
        }
        Command::Enroll {
            store,
            speaker,
            signatures,
            max_tries,
            force,
        } => {
            let store = Store::new(store.store);
            let _lock = store.lock(&speaker)?;
            if store.exists(&speaker)? && !force {
                return Err(Failure::usage(format!(
                    "speaker '{speaker}' is already enrolled (use --force to replace)"
                )));
            }
            let record = enroll(&speaker, read_all(&signatures)?, max_tries)?;
            store.save(&record)?;
            eprintln!(
                "enrolled {speaker} with {} signature(s)",
                record.enrolled().len()
            );
            Ok(EXIT_OK)
        }
        Command::Calibrate {
            store,
            speaker,
            client,
            impostor,
        } => {
            let store = Store::new(store.store);
            let _lock = lock_enrolled(&store, &speaker)?;
            let mut record = store.load(&speaker)?;
            let (client, impostor) = (read_all(&client)?, read_all(&impostor)?);
            let (threshold, curve) = calibrate_threshold(&mut record, &client, &impostor, exec)?;
            store.save_state(&record)?;
            write_output(None, &curve.to_csv())?;
            eprintln!("threshold {threshold:.1}");
            Ok(EXIT_OK)
        }
        Command::Verify {
            store,
            speaker,
            probe,
        } => {
            let store = Store::new(store.store);
            let _lock = lock_enrolled(&store, &speaker)?;
            let mut record = store.load(&speaker)?;
            let probe = read_signature_csv(&probe)?;
            let attempt = verify_attempt(&mut record, &probe)?;
            store.save_state(&record)?;
            if let Some(d) = attempt.distance {
                println!("{d:.6}");
            }
            let (word, code) = match attempt.outcome {
                Outcome::Granted => ("granted", EXIT_OK),
                Outcome::Denied => ("denied", EXIT_DENIED),
                Outcome::Blocked => ("blocked", EXIT_BLOCKED),
            };
            eprintln!(
                "{word} ({} of {} tries used)",
                record.tries_used(),
                record.max_tries()
            );
            Ok(code)
        }
        Command::Evaluate {
            manifest,
            experiment,
            out,
        } => {
            let corpus = read_manifest(&manifest)?;
            let report = run_experiment(&corpus, &ExperimentSpec::standard(experiment), exec)?;
            write_output(out.as_deref(), &report_csv(&report))?;
            eprintln!(
                "{experiment}: overall aer {:.2}%",
                report.overall.aer() * 100.0
            );
            Ok(EXIT_OK)
        }
        Command::Synth {
            speakers,
            words,
            separation,
            noise,
            session_drift,
            seed,
            out,
            pixel,
        } => {
            let cfg = SynthConfig {
                speakers,
                words,
                separation,
                noise,
                session_drift,
                seed,
            };
            cfg.validate()?;
            fs::create_dir_all(&out)?;
            let corpus = if pixel {
                generate_pixel_corpus(&cfg, &out, exec)?
            } else {
                generate_corpus_with(&cfg, exec)?
            };
            let manifest = out.join("manifest.csv");
            write_manifest(&manifest, &corpus)?;
            eprintln!("{} utterances -> {}", corpus.len(), manifest.display());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
