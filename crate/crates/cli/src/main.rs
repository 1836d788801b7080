//! `codeccap`: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 model backend error,
//! 3 internal error. Failures also print a one-line JSON summary to stderr.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use codeccap_core::backend::{BackendError, BackendMode};
use codeccap_core::ErrorCategory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] codeccap_core::Error),
    #[error("{0}")]
    Input(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} videos failed")]
    JobsFailed { failed: usize, total: usize, backend: bool },
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

via_core!(
    codeccap_core::backend::BackendError,
    codeccap_core::document::DocumentError,
    codeccap_core::segment::SegmentError,
    codeccap_core::cuts::CutError,
    codeccap_core::frames::FrameError,
    codeccap_core::residual::CaptionError,
    codeccap_core::aggregate::AggregateError,
    codeccap_core::qa::QaError,
    codeccap_core::forge::ForgeError
);

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    fn category(&self) -> ErrorCategory {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Input(_) => ErrorCategory::Input,
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ErrorCategory::Input,
            CliError::Io { .. } => ErrorCategory::Internal,
            CliError::JobsFailed { backend: true, .. } => ErrorCategory::Backend,
            CliError::JobsFailed { .. } => ErrorCategory::Input,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Input(_) => "input",
            CliError::Io { .. } => "io",
            CliError::JobsFailed { .. } => "jobs_failed",
        }
    }

    fn summary(&self) -> serde_json::Value {
        let category = match self.category() {
            ErrorCategory::Input => "input",
            ErrorCategory::Backend => "backend",
            ErrorCategory::Internal => "internal",
        };
        let mut v = serde_json::json!({
            "error": { "category": category, "kind": self.kind(), "message": self.to_string() }
        });
        if let CliError::Core(e) = self {
            if let Some(BackendError::FixtureMissing { hash }) = e.backend_error() {
                v["error"]["hash"] = hash.clone().into();
            }
        }
        v
    }
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Input => 1,
        ErrorCategory::Backend => 2,
        ErrorCategory::Internal => 3,
    }
}

#[derive(Debug, Parser)]
#[command(name = "codeccap", version, about = "Keyframe/residual dense video captioning")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set caption.window_size=4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// Model backend selection shared by the stages that call a model.
#[derive(Debug, Args)]
pub struct BackendArgs {
    /// Profile name from `[backends.<name>]`, or a profile `.toml` file.
    #[arg(long, value_name = "PROFILE")]
    backend: Option<String>,
    #[arg(long, value_name = "live|record|replay")]
    mode: Option<BackendMode>,
    /// Fixture directory for record/replay; defaults to $CODECCAP_REPLAY_DIR.
    #[arg(long, value_name = "DIR")]
    fixtures: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan scene-aligned segments for one video.
    Segment {
        /// Manifest entry as inline JSON, or a manifest file.
        #[arg(long, value_name = "ENTRY|FILE")]
        video: String,
        /// Which manifest entry, when the manifest has several.
        #[arg(long)]
        video_id: Option<String>,
        /// Probe JSON or plain list of key-frame times.
        #[arg(long, value_name = "FILE")]
        iframes: PathBuf,
        /// Cut list; without one, cuts are detected from --frames-dir, or
        /// none are used.
        #[arg(long, value_name = "FILE")]
        cuts: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        frames_dir: Option<PathBuf>,
        #[arg(long, value_name = "F")]
        tau_gop: Option<f64>,
        #[arg(long, value_name = "SECONDS")]
        proximity: Option<f64>,
        #[arg(long, value_name = "SECONDS")]
        max_seg: Option<f64>,
        #[arg(long, value_name = "SECONDS")]
        min_seg: Option<f64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Detect shot cuts from frames, or normalize an external cut list.
    Cuts {
        #[arg(long, value_name = "DIR", required_unless_present = "import", conflicts_with = "import")]
        frames_dir: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        import: Option<PathBuf>,
        #[arg(long, value_name = "F")]
        threshold: Option<f64>,
        #[arg(long, value_name = "SECONDS")]
        min_scene_len: Option<f64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Anchor and residual captions for every segment of a plan.
    Caption {
        #[arg(long, value_name = "FILE")]
        plan: PathBuf,
        #[arg(long, value_name = "DIR")]
        frames: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, value_name = "HZ")]
        rate: Option<f64>,
        #[arg(long, value_name = "FRAMES")]
        window_size: Option<i64>,
        #[arg(long, value_name = "FRAMES")]
        overlap: Option<i64>,
        /// Directory for plan.json and segment_NNN.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Validate residual evidence and assemble the caption document.
    Aggregate {
        /// Output directory of `caption`.
        #[arg(long, value_name = "DIR")]
        captions: PathBuf,
        /// Narrative synthesis.
        #[arg(long, value_name = "template|backend")]
        mode: Option<String>,
        #[arg(long, value_name = "deterministic|backend")]
        extractor: Option<String>,
        /// Text model profile for backend synthesis or extraction.
        #[arg(long, value_name = "PROFILE")]
        backend: Option<String>,
        #[arg(long, value_name = "live|record|replay")]
        backend_mode: Option<BackendMode>,
        #[arg(long, value_name = "DIR")]
        fixtures: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Omissions and validation audit log.
        #[arg(long, value_name = "FILE")]
        audit: Option<PathBuf>,
    },
    /// Build caption documents for a whole manifest, resumably.
    Forge {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_name = "DIR")]
        state: PathBuf,
        #[arg(long, value_name = "N")]
        workers: Option<i64>,
        #[arg(long, value_name = "N")]
        max_attempts: Option<i64>,
        #[command(flatten)]
        backend: BackendArgs,
        /// Text model profile for backend aggregation.
        #[arg(long, value_name = "PROFILE")]
        text_backend: Option<String>,
    },
    /// Corpus statistics over a forge state directory.
    Stats {
        #[arg(long, value_name = "DIR")]
        state: PathBuf,
        /// Manifest whose bundles hold per-second baselines.
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compare a caption document with per-second captions of the same video.
    Redundancy {
        #[arg(long, value_name = "FILE")]
        doc: PathBuf,
        #[arg(long, value_name = "FILE")]
        baseline: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Filter a question pool with recorded votes and sample the benchmark.
    QaBuild {
        #[arg(long, value_name = "FILE")]
        pool: PathBuf,
        #[arg(long, value_name = "DIR")]
        votes: PathBuf,
        #[arg(long, value_name = "N")]
        budget: Option<i64>,
        #[arg(long, value_name = "N")]
        seed: Option<i64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Answer benchmark questions from captions and report accuracy.
    QaEval {
        #[arg(long, value_name = "FILE")]
        benchmark: PathBuf,
        /// One `<video_id>.txt` or caption document `.json` per video.
        #[arg(long, value_name = "DIR")]
        captions: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        /// Structured metrics report.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Human-readable table; printed to stdout when omitted.
        #[arg(long, value_name = "FILE")]
        table: Option<PathBuf>,
        /// Resumable per-question log; defaults to <out>.log.jsonl.
        #[arg(long, value_name = "FILE")]
        log: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let info = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            if info {
                return ExitCode::SUCCESS;
            }
            let summary = serde_json::json!({
                "error": { "category": "input", "kind": "usage", "message": e.kind().to_string() }
            });
            eprintln!("{summary}");
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CODECCAP_LOG", level))
        .format_timestamp(None)
        .init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.summary());
            ExitCode::from(exit_code(e.category()))
        }
    }
}
