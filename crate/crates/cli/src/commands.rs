use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use codeccap_core::aggregate::{aggregate_document, AuditLog};
use codeccap_core::backend::{BackendConfig, BackendMode, ModelClient};
use codeccap_core::cuts::{detect_cuts, import_cuts, serialize_cuts, CutFormat, CutList};
use codeccap_core::document::{deserialize_document, parse_manifest, serialize_document, VideoRef};
use codeccap_core::forge::{
    load_state, redundancy_report, run_forge, Backends, ForgeConfig, PerSecondBaseline, Stage, VideoBundle,
};
use codeccap_core::frames::{source_features, FrameDir};
use codeccap_core::qa::sampling::Benchmark;
use codeccap_core::qa::{build_benchmark, compute_metrics, ingest_pool, load_caption_dir, load_votes, render_table, run_evaluation};
use codeccap_core::residual::{caption_segment, SegmentCaptions};
use codeccap_core::segment::{parse_iframe_timeline, plan_segments, probe_duration, SegmentPlan, TimelineFormat};
use codeccap_core::text::word_count;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{self, FlagLayer, GlobalConfig, REPLAY_DIR_VAR};
use crate::{BackendArgs, Cli, CliError, Command};

type Result<T> = std::result::Result<T, CliError>;

const PLAN_FILE: &str = "plan.json";

pub fn run(cli: Cli) -> Result<()> {
    let mut flags = FlagLayer::default();
    collect_flags(&cli.command, &mut flags);
    flags.assignments(&cli.set)?;
    let env = config::env_layer(std::env::vars())?;
    let cfg = config::load(cli.config.as_deref(), env, flags)?;
    log::debug!("resolved config: {cfg:?}");

    match cli.command {
        Command::Segment {
            video,
            video_id,
            iframes,
            cuts,
            frames_dir,
            out,
            ..
        } => segment(&cfg, &video, video_id.as_deref(), &iframes, cuts.as_deref(), frames_dir.as_deref(), out.as_deref()),
        Command::Cuts {
            frames_dir,
            import,
            out,
            ..
        } => {
            let list = match (frames_dir, import) {
                (_, Some(file)) => import_cuts(&read(&file)?, CutFormat::Auto)?,
                (Some(dir), None) => detect_from_frames(&cfg, &dir)?,
                (None, None) => unreachable!("clap requires one source"),
            };
            emit(out.as_deref(), serialize_cuts(&list).into_bytes())
        }
        Command::Caption {
            plan,
            frames,
            backend,
            out,
            ..
        } => caption(&cfg, &plan, &frames, &backend, &out),
        Command::Aggregate {
            captions,
            backend,
            backend_mode,
            fixtures,
            out,
            audit,
            ..
        } => {
            let args = BackendArgs {
                backend,
                mode: backend_mode,
                fixtures,
            };
            aggregate(&cfg, &captions, &args, out.as_deref(), audit.as_deref())
        }
        Command::Forge {
            manifest,
            state,
            backend,
            text_backend,
            ..
        } => forge(&cfg, &manifest, &state, &backend, text_backend.as_deref()),
        Command::Stats { state, manifest, out } => stats(&state, manifest.as_deref(), out.as_deref()),
        Command::Redundancy { doc, baseline, out } => {
            let doc = deserialize_document(&read(&doc)?)?;
            let baseline: PerSecondBaseline = read_json(&baseline)?;
            emit_json(out.as_deref(), &redundancy_report(&doc, &baseline, &word_count)?)
        }
        Command::QaBuild { pool, votes, out, .. } => {
            let questions = ingest_pool(&read_text(&pool)?, &cfg.pool)?;
            let votes = load_votes(&votes)?;
            let bench = build_benchmark(questions, &votes, &cfg.qa)?;
            log::info!("benchmark holds {} questions", bench.questions.len());
            emit_json(out.as_deref(), &bench)
        }
        Command::QaEval {
            benchmark,
            captions,
            backend,
            out,
            table,
            log,
        } => qa_eval(&cfg, &benchmark, &captions, &backend, &out, table.as_deref(), log),
    }
}

/// Dedicated flags become config overrides so they share one precedence.
fn collect_flags(cmd: &Command, f: &mut FlagLayer) {
    match cmd {
        Command::Segment {
            tau_gop,
            proximity,
            max_seg,
            min_seg,
            ..
        } => {
            f.set_opt("segmentation.tau_gop", *tau_gop);
            f.set_opt("segmentation.proximity_window_s", *proximity);
            f.set_opt("segmentation.max_segment_s", *max_seg);
            f.set_opt("segmentation.min_segment_s", *min_seg);
        }
        Command::Cuts {
            threshold,
            min_scene_len,
            ..
        } => {
            f.set_opt("cuts.threshold", *threshold);
            f.set_opt("cuts.min_scene_len_s", *min_scene_len);
        }
        Command::Caption {
            rate,
            window_size,
            overlap,
            ..
        } => {
            f.set_opt("caption.rate_hz", *rate);
            f.set_opt("caption.window_size", *window_size);
            f.set_opt("caption.overlap", *overlap);
        }
        Command::Aggregate { mode, extractor, .. } => {
            f.set_opt("aggregate.synthesis", mode.clone());
            f.set_opt("aggregate.extractor", extractor.clone());
        }
        Command::Forge {
            workers,
            max_attempts,
            ..
        } => {
            f.set_opt("forge.workers", *workers);
            f.set_opt("forge.max_attempts", *max_attempts);
        }
        Command::QaBuild { budget, seed, .. } => {
            f.set_opt("qa.budget", *budget);
            f.set_opt("qa.seed", *seed);
        }
        Command::Stats { .. } | Command::Redundancy { .. } | Command::QaEval { .. } => {}
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

/// Writes to `out`, or to stdout when no path was given.
fn emit(out: Option<&Path>, bytes: Vec<u8>) -> Result<()> {
    match out {
        Some(p) => write(p, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, v: &T) -> Result<()> {
    emit(out, pretty(v))
}

fn select_video(spec: &str, id: Option<&str>) -> Result<VideoRef> {
    let text = if spec.trim_start().starts_with('{') {
        spec.replace('\n', " ")
    } else {
        read_text(Path::new(spec))?
    };
    let videos = parse_manifest(&text)?;
    match id {
        Some(id) => videos
            .into_iter()
            .find(|v| v.video_id == id)
            .ok_or_else(|| CliError::Input(format!("no manifest entry with video_id `{id}`"))),
        None if videos.len() == 1 => Ok(videos.into_iter().next().expect("one entry")),
        None => Err(CliError::Input(format!(
            "manifest has {} entries; choose one with --video-id",
            videos.len()
        ))),
    }
}

fn detect_from_frames(cfg: &GlobalConfig, dir: &Path) -> Result<CutList> {
    cfg.cuts.validate()?;
    let frames = FrameDir::open(dir)?;
    let features = source_features(&frames, cfg.cuts.bins_per_channel)?;
    Ok(detect_cuts(&features, &cfg.cuts)?)
}

fn segment(
    cfg: &GlobalConfig,
    video: &str,
    video_id: Option<&str>,
    iframes: &Path,
    cuts: Option<&Path>,
    frames_dir: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let mut video = select_video(video, video_id)?;
    let bytes = read(iframes)?;
    let timeline = parse_iframe_timeline(&bytes, TimelineFormat::Auto)?;
    if video.duration_s.is_none() {
        video.duration_s = probe_duration(&bytes);
    }
    let cuts = match (cuts, frames_dir) {
        (Some(file), _) => import_cuts(&read(file)?, CutFormat::Auto)?,
        (None, Some(dir)) => detect_from_frames(cfg, dir)?,
        (None, None) => CutList::new(Vec::new())?,
    };
    let plan = plan_segments(&video, &timeline, &cuts, &cfg.segmentation)?;
    emit_json(out, &plan)
}

fn backend_config(cfg: &GlobalConfig, args: &BackendArgs, name: &str) -> Result<BackendConfig> {
    let env_dir = std::env::var_os(REPLAY_DIR_VAR).filter(|v| !v.is_empty()).map(PathBuf::from);
    config::resolve_backend(cfg, name, args.mode, args.fixtures.as_deref(), env_dir)
}

fn client(cfg: &GlobalConfig, args: &BackendArgs, name: Option<&str>) -> Result<ModelClient> {
    let name = name.or(args.backend.as_deref()).ok_or_else(|| {
        CliError::Input("this command calls a model; pass --backend <profile>".into())
    })?;
    let profile = backend_config(cfg, args, name)?;
    if profile.mode == BackendMode::Live {
        log::warn!("backend `{}` is live; responses are not recorded", profile.name);
    }
    Ok(ModelClient::new(profile)?)
}

fn segment_file(index: usize) -> String {
    format!("segment_{index:03}.json")
}

fn caption(cfg: &GlobalConfig, plan: &Path, frames: &Path, args: &BackendArgs, out: &Path) -> Result<()> {
    let plan: SegmentPlan = read_json(plan)?;
    let frames = FrameDir::open(frames)?;
    let backend = client(cfg, args, None)?;
    let mut captioned = Vec::with_capacity(plan.segments.len());
    for s in &plan.segments {
        log::info!("segment {} [{:.2}, {:.2})", s.index, s.start_s, s.end_s);
        captioned.push(caption_segment(s, &frames, &backend, &cfg.caption)?);
    }
    // Written only once every segment succeeded.
    write(&out.join(PLAN_FILE), &pretty(&plan))?;
    for c in &captioned {
        write(&out.join(segment_file(c.segment.index)), &pretty(c))?;
    }
    Ok(())
}

fn load_captions(dir: &Path) -> Result<(SegmentPlan, Vec<SegmentCaptions>)> {
    let plan: SegmentPlan = read_json(&dir.join(PLAN_FILE))?;
    let captions = (0..plan.segments.len())
        .map(|i| read_json(&dir.join(segment_file(i))))
        .collect::<Result<Vec<SegmentCaptions>>>()?;
    Ok((plan, captions))
}

fn aggregate(cfg: &GlobalConfig, dir: &Path, args: &BackendArgs, out: Option<&Path>, audit: Option<&Path>) -> Result<()> {
    let (plan, captions) = load_captions(dir)?;
    let text = match &args.backend {
        Some(_) => Some(client(cfg, args, None)?),
        None => None,
    };
    let (doc, log): (_, AuditLog) = aggregate_document(
        plan.video.clone(),
        &captions,
        text.as_ref().map(|c| c as &dyn codeccap_core::backend::Backend),
        &cfg.aggregate,
    )?;
    let bytes = serialize_document(&doc).map_err(|e| CliError::Core(codeccap_core::aggregate::AggregateError::from(e).into()))?;
    if let Some(p) = audit {
        write(p, &pretty(&log))?;
    }
    emit(out, bytes)
}

fn forge(cfg: &GlobalConfig, manifest: &Path, state: &Path, args: &BackendArgs, text: Option<&str>) -> Result<()> {
    let videos = parse_manifest(&read_text(manifest)?)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let vision = client(cfg, args, None)?;
    let text = text.map(|name| client(cfg, args, Some(name))).transpose()?;
    let forge_cfg = ForgeConfig {
        workers: cfg.forge.workers,
        max_attempts: cfg.forge.max_attempts,
        segmentation: cfg.segmentation.clone(),
        cuts: cfg.cuts.clone(),
        caption: cfg.caption.clone(),
        aggregate: cfg.aggregate.clone(),
        stop_after: None,
    };
    let backends = Backends {
        vision: &vision,
        text: text.as_ref().map(|c| c as &dyn codeccap_core::backend::Backend),
    };
    let report = run_forge(&videos, base, state, &forge_cfg, &backends)?;
    let failed: Vec<_> = report.jobs.iter().filter(|j| j.stage == Stage::Failed).collect();
    let summary = serde_json::json!({
        "jobs": report.jobs.iter().map(|j| serde_json::json!({
            "video_id": j.video_id,
            "stage": j.stage,
            "attempts": j.attempts,
            "error": j.last_error,
        })).collect::<Vec<_>>(),
        "stats": report.stats,
    });
    emit_json(None, &summary)?;
    if failed.is_empty() {
        return Ok(());
    }
    for j in &failed {
        log::error!("{}: {}", j.video_id, j.last_error.as_ref().map_or("", |e| e.message.as_str()));
    }
    let backend_kinds = ["fixture_missing", "fixture", "transport", "credential", "backend_config", "invalid_request"];
    Err(CliError::JobsFailed {
        failed: failed.len(),
        total: report.jobs.len(),
        backend: failed
            .iter()
            .any(|j| j.last_error.as_ref().is_some_and(|e| backend_kinds.contains(&e.kind.as_str()))),
    })
}

fn stats(state: &Path, manifest: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let (_, docs) = load_state(state)?;
    let mut baselines = BTreeMap::new();
    if let Some(m) = manifest {
        let base = m.parent().unwrap_or(Path::new("."));
        for v in parse_manifest(&read_text(m)?)? {
            let Ok(bundle) = VideoBundle::for_video(&v, base) else {
                continue;
            };
            let path = bundle.root.join("baseline.json");
            if path.is_file() {
                let b: PerSecondBaseline = read_json(&path)?;
                baselines.insert(v.video_id.clone(), b);
            }
        }
    }
    let stats = codeccap_core::forge::compute_stats(&docs, &baselines)?;
    emit_json(out, &stats)
}

fn qa_eval(
    cfg: &GlobalConfig,
    benchmark: &Path,
    captions: &Path,
    args: &BackendArgs,
    out: &Path,
    table: Option<&Path>,
    log: Option<PathBuf>,
) -> Result<()> {
    let bench: Benchmark = read_json(benchmark)?;
    let captions = load_caption_dir(captions)?;
    let backend = client(cfg, args, None)?;
    let log = log.unwrap_or_else(|| {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".log.jsonl");
        out.with_file_name(name)
    });
    if let Some(parent) = log.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let results = run_evaluation(&bench.questions, &captions, &backend, &cfg.eval, Some(&log))?;
    let report = compute_metrics(&results, cfg.metrics.seed, cfg.metrics.resamples, cfg.eval.strict)?;
    write(out, &pretty(&report))?;
    let rendered = render_table(&report);
    match table {
        Some(p) => write(p, rendered.as_bytes()),
        None => emit(None, rendered.into_bytes()),
    }
}
