//! Layered configuration: built-in defaults, then the TOML file given with
//! `--config`, then `CODECCAP_<SECTION>__<KEY>` environment variables, then
//! command-line flags. Later layers win; unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use codeccap_core::aggregate::AggregateConfig;
use codeccap_core::backend::{BackendConfig, BackendMode};
use codeccap_core::cuts::CutDetectConfig;
use codeccap_core::qa::eval::EvalConfig;
use codeccap_core::qa::metrics::DEFAULT_RESAMPLES;
use codeccap_core::qa::pool::PoolConfig;
use codeccap_core::qa::sampling::BuildConfig;
use codeccap_core::residual::CaptionConfig;
use codeccap_core::segment::SegmentationConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

pub const ENV_PREFIX: &str = "CODECCAP_";
pub const REPLAY_DIR_VAR: &str = "CODECCAP_REPLAY_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub seed: u64,
    pub resamples: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            seed: 0,
            resamples: DEFAULT_RESAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeSection {
    /// 0 means one worker per CPU.
    pub workers: usize,
    pub max_attempts: u32,
}

impl Default for ForgeSection {
    fn default() -> Self {
        ForgeSection {
            workers: 0,
            max_attempts: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub segmentation: SegmentationConfig,
    pub cuts: CutDetectConfig,
    pub caption: CaptionConfig,
    pub aggregate: AggregateConfig,
    pub pool: PoolConfig,
    pub qa: BuildConfig,
    pub eval: EvalConfig,
    pub metrics: MetricsConfig,
    pub forge: ForgeSection,
    /// Named backend profiles, `[backends.<name>]`.
    pub backends: BTreeMap<String, BackendConfig>,
}

/// Overrides collected from flags, as dotted paths.
#[derive(Debug, Default)]
pub struct FlagLayer(Vec<(String, Value)>);

impl FlagLayer {
    pub fn set(&mut self, path: &str, value: impl Into<Value>) {
        self.0.push((path.to_string(), value.into()));
    }

    pub fn set_opt<T: Into<Value>>(&mut self, path: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(path, v);
        }
    }

    /// `--set key.path=value` assignments.
    pub fn assignments(&mut self, raw: &[String]) -> Result<(), CliError> {
        for a in raw {
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("--set expects key=value, got `{a}`")))?;
            self.set(k.trim(), parse_scalar(v.trim()));
        }
        Ok(())
    }
}

/// TOML literal when the text is one, else a plain string.
pub fn parse_scalar(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn insert_path(root: &mut Table, path: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Input(format!("malformed config key `{path}`")));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let slot = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = slot
            .as_table_mut()
            .ok_or_else(|| CliError::Input(format!("config key `{path}`: `{p}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `CODECCAP_CAPTION__WINDOW_SIZE=4` → `caption.window_size = 4`. Only
/// variables with a double underscore are config; credentials and the
/// replay directory use single underscores.
pub fn env_layer(vars: impl IntoIterator<Item = (String, String)>) -> Result<Table, CliError> {
    let mut t = Table::new();
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && k.contains("__"))
        .collect();
    vars.sort();
    for (k, v) in vars {
        let path = k[ENV_PREFIX.len()..].to_ascii_lowercase().replace("__", ".");
        insert_path(&mut t, &path, parse_scalar(&v))?;
    }
    Ok(t)
}

pub fn load(file: Option<&Path>, env: Table, flags: FlagLayer) -> Result<GlobalConfig, CliError> {
    let mut merged = Table::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let t: Table = toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        merge(&mut merged, t);
    }
    merge(&mut merged, env);
    let mut flag_table = Table::new();
    for (path, v) in flags.0 {
        insert_path(&mut flag_table, &path, v)?;
    }
    merge(&mut merged, flag_table);
    let cfg: GlobalConfig = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Input(format!("config: {}", e.message())))?;
    Ok(cfg)
}

/// Backend profile by name (a `[backends.<name>]` entry) or by path to a
/// profile file. Unknown names get a default replay profile. The fixture
/// directory comes from the flag, then `CODECCAP_REPLAY_DIR`, then the
/// profile.
pub fn resolve_backend(
    cfg: &GlobalConfig,
    name_or_path: &str,
    mode: Option<BackendMode>,
    fixtures: Option<&Path>,
    replay_env: Option<PathBuf>,
) -> Result<BackendConfig, CliError> {
    let path = Path::new(name_or_path);
    let mut profile = if name_or_path.ends_with(".toml") {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut p: BackendConfig =
            toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {}", path.display(), e.message())))?;
        if p.name == BackendConfig::default().name {
            p.name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("backend").to_string();
        }
        p
    } else {
        cfg.backends.get(name_or_path).cloned().unwrap_or_else(|| BackendConfig {
            name: name_or_path.to_string(),
            ..Default::default()
        })
    };
    if let Some(m) = mode {
        profile.mode = m;
    }
    if let Some(dir) = fixtures.map(Path::to_path_buf).or(replay_env) {
        profile.fixture_dir = Some(dir);
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Table {
        env_layer(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string()))).unwrap()
    }

    #[test]
    fn scalars_parse_as_toml() {
        assert_eq!(parse_scalar("4"), Value::Integer(4));
        assert_eq!(parse_scalar("0.25"), Value::Float(0.25));
        assert_eq!(parse_scalar("true"), Value::Boolean(true));
        assert_eq!(parse_scalar("template"), Value::String("template".into()));
        assert_eq!(parse_scalar("\"4\""), Value::String("4".into()));
    }

    #[test]
    fn env_maps_to_sections() {
        let t = env(&[
            ("CODECCAP_CAPTION__WINDOW_SIZE", "4"),
            ("CODECCAP_REPLAY_DIR", "/x"),
            ("CODECCAP_GEMINI_KEY", "secret"),
            ("HOME", "/root"),
        ]);
        let cfg = load(None, t, FlagLayer::default()).unwrap();
        assert_eq!(cfg.caption.window_size, 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = load(None, env(&[("CODECCAP_CAPTION__WINDOWSIZE", "4")]), FlagLayer::default()).unwrap_err();
        assert!(err.to_string().contains("windowsize"), "{err}");
        let mut f = FlagLayer::default();
        f.set("nonsense.key", 1);
        assert!(load(None, Table::new(), f).is_err());
    }

    #[test]
    fn flags_beat_env_beat_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.toml");
        std::fs::write(&file, "[caption]\nwindow_size = 5\noverlap = 2\n").unwrap();
        let mut flags = FlagLayer::default();
        flags.set("caption.window_size", 7);
        let cfg = load(Some(&file), env(&[("CODECCAP_CAPTION__WINDOW_SIZE", "6")]), flags).unwrap();
        assert_eq!((cfg.caption.window_size, cfg.caption.overlap), (7, 2));
    }

    #[test]
    fn example_config_spells_out_the_defaults() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config");
        let mut cfg = load(Some(&root.join("codeccap.example.toml")), Table::new(), FlagLayer::default()).unwrap();
        assert_eq!(cfg.backends.remove("offline").unwrap().mode, BackendMode::Replay);
        assert_eq!(cfg, GlobalConfig::default());
        for name in ["gemini", "local-vllm", "offline"] {
            let p = resolve_backend(&cfg, root.join(format!("profiles/{name}.toml")).to_str().unwrap(), None, None, None)
                .unwrap();
            p.validate().unwrap_or_else(|e| {
                assert!(p.fixture_dir.is_none(), "{name}: {e}");
            });
        }
    }

    #[test]
    fn backend_profiles() {
        let mut cfg = GlobalConfig::default();
        cfg.backends.insert(
            "gemini".into(),
            BackendConfig { name: "gemini".into(), rpm_limit: 30, ..Default::default() },
        );
        let p = resolve_backend(&cfg, "gemini", Some(BackendMode::Record), None, Some("/env".into())).unwrap();
        assert_eq!((p.rpm_limit, p.mode), (30, BackendMode::Record));
        assert_eq!(p.fixture_dir.as_deref(), Some(Path::new("/env")));
        let p = resolve_backend(&cfg, "other", None, Some(Path::new("/flag")), Some("/env".into())).unwrap();
        assert_eq!((p.name.as_str(), p.mode), ("other", BackendMode::Replay));
        assert_eq!(p.fixture_dir.as_deref(), Some(Path::new("/flag")));
    }
}
