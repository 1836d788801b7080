use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{BackendError, DecodeParams, ModelRequest, ModelResponse, ModelRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureImage {
    pub time_s: f64,
    pub mime: String,
    pub sha256: String,
}

/// What was asked, kept for human inspection; the hash is the key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRequest {
    pub role: ModelRole,
    pub prompt: String,
    pub images: Vec<FixtureImage>,
    pub params: DecodeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub hash: String,
    pub request: FixtureRequest,
    pub response: ModelResponse,
}

static TMP_SEQ: AtomicU64 = AtomicU64::new(0);

/// One `<hash>.json` file per recorded request.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn load(&self, hash: &str) -> Result<Option<Fixture>, BackendError> {
        let path = self.path_for(hash);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(fixture_err(&path, e.to_string())),
        };
        let fixture: Fixture =
            serde_json::from_slice(&bytes).map_err(|e| fixture_err(&path, e.to_string()))?;
        if fixture.hash != hash {
            return Err(fixture_err(&path, format!("hash field is {}", fixture.hash)));
        }
        Ok(Some(fixture))
    }

    pub fn save(&self, hash: &str, req: &ModelRequest, resp: &ModelResponse) -> Result<PathBuf, BackendError> {
        let path = self.path_for(hash);
        std::fs::create_dir_all(&self.dir).map_err(|e| fixture_err(&self.dir, e.to_string()))?;
        let fixture = Fixture {
            hash: hash.to_string(),
            request: FixtureRequest {
                role: req.role,
                prompt: req.prompt.clone(),
                images: req
                    .images
                    .iter()
                    .map(|i| FixtureImage {
                        time_s: i.time_s,
                        mime: i.mime.clone(),
                        sha256: i.digest(),
                    })
                    .collect(),
                params: req.params,
            },
            response: resp.clone(),
        };
        let mut text = serde_json::to_string_pretty(&fixture).expect("fixture serializes");
        text.push('\n');
        let seq = TMP_SEQ.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!(".{hash}.{}.{seq}.tmp", std::process::id()));
        std::fs::write(&tmp, text).map_err(|e| fixture_err(&tmp, e.to_string()))?;
        std::fs::rename(&tmp, &path).map_err(|e| fixture_err(&path, e.to_string()))?;
        Ok(path)
    }
}

fn fixture_err(path: &Path, message: String) -> BackendError {
    BackendError::Fixture {
        path: path.display().to_string(),
        message,
    }
}
