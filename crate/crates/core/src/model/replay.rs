use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{image_digest, ModelBackend, ModelError};
use crate::prompt::{PromptBundle, PromptFlavor};

/// One line of the replay store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredExchange {
    pub key: String,
    pub flavor: PromptFlavor,
    pub prompt: String,
    #[serde(default)]
    pub image_digest: Option<String>,
    pub response: String,
    pub backend: String,
}

pub enum ReplayMode {
    Record(Arc<dyn ModelBackend>),
    Replay,
}

/// Records a live backend into an NDJSON store, or answers from one.
///
/// Keys hash the prompt text together with the image digest. A key recorded
/// several times replays its responses in order and then repeats the last.
pub struct RecordReplayBackend {
    name: String,
    vision: bool,
    inner: Option<Arc<dyn ModelBackend>>,
    store: PathBuf,
    replay: Mutex<HashMap<String, VecDeque<String>>>,
    writer: Mutex<Option<File>>,
}

pub fn exchange_key(prompt: &str, image_digest: Option<&str>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hasher.update([0]);
    hasher.update(image_digest.unwrap_or("").as_bytes());
    hex::encode(hasher.finalize())
}

/// Directory holding the PNGs referenced by a store.
pub fn image_dir(store: &Path) -> PathBuf {
    let stem = store.file_stem().and_then(|s| s.to_str()).unwrap_or("store");
    store.with_file_name(format!("{stem}-images"))
}

impl RecordReplayBackend {
    pub fn open(mode: ReplayMode, store: &Path) -> Result<Self, ModelError> {
        let io = |e: std::io::Error| ModelError::Config(format!("{}: {e}", store.display()));
        match mode {
            ReplayMode::Record(inner) => {
                if let Some(parent) = store.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent).map_err(io)?;
                }
                let file = OpenOptions::new().create(true).append(true).open(store).map_err(io)?;
                Ok(RecordReplayBackend {
                    name: inner.name().to_string(),
                    vision: inner.supports_vision(),
                    inner: Some(inner),
                    store: store.to_path_buf(),
                    replay: Mutex::new(HashMap::new()),
                    writer: Mutex::new(Some(file)),
                })
            }
            ReplayMode::Replay => {
                let file = File::open(store).map_err(io)?;
                let mut map: HashMap<String, VecDeque<String>> = HashMap::new();
                let mut name = None;
                for (n, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(io)?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let entry: StoredExchange = serde_json::from_str(&line).map_err(|e| {
                        ModelError::Config(format!("{} line {}: {e}", store.display(), n + 1))
                    })?;
                    name.get_or_insert(entry.backend.clone());
                    map.entry(entry.key).or_default().push_back(entry.response);
                }
                Ok(RecordReplayBackend {
                    name: name.unwrap_or_else(|| "replay".into()),
                    vision: true,
                    inner: None,
                    store: store.to_path_buf(),
                    replay: Mutex::new(map),
                    writer: Mutex::new(None),
                })
            }
        }
    }

    pub fn store(&self) -> &Path {
        &self.store
    }

    fn record(&self, bundle: &PromptBundle, key: String, digest: Option<String>, response: &str) -> Result<(), ModelError> {
        let io = |e: std::io::Error| ModelError::Config(format!("{}: {e}", self.store.display()));
        if let (Some(png), Some(d)) = (&bundle.image, &digest) {
            let dir = image_dir(&self.store);
            fs::create_dir_all(&dir).map_err(io)?;
            let path = dir.join(format!("{d}.png"));
            if !path.exists() {
                fs::write(&path, png).map_err(io)?;
            }
        }
        let line = serde_json::to_string(&StoredExchange {
            key,
            flavor: bundle.flavor,
            prompt: bundle.text.clone(),
            image_digest: digest,
            response: response.to_string(),
            backend: self.name.clone(),
        })
        .expect("exchange serializes");
        let mut writer = self.writer.lock().expect("store writer poisoned");
        let file = writer.as_mut().expect("record mode has a writer");
        writeln!(file, "{line}").and_then(|_| file.flush()).map_err(io)
    }
}

impl ModelBackend for RecordReplayBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports_vision(&self) -> bool {
        self.vision
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<String, ModelError> {
        let digest = bundle.image.as_deref().map(image_digest);
        let key = exchange_key(&bundle.text, digest.as_deref());
        match &self.inner {
            Some(inner) => {
                let response = inner.complete(bundle)?;
                self.record(bundle, key, digest, &response)?;
                Ok(response)
            }
            None => {
                let mut map = self.replay.lock().expect("replay map poisoned");
                let queue = map.get_mut(&key).ok_or_else(|| ModelError::ReplayMiss(key.clone()))?;
                let response = if queue.len() > 1 {
                    queue.pop_front().expect("non-empty queue")
                } else {
                    queue.front().cloned().ok_or(ModelError::ReplayMiss(key))?
                };
                Ok(response)
            }
        }
    }
}
