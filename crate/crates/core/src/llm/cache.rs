use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CompletionOutcome, DecodingConfig};
use crate::rng::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedRequest {
    pub model_id: String,
    pub prompt: String,
    pub decoding: DecodingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub raw_text: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheTimestamps {
    pub stored_at: String,
}

/// One cached completion, stored as `<dir>/<key[..2]>/<key>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: CachedRequest,
    pub response: CachedResponse,
    pub timestamps: CacheTimestamps,
}

/// Content-addressed completion cache. Entries are written once and never
/// modified; unreadable entries are deleted and treated as misses.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: tokio::sync::Mutex<()>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            write_lock: tokio::sync::Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// SHA-256 over the model id, prompt text and decoding settings.
    pub fn key(model_id: &str, prompt: &str, cfg: &DecodingConfig) -> String {
        let canonical = json!({
            "model_id": model_id,
            "prompt": prompt,
            "decoding": cfg,
        });
        sha256_hex(canonical.to_string().as_bytes())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2.min(key.len())]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let path = self.path(key);
        let body = fs::read(&path).ok()?;
        match serde_json::from_slice::<CacheEntry>(&body) {
            Ok(entry) if entry.key == key => Some(entry),
            Ok(_) | Err(_) => {
                log::warn!("discarding corrupt cache entry {}", path.display());
                let _ = fs::remove_file(&path);
                None
            }
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub(super) async fn put(
        &self,
        key: &str,
        model_id: &str,
        prompt: &str,
        cfg: &DecodingConfig,
        raw_text: &str,
        outcome: &CompletionOutcome,
    ) -> std::io::Result<()> {
        let _guard = self.write_lock.lock().await;
        let path = self.path(key);
        if path.exists() {
            return Ok(());
        }
        let entry = CacheEntry {
            key: key.to_owned(),
            request: CachedRequest {
                model_id: model_id.to_owned(),
                prompt: prompt.to_owned(),
                decoding: *cfg,
            },
            response: CachedResponse {
                raw_text: raw_text.to_owned(),
                latency_ms: outcome.latency_ms,
                attempt_count: outcome.attempt_count,
            },
            timestamps: CacheTimestamps {
                stored_at: chrono::Utc::now().to_rfc3339(),
            },
        };
        let parent = path.parent().expect("entry path has a parent");
        fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(".{key}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec_pretty(&entry).expect("entry serializes"))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        let Ok(shards) = fs::read_dir(&self.dir) else {
            return 0;
        };
        shards
            .filter_map(Result::ok)
            .filter_map(|d| fs::read_dir(d.path()).ok())
            .flat_map(|files| files.filter_map(Result::ok))
            .filter(|f| f.path().extension().is_some_and(|e| e == "json"))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
