//! Content-addressed on-disk response cache.
//!
//! Entries live at `<dir>/<k[0..2]>/<k[2..]>.json` keyed by the request
//! digest. Writes go through temp-file + rename, so concurrent writers of the
//! same key race harmlessly: first writer wins and later identical writes are
//! no-ops. Each entry stores a digest of the response content; a mismatch on
//! read (a corrupted or hand-edited file) is treated as a miss.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CacheKey, ChatResponse};
use crate::util::{sha256_hex, write_atomic};

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    request_digest: String,
    content_digest: String,
    response: ChatResponse,
}

impl ResponseCache {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        ResponseCache {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir
            .join(&key.0[..2])
            .join(format!("{}.json", &key.0[2..]))
    }

    pub fn get(&self, key: &CacheKey) -> Option<ChatResponse> {
        let path = self.path_for(key);
        let text = std::fs::read_to_string(&path).ok()?;
        let entry: Entry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("discarding unreadable cache entry {}: {e}", path.display());
                return None;
            }
        };
        let expected = sha256_hex(&[entry.response.content.as_bytes()]);
        if entry.request_digest != key.0 || entry.content_digest != expected {
            log::warn!("discarding corrupt cache entry {}", path.display());
            return None;
        }
        Some(entry.response)
    }

    pub fn put(&self, key: &CacheKey, response: &ChatResponse) -> std::io::Result<()> {
        let entry = Entry {
            request_digest: key.0.clone(),
            content_digest: sha256_hex(&[response.content.as_bytes()]),
            response: ChatResponse {
                cached: false,
                ..response.clone()
            },
        };
        let bytes = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
        write_atomic(&self.path_for(key), &bytes)
    }
}
