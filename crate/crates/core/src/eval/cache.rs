use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use super::{ChatRequest, EvalError};

/// One file per request digest holding the verbatim response body. Reads
/// are lock-free; writes for the same key are serialized and land by
/// atomic rename.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

/// `sha256` over model, prompt, temperature and max tokens.
pub fn request_digest(req: &ChatRequest) -> String {
    let key = serde_json::json!([req.model, req.prompt, req.temperature, req.max_tokens]);
    format!("{:x}", Sha256::digest(key.to_string().as_bytes()))
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, EvalError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| EvalError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            locks: Mutex::new(HashMap::new()),
        })
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn get(&self, digest: &str) -> Option<String> {
        std::fs::read_to_string(self.path(digest)).ok()
    }

    pub fn put(&self, digest: &str, body: &str) -> Result<(), EvalError> {
        let lock = {
            let mut locks = self.locks.lock().expect("cache lock poisoned");
            locks.entry(digest.to_string()).or_default().clone()
        };
        let _guard = lock.lock().expect("cache key lock poisoned");
        let io = |e: std::io::Error| EvalError::Io(format!("{}: {e}", self.dir.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(body.as_bytes()).map_err(io)?;
        tmp.persist(self.path(digest)).map_err(|e| io(e.error))?;
        Ok(())
    }
}
