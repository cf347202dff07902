//! On-disk cache of generated environments, enabled by `HYBRID_RL_CACHE`.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "HYBRID_RL_CACHE";

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn hash_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("cache keys serialize");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug)]
pub struct EnvCache {
    dir: Option<PathBuf>,
}

impl EnvCache {
    pub fn from_env() -> Self {
        Self { dir: std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from) }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Loads the entry for `key` or builds and stores it. Unreadable or
    /// stale entries are rebuilt; write failures are ignored.
    pub fn get_or_build<K, T, E>(&self, prefix: &str, key: &K, build: impl FnOnce() -> Result<T, E>) -> Result<T, E>
    where
        K: Serialize + ?Sized,
        T: Serialize + DeserializeOwned,
    {
        let Some(dir) = &self.dir else {
            return build();
        };
        let path = dir.join(format!("{prefix}-{}.json", hash_json(key)));
        if let Ok(bytes) = std::fs::read(&path) {
            if let Ok(value) = serde_json::from_slice(&bytes) {
                return Ok(value);
            }
        }
        let value = build()?;
        if std::fs::create_dir_all(dir).is_ok() {
            if let Ok(bytes) = serde_json::to_vec(&value) {
                let tmp = path.with_extension("tmp");
                if std::fs::write(&tmp, bytes).is_ok() {
                    let _ = std::fs::rename(&tmp, &path);
                }
            }
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn second_lookup_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EnvCache::at(dir.path());
        let calls = Cell::new(0);
        let build = || {
            calls.set(calls.get() + 1);
            Ok::<_, ()>(vec![1.5, 2.5])
        };
        let a = cache.get_or_build("t", &("k", 1), build).unwrap();
        let b = cache.get_or_build("t", &("k", 1), build).unwrap();
        assert_eq!(a, b);
        assert_eq!(calls.get(), 1);
        cache.get_or_build("t", &("k", 2), build).unwrap();
        assert_eq!(calls.get(), 2);
    }

    #[test]
    fn corrupt_entry_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EnvCache::at(dir.path());
        let path = dir.path().join(format!("t-{}.json", hash_json(&7)));
        std::fs::write(&path, "not json").unwrap();
        let v: Vec<u8> = cache.get_or_build("t", &7, || Ok::<_, ()>(vec![3])).unwrap();
        assert_eq!(v, vec![3]);
    }
}
