//! On-disk content cache: every resolved source, successful or not, is
//! stored as JSON keyed by the digest of its URI. A cached run replays
//! byte-identically without touching the inner provider.

use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::fetch::{ContentProvider, ProviderError};
use crate::tokenize::hex_encode;
use crate::types::{RawContent, SourceRef};

pub struct CachedProvider<P> {
    inner: P,
    dir: PathBuf,
    // Serializes writes; reads of existing entries go lock-free.
    write_lock: Mutex<()>,
}

impl<P> CachedProvider<P> {
    /// Wraps a provider with a cache rooted at `dir` (created if
    /// absent).
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { inner, dir, write_lock: Mutex::new(()) })
    }

    fn entry_path(&self, uri: &str) -> PathBuf {
        let digest = Sha256::digest(uri.as_bytes());
        self.dir.join(format!("{}.json", hex_encode(&digest)))
    }
}

impl<P: ContentProvider> ContentProvider for CachedProvider<P> {
    fn resolve(&self, source: &SourceRef) -> Result<RawContent, ProviderError> {
        let path = self.entry_path(&source.uri);
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(mut cached) = serde_json::from_slice::<RawContent>(&bytes) {
                // The tree position (parent, layer) belongs to this
                // run, not to the run that filled the cache.
                cached.source = source.clone();
                for link in &mut cached.links {
                    link.parent = Some(source.uri.clone());
                    link.layer = source.layer + 1;
                }
                return Ok(cached);
            }
            // Unreadable entry: fall through and refetch over it.
        }

        let raw = self.inner.resolve(source)?;
        let _guard = self.write_lock.lock().expect("cache write lock poisoned");
        let tmp = path.with_extension("tmp");
        let encoded = serde_json::to_vec_pretty(&raw)
            .map_err(|e| ProviderError::Cache { uri: source.uri.clone(), message: e.to_string() })?;
        fs::write(&tmp, encoded)
            .and_then(|()| fs::rename(&tmp, &path))
            .map_err(|e| ProviderError::Cache { uri: source.uri.clone(), message: e.to_string() })?;
        Ok(raw)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::types::{FetchStatus, Section};

    /// Counts how often it is actually asked, to prove cache hits.
    struct CountingProvider {
        calls: AtomicUsize,
    }

    impl ContentProvider for CountingProvider {
        fn resolve(&self, source: &SourceRef) -> Result<RawContent, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(RawContent {
                source: source.clone(),
                text: "cached body".to_string(),
                links: vec![SourceRef::child_of(source, "sim://child", None)],
                sections: vec![Section { id: "body".into(), text: "cached body".into() }],
                fetched_at: 1234,
                status: FetchStatus::Ok,
            })
        }
    }

    #[test]
    fn second_resolve_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let provider =
            CachedProvider::new(CountingProvider { calls: AtomicUsize::new(0) }, dir.path()).unwrap();
        let source = SourceRef::seed("sim://doc");
        let first = provider.resolve(&source).unwrap();
        let second = provider.resolve(&source).unwrap();
        assert_eq!(first, second);
        assert_eq!(provider.inner.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn cache_survives_provider_replacement() {
        let dir = tempfile::tempdir().unwrap();
        let source = SourceRef::seed("sim://doc");
        let original = {
            let provider =
                CachedProvider::new(CountingProvider { calls: AtomicUsize::new(0) }, dir.path()).unwrap();
            provider.resolve(&source).unwrap()
        };

        /// Refuses everything; only the cache can answer.
        struct NeverProvider;
        impl ContentProvider for NeverProvider {
            fn resolve(&self, source: &SourceRef) -> Result<RawContent, ProviderError> {
                Err(ProviderError::NotFound(source.uri.clone()))
            }
        }

        let replayed = CachedProvider::new(NeverProvider, dir.path()).unwrap();
        assert_eq!(replayed.resolve(&source).unwrap(), original);
        assert!(replayed.resolve(&SourceRef::seed("sim://other")).is_err());
    }

    #[test]
    fn cached_entry_is_restamped_for_the_requesting_source() {
        let dir = tempfile::tempdir().unwrap();
        let provider =
            CachedProvider::new(CountingProvider { calls: AtomicUsize::new(0) }, dir.path()).unwrap();
        // Fill the cache from a seed, then ask again as a layer-2 node.
        provider.resolve(&SourceRef::seed("sim://doc")).unwrap();
        let deep = SourceRef {
            uri: "sim://doc".into(),
            parent: Some("sim://above".into()),
            layer: 2,
            anchor_text: None,
        };
        let raw = provider.resolve(&deep).unwrap();
        assert_eq!(raw.source, deep);
        assert_eq!(raw.links[0].layer, 3);
        assert_eq!(raw.links[0].parent.as_deref(), Some("sim://doc"));
    }

    #[test]
    fn corrupt_entries_are_refetched() {
        let dir = tempfile::tempdir().unwrap();
        let provider =
            CachedProvider::new(CountingProvider { calls: AtomicUsize::new(0) }, dir.path()).unwrap();
        let source = SourceRef::seed("sim://doc");
        let path = provider.entry_path(&source.uri);
        fs::write(&path, b"not json").unwrap();
        let raw = provider.resolve(&source).unwrap();
        assert_eq!(raw.text, "cached body");
        assert_eq!(provider.inner.calls.load(Ordering::SeqCst), 1);
        // And the entry was repaired on disk.
        assert!(serde_json::from_slice::<RawContent>(&fs::read(&path).unwrap()).is_ok());
    }
}
