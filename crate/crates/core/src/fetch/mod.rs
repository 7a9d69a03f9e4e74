//! Content acquisition: HTTP and local-file providers behind one
//! interface, plain-text/section/link extraction, seed-file loading,
//! and an on-disk cache for reproducible reruns.
//!
//! Fetch failures are data, not errors: a source that is blocked,
//! paywalled, or unreachable resolves to [`RawContent`] with the
//! matching status and empty text, and the engine scores it zero.
//! Provider errors are reserved for requests the provider cannot even
//! interpret (unknown scheme, absent corpus document).

mod cache;
mod html;
mod http;

pub use cache::CachedProvider;
pub use html::{decode_entities, extract_document, ExtractedDoc, MediaType, RawLink};
pub use http::{classify_status, looks_paywalled, HttpProvider};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;
use url::Url;

use crate::types::{FetchStatus, RawContent, SourceRef};

/// Transport-level behavior of the HTTP provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchPolicy {
    pub timeout: Duration,
    /// Minimum pause between two requests to the same host.
    pub politeness_delay: Duration,
    /// Response bodies are truncated beyond this size.
    pub max_bytes: usize,
    pub user_agent: String,
    pub respect_robots: bool,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(20),
            politeness_delay: Duration::from_millis(500),
            max_bytes: 2_000_000,
            user_agent: format!("wise/{}", env!("CARGO_PKG_VERSION")),
            respect_robots: true,
        }
    }
}

impl FetchPolicy {
    pub fn validate(&self) -> Result<(), InvalidFetchPolicy> {
        if self.timeout.is_zero() {
            return Err(InvalidFetchPolicy::Timeout);
        }
        if self.max_bytes == 0 {
            return Err(InvalidFetchPolicy::MaxBytes);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidFetchPolicy {
    #[error("fetch timeout must be positive")]
    Timeout,
    #[error("max_bytes must be positive")]
    MaxBytes,
}

/// A request the provider cannot interpret at all — as opposed to a
/// fetch that merely failed, which is reported inside [`RawContent`].
#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("source not found: {0}")]
    NotFound(String),
    #[error("unsupported uri scheme in {0}")]
    UnsupportedScheme(String),
    #[error("invalid uri {uri}: {message}")]
    InvalidUri { uri: String, message: String },
    #[error("cache error for {uri}: {message}")]
    Cache { uri: String, message: String },
}

/// Resolves a source reference to raw content. Implementations must be
/// shareable across the engine's per-layer worker threads.
pub trait ContentProvider: Send + Sync {
    fn resolve(&self, source: &SourceRef) -> Result<RawContent, ProviderError>;
}

impl<P: ContentProvider + ?Sized> ContentProvider for &P {
    fn resolve(&self, source: &SourceRef) -> Result<RawContent, ProviderError> {
        (**self).resolve(source)
    }
}

/// Resolves raw anchors against a base URI into child source
/// references: absolute, fragment-stripped, deduplicated in document
/// order. Non-fetchable schemes (`javascript:`, `mailto:`, `data:`,
/// `tel:`) are dropped, as are anchors that cannot be resolved.
pub fn extract_links(links: &[RawLink], base: &str, parent: &SourceRef) -> Vec<SourceRef> {
    let Ok(base_url) = Url::parse(base) else {
        return Vec::new();
    };
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for link in links {
        let Ok(mut resolved) = base_url.join(&link.href) else {
            continue;
        };
        resolved.set_fragment(None);
        if matches!(resolved.scheme(), "javascript" | "mailto" | "data" | "tel") {
            continue;
        }
        let uri = resolved.to_string();
        if uri == base_url.as_str() || !seen.insert(uri.clone()) {
            continue;
        }
        let anchor = if link.anchor.is_empty() { None } else { Some(link.anchor.clone()) };
        out.push(SourceRef::child_of(parent, uri, anchor));
    }
    out
}

/// Reads a seed file: one URI per line, `#` comments and blank lines
/// ignored, duplicates collapsed in order. The result is the layer-0
/// source list.
pub fn seed_sources(path: &Path) -> Result<Vec<SourceRef>, SeedError> {
    let text = fs::read_to_string(path)
        .map_err(|e| SeedError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut seen = std::collections::BTreeSet::new();
    let mut seeds = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        Url::parse(entry).map_err(|e| SeedError::InvalidUri {
            line: lineno + 1,
            uri: entry.to_string(),
            message: e.to_string(),
        })?;
        if seen.insert(entry.to_string()) {
            seeds.push(SourceRef::seed(entry));
        }
    }
    if seeds.is_empty() {
        return Err(SeedError::Empty { path: path.display().to_string() });
    }
    Ok(seeds)
}

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("cannot read seed file {path}: {message}")]
    Io { path: String, message: String },
    #[error("seed file {path} contains no sources")]
    Empty { path: String },
    #[error("invalid uri on line {line}: {uri} ({message})")]
    InvalidUri { line: usize, uri: String, message: String },
}

/// Serves `file://` sources from the local filesystem. Media type is
/// taken from the file extension. A missing or unreadable file is a
/// network-class failure, mirroring a 404.
#[derive(Debug, Default)]
pub struct FileProvider;

impl ContentProvider for FileProvider {
    fn resolve(&self, source: &SourceRef) -> Result<RawContent, ProviderError> {
        let url = Url::parse(&source.uri).map_err(|e| ProviderError::InvalidUri {
            uri: source.uri.clone(),
            message: e.to_string(),
        })?;
        if url.scheme() != "file" {
            return Err(ProviderError::UnsupportedScheme(source.uri.clone()));
        }
        let path: PathBuf = url
            .to_file_path()
            .map_err(|_| ProviderError::InvalidUri { uri: source.uri.clone(), message: "not a file path".into() })?;
        let Ok(body) = fs::read_to_string(&path) else {
            return Ok(RawContent::unavailable(source.clone(), FetchStatus::NetworkError, 0));
        };
        let media = MediaType::from_extension(&path.to_string_lossy());
        let doc = extract_document(&body, media);
        let links = extract_links(&doc.links, &source.uri, source);
        Ok(RawContent {
            source: source.clone(),
            text: doc.text(),
            links,
            sections: doc.sections,
            fetched_at: 0,
            status: FetchStatus::Ok,
        })
    }
}

/// Routes by scheme: `file://` to disk, `http(s)://` to the network.
pub struct WebProvider {
    http: HttpProvider,
    file: FileProvider,
}

impl WebProvider {
    pub fn new(policy: FetchPolicy) -> Self {
        Self { http: HttpProvider::new(policy), file: FileProvider }
    }
}

impl ContentProvider for WebProvider {
    fn resolve(&self, source: &SourceRef) -> Result<RawContent, ProviderError> {
        match source.uri.split(':').next() {
            Some("http") | Some("https") => self.http.resolve(source),
            Some("file") => self.file.resolve(source),
            _ => Err(ProviderError::UnsupportedScheme(source.uri.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn raw(href: &str, anchor: &str) -> RawLink {
        RawLink { href: href.to_string(), anchor: anchor.to_string() }
    }

    #[test]
    fn links_resolve_relative_to_base() {
        let parent = SourceRef::seed("https://example.org/genes/hbb");
        let links = [raw("variants", "variant list"), raw("/about", "about"), raw("https://other.org/x", "x")];
        let refs = extract_links(&links, "https://example.org/genes/hbb", &parent);
        let uris: Vec<&str> = refs.iter().map(|r| r.uri.as_str()).collect();
        assert_eq!(
            uris,
            vec!["https://example.org/genes/variants", "https://example.org/about", "https://other.org/x"]
        );
        assert!(refs.iter().all(|r| r.layer == 1));
        assert!(refs.iter().all(|r| r.parent.as_deref() == Some("https://example.org/genes/hbb")));
    }

    #[test]
    fn links_deduplicate_and_drop_fragments() {
        let parent = SourceRef::seed("https://example.org/");
        let links = [raw("/a#top", "first"), raw("/a#bottom", "second"), raw("/a", "third")];
        let refs = extract_links(&links, "https://example.org/", &parent);
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].uri, "https://example.org/a");
        assert_eq!(refs[0].anchor_text.as_deref(), Some("first"), "first occurrence wins");
    }

    #[test]
    fn non_fetchable_schemes_and_self_links_are_dropped() {
        let parent = SourceRef::seed("https://example.org/");
        let links = [
            raw("javascript:void(0)", "js"),
            raw("mailto:a@example.org", "mail"),
            raw("tel:+1555", "phone"),
            raw("https://example.org/", "self"),
            raw("/real", "real"),
        ];
        let refs = extract_links(&links, "https://example.org/", &parent);
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].uri, "https://example.org/real");
    }

    #[test]
    fn unresolvable_base_yields_no_links() {
        let parent = SourceRef::seed("not a uri");
        assert!(extract_links(&[raw("/a", "a")], "not a uri", &parent).is_empty());
    }

    #[test]
    fn seed_file_parses_comments_blanks_and_duplicates() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "# HBB seeds\nhttps://example.org/hbb\n\nhttps://example.org/globin # inline note\nhttps://example.org/hbb\n"
        )
        .unwrap();
        let seeds = seed_sources(file.path()).unwrap();
        let uris: Vec<&str> = seeds.iter().map(|s| s.uri.as_str()).collect();
        assert_eq!(uris, vec!["https://example.org/hbb", "https://example.org/globin"]);
        assert!(seeds.iter().all(|s| s.layer == 0 && s.parent.is_none()));
    }

    #[test]
    fn empty_and_invalid_seed_files_are_errors() {
        let mut empty = tempfile::NamedTempFile::new().unwrap();
        writeln!(empty, "# only comments\n").unwrap();
        assert!(matches!(seed_sources(empty.path()), Err(SeedError::Empty { .. })));

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "https://ok.example.org/\nnot a uri at all").unwrap();
        assert!(matches!(seed_sources(bad.path()), Err(SeedError::InvalidUri { line: 2, .. })));

        assert!(matches!(seed_sources(Path::new("/no/such/seeds.txt")), Err(SeedError::Io { .. })));
    }

    #[test]
    fn file_provider_reads_extracts_and_links() {
        let dir = tempfile::tempdir().unwrap();
        let page = dir.path().join("page.html");
        fs::write(&page, "<h1>Title</h1><p>Body text with <a href=\"other.html\">a link</a>.</p>").unwrap();
        let uri = Url::from_file_path(&page).unwrap().to_string();
        let source = SourceRef::seed(&uri);
        let raw = FileProvider.resolve(&source).unwrap();
        assert_eq!(raw.status, FetchStatus::Ok);
        assert!(raw.text.contains("Body text"));
        assert_eq!(raw.sections[0].id, "Title");
        assert_eq!(raw.links.len(), 1);
        assert!(raw.links[0].uri.ends_with("other.html"));
        assert_eq!(raw.links[0].layer, 1);
    }

    #[test]
    fn missing_file_is_a_network_class_failure() {
        let source = SourceRef::seed("file:///definitely/not/here.txt");
        let raw = FileProvider.resolve(&source).unwrap();
        assert_eq!(raw.status, FetchStatus::NetworkError);
        assert!(raw.text.is_empty());
    }

    #[test]
    fn unknown_scheme_is_a_provider_error() {
        let source = SourceRef::seed("gopher://example.org/");
        assert!(matches!(
            WebProvider::new(FetchPolicy::default()).resolve(&source),
            Err(ProviderError::UnsupportedScheme(_))
        ));
    }
}
