//! Polite HTTP content provider: per-host rate limiting, robots.txt
//! respect, size-capped reads, and classification of refusals into
//! blocked / paywalled / network-error statuses.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use url::Url;

use crate::fetch::html::{extract_document, MediaType};
use crate::fetch::{extract_links, ContentProvider, FetchPolicy, ProviderError};
use crate::types::{FetchStatus, RawContent, SourceRef};

/// Maps an HTTP status code to a fetch outcome. Auth and rate-limit
/// refusals are "blocked" (the host said no), 402 is the honest
/// paywall signal, everything else non-2xx is a network-class failure.
pub fn classify_status(code: u16) -> FetchStatus {
    match code {
        200..=299 => FetchStatus::Ok,
        401 | 403 | 407 | 429 | 451 => FetchStatus::Blocked,
        402 => FetchStatus::Paywalled,
        _ => FetchStatus::NetworkError,
    }
}

/// Phrase heuristic for soft paywalls that answer 200. Conservative:
/// only wording that essentially never appears in open articles.
pub fn looks_paywalled(body: &str) -> bool {
    const MARKERS: &[&str] = &[
        "subscribe to continue reading",
        "subscription required",
        "sign in to continue reading",
        "to continue reading, please subscribe",
        "purchase this article",
        "this content is for subscribers",
        "id=\"paywall\"",
        "class=\"paywall",
    ];
    let lower = body.to_lowercase();
    MARKERS.iter().any(|marker| lower.contains(marker))
}

/// Extracts the Disallow prefixes applicable to `user_agent` from a
/// robots.txt body. A specific user-agent group overrides the `*`
/// group; Allow lines are ignored, which only ever makes us more
/// polite.
pub(crate) fn parse_robots(text: &str, user_agent: &str) -> Vec<String> {
    let ua_lower = user_agent.to_lowercase();
    // (agents, disallow prefixes) per group.
    let mut groups: Vec<(Vec<String>, Vec<String>)> = Vec::new();
    let mut pending_agents: Vec<String> = Vec::new();
    let mut in_rules = false;

    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        let Some((field, value)) = line.split_once(':') else {
            continue;
        };
        let value = value.trim();
        match field.trim().to_ascii_lowercase().as_str() {
            "user-agent" => {
                if in_rules {
                    pending_agents.clear();
                    in_rules = false;
                }
                pending_agents.push(value.to_ascii_lowercase());
            }
            "disallow" => {
                if !in_rules {
                    groups.push((std::mem::take(&mut pending_agents), Vec::new()));
                    in_rules = true;
                }
                if let Some((_, rules)) = groups.last_mut() {
                    if !value.is_empty() {
                        rules.push(value.to_string());
                    }
                }
            }
            _ => {
                // Allow, crawl-delay, sitemap…: ignored, but they do
                // close the user-agent run like any rule line.
                if !pending_agents.is_empty() && !in_rules {
                    groups.push((std::mem::take(&mut pending_agents), Vec::new()));
                    in_rules = true;
                }
            }
        }
    }

    let matches_us =
        |agent: &str| agent != "*" && !agent.is_empty() && ua_lower.contains(agent);
    let specific: Vec<String> = groups
        .iter()
        .filter(|(agents, _)| agents.iter().any(|a| matches_us(a)))
        .flat_map(|(_, rules)| rules.iter().cloned())
        .collect();
    if groups.iter().any(|(agents, _)| agents.iter().any(|a| matches_us(a))) {
        return specific;
    }
    groups
        .iter()
        .filter(|(agents, _)| agents.iter().any(|a| a == "*"))
        .flat_map(|(_, rules)| rules.iter().cloned())
        .collect()
}

pub struct HttpProvider {
    agent: ureq::Agent,
    policy: FetchPolicy,
    /// Disallow prefixes per origin, fetched once.
    robots: Mutex<HashMap<String, Vec<String>>>,
    /// Next allowed request time per host.
    next_slot: Mutex<HashMap<String, Instant>>,
}

impl HttpProvider {
    pub fn new(policy: FetchPolicy) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(policy.timeout))
            .user_agent(policy.user_agent.clone())
            .http_status_as_error(false)
            .build();
        Self {
            agent: config.into(),
            policy,
            robots: Mutex::new(HashMap::new()),
            next_slot: Mutex::new(HashMap::new()),
        }
    }

    /// Reserves the next send slot for `host` and sleeps until it.
    /// Concurrent callers serialize: each reservation moves the slot
    /// forward by the politeness delay.
    fn polite_wait(&self, host: &str) {
        let delay = self.policy.politeness_delay;
        if delay.is_zero() {
            return;
        }
        let scheduled = {
            let mut slots = self.next_slot.lock().expect("politeness lock poisoned");
            let now = Instant::now();
            let scheduled = slots.get(host).map(|t| (*t).max(now)).unwrap_or(now);
            slots.insert(host.to_string(), scheduled + delay);
            scheduled
        };
        let wait = scheduled.saturating_duration_since(Instant::now());
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn robots_disallows(&self, url: &Url) -> Vec<String> {
        let origin = format!(
            "{}://{}",
            url.scheme(),
            url.host_str().map(|h| match url.port() {
                Some(p) => format!("{h}:{p}"),
                None => h.to_string(),
            }).unwrap_or_default()
        );
        if let Some(rules) = self.robots.lock().expect("robots lock poisoned").get(&origin) {
            return rules.clone();
        }
        let rules = self.fetch_robots(&origin);
        self.robots
            .lock()
            .expect("robots lock poisoned")
            .entry(origin)
            .or_insert_with(|| rules.clone());
        rules
    }

    fn fetch_robots(&self, origin: &str) -> Vec<String> {
        if let Some(host) = Url::parse(origin).ok().and_then(|u| u.host_str().map(str::to_string)) {
            self.polite_wait(&host);
        }
        let result = self.agent.get(format!("{origin}/robots.txt")).call();
        match result {
            Ok(mut resp) if resp.status().is_success() => {
                match resp.body_mut().with_config().limit(512 * 1024).read_to_string() {
                    Ok(body) => parse_robots(&body, &self.policy.user_agent),
                    Err(_) => Vec::new(),
                }
            }
            // No readable robots.txt: everything is allowed.
            _ => Vec::new(),
        }
    }

    fn allowed(&self, url: &Url) -> bool {
        if !self.policy.respect_robots {
            return true;
        }
        let path = url.path();
        !self.robots_disallows(url).iter().any(|prefix| path.starts_with(prefix.as_str()))
    }
}

impl ContentProvider for HttpProvider {
    fn resolve(&self, source: &SourceRef) -> Result<RawContent, ProviderError> {
        let url = Url::parse(&source.uri).map_err(|e| ProviderError::InvalidUri {
            uri: source.uri.clone(),
            message: e.to_string(),
        })?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(ProviderError::UnsupportedScheme(source.uri.clone()));
        }
        let now = || SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or(Duration::ZERO).as_secs();

        if !self.allowed(&url) {
            log::debug!("robots.txt disallows {}", source.uri);
            return Ok(RawContent::unavailable(source.clone(), FetchStatus::Blocked, now()));
        }
        if let Some(host) = url.host_str() {
            self.polite_wait(host);
        }

        let mut resp = match self.agent.get(url.as_str()).call() {
            Ok(resp) => resp,
            Err(e) => {
                log::debug!("fetch of {} failed: {e}", source.uri);
                return Ok(RawContent::unavailable(source.clone(), FetchStatus::NetworkError, now()));
            }
        };
        let status = classify_status(resp.status().as_u16());
        if status != FetchStatus::Ok {
            return Ok(RawContent::unavailable(source.clone(), status, now()));
        }

        let media = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(MediaType::from_mime)
            .unwrap_or(MediaType::Html);
        let body = match resp.body_mut().with_config().limit(self.policy.max_bytes as u64).read_to_string()
        {
            Ok(body) => body,
            Err(e) => {
                log::debug!("reading body of {} failed: {e}", source.uri);
                return Ok(RawContent::unavailable(source.clone(), FetchStatus::NetworkError, now()));
            }
        };
        if looks_paywalled(&body) {
            return Ok(RawContent::unavailable(source.clone(), FetchStatus::Paywalled, now()));
        }

        let doc = extract_document(&body, media);
        let links = extract_links(&doc.links, source.uri.as_str(), source);
        Ok(RawContent {
            source: source.clone(),
            text: doc.text(),
            links,
            sections: doc.sections,
            fetched_at: now(),
            status: FetchStatus::Ok,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classification_table() {
        assert_eq!(classify_status(200), FetchStatus::Ok);
        assert_eq!(classify_status(204), FetchStatus::Ok);
        assert_eq!(classify_status(401), FetchStatus::Blocked);
        assert_eq!(classify_status(403), FetchStatus::Blocked);
        assert_eq!(classify_status(429), FetchStatus::Blocked);
        assert_eq!(classify_status(451), FetchStatus::Blocked);
        assert_eq!(classify_status(402), FetchStatus::Paywalled);
        assert_eq!(classify_status(404), FetchStatus::NetworkError);
        assert_eq!(classify_status(500), FetchStatus::NetworkError);
        assert_eq!(classify_status(301), FetchStatus::NetworkError);
    }

    #[test]
    fn paywall_phrases_are_detected() {
        assert!(looks_paywalled("Please <b>Subscribe to continue reading</b> this story"));
        assert!(looks_paywalled("<div id=\"paywall\">...</div>"));
        assert!(!looks_paywalled("The HBB gene encodes the beta subunit of hemoglobin."));
        assert!(!looks_paywalled("Discussion of paywalls in publishing")); // word alone is not a marker
    }

    #[test]
    fn robots_star_group_applies_when_no_specific_group() {
        let robots = "User-agent: *\nDisallow: /private/\nDisallow: /tmp/\n";
        let rules = parse_robots(robots, "wise/0.1");
        assert_eq!(rules, vec!["/private/", "/tmp/"]);
    }

    #[test]
    fn robots_specific_group_overrides_star() {
        let robots = concat!(
            "User-agent: *\n",
            "Disallow: /everything/\n",
            "\n",
            "User-agent: wise\n",
            "Disallow: /only-this/\n",
        );
        let rules = parse_robots(robots, "wise/0.1");
        assert_eq!(rules, vec!["/only-this/"]);
    }

    #[test]
    fn robots_stacked_agents_share_rules() {
        let robots = "User-agent: alpha\nUser-agent: wise\nDisallow: /x/\nUser-agent: beta\nDisallow: /y/\n";
        let rules = parse_robots(robots, "wise/0.1");
        assert_eq!(rules, vec!["/x/"]);
    }

    #[test]
    fn robots_empty_disallow_allows_everything() {
        let robots = "User-agent: *\nDisallow:\n";
        assert!(parse_robots(robots, "wise/0.1").is_empty());
    }

    #[test]
    fn robots_comments_and_case_are_handled() {
        let robots = "# welcome\nUSER-AGENT: * # all\nDISALLOW: /a # note\n";
        assert_eq!(parse_robots(robots, "wise/0.1"), vec!["/a"]);
    }
}
