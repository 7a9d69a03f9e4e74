//! Plain-text, section, and link extraction from markup.
//!
//! A small hand-rolled scanner rather than a DOM: it strips
//! boilerplate subtrees (scripts, styles, head, navigation), breaks
//! sections at headings, collects anchors in document order, decodes
//! the common entities, and never panics on malformed input. The
//! extracted document guarantees that the concatenation of its section
//! texts equals its full text.

use crate::types::Section;

/// How the fetched bytes should be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MediaType {
    Html,
    Xml,
    PlainText,
}

impl MediaType {
    /// From a MIME type, e.g. a Content-Type header value.
    pub fn from_mime(mime: &str) -> Self {
        let essence = mime.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        match essence.as_str() {
            "text/html" | "application/xhtml+xml" => MediaType::Html,
            "text/xml" | "application/xml" | "application/rss+xml" | "application/atom+xml" => {
                MediaType::Xml
            }
            _ => MediaType::PlainText,
        }
    }

    /// From a file extension, for `file://` and corpus content.
    pub fn from_extension(path: &str) -> Self {
        let ext = path.rsplit('.').next().unwrap_or("").to_ascii_lowercase();
        match ext.as_str() {
            "html" | "htm" | "xhtml" => MediaType::Html,
            "xml" | "rss" | "atom" => MediaType::Xml,
            _ => MediaType::PlainText,
        }
    }
}

/// An anchor as it appeared in the document: unresolved href plus its
/// visible text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLink {
    pub href: String,
    pub anchor: String,
}

/// Extraction result: ordered sections and document-order links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedDoc {
    pub sections: Vec<Section>,
    pub links: Vec<RawLink>,
}

impl ExtractedDoc {
    /// The full plain text: section texts joined by blank lines, so the
    /// section view and the text view never disagree.
    pub fn text(&self) -> String {
        self.sections.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n\n")
    }
}

/// Subtrees dropped entirely: code, styling, and navigation boilerplate.
const SKIP_SUBTREE: &[&str] =
    &["script", "style", "noscript", "template", "head", "svg", "nav", "iframe", "object", "canvas"];

/// Tags that separate blocks of text; a newline keeps their content
/// from merging into one sentence.
const BLOCK_TAGS: &[&str] = &[
    "p", "div", "br", "hr", "li", "ul", "ol", "dl", "dt", "dd", "table", "thead", "tbody", "tfoot",
    "tr", "td", "th", "section", "article", "aside", "main", "figure", "figcaption", "blockquote",
    "pre", "form", "fieldset", "address", "details", "summary", "header", "footer", "caption",
];

/// Extracts sections, text, and links according to the media type.
/// Plain text becomes a single `body` section with no links.
pub fn extract_document(input: &str, media: MediaType) -> ExtractedDoc {
    match media {
        MediaType::PlainText => {
            let text = normalize_ws(input);
            let sections = if text.is_empty() {
                Vec::new()
            } else {
                vec![Section { id: "body".to_string(), text }]
            };
            ExtractedDoc { sections, links: Vec::new() }
        }
        MediaType::Html | MediaType::Xml => scan_markup(input),
    }
}

fn scan_markup(input: &str) -> ExtractedDoc {
    let mut doc = DocBuilder::new();
    let mut rest = input;
    while let Some(pos) = rest.find('<') {
        doc.text(&rest[..pos]);
        rest = consume_tag(&rest[pos..], &mut doc);
    }
    doc.text(rest);
    doc.finish()
}

/// Handles one `<...>` construct at the start of `rest` and returns the
/// remainder. Malformed constructs degrade to text or are skipped;
/// nothing is fatal.
fn consume_tag<'a>(rest: &'a str, doc: &mut DocBuilder) -> &'a str {
    debug_assert!(rest.starts_with('<'));
    let after = &rest[1..];

    if let Some(comment) = after.strip_prefix("!--") {
        return match comment.find("-->") {
            Some(end) => &comment[end + 3..],
            None => "",
        };
    }
    if let Some(cdata) = after.strip_prefix("![CDATA[") {
        return match cdata.find("]]>") {
            Some(end) => {
                doc.text(&cdata[..end]);
                &cdata[end + 3..]
            }
            None => {
                doc.text(cdata);
                ""
            }
        };
    }
    if after.starts_with('!') || after.starts_with('?') {
        // Doctype or processing instruction.
        return match after.find('>') {
            Some(end) => &after[end + 1..],
            None => "",
        };
    }

    let closing = after.starts_with('/');
    let name_start = if closing { &after[1..] } else { after };
    let name: String = name_start
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == ':')
        .collect::<String>()
        .to_ascii_lowercase();
    if name.is_empty() {
        // A stray '<' that opens no tag; keep it as text.
        doc.text("<");
        return after;
    }

    let Some((tag_body, remainder)) = split_tag(rest) else {
        // Unterminated tag at end of input; drop it.
        return "";
    };
    let self_closing = tag_body.trim_end().ends_with('/');

    if !closing && SKIP_SUBTREE.contains(&name.as_str()) && !self_closing {
        return skip_subtree(remainder, &name);
    }

    match name.as_str() {
        "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => {
            if closing {
                doc.end_heading();
            } else {
                doc.start_heading();
            }
        }
        "a" => {
            if closing {
                doc.end_link();
                doc.break_inline();
            } else {
                doc.break_inline();
                doc.start_link(attr_value(tag_body, "href").unwrap_or_default());
                if self_closing {
                    doc.end_link();
                }
            }
        }
        _ if BLOCK_TAGS.contains(&name.as_str()) => doc.break_block(),
        _ => doc.break_inline(),
    }
    remainder
}

/// Splits `<tag ...>` into its inside and the text after `>`, honoring
/// quoted attribute values that may contain `>`.
fn split_tag(rest: &str) -> Option<(&str, &str)> {
    let bytes = rest.as_bytes();
    let mut quote: Option<u8> = None;
    for (i, &b) in bytes.iter().enumerate().skip(1) {
        match quote {
            Some(q) => {
                if b == q {
                    quote = None;
                }
            }
            None => match b {
                b'"' | b'\'' => quote = Some(b),
                b'>' => return Some((&rest[1..i], &rest[i + 1..])),
                _ => {}
            },
        }
    }
    None
}

/// Drops everything up to and including the matching close tag. Raw
/// text elements (script, style) end at the first close tag per the
/// HTML parsing rules, which is also a safe approximation for the rest.
fn skip_subtree<'a>(rest: &'a str, name: &str) -> &'a str {
    let lower = rest.to_ascii_lowercase();
    let close = format!("</{name}");
    match lower.find(&close) {
        Some(pos) => match rest[pos..].find('>') {
            Some(end) => &rest[pos + end + 1..],
            None => "",
        },
        None => "",
    }
}

/// Case-insensitive attribute lookup inside a tag body. Handles
/// quoted and unquoted values.
fn attr_value(tag_body: &str, attr: &str) -> Option<String> {
    let lower = tag_body.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut search = 0;
    while let Some(pos) = lower[search..].find(attr) {
        let start = search + pos;
        search = start + attr.len();
        // Must be a standalone attribute name.
        let before_ok = start == 0 || bytes[start - 1].is_ascii_whitespace();
        let mut i = start + attr.len();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if !before_ok || i >= bytes.len() || bytes[i] != b'=' {
            continue;
        }
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() {
            return Some(String::new());
        }
        let raw = match bytes[i] {
            q @ (b'"' | b'\'') => {
                let vstart = i + 1;
                let vend = tag_body[vstart..].find(q as char).map(|p| vstart + p).unwrap_or(tag_body.len());
                &tag_body[vstart..vend]
            }
            _ => {
                let vstart = i;
                let vend = tag_body[vstart..]
                    .find(|c: char| c.is_ascii_whitespace())
                    .map(|p| vstart + p)
                    .unwrap_or(tag_body.len());
                &tag_body[vstart..vend]
            }
        };
        return Some(decode_entities(raw.trim()));
    }
    None
}

struct DocBuilder {
    sections: Vec<Section>,
    current_id: String,
    buf: String,
    heading: Option<String>,
    link: Option<(String, String)>,
    links: Vec<RawLink>,
}

impl DocBuilder {
    fn new() -> Self {
        Self {
            sections: Vec::new(),
            current_id: "body".to_string(),
            buf: String::new(),
            heading: None,
            link: None,
            links: Vec::new(),
        }
    }

    fn text(&mut self, raw: &str) {
        if raw.is_empty() {
            return;
        }
        let decoded = decode_entities(raw);
        if let Some((_, anchor)) = &mut self.link {
            anchor.push_str(&decoded);
        }
        match &mut self.heading {
            Some(h) => h.push_str(&decoded),
            None => self.buf.push_str(&decoded),
        }
    }

    fn break_block(&mut self) {
        match &mut self.heading {
            Some(h) => h.push(' '),
            None => self.buf.push('\n'),
        }
        if let Some((_, anchor)) = &mut self.link {
            anchor.push(' ');
        }
    }

    fn break_inline(&mut self) {
        match &mut self.heading {
            Some(h) => h.push(' '),
            None => self.buf.push(' '),
        }
        if let Some((_, anchor)) = &mut self.link {
            anchor.push(' ');
        }
    }

    fn start_heading(&mut self) {
        self.end_heading();
        self.flush_section();
        self.heading = Some(String::new());
    }

    fn end_heading(&mut self) {
        if let Some(h) = self.heading.take() {
            let title = collapse_inline_ws(&h);
            self.current_id =
                if title.is_empty() { format!("section-{}", self.sections.len() + 1) } else { title };
        }
    }

    fn start_link(&mut self, href: String) {
        self.end_link();
        self.link = Some((href, String::new()));
    }

    fn end_link(&mut self) {
        if let Some((href, anchor)) = self.link.take() {
            let href = href.trim().to_string();
            if !href.is_empty() {
                self.links.push(RawLink { href, anchor: collapse_inline_ws(&anchor) });
            }
        }
    }

    fn flush_section(&mut self) {
        let text = normalize_ws(&self.buf);
        self.buf.clear();
        if !text.is_empty() {
            self.sections.push(Section { id: self.current_id.clone(), text });
        }
    }

    fn finish(mut self) -> ExtractedDoc {
        self.end_link();
        self.end_heading();
        self.flush_section();
        ExtractedDoc { sections: self.sections, links: self.links }
    }
}

/// Collapses whitespace runs: runs containing a newline become one
/// newline (block boundary), all others a single space. Trims ends.
fn normalize_ws(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut run_has_newline = false;
    let mut in_run = false;
    for ch in s.chars() {
        if ch.is_whitespace() {
            in_run = true;
            run_has_newline |= ch == '\n';
        } else {
            if in_run && !out.is_empty() {
                out.push(if run_has_newline { '\n' } else { ' ' });
            }
            in_run = false;
            run_has_newline = false;
            out.push(ch);
        }
    }
    out
}

fn collapse_inline_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Decodes the common named entities plus numeric references. Unknown
/// entities pass through verbatim.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        // An entity reference is '&' + up to ~30 chars + ';'.
        let end = rest[1..].find(';').map(|p| p + 1);
        match end {
            Some(end) if end <= 32 => {
                let name = &rest[1..end];
                match decode_entity_name(name) {
                    Some(decoded) => {
                        out.push_str(&decoded);
                        rest = &rest[end + 1..];
                    }
                    None => {
                        out.push('&');
                        rest = &rest[1..];
                    }
                }
            }
            _ => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entity_name(name: &str) -> Option<String> {
    if let Some(num) = name.strip_prefix('#') {
        let code = if let Some(hex) = num.strip_prefix('x').or_else(|| num.strip_prefix('X')) {
            u32::from_str_radix(hex, 16).ok()?
        } else {
            num.parse::<u32>().ok()?
        };
        return char::from_u32(code).map(|c| c.to_string());
    }
    let decoded = match name {
        "amp" => "&",
        "lt" => "<",
        "gt" => ">",
        "quot" => "\"",
        "apos" => "'",
        "nbsp" => " ",
        "ndash" => "\u{2013}",
        "mdash" => "\u{2014}",
        "hellip" => "\u{2026}",
        "lsquo" => "\u{2018}",
        "rsquo" => "\u{2019}",
        "ldquo" => "\u{201c}",
        "rdquo" => "\u{201d}",
        "middot" => "\u{b7}",
        "copy" => "\u{a9}",
        "reg" => "\u{ae}",
        "trade" => "\u{2122}",
        "deg" => "\u{b0}",
        "plusmn" => "\u{b1}",
        "times" => "\u{d7}",
        "divide" => "\u{f7}",
        "alpha" => "\u{3b1}",
        "beta" => "\u{3b2}",
        "gamma" => "\u{3b3}",
        "delta" => "\u{3b4}",
        "epsilon" => "\u{3b5}",
        "mu" => "\u{3bc}",
        _ => return None,
    };
    Some(decoded.to_string())
}
