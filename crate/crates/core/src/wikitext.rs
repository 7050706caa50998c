//! Outlink extraction and title canonicalization for raw wikitext.
//!
//! Extraction is total: malformed markup yields best-effort results, never an
//! error. Links inside template arguments are extracted (a `[[...]]` in a
//! template argument renders as a link in the common case); links inside
//! `<nowiki>`, `<!-- -->`, and `<pre>` spans are not. Templates are not
//! expanded, so links contributed only by template definitions are invisible;
//! this is a known measurement bias, not a bug.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use crate::model::is_known_lang;

/// Built-in namespace alias table for en and ar; extensible via
/// [`AliasTable::parse`] with the same `lang<TAB>alias<TAB>class` format.
const NAMESPACE_ALIASES: &str = include_str!("../data/namespaces.tsv");

/// Interwiki prefixes that point at sister projects rather than language
/// editions. Language-edition prefixes come from the shared language table.
const PROJECT_PREFIXES: &[&str] = &[
    "b",
    "c",
    "commons",
    "d",
    "f",
    "foundation",
    "incubator",
    "m",
    "mediawikiwiki",
    "meta",
    "mw",
    "n",
    "oldwikisource",
    "q",
    "s",
    "species",
    "v",
    "voy",
    "w",
    "wikibooks",
    "wikidata",
    "wikifunctions",
    "wikinews",
    "wikiquote",
    "wikisource",
    "wikispecies",
    "wikiversity",
    "wikivoyage",
    "wikt",
    "wiktionary",
    "wmf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NamespaceClass {
    Article,
    Category,
    File,
    Portal,
    Template,
    Other,
}

impl NamespaceClass {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "Article" => Some(NamespaceClass::Article),
            "Category" => Some(NamespaceClass::Category),
            "File" => Some(NamespaceClass::File),
            "Portal" => Some(NamespaceClass::Portal),
            "Template" => Some(NamespaceClass::Template),
            "Other" => Some(NamespaceClass::Other),
            _ => None,
        }
    }
}

/// Classification of a raw `[[...]]` target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    Namespace(NamespaceClass),
    /// Language-edition or sister-project prefix (`en:`, `commons:`).
    Interwiki,
    /// URL target; not a wiki link.
    External,
}

/// One link candidate found in wikitext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outlink {
    /// Canonical target title; empty only when `anchor_only`.
    pub target: String,
    pub namespace_class: NamespaceClass,
    /// Link of the form `[[#section]]`, pointing within the same page.
    pub anchor_only: bool,
}

/// The Article-namespace outlinks of one revision, with set semantics.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutlinkSet {
    pub titles: BTreeSet<String>,
    /// Revision the set was extracted from, when known.
    pub source_rev: Option<u64>,
}

impl OutlinkSet {
    pub fn len(&self) -> usize {
        self.titles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.titles.is_empty()
    }

    pub fn contains(&self, title: &str) -> bool {
        self.titles.contains(title)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.titles.iter().map(String::as_str)
    }
}

/// Namespace alias lookup: `(lang, normalized alias) -> class`, with the
/// canonical English names as a fallback for every edition.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    map: BTreeMap<(String, String), NamespaceClass>,
}

impl AliasTable {
    /// Parse `lang<TAB>alias<TAB>class` records; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (lang, alias, class) = match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(a), Some(c)) => (l, a, c),
                _ => return Err(format!("line {}: expected lang<TAB>alias<TAB>class", idx + 1)),
            };
            let class = NamespaceClass::from_name(class)
                .ok_or_else(|| format!("line {}: unknown class {:?}", idx + 1, class))?;
            map.insert((lang.to_string(), normalize_alias(alias)), class);
        }
        Ok(AliasTable { map })
    }

    /// The table shipped with the crate (en + ar).
    pub fn builtin() -> &'static AliasTable {
        static TABLE: OnceLock<AliasTable> = OnceLock::new();
        TABLE.get_or_init(|| AliasTable::parse(NAMESPACE_ALIASES).expect("builtin alias table"))
    }

    /// Merge records from another table, overriding on conflict.
    pub fn extend_from(&mut self, other: AliasTable) {
        self.map.extend(other.map);
    }

    pub fn lookup(&self, lang: &str, alias: &str) -> Option<NamespaceClass> {
        let norm = normalize_alias(alias);
        self.map
            .get(&(lang.to_string(), norm.clone()))
            .or_else(|| self.map.get(&("en".to_string(), norm)))
            .copied()
    }
}

fn normalize_alias(alias: &str) -> String {
    alias
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Classify a raw bracket target by namespace, interwiki prefix, or URL.
pub fn classify_link(raw_target: &str, lang: &str) -> LinkClass {
    classify_link_with(raw_target, lang, AliasTable::builtin())
}

pub fn classify_link_with(raw_target: &str, lang: &str, aliases: &AliasTable) -> LinkClass {
    let t = raw_target.trim();
    // A leading colon escapes into the named namespace or interwiki without
    // the usual side effect (categorization, thumbnail); the target is the same.
    let t = t.strip_prefix(':').map(str::trim).unwrap_or(t);
    let lower_head: String = t.chars().take(8).collect::<String>().to_lowercase();
    if lower_head.starts_with("http://") || lower_head.starts_with("https://") || t.starts_with("//") {
        return LinkClass::External;
    }
    if let Some(i) = t.find(':') {
        let prefix = &t[..i];
        if let Some(class) = aliases.lookup(lang, prefix) {
            return LinkClass::Namespace(class);
        }
        let norm = normalize_alias(prefix);
        if is_known_lang(&norm) || PROJECT_PREFIXES.contains(&norm.as_str()) {
            return LinkClass::Interwiki;
        }
    }
    LinkClass::Namespace(NamespaceClass::Article)
}

/// Canonicalize a raw title: percent and HTML-entity sequences decoded to a
/// fixpoint, underscores to spaces, whitespace runs collapsed, first letter
/// case-folded upward. Idempotent; scripts without case are unchanged.
pub fn canonicalize_title(raw: &str, _lang: &str) -> String {
    let mut s = raw.to_string();
    for _ in 0..16 {
        let next = decode_percent_once(&decode_entities_once(&s));
        if next == s {
            break;
        }
        s = next;
    }
    let spaced = s.replace('_', " ");
    let collapsed = spaced.split_whitespace().collect::<Vec<_>>().join(" ");
    uppercase_first(collapsed)
}

fn uppercase_first(s: String) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => {
            let mut out: String = c.to_uppercase().collect();
            out.push_str(chars.as_str());
            out
        }
        None => s,
    }
}

fn decode_percent_once(s: &str) -> String {
    if !s.contains('%') {
        return s.to_string();
    }
    let bytes = s.as_bytes();
    let mut out: Vec<u8> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    let mut decoded_any = false;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            let hex = &s[i + 1..i + 3];
            if let (true, Ok(v)) = (hex.bytes().all(|b| b.is_ascii_hexdigit()), u8::from_str_radix(hex, 16)) {
                out.push(v);
                decoded_any = true;
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    if !decoded_any {
        return s.to_string();
    }
    // Only accept the decode if it still forms valid UTF-8.
    String::from_utf8(out).unwrap_or_else(|_| s.to_string())
}

fn decode_entities_once(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let semicolon = rest[..rest.len().min(12)].find(';');
        let Some(semi) = semicolon else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let body = &rest[1..semi];
        let decoded = decode_entity_body(body);
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entity_body(body: &str) -> Option<char> {
    let c = match body {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        _ => {
            let code = if let Some(hex) = body.strip_prefix("#x").or_else(|| body.strip_prefix("#X")) {
                u32::from_str_radix(hex, 16).ok()?
            } else if let Some(dec) = body.strip_prefix('#') {
                dec.parse::<u32>().ok()?
            } else {
                return None;
            };
            char::from_u32(code)?
        }
    };
    // Titles never contain raw control characters; leave those encoded.
    if c.is_control() { None } else { Some(c) }
}

/// Byte ranges covered by `<nowiki>`, `<!-- -->`, and `<pre>` spans.
fn masked_spans(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let comment = find_ci(bytes, b"<!--", i);
        let nowiki = find_tag_open(bytes, b"<nowiki", i);
        let pre = find_tag_open(bytes, b"<pre", i);
        let Some((start, kind)) = [comment.map(|p| (p, 0u8)), nowiki.map(|p| (p, 1)), pre.map(|p| (p, 2))]
            .into_iter()
            .flatten()
            .min()
        else {
            break;
        };
        let end = match kind {
            0 => find_ci(bytes, b"-->", start + 4).map(|p| p + 3).unwrap_or(bytes.len()),
            _ => {
                let close: &[u8] = if kind == 1 { b"</nowiki" } else { b"</pre" };
                match tag_span_end(bytes, start, close) {
                    Some(e) => e,
                    None => bytes.len(),
                }
            }
        };
        spans.push((start, end));
        i = end.max(start + 1);
    }
    spans
}

/// Position of an opening tag whose name is followed by `>`, `/`, or space.
fn find_tag_open(bytes: &[u8], tag: &[u8], from: usize) -> Option<usize> {
    let mut i = from;
    while let Some(p) = find_ci(bytes, tag, i) {
        match bytes.get(p + tag.len()) {
            Some(b'>') | Some(b'/') | Some(b' ') | Some(b'\t') | Some(b'\n') | Some(b'\r') => {
                return Some(p)
            }
            None => return None,
            _ => i = p + 1,
        }
    }
    None
}

/// End (exclusive) of a tag span opened at `start`; handles self-closing tags.
fn tag_span_end(bytes: &[u8], start: usize, close: &[u8]) -> Option<usize> {
    let gt = find_byte(bytes, b'>', start)?;
    if gt > start && bytes[gt - 1] == b'/' {
        return Some(gt + 1); // self-closing, e.g. <nowiki/>
    }
    let close_pos = find_ci(bytes, close, gt + 1)?;
    let close_gt = find_byte(bytes, b'>', close_pos)?;
    Some(close_gt + 1)
}

fn find_byte(bytes: &[u8], needle: u8, from: usize) -> Option<usize> {
    bytes[from.min(bytes.len())..].iter().position(|&b| b == needle).map(|p| p + from)
}

/// ASCII-case-insensitive substring search; needle must be ASCII.
fn find_ci(bytes: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= bytes.len() || needle.is_empty() || bytes.len() - from < needle.len() {
        return None;
    }
    (from..=bytes.len() - needle.len()).find(|&p| {
        bytes[p..p + needle.len()]
            .iter()
            .zip(needle)
            .all(|(a, b)| a.eq_ignore_ascii_case(b))
    })
}

fn is_masked(pos: usize, len: usize, spans: &[(usize, usize)]) -> bool {
    spans.iter().any(|&(s, e)| pos < e && pos + len > s)
}

fn find_outside(bytes: &[u8], needle: &[u8], from: usize, spans: &[(usize, usize)]) -> Option<usize> {
    let mut i = from;
    loop {
        let p = find_sub(bytes, needle, i)?;
        if is_masked(p, needle.len(), spans) {
            i = p + 1;
        } else {
            return Some(p);
        }
    }
}

fn find_sub(bytes: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= bytes.len() || bytes.len() - from < needle.len() {
        return None;
    }
    (from..=bytes.len() - needle.len()).find(|&p| &bytes[p..p + needle.len()] == needle)
}

/// Every `[[...]]` candidate outside masked spans, classified and
/// canonicalized. Interwiki and URL targets are dropped; duplicates kept.
pub fn extract_links(wikitext: &str, lang: &str) -> Vec<Outlink> {
    extract_links_with(wikitext, lang, AliasTable::builtin())
}

pub fn extract_links_with(wikitext: &str, lang: &str, aliases: &AliasTable) -> Vec<Outlink> {
    let bytes = wikitext.as_bytes();
    let spans = masked_spans(wikitext);
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(p) = find_outside(bytes, b"[[", from, &spans) {
        from = p + 2;
        let Some(q) = find_outside(bytes, b"]]", p + 2, &spans) else { break };
        let inner = &wikitext[p + 2..q];
        let target_raw = inner.split('|').next().unwrap_or("");
        // An unclosed bracket or a newline inside the target is not a link;
        // any [[ further in is picked up by the continuing scan.
        if target_raw.contains("[[") || target_raw.contains('\n') {
            continue;
        }
        let (target_part, anchor_only) = match target_raw.find('#') {
            Some(0) => ("", true),
            Some(i) => (&target_raw[..i], false),
            None => (target_raw, false),
        };
        if anchor_only {
            out.push(Outlink {
                target: String::new(),
                namespace_class: NamespaceClass::Article,
                anchor_only: true,
            });
            continue;
        }
        match classify_link_with(target_part, lang, aliases) {
            LinkClass::Namespace(class) => {
                let stripped = target_part.trim().strip_prefix(':').unwrap_or(target_part.trim());
                let target = canonicalize_title(stripped, lang);
                if target.is_empty() {
                    continue;
                }
                out.push(Outlink { target, namespace_class: class, anchor_only: false });
            }
            LinkClass::Interwiki | LinkClass::External => continue,
        }
    }
    out
}

/// Article-namespace outlinks of one revision, as a set.
pub fn extract_outlinks(wikitext: &str, lang: &str) -> OutlinkSet {
    extract_outlinks_with(wikitext, lang, AliasTable::builtin())
}

pub fn extract_outlinks_with(wikitext: &str, lang: &str, aliases: &AliasTable) -> OutlinkSet {
    let titles = extract_links_with(wikitext, lang, aliases)
        .into_iter()
        .filter(|l| l.namespace_class == NamespaceClass::Article && !l.anchor_only)
        .map(|l| l.target)
        .collect();
    OutlinkSet { titles, source_rev: None }
}

/// Count of bracketed external links (`[http://...]`, `[https://...]`,
/// `[//...]`) outside masked spans; a diagnostics figure only.
pub fn count_external_links(wikitext: &str) -> usize {
    let bytes = wikitext.as_bytes();
    let spans = masked_spans(wikitext);
    let mut count = 0;
    let mut from = 0;
    while let Some(p) = find_outside(bytes, b"[", from, &spans) {
        from = p + 1;
        if bytes.get(p + 1) == Some(&b'[') {
            from = p + 2;
            continue;
        }
        let rest = &wikitext[p + 1..];
        let head: String = rest.chars().take(8).collect::<String>().to_ascii_lowercase();
        if head.starts_with("http://") || head.starts_with("https://") || head.starts_with("//") {
            count += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn titles(wikitext: &str, lang: &str) -> Vec<String> {
        extract_outlinks(wikitext, lang).titles.into_iter().collect()
    }

    #[test]
    fn plain_link_extracted() {
        assert_eq!(titles("[[2011 Egyptian revolution]] began", "en"), vec!["2011 Egyptian revolution"]);
    }

    #[test]
    fn empty_input_yields_empty_set() {
        assert!(extract_outlinks("", "en").is_empty());
    }

    #[test]
    fn pipe_label_discarded_and_anchor_stripped() {
        assert_eq!(titles("[[Egypt|the country]] and [[Syria#History]]", "en"), vec!["Egypt", "Syria"]);
    }

    #[test]
    fn anchor_only_link_excluded_from_set() {
        assert!(titles("[[#Background]]", "en").is_empty());
        let links = extract_links("[[#Background]]", "en");
        assert_eq!(links.len(), 1);
        assert!(links[0].anchor_only);
        assert!(links[0].target.is_empty());
    }

    #[test]
    fn namespaces_and_interwiki_excluded() {
        let text = "[[ملف:x.png]] [[تصنيف:y]] [[en:Arab Spring]] [[الربيع العربي]]";
        assert_eq!(titles(text, "ar"), vec!["الربيع العربي"]);
    }

    #[test]
    fn links_inside_template_args_extracted() {
        let text = "{{Infobox|participants=[[Tunisia]] and [[Egypt|Egyptians]]}}";
        assert_eq!(titles(text, "en"), vec!["Egypt", "Tunisia"]);
    }

    #[test]
    fn nowiki_comment_pre_spans_masked() {
        let text = "[[Kept]] <nowiki>[[Hidden1]]</nowiki> <!-- [[Hidden2]] --> <pre>[[Hidden3]]</pre> [[Also kept]]";
        assert_eq!(titles(text, "en"), vec!["Also kept", "Kept"]);
    }

    #[test]
    fn self_closing_nowiki_masks_nothing_else() {
        assert_eq!(titles("<nowiki/>[[Visible]]", "en"), vec!["Visible"]);
    }

    #[test]
    fn unterminated_comment_masks_to_end() {
        assert!(titles("before <!-- [[Hidden]]", "en").is_empty());
    }

    #[test]
    fn malformed_brackets_best_effort() {
        assert!(titles("[[Unclosed", "en").is_empty());
        assert_eq!(titles("[[A [[B]]", "en"), vec!["B"]);
        assert_eq!(titles("[[A\nB]] [[C]]", "en"), vec!["C"]);
    }

    #[test]
    fn nested_file_caption_link_recovered() {
        let text = "[[File:Tahrir.jpg|thumb|Protests at [[Tahrir Square]] in 2011]]";
        assert_eq!(titles(text, "en"), vec!["Tahrir Square"]);
        let links = extract_links(text, "en");
        assert!(links.iter().any(|l| l.namespace_class == NamespaceClass::File));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_link("بوابة:الشرق الأوسط", "ar"), LinkClass::Namespace(NamespaceClass::Portal));
        assert_eq!(classify_link("Arab Spring", "en"), LinkClass::Namespace(NamespaceClass::Article));
        assert_eq!(classify_link("Category:Protests", "en"), LinkClass::Namespace(NamespaceClass::Category));
        assert_eq!(classify_link("en:Arab Spring", "ar"), LinkClass::Interwiki);
        assert_eq!(classify_link("wikt:spring", "en"), LinkClass::Interwiki);
        assert_eq!(classify_link("https://example.org", "en"), LinkClass::External);
        // Unknown prefix stays an article title.
        assert_eq!(classify_link("Star Trek: Voyager", "en"), LinkClass::Namespace(NamespaceClass::Article));
        // Canonical English names work on every edition.
        assert_eq!(classify_link("Category:Protests", "ar"), LinkClass::Namespace(NamespaceClass::Category));
        // Leading colon escapes but keeps the class.
        assert_eq!(classify_link(":Category:Protests", "en"), LinkClass::Namespace(NamespaceClass::Category));
    }

    #[test]
    fn canonicalize_rules() {
        assert_eq!(canonicalize_title("Arab_Spring", "en"), "Arab Spring");
        assert_eq!(canonicalize_title("arab Spring", "en"), "Arab Spring");
        assert_eq!(canonicalize_title("الربيع العربي", "ar"), "الربيع العربي");
        assert_eq!(canonicalize_title("  Tunisia  ", "en"), "Tunisia");
        assert_eq!(canonicalize_title("a__b   c", "en"), "A b c");
        assert_eq!(canonicalize_title("Zine%20El%20Abidine", "en"), "Zine El Abidine");
        assert_eq!(canonicalize_title("AT&amp;T", "en"), "AT&T");
        assert_eq!(canonicalize_title("", "en"), "");
    }

    #[test]
    fn canonicalize_idempotent_on_tricky_inputs() {
        for raw in ["%2541", "&amp;amp;", "a_%20_b", "ß-case", "&#1575;&#1604;", "100%25 Club", "%FF"] {
            let once = canonicalize_title(raw, "en");
            let twice = canonicalize_title(&once, "en");
            assert_eq!(once, twice, "not idempotent for {raw:?}");
        }
    }

    #[test]
    fn external_link_count() {
        let text = "[https://a.example x] [[Article]] [http://b.example] <nowiki>[https://c.example]</nowiki> [not a link]";
        assert_eq!(count_external_links(text), 2);
    }

    #[test]
    fn duplicates_collapse_to_set() {
        assert_eq!(titles("[[Egypt]] [[Egypt]] [[egypt]]", "en"), vec!["Egypt"]);
    }
}
