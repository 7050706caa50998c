//! Shared domain types: article identities, revisions, months.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{DateTime, Datelike, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Wikipedia language edition codes recognized by this crate, one per line.
/// Doubles as the interwiki-prefix table for the wikitext parser.
const LANGUAGE_CODES: &str = include_str!("../data/languages.txt");

fn language_set() -> &'static std::collections::BTreeSet<&'static str> {
    static SET: OnceLock<std::collections::BTreeSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        LANGUAGE_CODES
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

/// True if `code` is a Wikipedia edition code this crate knows about.
pub fn is_known_lang(code: &str) -> bool {
    language_set().contains(code)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown language edition code: {0:?}")]
    UnknownLang(String),
    #[error("title must be non-empty")]
    EmptyTitle,
    #[error("title {0:?} is not canonical (contains underscores)")]
    NonCanonicalTitle(String),
    #[error("invalid month {0:?}, expected YYYY-MM")]
    InvalidMonth(String),
    #[error("month range start {start} is after end {end}")]
    InvertedRange { start: Month, end: Month },
}

/// Identity of one article in one language edition.
///
/// Titles are stored in canonical form: spaces rather than underscores,
/// first letter case-folded per MediaWiki rules. Use
/// [`crate::wikitext::canonicalize_title`] to canonicalize raw input first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArticleRef {
    lang: String,
    title: String,
}

impl ArticleRef {
    pub fn new(lang: &str, title: &str) -> Result<Self, ModelError> {
        if !is_known_lang(lang) {
            return Err(ModelError::UnknownLang(lang.to_string()));
        }
        if title.is_empty() {
            return Err(ModelError::EmptyTitle);
        }
        if title.contains('_') {
            return Err(ModelError::NonCanonicalTitle(title.to_string()));
        }
        Ok(ArticleRef { lang: lang.to_string(), title: title.to_string() })
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn title(&self) -> &str {
        &self.title
    }
}

impl fmt::Display for ArticleRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lang, self.title)
    }
}

/// One stored revision of an article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionRecord {
    pub rev_id: u64,
    pub timestamp: DateTime<Utc>,
    pub size_bytes: u64,
    /// Full page source at this revision; present iff fetched with content.
    pub wikitext: Option<String>,
}

/// Current inter-language links of one article: language code -> title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangLinkMap {
    pub source: ArticleRef,
    pub links: BTreeMap<String, String>,
}

impl LangLinkMap {
    pub fn new(source: ArticleRef, mut links: BTreeMap<String, String>) -> Self {
        // An article never inter-language-links to its own edition.
        links.remove(source.lang());
        LangLinkMap { source, links }
    }
}

/// A UTC calendar month, the sampling resolution for all constructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Month {
    year: i32,
    month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Month { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    pub fn of(ts: DateTime<Utc>) -> Self {
        Month { year: ts.year(), month: ts.month() }
    }

    pub fn next(&self) -> Self {
        if self.month == 12 {
            Month { year: self.year + 1, month: 1 }
        } else {
            Month { year: self.year, month: self.month + 1 }
        }
    }

    /// First instant of the month, 00:00:00 UTC on day 1.
    pub fn start_instant(&self) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(self.year, self.month, 1, 0, 0, 0).unwrap()
    }

    /// Month boundary: 23:59:59 UTC on the last calendar day.
    pub fn end_instant(&self) -> DateTime<Utc> {
        self.next().start_instant() - chrono::Duration::seconds(1)
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidMonth(s.to_string());
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        Month::new(year, month).ok_or_else(bad)
    }
}

/// Inclusive month range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthRange {
    pub start: Month,
    pub end: Month,
}

impl MonthRange {
    pub fn new(start: Month, end: Month) -> Result<Self, ModelError> {
        if start > end {
            return Err(ModelError::InvertedRange { start, end });
        }
        Ok(MonthRange { start, end })
    }

    pub fn contains(&self, m: Month) -> bool {
        self.start <= m && m <= self.end
    }

    pub fn iter(&self) -> impl Iterator<Item = Month> {
        let end = self.end;
        let mut cur = Some(self.start);
        std::iter::from_fn(move || {
            let m = cur?;
            cur = if m < end { Some(m.next()) } else { None };
            Some(m)
        })
    }

    pub fn len(&self) -> usize {
        let months =
            (self.end.year - self.start.year) * 12 + self.end.month as i32 - self.start.month as i32;
        months as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false // start <= end is enforced at construction
    }
}

impl fmt::Display for MonthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(y: i32, mo: u32) -> Month {
        Month::new(y, mo).unwrap()
    }

    #[test]
    fn article_ref_rejects_bad_input() {
        assert_eq!(ArticleRef::new("xx-bogus", "A"), Err(ModelError::UnknownLang("xx-bogus".into())));
        assert_eq!(ArticleRef::new("en", ""), Err(ModelError::EmptyTitle));
        assert!(matches!(ArticleRef::new("en", "Arab_Spring"), Err(ModelError::NonCanonicalTitle(_))));
        assert!(ArticleRef::new("en", "Arab Spring").is_ok());
        assert!(ArticleRef::new("ar", "الربيع العربي").is_ok());
    }

    #[test]
    fn langlink_map_drops_self_edition() {
        let source = ArticleRef::new("en", "Arab Spring").unwrap();
        let mut links = BTreeMap::new();
        links.insert("en".to_string(), "Arab Spring".to_string());
        links.insert("ar".to_string(), "الربيع العربي".to_string());
        let map = LangLinkMap::new(source, links);
        assert!(!map.links.contains_key("en"));
        assert_eq!(map.links.get("ar").map(String::as_str), Some("الربيع العربي"));
    }

    #[test]
    fn month_boundaries() {
        assert_eq!(m(2011, 1).end_instant().to_rfc3339(), "2011-01-31T23:59:59+00:00");
        assert_eq!(m(2012, 2).end_instant().to_rfc3339(), "2012-02-29T23:59:59+00:00"); // leap year
        assert_eq!(m(2011, 12).next(), m(2012, 1));
    }

    #[test]
    fn month_parse_and_display_round_trip() {
        let parsed: Month = "2014-03".parse().unwrap();
        assert_eq!(parsed, m(2014, 3));
        assert_eq!(parsed.to_string(), "2014-03");
        assert!("2014-13".parse::<Month>().is_err());
        assert!("2014".parse::<Month>().is_err());
    }

    #[test]
    fn range_iteration_spans_year_boundary() {
        let r = MonthRange::new(m(2011, 11), m(2012, 2)).unwrap();
        let months: Vec<String> = r.iter().map(|m| m.to_string()).collect();
        assert_eq!(months, vec!["2011-11", "2011-12", "2012-01", "2012-02"]);
        assert_eq!(r.len(), 4);
        assert!(MonthRange::new(m(2012, 1), m(2011, 1)).is_err());
    }
}
