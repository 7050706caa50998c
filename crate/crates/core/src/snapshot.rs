//! Monthly snapshot construction and the on-disk revision cache.
//!
//! A snapshot is the last revision on or before a month boundary (23:59:59
//! UTC on the last calendar day). Months with no new revision carry the
//! previous revision forward; months before an article's first revision are
//! absent. The cache stores one length-prefixed, checksummed record per
//! revision, append-only, so an interrupted fetch never corrupts earlier
//! records silently.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ArticleRef, Month, MonthRange, RevisionRecord};
use crate::wikitext::{extract_outlinks_with, AliasTable, OutlinkSet};

/// One article month: the revision in force at the month boundary plus its
/// extracted outlinks.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub article: ArticleRef,
    pub month: Month,
    pub rev: RevisionRecord,
    pub outlinks: OutlinkSet,
}

/// Contiguous monthly snapshots of one article.
#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    pub article: ArticleRef,
    pub snapshots: Vec<Snapshot>,
    pub span: MonthRange,
}

impl SnapshotSeries {
    pub fn months(&self) -> impl Iterator<Item = Month> + '_ {
        self.snapshots.iter().map(|s| s.month)
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("series is never empty")
    }
}

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("article {0} has no revision on or before {1}")]
    NoRevisionInSpan(ArticleRef, Month),
    #[error("revisions must be ascending by timestamp (offending rev {0})")]
    UnorderedRevisions(u64),
    #[error("revision {0} was fetched without content; outlinks cannot be derived")]
    MissingContent(u64),
}

/// Collapse a revision history into the monthly series covering `span`.
pub fn build_series(
    revisions: &[RevisionRecord],
    article: &ArticleRef,
    span: MonthRange,
) -> Result<SnapshotSeries, SeriesError> {
    build_series_with(revisions, article, span, AliasTable::builtin())
}

pub fn build_series_with(
    revisions: &[RevisionRecord],
    article: &ArticleRef,
    span: MonthRange,
    aliases: &AliasTable,
) -> Result<SnapshotSeries, SeriesError> {
    for pair in revisions.windows(2) {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(SeriesError::UnorderedRevisions(pair[1].rev_id));
        }
    }
    let first = revisions
        .first()
        .filter(|r| r.timestamp <= span.end.end_instant())
        .ok_or_else(|| SeriesError::NoRevisionInSpan(article.clone(), span.end))?;
    let start = Month::of(first.timestamp).max(span.start);

    // Outlinks are identical for carried-forward months; extract once per rev.
    let mut outlink_cache: BTreeMap<u64, OutlinkSet> = BTreeMap::new();
    let mut snapshots = Vec::new();
    let mut idx = 0usize; // last revision with timestamp <= month end
    let effective = MonthRange::new(start, span.end).expect("start clamped to span");
    for month in effective.iter() {
        let boundary = month.end_instant();
        while idx + 1 < revisions.len() && revisions[idx + 1].timestamp <= boundary {
            idx += 1;
        }
        let rev = &revisions[idx];
        debug_assert!(rev.timestamp <= boundary);
        let outlinks = match outlink_cache.get(&rev.rev_id) {
            Some(cached) => cached.clone(),
            None => {
                let text = rev.wikitext.as_deref().ok_or(SeriesError::MissingContent(rev.rev_id))?;
                let mut set = extract_outlinks_with(text, article.lang(), aliases);
                set.source_rev = Some(rev.rev_id);
                outlink_cache.insert(rev.rev_id, set.clone());
                set
            }
        };
        snapshots.push(Snapshot { article: article.clone(), month, rev: rev.clone(), outlinks });
    }
    Ok(SnapshotSeries { article: article.clone(), snapshots, span: effective })
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no cached revisions for {0}")]
    CacheMiss(ArticleRef),
    #[error("corrupt record in cache for {0}: {1}")]
    CorruptRecord(ArticleRef, String),
    #[error("cache for {0} is locked by another writer")]
    Locked(ArticleRef),
    #[error("cache io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache metadata error: {0}")]
    Meta(String),
    #[error("put requires ascending revisions (offending rev {0})")]
    UnorderedRevisions(u64),
}

/// Sidecar metadata for one cached article.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StoreMeta {
    pub lang: String,
    pub title: String,
    pub span: MonthRange,
    pub record_count: u64,
    /// Deleted/suppressed revisions skipped during fetch.
    pub skipped_hidden: u64,
}

const RECORD_CHECKSUM_LEN: usize = 8;

/// Append-only revision cache under `{root}/{lang}/{title-hash}/`.
#[derive(Debug, Clone)]
pub struct RevisionStore {
    root: PathBuf,
}

impl RevisionStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RevisionStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn article_dir(&self, article: &ArticleRef) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(article.title().as_bytes());
        let digest = hasher.finalize();
        let hash: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        self.root.join(article.lang()).join(hash)
    }

    fn data_path(&self, article: &ArticleRef) -> PathBuf {
        self.article_dir(article).join("revisions.dat")
    }

    fn meta_path(&self, article: &ArticleRef) -> PathBuf {
        self.article_dir(article).join("meta.json")
    }

    /// Store a full revision list, replacing any previous data.
    pub fn put(
        &self,
        article: &ArticleRef,
        revisions: &[RevisionRecord],
        span: MonthRange,
        skipped_hidden: u64,
    ) -> Result<(), StoreError> {
        for pair in revisions.windows(2) {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(StoreError::UnorderedRevisions(pair[1].rev_id));
            }
        }
        let mut writer = self.writer(article)?;
        for rev in revisions {
            writer.append(rev)?;
        }
        writer.finish(span, skipped_hidden)?;
        Ok(())
    }

    /// Open an exclusive writer; records become visible once `finish` runs.
    pub fn writer(&self, article: &ArticleRef) -> Result<StoreWriter, StoreError> {
        let dir = self.article_dir(article);
        fs::create_dir_all(&dir)?;
        let lock_path = dir.join(".lock");
        let lock = match fs::OpenOptions::new().write(true).create_new(true).open(&lock_path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(StoreError::Locked(article.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        drop(lock);
        let tmp_path = dir.join("revisions.dat.tmp");
        let file = fs::File::create(&tmp_path)?;
        Ok(StoreWriter {
            article: article.clone(),
            dir,
            lock_path,
            tmp_path,
            file: Some(std::io::BufWriter::new(file)),
            count: 0,
        })
    }

    /// All cached revisions, in stored order, with integrity verified.
    pub fn get(&self, article: &ArticleRef) -> Result<(Vec<RevisionRecord>, StoreMeta), StoreError> {
        let data_path = self.data_path(article);
        if !data_path.exists() {
            return Err(StoreError::CacheMiss(article.clone()));
        }
        let meta = self.meta(article)?;
        let mut file = fs::File::open(&data_path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        let corrupt = |what: &str| StoreError::CorruptRecord(article.clone(), what.to_string());
        let mut revisions = Vec::new();
        let mut pos = 0usize;
        while pos < buf.len() {
            if pos + 4 + RECORD_CHECKSUM_LEN > buf.len() {
                return Err(corrupt("truncated record header"));
            }
            let len = u32::from_le_bytes(buf[pos..pos + 4].try_into().unwrap()) as usize;
            let payload_start = pos + 4 + RECORD_CHECKSUM_LEN;
            let payload_end = payload_start + len;
            if payload_end > buf.len() {
                return Err(corrupt("truncated record payload"));
            }
            let stored = &buf[pos + 4..payload_start];
            let payload = &buf[payload_start..payload_end];
            if record_checksum(payload) != stored {
                return Err(corrupt("checksum mismatch"));
            }
            let rev: RevisionRecord =
                serde_json::from_slice(payload).map_err(|e| corrupt(&format!("bad payload: {e}")))?;
            revisions.push(rev);
            pos = payload_end;
        }
        if revisions.len() as u64 != meta.record_count {
            return Err(corrupt("record count does not match metadata"));
        }
        Ok((revisions, meta))
    }

    pub fn meta(&self, article: &ArticleRef) -> Result<StoreMeta, StoreError> {
        let meta_path = self.meta_path(article);
        if !meta_path.exists() {
            // Data without metadata means a write never finished.
            if self.data_path(article).exists() {
                return Err(StoreError::CorruptRecord(article.clone(), "metadata missing".into()));
            }
            return Err(StoreError::CacheMiss(article.clone()));
        }
        let text = fs::read_to_string(&meta_path)?;
        serde_json::from_str(&text).map_err(|e| StoreError::Meta(e.to_string()))
    }

    /// True when the cache already covers `span` for this article.
    pub fn covers(&self, article: &ArticleRef, span: MonthRange) -> bool {
        match self.meta(article) {
            Ok(meta) => meta.span.start <= span.start && span.end <= meta.span.end,
            Err(_) => false,
        }
    }

    /// Store an auxiliary JSON document (langlinks, redirects) beside the
    /// revision data.
    pub fn put_json<T: Serialize>(
        &self,
        article: &ArticleRef,
        name: &str,
        value: &T,
    ) -> Result<(), StoreError> {
        let dir = self.article_dir(article);
        fs::create_dir_all(&dir)?;
        let text = serde_json::to_string_pretty(value).map_err(|e| StoreError::Meta(e.to_string()))?;
        fs::write(dir.join(name), text)?;
        Ok(())
    }

    pub fn get_json<T: for<'de> Deserialize<'de>>(
        &self,
        article: &ArticleRef,
        name: &str,
    ) -> Result<T, StoreError> {
        let path = self.article_dir(article).join(name);
        if !path.exists() {
            return Err(StoreError::CacheMiss(article.clone()));
        }
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| StoreError::Meta(e.to_string()))
    }
}

fn record_checksum(payload: &[u8]) -> [u8; RECORD_CHECKSUM_LEN] {
    let mut hasher = Sha256::new();
    hasher.update(payload);
    let digest = hasher.finalize();
    digest[..RECORD_CHECKSUM_LEN].try_into().unwrap()
}

/// Exclusive writer for one article's records. The lock file is removed and
/// the data made visible only on `finish`; dropping early discards the write.
pub struct StoreWriter {
    article: ArticleRef,
    dir: PathBuf,
    lock_path: PathBuf,
    tmp_path: PathBuf,
    file: Option<std::io::BufWriter<fs::File>>,
    count: u64,
}

impl StoreWriter {
    pub fn append(&mut self, rev: &RevisionRecord) -> Result<(), StoreError> {
        let payload = serde_json::to_vec(rev).map_err(|e| StoreError::Meta(e.to_string()))?;
        let file = self.file.as_mut().expect("writer already finished");
        file.write_all(&(payload.len() as u32).to_le_bytes())?;
        file.write_all(&record_checksum(&payload))?;
        file.write_all(&payload)?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self, span: MonthRange, skipped_hidden: u64) -> Result<(), StoreError> {
        let file = self.file.take().expect("writer already finished");
        file.into_inner().map_err(|e| StoreError::Io(e.into_error()))?.sync_all()?;
        let meta = StoreMeta {
            lang: self.article.lang().to_string(),
            title: self.article.title().to_string(),
            span,
            record_count: self.count,
            skipped_hidden,
        };
        let meta_text = serde_json::to_string_pretty(&meta).map_err(|e| StoreError::Meta(e.to_string()))?;
        fs::rename(&self.tmp_path, self.dir.join("revisions.dat"))?;
        fs::write(self.dir.join("meta.json"), meta_text)?;
        Ok(())
    }
}

impl Drop for StoreWriter {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock_path);
        if self.file.is_some() {
            let _ = fs::remove_file(&self.tmp_path);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDateTime;

    fn rev(id: u64, ts: &str, text: &str) -> RevisionRecord {
        RevisionRecord {
            rev_id: id,
            timestamp: NaiveDateTime::parse_from_str(ts, "%Y-%m-%d %H:%M:%S").unwrap().and_utc(),
            size_bytes: text.len() as u64,
            wikitext: Some(text.to_string()),
        }
    }

    fn month(s: &str) -> Month {
        s.parse().unwrap()
    }

    fn span(a: &str, b: &str) -> MonthRange {
        MonthRange::new(month(a), month(b)).unwrap()
    }

    fn en(title: &str) -> ArticleRef {
        ArticleRef::new("en", title).unwrap()
    }

    #[test]
    fn carry_forward_fills_gaps() {
        let revisions = vec![rev(1, "2011-01-15 12:00:00", "[[A]]"), rev(2, "2011-03-02 08:00:00", "[[A]] [[B]]")];
        let series = build_series(&revisions, &en("X"), span("2011-01", "2011-04")).unwrap();
        let months: Vec<(String, u64)> =
            series.snapshots.iter().map(|s| (s.month.to_string(), s.rev.rev_id)).collect();
        assert_eq!(
            months,
            vec![
                ("2011-01".to_string(), 1),
                ("2011-02".to_string(), 1),
                ("2011-03".to_string(), 2),
                ("2011-04".to_string(), 2)
            ]
        );
        assert_eq!(series.snapshots[3].outlinks.len(), 2);
        assert_eq!(series.snapshots[0].outlinks.source_rev, Some(1));
    }

    #[test]
    fn single_revision_fills_whole_span() {
        let revisions = vec![rev(7, "2011-01-20 00:00:00", "[[A]]")];
        let series = build_series(&revisions, &en("X"), span("2011-01", "2011-03")).unwrap();
        assert_eq!(series.snapshots.len(), 3);
        assert!(series.snapshots.iter().all(|s| s.rev.rev_id == 7));
    }

    #[test]
    fn months_before_creation_absent() {
        let revisions = vec![rev(1, "2011-03-10 00:00:00", "")];
        let series = build_series(&revisions, &en("X"), span("2011-01", "2011-04")).unwrap();
        assert_eq!(series.span.start, month("2011-03"));
        assert_eq!(series.snapshots.len(), 2);
    }

    #[test]
    fn created_after_span_is_an_error() {
        let revisions = vec![rev(1, "2012-01-01 00:00:00", "")];
        let err = build_series(&revisions, &en("X"), span("2011-01", "2011-06")).unwrap_err();
        assert!(matches!(err, SeriesError::NoRevisionInSpan(_, _)));
    }

    #[test]
    fn revision_on_month_boundary_included() {
        let revisions =
            vec![rev(1, "2011-01-01 00:00:00", ""), rev(2, "2011-01-31 23:59:59", "[[A]]")];
        let series = build_series(&revisions, &en("X"), span("2011-01", "2011-01")).unwrap();
        assert_eq!(series.snapshots[0].rev.rev_id, 2);
    }

    #[test]
    fn matches_brute_force_choice_per_month() {
        // 10 revisions over 6 months, irregular spacing
        let stamps = [
            "2011-01-05 01:00:00",
            "2011-01-29 23:00:00",
            "2011-02-14 10:00:00",
            "2011-02-14 11:00:00",
            "2011-03-01 00:00:00",
            "2011-04-30 23:59:59",
            "2011-05-02 12:00:00",
            "2011-05-20 12:00:00",
            "2011-06-11 09:00:00",
            "2011-06-30 23:59:58",
        ];
        let revisions: Vec<RevisionRecord> =
            stamps.iter().enumerate().map(|(i, ts)| rev(i as u64 + 1, ts, "[[A]]")).collect();
        let sp = span("2011-01", "2011-06");
        let series = build_series(&revisions, &en("X"), sp).unwrap();
        for snap in &series.snapshots {
            let expected = revisions
                .iter()
                .filter(|r| r.timestamp <= snap.month.end_instant())
                .next_back()
                .unwrap();
            assert_eq!(snap.rev.rev_id, expected.rev_id, "month {}", snap.month);
        }
        // timestamps non-decreasing across consecutive snapshots
        for pair in series.snapshots.windows(2) {
            assert!(pair[0].rev.timestamp <= pair[1].rev.timestamp);
        }
    }

    #[test]
    fn unordered_input_rejected() {
        let revisions = vec![rev(2, "2011-02-01 00:00:00", ""), rev(1, "2011-01-01 00:00:00", "")];
        assert!(matches!(
            build_series(&revisions, &en("X"), span("2011-01", "2011-02")),
            Err(SeriesError::UnorderedRevisions(1))
        ));
    }

    #[test]
    fn store_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let store = RevisionStore::new(dir.path());
        let article = en("Cache Article");
        let revisions = vec![
            rev(1, "2011-01-01 00:00:00", "نص عربي\nwith [[links]] and 🌍"),
            rev(2, "2011-02-01 00:00:00", "second"),
        ];
        let sp = span("2011-01", "2011-02");
        store.put(&article, &revisions, sp, 1).unwrap();
        let (got, meta) = store.get(&article).unwrap();
        assert_eq!(got, revisions);
        assert_eq!(meta.record_count, 2);
        assert_eq!(meta.skipped_hidden, 1);
        assert!(store.covers(&article, sp));
        assert!(!store.covers(&article, span("2010-12", "2011-02")));
    }

    #[test]
    fn cold_cache_misses() {
        let dir = tempfile::tempdir().unwrap();
        let store = RevisionStore::new(dir.path());
        assert!(matches!(store.get(&en("Nobody")), Err(StoreError::CacheMiss(_))));
    }

    #[test]
    fn truncated_file_reports_corrupt_record() {
        let dir = tempfile::tempdir().unwrap();
        let store = RevisionStore::new(dir.path());
        let article = en("Torn Write");
        let revisions = vec![rev(1, "2011-01-01 00:00:00", "some content that is long enough")];
        store.put(&article, &revisions, span("2011-01", "2011-01"), 0).unwrap();
        let data_path = store.article_dir(&article).join("revisions.dat");
        let bytes = fs::read(&data_path).unwrap();
        fs::write(&data_path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(store.get(&article), Err(StoreError::CorruptRecord(_, _))));
    }

    #[test]
    fn flipped_byte_reports_corrupt_record() {
        let dir = tempfile::tempdir().unwrap();
        let store = RevisionStore::new(dir.path());
        let article = en("Bit Rot");
        let revisions = vec![rev(1, "2011-01-01 00:00:00", "payload")];
        store.put(&article, &revisions, span("2011-01", "2011-01"), 0).unwrap();
        let data_path = store.article_dir(&article).join("revisions.dat");
        let mut bytes = fs::read(&data_path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        fs::write(&data_path, &bytes).unwrap();
        assert!(matches!(store.get(&article), Err(StoreError::CorruptRecord(_, _))));
    }

    #[test]
    fn second_writer_is_locked_out() {
        let dir = tempfile::tempdir().unwrap();
        let store = RevisionStore::new(dir.path());
        let article = en("Contended");
        let w1 = store.writer(&article).unwrap();
        assert!(matches!(store.writer(&article), Err(StoreError::Locked(_))));
        drop(w1);
        assert!(store.writer(&article).is_ok());
    }
}
