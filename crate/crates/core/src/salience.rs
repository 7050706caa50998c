//! Article-size and outlink-count time series.

use serde::{Deserialize, Serialize};

use crate::model::{ArticleRef, Month};
use crate::snapshot::SnapshotSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SizeBytes,
    OutlinkCount,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::SizeBytes => "size_bytes",
            Metric::OutlinkCount => "outlink_count",
        }
    }
}

/// Monthly integer series for one article and metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSeries {
    pub article: ArticleRef,
    pub metric: Metric,
    pub points: Vec<(Month, u64)>,
}

impl TimeSeries {
    pub fn values(&self) -> impl Iterator<Item = u64> + '_ {
        self.points.iter().map(|&(_, v)| v)
    }
}

/// Size in bytes per month. When content was fetched the byte length of the
/// wikitext is authoritative; otherwise the size reported by the API is used.
pub fn size_series(series: &SnapshotSeries) -> TimeSeries {
    let points = series
        .snapshots
        .iter()
        .map(|s| {
            let size = match &s.rev.wikitext {
                Some(text) => {
                    let measured = text.len() as u64;
                    if measured != s.rev.size_bytes {
                        log::warn!(
                            "{} rev {}: content length {} differs from reported size {}",
                            series.article,
                            s.rev.rev_id,
                            measured,
                            s.rev.size_bytes
                        );
                    }
                    measured
                }
                None => s.rev.size_bytes,
            };
            (s.month, size)
        })
        .collect();
    TimeSeries { article: series.article.clone(), metric: Metric::SizeBytes, points }
}

/// Number of distinct article-namespace outlinks per month.
pub fn outlink_count_series(series: &SnapshotSeries) -> TimeSeries {
    let points = series.snapshots.iter().map(|s| (s.month, s.outlinks.len() as u64)).collect();
    TimeSeries { article: series.article.clone(), metric: Metric::OutlinkCount, points }
}

/// The `top_k` largest month-over-month changes, by absolute value, ties
/// broken by earlier month. Zero deltas are filtered out.
pub fn delta_report(ts: &TimeSeries, top_k: usize) -> Vec<(Month, i64)> {
    let mut deltas: Vec<(Month, i64)> = ts
        .points
        .windows(2)
        .filter_map(|pair| {
            let delta = pair[1].1 as i64 - pair[0].1 as i64;
            (delta != 0).then_some((pair[1].0, delta))
        })
        .collect();
    deltas.sort_by(|a, b| b.1.abs().cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    deltas.truncate(top_k);
    deltas
}
