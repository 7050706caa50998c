//! Measurement toolkit for the long-run evolution of Wikipedia articles.
//!
//! Given the revision history of an article in two language editions, this
//! crate computes four constructs over a monthly snapshot sequence:
//!
//! * **salience** — article size and outlink-count time series,
//! * **deliberation** — temporal outlink-inclusion matrices, pairwise
//!   similarity, agglomerative clustering, and a Stable/Debated/Forgotten
//!   taxonomy per cluster,
//! * **contextualization** — classification of each outlink by its
//!   inter-language-link status relative to the other edition,
//! * **consolidation** — whether a configured set of related articles link
//!   back to the focal article, month by month.
//!
//! Ingestion goes through the MediaWiki Action API ([`client`]), revisions are
//! cached on disk ([`snapshot`]), and results are rendered as CSV tables and
//! deterministic SVG figures ([`report`]).

pub mod client;
pub mod consolidation;
pub mod contextualization;
pub mod deliberation;
pub mod hierarchy;
pub mod model;
pub mod report;
pub mod salience;
pub mod snapshot;
pub mod wikitext;

pub use model::{ArticleRef, LangLinkMap, Month, MonthRange, RevisionRecord};
