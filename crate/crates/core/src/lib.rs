//! Minimum error rate training over N-best lists.
//!
//! Feature weights of a log-linear translation model are tuned to maximize
//! corpus BLEU on a fixed set of N-best lists. Coordinate descent ([`kcd`])
//! runs an exact line search ([`envelope`]) along each search direction; the
//! directions come from a [`rss::CoordinateSystem`] that can be rotated so a
//! direction moves toward a correlated feature, with the rotation amount
//! chosen on the tuning set ([`rss`]).

pub mod config;
pub mod corpus;
pub mod envelope;
pub mod error;
pub mod kcd;
pub mod metrics;
pub mod report;
pub mod rss;
pub mod synth;

pub use corpus::{build_corpus, parse_nbest, parse_references, Hypothesis, SentenceEntry, TuningCorpus};
pub use envelope::{line_search, upper_envelope, LineSearchResult, ScoreLine, SentenceEnvelope};
pub use error::{Error, Result};
pub use kcd::{kcd_optimize, select_hypotheses, KcdConfig, KcdRun, KcdTrace, SweepMode};
pub use metrics::{corpus_bleu, sentence_bleu_stats, BleuStats, ErrorValue, StatsCache};
pub use rss::{rss_optimize, AlphaGrid, CoordinateSystem, Rotation, RotationPlan, RssResult, ScoredCorpus};
pub use synth::{generate, SynthSpec};
