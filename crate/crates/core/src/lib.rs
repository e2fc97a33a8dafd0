//! Local-website search: TF-IDF retrieval fused with annotation similarity
//! (SocialSimRank) and a traffic-weighted PageRank (LPageRank) computed from
//! web-server access logs.
//!
//! The pipeline stages are independent modules that hand data to each other
//! through plain types and documented file formats:
//!
//! * [`logparse`] parses access logs, sessionizes visitors and counts
//!   page-to-page transitions.
//! * [`graph`] turns transition counts and structural links into a
//!   probabilistic graph.
//! * [`ranker`] computes PageRank and LPageRank by fixed-point iteration.
//! * [`social`] runs SocialSimRank over annotation/page association counts.
//! * [`textindex`] extracts text and links from a corpus and scores TF-IDF.
//! * [`fusion`] combines the three signals into one ranked list.
//! * [`evalkit`] measures rank positions and recall over judged queries.
//! * [`synth`] generates a deterministic synthetic site, log and annotations.
//! * [`state`] persists and reloads the artifacts an engine is built from.

pub mod checksum;
pub mod evalkit;
pub mod fusion;
pub mod graph;
pub mod logparse;
pub mod paths;
pub mod pipeline;
pub mod ranker;
pub mod social;
pub mod state;
pub mod synth;
pub mod textindex;

mod atomic;

pub use atomic::{write_atomic, write_dir_atomic};
