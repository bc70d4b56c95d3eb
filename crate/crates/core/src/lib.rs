//! Community detection for panels of time series.
//!
//! The pipeline turns a price panel into log-returns, maps every return
//! stream to a lead-lag path, summarises each path by its truncated
//! signature and compares the signatures pairwise to obtain a similarity
//! matrix. That matrix (or the classic Pearson correlation matrix) is then
//! filtered, either by a threshold (asset graph) or by random matrix theory,
//! and communities are found by maximising modularity with Louvain or the
//! Clauset-Newman-Moore greedy agglomeration.
//!
//! ```no_run
//! use sigcomm::{ingest, similarity, spectral, community};
//!
//! let panel = ingest::load_price_panel("prices.csv", &ingest::CsvOptions::default())?;
//! let panel = ingest::filter_insufficient(&panel, 0.99)?;
//! let returns = ingest::compute_log_returns(&panel)?;
//! let features = similarity::signature_features(&returns, 3, &Default::default())?;
//! let sim = similarity::similarity_ed(&features);
//! let split = spectral::rmt_decompose(&sim, returns.n_obs())?;
//! let gain = community::gain_from_rmt(&split, &sim)?;
//! let detection = community::louvain(&gain, None);
//! println!("q = {}, K = {}", detection.partition.q, detection.partition.k);
//! # Ok::<(), sigcomm::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod community;
pub mod error;
pub mod ingest;
pub mod matrix;
pub mod pipeline;
pub mod signature;
pub mod similarity;
pub mod spectral;

pub use error::{Error, Result};
