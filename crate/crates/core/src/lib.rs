//! Unsupervised sentence-level translation quality estimation.
//!
//! The crate covers the whole pipeline:
//!
//! * [`data`]: parallel corpora, QE datasets (TSV), and seeded sampling.
//! * [`ter`]: translation edit rate with greedy block shifts.
//! * [`synthesis`]: TER-labeled synthetic training tuples from a parallel corpus.
//! * [`model`]: a small self-attention encoder with a regression head, trained
//!   with AdamW on RMSE in either `split` or `concat` encoding.
//! * [`eval`]: Pearson correlation with polarity orientation and the Williams test.
//! * [`cli`]: the `synqe` command line front end.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod synthesis;
pub mod ter;

pub use error::{Error, Result};
