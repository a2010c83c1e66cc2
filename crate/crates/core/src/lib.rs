//! Assortment recommendation from multimodal product topics.
//!
//! The pipeline turns a product catalog into visual and text documents
//! ([`corpus`]), learns shared topics over both with polylingual LDA
//! ([`topicmodel`]), fits a purchase-derived quadratic-form distance between
//! topic vectors ([`compatibility`]), builds assortments around co-clicked
//! seed pairs ([`assort`]) and scores them offline ([`eval`]). [`synth`]
//! generates catalogs with known ground truth for verification.

pub mod assort;
pub mod compatibility;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod io;
pub mod pipeline;
pub mod synth;
pub mod theta;
pub mod topicmodel;

pub use error::{Error, Result};
