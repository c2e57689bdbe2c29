//! A rule-driven chart parser in the GPSG tradition.
//!
//! Sentences arrive as tokens. Each token gets weighted tag hypotheses
//! ([`lexicon`]), the hypotheses become leaf phrases that are projected left
//! to right through hand-written rules ([`grammar`], [`engine`]) into a
//! phrase index ([`chart`]). When no phrase covers the whole sentence the
//! best chunks are connected by a shortest-path search ([`connect`]). Parses
//! are exported as dependency heads, bracketed trees and a combined JSON
//! record ([`export`]), and scored against CoNLL-U treebanks ([`treebank`]).
//!
//! ```
//! use slashparse::{builtin, pipeline::Pipeline};
//!
//! let pipeline = Pipeline::new(builtin::grammar(), Some(builtin::model()), builtin::closed_class());
//! let parse = pipeline.parse(&["The", "man", "I", "met"], None, 1, false).unwrap();
//! let best = &parse.results[0];
//! assert_eq!(best.path.chunks.len(), 1);
//! ```

pub mod builtin;
pub mod chart;
pub mod cli;
pub mod config;
pub mod connect;
pub mod engine;
pub mod export;
pub mod grammar;
pub mod lexicon;
pub mod pipeline;
pub mod treebank;
