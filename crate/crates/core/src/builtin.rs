//! The sample English grammar, closed-class table and training corpus
//! shipped with the crate.

use crate::grammar::{load_grammar_str, Grammar};
use crate::lexicon::{load_closed_class, train_tagger, ClosedClassTable, TaggerModel, DEFAULT_FALLBACK_K};
use crate::treebank::{read_conllu, GoldSentence};

pub const GRAMMAR: &str = include_str!("../data/english.rules");
pub const CLOSED_CLASS: &str = include_str!("../data/closed_class.csv");
pub const SAMPLE_TRAIN: &str = include_str!("../data/sample-train.conllu");
pub const SAMPLE_DEV: &str = include_str!("../data/sample-dev.conllu");

pub fn grammar() -> Grammar {
    load_grammar_str(GRAMMAR).expect("shipped grammar parses")
}

pub fn closed_class() -> ClosedClassTable {
    load_closed_class(CLOSED_CLASS.as_bytes()).expect("shipped closed-class table parses")
}

pub fn sample_train() -> Vec<GoldSentence> {
    read_conllu(SAMPLE_TRAIN.as_bytes()).expect("shipped training sample parses")
}

pub fn sample_dev() -> Vec<GoldSentence> {
    read_conllu(SAMPLE_DEV.as_bytes()).expect("shipped dev sample parses")
}

/// Tagger trained on the shipped sample corpus.
pub fn model() -> TaggerModel {
    let tokens = sample_train().into_iter().flat_map(|s| s.tokens).map(|t| (t.form, t.xpos));
    train_tagger(tokens, DEFAULT_FALLBACK_K).expect("training sample is not empty")
}
