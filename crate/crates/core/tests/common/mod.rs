#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use slashparse::grammar::{Category, FeatureSet, Grammar};
use slashparse::lexicon::{TagDistribution, TagFeatures, TagHypothesis};

/// Categories that occur in rule bodies but never as a parent, each with
/// the feature sets the shipped lexicon can give them.
pub fn terminals(grammar: &Grammar) -> Vec<(Category, FeatureSet)> {
    let parents: BTreeSet<&Category> = grammar.rules().iter().map(|r| &r.parent).collect();
    let mut cats: BTreeSet<Category> = BTreeSet::new();
    for r in grammar.rules() {
        for c in &r.children {
            if !parents.contains(&c.category) {
                cats.insert(c.category.clone());
            }
        }
    }
    let tf = TagFeatures::builtin();
    let mut out = Vec::new();
    for c in cats {
        let feats: Vec<FeatureSet> = match c.as_str() {
            "AUX" => vec![FeatureSet::from_names(["be", "fin"]), FeatureSet::from_names(["be", "inf"]), FeatureSet::from_names(["been"])],
            "HAVE" => vec![FeatureSet::from_names(["fin"]), FeatureSet::from_names(["inf"])],
            "DO" => vec![FeatureSet::from_names(["fin"])],
            "IN" => vec![FeatureSet::empty(), FeatureSet::from_names(["loc"])],
            _ => vec![tf.get(c.as_str())],
        };
        for f in feats {
            out.push((c.clone(), f));
        }
    }
    out
}

/// Random tagged sentence: one or two hypotheses per token with weights
/// that are multiples of 1/8, so every sum of them is exact.
pub fn random_sentence<R: Rng>(rng: &mut R, n: usize, terminals: &[(Category, FeatureSet)]) -> Vec<TagDistribution> {
    (0..n)
        .map(|i| {
            let first = terminals.choose(rng).unwrap().clone();
            let hypotheses = if rng.gen_bool(0.3) {
                let second = terminals.choose(rng).unwrap().clone();
                let w = rng.gen_range(1..8) as f64 / 8.0;
                let mut hs = vec![hyp(first, w)];
                if second != (hs[0].tag.clone(), hs[0].features.clone()) {
                    hs.push(hyp(second, 1.0 - w));
                }
                hs
            } else {
                vec![hyp(first, 1.0)]
            };
            TagDistribution { token_index: i, form: format!("w{i}"), hypotheses }
        })
        .collect()
}

fn hyp((tag, features): (Category, FeatureSet), weight: f64) -> TagHypothesis {
    TagHypothesis { tag, weight, features }
}

/// Random subset of the grammar keeping each rule with probability `p`.
pub fn random_subset<R: Rng>(rng: &mut R, grammar: &Grammar, p: f64) -> Grammar {
    grammar.filtered(|_| rng.gen_bool(p))
}
