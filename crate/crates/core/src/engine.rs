//! Left-to-right phrase projection.
//!
//! Tokens are consumed in order. Each token's tag hypotheses become leaf
//! phrases, and every new phrase is immediately projected through the rules
//! whose last child it matches: unary rules wrap it, binary rules pair it
//! with phrases ending just before it (up to `max_skip` tokens earlier).
//! Since a parent always ends where its last child ends, every phrase ending
//! at position `i` exists before the leaves of `i + 1` are created.

use std::fmt;

use crate::chart::{Chart, Insertion, InvariantViolation, Phrase, PhraseId};
use crate::grammar::{Category, FeatureSet, Grammar, Rule, RuleId};
use crate::lexicon::{tag_sentence, ClosedClassTable, TagDistribution, TaggerModel, DEFAULT_CUTOFF};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseConfig {
    /// Tokens that may be skipped between the two children of a binary rule.
    pub max_skip: usize,
    /// Phrases kept per `(end, start, category)` cell; `None` keeps all.
    pub beam_per_cell: Option<usize>,
    /// Phrases stored per sentence before projection stops.
    pub max_phrases: usize,
    pub tag_cutoff: f64,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig { max_skip: 2, beam_per_cell: Some(8), max_phrases: 50_000, tag_cutoff: DEFAULT_CUTOFF }
    }
}

/// One rule application, for `--trace`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub rule: RuleId,
    pub children: Vec<PhraseId>,
    pub outcome: Insertion,
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let children: Vec<String> = self.children.iter().map(|c| c.to_string()).collect();
        let created = match self.outcome {
            Insertion::Added(id) => id.to_string(),
            Insertion::Evicted(id) => format!("{id} (evicted)"),
            Insertion::Duplicate => "duplicate".to_owned(),
        };
        write!(
            f,
            "{} [{}] -> {} {} {}-{}",
            self.rule,
            children.join(","),
            created,
            self.label,
            self.start,
            self.end
        )
    }
}

/// One leaf per (token, hypothesis).
pub fn create_leaf_phrases(distributions: &[TagDistribution]) -> Vec<Phrase> {
    distributions
        .iter()
        .flat_map(|d| {
            d.hypotheses
                .iter()
                .map(move |h| Phrase::leaf(d.token_index, h.tag.clone(), h.features.clone(), h.weight))
        })
        .collect()
}

/// Builds the parent phrase for `rule` over `children` (left to right).
fn build(chart: &Chart, rule: &Rule, children: &[PhraseId]) -> Phrase {
    let kids: Vec<&Phrase> = children.iter().map(|&c| chart.get(c)).collect();
    let head = rule.head_index();
    Phrase {
        id: PhraseId::default(),
        wt: kids.iter().map(|k| k.wt).fold(0.0, |a, b| a + b),
        start: kids[0].start,
        end: kids[kids.len() - 1].end,
        span: kids.iter().map(|k| k.span).sum(),
        cat: rule.parent.clone(),
        feat: rule.parent_features.clone(),
        head_loc: kids[head].head_loc,
        children: children.to_vec(),
        head_child: Some(head),
        level: kids.iter().map(|k| k.level).max().unwrap() + 1,
        rule: Some(rule.id),
    }
}

/// True when `(cat, feat)` already occurs in the unary chain below `id`
/// (the phrase itself, its only child, that child's only child, ...).
fn unary_chain_contains(chart: &Chart, mut id: PhraseId, cat: &Category, feat: &FeatureSet) -> bool {
    loop {
        let p = chart.get(id);
        if &p.cat == cat && &p.feat == feat {
            return true;
        }
        if p.children.len() != 1 {
            return false;
        }
        id = p.children[0];
    }
}

struct Frame<'g> {
    candidates: Vec<(&'g Rule, Option<PhraseId>)>,
    next: usize,
    phrase: PhraseId,
}

struct Projector<'a> {
    grammar: &'a Grammar,
    cfg: &'a ParseConfig,
    chart: Chart,
    trace: Option<Vec<TraceStep>>,
}

impl<'a> Projector<'a> {
    fn frame(&self, id: PhraseId) -> Frame<'a> {
        let p = self.chart.get(id);
        let mut candidates = Vec::new();
        for rule in self.grammar.rules_for_last_child(&p.cat, &p.feat) {
            if rule.is_unary() {
                if !unary_chain_contains(&self.chart, id, &rule.parent, &rule.parent_features) {
                    candidates.push((rule, None));
                }
            } else {
                let first = &rule.children[0];
                for left in self.chart.left_neighbors(p.start, self.cfg.max_skip, &first.category, &first.constraints) {
                    candidates.push((rule, Some(left)));
                }
            }
        }
        Frame { candidates, next: 0, phrase: id }
    }

    fn insert(&mut self, phrase: Phrase) -> Result<Insertion, InvariantViolation> {
        let (label, start, end, rule, children) =
            (phrase.label(), phrase.start, phrase.end, phrase.rule, phrase.children.clone());
        let outcome = self.chart.add_phrase(phrase)?;
        if let (Some(trace), Some(rule)) = (self.trace.as_mut(), rule) {
            trace.push(TraceStep { rule, children, outcome, label, start, end });
        }
        Ok(outcome)
    }

    /// Projects `root` and everything it gives rise to, depth-first.
    fn project(&mut self, root: PhraseId) -> Result<Vec<PhraseId>, InvariantViolation> {
        let mut created = Vec::new();
        let mut stack = vec![self.frame(root)];
        while let Some(top) = stack.last_mut() {
            if self.chart.budget_exceeded {
                break;
            }
            let Some(&(rule, left)) = top.candidates.get(top.next) else {
                stack.pop();
                continue;
            };
            top.next += 1;
            let current = top.phrase;
            let children: Vec<PhraseId> = match left {
                Some(l) => vec![l, current],
                None => vec![current],
            };
            let parent = build(&self.chart, rule, &children);
            if let Insertion::Added(id) = self.insert(parent)? {
                created.push(id);
                if self.chart.len() >= self.cfg.max_phrases {
                    self.chart.budget_exceeded = true;
                    break;
                }
                let frame = self.frame(id);
                stack.push(frame);
            }
        }
        Ok(created)
    }
}

/// Projects an already-inserted phrase. Returns the phrases created.
pub fn project(
    chart: &mut Chart,
    p: PhraseId,
    grammar: &Grammar,
    cfg: &ParseConfig,
) -> Result<Vec<PhraseId>, InvariantViolation> {
    let mut projector = Projector { grammar, cfg, chart: std::mem::replace(chart, Chart::new(0)), trace: None };
    let result = projector.project(p);
    *chart = projector.chart;
    result
}

/// Parses pre-tagged tokens. Returns the finished chart and, when
/// `trace` is set, every rule application in order.
pub fn parse_tagged_traced(
    distributions: &[TagDistribution],
    grammar: &Grammar,
    cfg: &ParseConfig,
    trace: bool,
) -> Result<(Chart, Vec<TraceStep>), InvariantViolation> {
    let chart = Chart::new(distributions.len()).with_beam(cfg.beam_per_cell);
    let mut projector = Projector { grammar, cfg, chart, trace: trace.then(Vec::new) };
    for dist in distributions {
        for leaf in create_leaf_phrases(std::slice::from_ref(dist)) {
            match projector.chart.add_phrase(leaf)? {
                Insertion::Added(id) => {
                    if projector.chart.len() >= cfg.max_phrases {
                        projector.chart.budget_exceeded = true;
                    }
                    if !projector.chart.budget_exceeded {
                        projector.project(id)?;
                    }
                }
                Insertion::Duplicate | Insertion::Evicted(_) => {}
            }
        }
    }
    Ok((projector.chart, projector.trace.unwrap_or_default()))
}

pub fn parse_tagged(
    distributions: &[TagDistribution],
    grammar: &Grammar,
    cfg: &ParseConfig,
) -> Result<Chart, InvariantViolation> {
    parse_tagged_traced(distributions, grammar, cfg, false).map(|(chart, _)| chart)
}

/// Tags `tokens` and parses them.
pub fn parse_sentence<S: AsRef<str>>(
    tokens: &[S],
    model: &TaggerModel,
    closed: &ClosedClassTable,
    grammar: &Grammar,
    cfg: &ParseConfig,
) -> Result<Chart, InvariantViolation> {
    let dists = tag_sentence(model, closed, tokens, cfg.tag_cutoff);
    parse_tagged(&dists, grammar, cfg)
}
