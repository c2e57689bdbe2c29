//! Tagging, parsing and ranking for one sentence.

use crate::chart::InvariantViolation;
use crate::connect::{best_results, ConnectConfig, ParseResult};
use crate::engine::{parse_tagged_traced, ParseConfig, TraceStep};
use crate::grammar::Grammar;
use crate::lexicon::{gold_distribution, tag_sentence, ClosedClassTable, TagDistribution, TagFeatures, TaggerModel};

/// Everything needed to parse a sentence. Immutable and shareable across
/// threads.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub grammar: Grammar,
    /// Required unless gold tags are supplied.
    pub model: Option<TaggerModel>,
    pub closed: ClosedClassTable,
    pub tag_features: TagFeatures,
    pub parse: ParseConfig,
    pub connect: ConnectConfig,
}

#[derive(Debug, Clone)]
pub struct SentenceParse {
    pub distributions: Vec<TagDistribution>,
    /// Best first; empty only for an empty sentence.
    pub results: Vec<ParseResult>,
    pub budget_exceeded: bool,
    pub phrase_count: usize,
    pub trace: Vec<TraceStep>,
    pub chart_dump: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("no tagger model loaded and no gold tags given")]
    NoTagger,
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
}

impl Pipeline {
    pub fn new(grammar: Grammar, model: Option<TaggerModel>, closed: ClosedClassTable) -> Self {
        Pipeline {
            grammar,
            model,
            closed,
            tag_features: TagFeatures::builtin(),
            parse: ParseConfig::default(),
            connect: ConnectConfig::default(),
        }
    }

    pub fn tag<S: AsRef<str>>(&self, tokens: &[S], gold_tags: Option<&[String]>) -> Result<Vec<TagDistribution>, PipelineError> {
        match gold_tags {
            Some(tags) => Ok(tokens
                .iter()
                .zip(tags)
                .enumerate()
                .map(|(i, (form, xpos))| {
                    gold_distribution(&self.closed, &self.tag_features, i, form.as_ref(), xpos, self.parse.tag_cutoff)
                })
                .collect()),
            None => {
                let model = self.model.as_ref().ok_or(PipelineError::NoTagger)?;
                Ok(tag_sentence(model, &self.closed, tokens, self.parse.tag_cutoff))
            }
        }
    }

    /// Parses one sentence and returns up to `k` ranked hypotheses.
    pub fn parse<S: AsRef<str>>(
        &self,
        tokens: &[S],
        gold_tags: Option<&[String]>,
        k: usize,
        trace: bool,
    ) -> Result<SentenceParse, PipelineError> {
        let distributions = self.tag(tokens, gold_tags)?;
        let (chart, steps) = parse_tagged_traced(&distributions, &self.grammar, &self.parse, trace)?;
        let results = best_results(&chart, k, &self.connect);
        Ok(SentenceParse {
            distributions,
            results,
            budget_exceeded: chart.budget_exceeded,
            phrase_count: chart.len(),
            trace: steps,
            chart_dump: trace.then(|| chart.dump()),
        })
    }
}
