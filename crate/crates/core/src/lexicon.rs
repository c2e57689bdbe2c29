//! Weighted tag hypotheses per token.
//!
//! Open-class words are tagged with a relative-frequency model trained on
//! `(form, xpos)` pairs; closed-class words come from a hand-written table
//! that overrides the model completely.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use crate::grammar::{Category, FeatureSet};

/// Default probability cutoff for tag hypotheses.
pub const DEFAULT_CUTOFF: f64 = 0.05;
/// Default number of open-class tags in the unknown-word distribution.
pub const DEFAULT_FALLBACK_K: usize = 8;

const MODEL_MAGIC: &str = "#slashparse-tagger";
const MODEL_VERSION: u32 = 1;

const OPEN_CLASS_TAGS: &[&str] = &[
    "NN", "NNS", "NNP", "NNPS", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "JJ", "JJR", "JJS", "RB",
    "RBR", "RBS", "CD", "FW", "UH", "ADD",
];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("no tokens in training data")]
    EmptyTraining,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_err(line: usize, message: impl Into<String>) -> LexiconError {
    LexiconError::Format { line, message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagHypothesis {
    pub tag: Category,
    pub weight: f64,
    pub features: FeatureSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagDistribution {
    pub token_index: usize,
    pub form: String,
    /// Sorted by descending weight; never empty.
    pub hypotheses: Vec<TagHypothesis>,
}

impl TagDistribution {
    pub fn best(&self) -> &TagHypothesis {
        &self.hypotheses[0]
    }

    pub fn total_weight(&self) -> f64 {
        self.hypotheses.iter().map(|h| h.weight).sum()
    }
}

/// Static features attached to open-class tags (e.g. `VB` → `inf`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagFeatures(BTreeMap<String, FeatureSet>);

impl TagFeatures {
    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/tag_features.tsv")).expect("builtin tag feature table")
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with("# ") || line == "#" {
                continue;
            }
            let mut cols = line.split('\t');
            let tag = cols.next().unwrap();
            let feats = cols.next().unwrap_or("");
            if tag.is_empty() || cols.next().is_some() {
                return Err(format_err(i + 1, "expected `tag<TAB>features`"));
            }
            map.insert(tag.to_owned(), FeatureSet::from_names(split_features(feats)));
        }
        Ok(TagFeatures(map))
    }

    pub fn get(&self, tag: &str) -> FeatureSet {
        self.0.get(tag).cloned().unwrap_or_default()
    }
}

fn split_features(s: &str) -> impl Iterator<Item = &str> {
    s.split(';').map(str::trim).filter(|f| !f.is_empty())
}

/// Relative-frequency lexical model.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    form_counts: BTreeMap<String, BTreeMap<String, u64>>,
    tag_totals: BTreeMap<String, u64>,
    open_class_fallback: Vec<(String, f64)>,
    fallback_k: usize,
    /// Retry lookups with the lowercased form on a miss.
    pub lowercase_fallback: bool,
    pub tag_features: TagFeatures,
}

impl TaggerModel {
    fn from_counts(form_counts: BTreeMap<String, BTreeMap<String, u64>>, fallback_k: usize) -> Result<Self, LexiconError> {
        let mut tag_totals: BTreeMap<String, u64> = BTreeMap::new();
        for tags in form_counts.values() {
            for (tag, &n) in tags {
                *tag_totals.entry(tag.clone()).or_default() += n;
            }
        }
        if tag_totals.is_empty() {
            return Err(LexiconError::EmptyTraining);
        }
        let open_class_fallback = fallback_distribution(&tag_totals, fallback_k);
        Ok(TaggerModel {
            form_counts,
            tag_totals,
            open_class_fallback,
            fallback_k,
            lowercase_fallback: true,
            tag_features: TagFeatures::builtin(),
        })
    }

    pub fn total_tokens(&self) -> u64 {
        self.tag_totals.values().sum()
    }

    pub fn tag_totals(&self) -> &BTreeMap<String, u64> {
        &self.tag_totals
    }

    pub fn open_class_fallback(&self) -> &[(String, f64)] {
        &self.open_class_fallback
    }

    pub fn knows(&self, form: &str) -> bool {
        self.lookup(form).is_some()
    }

    fn lookup(&self, form: &str) -> Option<&BTreeMap<String, u64>> {
        self.form_counts.get(form).or_else(|| {
            if self.lowercase_fallback {
                self.form_counts.get(&form.to_lowercase())
            } else {
                None
            }
        })
    }

    /// `weight(tag | form)` before any cutoff; unknown forms get the
    /// open-class fallback.
    pub fn distribution(&self, form: &str) -> Vec<(String, f64)> {
        match self.lookup(form) {
            Some(tags) => {
                let total: u64 = tags.values().sum();
                tags.iter().map(|(t, &n)| (t.clone(), n as f64 / total as f64)).collect()
            }
            None => self.open_class_fallback.clone(),
        }
    }

    /// Flat text: a header line, then one `form<TAB>tag<TAB>count` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{MODEL_MAGIC}\tversion={MODEL_VERSION}\ttokens={}\tfallback_k={}",
            self.total_tokens(),
            self.fallback_k
        )
        .unwrap();
        for (form, tags) in &self.form_counts {
            for (tag, n) in tags {
                writeln!(out, "{form}\t{tag}\t{n}").unwrap();
            }
        }
        out
    }

    pub fn read<R: BufRead>(source: R) -> Result<Self, LexiconError> {
        let mut lines = source.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(format_err(1, "empty model file")),
        };
        let mut fields = header.split('\t');
        if fields.next() != Some(MODEL_MAGIC) {
            return Err(format_err(1, "not a tagger model"));
        }
        let mut version = None;
        let mut tokens = None;
        let mut fallback_k = DEFAULT_FALLBACK_K;
        for field in fields {
            let (key, value) = field.split_once('=').ok_or_else(|| format_err(1, format!("bad header field {field:?}")))?;
            let value: u64 = value.parse().map_err(|_| format_err(1, format!("bad header value {field:?}")))?;
            match key {
                "version" => version = Some(value),
                "tokens" => tokens = Some(value),
                "fallback_k" => fallback_k = value as usize,
                _ => return Err(format_err(1, format!("unknown header field {key:?}"))),
            }
        }
        if version != Some(MODEL_VERSION as u64) {
            return Err(format_err(1, format!("unsupported model version {version:?}")));
        }
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            let mut cols = line.split('\t');
            let (form, tag, n) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
                (Some(f), Some(t), Some(n), None) if !f.is_empty() && !t.is_empty() => (f, t, n),
                _ => return Err(format_err(lineno, "expected `form<TAB>tag<TAB>count`")),
            };
            let n: u64 = n.parse().map_err(|_| format_err(lineno, format!("bad count {n:?}")))?;
            if n == 0 {
                return Err(format_err(lineno, "zero count"));
            }
            *counts.entry(form.to_owned()).or_default().entry(tag.to_owned()).or_default() += n;
        }
        let model = TaggerModel::from_counts(counts, fallback_k)?;
        if tokens != Some(model.total_tokens()) {
            return Err(format_err(1, format!("header token count {tokens:?} does not match {} counted", model.total_tokens())));
        }
        Ok(model)
    }
}

fn fallback_distribution(tag_totals: &BTreeMap<String, u64>, k: usize) -> Vec<(String, f64)> {
    let mut open: Vec<(&String, u64)> =
        tag_totals.iter().filter(|(t, _)| OPEN_CLASS_TAGS.contains(&t.as_str())).map(|(t, &n)| (t, n)).collect();
    if open.is_empty() {
        open = tag_totals.iter().map(|(t, &n)| (t, n)).collect();
    }
    open.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    open.truncate(k.max(1));
    let total: u64 = open.iter().map(|(_, n)| n).sum();
    open.into_iter().map(|(t, n)| (t.clone(), n as f64 / total as f64)).collect()
}

/// Relative-frequency training over `(form, xpos)` tokens.
pub fn train_tagger<I, F, T>(tokens: I, fallback_k: usize) -> Result<TaggerModel, LexiconError>
where
    I: IntoIterator<Item = (F, T)>,
    F: AsRef<str>,
    T: AsRef<str>,
{
    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for (form, tag) in tokens {
        *counts.entry(form.as_ref().to_owned()).or_default().entry(tag.as_ref().to_owned()).or_default() += 1;
    }
    TaggerModel::from_counts(counts, fallback_k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedClassEntry {
    pub tag: Category,
    pub features: FeatureSet,
    pub weight: f64,
}

/// Hand-written tags for function words, keyed by lowercased form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClosedClassTable(BTreeMap<String, Vec<ClosedClassEntry>>);

impl ClosedClassTable {
    pub fn get(&self, form: &str) -> Option<&[ClosedClassEntry]> {
        self.0.get(&form.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn insert(&mut self, form: &str, entry: ClosedClassEntry) {
        self.0.entry(form.to_lowercase()).or_default().push(entry);
    }
}

/// Reads `form,tag,features,weight` lines. Features are `;`-separated.
/// Lines starting with `# ` are comments; an optional header row is skipped.
pub fn load_closed_class<R: BufRead>(source: R) -> Result<ClosedClassTable, LexiconError> {
    let mut table = ClosedClassTable::default();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with("# ") || line == "#" || line == "form,tag,features,weight" {
            continue;
        }
        // The form is the only column that may contain commas.
        let mut cols = line.rsplitn(4, ',');
        let (weight, feats, tag, form) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(w), Some(f), Some(t), Some(form)) => (w, f, t, form),
            _ => return Err(format_err(lineno, "expected `form,tag,features,weight`")),
        };
        if form.is_empty() {
            return Err(format_err(lineno, "empty form"));
        }
        let tag = Category::new(tag.trim()).map_err(|e| format_err(lineno, e.message))?;
        let weight: f64 = weight.trim().parse().map_err(|_| format_err(lineno, format!("bad weight {weight:?}")))?;
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(format_err(lineno, format!("weight {weight} outside (0, 1]")));
        }
        table.insert(form, ClosedClassEntry { tag, features: FeatureSet::from_names(split_features(feats)), weight });
    }
    for (form, entries) in &table.0 {
        let sum: f64 = entries.iter().map(|e| e.weight).sum();
        if sum > 1.0 + 1e-9 {
            return Err(format_err(0, format!("weights for {form:?} sum to {sum} > 1")));
        }
    }
    Ok(table)
}

/// Drops hypotheses at or below `cutoff`, renormalizes, sorts by weight.
/// If nothing survives, the best hypothesis is kept alone with weight 1.
fn finalize(mut hyps: Vec<TagHypothesis>, cutoff: f64) -> Vec<TagHypothesis> {
    hyps.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then_with(|| a.tag.cmp(&b.tag))
            .then_with(|| a.features.cmp(&b.features))
    });
    let kept: Vec<TagHypothesis> = hyps.iter().filter(|h| h.weight > cutoff).cloned().collect();
    if kept.is_empty() {
        let mut best = hyps.into_iter().next().expect("no tag hypotheses");
        best.weight = 1.0;
        return vec![best];
    }
    let total: f64 = kept.iter().map(|h| h.weight).sum();
    kept.into_iter().map(|h| TagHypothesis { weight: h.weight / total, ..h }).collect()
}

/// Tag hypotheses for one form. `token_index` of the result is 0.
/// Category for a treebank tag. Tags that are not valid category names
/// (`,`, `#`, ...) are renamed: `,` becomes `COMMA`, `#` becomes `HASH`,
/// any other offending character becomes `_`.
pub fn tag_category(tag: &str) -> Category {
    let name = match tag {
        "," => "COMMA".to_owned(),
        "#" => "HASH".to_owned(),
        "" => "XX".to_owned(),
        t => t.chars().map(|c| if c.is_whitespace() || "[],^#".contains(c) { '_' } else { c }).collect(),
    };
    Category::new(&name).expect("sanitized tag is a valid category")
}

pub fn tag_token(model: &TaggerModel, closed: &ClosedClassTable, form: &str, cutoff: f64) -> TagDistribution {
    assert!((0.0..1.0).contains(&cutoff), "cutoff must be in [0, 1)");
    let hyps: Vec<TagHypothesis> = match closed.get(form) {
        Some(entries) => entries
            .iter()
            .map(|e| TagHypothesis { tag: e.tag.clone(), weight: e.weight, features: e.features.clone() })
            .collect(),
        None => model
            .distribution(form)
            .into_iter()
            .map(|(tag, weight)| {
                let features = model.tag_features.get(&tag);
                TagHypothesis { tag: tag_category(&tag), weight, features }
            })
            .collect(),
    };
    TagDistribution { token_index: 0, form: form.to_owned(), hypotheses: finalize(hyps, cutoff) }
}

pub fn tag_sentence<S: AsRef<str>>(
    model: &TaggerModel,
    closed: &ClosedClassTable,
    tokens: &[S],
    cutoff: f64,
) -> Vec<TagDistribution> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, form)| TagDistribution { token_index: i, ..tag_token(model, closed, form.as_ref(), cutoff) })
        .collect()
}

/// Gold-tag passthrough: one hypothesis with weight 1 from the treebank's
/// XPOS column. Closed-class forms still use the closed-class table, since
/// the grammar's custom categories (AUX, HAVE, ...) only come from there.
pub fn gold_distribution(
    closed: &ClosedClassTable,
    tag_features: &TagFeatures,
    token_index: usize,
    form: &str,
    xpos: &str,
    cutoff: f64,
) -> TagDistribution {
    let hyps = match closed.get(form) {
        Some(entries) => entries
            .iter()
            .map(|e| TagHypothesis { tag: e.tag.clone(), weight: e.weight, features: e.features.clone() })
            .collect(),
        None => vec![TagHypothesis { tag: tag_category(xpos), weight: 1.0, features: tag_features.get(xpos) }],
    };
    TagDistribution { token_index, form: form.to_owned(), hypotheses: finalize(hyps, cutoff) }
}
