//! CoNLL-U reading and unlabeled attachment scoring.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::pipeline::{Pipeline, PipelineError};

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("sentence {sentence} (line {line}): {message}")]
    Format { sentence: usize, line: usize, message: String },
    #[error("head arrays differ in length: predicted {pred}, gold {gold}")]
    LengthMismatch { pred: usize, gold: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldToken {
    /// 1-based.
    pub id: usize,
    pub form: String,
    pub xpos: String,
    /// 1-based, 0 for the root.
    pub head: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GoldSentence {
    pub sent_id: Option<String>,
    pub tokens: Vec<GoldToken>,
}

impl GoldSentence {
    pub fn forms(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.form.clone()).collect()
    }

    pub fn xpos(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.xpos.clone()).collect()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }
}

/// Reads every sentence. Multiword-token ranges (`3-4`) and empty nodes
/// (`5.1`) are skipped. XPOS falls back to UPOS when it is `_`.
pub fn read_conllu<R: BufRead>(source: R) -> Result<Vec<GoldSentence>, TreebankError> {
    let mut sentences = Vec::new();
    let mut current = GoldSentence::default();
    let mut in_sentence = false;
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        let index = sentences.len() + 1;
        let err = |message: String| TreebankError::Format { sentence: index, line: lineno, message };
        if line.trim().is_empty() {
            if in_sentence {
                finish(&mut current, index, lineno)?;
                sentences.push(std::mem::take(&mut current));
                in_sentence = false;
            }
            continue;
        }
        in_sentence = true;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(id) = comment.trim().strip_prefix("sent_id") {
                let id = id.trim_start().trim_start_matches('=').trim();
                current.sent_id = Some(id.to_owned());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(err(format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| err(format!("bad token id {:?}", cols[0])))?;
        if id != current.tokens.len() + 1 {
            return Err(err(format!("token id {id} out of sequence, expected {}", current.tokens.len() + 1)));
        }
        let head: usize = cols[6].parse().map_err(|_| err(format!("non-integer head {:?}", cols[6])))?;
        let xpos = if cols[4] == "_" { cols[3] } else { cols[4] };
        current.tokens.push(GoldToken { id, form: cols[1].to_owned(), xpos: xpos.to_owned(), head });
    }
    if in_sentence {
        let index = sentences.len() + 1;
        finish(&mut current, index, 0)?;
        sentences.push(current);
    }
    Ok(sentences)
}

fn finish(s: &mut GoldSentence, sentence: usize, line: usize) -> Result<(), TreebankError> {
    let n = s.tokens.len();
    if let Some(t) = s.tokens.iter().find(|t| t.head > n) {
        return Err(TreebankError::Format { sentence, line, message: format!("head {} of token {} beyond {n} tokens", t.head, t.id) });
    }
    Ok(())
}

pub fn read_conllu_file(path: &Path) -> Result<Vec<GoldSentence>, TreebankError> {
    read_conllu(BufReader::new(File::open(path)?))
}

/// `(correct, total)` with heads encoded 1-based, 0 = root, on both sides.
pub fn uas(pred: &[usize], gold: &[usize]) -> Result<(usize, usize), TreebankError> {
    if pred.len() != gold.len() {
        return Err(TreebankError::LengthMismatch { pred: pred.len(), gold: gold.len() });
    }
    let correct = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok((correct, gold.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub gold_tags: bool,
    pub jobs: usize,
    /// Include per-sentence scores in the report.
    pub per_sentence: bool,
    /// Include wall-clock seconds in the JSON report.
    pub timings: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { gold_tags: false, jobs: 1, per_sentence: false, timings: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceScore {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sent_id: Option<String>,
    pub correct: usize,
    pub total: usize,
    pub budget_exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileReport {
    pub file: String,
    pub sentences: usize,
    pub tokens: usize,
    pub correct: usize,
    pub uas: f64,
    pub budget_exceeded: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_sentence: Vec<SentenceScore>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub files: Vec<FileReport>,
    /// Mean of per-file UAS over files that were read.
    pub macro_uas: f64,
    /// Pooled over all tokens.
    pub micro_uas: f64,
    pub sentences: usize,
    pub tokens: usize,
    pub correct: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl CorpusReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable report")
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let width = self.files.iter().map(|f| f.file.len()).max().unwrap_or(4).max(4);
        writeln!(out, "{:<width$}  {:>9}  {:>8}  {:>8}  {:>7}  {:>8}", "file", "sentences", "tokens", "correct", "UAS%", "seconds").unwrap();
        for f in &self.files {
            match &f.error {
                Some(e) => writeln!(out, "{:<width$}  error: {e}", f.file).unwrap(),
                None => writeln!(
                    out,
                    "{:<width$}  {:>9}  {:>8}  {:>8}  {:>7.2}  {:>8.2}",
                    f.file,
                    f.sentences,
                    f.tokens,
                    f.correct,
                    100.0 * f.uas,
                    f.wall_seconds
                )
                .unwrap(),
            }
        }
        writeln!(out, "macro UAS {:.2}%  micro UAS {:.2}%  ({} sentences, {} tokens)", 100.0 * self.macro_uas, 100.0 * self.micro_uas, self.sentences, self.tokens).unwrap();
        out
    }
}

/// Parses each sentence (best hypothesis only) and scores its heads.
pub fn evaluate_sentences(
    sentences: &[GoldSentence],
    pipeline: &Pipeline,
    opts: &EvalOptions,
) -> Result<Vec<SentenceScore>, PipelineError> {
    let score_one = |(index, s): (usize, &GoldSentence)| -> Result<SentenceScore, PipelineError> {
        let forms = s.forms();
        let gold_tags = opts.gold_tags.then(|| s.xpos());
        let parse = pipeline.parse(&forms, gold_tags.as_deref(), 1, false)?;
        let pred: Vec<usize> = match parse.results.first() {
            Some(r) => r.heads.iter().map(|h| h.to_conll()).collect(),
            None => Vec::new(),
        };
        let (correct, total) = uas(&pred, &s.heads()).expect("one head per token");
        Ok(SentenceScore { index: index + 1, sent_id: s.sent_id.clone(), correct, total, budget_exceeded: parse.budget_exceeded })
    };
    if opts.jobs <= 1 {
        return sentences.iter().enumerate().map(score_one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build().expect("thread pool");
    pool.install(|| sentences.par_iter().enumerate().map(score_one).collect())
}

fn file_report(path: &Path, pipeline: &Pipeline, opts: &EvalOptions) -> Result<FileReport, PipelineError> {
    let started = Instant::now();
    let name = path.display().to_string();
    let sentences = match read_conllu_file(path) {
        Ok(s) => s,
        Err(e) => {
            return Ok(FileReport {
                file: name,
                sentences: 0,
                tokens: 0,
                correct: 0,
                uas: 0.0,
                budget_exceeded: 0,
                seconds: None,
                error: Some(e.to_string()),
                per_sentence: Vec::new(),
                wall_seconds: 0.0,
            })
        }
    };
    let scores = evaluate_sentences(&sentences, pipeline, opts)?;
    let tokens: usize = scores.iter().map(|s| s.total).sum();
    let correct: usize = scores.iter().map(|s| s.correct).sum();
    let wall = started.elapsed().as_secs_f64();
    Ok(FileReport {
        file: name,
        sentences: sentences.len(),
        tokens,
        correct,
        uas: if tokens == 0 { 0.0 } else { correct as f64 / tokens as f64 },
        budget_exceeded: scores.iter().filter(|s| s.budget_exceeded).count(),
        seconds: opts.timings.then_some(wall),
        error: None,
        per_sentence: if opts.per_sentence { scores } else { Vec::new() },
        wall_seconds: wall,
    })
}

/// Scores every file. Unreadable files are reported and skipped.
pub fn evaluate_corpus(files: &[PathBuf], pipeline: &Pipeline, opts: &EvalOptions) -> Result<CorpusReport, PipelineError> {
    let started = Instant::now();
    let files: Vec<FileReport> = files.iter().map(|f| file_report(f, pipeline, opts)).collect::<Result<_, _>>()?;
    Ok(summarize(files, opts.timings.then(|| started.elapsed().as_secs_f64())))
}

pub fn summarize(files: Vec<FileReport>, seconds: Option<f64>) -> CorpusReport {
    let read: Vec<&FileReport> = files.iter().filter(|f| f.error.is_none()).collect();
    let tokens: usize = read.iter().map(|f| f.tokens).sum();
    let correct: usize = read.iter().map(|f| f.correct).sum();
    let macro_uas = if read.is_empty() { 0.0 } else { read.iter().map(|f| f.uas).sum::<f64>() / read.len() as f64 };
    CorpusReport {
        macro_uas,
        micro_uas: if tokens == 0 { 0.0 } else { correct as f64 / tokens as f64 },
        sentences: read.iter().map(|f| f.sentences).sum(),
        tokens,
        correct,
        seconds,
        files,
    }
}
