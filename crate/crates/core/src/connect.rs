//! Chunk connection and hypothesis ranking.
//!
//! When no single phrase covers the sentence, the best sequence of chunks is
//! found as a shortest path over token positions `0..=n`. Every live phrase
//! is an edge `start -> end + 1`; every position also has a skip edge
//! `i -> i + 1`. Edge costs favour few, heavy, gap-free chunks.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use crate::chart::{Chart, Phrase, PhraseId};
use crate::export;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootChoice {
    /// The leftmost chunk's head becomes the sentence root.
    Leftmost,
    /// The heaviest chunk's head (leftmost on ties).
    Heaviest,
}

impl std::str::FromStr for RootChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leftmost" => Ok(RootChoice::Leftmost),
            "heaviest" => Ok(RootChoice::Heaviest),
            other => Err(format!("unknown root choice {other:?} (expected leftmost or heaviest)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectConfig {
    /// Cost per token skipped inside a phrase.
    pub lambda: f64,
    /// Cost reduction per unit of phrase weight.
    pub mu: f64,
    /// Floor for phrase edge costs.
    pub epsilon: f64,
    /// Cost of a skip edge.
    pub sigma: f64,
    /// Score penalty per extra chunk.
    pub alpha: f64,
    /// Score penalty per skipped token.
    pub beta: f64,
    /// Alternatives considered per chunk when ranking.
    pub alternatives: usize,
    pub root: RootChoice,
}

impl Default for ConnectConfig {
    fn default() -> Self {
        ConnectConfig {
            lambda: 0.5,
            mu: 0.25,
            epsilon: 0.01,
            sigma: 2.0,
            alpha: 0.5,
            beta: 1.0,
            alternatives: 8,
            root: RootChoice::Leftmost,
        }
    }
}

impl ConnectConfig {
    pub fn phrase_cost(&self, p: &Phrase) -> f64 {
        (1.0 + self.lambda * p.internal_skips() as f64 - self.mu * p.wt).max(self.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkPath {
    /// Left to right, non-overlapping.
    pub chunks: Vec<PhraseId>,
    /// Tokens covered by no chunk leaf, sorted. Includes gaps inside chunks.
    pub skipped: Vec<usize>,
    pub cost: f64,
}

/// A path label; compared by cost, then chunk count, then skipped tokens,
/// then the chunk id sequence.
#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    chunks: usize,
    skipped: usize,
    ids: Vec<PhraseId>,
}

impl Label {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.chunks.cmp(&other.chunks))
            .then(self.skipped.cmp(&other.skipped))
            .then_with(|| self.ids.cmp(&other.ids))
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}
impl Eq for Label {}
impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

#[derive(Debug, Clone, Copy)]
enum Edge {
    Phrase(PhraseId),
    Skip,
}

/// Tokens covered by `p`'s leaves.
pub fn covered_tokens(chart: &Chart, p: PhraseId) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![p];
    while let Some(id) = stack.pop() {
        let ph = chart.get(id);
        if ph.is_leaf() {
            out.push(ph.start);
        } else {
            stack.extend(ph.children.iter().copied());
        }
    }
    out.sort_unstable();
    out
}

fn skipped_tokens(chart: &Chart, chunks: &[PhraseId]) -> Vec<usize> {
    let n = chart.sentence_length();
    let mut covered = vec![false; n];
    for &c in chunks {
        for t in covered_tokens(chart, c) {
            covered[t] = true;
        }
    }
    (0..n).filter(|&i| !covered[i]).collect()
}

/// Minimum-cost chunk sequence over the live phrases of `chart`.
pub fn connect_chunks(chart: &Chart, cfg: &ConnectConfig) -> ChunkPath {
    let n = chart.sentence_length();
    let mut out_edges: Vec<Vec<(usize, f64, Edge, usize)>> = vec![Vec::new(); n + 1];
    for p in chart.live_phrases() {
        out_edges[p.start].push((p.end + 1, cfg.phrase_cost(p), Edge::Phrase(p.id), p.internal_skips()));
    }
    for (i, edges) in out_edges.iter_mut().enumerate().take(n) {
        edges.push((i + 1, cfg.sigma, Edge::Skip, 1));
    }

    let mut best: Vec<Option<Label>> = vec![None; n + 1];
    let mut back: Vec<Option<(usize, Edge)>> = vec![None; n + 1];
    let mut done = vec![false; n + 1];
    let mut heap = BinaryHeap::new();
    let start = Label { cost: 0.0, chunks: 0, skipped: 0, ids: Vec::new() };
    best[0] = Some(start.clone());
    heap.push(Reverse((start, 0usize)));

    while let Some(Reverse((label, node))) = heap.pop() {
        if done[node] || best[node].as_ref() != Some(&label) {
            continue;
        }
        done[node] = true;
        if node == n {
            break;
        }
        for &(to, cost, edge, skipped) in &out_edges[node] {
            let mut next = Label {
                cost: label.cost + cost,
                chunks: label.chunks,
                skipped: label.skipped + skipped,
                ids: label.ids.clone(),
            };
            if let Edge::Phrase(id) = edge {
                next.chunks += 1;
                next.ids.push(id);
            }
            if best[to].as_ref().is_none_or(|b| next < *b) {
                best[to] = Some(next.clone());
                back[to] = Some((node, edge));
                heap.push(Reverse((next, to)));
            }
        }
    }

    let label = best[n].clone().expect("skip edges always reach the end");
    let chunks = label.ids;
    ChunkPath { skipped: skipped_tokens(chart, &chunks), chunks, cost: label.cost }
}

/// A ranked parse hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseResult {
    pub path: ChunkPath,
    pub score: f64,
    pub heads: Vec<export::Head>,
    /// Tag of each token: its leaf in the chosen chunks, or the best leaf
    /// in the chart for skipped tokens.
    pub tags: Vec<String>,
    /// Every phrase in the chosen chunk trees, in id order.
    pub phrases: Vec<Phrase>,
    pub budget_exceeded: bool,
}

impl ParseResult {
    pub fn phrase(&self, id: PhraseId) -> &Phrase {
        let i = self.phrases.binary_search_by_key(&id, |p| p.id).expect("phrase not in result");
        &self.phrases[i]
    }

    pub fn chunks(&self) -> impl Iterator<Item = &Phrase> {
        self.path.chunks.iter().map(|&id| self.phrase(id))
    }
}

/// `Σ chunk wt − α·(chunks − 1) − β·skipped`.
pub fn score(chart: &Chart, chunks: &[PhraseId], skipped: usize, cfg: &ConnectConfig) -> f64 {
    let wt: f64 = chunks.iter().map(|&c| chart.get(c).wt).sum();
    wt - cfg.alpha * chunks.len().saturating_sub(1) as f64 - cfg.beta * skipped as f64
}

fn candidate_order(a: &Phrase, b: &Phrase, beta: f64) -> Ordering {
    let va = a.wt - beta * a.internal_skips() as f64;
    let vb = b.wt - beta * b.internal_skips() as f64;
    vb.total_cmp(&va).then(a.internal_skips().cmp(&b.internal_skips())).then(a.id.cmp(&b.id))
}

#[derive(Debug, Clone)]
struct Combo {
    score: f64,
    skipped: usize,
    ids: Vec<PhraseId>,
    picks: Vec<usize>,
}

impl Combo {
    /// Best first: higher score, fewer skipped tokens, smaller id sequence.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.skipped.cmp(&other.skipped))
            .then_with(|| self.ids.cmp(&other.ids))
    }
}

impl PartialEq for Combo {
    fn eq(&self, other: &Self) -> bool {
        self.rank_cmp(other) == Ordering::Equal
    }
}
impl Eq for Combo {}
impl PartialOrd for Combo {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Combo {
    // max-heap pops the best combo
    fn cmp(&self, other: &Self) -> Ordering {
        other.rank_cmp(self)
    }
}

/// Up to `k` hypotheses over the extents of `path`, best first. Each chunk
/// may be replaced by another live phrase over the same extent.
pub fn rank_results(chart: &Chart, path: &ChunkPath, k: usize, cfg: &ConnectConfig) -> Vec<ParseResult> {
    assert!(k >= 1, "k must be at least 1");
    let gap_tokens = {
        let mut covered = 0;
        for &c in &path.chunks {
            covered += chart.get(c).extent();
        }
        chart.sentence_length() - covered
    };
    let lists: Vec<Vec<PhraseId>> = path
        .chunks
        .iter()
        .map(|&c| {
            let p = chart.get(c);
            let mut alts = chart.phrases_over(p.start, p.end);
            alts.sort_by(|&a, &b| candidate_order(chart.get(a), chart.get(b), cfg.beta));
            alts.truncate(cfg.alternatives.max(1));
            alts
        })
        .collect();

    let make = |picks: Vec<usize>| -> Combo {
        let ids: Vec<PhraseId> = picks.iter().zip(&lists).map(|(&i, l)| l[i]).collect();
        let skipped = gap_tokens + ids.iter().map(|&id| chart.get(id).internal_skips()).sum::<usize>();
        Combo { score: score(chart, &ids, skipped, cfg), skipped, ids, picks }
    };

    let mut results = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut heap = BinaryHeap::new();
    let first = vec![0; lists.len()];
    seen.insert(first.clone());
    heap.push(make(first));
    while let Some(combo) = heap.pop() {
        for j in 0..lists.len() {
            if combo.picks[j] + 1 < lists[j].len() {
                let mut next = combo.picks.clone();
                next[j] += 1;
                if seen.insert(next.clone()) {
                    heap.push(make(next));
                }
            }
        }
        results.push(combo);
        if results.len() == k {
            break;
        }
    }
    results.sort();
    results.reverse();

    results
        .into_iter()
        .map(|c| {
            let skipped = skipped_tokens(chart, &c.ids);
            let chunk_path = ChunkPath { chunks: c.ids, skipped, cost: path.cost };
            build_result(chart, chunk_path, c.score, cfg)
        })
        .collect()
}

fn build_result(chart: &Chart, path: ChunkPath, score: f64, cfg: &ConnectConfig) -> ParseResult {
    let n = chart.sentence_length();
    let mut ids: Vec<PhraseId> = Vec::new();
    let mut stack: Vec<PhraseId> = path.chunks.clone();
    while let Some(id) = stack.pop() {
        ids.push(id);
        stack.extend(chart.get(id).children.iter().copied());
    }
    ids.sort_unstable();
    ids.dedup();
    let phrases: Vec<Phrase> = ids.iter().map(|&id| chart.get(id).clone()).collect();

    let mut tags: Vec<Option<String>> = vec![None; n];
    for p in phrases.iter().filter(|p| p.is_leaf()) {
        tags[p.start] = Some(p.cat.to_string());
    }
    let tags = tags
        .into_iter()
        .enumerate()
        .map(|(i, t)| t.unwrap_or_else(|| best_leaf_tag(chart, i)))
        .collect();

    let mut result = ParseResult {
        path,
        score,
        heads: Vec::new(),
        tags,
        phrases,
        budget_exceeded: chart.budget_exceeded,
    };
    result.heads = export::to_dependency(&result, cfg.root);
    result
}

fn best_leaf_tag(chart: &Chart, token: usize) -> String {
    chart
        .all_phrases()
        .iter()
        .filter(|p| p.is_leaf() && p.start == token)
        .min_by(|a, b| b.wt.total_cmp(&a.wt).then(a.id.cmp(&b.id)))
        .map(|p| p.cat.to_string())
        .unwrap_or_else(|| "_".to_owned())
}

/// Connects and ranks in one step.
pub fn best_results(chart: &Chart, k: usize, cfg: &ConnectConfig) -> Vec<ParseResult> {
    if chart.sentence_length() == 0 {
        return Vec::new();
    }
    let path = connect_chunks(chart, cfg);
    rank_results(chart, &path, k, cfg)
}
