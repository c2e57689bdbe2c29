//! Phrases and the per-sentence phrase index.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::grammar::{constraints_satisfied, Category, FeatureConstraint, FeatureSet, RuleId};

/// Index of a phrase in its chart, in creation order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhraseId(pub u32);

impl fmt::Display for PhraseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A chart item: a category over a token extent, built from 0-2 children.
///
/// `start..=end` is the extent. `span` counts the tokens actually covered by
/// leaves; it is smaller than the extent when tokens were skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Phrase {
    /// Assigned by [`Chart::add_phrase`].
    pub id: PhraseId,
    pub wt: f64,
    pub start: usize,
    pub end: usize,
    pub span: usize,
    pub cat: Category,
    pub feat: FeatureSet,
    pub head_loc: usize,
    pub children: Vec<PhraseId>,
    /// Position of the head in `children` (non-leaves only).
    pub head_child: Option<usize>,
    pub level: u32,
    pub rule: Option<RuleId>,
}

impl Phrase {
    pub fn leaf(token: usize, cat: Category, feat: FeatureSet, wt: f64) -> Self {
        Phrase {
            id: PhraseId::default(),
            wt,
            start: token,
            end: token,
            span: 1,
            cat,
            feat,
            head_loc: token,
            children: Vec::new(),
            head_child: None,
            level: 0,
            rule: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn extent(&self) -> usize {
        self.end - self.start + 1
    }

    /// Tokens inside the extent not covered by any leaf.
    pub fn internal_skips(&self) -> usize {
        self.extent() - self.span
    }

    /// `CAT` or `CAT[f1,f2]`.
    pub fn label(&self) -> String {
        if self.feat.is_empty() {
            self.cat.to_string()
        } else {
            format!("{}[{}]", self.cat, self.feat.iter().collect::<Vec<_>>().join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("chart invariant violated: {0}")]
pub struct InvariantViolation(pub String);

/// Outcome of inserting a phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    Added(PhraseId),
    /// An equivalent phrase (same category, extent, features, head and
    /// children) is already present.
    Duplicate,
    /// Stored, but pushed out of its cell by the beam straight away.
    Evicted(PhraseId),
}

impl Insertion {
    pub fn added(&self) -> Option<PhraseId> {
        match self {
            Insertion::Added(id) => Some(*id),
            _ => None,
        }
    }
}

#[derive(Clone, Hash, PartialEq, Eq)]
struct DedupKey {
    cat: Category,
    start: usize,
    end: usize,
    feat: FeatureSet,
    head_loc: usize,
    children: Vec<PhraseId>,
}

/// Every phrase created for one sentence, indexed as
/// `index[end][start][category] -> phrases`.
#[derive(Debug, Clone)]
pub struct Chart {
    sentence_length: usize,
    phrases: Vec<Phrase>,
    live: Vec<bool>,
    index: Vec<Vec<HashMap<Category, Vec<PhraseId>>>>,
    dedup: HashSet<DedupKey>,
    beam_per_cell: Option<usize>,
    pub budget_exceeded: bool,
}

impl std::fmt::Debug for DedupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}-{}", self.cat, self.start, self.end)
    }
}

impl Chart {
    pub fn new(sentence_length: usize) -> Self {
        Chart {
            sentence_length,
            phrases: Vec::new(),
            live: Vec::new(),
            index: (0..sentence_length).map(|end| vec![HashMap::new(); end + 1]).collect(),
            dedup: HashSet::new(),
            beam_per_cell: None,
            budget_exceeded: false,
        }
    }

    /// Caps every `(end, start, category)` cell at `beam` phrases.
    pub fn with_beam(mut self, beam: Option<usize>) -> Self {
        assert!(beam != Some(0), "beam must be at least 1");
        self.beam_per_cell = beam;
        self
    }

    pub fn sentence_length(&self) -> usize {
        self.sentence_length
    }

    pub fn get(&self, id: PhraseId) -> &Phrase {
        &self.phrases[id.0 as usize]
    }

    /// Every phrase ever stored, including ones evicted by the beam.
    pub fn all_phrases(&self) -> &[Phrase] {
        &self.phrases
    }

    pub fn is_live(&self, id: PhraseId) -> bool {
        self.live[id.0 as usize]
    }

    /// Phrases currently reachable through the index, in id order.
    pub fn live_phrases(&self) -> impl Iterator<Item = &Phrase> {
        self.phrases.iter().filter(|p| self.live[p.id.0 as usize])
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn cell(&self, end: usize, start: usize, cat: &Category) -> &[PhraseId] {
        self.index
            .get(end)
            .and_then(|row| row.get(start))
            .and_then(|cell| cell.get(cat))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Live phrases over exactly `start..=end`, any category, in id order.
    pub fn phrases_over(&self, start: usize, end: usize) -> Vec<PhraseId> {
        let mut ids: Vec<PhraseId> = self.index[end][start].values().flatten().copied().collect();
        ids.sort_unstable();
        ids
    }

    fn check(&self, p: &Phrase) -> Result<(), InvariantViolation> {
        let fail = |msg: String| Err(InvariantViolation(format!("{} {}-{}: {}", p.cat, p.start, p.end, msg)));
        if p.start > p.end || p.end >= self.sentence_length {
            return fail(format!("extent outside sentence of length {}", self.sentence_length));
        }
        if p.head_loc < p.start || p.head_loc > p.end {
            return fail(format!("head {} outside extent", p.head_loc));
        }
        if p.span == 0 || p.span > p.extent() {
            return fail(format!("span {} not in 1..={}", p.span, p.extent()));
        }
        if p.wt.is_nan() || p.wt < 0.0 {
            return fail(format!("weight {}", p.wt));
        }
        if p.is_leaf() {
            if p.level != 0 || p.span != 1 || p.start != p.end || p.head_child.is_some() {
                return fail("malformed leaf".into());
            }
            return Ok(());
        }
        if p.children.len() > 2 || p.children.iter().any(|c| c.0 as usize >= self.phrases.len()) {
            return fail("bad children".into());
        }
        let kids: Vec<&Phrase> = p.children.iter().map(|&c| self.get(c)).collect();
        let head = match p.head_child {
            Some(h) if h < kids.len() => kids[h],
            _ => return fail("missing head child".into()),
        };
        if head.head_loc != p.head_loc {
            return fail("head_loc differs from head child's".into());
        }
        if kids.len() == 2 && kids[0].end >= kids[1].start {
            return fail("children overlap or are out of order".into());
        }
        let first = kids[0];
        let last = kids[kids.len() - 1];
        if p.start != first.start || p.end != last.end {
            return fail("extent does not match children".into());
        }
        let span: usize = kids.iter().map(|k| k.span).sum();
        let wt = kids.iter().map(|k| k.wt).fold(0.0, |a, b| a + b);
        let level = kids.iter().map(|k| k.level).max().unwrap() + 1;
        if span != p.span || wt != p.wt || level != p.level {
            return fail("span, weight or level is not derived from children".into());
        }
        Ok(())
    }

    /// Stores `p` and assigns its id. Exact duplicates are refused. When
    /// the cell then holds more than the beam allows, its lowest-ranked
    /// phrase leaves the index (ranking: weight, then level, then lower id).
    pub fn add_phrase(&mut self, mut p: Phrase) -> Result<Insertion, InvariantViolation> {
        self.check(&p)?;
        let key = DedupKey {
            cat: p.cat.clone(),
            start: p.start,
            end: p.end,
            feat: p.feat.clone(),
            head_loc: p.head_loc,
            children: p.children.clone(),
        };
        if self.dedup.contains(&key) {
            return Ok(Insertion::Duplicate);
        }
        self.dedup.insert(key);

        let id = PhraseId(self.phrases.len() as u32);
        p.id = id;
        let (start, end, cat) = (p.start, p.end, p.cat.clone());
        self.phrases.push(p);
        self.live.push(true);
        let cell = self.index[end][start].entry(cat).or_default();
        cell.push(id);

        if let Some(beam) = self.beam_per_cell {
            if cell.len() > beam {
                let phrases = &self.phrases;
                let worst = *cell
                    .iter()
                    .min_by(|&&a, &&b| rank_cmp(&phrases[a.0 as usize], &phrases[b.0 as usize]))
                    .unwrap();
                cell.retain(|&x| x != worst);
                self.live[worst.0 as usize] = false;
                if worst == id {
                    return Ok(Insertion::Evicted(id));
                }
            }
        }
        Ok(Insertion::Added(id))
    }

    /// Live phrases of category `cat` satisfying `constraints` whose end
    /// leaves a gap of `0..=max_skip` tokens before `right_start`. Sorted
    /// by descending end, then descending weight, then id.
    pub fn left_neighbors(
        &self,
        right_start: usize,
        max_skip: usize,
        cat: &Category,
        constraints: &[FeatureConstraint],
    ) -> Vec<PhraseId> {
        let mut out = Vec::new();
        if right_start == 0 {
            return out;
        }
        let last = right_start - 1;
        let first = last.saturating_sub(max_skip);
        for end in (first..=last).rev() {
            let mut at_end: Vec<PhraseId> = Vec::new();
            for start in 0..=end {
                if let Some(ids) = self.index[end][start].get(cat) {
                    at_end.extend(ids.iter().copied().filter(|&id| constraints_satisfied(constraints, &self.get(id).feat)));
                }
            }
            at_end.sort_by(|&a, &b| self.get(b).wt.total_cmp(&self.get(a).wt).then(a.cmp(&b)));
            out.extend(at_end);
        }
        out
    }

    /// One line per phrase, for tracing.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in &self.phrases {
            let children: Vec<String> = p.children.iter().map(|c| c.to_string()).collect();
            writeln!(
                out,
                "{}\t{}\t{}-{}\tspan={}\twt={}\tlevel={}\thead={}\tchildren=[{}]{}{}",
                p.id,
                p.label(),
                p.start,
                p.end,
                p.span,
                p.wt,
                p.level,
                p.head_loc,
                children.join(","),
                p.rule.map(|r| format!("\trule={r}")).unwrap_or_default(),
                if self.is_live(p.id) { "" } else { "\tevicted" },
            )
            .unwrap();
        }
        out
    }
}

/// Beam ranking: higher weight, then higher level, then lower id wins.
pub(crate) fn rank_cmp(a: &Phrase, b: &Phrase) -> std::cmp::Ordering {
    a.wt.total_cmp(&b.wt).then(a.level.cmp(&b.level)).then(b.id.cmp(&a.id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(s: &str) -> Category {
        Category::new(s).unwrap()
    }

    fn leaf(i: usize, c: &str, wt: f64) -> Phrase {
        Phrase::leaf(i, cat(c), FeatureSet::empty(), wt)
    }

    fn binary(chart: &Chart, c: &str, left: PhraseId, right: PhraseId, head: usize) -> Phrase {
        let (l, r) = (chart.get(left), chart.get(right));
        let h = if head == 0 { l } else { r };
        Phrase {
            id: PhraseId::default(),
            wt: l.wt + r.wt,
            start: l.start,
            end: r.end,
            span: l.span + r.span,
            cat: cat(c),
            feat: FeatureSet::empty(),
            head_loc: h.head_loc,
            children: vec![left, right],
            head_child: Some(head),
            level: l.level.max(r.level) + 1,
            rule: None,
        }
    }

    #[test]
    fn leaf_record() {
        let mut chart = Chart::new(6);
        let p = Phrase::leaf(5, cat("IN"), FeatureSet::from_names(["loc"]), 1.0);
        let id = chart.add_phrase(p).unwrap().added().unwrap();
        assert_eq!(chart.cell(5, 5, &cat("IN")), &[id]);
        let p = chart.get(id);
        assert_eq!((p.wt, p.span, p.start, p.end, p.head_loc, p.level), (1.0, 1, 5, 5, 5, 0));
        assert!(p.children.is_empty());
    }

    #[test]
    fn duplicates_are_refused() {
        let mut chart = Chart::new(6);
        chart.add_phrase(leaf(5, "IN", 1.0)).unwrap();
        assert_eq!(chart.add_phrase(leaf(5, "IN", 1.0)).unwrap(), Insertion::Duplicate);
        assert_eq!(chart.cell(5, 5, &cat("IN")).len(), 1);
    }

    #[test]
    fn ambiguity_is_retained() {
        let mut chart = Chart::new(3);
        let a = chart.add_phrase(leaf(0, "DT", 1.0)).unwrap().added().unwrap();
        let b = chart.add_phrase(leaf(1, "NN", 1.0)).unwrap().added().unwrap();
        let b2 = chart.add_phrase(leaf(1, "JJ", 1.0)).unwrap().added().unwrap();
        let c = chart.add_phrase(leaf(2, "NN", 1.0)).unwrap().added().unwrap();
        let ab = binary(&chart, "X", a, b, 1);
        let ab = chart.add_phrase(ab).unwrap().added().unwrap();
        let ab2 = binary(&chart, "X", a, b2, 1);
        let ab2 = chart.add_phrase(ab2).unwrap().added().unwrap();
        let p1 = binary(&chart, "NP", ab, c, 1);
        let p2 = binary(&chart, "NP", ab2, c, 1);
        chart.add_phrase(p1).unwrap();
        chart.add_phrase(p2).unwrap();
        assert_eq!(chart.cell(2, 0, &cat("NP")).len(), 2);
    }

    #[test]
    fn rejects_broken_phrases() {
        let mut chart = Chart::new(3);
        let a = chart.add_phrase(leaf(0, "DT", 0.5)).unwrap().added().unwrap();
        let b = chart.add_phrase(leaf(1, "NN", 0.5)).unwrap().added().unwrap();
        assert!(chart.add_phrase(leaf(3, "NN", 1.0)).is_err());

        let mut p = binary(&chart, "NP", a, b, 1);
        p.wt = 2.0;
        assert!(chart.add_phrase(p).is_err());
        let mut p = binary(&chart, "NP", a, b, 1);
        p.head_loc = 0;
        assert!(chart.add_phrase(p).is_err());
        let p = binary(&chart, "NP", b, a, 0);
        assert!(chart.add_phrase(p).is_err());
        let mut p = binary(&chart, "NP", a, b, 1);
        p.span = 3;
        assert!(chart.add_phrase(p).is_err());
    }

    #[test]
    fn adjacency_and_gap_bound() {
        let mut chart = Chart::new(5);
        let dt = chart.add_phrase(leaf(0, "DT", 1.0)).unwrap().added().unwrap();
        assert_eq!(chart.left_neighbors(1, 0, &cat("DT"), &[]), vec![dt]);
        assert!(chart.left_neighbors(3, 1, &cat("DT"), &[]).is_empty());
        assert_eq!(chart.left_neighbors(3, 2, &cat("DT"), &[]), vec![dt]);
        assert!(chart.left_neighbors(0, 2, &cat("DT"), &[]).is_empty());
    }

    #[test]
    fn neighbors_sorted_by_end_then_weight() {
        let mut chart = Chart::new(6);
        let np2 = chart.add_phrase(leaf(2, "NP", 1.0)).unwrap().added().unwrap();
        let np3 = chart.add_phrase(leaf(3, "NP", 0.5)).unwrap().added().unwrap();
        let np3b = chart.add_phrase(Phrase::leaf(3, cat("NP"), FeatureSet::from_names(["x"]), 0.9)).unwrap().added().unwrap();
        assert_eq!(chart.left_neighbors(5, 2, &cat("NP"), &[]), vec![np3b, np3, np2]);
        let only_x = [FeatureConstraint::positive("x")];
        assert_eq!(chart.left_neighbors(5, 2, &cat("NP"), &only_x), vec![np3b]);
    }

    #[test]
    fn beam_evicts_lowest_weight() {
        let mut chart = Chart::new(1).with_beam(Some(2));
        let feats = |s: &str| FeatureSet::from_names([s]);
        let a = chart.add_phrase(Phrase::leaf(0, cat("N"), feats("a"), 0.5)).unwrap();
        let b = chart.add_phrase(Phrase::leaf(0, cat("N"), feats("b"), 0.7)).unwrap();
        assert!(a.added().is_some() && b.added().is_some());
        let c = chart.add_phrase(Phrase::leaf(0, cat("N"), feats("c"), 0.1)).unwrap();
        assert!(matches!(c, Insertion::Evicted(_)));
        let d = chart.add_phrase(Phrase::leaf(0, cat("N"), feats("d"), 0.9)).unwrap();
        assert!(d.added().is_some());
        assert!(!chart.is_live(a.added().unwrap()));
        assert_eq!(chart.cell(0, 0, &cat("N")).len(), 2);
        assert_eq!(chart.live_phrases().count(), 2);
        assert_eq!(chart.all_phrases().len(), 4);
    }

    #[test]
    fn dump_has_one_line_per_phrase() {
        let mut chart = Chart::new(2);
        chart.add_phrase(leaf(0, "DT", 1.0)).unwrap();
        chart.add_phrase(leaf(1, "NN", 1.0)).unwrap();
        assert_eq!(chart.dump().lines().count(), 2);
        assert!(chart.dump().starts_with("#0\tDT\t0-0"));
    }
}
