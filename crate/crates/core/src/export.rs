//! Dependency, bracketed and combined JSON views of a parse.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chart::{Phrase, PhraseId};
use crate::connect::{ParseResult, RootChoice};

/// Head of a token: another token (0-based) or the sentence root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Head {
    Root,
    Token(usize),
}

impl Head {
    /// CoNLL-U encoding: 1-based token id, 0 for the root.
    pub fn to_conll(self) -> usize {
        match self {
            Head::Root => 0,
            Head::Token(i) => i + 1,
        }
    }

    pub fn from_conll(head: usize) -> Self {
        match head {
            0 => Head::Root,
            h => Head::Token(h - 1),
        }
    }
}

/// Arcs inside one chunk: each non-head child's head word depends on the
/// head child's head word, recursively. The chunk's own head is left unset.
pub fn chunk_arcs(result: &ParseResult, chunk: PhraseId, heads: &mut [Option<Head>]) {
    let mut stack = vec![chunk];
    while let Some(id) = stack.pop() {
        let p = result.phrase(id);
        if let Some(h) = p.head_child {
            for (i, &c) in p.children.iter().enumerate() {
                if i != h {
                    heads[result.phrase(c).head_loc] = Some(Head::Token(p.head_loc));
                }
            }
        }
        stack.extend(p.children.iter().copied());
    }
}

/// Head array for the whole sentence. Chunk heads other than the chosen
/// root, and skipped tokens, attach to the root word.
pub fn to_dependency(result: &ParseResult, root: RootChoice) -> Vec<Head> {
    let n = result.tags.len();
    let mut heads: Vec<Option<Head>> = vec![None; n];
    for &c in &result.path.chunks {
        chunk_arcs(result, c, &mut heads);
    }
    let chunks: Vec<&Phrase> = result.chunks().collect();
    let root_word = match root {
        RootChoice::Leftmost => chunks.first().map(|c| c.head_loc),
        RootChoice::Heaviest => chunks
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.wt.total_cmp(&b.wt).then(j.cmp(i)))
            .map(|(_, c)| c.head_loc),
    }
    .or_else(|| (n > 0).then_some(0));
    let Some(root_word) = root_word else {
        return Vec::new();
    };
    heads[root_word] = Some(Head::Root);
    heads.into_iter().map(|h| h.unwrap_or(Head::Token(root_word))).collect()
}

fn render_tree(result: &ParseResult, id: PhraseId, tokens: &[String], out: &mut String) {
    let p = result.phrase(id);
    if p.is_leaf() {
        let form = tokens.get(p.start).map(String::as_str).unwrap_or("_");
        write!(out, "({} {})", p.cat, escape_form(form)).unwrap();
        return;
    }
    write!(out, "({}", p.label()).unwrap();
    for &c in &p.children {
        out.push(' ');
        render_tree(result, c, tokens, out);
    }
    out.push(')');
}

fn escape_form(form: &str) -> String {
    form.replace('(', "-LRB-").replace(')', "-RRB-")
}

/// One bracketed tree per line: each chunk, and each skipped token as
/// `(SKIP form)`, in token order.
pub fn to_constituency(result: &ParseResult, tokens: &[String]) -> String {
    let mut items: Vec<(usize, String)> = Vec::new();
    for c in result.chunks() {
        let mut s = String::new();
        render_tree(result, c.id, tokens, &mut s);
        items.push((c.start, s));
    }
    for &t in &result.path.skipped {
        let form = tokens.get(t).map(String::as_str).unwrap_or("_");
        items.push((t, format!("(SKIP {})", escape_form(form))));
    }
    items.sort_by_key(|(pos, _)| *pos);
    let mut out = String::new();
    for (_, line) in items {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub id: usize,
    pub form: String,
    pub tag: String,
    /// `null` for the root.
    pub head: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseEntry {
    pub id: u32,
    pub wt: f64,
    pub span: usize,
    pub start: usize,
    pub end: usize,
    pub cat: String,
    pub feat: Vec<String>,
    pub head_loc: usize,
    pub children: Vec<u32>,
    pub level: u32,
}

/// Tokens with their heads plus the phrase list, children before parents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedRecord {
    pub tokens: Vec<TokenEntry>,
    pub phrases: Vec<PhraseEntry>,
}

impl CombinedRecord {
    pub fn heads(&self) -> Vec<Head> {
        self.tokens.iter().map(|t| t.head.map_or(Head::Root, Head::Token)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable record")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

pub fn to_combined(result: &ParseResult, tokens: &[String]) -> CombinedRecord {
    let tokens = result
        .heads
        .iter()
        .enumerate()
        .map(|(i, h)| TokenEntry {
            id: i,
            form: tokens.get(i).cloned().unwrap_or_default(),
            tag: result.tags[i].clone(),
            head: match h {
                Head::Root => None,
                Head::Token(t) => Some(*t),
            },
        })
        .collect();
    let phrases = result
        .phrases
        .iter()
        .map(|p| PhraseEntry {
            id: p.id.0,
            wt: p.wt,
            span: p.span,
            start: p.start,
            end: p.end,
            cat: p.cat.to_string(),
            feat: p.feat.to_vec(),
            head_loc: p.head_loc,
            children: p.children.iter().map(|c| c.0).collect(),
            level: p.level,
        })
        .collect();
    CombinedRecord { tokens, phrases }
}

/// Ten-column CoNLL-U for one sentence, terminated by a blank line.
pub fn to_conllu(tokens: &[String], tags: &[String], heads: &[Head], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    for (i, form) in tokens.iter().enumerate() {
        let tag = tags.get(i).map(String::as_str).unwrap_or("_");
        let head = heads.get(i).map(|h| h.to_conll().to_string()).unwrap_or_else(|| "_".into());
        writeln!(out, "{}\t{}\t_\t_\t{}\t_\t{}\tdep\t_\t_", i + 1, form, tag, head).unwrap();
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::connect::{best_results, ConnectConfig};
    use crate::grammar::{Category, FeatureSet};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn leaf(chart: &mut Chart, i: usize, c: &str, feats: &[&str]) -> PhraseId {
        chart
            .add_phrase(Phrase::leaf(i, Category::new(c).unwrap(), FeatureSet::from_names(feats), 1.0))
            .unwrap()
            .added()
            .unwrap()
    }

    fn join(chart: &mut Chart, c: &str, kids: &[PhraseId], head: usize) -> PhraseId {
        let ks: Vec<&Phrase> = kids.iter().map(|&k| chart.get(k)).collect();
        let p = Phrase {
            id: PhraseId::default(),
            wt: ks.iter().map(|k| k.wt).fold(0.0, |a, b| a + b),
            start: ks[0].start,
            end: ks[ks.len() - 1].end,
            span: ks.iter().map(|k| k.span).sum(),
            cat: Category::new(c).unwrap(),
            feat: FeatureSet::empty(),
            head_loc: ks[head].head_loc,
            children: kids.to_vec(),
            head_child: Some(head),
            level: ks.iter().map(|k| k.level).max().unwrap() + 1,
            rule: None,
        };
        chart.add_phrase(p).unwrap().added().unwrap()
    }

    #[test]
    fn determiner_attaches_to_noun() {
        let mut chart = Chart::new(2);
        let dt = leaf(&mut chart, 0, "DT", &[]);
        let nn = leaf(&mut chart, 1, "NP-U", &[]);
        join(&mut chart, "NP-DT", &[dt, nn], 1);
        let r = &best_results(&chart, 1, &ConnectConfig::default())[0];
        assert_eq!(r.heads, vec![Head::Token(1), Head::Root]);
    }

    #[test]
    fn single_token() {
        let mut chart = Chart::new(1);
        leaf(&mut chart, 0, "NN", &[]);
        let r = &best_results(&chart, 1, &ConnectConfig::default())[0];
        assert_eq!(r.heads, vec![Head::Root]);
        let rec = to_combined(r, &toks("hello"));
        assert_eq!(rec.tokens.len(), 1);
        assert_eq!(rec.phrases.len(), 1);
        assert_eq!(rec.tokens[0].head, None);
    }

    #[test]
    fn bracketed_be() {
        let mut chart = Chart::new(2);
        let have = leaf(&mut chart, 0, "HAVE", &[]);
        let been = leaf(&mut chart, 1, "AUX", &["been"]);
        join(&mut chart, "BE", &[have, been], 1);
        let r = &best_results(&chart, 1, &ConnectConfig::default())[0];
        assert_eq!(to_constituency(r, &toks("have been")), "(BE (HAVE have) (AUX been))\n");
    }

    #[test]
    fn chunks_and_skips_each_get_a_line() {
        let mut chart = Chart::new(3);
        leaf(&mut chart, 0, "NN", &[]);
        leaf(&mut chart, 2, "NN", &[]);
        let cfg = ConnectConfig::default();
        let r = &best_results(&chart, 1, &cfg)[0];
        assert_eq!(r.path.skipped, vec![1]);
        assert_eq!(to_constituency(r, &toks("a ( b")), "(NN a)\n(SKIP -LRB-)\n(NN b)\n");
        // extra chunk roots and skipped tokens hang off the leftmost root
        assert_eq!(r.heads, vec![Head::Root, Head::Token(0), Head::Token(0)]);
    }

    #[test]
    fn heaviest_root_choice() {
        let mut chart = Chart::new(3);
        leaf(&mut chart, 0, "NN", &[]);
        let b = leaf(&mut chart, 1, "DT", &[]);
        let c = leaf(&mut chart, 2, "NN", &[]);
        join(&mut chart, "NP", &[b, c], 1);
        let cfg = ConnectConfig { root: RootChoice::Heaviest, ..ConnectConfig::default() };
        let r = &best_results(&chart, 1, &cfg)[0];
        assert_eq!(r.heads, vec![Head::Token(2), Head::Token(2), Head::Root]);
    }

    #[test]
    fn paper_leaf_record_fields() {
        let mut chart = Chart::new(6);
        for i in 0..6 {
            if i == 5 {
                leaf(&mut chart, 5, "IN", &["loc"]);
            } else {
                leaf(&mut chart, i, "X", &[]);
            }
        }
        let r = &best_results(&chart, 1, &ConnectConfig::default())[0];
        let rec = to_combined(r, &toks("a b c d e in"));
        let json = serde_json::to_value(&rec.phrases[5]).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "id": 5, "wt": 1.0, "span": 1, "start": 5, "end": 5, "cat": "IN",
                "feat": ["loc"], "head_loc": 5, "children": [], "level": 0
            })
        );
    }

    #[test]
    fn combined_json_round_trip() {
        let mut chart = Chart::new(2);
        let dt = leaf(&mut chart, 0, "DT", &[]);
        let nn = leaf(&mut chart, 1, "NN", &[]);
        join(&mut chart, "NP", &[dt, nn], 1);
        let r = &best_results(&chart, 1, &ConnectConfig::default())[0];
        let rec = to_combined(r, &toks("the man"));
        let text = rec.to_json();
        assert!(text.starts_with("{\"tokens\":"));
        let back = CombinedRecord::from_json(&text).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.heads(), r.heads);
    }

    #[test]
    fn conllu_lines() {
        let out = to_conllu(&toks("the man"), &["DT".into(), "NN".into()], &[Head::Token(1), Head::Root], &["sent_id = 1".into()]);
        assert_eq!(out, "# sent_id = 1\n1\tthe\t_\t_\tDT\t_\t2\tdep\t_\t_\n2\tman\t_\t_\tNN\t_\t0\tdep\t_\t_\n\n");
    }
}
