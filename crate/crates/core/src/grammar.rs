//! Syntactic rules: categories, flat feature constraints, head marking.
//!
//! Rule files hold one rule per line:
//!
//! ```text
//! # comment
//! NP-DT -> DT ^NP-U
//! BE[fin] -> MD ^BE[+inf]
//! NP -> NP ^S/NP
//! ```
//!
//! The parent may carry a bracketed list of bare feature names, which are
//! assigned to every phrase the rule builds. Child brackets hold `+f` / `-f`
//! constraints checked against the child phrase's features. `^` marks the
//! head child; it may be omitted on unary rules.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::sync::Arc;

use thiserror::Error;

/// A syntactic category such as `NP`, `VP-O` or the gap category `S/NP`.
///
/// Slash categories are opaque names: `S/NP` only ever matches `S/NP`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Category(Arc<str>);

impl Category {
    pub fn new(name: &str) -> Result<Self, RuleError> {
        if name.is_empty() {
            return Err(RuleError::new(name, 0, "empty category"));
        }
        if let Some(pos) = name.find(|c: char| !valid_name_char(c)) {
            return Err(RuleError::new(
                name,
                pos,
                format!("invalid character {:?} in category", name[pos..].chars().next().unwrap()),
            ));
        }
        Ok(Category(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True for gap categories written with a slash, e.g. `VP-O/NP`.
    pub fn is_slash(&self) -> bool {
        self.0.contains('/')
    }
}

fn valid_name_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '[' | ']' | ',' | '^' | '#')
}

impl fmt::Debug for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A sorted, duplicate-free set of feature names.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSet(Arc<[Arc<str>]>);

impl FeatureSet {
    pub fn empty() -> Self {
        FeatureSet::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v: Vec<Arc<str>> = names.into_iter().map(|s| Arc::from(s.as_ref())).collect();
        v.sort();
        v.dedup();
        FeatureSet(v.into())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.binary_search_by(|f| (**f).cmp(name)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|f| &**f)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_vec(&self) -> Vec<String> {
        self.iter().map(str::to_owned).collect()
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

/// `+f` (feature must be present) or `-f` (feature must be absent).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureConstraint {
    pub name: Arc<str>,
    pub polarity: Polarity,
}

impl FeatureConstraint {
    pub fn positive(name: &str) -> Self {
        FeatureConstraint { name: name.into(), polarity: Polarity::Positive }
    }

    pub fn negative(name: &str) -> Self {
        FeatureConstraint { name: name.into(), polarity: Polarity::Negative }
    }

    pub fn satisfied_by(&self, feats: &FeatureSet) -> bool {
        feats.contains(&self.name) == (self.polarity == Polarity::Positive)
    }
}

impl fmt::Display for FeatureConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.polarity {
            Polarity::Positive => '+',
            Polarity::Negative => '-',
        };
        write!(f, "{}{}", sign, self.name)
    }
}

/// True when every constraint holds for `feats`.
pub fn constraints_satisfied(constraints: &[FeatureConstraint], feats: &FeatureSet) -> bool {
    constraints.iter().all(|c| c.satisfied_by(feats))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleChild {
    pub category: Category,
    pub constraints: Vec<FeatureConstraint>,
    pub is_head: bool,
}

impl RuleChild {
    pub fn matches(&self, cat: &Category, feats: &FeatureSet) -> bool {
        &self.category == cat && constraints_satisfied(&self.constraints, feats)
    }
}

/// Line number of a rule in its source file (1-based). Zero for rules
/// built outside a file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub u32);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub id: RuleId,
    pub parent: Category,
    pub parent_features: FeatureSet,
    pub children: Vec<RuleChild>,
}

impl Rule {
    pub fn is_unary(&self) -> bool {
        self.children.len() == 1
    }

    pub fn head_index(&self) -> usize {
        self.children.iter().position(|c| c.is_head).expect("rule without head child")
    }

    pub fn last_child(&self) -> &RuleChild {
        self.children.last().expect("rule without children")
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.parent)?;
        if !self.parent_features.is_empty() {
            write!(f, "[{}]", self.parent_features.iter().collect::<Vec<_>>().join(","))?;
        }
        f.write_str(" ->")?;
        for child in &self.children {
            f.write_str(" ")?;
            if child.is_head {
                f.write_str("^")?;
            }
            write!(f, "{}", child.category)?;
            if !child.constraints.is_empty() {
                let cs: Vec<String> = child.constraints.iter().map(|c| c.to_string()).collect();
                write!(f, "[{}]", cs.join(","))?;
            }
        }
        Ok(())
    }
}

/// A malformed rule line. `position` is a byte offset into `line`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at column {position}: {line:?}")]
pub struct RuleError {
    pub line: String,
    pub position: usize,
    pub message: String,
}

impl RuleError {
    fn new(line: &str, position: usize, message: impl Into<String>) -> Self {
        RuleError { line: line.to_owned(), position, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("{}", format_line_errors(.0))]
    Lines(Vec<(usize, RuleError)>),
    #[error("cannot read rule file: {0}")]
    Io(#[from] std::io::Error),
}

fn format_line_errors(errors: &[(usize, RuleError)]) -> String {
    let mut out = format!("{} malformed rule line(s)", errors.len());
    for (lineno, err) in errors {
        out.push_str(&format!("\n  line {lineno}: {err}"));
    }
    out
}

/// Parses one rule line (no comments, no blank lines).
pub fn parse_rule_line(line: &str) -> Result<Rule, RuleError> {
    let arrow = match line.find("->") {
        Some(pos) => pos,
        None => return Err(RuleError::new(line, 0, "missing '->'")),
    };
    if line[arrow + 2..].contains("->") {
        return Err(RuleError::new(line, arrow + 2 + line[arrow + 2..].find("->").unwrap(), "more than one '->'"));
    }

    let lhs = &line[..arrow];
    let lhs_off = lhs.len() - lhs.trim_start().len();
    let lhs = lhs.trim();
    if lhs.is_empty() {
        return Err(RuleError::new(line, 0, "empty parent category"));
    }
    if lhs.contains(char::is_whitespace) {
        return Err(RuleError::new(line, lhs_off, "parent must be a single category"));
    }
    let (parent, parent_feats) = split_brackets(line, lhs, lhs_off)?;
    let parent = Category::new(parent).map_err(|e| RuleError::new(line, lhs_off + e.position, e.message))?;
    let mut parent_features = Vec::new();
    if let Some((feats, off)) = parent_feats {
        for (name, pos) in split_list(feats, off) {
            check_feature_name(line, name, pos)?;
            parent_features.push(name);
        }
    }

    let rhs_start = arrow + 2;
    let mut children = Vec::new();
    let mut offset = rhs_start;
    for tok in line[rhs_start..].split_whitespace() {
        let pos = offset + line[offset..].find(tok).unwrap();
        offset = pos + tok.len();
        children.push(parse_child(line, tok, pos)?);
    }

    match children.len() {
        0 => return Err(RuleError::new(line, rhs_start, "rule has no children")),
        1 | 2 => {}
        k => return Err(RuleError::new(line, rhs_start, format!("rule has {k} children (at most 2 allowed)"))),
    }
    let heads = children.iter().filter(|c| c.is_head).count();
    if heads > 1 {
        return Err(RuleError::new(line, rhs_start, "more than one head marker"));
    }
    if heads == 0 {
        if children.len() == 1 {
            children[0].is_head = true;
        } else {
            return Err(RuleError::new(line, rhs_start, "binary rule needs a '^' head marker"));
        }
    }

    Ok(Rule {
        id: RuleId::default(),
        parent,
        parent_features: FeatureSet::from_names(parent_features),
        children,
    })
}

/// Splits `CAT[...]` into the category and the bracket body with its offset.
fn split_brackets<'a>(
    line: &str,
    tok: &'a str,
    tok_off: usize,
) -> Result<(&'a str, Option<(&'a str, usize)>), RuleError> {
    match tok.find('[') {
        None => {
            if let Some(p) = tok.find(']') {
                return Err(RuleError::new(line, tok_off + p, "unbalanced ']'"));
            }
            Ok((tok, None))
        }
        Some(open) => {
            if !tok.ends_with(']') {
                return Err(RuleError::new(line, tok_off + open, "unterminated '['"));
            }
            let body = &tok[open + 1..tok.len() - 1];
            if let Some(p) = body.find(['[', ']']) {
                return Err(RuleError::new(line, tok_off + open + 1 + p, "nested brackets"));
            }
            Ok((&tok[..open], Some((body, tok_off + open + 1))))
        }
    }
}

fn split_list(body: &str, off: usize) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    let mut pos = off;
    for part in body.split(',') {
        out.push((part, pos));
        pos += part.len() + 1;
    }
    out
}

fn check_feature_name(line: &str, name: &str, pos: usize) -> Result<(), RuleError> {
    if name.is_empty() {
        return Err(RuleError::new(line, pos, "empty feature name"));
    }
    if let Some(p) = name.find(|c: char| c.is_whitespace() || matches!(c, '+' | '-' | '[' | ']' | ',' | '^')) {
        return Err(RuleError::new(line, pos + p, format!("invalid feature name {name:?}")));
    }
    Ok(())
}

fn parse_child(line: &str, tok: &str, pos: usize) -> Result<RuleChild, RuleError> {
    let (is_head, body, body_pos) = match tok.strip_prefix('^') {
        Some(rest) => (true, rest, pos + 1),
        None => (false, tok, pos),
    };
    if body.starts_with('^') {
        return Err(RuleError::new(line, body_pos, "more than one head marker"));
    }
    let (cat, constraints) = split_brackets(line, body, body_pos)?;
    if cat.is_empty() {
        return Err(RuleError::new(line, body_pos, "empty category"));
    }
    let category = Category::new(cat).map_err(|e| RuleError::new(line, body_pos + e.position, e.message))?;

    let mut parsed: Vec<FeatureConstraint> = Vec::new();
    if let Some((list, off)) = constraints {
        for (entry, epos) in split_list(list, off) {
            let (polarity, name) = if let Some(n) = entry.strip_prefix('+') {
                (Polarity::Positive, n)
            } else if let Some(n) = entry.strip_prefix('-') {
                (Polarity::Negative, n)
            } else {
                return Err(RuleError::new(line, epos, format!("constraint {entry:?} needs '+' or '-'")));
            };
            check_feature_name(line, name, epos + 1)?;
            if parsed.iter().any(|c| &*c.name == name) {
                return Err(RuleError::new(line, epos, format!("feature {name:?} constrained twice")));
            }
            parsed.push(FeatureConstraint { name: name.into(), polarity });
        }
    }
    Ok(RuleChild { category, constraints: parsed, is_head })
}

/// An immutable rule set with lookup by last-child category.
#[derive(Debug, Clone, Default)]
pub struct Grammar {
    rules: Vec<Rule>,
    /// Binary rules keyed by their last child's category.
    last_child_index: BTreeMap<Category, Vec<usize>>,
    /// Unary rules keyed by their only child's category.
    unary_index: BTreeMap<Category, Vec<usize>>,
    duplicates: usize,
}

impl Grammar {
    /// Builds a grammar from rules in id order. Exact duplicates (same
    /// content, any id) are dropped; the first occurrence wins.
    pub fn from_rules(rules: impl IntoIterator<Item = Rule>) -> Self {
        let mut seen: HashSet<Rule> = HashSet::new();
        let mut kept = Vec::new();
        let mut duplicates = 0;
        for rule in rules {
            let key = Rule { id: RuleId::default(), ..rule.clone() };
            if seen.insert(key) {
                kept.push(rule);
            } else {
                duplicates += 1;
            }
        }
        let mut g = Grammar { rules: kept, duplicates, ..Default::default() };
        g.reindex();
        g
    }

    fn reindex(&mut self) {
        self.last_child_index.clear();
        self.unary_index.clear();
        for (i, rule) in self.rules.iter().enumerate() {
            assert_eq!(rule.children.iter().filter(|c| c.is_head).count(), 1, "rule {} has no unique head", rule);
            let key = rule.last_child().category.clone();
            let index = if rule.is_unary() { &mut self.unary_index } else { &mut self.last_child_index };
            index.entry(key).or_default().push(i);
        }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Number of exact duplicate rules dropped at load.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn binary_index(&self) -> &BTreeMap<Category, Vec<usize>> {
        &self.last_child_index
    }

    pub fn unary_index(&self) -> &BTreeMap<Category, Vec<usize>> {
        &self.unary_index
    }

    pub fn rule_by_id(&self, id: RuleId) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Keeps only the first `n` rules (in id order).
    pub fn truncated(&self, n: usize) -> Grammar {
        Grammar::from_rules(self.rules.iter().take(n).cloned())
    }

    /// Keeps the rules for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&Rule) -> bool) -> Grammar {
        Grammar::from_rules(self.rules.iter().filter(|r| keep(r)).cloned())
    }

    /// Every rule whose last child matches a phrase of category `cat` with
    /// features `feats`, unary and binary, in rule id order.
    pub fn rules_for_last_child(&self, cat: &Category, feats: &FeatureSet) -> Vec<&Rule> {
        let unary = self.unary_index.get(cat).map(Vec::as_slice).unwrap_or(&[]);
        let binary = self.last_child_index.get(cat).map(Vec::as_slice).unwrap_or(&[]);
        let mut idx: Vec<usize> = unary
            .iter()
            .chain(binary)
            .copied()
            .filter(|&i| constraints_satisfied(&self.rules[i].last_child().constraints, feats))
            .collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| &self.rules[i]).collect()
    }
}

/// Strips a trailing `#` comment.
fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(p) => &line[..p],
        None => line,
    }
}

/// Reads a rule file. All malformed lines are reported together.
pub fn load_grammar<R: BufRead>(source: R) -> Result<Grammar, GrammarError> {
    let mut rules = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let content = strip_comment(&line).trim();
        if content.is_empty() {
            continue;
        }
        match parse_rule_line(content) {
            Ok(mut rule) => {
                rule.id = RuleId(i as u32 + 1);
                rules.push(rule);
            }
            Err(e) => errors.push((i + 1, e)),
        }
    }
    if !errors.is_empty() {
        return Err(GrammarError::Lines(errors));
    }
    Ok(Grammar::from_rules(rules))
}

pub fn load_grammar_str(text: &str) -> Result<Grammar, GrammarError> {
    load_grammar(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(s: &str) -> Category {
        Category::new(s).unwrap()
    }

    #[test]
    fn parses_binary_rule_with_head() {
        let r = parse_rule_line("NP -> AP ^NP-U").unwrap();
        assert_eq!(r.parent, cat("NP"));
        assert_eq!(r.children.len(), 2);
        assert_eq!(r.children[0].category, cat("AP"));
        assert!(!r.children[0].is_head);
        assert_eq!(r.children[1].category, cat("NP-U"));
        assert!(r.children[1].is_head);
    }

    #[test]
    fn parses_unary_constraint() {
        let r = parse_rule_line("BE -> AUX[+be]").unwrap();
        assert!(r.is_unary());
        assert!(r.children[0].is_head);
        assert_eq!(r.children[0].constraints, vec![FeatureConstraint::positive("be")]);
    }

    #[test]
    fn identity_projection_is_accepted() {
        let r = parse_rule_line("X -> ^X").unwrap();
        assert_eq!(r.parent, r.children[0].category);
    }

    #[test]
    fn slash_categories_are_opaque() {
        let r = parse_rule_line("NP -> NP ^S/NP").unwrap();
        assert_eq!(r.children[1].category, cat("S/NP"));
        assert!(r.children[1].category.is_slash());
        assert_ne!(r.children[1].category, cat("S"));
    }

    #[test]
    fn parent_features_and_negative_constraints() {
        let r = parse_rule_line("BE[fin,perf] -> HAVE[+fin,-inf] ^AUX[+been]").unwrap();
        assert_eq!(r.parent_features, FeatureSet::from_names(["perf", "fin"]));
        assert_eq!(
            r.children[0].constraints,
            vec![FeatureConstraint::positive("fin"), FeatureConstraint::negative("inf")]
        );
        assert_eq!(r.to_string(), "BE[fin,perf] -> HAVE[+fin,-inf] ^AUX[+been]");
    }

    #[test]
    fn malformed_lines() {
        let cases = [
            ("NP AP NP-U", "missing"),
            ("NP ->", "no children"),
            ("NP -> A B C", "3 children"),
            ("NP -> ^A ^B", "more than one head"),
            ("NP -> A B", "head marker"),
            ("-> A", "empty parent"),
            ("NP -> ^[+f]", "empty category"),
            ("NP -> A[f] ^B", "needs '+' or '-'"),
            ("NP -> A[+f,-f] ^B", "constrained twice"),
            ("NP[+x] -> ^A", "invalid feature"),
            ("NP -> ^A[+f", "unterminated"),
            ("NP -> ^^A", "more than one head"),
        ];
        for (line, needle) in cases {
            let err = parse_rule_line(line).unwrap_err();
            assert!(err.message.contains(needle), "{line:?}: {err}");
            assert_eq!(err.line, line);
        }
    }

    #[test]
    fn error_position_points_at_offender() {
        let err = parse_rule_line("NP -> A[+f] ^B[g]").unwrap_err();
        assert_eq!(&"NP -> A[+f] ^B[g]"[err.position..], "g]");
    }

    const BE_RULES: &str = "BE -> AUX[+be]\nBE -> HAVE ^AUX[+been]\nBE -> MD ^BE\n";

    #[test]
    fn loads_be_rules() {
        let g = load_grammar_str(BE_RULES).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.rules().iter().map(|r| r.id.0).collect::<Vec<_>>(), vec![1, 2, 3]);
        let unary: Vec<_> = g.unary_index().keys().map(Category::as_str).collect();
        let binary: Vec<_> = g.binary_index().keys().map(Category::as_str).collect();
        assert_eq!(unary, vec!["AUX"]);
        assert_eq!(binary, vec!["AUX", "BE"]);
    }

    #[test]
    fn empty_grammar() {
        let g = load_grammar_str("").unwrap();
        assert!(g.is_empty());
        let g = load_grammar_str("# only a comment\n\n   \n").unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn duplicates_collapse() {
        let g = load_grammar_str("NP -> ^NP-U\nNP -> ^NP-U\n").unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.duplicates(), 1);
        // unary head marker is optional, so this is the same rule too
        let g = load_grammar_str("NP -> ^NP-U\nNP -> NP-U # again\n").unwrap();
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn load_reports_every_bad_line() {
        let err = load_grammar_str("NP -> ^NP-U\nbad line\nNP -> A B C\n").unwrap_err();
        match err {
            GrammarError::Lines(lines) => {
                assert_eq!(lines.iter().map(|(n, _)| *n).collect::<Vec<_>>(), vec![2, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rules_for_last_child_checks_constraints() {
        let g = load_grammar_str(BE_RULES).unwrap();
        let aux = cat("AUX");
        let found = g.rules_for_last_child(&aux, &FeatureSet::from_names(["be"]));
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].to_string(), "BE -> ^AUX[+be]");
        assert!(g.rules_for_last_child(&aux, &FeatureSet::empty()).is_empty());
        let found = g.rules_for_last_child(&aux, &FeatureSet::from_names(["been"]));
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].parent, cat("BE"));
        assert!(!found[0].is_unary());
    }

    #[test]
    fn rules_for_last_child_in_file_order() {
        let g = load_grammar_str("NP -> AP ^NP-U\nS -> NP ^VP\nNP -> ^NP-U\n").unwrap();
        let found = g.rules_for_last_child(&cat("NP-U"), &FeatureSet::empty());
        let ids: Vec<u32> = found.iter().map(|r| r.id.0).collect();
        assert_eq!(ids, vec![1, 3]);
    }

    #[test]
    fn negative_constraint_blocks_feature() {
        let g = load_grammar_str("V -> ^VB[-fin]\n").unwrap();
        assert_eq!(g.rules_for_last_child(&cat("VB"), &FeatureSet::empty()).len(), 1);
        assert!(g.rules_for_last_child(&cat("VB"), &FeatureSet::from_names(["fin"])).is_empty());
    }
}
