//! Per-record causal scoring, threshold flagging, and regression-tree rules
//! describing who is discriminated or favored.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, Dataset, Decision, Group, Record, Value};
use crate::error::{Error, Result};
use crate::measures::{measure_kset, FallbackMode};
use crate::neighborhood::NeighborIndex;
use crate::propensity::LogisticModel;
use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Discriminated,
    Favored,
    Neither,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Discriminated => "discriminated",
            Flag::Favored => "favored",
            Flag::Neither => "neither",
        }
    }
}

/// Non-negative flagging threshold alpha.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Threshold<T>(T);

impl<T: Scalar> Threshold<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if alpha >= T::zero() && alpha.is_finite() {
            Ok(Threshold(alpha))
        } else {
            Err(Error::InvalidParameter(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )))
        }
    }

    pub fn alpha(self) -> T {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndividualScore<T> {
    pub id: usize,
    pub group: Group,
    pub decision: Decision,
    pub propensity: T,
    pub rd: T,
    pub rd_causal: T,
    /// `rd_causal` for protected records, `-rd_causal` for unprotected ones.
    pub disadvantage: T,
    pub flag: Flag,
}

pub fn disadvantage<T: Scalar>(group: Group, rd_causal: T) -> T {
    match group {
        Group::Protected => rd_causal,
        Group::Unprotected => -rd_causal,
    }
}

/// Discriminated: negative decision and disadvantage above alpha.
/// Favored: positive decision and disadvantage at or below -alpha.
pub fn classify<T: Scalar>(score: &IndividualScore<T>, alpha: Threshold<T>) -> Flag {
    let a = alpha.alpha();
    match score.decision {
        Decision::Negative if score.disadvantage > a => Flag::Discriminated,
        Decision::Positive if score.disadvantage <= -a => Flag::Favored,
        _ => Flag::Neither,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringParams<T> {
    pub k: usize,
    pub max_distance: Option<T>,
    pub alpha: Threshold<T>,
    pub fallback: FallbackMode,
}

impl<T: Scalar> Default for ScoringParams<T> {
    fn default() -> Self {
        ScoringParams {
            k: 15,
            max_distance: None,
            alpha: Threshold(T::zero()),
            fallback: FallbackMode::PaperLiteral,
        }
    }
}

/// Score every record of a normalized dataset, in id order.
pub fn score_all<T: Scalar>(
    dataset: &Dataset<T>,
    model: &LogisticModel<T>,
    params: &ScoringParams<T>,
) -> Result<Vec<IndividualScore<T>>> {
    let propensities = model.score_all(dataset)?;
    score_with_propensities(dataset, &propensities, params)
}

/// As [`score_all`] with precomputed propensity scores (indexed by id).
pub fn score_with_propensities<T: Scalar>(
    dataset: &Dataset<T>,
    propensities: &[T],
    params: &ScoringParams<T>,
) -> Result<Vec<IndividualScore<T>>> {
    if propensities.len() != dataset.len() {
        return Err(Error::InvalidParameter(
            "one propensity score per record required".into(),
        ));
    }
    if dataset.is_empty() {
        return Ok(Vec::new());
    }
    let index = NeighborIndex::new(dataset)?;
    let rates = dataset.base_rates()?;
    dataset
        .records()
        .par_iter()
        .map(|r| {
            let kset = index.kset(r.id, params.k, params.max_distance)?;
            let m = measure_kset(&kset, dataset, propensities, &rates, params.fallback);
            let mut score = IndividualScore {
                id: r.id,
                group: r.group,
                decision: r.decision,
                propensity: propensities[r.id],
                rd: m.rd,
                rd_causal: m.rd_causal,
                disadvantage: disadvantage(r.group, m.rd_causal),
                flag: Flag::Neither,
            };
            score.flag = classify(&score, params.alpha);
            Ok(score)
        })
        .collect()
}

/// Scores table: `id,group,decision,propensity,rd,rd_causal,disadvantage,flag`.
pub fn write_scores<T: Scalar, W: Write>(scores: &[IndividualScore<T>], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "id",
        "group",
        "decision",
        "propensity",
        "rd",
        "rd_causal",
        "disadvantage",
        "flag",
    ])?;
    for s in scores {
        out.write_record([
            s.id.to_string(),
            s.group.as_str().to_string(),
            s.decision.as_str().to_string(),
            s.propensity.to_string(),
            s.rd.to_string(),
            s.rd_causal.to_string(),
            s.disadvantage.to_string(),
            s.flag.as_str().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One condition on an attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub attribute: String,
    #[serde(flatten)]
    pub test: Test<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Test<T> {
    #[serde(rename = "in")]
    In(BTreeSet<String>),
    Below(T),
    AtLeast(T),
}

impl<T: Scalar> Atom<T> {
    pub fn within<I, S>(attribute: &str, levels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Atom {
            attribute: attribute.to_string(),
            test: Test::In(levels.into_iter().map(Into::into).collect()),
        }
    }

    pub fn below(attribute: &str, threshold: T) -> Self {
        Atom {
            attribute: attribute.to_string(),
            test: Test::Below(threshold),
        }
    }

    pub fn at_least(attribute: &str, threshold: T) -> Self {
        Atom {
            attribute: attribute.to_string(),
            test: Test::AtLeast(threshold),
        }
    }
}

impl<T: Scalar> fmt::Display for Atom<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.test {
            Test::In(levels) => {
                let list: Vec<&str> = levels.iter().map(String::as_str).collect();
                write!(f, "{} in {{{}}}", self.attribute, list.join(", "))
            }
            Test::Below(t) => write!(f, "{} < {}", self.attribute, t),
            Test::AtLeast(t) => write!(f, "{} >= {}", self.attribute, t),
        }
    }
}

/// Conjunction of atoms resolved against one dataset's schema and levels.
pub struct Matcher<T> {
    tests: Vec<(usize, CompiledTest<T>)>,
}

enum CompiledTest<T> {
    In(Vec<u32>),
    Below(T),
    AtLeast(T),
}

impl<T: Scalar> Matcher<T> {
    pub fn new(atoms: &[Atom<T>], dataset: &Dataset<T>) -> Result<Self> {
        let schema = dataset.schema();
        let tests = atoms
            .iter()
            .map(|atom| {
                let idx = schema.require(&atom.attribute)?;
                let kind = schema.attributes()[idx].kind;
                let compiled = match (&atom.test, kind) {
                    (Test::In(levels), AttributeKind::Categorical) => CompiledTest::In(
                        levels
                            .iter()
                            .filter_map(|l| dataset.level_code(idx, l))
                            .collect(),
                    ),
                    (Test::Below(t), AttributeKind::Numeric) => CompiledTest::Below(*t),
                    (Test::AtLeast(t), AttributeKind::Numeric) => CompiledTest::AtLeast(*t),
                    _ => {
                        return Err(Error::ConditionMismatch {
                            attribute: atom.attribute.clone(),
                            kind: format!("{kind:?}").to_lowercase(),
                        })
                    }
                };
                Ok((idx, compiled))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Matcher { tests })
    }

    pub fn matches(&self, record: &Record<T>) -> bool {
        self.tests
            .iter()
            .all(|(idx, test)| match (test, record.values[*idx]) {
                (CompiledTest::In(codes), Value::Cat(c)) => codes.contains(&c),
                (CompiledTest::Below(t), Value::Num(v)) => v < *t,
                (CompiledTest::AtLeast(t), Value::Num(v)) => v >= *t,
                _ => false,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 25,
            max_depth: 6,
        }
    }
}

/// Binary split; records satisfying `left` go left, the rest go right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Split<T> {
    /// left: value < threshold; right: value >= threshold.
    Threshold { attribute: String, threshold: T },
    /// left: value == level; right: any other level.
    Level { attribute: String, level: String },
}

impl<T: Scalar> Split<T> {
    pub fn attribute(&self) -> &str {
        match self {
            Split::Threshold { attribute, .. } | Split::Level { attribute, .. } => attribute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf<T> {
    pub prediction: T,
    pub count: usize,
    pub variance: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node<T> {
    Leaf(Leaf<T>),
    Split {
        split: Split<T>,
        left: Box<Node<T>>,
        right: Box<Node<T>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T> {
    pub params: TreeParams,
    pub root: Node<T>,
}

struct Candidate<T> {
    gain: T,
    split: Split<T>,
}

/// Per-node split search state over a fixed feature set.
struct Grower<'a, T> {
    dataset: &'a Dataset<T>,
    features: Vec<usize>,
    params: TreeParams,
}

fn mean<T: Scalar>(values: impl Iterator<Item = T>) -> (T, usize) {
    let (sum, n) = values.fold((T::zero(), 0usize), |(s, n), v| (s + v, n + 1));
    (
        if n == 0 {
            T::zero()
        } else {
            sum / T::from_count(n)
        },
        n,
    )
}

impl<'a, T: Scalar> Grower<'a, T> {
    fn leaf(labels: &[T]) -> Leaf<T> {
        let (m, n) = mean(labels.iter().copied());
        let (variance, _) = mean(labels.iter().map(|y| (*y - m) * (*y - m)));
        Leaf {
            prediction: m,
            count: n,
            variance,
        }
    }

    /// Variance reduction of a split whose left side has `left_sum` of the
    /// mean-centered labels over `left_n` of `n` records.
    fn gain(left_sum: T, left_n: usize, n: usize) -> T {
        let nl = T::from_count(left_n);
        let nr = T::from_count(n - left_n);
        left_sum * left_sum * (T::one() / nl + T::one() / nr)
    }

    fn best_split(&self, rows: &[(usize, T)]) -> Option<Candidate<T>> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        let (m, _) = mean(rows.iter().map(|r| r.1));
        let records = self.dataset.records();
        let mut best: Option<Candidate<T>> = None;
        let mut consider = |gain: T, make: &dyn Fn() -> Split<T>| {
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    gain,
                    split: make(),
                });
            }
        };
        for &idx in &self.features {
            let name = &self.dataset.schema().attributes()[idx].name;
            match self.dataset.schema().attributes()[idx].kind {
                AttributeKind::Numeric => {
                    let mut column: Vec<(T, T)> = rows
                        .iter()
                        .map(|&(id, y)| {
                            (
                                records[id].values[idx].as_num().unwrap_or_else(T::zero),
                                y - m,
                            )
                        })
                        .collect();
                    column.sort_by(|a, b| scalar::cmp(a.0, b.0));
                    let mut left_sum = T::zero();
                    for i in 1..n {
                        left_sum += column[i - 1].1;
                        if column[i - 1].0 == column[i].0 || i < min_leaf || n - i < min_leaf {
                            continue;
                        }
                        let (lo, hi) = (column[i - 1].0, column[i].0);
                        let mut threshold = (lo + hi) / T::lit(2.0);
                        if !(threshold > lo && threshold <= hi) {
                            threshold = hi;
                        }
                        consider(Self::gain(left_sum, i, n), &|| Split::Threshold {
                            attribute: name.clone(),
                            threshold,
                        });
                    }
                }
                AttributeKind::Categorical => {
                    let levels = self.dataset.levels(idx).len();
                    let mut sums = vec![T::zero(); levels];
                    let mut counts = vec![0usize; levels];
                    for &(id, y) in rows {
                        if let Some(c) = records[id].values[idx].as_cat() {
                            sums[c as usize] += y - m;
                            counts[c as usize] += 1;
                        }
                    }
                    for code in 0..levels {
                        let left_n = counts[code];
                        if left_n < min_leaf || n - left_n < min_leaf {
                            continue;
                        }
                        consider(Self::gain(sums[code], left_n, n), &|| Split::Level {
                            attribute: name.clone(),
                            level: self.dataset.levels(idx)[code].clone(),
                        });
                    }
                }
            }
        }
        best
    }

    fn goes_left(&self, split: &Split<T>, record: &Record<T>) -> bool {
        match split {
            Split::Threshold {
                attribute,
                threshold,
            } => {
                let idx = self
                    .dataset
                    .schema()
                    .index_of(attribute)
                    .expect("split attribute in schema");
                record.values[idx].as_num().is_some_and(|v| v < *threshold)
            }
            Split::Level { attribute, level } => {
                let idx = self
                    .dataset
                    .schema()
                    .index_of(attribute)
                    .expect("split attribute in schema");
                record.values[idx]
                    .as_cat()
                    .is_some_and(|c| self.dataset.level_name(idx, c) == level)
            }
        }
    }

    fn grow(&self, rows: Vec<(usize, T)>, depth: usize) -> Node<T> {
        let labels: Vec<T> = rows.iter().map(|r| r.1).collect();
        let leaf = Self::leaf(&labels);
        let constant = labels.iter().all(|y| *y == labels[0]);
        if depth >= self.params.max_depth
            || rows.len() < 2 * self.params.min_leaf.max(1)
            || constant
        {
            return Node::Leaf(leaf);
        }
        let total_sse = leaf.variance * T::from_count(leaf.count);
        match self.best_split(&rows) {
            Some(c) if c.gain > total_sse * T::lit(1e-12) => {
                let records = self.dataset.records();
                let (left, right): (Vec<_>, Vec<_>) = rows
                    .into_iter()
                    .partition(|&(id, _)| self.goes_left(&c.split, &records[id]));
                Node::Split {
                    split: c.split,
                    left: Box::new(self.grow(left, depth + 1)),
                    right: Box::new(self.grow(right, depth + 1)),
                }
            }
            _ => Node::Leaf(leaf),
        }
    }
}

/// CART regression tree over the covariates of `dataset`, trained on the
/// records `ids` with one label each.
pub fn learn_tree<T: Scalar>(
    dataset: &Dataset<T>,
    ids: &[usize],
    labels: &[T],
    params: TreeParams,
) -> Result<RegressionTree<T>> {
    let schema = dataset.schema();
    let names: Vec<String> = schema
        .covariates()
        .into_iter()
        .map(|i| schema.attributes()[i].name.clone())
        .collect();
    learn_tree_over(dataset, &names, ids, labels, params)
}

/// As [`learn_tree`], splitting only on the named attributes.
pub fn learn_tree_over<T: Scalar>(
    dataset: &Dataset<T>,
    features: &[String],
    ids: &[usize],
    labels: &[T],
    params: TreeParams,
) -> Result<RegressionTree<T>> {
    let schema = dataset.schema();
    let mut columns = Vec::with_capacity(features.len());
    for name in features {
        let idx = schema.require(name)?;
        if idx == schema.group_index() || idx == schema.decision_index() {
            return Err(Error::InvalidParameter(format!(
                "'{name}' cannot be a tree feature"
            )));
        }
        columns.push(idx);
    }
    // schema order drives split tie-breaking
    columns.sort_unstable();
    columns.dedup();
    if ids.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if ids.len() != labels.len() {
        return Err(Error::InvalidParameter(
            "one label per record required".into(),
        ));
    }
    if ids.len() < params.min_leaf {
        return Err(Error::InvalidParameter(format!(
            "{} records cannot fill a leaf of {}",
            ids.len(),
            params.min_leaf
        )));
    }
    if labels.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidParameter("labels must be finite".into()));
    }
    for &id in ids {
        dataset.record(id)?;
    }
    let grower = Grower {
        dataset,
        features: columns,
        params,
    };
    let rows = ids.iter().copied().zip(labels.iter().copied()).collect();
    Ok(RegressionTree {
        params,
        root: grower.grow(rows, 0),
    })
}

impl<T: Scalar> RegressionTree<T> {
    /// Leaves in depth-first, left-first order.
    pub fn leaves(&self) -> Vec<&Leaf<T>> {
        fn walk<'t, T>(node: &'t Node<T>, out: &mut Vec<&'t Leaf<T>>) {
            match node {
                Node::Leaf(l) => out.push(l),
                Node::Split { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Index (in [`leaves`](Self::leaves) order) of the leaf `record` routes to.
    pub fn leaf_index(&self, dataset: &Dataset<T>, record: &Record<T>) -> Result<usize> {
        fn count<T>(node: &Node<T>) -> usize {
            match node {
                Node::Leaf(_) => 1,
                Node::Split { left, right, .. } => count(left) + count(right),
            }
        }
        let mut node = &self.root;
        let mut offset = 0;
        loop {
            match node {
                Node::Leaf(_) => return Ok(offset),
                Node::Split { split, left, right } => {
                    let idx = dataset.schema().require(split.attribute())?;
                    let go_left = match split {
                        Split::Threshold { threshold, .. } => {
                            record.values[idx].as_num().is_some_and(|v| v < *threshold)
                        }
                        Split::Level { level, .. } => record.values[idx]
                            .as_cat()
                            .is_some_and(|c| dataset.level_name(idx, c) == level),
                    };
                    if go_left {
                        node = left;
                    } else {
                        offset += count(left);
                        node = right;
                    }
                }
            }
        }
    }

    pub fn predict(&self, dataset: &Dataset<T>, record: &Record<T>) -> Result<T> {
        let i = self.leaf_index(dataset, record)?;
        Ok(self.leaves()[i].prediction)
    }

    pub fn depth(&self) -> usize {
        fn d<T>(node: &Node<T>) -> usize {
            match node {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct GroupCounts {
    pub protected: usize,
    pub unprotected: usize,
}

impl GroupCounts {
    pub fn total(&self) -> usize {
        self.protected + self.unprotected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageShare<T> {
    pub protected: T,
    pub unprotected: T,
}

/// Root-to-leaf path of a regression tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule<T> {
    pub conditions: Vec<Atom<T>>,
    pub predicted_rdc: T,
    /// Training records in the leaf.
    pub leaf_count: usize,
    pub support: GroupCounts,
    /// Absent when the rule matches nothing.
    pub coverage_share: Option<CoverageShare<T>>,
}

impl<T: Scalar> Rule<T> {
    pub fn matcher(&self, dataset: &Dataset<T>) -> Result<Matcher<T>> {
        Matcher::new(&self.conditions, dataset)
    }
}

impl<T: Scalar> fmt::Display for Rule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conditions.is_empty() {
            return write!(f, "(all)");
        }
        let parts: Vec<String> = self.conditions.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Merge an atom into a path, tightening an existing atom on the same attribute.
fn push_atom<T: Scalar>(path: &mut Vec<Atom<T>>, atom: Atom<T>) {
    for existing in path.iter_mut() {
        if existing.attribute != atom.attribute {
            continue;
        }
        match (&mut existing.test, &atom.test) {
            (Test::In(have), Test::In(new)) => {
                have.retain(|l| new.contains(l));
                return;
            }
            (Test::Below(have), Test::Below(new)) => {
                *have = have.min(*new);
                return;
            }
            (Test::AtLeast(have), Test::AtLeast(new)) => {
                *have = have.max(*new);
                return;
            }
            _ => {}
        }
    }
    path.push(atom);
}

/// One rule per leaf, with support counted over `coverage_ids`; sorted by
/// predicted value, highest first.
pub fn extract_rules<T: Scalar>(
    tree: &RegressionTree<T>,
    dataset: &Dataset<T>,
    coverage_ids: &[usize],
) -> Result<Vec<Rule<T>>> {
    fn walk<T: Scalar>(
        node: &Node<T>,
        dataset: &Dataset<T>,
        path: Vec<Atom<T>>,
        out: &mut Vec<(Vec<Atom<T>>, Leaf<T>)>,
    ) -> Result<()> {
        match node {
            Node::Leaf(leaf) => out.push((path, leaf.clone())),
            Node::Split { split, left, right } => {
                let (l, r) = match split {
                    Split::Threshold {
                        attribute,
                        threshold,
                    } => (
                        Atom::below(attribute, *threshold),
                        Atom::at_least(attribute, *threshold),
                    ),
                    Split::Level { attribute, level } => {
                        let idx = dataset.schema().require(attribute)?;
                        let others = dataset.levels(idx).iter().filter(|l| *l != level).cloned();
                        (
                            Atom::within(attribute, [level.clone()]),
                            Atom::within(attribute, others),
                        )
                    }
                };
                let mut lp = path.clone();
                push_atom(&mut lp, l);
                walk(left, dataset, lp, out)?;
                let mut rp = path;
                push_atom(&mut rp, r);
                walk(right, dataset, rp, out)?;
            }
        }
        Ok(())
    }
    let mut paths = Vec::new();
    walk(&tree.root, dataset, Vec::new(), &mut paths)?;
    let records = dataset.records();
    let mut rules = paths
        .into_iter()
        .map(|(conditions, leaf)| {
            let matcher = Matcher::new(&conditions, dataset)?;
            let mut support = GroupCounts::default();
            for &id in coverage_ids {
                let r = dataset.record(id)?;
                if matcher.matches(r) {
                    match r.group {
                        Group::Protected => support.protected += 1,
                        Group::Unprotected => support.unprotected += 1,
                    }
                }
            }
            let coverage_share = (support.total() > 0).then(|| {
                let total = T::from_count(support.total());
                let protected = T::from_count(support.protected) / total;
                CoverageShare {
                    protected,
                    unprotected: T::one() - protected,
                }
            });
            let _ = records;
            Ok(Rule {
                conditions,
                predicted_rdc: leaf.prediction,
                leaf_count: leaf.count,
                support,
                coverage_share,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rules.sort_by(|a, b| scalar::cmp(b.predicted_rdc, a.predicted_rdc));
    Ok(rules)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupMean<T> {
    pub count: usize,
    /// Absent when no record of the group matches.
    pub mean_rd_causal: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleComparison<T> {
    pub protected: GroupMean<T>,
    pub unprotected: GroupMean<T>,
}

/// Mean `rd_causal` of the scored records matching `conditions`, per group.
pub fn compare_rule_across_groups<T: Scalar>(
    conditions: &[Atom<T>],
    dataset: &Dataset<T>,
    scores: &[IndividualScore<T>],
) -> Result<RuleComparison<T>> {
    let matcher = Matcher::new(conditions, dataset)?;
    let summarize = |group: Group| -> Result<GroupMean<T>> {
        let mut values = Vec::new();
        for s in scores.iter().filter(|s| s.group == group) {
            if matcher.matches(dataset.record(s.id)?) {
                values.push(s.rd_causal);
            }
        }
        let (m, count) = mean(values.into_iter());
        Ok(GroupMean {
            count,
            mean_rd_causal: (count > 0).then_some(m),
        })
    };
    Ok(RuleComparison {
        protected: summarize(Group::Protected)?,
        unprotected: summarize(Group::Unprotected)?,
    })
}
