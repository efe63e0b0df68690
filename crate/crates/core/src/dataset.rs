//! Decision datasets: schema roles, loading, normalization and group partitions.
//!
//! A [`Dataset`] is an immutable relation of [`Record`]s. Every record carries
//! one value per schema attribute plus its mapped group (protected or not) and
//! binary decision. Categorical tokens are interned per attribute, in order of
//! first appearance, so records stay small and comparisons are integer compares.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Covariate,
    Group,
    Decision,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default)]
    pub role: Role,
}

impl Attribute {
    pub fn new(name: impl Into<String>, kind: AttributeKind, role: Role) -> Self {
        Attribute {
            name: name.into(),
            kind,
            role,
        }
    }
}

/// Ordered attribute list with exactly one group and one decision attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    attributes: Vec<Attribute>,
    group: usize,
    decision: usize,
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for a in &attributes {
            if a.name.is_empty() {
                return Err(Error::Schema("attribute with empty name".into()));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(Error::Schema(format!(
                    "attribute '{}' declared twice",
                    a.name
                )));
            }
        }
        let single = |role: Role| -> Result<usize> {
            let found: Vec<usize> = attributes
                .iter()
                .enumerate()
                .filter(|(_, a)| a.role == role)
                .map(|(i, _)| i)
                .collect();
            match found.as_slice() {
                [i] => Ok(*i),
                _ => Err(Error::Schema(format!(
                    "exactly one attribute must have role {:?}, found {}",
                    role,
                    found.len()
                ))),
            }
        };
        let group = single(Role::Group)?;
        let decision = single(Role::Decision)?;
        Ok(Schema {
            attributes,
            group,
            decision,
        })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn group_index(&self) -> usize {
        self.group
    }

    pub fn decision_index(&self) -> usize {
        self.decision
    }

    /// Indices of covariate attributes, in schema order.
    pub fn covariates(&self) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role == Role::Covariate)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Protected,
    Unprotected,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Protected => "protected",
            Group::Unprotected => "unprotected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Negative,
    Positive,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Negative => "negative",
            Decision::Positive => "positive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<T> {
    Num(T),
    /// Index into the attribute's level dictionary.
    Cat(u32),
}

impl<T: Scalar> Value<T> {
    pub fn as_num(&self) -> Option<T> {
        match *self {
            Value::Num(v) => Some(v),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<u32> {
        match *self {
            Value::Cat(c) => Some(c),
            Value::Num(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub id: usize,
    /// One value per schema attribute, in schema order.
    pub values: Vec<Value<T>>,
    pub group: Group,
    pub decision: Decision,
}

/// Membership test mapping a raw column value onto a binary label.
///
/// `InSet` is used for categorical columns: tokens in `values` map to the
/// "true" side (protected, positive). When `complement` is given, tokens in
/// neither set are rejected instead of silently falling on the "false" side.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition<T> {
    InSet {
        values: BTreeSet<String>,
        complement: Option<BTreeSet<String>>,
    },
    /// True when value < threshold.
    Below(T),
    /// True when value >= threshold.
    AtLeast(T),
}

impl<T: Scalar> Condition<T> {
    pub fn levels<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Condition::InSet {
            values: values.into_iter().map(Into::into).collect(),
            complement: None,
        }
    }

    fn check_kind(&self, attribute: &Attribute) -> Result<()> {
        let ok = matches!(
            (self, attribute.kind),
            (Condition::InSet { .. }, AttributeKind::Categorical)
                | (
                    Condition::Below(_) | Condition::AtLeast(_),
                    AttributeKind::Numeric
                )
        );
        if ok {
            Ok(())
        } else {
            Err(Error::ConditionMismatch {
                attribute: attribute.name.clone(),
                kind: format!("{:?}", attribute.kind).to_lowercase(),
            })
        }
    }

    /// `None` when the token is outside both declared level sets.
    fn eval_token(&self, token: &str) -> Option<bool> {
        match self {
            Condition::InSet { values, complement } => {
                if values.contains(token) {
                    Some(true)
                } else {
                    match complement {
                        Some(other) if !other.contains(token) => None,
                        _ => Some(false),
                    }
                }
            }
            _ => None,
        }
    }

    fn eval_num(&self, v: T) -> bool {
        match *self {
            Condition::Below(t) => v < t,
            Condition::AtLeast(t) => v >= t,
            Condition::InSet { .. } => false,
        }
    }
}

/// Decision base rates over the whole relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaseRates<T> {
    pub p_neg: T,
    pub p_pos: T,
}

/// Per-attribute observed `(min, max)` used for min-max scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization<T> {
    ranges: Vec<Option<(T, T)>>,
}

impl<T: Scalar> Normalization<T> {
    /// Observed ranges of every numeric covariate.
    pub fn fit(dataset: &Dataset<T>) -> Self {
        let mut ranges = vec![None; dataset.schema.len()];
        for idx in dataset.schema.covariates() {
            if dataset.schema.attributes[idx].kind != AttributeKind::Numeric {
                continue;
            }
            ranges[idx] = dataset
                .records
                .iter()
                .filter_map(|r| r.values[idx].as_num())
                .fold(None, |acc: Option<(T, T)>, v| match acc {
                    None => Some((v, v)),
                    Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
                });
        }
        Normalization { ranges }
    }

    pub fn range(&self, attribute: usize) -> Option<(T, T)> {
        self.ranges.get(attribute).copied().flatten()
    }

    /// Scale a single value of `attribute`; constant columns map to zero.
    pub fn scale(&self, attribute: usize, value: T) -> T {
        match self.range(attribute) {
            Some((lo, hi)) if hi > lo => (value - lo) / (hi - lo),
            Some(_) => T::zero(),
            None => value,
        }
    }

    /// Rewrite every scaled attribute of `dataset` with these ranges.
    pub fn apply(&self, dataset: &Dataset<T>) -> Dataset<T> {
        let mut out = dataset.clone();
        for record in &mut out.records {
            for (idx, value) in record.values.iter_mut().enumerate() {
                if let (Value::Num(v), Some(_)) = (*value, self.range(idx)) {
                    *value = Value::Num(self.scale(idx, v));
                }
            }
        }
        out.normalization = Some(self.clone());
        out
    }
}

#[derive(Debug, Clone)]
pub struct Dataset<T> {
    schema: Schema,
    levels: Vec<Vec<String>>,
    records: Vec<Record<T>>,
    delimiter: u8,
    normalization: Option<Normalization<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn records(&self) -> &[Record<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: usize) -> Result<&Record<T>> {
        self.records.get(id).ok_or(Error::RecordNotFound(id))
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    pub fn normalization(&self) -> Option<&Normalization<T>> {
        self.normalization.as_ref()
    }

    pub fn delimiter(&self) -> u8 {
        self.delimiter
    }

    /// Level dictionary of a categorical attribute (empty for numeric ones).
    pub fn levels(&self, attribute: usize) -> &[String] {
        &self.levels[attribute]
    }

    pub fn level_name(&self, attribute: usize, code: u32) -> &str {
        &self.levels[attribute][code as usize]
    }

    pub fn level_code(&self, attribute: usize, name: &str) -> Option<u32> {
        self.levels[attribute]
            .iter()
            .position(|l| l == name)
            .map(|p| p as u32)
    }

    /// Textual form of a cell, as written back to the table format.
    pub fn format_value(&self, attribute: usize, value: &Value<T>) -> String {
        match value {
            Value::Num(v) => v.to_string(),
            Value::Cat(c) => self.level_name(attribute, *c).to_string(),
        }
    }

    /// Records of group `g`, in id order.
    pub fn partition_by_group(&self, g: Group) -> Vec<&Record<T>> {
        self.records.iter().filter(|r| r.group == g).collect()
    }

    pub fn base_rates(&self) -> Result<BaseRates<T>> {
        if self.records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let neg = self
            .records
            .iter()
            .filter(|r| r.decision == Decision::Negative)
            .count();
        let n = T::from_count(self.records.len());
        let p_neg = T::from_count(neg) / n;
        Ok(BaseRates {
            p_neg,
            p_pos: T::one() - p_neg,
        })
    }

    /// Min-max scale every numeric covariate onto `[0, 1]`.
    pub fn normalize_numeric(&self) -> Result<Dataset<T>> {
        if self.is_normalized() {
            return Err(Error::AlreadyNormalized);
        }
        Ok(Normalization::fit(self).apply(self))
    }

    /// Re-derive decisions from `attribute` and make it the decision attribute.
    ///
    /// The previous decision attribute (if different) is demoted to `ignore`.
    pub fn binarize_decision(
        &self,
        attribute: &str,
        positive: &Condition<T>,
    ) -> Result<Dataset<T>> {
        let idx = self.schema.require(attribute)?;
        if idx == self.schema.group {
            return Err(Error::Schema(format!(
                "'{attribute}' is the group attribute"
            )));
        }
        positive.check_kind(&self.schema.attributes[idx])?;
        if self.is_normalized() {
            return Err(Error::AlreadyNormalized);
        }
        let mut out = self.clone();
        let mut attributes = out.schema.attributes.clone();
        if out.schema.decision != idx {
            attributes[out.schema.decision].role = Role::Ignore;
        }
        attributes[idx].role = Role::Decision;
        out.schema = Schema::new(attributes)?;
        for record in &mut out.records {
            let holds = match record.values[idx] {
                Value::Num(v) => positive.eval_num(v),
                Value::Cat(c) => positive
                    .eval_token(&self.levels[idx][c as usize])
                    .ok_or_else(|| Error::UnknownLevel {
                        row: record.id,
                        column: idx,
                        attribute: attribute.to_string(),
                        token: self.levels[idx][c as usize].clone(),
                    })?,
            };
            record.decision = if holds {
                Decision::Positive
            } else {
                Decision::Negative
            };
        }
        Ok(out)
    }

    /// Seeded sample of `n` records without replacement; relative order kept, ids re-densified.
    pub fn subsample(&self, n: usize, seed: u64) -> Dataset<T> {
        if n >= self.records.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, self.records.len(), n).into_vec();
        picked.sort_unstable();
        let mut out = self.clone();
        out.records = picked
            .into_iter()
            .enumerate()
            .map(|(new_id, old)| Record {
                id: new_id,
                ..self.records[old].clone()
            })
            .collect();
        out
    }

    /// Raw decision cell of the lowest-id record with a negative decision.
    pub(crate) fn negative_decision_value(&self) -> Result<Value<T>> {
        let d = self.schema.decision;
        self.records
            .iter()
            .find(|r| r.decision == Decision::Negative)
            .map(|r| r.values[d])
            .ok_or(Error::NoNegativeValue)
    }

    pub(crate) fn records_mut(&mut self) -> &mut [Record<T>] {
        &mut self.records
    }

    /// Write the relation back in the delimited-table format (schema column order).
    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .delimiter(self.delimiter)
            .from_writer(writer);
        out.write_record(self.schema.attributes.iter().map(|a| a.name.as_str()))?;
        for record in &self.records {
            out.write_record(
                record
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| self.format_value(i, v)),
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Load-time configuration: attribute kinds/roles and group/decision mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Tokens treated as missing (the empty token always is).
    #[serde(default)]
    pub missing: Vec<String>,
    pub attributes: Vec<Attribute>,
    /// Group-column level(s) (or numeric threshold) identifying the protected group.
    pub protected: ConditionSpec,
    /// Optional exhaustive list of unprotected levels; other tokens are rejected.
    #[serde(default)]
    pub unprotected: Option<Vec<String>>,
    /// Decision-column level(s) (or numeric threshold) identifying the positive decision.
    pub positive: ConditionSpec,
    #[serde(default)]
    pub negative: Option<Vec<String>>,
}

fn default_delimiter() -> char {
    ','
}

/// Config form of a [`Condition`]: a level, a list of levels, or a threshold table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConditionSpec {
    Level(String),
    Levels(Vec<String>),
    Threshold {
        #[serde(default)]
        below: Option<f64>,
        #[serde(default)]
        at_least: Option<f64>,
    },
}

impl ConditionSpec {
    pub fn to_condition<T: Scalar>(
        &self,
        complement: Option<&Vec<String>>,
    ) -> Result<Condition<T>> {
        let complement = complement.map(|c| c.iter().cloned().collect::<BTreeSet<_>>());
        match self {
            ConditionSpec::Level(v) => Ok(Condition::InSet {
                values: [v.clone()].into(),
                complement,
            }),
            ConditionSpec::Levels(vs) => Ok(Condition::InSet {
                values: vs.iter().cloned().collect(),
                complement,
            }),
            ConditionSpec::Threshold {
                below: Some(t),
                at_least: None,
            } => Ok(Condition::Below(T::lit(*t))),
            ConditionSpec::Threshold {
                below: None,
                at_least: Some(t),
            } => Ok(Condition::AtLeast(T::lit(*t))),
            ConditionSpec::Threshold { .. } => Err(Error::Config(
                "threshold needs exactly one of 'below' or 'at_least'".into(),
            )),
        }
    }
}

impl SchemaConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter).map_err(|_| {
            Error::Config(format!(
                "delimiter '{}' is not a single byte",
                self.delimiter
            ))
        })
    }
}

/// Parse a delimited table with a header row into a validated [`Dataset`].
pub fn load_dataset<T: Scalar, R: Read>(source: R, config: &SchemaConfig) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(config.delimiter_byte()?)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Table {
                row: 1,
                message: "missing header row".into(),
            })
        }
    };
    let header: Vec<String> = header.iter().map(str::to_string).collect();
    let mut builder = Builder::new(config, &header)?;
    for (i, row) in rows.enumerate() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        builder.push(line, row.iter())?;
    }
    Ok(builder.finish())
}

/// Convenience wrapper for in-memory tables.
pub fn load_dataset_str<T: Scalar>(text: &str, config: &SchemaConfig) -> Result<Dataset<T>> {
    load_dataset(text.as_bytes(), config)
}

struct Builder<'a, T> {
    schema: Schema,
    /// schema index -> column position in the file
    columns: Vec<usize>,
    width: usize,
    missing: BTreeSet<&'a str>,
    group_rule: Condition<T>,
    decision_rule: Condition<T>,
    levels: Vec<Vec<String>>,
    lookup: Vec<HashMap<String, u32>>,
    records: Vec<Record<T>>,
    delimiter: u8,
}

impl<'a, T: Scalar> Builder<'a, T> {
    fn new(config: &'a SchemaConfig, header: &[String]) -> Result<Self> {
        let schema = Schema::new(config.attributes.clone())?;
        let mut position = HashMap::new();
        for (column, name) in header.iter().enumerate() {
            if position.insert(name.as_str(), column).is_some() {
                return Err(Error::DuplicateHeader {
                    name: name.clone(),
                    column: column + 1,
                });
            }
            if schema.index_of(name).is_none() {
                return Err(Error::UndeclaredColumn {
                    name: name.clone(),
                    column: column + 1,
                });
            }
        }
        let columns = schema
            .attributes()
            .iter()
            .map(|a| {
                position
                    .get(a.name.as_str())
                    .copied()
                    .ok_or_else(|| Error::MissingColumn {
                        name: a.name.clone(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let group_rule = config.protected.to_condition(config.unprotected.as_ref())?;
        group_rule.check_kind(&schema.attributes()[schema.group_index()])?;
        let decision_rule = config.positive.to_condition(config.negative.as_ref())?;
        decision_rule.check_kind(&schema.attributes()[schema.decision_index()])?;
        let n = schema.len();
        Ok(Builder {
            schema,
            columns,
            width: header.len(),
            missing: config.missing.iter().map(String::as_str).collect(),
            group_rule,
            decision_rule,
            levels: vec![Vec::new(); n],
            lookup: vec![HashMap::new(); n],
            records: Vec::new(),
            delimiter: config.delimiter_byte()?,
        })
    }

    fn push<'r>(&mut self, line: usize, row: impl Iterator<Item = &'r str>) -> Result<()> {
        let tokens: Vec<&str> = row.collect();
        if tokens.len() != self.width {
            return Err(Error::RaggedRow {
                row: line,
                column: tokens.len().min(self.width) + 1,
                attribute: String::new(),
                expected: self.width,
                found: tokens.len(),
            });
        }
        let mut values = Vec::with_capacity(self.schema.len());
        let mut group = None;
        let mut decision = None;
        for (idx, attribute) in self.schema.attributes().iter().enumerate() {
            let column = self.columns[idx];
            let token = tokens[column];
            if token.is_empty() || self.missing.contains(token) {
                return Err(Error::MissingValue {
                    row: line,
                    column: column + 1,
                    attribute: attribute.name.clone(),
                });
            }
            let value = match attribute.kind {
                AttributeKind::Numeric => {
                    let v: T = token
                        .parse()
                        .ok()
                        .filter(|v: &T| v.is_finite())
                        .ok_or_else(|| Error::NonNumeric {
                            row: line,
                            column: column + 1,
                            attribute: attribute.name.clone(),
                            token: token.to_string(),
                        })?;
                    Value::Num(v)
                }
                AttributeKind::Categorical => {
                    let next = self.levels[idx].len() as u32;
                    let code = *self.lookup[idx]
                        .entry(token.to_string())
                        .or_insert_with(|| {
                            self.levels[idx].push(token.to_string());
                            next
                        });
                    Value::Cat(code)
                }
            };
            let rule = if idx == self.schema.group_index() {
                Some(&self.group_rule)
            } else if idx == self.schema.decision_index() {
                Some(&self.decision_rule)
            } else {
                None
            };
            if let Some(rule) = rule {
                let holds = match value {
                    Value::Num(v) => Some(rule.eval_num(v)),
                    Value::Cat(_) => rule.eval_token(token),
                }
                .ok_or_else(|| Error::UnknownLevel {
                    row: line,
                    column: column + 1,
                    attribute: attribute.name.clone(),
                    token: token.to_string(),
                })?;
                if idx == self.schema.group_index() {
                    group = Some(if holds {
                        Group::Protected
                    } else {
                        Group::Unprotected
                    });
                } else {
                    decision = Some(if holds {
                        Decision::Positive
                    } else {
                        Decision::Negative
                    });
                }
            }
            values.push(value);
        }
        let id = self.records.len();
        self.records.push(Record {
            id,
            values,
            group: group.expect("schema has a group attribute"),
            decision: decision.expect("schema has a decision attribute"),
        });
        Ok(())
    }

    fn finish(self) -> Dataset<T> {
        Dataset {
            schema: self.schema,
            levels: self.levels,
            records: self.records,
            delimiter: self.delimiter,
            normalization: None,
        }
    }
}
