//! Propensity scores: covariate selection by information gain, a logistic
//! model of protected-group membership, clipped scoring and odds weights.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, Dataset, Decision, Group, Record, Value};
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Number of equal-frequency cells numeric attributes are cut into for entropy.
pub const ENTROPY_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Group,
    Decision,
}

fn target_labels<T: Scalar>(dataset: &Dataset<T>, target: Target) -> Vec<bool> {
    dataset
        .records()
        .iter()
        .map(|r| match target {
            Target::Group => r.group == Group::Protected,
            Target::Decision => r.decision == Decision::Positive,
        })
        .collect()
}

/// Cell index per value for `bins` equal-frequency cells; tied values share a cell.
pub fn equal_frequency_codes<T: Scalar>(values: &[T], bins: usize) -> Vec<usize> {
    let n = values.len();
    if n == 0 || bins <= 1 {
        return vec![0; n];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| scalar::cmp(*a, *b));
    let mut cuts: Vec<T> = (1..bins)
        .map(|i| i * n / bins)
        .filter(|&p| p < n)
        .map(|p| sorted[p])
        .collect();
    cuts.dedup();
    values
        .iter()
        .map(|v| cuts.partition_point(|c| *c <= *v))
        .collect()
}

/// Discrete codes of an attribute column: level codes or equal-frequency cells.
fn discrete_codes<T: Scalar>(dataset: &Dataset<T>, attribute: usize) -> Vec<usize> {
    match dataset.schema().attributes()[attribute].kind {
        AttributeKind::Categorical => dataset
            .records()
            .iter()
            .map(|r| r.values[attribute].as_cat().unwrap_or(0) as usize)
            .collect(),
        AttributeKind::Numeric => {
            let column: Vec<T> = dataset
                .records()
                .iter()
                .map(|r| r.values[attribute].as_num().unwrap_or_else(T::zero))
                .collect();
            equal_frequency_codes(&column, ENTROPY_BINS)
        }
    }
}

fn entropy_bits<T: Scalar>(counts: impl Iterator<Item = usize>, total: usize) -> T {
    if total == 0 {
        return T::zero();
    }
    let n = T::from_count(total);
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = T::from_count(c) / n;
            -p * p.log2()
        })
        .sum()
}

fn joint_counts(codes: &[usize], labels: &[bool]) -> Vec<[usize; 2]> {
    let width = codes.iter().copied().max().map_or(0, |m| m + 1);
    let mut joint = vec![[0usize; 2]; width];
    for (&c, &y) in codes.iter().zip(labels) {
        joint[c][usize::from(y)] += 1;
    }
    joint
}

/// H(label) - H(label | code), in bits.
pub fn information_gain_codes<T: Scalar>(codes: &[usize], labels: &[bool]) -> T {
    let n = codes.len();
    let joint = joint_counts(codes, labels);
    let positives = labels.iter().filter(|&&y| y).count();
    let h_target: T = entropy_bits([positives, n - positives].into_iter(), n);
    let conditional: T = joint
        .iter()
        .map(|cell| {
            let size = cell[0] + cell[1];
            T::from_count(size) / T::from_count(n.max(1))
                * entropy_bits::<T>(cell.iter().copied(), size)
        })
        .sum();
    (h_target - conditional).max(T::zero())
}

/// 2 IG / (H(code) + H(label)), in [0, 1]; zero when both entropies vanish.
pub fn symmetric_uncertainty<T: Scalar>(codes: &[usize], labels: &[bool]) -> T {
    let n = codes.len();
    let joint = joint_counts(codes, labels);
    let positives = labels.iter().filter(|&&y| y).count();
    let h_label: T = entropy_bits([positives, n - positives].into_iter(), n);
    let h_code: T = entropy_bits(joint.iter().map(|c| c[0] + c[1]), n);
    let denom = h_label + h_code;
    if denom <= T::zero() {
        return T::zero();
    }
    (T::lit(2.0) * information_gain_codes::<T>(codes, labels) / denom).min(T::one())
}

/// Information gain of `attribute` about the group or decision labels.
pub fn information_gain<T: Scalar>(
    dataset: &Dataset<T>,
    attribute: &str,
    target: Target,
) -> Result<T> {
    let idx = dataset.schema().require(attribute)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(information_gain_codes(
        &discrete_codes(dataset, idx),
        &target_labels(dataset, target),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateStatus {
    Selected,
    Proxy,
    Rejected,
}

impl CovariateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CovariateStatus::Selected => "selected",
            CovariateStatus::Proxy => "proxy",
            CovariateStatus::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateStats<T> {
    pub attribute: String,
    pub ig_group: T,
    pub ig_decision: T,
    /// Symmetric uncertainty with the group labels.
    pub group_association: T,
    pub status: CovariateStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateSelection<T> {
    /// Selected attribute names in schema order.
    pub selected: Vec<String>,
    pub dropped_proxies: Vec<(String, T)>,
    /// One entry per covariate, in schema order.
    pub stats: Vec<CovariateStats<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOptions<T> {
    /// Symmetric-uncertainty level above which a candidate counts as a group proxy.
    pub proxy_threshold: T,
    /// Attributes an analyst has declared to be proxies regardless of the statistic.
    pub declared_proxies: Vec<String>,
}

impl<T: Scalar> Default for SelectionOptions<T> {
    fn default() -> Self {
        SelectionOptions {
            proxy_threshold: T::lit(0.95),
            declared_proxies: Vec::new(),
        }
    }
}

impl<T: Scalar> CovariateSelection<T> {
    pub fn ig_group(&self, attribute: &str) -> Option<T> {
        self.stats
            .iter()
            .find(|s| s.attribute == attribute)
            .map(|s| s.ig_group)
    }

    pub fn ig_decision(&self, attribute: &str) -> Option<T> {
        self.stats
            .iter()
            .find(|s| s.attribute == attribute)
            .map(|s| s.ig_decision)
    }

    /// Expert override: use exactly `attributes`, still reporting the statistics.
    pub fn manual(dataset: &Dataset<T>, attributes: &[String]) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::EmptySelection);
        }
        let covariates = dataset.schema().covariates();
        for name in attributes {
            let idx = dataset.schema().require(name)?;
            if !covariates.contains(&idx) {
                return Err(Error::Config(format!("'{name}' is not a covariate")));
            }
        }
        let mut stats = covariate_stats(dataset)?;
        for s in &mut stats {
            s.status = if attributes.contains(&s.attribute) {
                CovariateStatus::Selected
            } else {
                CovariateStatus::Rejected
            };
        }
        let selected = stats
            .iter()
            .filter(|s| s.status == CovariateStatus::Selected)
            .map(|s| s.attribute.clone())
            .collect();
        Ok(CovariateSelection {
            selected,
            dropped_proxies: Vec::new(),
            stats,
        })
    }

    /// Table with columns `attr,ig_group,ig_decision,status`.
    pub fn write_report<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["attr", "ig_group", "ig_decision", "status"])?;
        for s in &self.stats {
            out.write_record([
                s.attribute.clone(),
                s.ig_group.to_string(),
                s.ig_decision.to_string(),
                s.status.as_str().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn covariate_stats<T: Scalar>(dataset: &Dataset<T>) -> Result<Vec<CovariateStats<T>>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let group = target_labels(dataset, Target::Group);
    let decision = target_labels(dataset, Target::Decision);
    Ok(dataset
        .schema()
        .covariates()
        .into_iter()
        .map(|idx| {
            let codes = discrete_codes(dataset, idx);
            CovariateStats {
                attribute: dataset.schema().attributes()[idx].name.clone(),
                ig_group: information_gain_codes(&codes, &group),
                ig_decision: information_gain_codes(&codes, &decision),
                group_association: symmetric_uncertainty(&codes, &group),
                status: CovariateStatus::Rejected,
            }
        })
        .collect())
}

/// Whether each value is within the top half of the ranking (ties at the cut kept).
fn top_half<T: Scalar>(values: &[T]) -> Vec<bool> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| scalar::cmp(*b, *a));
    let keep = values.len().div_ceil(2);
    match keep.checked_sub(1).and_then(|i| sorted.get(i)) {
        Some(&cut) => values.iter().map(|v| *v >= cut).collect(),
        None => vec![false; values.len()],
    }
}

/// Covariates in the top half by information gain against both the group and
/// the decision, minus group proxies.
pub fn select_covariates<T: Scalar>(
    dataset: &Dataset<T>,
    options: &SelectionOptions<T>,
) -> Result<CovariateSelection<T>> {
    if dataset.schema().covariates().len() < 2 {
        return Err(Error::InvalidParameter(
            "covariate selection needs at least two covariates".into(),
        ));
    }
    for name in &options.declared_proxies {
        dataset.schema().require(name)?;
    }
    let mut stats = covariate_stats(dataset)?;
    let by_group = top_half(&stats.iter().map(|s| s.ig_group).collect::<Vec<_>>());
    let by_decision = top_half(&stats.iter().map(|s| s.ig_decision).collect::<Vec<_>>());
    let mut dropped_proxies = Vec::new();
    for (i, s) in stats.iter_mut().enumerate() {
        if !(by_group[i] && by_decision[i]) {
            continue;
        }
        if s.group_association > options.proxy_threshold
            || options.declared_proxies.contains(&s.attribute)
        {
            s.status = CovariateStatus::Proxy;
            dropped_proxies.push((s.attribute.clone(), s.group_association));
        } else {
            s.status = CovariateStatus::Selected;
        }
    }
    let selected: Vec<String> = stats
        .iter()
        .filter(|s| s.status == CovariateStatus::Selected)
        .map(|s| s.attribute.clone())
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(CovariateSelection {
        selected,
        dropped_proxies,
        stats,
    })
}

/// One entry of the feature map phi(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BasisFeature<T> {
    Intercept,
    /// 1 when the attribute takes `level`, else 0.
    Indicator {
        attribute: String,
        level: String,
    },
    /// The (normalized) numeric value itself.
    Numeric {
        attribute: String,
    },
    /// 1 when the value is at least `threshold`.
    AtLeast {
        attribute: String,
        threshold: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions<T> {
    pub l2: T,
    pub max_iters: usize,
    pub tol: T,
    pub clip_epsilon: T,
    /// Replace numeric pass-through features by an at-or-above-median indicator.
    pub binarize_numeric: bool,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            l2: T::lit(1e-4),
            max_iters: 1000,
            tol: T::lit(1e-6),
            clip_epsilon: T::lit(0.01),
            binarize_numeric: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta<T> {
    pub iterations: usize,
    /// Final penalized mean log-likelihood; absent for hand-built models.
    pub log_likelihood: Option<T>,
    pub converged: bool,
    /// Largest absolute gradient entry at the returned coefficients.
    pub gradient_max_norm: Option<T>,
    /// Objective after each accepted step (starting point first).
    #[serde(skip, default = "Vec::new")]
    pub trace: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel<T> {
    pub basis: Vec<BasisFeature<T>>,
    pub beta: Vec<T>,
    pub training: TrainingMeta<T>,
    pub clip_epsilon: T,
}

#[derive(Debug, Clone)]
enum Compiled<T> {
    Intercept,
    Indicator { attribute: usize, code: Option<u32> },
    Numeric { attribute: usize },
    AtLeast { attribute: usize, threshold: T },
}

impl<T: Scalar> Compiled<T> {
    fn eval(&self, record: &Record<T>) -> T {
        match *self {
            Compiled::Intercept => T::one(),
            Compiled::Indicator { attribute, code } => match (record.values[attribute], code) {
                (Value::Cat(c), Some(want)) if c == want => T::one(),
                _ => T::zero(),
            },
            Compiled::Numeric { attribute } => {
                record.values[attribute].as_num().unwrap_or_else(T::zero)
            }
            Compiled::AtLeast {
                attribute,
                threshold,
            } => match record.values[attribute].as_num() {
                Some(v) if v >= threshold => T::one(),
                _ => T::zero(),
            },
        }
    }
}

fn compile<T: Scalar>(basis: &[BasisFeature<T>], dataset: &Dataset<T>) -> Result<Vec<Compiled<T>>> {
    let schema = dataset.schema();
    basis
        .iter()
        .map(|f| {
            Ok(match f {
                BasisFeature::Intercept => Compiled::Intercept,
                BasisFeature::Indicator { attribute, level } => {
                    let idx = schema.require(attribute)?;
                    Compiled::Indicator {
                        attribute: idx,
                        code: dataset.level_code(idx, level),
                    }
                }
                BasisFeature::Numeric { attribute } => Compiled::Numeric {
                    attribute: schema.require(attribute)?,
                },
                BasisFeature::AtLeast {
                    attribute,
                    threshold,
                } => Compiled::AtLeast {
                    attribute: schema.require(attribute)?,
                    threshold: *threshold,
                },
            })
        })
        .collect()
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

pub fn clip<T: Scalar>(p: T, epsilon: T) -> T {
    p.max(epsilon).min(T::one() - epsilon)
}

/// Dense L2-penalized logistic regression problem (row-major design).
#[derive(Debug, Clone)]
pub struct LogisticProblem<T> {
    x: Vec<T>,
    y: Vec<T>,
    features: usize,
    l2: T,
    /// Per-feature flag; the intercept is left unpenalized.
    penalized: Vec<bool>,
}

impl<T: Scalar> LogisticProblem<T> {
    pub fn new(x: Vec<T>, y: Vec<T>, features: usize, l2: T, penalized: Vec<bool>) -> Self {
        assert_eq!(x.len(), y.len() * features, "design shape");
        assert_eq!(penalized.len(), features, "penalty mask length");
        LogisticProblem {
            x,
            y,
            features,
            l2,
            penalized,
        }
    }

    pub fn samples(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.features..(i + 1) * self.features]
    }

    fn linear(&self, i: usize, beta: &[T]) -> T {
        self.row(i).iter().zip(beta).map(|(a, b)| *a * *b).sum()
    }

    fn penalty(&self, beta: &[T]) -> T {
        let sq: T = beta
            .iter()
            .zip(&self.penalized)
            .filter(|(_, p)| **p)
            .map(|(b, _)| *b * *b)
            .sum();
        self.l2 * sq / T::lit(2.0)
    }

    /// Mean log-likelihood minus (l2 / 2) * ||beta||^2 over penalized entries.
    pub fn objective(&self, beta: &[T]) -> T {
        let n = T::from_count(self.samples().max(1));
        let ll: T = (0..self.samples())
            .map(|i| {
                let z = self.linear(i, beta);
                self.y[i] * z - softplus(z)
            })
            .sum();
        ll / n - self.penalty(beta)
    }

    pub fn gradient(&self, beta: &[T]) -> Vec<T> {
        let n = T::from_count(self.samples().max(1));
        let mut g = vec![T::zero(); self.features];
        for i in 0..self.samples() {
            let residual = self.y[i] - sigmoid(self.linear(i, beta));
            for (gj, xj) in g.iter_mut().zip(self.row(i)) {
                *gj += residual * *xj;
            }
        }
        for ((gj, bj), p) in g.iter_mut().zip(beta).zip(&self.penalized) {
            *gj /= n;
            if *p {
                *gj -= self.l2 * *bj;
            }
        }
        g
    }

    /// Gradient ascent from zero with Armijo backtracking.
    pub fn fit(&self, max_iters: usize, tol: T) -> Result<(Vec<T>, TrainingMeta<T>)> {
        let mut beta = vec![T::zero(); self.features];
        let mut value = self.objective(&beta);
        let mut trace = vec![value];
        let mut step = T::one();
        let mut converged = false;
        let mut iterations = 0;
        let armijo = T::lit(1e-4);
        let min_step = T::lit(1e-30);
        while iterations < max_iters {
            let g = self.gradient(&beta);
            let gmax = g.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if gmax < tol {
                converged = true;
                break;
            }
            let gsq: T = g.iter().map(|v| *v * *v).sum();
            let mut t = step;
            loop {
                let candidate: Vec<T> = beta.iter().zip(&g).map(|(b, d)| *b + t * *d).collect();
                let cand_value = self.objective(&candidate);
                if !cand_value.is_finite() {
                    if t < min_step {
                        return Err(Error::NonFiniteLikelihood {
                            iteration: iterations,
                        });
                    }
                } else if cand_value >= value + armijo * t * gsq {
                    beta = candidate;
                    value = cand_value;
                    break;
                }
                t /= T::lit(2.0);
                if t < min_step {
                    break;
                }
            }
            iterations += 1;
            if t < min_step {
                // no ascent direction left at working precision
                converged = gmax < tol;
                break;
            }
            trace.push(value);
            step = t * T::lit(2.0);
        }
        let gmax = self
            .gradient(&beta)
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()));
        converged = converged || gmax < tol;
        Ok((
            beta,
            TrainingMeta {
                iterations,
                log_likelihood: Some(value),
                converged,
                gradient_max_norm: Some(gmax),
                trace,
            },
        ))
    }
}

fn build_basis<T: Scalar>(
    dataset: &Dataset<T>,
    selection: &CovariateSelection<T>,
    binarize_numeric: bool,
) -> Result<Vec<BasisFeature<T>>> {
    let mut basis = vec![BasisFeature::Intercept];
    let schema = dataset.schema();
    for name in &selection.selected {
        let idx = schema.require(name)?;
        match schema.attributes()[idx].kind {
            AttributeKind::Categorical => {
                let mut counts = vec![0usize; dataset.levels(idx).len()];
                for r in dataset.records() {
                    if let Some(c) = r.values[idx].as_cat() {
                        counts[c as usize] += 1;
                    }
                }
                // most frequent level is the reference; first level wins ties
                let reference =
                    counts
                        .iter()
                        .enumerate()
                        .fold(0, |best, (i, &c)| if c > counts[best] { i } else { best });
                for (code, &count) in counts.iter().enumerate() {
                    if code != reference && count > 0 {
                        basis.push(BasisFeature::Indicator {
                            attribute: name.clone(),
                            level: dataset.levels(idx)[code].clone(),
                        });
                    }
                }
            }
            AttributeKind::Numeric if binarize_numeric => {
                let mut column: Vec<T> = dataset
                    .records()
                    .iter()
                    .filter_map(|r| r.values[idx].as_num())
                    .collect();
                column.sort_by(|a, b| scalar::cmp(*a, *b));
                let threshold = column
                    .get(column.len() / 2)
                    .copied()
                    .unwrap_or_else(T::zero);
                basis.push(BasisFeature::AtLeast {
                    attribute: name.clone(),
                    threshold,
                });
            }
            AttributeKind::Numeric => basis.push(BasisFeature::Numeric {
                attribute: name.clone(),
            }),
        }
    }
    Ok(basis)
}

/// Fit e(x) = P(protected | x) over the selected covariates.
pub fn fit_propensity<T: Scalar>(
    dataset: &Dataset<T>,
    selection: &CovariateSelection<T>,
    options: &FitOptions<T>,
) -> Result<LogisticModel<T>> {
    if selection.selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    if !(options.clip_epsilon > T::zero() && options.clip_epsilon < T::lit(0.5)) {
        return Err(Error::InvalidParameter(
            "clip epsilon must lie in (0, 0.5)".into(),
        ));
    }
    let protected = dataset
        .records()
        .iter()
        .filter(|r| r.group == Group::Protected)
        .count();
    if protected == 0 || protected == dataset.len() {
        return Err(Error::SingleGroup);
    }
    let basis = build_basis(dataset, selection, options.binarize_numeric)?;
    let compiled = compile(&basis, dataset)?;
    let mut x = Vec::with_capacity(dataset.len() * basis.len());
    let mut y = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        x.extend(compiled.iter().map(|f| f.eval(r)));
        y.push(if r.group == Group::Protected {
            T::one()
        } else {
            T::zero()
        });
    }
    let penalized = basis
        .iter()
        .map(|f| !matches!(f, BasisFeature::Intercept))
        .collect();
    let problem = LogisticProblem::new(x, y, basis.len(), options.l2, penalized);
    let (beta, training) = problem.fit(options.max_iters, options.tol)?;
    Ok(LogisticModel {
        basis,
        beta,
        training,
        clip_epsilon: options.clip_epsilon,
    })
}

impl<T: Scalar> LogisticModel<T> {
    /// Model with given coefficients, for restoring or constructing by hand.
    pub fn new(basis: Vec<BasisFeature<T>>, beta: Vec<T>, clip_epsilon: T) -> Result<Self> {
        if basis.len() != beta.len() {
            return Err(Error::InvalidParameter(format!(
                "basis has {} features but beta has {} entries",
                basis.len(),
                beta.len()
            )));
        }
        if !(clip_epsilon > T::zero() && clip_epsilon < T::lit(0.5)) {
            return Err(Error::InvalidParameter(
                "clip epsilon must lie in (0, 0.5)".into(),
            ));
        }
        Ok(LogisticModel {
            basis,
            beta,
            training: TrainingMeta {
                iterations: 0,
                log_likelihood: None,
                converged: false,
                gradient_max_norm: None,
                trace: Vec::new(),
            },
            clip_epsilon,
        })
    }

    fn linear(&self, compiled: &[Compiled<T>], record: &Record<T>) -> T {
        compiled
            .iter()
            .zip(&self.beta)
            .map(|(f, b)| f.eval(record) * *b)
            .sum()
    }

    /// Clipped propensity score of one record.
    pub fn score(&self, dataset: &Dataset<T>, record: &Record<T>) -> Result<T> {
        let compiled = compile(&self.basis, dataset)?;
        Ok(clip(
            sigmoid(self.linear(&compiled, record)),
            self.clip_epsilon,
        ))
    }

    /// Clipped propensity scores of every record, indexed by id.
    pub fn score_all(&self, dataset: &Dataset<T>) -> Result<Vec<T>> {
        let compiled = compile(&self.basis, dataset)?;
        Ok(dataset
            .records()
            .iter()
            .map(|r| clip(sigmoid(self.linear(&compiled, r)), self.clip_epsilon))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: LogisticModel<T> = serde_json::from_str(text)?;
        if model.basis.len() != model.beta.len() {
            return Err(Error::InvalidParameter(
                "basis and beta lengths differ".into(),
            ));
        }
        Ok(model)
    }
}

/// Spec-level name for [`LogisticModel::score`].
pub fn propensity_score<T: Scalar>(
    model: &LogisticModel<T>,
    dataset: &Dataset<T>,
    record: &Record<T>,
) -> Result<T> {
    model.score(dataset, record)
}

/// Odds weight e / (1 - e) of an unprotected record.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Weight<T>(pub T);

impl<T: Scalar> Weight<T> {
    pub fn value(self) -> T {
        self.0
    }
}

/// The constant factor P(unprotected)/P(protected) is omitted; it cancels in
/// every weighted rate computed from these weights.
pub fn weight_of<T: Scalar>(e: T) -> Weight<T> {
    Weight(e / (T::one() - e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_dataset_str, SchemaConfig};

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn information_gain_hand_examples() {
        // identical to target: IG = H(target) = 1 bit for a 50/50 split
        let labels = [true, false, true, false];
        let codes = [1, 0, 1, 0];
        assert!(approx(
            information_gain_codes::<f64>(&codes, &labels),
            1.0,
            1e-12
        ));

        // independent with exact product counts
        let codes = [0, 0, 1, 1, 0, 0, 1, 1];
        let labels = [true, false, true, false, true, false, true, false];
        assert!(approx(
            information_gain_codes::<f64>(&codes, &labels),
            0.0,
            1e-12
        ));

        // {(A,-):3, (A,+):1, (B,-):1, (B,+):3}
        let codes = [0, 0, 0, 0, 1, 1, 1, 1];
        let labels = [false, false, false, true, false, true, true, true];
        let h = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let expected = 1.0 - h(0.25);
        let got: f64 = information_gain_codes(&codes, &labels);
        assert!(approx(got, expected, 1e-12));
        assert!(approx(got, 0.1887, 1e-4));
    }

    #[test]
    fn symmetric_uncertainty_of_a_copy_is_one() {
        let labels = [true, false, true, true, false];
        let codes: Vec<usize> = labels.iter().map(|&b| usize::from(b)).collect();
        assert!(approx(
            symmetric_uncertainty::<f64>(&codes, &labels),
            1.0,
            1e-12
        ));
    }

    #[test]
    fn equal_frequency_cells_keep_ties_together() {
        let values: Vec<f64> = (0..20).map(f64::from).collect();
        let codes = equal_frequency_codes(&values, 10);
        assert_eq!(codes[0], codes[1]);
        assert_eq!(*codes.iter().max().unwrap(), 9);
        let tied = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 9.0];
        let codes = equal_frequency_codes(&tied, 10);
        assert!(codes[..8].iter().all(|&c| c == codes[0]));
        assert!(codes[8] > codes[0] && codes[9] > codes[8]);
    }

    #[test]
    fn top_half_is_inclusive_at_ties() {
        assert_eq!(
            top_half(&[3.0, 1.0, 2.0, 0.5]),
            vec![true, false, true, false]
        );
        assert_eq!(
            top_half(&[3.0, 2.0, 2.0, 0.5]),
            vec![true, true, true, false]
        );
        assert_eq!(top_half(&[1.0, 2.0, 3.0]), vec![false, true, true]);
    }

    fn selection_fixture() -> Dataset<f64> {
        // driver decides group and (mostly) decision; noise is balanced;
        // copy equals the group column.
        let cfg = SchemaConfig::from_toml(
            r#"
            protected = "F"
            positive = "+"
            [[attributes]]
            name = "driver"
            kind = "categorical"
            [[attributes]]
            name = "noise"
            kind = "categorical"
            [[attributes]]
            name = "copy"
            kind = "categorical"
            [[attributes]]
            name = "weak"
            kind = "categorical"
            [[attributes]]
            name = "g"
            kind = "categorical"
            role = "group"
            [[attributes]]
            name = "d"
            kind = "categorical"
            role = "decision"
            "#,
        )
        .unwrap();
        let mut text = String::from("driver,noise,copy,weak,g,d\n");
        for i in 0..80 {
            let driver = if i % 4 < 3 { "a" } else { "b" };
            let g = if driver == "a" {
                if i % 8 == 0 {
                    "M"
                } else {
                    "F"
                }
            } else {
                "M"
            };
            let d = if driver == "a" { "-" } else { "+" };
            let noise = if (i / 8) % 2 == 0 { "x" } else { "y" };
            let weak = if i % 5 == 0 { "p" } else { "q" };
            text.push_str(&format!("{driver},{noise},{g},{weak},{g},{d}\n"));
        }
        load_dataset_str(&text, &cfg).unwrap()
    }

    #[test]
    fn selection_keeps_drivers_and_drops_noise_and_proxies() {
        let d = selection_fixture();
        let sel = select_covariates(&d, &SelectionOptions::default()).unwrap();
        assert_eq!(sel.selected, vec!["driver".to_string()]);
        assert!(!sel.selected.contains(&"noise".to_string()));
        assert_eq!(sel.dropped_proxies.len(), 1);
        assert_eq!(sel.dropped_proxies[0].0, "copy");
        assert!(sel.dropped_proxies[0].1 > 0.95);
        assert!(approx(sel.ig_group("noise").unwrap(), 0.0, 1e-12));
    }

    #[test]
    fn declared_proxies_are_dropped() {
        let d = selection_fixture();
        let opts = SelectionOptions {
            proxy_threshold: 0.95,
            declared_proxies: vec!["driver".into()],
        };
        let err = select_covariates(&d, &opts).unwrap_err();
        assert!(matches!(err, Error::EmptySelection));
        let manual = CovariateSelection::manual(&d, &["noise".to_string()]).unwrap();
        assert_eq!(manual.selected, vec!["noise".to_string()]);
    }

    #[test]
    fn report_has_fixed_columns() {
        let d = selection_fixture();
        let sel = select_covariates(&d, &SelectionOptions::default()).unwrap();
        let mut buf = Vec::new();
        sel.write_report(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("attr,ig_group,ig_decision,status\n"));
        assert!(text.contains(",proxy\n"));
    }

    #[test]
    fn zero_iterations_scores_one_half() {
        let d = selection_fixture();
        let sel = CovariateSelection::manual(&d, &["driver".to_string()]).unwrap();
        let opts = FitOptions {
            max_iters: 0,
            ..FitOptions::default()
        };
        let model = fit_propensity(&d, &sel, &opts).unwrap();
        assert!(model.beta.iter().all(|b| *b == 0.0));
        assert!(model.score_all(&d).unwrap().iter().all(|&e| e == 0.5));
    }

    #[test]
    fn intercept_only_model_scores() {
        let d = selection_fixture();
        let model =
            LogisticModel::new(vec![BasisFeature::Intercept], vec![4f64.ln()], 0.01).unwrap();
        for r in d.records() {
            assert!(approx(model.score(&d, r).unwrap(), 0.8, 1e-15));
        }
        let floor = LogisticModel::new(vec![BasisFeature::Intercept], vec![-1e6], 0.01).unwrap();
        assert_eq!(propensity_score(&floor, &d, &d.records()[0]).unwrap(), 0.01);
        let zero = LogisticModel::new(vec![BasisFeature::Intercept], vec![0.0], 0.01).unwrap();
        assert_eq!(zero.score(&d, &d.records()[0]).unwrap(), 0.5);
        assert!(LogisticModel::new(vec![BasisFeature::<f64>::Intercept], vec![], 0.01).is_err());
        assert!(LogisticModel::new(vec![BasisFeature::<f64>::Intercept], vec![0.0], 0.5).is_err());
    }

    #[test]
    fn unseen_levels_contribute_nothing() {
        let d = selection_fixture();
        let basis = vec![
            BasisFeature::Intercept,
            BasisFeature::Indicator {
                attribute: "driver".into(),
                level: "never-seen".into(),
            },
        ];
        let model = LogisticModel::new(basis, vec![0.0, 50.0], 0.01).unwrap();
        assert_eq!(model.score(&d, &d.records()[0]).unwrap(), 0.5);
    }

    #[test]
    fn perfectly_separating_covariate_engages_clipping() {
        let cfg = SchemaConfig::from_toml(
            r#"
            protected = "F"
            positive = "+"
            [[attributes]]
            name = "flag"
            kind = "categorical"
            [[attributes]]
            name = "other"
            kind = "numeric"
            [[attributes]]
            name = "g"
            kind = "categorical"
            role = "group"
            [[attributes]]
            name = "d"
            kind = "categorical"
            role = "decision"
            "#,
        )
        .unwrap();
        let mut text = String::from("flag,other,g,d\n");
        for i in 0..200 {
            let (flag, g) = if i % 2 == 0 {
                ("yes", "F")
            } else {
                ("no", "M")
            };
            text.push_str(&format!(
                "{flag},{},{g},{}\n",
                i % 7,
                if i % 3 == 0 { "+" } else { "-" }
            ));
        }
        let d: Dataset<f64> = load_dataset_str(&text, &cfg).unwrap();
        let sel = CovariateSelection::manual(&d, &["flag".to_string()]).unwrap();
        let model = fit_propensity(&d, &sel, &FitOptions::default()).unwrap();
        for (r, e) in d.records().iter().zip(model.score_all(&d).unwrap()) {
            let want = if r.group == Group::Protected {
                0.99
            } else {
                0.01
            };
            assert_eq!(e, want);
        }
    }

    #[test]
    fn fit_rejects_single_group() {
        let cfg = SchemaConfig::from_toml(
            "protected = \"F\"\npositive = \"+\"\n[[attributes]]\nname = \"x\"\nkind = \"numeric\"\n[[attributes]]\nname = \"g\"\nkind = \"categorical\"\nrole = \"group\"\n[[attributes]]\nname = \"d\"\nkind = \"categorical\"\nrole = \"decision\"\n",
        )
        .unwrap();
        let d: Dataset<f64> = load_dataset_str("x,g,d\n1,F,+\n2,F,-\n", &cfg).unwrap();
        let sel = CovariateSelection::manual(&d, &["x".to_string()]).unwrap();
        assert!(matches!(
            fit_propensity(&d, &sel, &FitOptions::default()),
            Err(Error::SingleGroup)
        ));
    }

    #[test]
    fn weights() {
        assert_eq!(weight_of(0.5f64).value(), 1.0);
        assert!(approx(weight_of(0.8f64).value(), 4.0, 1e-12));
        assert!(approx(weight_of(0.01f64).value(), 0.01 / 0.99, 1e-15));
        assert!(weight_of(0.01f64).value() < 0.0102);
    }

    #[test]
    fn model_json_round_trip() {
        let model = LogisticModel::new(
            vec![
                BasisFeature::Intercept,
                BasisFeature::Numeric {
                    attribute: "x".into(),
                },
                BasisFeature::AtLeast {
                    attribute: "y".into(),
                    threshold: 0.3,
                },
            ],
            vec![0.1, -2.345678901234567, 1e-17],
            0.01,
        )
        .unwrap();
        let back = LogisticModel::<f64>::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back.beta, model.beta);
        assert_eq!(back.basis, model.basis);
    }
}
