//! End-to-end orchestration: configuration, stage runners and artifact output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_dataset, Dataset, Decision, Group, SchemaConfig};
use crate::discovery::{
    compare_rule_across_groups, extract_rules, learn_tree_over, score_all, write_scores, Atom,
    IndividualScore, RegressionTree, Rule, RuleComparison, ScoringParams, Test, Threshold,
    TreeParams,
};
use crate::error::{Error, Result};
use crate::harness::tamper::{tamper, TamperSpec, Tampered};
use crate::harness::trends::{trend_table, write_trends, Subset, TrendRow};
use crate::measures::FallbackMode;
use crate::propensity::{
    fit_propensity, select_covariates, CovariateSelection, FitOptions, LogisticModel,
    SelectionOptions,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Table path; relative paths resolve against the configuration file.
    pub path: PathBuf,
    /// Optional seeded subsample size.
    #[serde(default)]
    pub sample: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub proxy_threshold: f64,
    /// Expert-declared proxies, always dropped.
    pub proxies: Vec<String>,
    /// Explicit covariate list replacing the automatic selection.
    pub covariates: Option<Vec<String>>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            proxy_threshold: 0.95,
            proxies: Vec::new(),
            covariates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropensityConfig {
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub clip_epsilon: f64,
    pub binarize_numeric: bool,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        let d = FitOptions::<f64>::default();
        PropensityConfig {
            l2: d.l2,
            max_iters: d.max_iters,
            tol: d.tol,
            clip_epsilon: d.clip_epsilon,
            binarize_numeric: d.binarize_numeric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub k: usize,
    pub max_distance: Option<f64>,
    pub alpha: f64,
    pub fallback: FallbackMode,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            k: 15,
            max_distance: None,
            alpha: 0.0,
            fallback: FallbackMode::PaperLiteral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendsConfig {
    pub bins: usize,
    pub min_count: usize,
    /// Subset averaged in `trends.csv`; `trends_everyone.csv` always covers everyone.
    pub subset: Subset,
}

impl Default for TrendsConfig {
    fn default() -> Self {
        TrendsConfig {
            bins: 10,
            min_count: 5,
            subset: Subset::Flagged,
        }
    }
}

/// Attributes a rule tree may split on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeFeatures {
    /// The covariates selected for the propensity model.
    #[default]
    Selected,
    /// Every covariate in the schema.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub min_leaf: usize,
    pub max_depth: usize,
    pub features: TreeFeatures,
}

impl Default for TreeConfig {
    fn default() -> Self {
        let p = TreeParams::default();
        TreeConfig {
            min_leaf: p.min_leaf,
            max_depth: p.max_depth,
            features: TreeFeatures::Selected,
        }
    }
}

impl TreeConfig {
    pub fn params(&self) -> TreeParams {
        TreeParams {
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
        }
    }

    pub fn feature_names<T: Scalar>(
        &self,
        dataset: &Dataset<T>,
        selection: &CovariateSelection<T>,
    ) -> Vec<String> {
        match self.features {
            TreeFeatures::Selected => selection.selected.clone(),
            TreeFeatures::All => {
                let schema = dataset.schema();
                schema
                    .covariates()
                    .into_iter()
                    .map(|i| schema.attributes()[i].name.clone())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub schema: SchemaConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub propensity: PropensityConfig,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub trends: TrendsConfig,
    #[serde(default)]
    pub tree: TreeConfig,
    #[serde(default)]
    pub tamper: Option<TamperSpec<f64>>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.base_dir = base_dir.into();
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn data_path(&self) -> PathBuf {
        self.base_dir.join(&self.data.path)
    }

    pub fn scoring_params<T: Scalar>(&self) -> Result<ScoringParams<T>> {
        if self.scoring.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(ScoringParams {
            k: self.scoring.k,
            max_distance: self.scoring.max_distance.map(T::lit),
            alpha: Threshold::new(T::lit(self.scoring.alpha))?,
            fallback: self.scoring.fallback,
        })
    }

    pub fn fit_options<T: Scalar>(&self) -> FitOptions<T> {
        let p = &self.propensity;
        FitOptions {
            l2: T::lit(p.l2),
            max_iters: p.max_iters,
            tol: T::lit(p.tol),
            clip_epsilon: T::lit(p.clip_epsilon),
            binarize_numeric: p.binarize_numeric,
        }
    }

    pub fn tamper_spec<T: Scalar>(&self) -> Option<TamperSpec<T>> {
        self.tamper.as_ref().map(|t| TamperSpec {
            rule: t.rule.iter().map(convert_atom).collect(),
            fraction: T::lit(t.fraction),
            seed: t.seed,
        })
    }
}

fn convert_atom<T: Scalar>(atom: &Atom<f64>) -> Atom<T> {
    let test = match &atom.test {
        Test::In(levels) => Test::In(levels.clone()),
        Test::Below(t) => Test::Below(T::lit(*t)),
        Test::AtLeast(t) => Test::AtLeast(T::lit(*t)),
    };
    Atom {
        attribute: atom.attribute.clone(),
        test,
    }
}

/// Which records train a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeMode {
    /// Protected records with a negative decision.
    Discrimination,
    /// Unprotected records with a positive decision.
    Favoritism,
}

impl TreeMode {
    pub const BOTH: [TreeMode; 2] = [TreeMode::Discrimination, TreeMode::Favoritism];

    pub fn as_str(self) -> &'static str {
        match self {
            TreeMode::Discrimination => "discrimination",
            TreeMode::Favoritism => "favoritism",
        }
    }

    pub fn admits(self, group: Group, decision: Decision) -> bool {
        match self {
            TreeMode::Discrimination => group == Group::Protected && decision == Decision::Negative,
            TreeMode::Favoritism => group == Group::Unprotected && decision == Decision::Positive,
        }
    }
}

impl std::str::FromStr for TreeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "discrimination" => Ok(TreeMode::Discrimination),
            "favoritism" => Ok(TreeMode::Favoritism),
            other => Err(format!("unknown tree mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleReport<T> {
    #[serde(flatten)]
    pub rule: Rule<T>,
    pub comparison: RuleComparison<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeStudy<T> {
    pub mode: TreeMode,
    pub training_records: usize,
    /// Absent when fewer training records than `min_leaf` exist.
    pub tree: Option<RegressionTree<T>>,
    #[serde(skip)]
    pub rules: Vec<RuleReport<T>>,
}

/// Everything computed for one input table.
#[derive(Debug, Clone)]
pub struct Analysis<T> {
    pub raw: Dataset<T>,
    pub normalized: Dataset<T>,
    pub selection: CovariateSelection<T>,
    pub model: LogisticModel<T>,
    pub scores: Vec<IndividualScore<T>>,
    /// Averages over the configured subset.
    pub trends: Vec<TrendRow<T>>,
    /// Averages over every individual.
    pub trends_everyone: Vec<TrendRow<T>>,
    pub studies: Vec<TreeStudy<T>>,
}

impl<T: Scalar> Analysis<T> {
    pub fn study(&self, mode: TreeMode) -> &TreeStudy<T> {
        self.studies
            .iter()
            .find(|s| s.mode == mode)
            .expect("both tree modes are always run")
    }
}

pub fn load_input<T: Scalar>(config: &PipelineConfig) -> Result<Dataset<T>> {
    let run = || -> Result<Dataset<T>> {
        let path = config.data_path();
        let file = File::open(&path).map_err(|e| Error::file(&path, e))?;
        let dataset = load_dataset(std::io::BufReader::new(file), &config.schema)?;
        Ok(match config.data.sample {
            Some(n) => dataset.subsample(n, config.data.seed),
            None => dataset,
        })
    };
    run().map_err(|e| e.at_stage("load"))
}

pub fn choose_covariates<T: Scalar>(
    config: &PipelineConfig,
    normalized: &Dataset<T>,
) -> Result<CovariateSelection<T>> {
    let selection = match &config.selection.covariates {
        Some(list) => CovariateSelection::manual(normalized, list),
        None => select_covariates(
            normalized,
            &SelectionOptions {
                proxy_threshold: T::lit(config.selection.proxy_threshold),
                declared_proxies: config.selection.proxies.clone(),
            },
        ),
    };
    selection.map_err(|e| e.at_stage("select"))
}

/// Normalize, select covariates and fit the propensity model.
pub fn propensity_stage<T: Scalar>(
    config: &PipelineConfig,
    raw: &Dataset<T>,
) -> Result<(Dataset<T>, CovariateSelection<T>, LogisticModel<T>)> {
    let normalized = raw
        .normalize_numeric()
        .map_err(|e| e.at_stage("normalize"))?;
    let selection = choose_covariates(config, &normalized)?;
    let model = fit_propensity(&normalized, &selection, &config.fit_options())
        .map_err(|e| e.at_stage("propensity"))?;
    Ok((normalized, selection, model))
}

pub fn score_stage<T: Scalar>(
    config: &PipelineConfig,
    normalized: &Dataset<T>,
    model: &LogisticModel<T>,
) -> Result<Vec<IndividualScore<T>>> {
    let params = config.scoring_params().map_err(|e| e.at_stage("score"))?;
    score_all(normalized, model, &params).map_err(|e| e.at_stage("score"))
}

pub fn trend_stage<T: Scalar>(
    config: &PipelineConfig,
    scores: &[IndividualScore<T>],
    subset: Subset,
) -> Result<Vec<TrendRow<T>>> {
    trend_table(scores, subset, config.trends.bins, config.trends.min_count)
        .map_err(|e| e.at_stage("trends"))
}

/// Learn the tree for `mode` on the raw table, then extract and compare its rules.
pub fn tree_stage<T: Scalar>(
    params: TreeParams,
    features: &[String],
    mode: TreeMode,
    raw: &Dataset<T>,
    scores: &[IndividualScore<T>],
) -> Result<TreeStudy<T>> {
    let training: Vec<&IndividualScore<T>> = scores
        .iter()
        .filter(|s| mode.admits(s.group, s.decision))
        .collect();
    let ids: Vec<usize> = training.iter().map(|s| s.id).collect();
    let labels: Vec<T> = training.iter().map(|s| s.rd_causal).collect();
    if ids.is_empty() || ids.len() < params.min_leaf {
        return Ok(TreeStudy {
            mode,
            training_records: ids.len(),
            tree: None,
            rules: Vec::new(),
        });
    }
    let tree =
        learn_tree_over(raw, features, &ids, &labels, params).map_err(|e| e.at_stage("tree"))?;
    let everyone: Vec<usize> = (0..raw.len()).collect();
    let rules = extract_rules(&tree, raw, &everyone).map_err(|e| e.at_stage("rules"))?;
    let rules = rules
        .into_iter()
        .map(|rule| {
            let comparison = compare_rule_across_groups(&rule.conditions, raw, scores)?;
            Ok(RuleReport { rule, comparison })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("compare-rules"))?;
    Ok(TreeStudy {
        mode,
        training_records: ids.len(),
        tree: Some(tree),
        rules,
    })
}

/// Run every analysis stage on an already loaded raw table.
pub fn analyze<T: Scalar>(config: &PipelineConfig, raw: Dataset<T>) -> Result<Analysis<T>> {
    let (normalized, selection, model) = propensity_stage(config, &raw)?;
    let scores = score_stage(config, &normalized, &model)?;
    let trends = trend_stage(config, &scores, config.trends.subset)?;
    let trends_everyone = trend_stage(config, &scores, Subset::Everyone)?;
    let features = config.tree.feature_names(&raw, &selection);
    let studies = TreeMode::BOTH
        .into_iter()
        .map(|mode| tree_stage(config.tree.params(), &features, mode, &raw, &scores))
        .collect::<Result<Vec<_>>>()?;
    Ok(Analysis {
        raw,
        normalized,
        selection,
        model,
        scores,
        trends,
        trends_everyone,
        studies,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::file(&path, e))
}

fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_model<T: Scalar>(
    dir: &Path,
    selection: &CovariateSelection<T>,
    model: &LogisticModel<T>,
) -> Result<()> {
    selection.write_report(create(dir, "covariates.csv")?)?;
    let mut out = create(dir, "model.json")?;
    out.write_all(model.to_json()?.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_tree<T: Scalar>(dir: &Path, study: &TreeStudy<T>) -> Result<()> {
    write_json(dir, &format!("tree_{}.json", study.mode.as_str()), study)
}

pub fn write_rules<T: Scalar>(dir: &Path, studies: &[TreeStudy<T>]) -> Result<()> {
    let doc: serde_json::Map<String, serde_json::Value> = studies
        .iter()
        .map(|s| Ok((s.mode.as_str().to_string(), serde_json::to_value(&s.rules)?)))
        .collect::<Result<_>>()?;
    write_json(dir, "rules.json", &doc)
}

/// Columns: `mode,rank,rule,predicted_rdc,protected_n,protected_mean_rdc,unprotected_n,unprotected_mean_rdc`.
pub fn write_rule_comparison<T: Scalar, W: Write>(
    studies: &[TreeStudy<T>],
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "mode",
        "rank",
        "rule",
        "predicted_rdc",
        "protected_n",
        "protected_mean_rdc",
        "unprotected_n",
        "unprotected_mean_rdc",
    ])?;
    let opt = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
    for study in studies {
        for (rank, r) in study.rules.iter().enumerate() {
            out.write_record([
                study.mode.as_str().to_string(),
                (rank + 1).to_string(),
                r.rule.to_string(),
                r.rule.predicted_rdc.to_string(),
                r.comparison.protected.count.to_string(),
                opt(r.comparison.protected.mean_rd_causal),
                r.comparison.unprotected.count.to_string(),
                opt(r.comparison.unprotected.mean_rd_causal),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Write every artifact of one analysis into `dir`; returns the file names.
pub fn write_analysis<T: Scalar>(analysis: &Analysis<T>, dir: &Path) -> Result<Vec<String>> {
    let run = || -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        write_model(dir, &analysis.selection, &analysis.model)?;
        write_scores(&analysis.scores, create(dir, "scores.csv")?)?;
        write_trends(&analysis.trends, create(dir, "trends.csv")?)?;
        write_trends(
            &analysis.trends_everyone,
            create(dir, "trends_everyone.csv")?,
        )?;
        for study in &analysis.studies {
            write_tree(dir, study)?;
        }
        write_rules(dir, &analysis.studies)?;
        write_rule_comparison(&analysis.studies, create(dir, "rule_comparison.csv")?)?;
        Ok(())
    };
    run().map_err(|e| e.at_stage("write"))?;
    Ok([
        "covariates.csv",
        "model.json",
        "scores.csv",
        "trends.csv",
        "trends_everyone.csv",
        "tree_discrimination.json",
        "tree_favoritism.json",
        "rules.json",
        "rule_comparison.csv",
    ]
    .map(String::from)
    .to_vec())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TamperRecord {
    pub candidates: usize,
    pub flipped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub scalar: &'static str,
    pub config: PipelineConfig,
    /// Digest of the configuration as serialized above.
    pub config_sha256: String,
    pub input: InputDigest,
    pub records: usize,
    pub outputs: Vec<String>,
    pub tamper: Option<TamperRecord>,
}

pub struct PipelineReport<T> {
    pub original: Analysis<T>,
    pub tampered: Option<(Tampered<T>, Analysis<T>)>,
    pub manifest: Manifest,
}

/// Load, analyze and (optionally) tamper and re-analyze; writes everything under `out`.
///
/// Layout: the original analysis at the top level, the tampered one under
/// `tampered/` together with the tampered table, and `manifest.json`.
pub fn run_pipeline<T: Scalar>(config: &PipelineConfig, out: &Path) -> Result<PipelineReport<T>> {
    let data_path = config.data_path();
    let bytes = fs::read(&data_path).map_err(|e| Error::file(&data_path, e).at_stage("load"))?;
    let raw: Dataset<T> = load_input(config)?;
    let records = raw.len();
    let tampered_raw = match config.tamper_spec::<T>() {
        Some(spec) => Some(tamper(&raw, &spec).map_err(|e| e.at_stage("tamper"))?),
        None => None,
    };
    let original = analyze(config, raw)?;
    let mut outputs = write_analysis(&original, out)?;
    let tampered = match tampered_raw {
        Some(t) => {
            let analysis = analyze(config, t.dataset.clone())?;
            let dir = out.join("tampered");
            let files = write_analysis(&analysis, &dir)?;
            let run = || -> Result<()> {
                let mut table = create(&dir, "data.csv")?;
                t.dataset.write_table(&mut table)?;
                table.flush()?;
                Ok(())
            };
            run().map_err(|e| e.at_stage("write"))?;
            outputs.extend(files.into_iter().map(|f| format!("tampered/{f}")));
            outputs.push("tampered/data.csv".into());
            Some((t, analysis))
        }
        None => None,
    };
    outputs.push("manifest.json".into());
    let config_json = serde_json::to_vec(config)?;
    let manifest = Manifest {
        tool: "cdisc",
        version: env!("CARGO_PKG_VERSION"),
        scalar: std::any::type_name::<T>(),
        config: config.clone(),
        config_sha256: sha256_hex(&config_json),
        input: InputDigest {
            path: config.data.path.clone(),
            sha256: sha256_hex(&bytes),
        },
        records,
        outputs,
        tamper: tampered.as_ref().map(|(t, _)| TamperRecord {
            candidates: t.candidates,
            flipped: t.flipped.clone(),
        }),
    };
    write_json(out, "manifest.json", &manifest).map_err(|e| e.at_stage("write"))?;
    Ok(PipelineReport {
        original,
        tampered,
        manifest,
    })
}
