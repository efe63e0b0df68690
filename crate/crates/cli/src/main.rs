use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use cdisc::harness::pipeline::{
    self, load_input, propensity_stage, run_pipeline, score_stage, tree_stage, trend_stage,
    PipelineConfig, TreeMode,
};
use cdisc::harness::{tamper, Subset};
use cdisc::{Dataset64, FallbackMode, Group};
use clap::{Args, Parser, Subcommand};

/// Causal discrimination discovery with propensity-weighted situation testing.
#[derive(Parser)]
#[command(name = "cdisc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Neighborhood size [config default: 15]
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Maximum neighbor distance
    #[arg(long = "max-dist", global = true, allow_negative_numbers = true)]
    max_dist: Option<f64>,
    /// Flagging threshold alpha >= 0
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Number of propensity bins for trends
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Overrides both the subsampling and the tampering seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Substitution for undefined neighborhood proportions
    #[arg(long, global = true, value_name = "MODE")]
    fallback: Option<FallbackMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Load the table and report its shape and base rates
    Validate,
    /// Select covariates and fit the propensity model
    Propensity,
    /// Score every record (writes scores.csv)
    Score,
    /// Propensity-bin trend tables
    Trends {
        /// Individuals averaged in trends.csv: everyone, flagged, discriminated or favored
        #[arg(long)]
        subset: Option<Subset>,
    },
    /// Learn regression trees over causal risk differences
    Tree {
        /// Only one of the two studies
        #[arg(long)]
        mode: Option<TreeMode>,
    },
    /// Extract rules from both trees
    Rules,
    /// Compare every rule's mean causal risk difference across groups
    CompareRules,
    /// Apply the configured tamper rule and write the modified table
    Tamper {
        /// Override the configured flip fraction
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Run every stage and write all artifacts with a manifest
    Pipeline,
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let path = common.config.as_deref().context("--config is required")?;
    let mut config = PipelineConfig::load(path).map_err(|e| e.at_stage("config"))?;
    if let Some(k) = common.k {
        config.scoring.k = k;
    }
    if let Some(m) = common.max_dist {
        config.scoring.max_distance = Some(m);
    }
    if let Some(a) = common.alpha {
        config.scoring.alpha = a;
    }
    if let Some(b) = common.bins {
        config.trends.bins = b;
    }
    if let Some(f) = common.fallback {
        config.scoring.fallback = f;
    }
    if let Some(seed) = common.seed {
        config.data.seed = seed;
        if let Some(t) = config.tamper.as_mut() {
            t.seed = seed;
        }
    }
    Ok(config)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn validate(dataset: &Dataset64) -> Result<()> {
    let rates = dataset.base_rates()?;
    let protected = dataset.partition_by_group(Group::Protected).len();
    let schema = dataset.schema();
    println!("records: {}", dataset.len());
    println!("attributes: {}", schema.len());
    println!("covariates: {}", schema.covariates().len());
    println!("protected: {protected}");
    println!("unprotected: {}", dataset.len() - protected);
    println!("p_neg: {}", rates.p_neg);
    println!("p_pos: {}", rates.p_pos);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli.common)?;
    let out = cli.common.out.as_path();
    if let Command::Pipeline = cli.command {
        let report = run_pipeline::<f64>(&config, out)?;
        println!(
            "wrote {} artifacts to {}",
            report.manifest.outputs.len(),
            out.display()
        );
        return Ok(());
    }
    let raw: Dataset64 = load_input(&config)?;
    match cli.command {
        Command::Validate => {
            return validate(&raw).map_err(|e| e.context("stage 'validate' failed"))
        }
        Command::Tamper { fraction } => {
            let mut spec = config
                .tamper_spec::<f64>()
                .context("configuration has no [tamper] section")?;
            if let Some(f) = fraction {
                spec.fraction = f;
            }
            let tampered = tamper(&raw, &spec).map_err(|e| e.at_stage("tamper"))?;
            let mut table = create(out, "data.csv")?;
            tampered.dataset.write_table(&mut table)?;
            table.flush()?;
            let mut flipped = create(out, "flipped.csv")?;
            writeln!(flipped, "id")?;
            for id in &tampered.flipped {
                writeln!(flipped, "{id}")?;
            }
            flipped.flush()?;
            println!(
                "flipped {} of {} candidates",
                tampered.flipped.len(),
                tampered.candidates
            );
            return Ok(());
        }
        _ => {}
    }
    let (normalized, selection, model) = propensity_stage(&config, &raw)?;
    if let Command::Propensity = cli.command {
        fs::create_dir_all(out)?;
        pipeline::write_model(out, &selection, &model)?;
        return Ok(());
    }
    let scores = score_stage(&config, &normalized, &model)?;
    let features = config.tree.feature_names(&raw, &selection);
    match cli.command {
        Command::Score => {
            cdisc::discovery::write_scores(&scores, create(out, "scores.csv")?)?;
        }
        Command::Trends { subset } => {
            let rows = trend_stage(&config, &scores, subset.unwrap_or(config.trends.subset))?;
            cdisc::harness::trends::write_trends(&rows, create(out, "trends.csv")?)?;
            let everyone = trend_stage(&config, &scores, Subset::Everyone)?;
            cdisc::harness::trends::write_trends(&everyone, create(out, "trends_everyone.csv")?)?;
        }
        Command::Tree { mode } => {
            let modes: Vec<TreeMode> = mode.map_or(TreeMode::BOTH.to_vec(), |m| vec![m]);
            fs::create_dir_all(out)?;
            for m in modes {
                let study = tree_stage(config.tree.params(), &features, m, &raw, &scores)?;
                pipeline::write_tree(out, &study)?;
            }
        }
        Command::Rules | Command::CompareRules => {
            let studies = TreeMode::BOTH
                .into_iter()
                .map(|m| tree_stage(config.tree.params(), &features, m, &raw, &scores))
                .collect::<cdisc::Result<Vec<_>>>()?;
            fs::create_dir_all(out)?;
            if let Command::Rules = cli.command {
                pipeline::write_rules(out, &studies)?;
            } else {
                pipeline::write_rule_comparison(&studies, create(out, "rule_comparison.csv")?)?;
            }
        }
        Command::Validate | Command::Propensity | Command::Tamper { .. } | Command::Pipeline => {
            unreachable!()
        }
    }
    Ok(())
}

/// Error chain on one line, skipping causes already quoted by their parent.
fn describe(error: &anyhow::Error) -> String {
    let mut text = error.to_string();
    let mut last = text.clone();
    for cause in error.chain().skip(1) {
        let message = cause.to_string();
        if !last.contains(&message) {
            text.push_str(": ");
            text.push_str(&message);
        }
        last = message;
    }
    text
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
