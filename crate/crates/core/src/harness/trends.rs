//! Propensity-bin trend tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{Decision, Group};
use crate::discovery::{Flag, IndividualScore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    All,
    Protected,
    Unprotected,
}

impl Population {
    pub const EVERY: [Population; 3] = [
        Population::All,
        Population::Protected,
        Population::Unprotected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Population::All => "all",
            Population::Protected => "protected",
            Population::Unprotected => "unprotected",
        }
    }

    fn admits(self, group: Group) -> bool {
        match self {
            Population::All => true,
            Population::Protected => group == Group::Protected,
            Population::Unprotected => group == Group::Unprotected,
        }
    }
}

/// Which individuals enter the averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Everyone,
    /// Discriminated or favored.
    #[default]
    Flagged,
    Discriminated,
    Favored,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Everyone => "everyone",
            Subset::Flagged => "flagged",
            Subset::Discriminated => "discriminated",
            Subset::Favored => "favored",
        }
    }

    fn admits(self, flag: Flag) -> bool {
        match self {
            Subset::Everyone => true,
            Subset::Flagged => flag != Flag::Neither,
            Subset::Discriminated => flag == Flag::Discriminated,
            Subset::Favored => flag == Flag::Favored,
        }
    }
}

impl std::str::FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "everyone" => Ok(Subset::Everyone),
            "flagged" => Ok(Subset::Flagged),
            "discriminated" => Ok(Subset::Discriminated),
            "favored" => Ok(Subset::Favored),
            other => Err(format!("unknown trend subset '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendFilter {
    pub population: Population,
    pub subset: Subset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendRow<T> {
    pub bin_lo: T,
    pub bin_hi: T,
    pub population: Population,
    pub n: usize,
    /// Means are absent for empty bins.
    pub mean_pos_prob: Option<T>,
    pub mean_rd: Option<T>,
    pub mean_rdc: Option<T>,
    pub low_count_flag: bool,
}

/// Equal-width bin of `p` among `n_bins` over [0, 1]; 1.0 lands in the last bin.
pub fn bin_index<T: Scalar>(p: T, n_bins: usize) -> usize {
    let raw = (p * T::from_count(n_bins)).floor().to_usize().unwrap_or(0);
    raw.min(n_bins - 1)
}

fn edge<T: Scalar>(i: usize, n_bins: usize) -> T {
    if i == n_bins {
        T::one()
    } else {
        T::from_count(i) / T::from_count(n_bins)
    }
}

/// One row per equal-width propensity bin for the individuals passing `filter`.
pub fn bin_trends<T: Scalar>(
    scores: &[IndividualScore<T>],
    filter: TrendFilter,
    n_bins: usize,
    min_count: usize,
) -> Result<Vec<TrendRow<T>>> {
    if n_bins < 1 {
        return Err(Error::InvalidParameter(
            "at least one trend bin is required".into(),
        ));
    }
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut n = vec![0usize; n_bins];
    let mut pos = vec![0usize; n_bins];
    let mut rd = vec![T::zero(); n_bins];
    let mut rdc = vec![T::zero(); n_bins];
    for s in scores
        .iter()
        .filter(|s| filter.population.admits(s.group) && filter.subset.admits(s.flag))
    {
        let b = bin_index(s.propensity, n_bins);
        n[b] += 1;
        if s.decision == Decision::Positive {
            pos[b] += 1;
        }
        rd[b] += s.rd;
        rdc[b] += s.rd_causal;
    }
    Ok((0..n_bins)
        .map(|b| {
            let count = T::from_count(n[b]);
            let mean = |sum: T| (n[b] > 0).then(|| sum / count);
            TrendRow {
                bin_lo: edge(b, n_bins),
                bin_hi: edge(b + 1, n_bins),
                population: filter.population,
                n: n[b],
                mean_pos_prob: mean(T::from_count(pos[b])),
                mean_rd: mean(rd[b]),
                mean_rdc: mean(rdc[b]),
                low_count_flag: n[b] < min_count,
            }
        })
        .collect())
}

/// Trend rows for all three populations under one subset.
pub fn trend_table<T: Scalar>(
    scores: &[IndividualScore<T>],
    subset: Subset,
    n_bins: usize,
    min_count: usize,
) -> Result<Vec<TrendRow<T>>> {
    let mut rows = Vec::with_capacity(3 * n_bins);
    for population in Population::EVERY {
        rows.extend(bin_trends(
            scores,
            TrendFilter { population, subset },
            n_bins,
            min_count,
        )?);
    }
    Ok(rows)
}

/// Columns: `bin_lo,bin_hi,population,n,mean_pos_prob,mean_rd,mean_rdc,low_count_flag`.
pub fn write_trends<T: Scalar, W: Write>(rows: &[TrendRow<T>], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "bin_lo",
        "bin_hi",
        "population",
        "n",
        "mean_pos_prob",
        "mean_rd",
        "mean_rdc",
        "low_count_flag",
    ])?;
    let opt = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.bin_lo.to_string(),
            r.bin_hi.to_string(),
            r.population.as_str().to_string(),
            r.n.to_string(),
            opt(r.mean_pos_prob),
            opt(r.mean_rd),
            opt(r.mean_rdc),
            r.low_count_flag.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
