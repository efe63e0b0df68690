//! Mixed-attribute distance, deterministic neighbor ranking and k-neighborhoods.

use std::cmp::Ordering;

use serde::Serialize;

use crate::dataset::{AttributeKind, Dataset, Record, Value};
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedNeighbor<T> {
    pub id: usize,
    pub distance: T,
    /// 1-based position in the (distance, id) ordering.
    pub rank: usize,
}

/// Up to `k` nearest neighbors of `center`, optionally capped at `max_distance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSet<T> {
    pub center: usize,
    pub k: usize,
    pub max_distance: Option<T>,
    pub members: Vec<RankedNeighbor<T>>,
}

impl<T> KSet<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|m| m.id)
    }
}

/// Distance between two records of a normalized dataset.
///
/// Euclidean over numeric covariates, with each categorical covariate adding a
/// 0/1 mismatch term under the square root. Group and decision never count.
pub fn distance<T: Scalar>(dataset: &Dataset<T>, r: &Record<T>, s: &Record<T>) -> Result<T> {
    if !dataset.is_normalized() {
        return Err(Error::NotNormalized);
    }
    // numeric terms first, then the mismatch count, matching NeighborIndex bit for bit
    let mut sum = T::zero();
    let mut mismatches = 0usize;
    for idx in dataset.schema().covariates() {
        match (r.values[idx], s.values[idx]) {
            (Value::Num(x), Value::Num(y)) => sum += (x - y) * (x - y),
            (a, b) => mismatches += usize::from(a != b),
        }
    }
    Ok((sum + T::from_count(mismatches)).sqrt())
}

fn by_distance_then_id<T: Scalar>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    scalar::cmp(a.0, b.0).then(a.1.cmp(&b.1))
}

/// Column-major copy of the covariates for fast repeated queries.
#[derive(Debug, Clone)]
pub struct NeighborIndex<T> {
    n: usize,
    numeric: Vec<T>,
    n_numeric: usize,
    categorical: Vec<u32>,
    n_categorical: usize,
}

impl<T: Scalar> NeighborIndex<T> {
    pub fn new(dataset: &Dataset<T>) -> Result<Self> {
        if !dataset.is_normalized() {
            return Err(Error::NotNormalized);
        }
        let schema = dataset.schema();
        let covariates = schema.covariates();
        let (num_idx, cat_idx): (Vec<usize>, Vec<usize>) = covariates
            .into_iter()
            .partition(|&i| schema.attributes()[i].kind == AttributeKind::Numeric);
        let mut numeric = Vec::with_capacity(dataset.len() * num_idx.len());
        let mut categorical = Vec::with_capacity(dataset.len() * cat_idx.len());
        for r in dataset.records() {
            numeric.extend(
                num_idx
                    .iter()
                    .map(|&i| r.values[i].as_num().unwrap_or_else(T::zero)),
            );
            categorical.extend(
                cat_idx
                    .iter()
                    .map(|&i| r.values[i].as_cat().unwrap_or(u32::MAX)),
            );
        }
        Ok(NeighborIndex {
            n: dataset.len(),
            numeric,
            n_numeric: num_idx.len(),
            categorical,
            n_categorical: cat_idx.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn distance(&self, i: usize, j: usize) -> T {
        let (p, q) = (self.n_numeric, self.n_categorical);
        let mut sum = T::zero();
        for (x, y) in self.numeric[i * p..(i + 1) * p]
            .iter()
            .zip(&self.numeric[j * p..(j + 1) * p])
        {
            let d = *x - *y;
            sum += d * d;
        }
        let mismatches = self.categorical[i * q..(i + 1) * q]
            .iter()
            .zip(&self.categorical[j * q..(j + 1) * q])
            .filter(|(a, b)| a != b)
            .count();
        (sum + T::from_count(mismatches)).sqrt()
    }

    fn check(&self, id: usize) -> Result<()> {
        if id < self.n {
            Ok(())
        } else {
            Err(Error::RecordNotFound(id))
        }
    }

    fn others(&self, center: usize) -> Vec<(T, usize)> {
        (0..self.n)
            .filter(|&j| j != center)
            .map(|j| (self.distance(center, j), j))
            .collect()
    }

    /// Every other record ordered by (distance, id), ranks 1..n-1.
    pub fn rank_neighbors(&self, center: usize) -> Result<Vec<RankedNeighbor<T>>> {
        self.check(center)?;
        let mut all = self.others(center);
        all.sort_unstable_by(by_distance_then_id);
        Ok(ranked(all))
    }

    pub fn kset(&self, center: usize, k: usize, max_distance: Option<T>) -> Result<KSet<T>> {
        self.check(center)?;
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if let Some(m) = max_distance {
            if m.is_nan() || m <= T::zero() {
                return Err(Error::InvalidParameter(
                    "max distance must be positive".into(),
                ));
            }
        }
        let mut all = self.others(center);
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, by_distance_then_id);
            all.truncate(k);
        }
        all.sort_unstable_by(by_distance_then_id);
        let mut members = ranked(all);
        if let Some(m) = max_distance {
            members.retain(|nb| nb.distance <= m);
        }
        Ok(KSet {
            center,
            k,
            max_distance,
            members,
        })
    }
}

fn ranked<T: Scalar>(sorted: Vec<(T, usize)>) -> Vec<RankedNeighbor<T>> {
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, (distance, id))| RankedNeighbor {
            id,
            distance,
            rank: i + 1,
        })
        .collect()
}

/// Full neighbor ordering of `r` within `dataset`.
pub fn rank_neighbors<T: Scalar>(
    dataset: &Dataset<T>,
    r: &Record<T>,
) -> Result<Vec<RankedNeighbor<T>>> {
    let center = locate(dataset, r)?;
    NeighborIndex::new(dataset)?.rank_neighbors(center)
}

/// k-neighborhood of `r`; `m` caps the admissible distance.
pub fn kset<T: Scalar>(
    dataset: &Dataset<T>,
    r: &Record<T>,
    k: usize,
    m: Option<T>,
) -> Result<KSet<T>> {
    let center = locate(dataset, r)?;
    NeighborIndex::new(dataset)?.kset(center, k, m)
}

fn locate<T: Scalar>(dataset: &Dataset<T>, r: &Record<T>) -> Result<usize> {
    match dataset.records().get(r.id) {
        Some(found) if found == r => Ok(r.id),
        _ => Err(Error::RecordNotFound(r.id)),
    }
}
