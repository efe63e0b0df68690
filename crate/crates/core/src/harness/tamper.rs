//! Rule-driven decision flips for confounder experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Decision};
use crate::discovery::{Atom, Matcher};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TamperSpec<T> {
    pub rule: Vec<Atom<T>>,
    pub fraction: T,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Tampered<T> {
    pub dataset: Dataset<T>,
    /// Ids whose decision was flipped, ascending.
    pub flipped: Vec<usize>,
    /// Positive records matching the rule (flip candidates).
    pub candidates: usize,
}

/// Flip positive decisions of rule-matching records to negative with
/// probability `fraction`.
///
/// Records are visited in ascending id; each candidate consumes one uniform
/// draw from a ChaCha8 stream seeded with `seed`. A flipped record's raw
/// decision cell is copied from the lowest-id negative record, so written
/// tables reload with the same labels.
pub fn tamper<T: Scalar>(dataset: &Dataset<T>, spec: &TamperSpec<T>) -> Result<Tampered<T>> {
    if !(spec.fraction >= T::zero() && spec.fraction <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "tamper fraction must lie in [0, 1], got {}",
            spec.fraction
        )));
    }
    let matcher = Matcher::new(&spec.rule, dataset)?;
    let fraction = spec.fraction.as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = dataset.clone();
    let mut flipped = Vec::new();
    let mut candidates = 0;
    let mut negative = None;
    let d = dataset.schema().decision_index();
    for record in out.records_mut() {
        if record.decision != Decision::Positive || !matcher.matches(record) {
            continue;
        }
        candidates += 1;
        let u: f64 = rng.gen();
        if u < fraction {
            let value = match negative {
                Some(v) => v,
                None => *negative.insert(dataset.negative_decision_value()?),
            };
            record.decision = Decision::Negative;
            record.values[d] = value;
            flipped.push(record.id);
        }
    }
    Ok(Tampered {
        dataset: out,
        flipped,
        candidates,
    })
}
