//! Contingency tables over neighborhoods, risk difference and its
//! propensity-weighted (causal) counterpart.

use serde::{Deserialize, Serialize};

use crate::dataset::{BaseRates, Dataset, Decision, Group};
use crate::neighborhood::KSet;
use crate::propensity::weight_of;
use crate::scalar::Scalar;

/// 2x2 group-by-decision counts.
///
/// ```text
///               negative  positive
/// protected        a         b       n1
/// unprotected      c         d       n2
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ContingencyTable {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
}

impl ContingencyTable {
    pub fn n1(&self) -> usize {
        self.a + self.b
    }

    pub fn n2(&self) -> usize {
        self.c + self.d
    }

    pub fn m1(&self) -> usize {
        self.a + self.c
    }

    pub fn m2(&self) -> usize {
        self.b + self.d
    }

    pub fn n(&self) -> usize {
        self.n1() + self.n2()
    }

    pub fn add(&mut self, group: Group, decision: Decision) {
        match (group, decision) {
            (Group::Protected, Decision::Negative) => self.a += 1,
            (Group::Protected, Decision::Positive) => self.b += 1,
            (Group::Unprotected, Decision::Negative) => self.c += 1,
            (Group::Unprotected, Decision::Positive) => self.d += 1,
        }
    }
}

/// Which base rate replaces an undefined proportion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackMode {
    /// p1 falls back to the negative base rate, p2 to the positive base rate.
    #[default]
    PaperLiteral,
    /// Both proportions fall back to the negative base rate.
    ExpectedNegative,
}

impl FallbackMode {
    fn unprotected<T: Scalar>(self, rates: &BaseRates<T>) -> T {
        match self {
            FallbackMode::PaperLiteral => rates.p_pos,
            FallbackMode::ExpectedNegative => rates.p_neg,
        }
    }
}

impl std::str::FromStr for FallbackMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-literal" => Ok(FallbackMode::PaperLiteral),
            "expected-negative" => Ok(FallbackMode::ExpectedNegative),
            other => Err(format!("unknown fallback mode '{other}'")),
        }
    }
}

/// Tally group x decision over the kset members (the center is never a member).
pub fn contingency<T: Scalar>(kset: &KSet<T>, dataset: &Dataset<T>) -> ContingencyTable {
    let records = dataset.records();
    let mut table = ContingencyTable::default();
    for id in kset.ids() {
        let r = &records[id];
        table.add(r.group, r.decision);
    }
    table
}

/// p1 = a / n1, or p_neg when n1 = 0.
pub fn protected_negative_rate<T: Scalar>(table: &ContingencyTable, rates: &BaseRates<T>) -> T {
    if table.n1() == 0 {
        rates.p_neg
    } else {
        T::from_count(table.a) / T::from_count(table.n1())
    }
}

/// p2 = c / n2, or the mode's fallback when n2 = 0.
pub fn unprotected_negative_rate<T: Scalar>(
    table: &ContingencyTable,
    rates: &BaseRates<T>,
    mode: FallbackMode,
) -> T {
    if table.n2() == 0 {
        mode.unprotected(rates)
    } else {
        T::from_count(table.c) / T::from_count(table.n2())
    }
}

pub fn risk_difference<T: Scalar>(
    table: &ContingencyTable,
    rates: &BaseRates<T>,
    mode: FallbackMode,
) -> T {
    protected_negative_rate(table, rates) - unprotected_negative_rate(table, rates, mode)
}

/// Weighted negative and total mass of the unprotected members of a kset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WeightedGroupRate<T> {
    pub weighted_negative: T,
    pub weighted_total: T,
}

impl<T: Scalar> WeightedGroupRate<T> {
    pub fn from_weights(members: impl IntoIterator<Item = (Decision, T)>) -> Self {
        let mut rate = WeightedGroupRate {
            weighted_negative: T::zero(),
            weighted_total: T::zero(),
        };
        for (decision, w) in members {
            if decision == Decision::Negative {
                rate.weighted_negative += w;
            }
            rate.weighted_total += w;
        }
        rate
    }

    /// Weighted negative share, falling back like the unweighted n2 = 0 case.
    pub fn rate(&self, rates: &BaseRates<T>, mode: FallbackMode) -> T {
        if self.weighted_total > T::zero() {
            self.weighted_negative / self.weighted_total
        } else {
            mode.unprotected(rates)
        }
    }
}

/// Odds-weighted negative rate of the unprotected kset members.
///
/// `propensities` holds the clipped score of every record, indexed by id.
pub fn causal_negative_rate<T: Scalar>(
    kset: &KSet<T>,
    dataset: &Dataset<T>,
    propensities: &[T],
    rates: &BaseRates<T>,
    mode: FallbackMode,
) -> (WeightedGroupRate<T>, T) {
    let records = dataset.records();
    let weighted = WeightedGroupRate::from_weights(
        kset.ids()
            .map(|id| &records[id])
            .filter(|r| r.group == Group::Unprotected)
            .map(|r| (r.decision, weight_of(propensities[r.id]).value())),
    );
    let p2c = weighted.rate(rates, mode);
    (weighted, p2c)
}

/// RD^c = p1 - p2^c.
pub fn causal_risk_difference<T: Scalar>(
    kset: &KSet<T>,
    dataset: &Dataset<T>,
    propensities: &[T],
    rates: &BaseRates<T>,
    mode: FallbackMode,
) -> T {
    let table = contingency(kset, dataset);
    let (_, p2c) = causal_negative_rate(kset, dataset, propensities, rates, mode);
    protected_negative_rate(&table, rates) - p2c
}

/// Both measures for one neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KSetMeasures<T> {
    pub table: ContingencyTable,
    pub rd: T,
    pub rd_causal: T,
}

pub fn measure_kset<T: Scalar>(
    kset: &KSet<T>,
    dataset: &Dataset<T>,
    propensities: &[T],
    rates: &BaseRates<T>,
    mode: FallbackMode,
) -> KSetMeasures<T> {
    let table = contingency(kset, dataset);
    let p1 = protected_negative_rate(&table, rates);
    let rd = p1 - unprotected_negative_rate(&table, rates, mode);
    let (_, p2c) = causal_negative_rate(kset, dataset, propensities, rates, mode);
    KSetMeasures {
        table,
        rd,
        rd_causal: p1 - p2c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(p_neg: f64) -> BaseRates<f64> {
        BaseRates {
            p_neg,
            p_pos: 1.0 - p_neg,
        }
    }

    #[test]
    fn worked_example_risk_difference() {
        let t = ContingencyTable {
            a: 4,
            b: 3,
            c: 3,
            d: 5,
        };
        let rd = risk_difference(&t, &rates(0.5), FallbackMode::PaperLiteral);
        assert!((rd - (4.0 / 7.0 - 3.0 / 8.0)).abs() < 1e-15);
        assert!((rd - 0.196).abs() < 5e-4);
    }

    #[test]
    fn empty_protected_side_uses_negative_base_rate() {
        let t = ContingencyTable {
            a: 0,
            b: 0,
            c: 1,
            d: 1,
        };
        let rd = risk_difference(&t, &rates(0.4), FallbackMode::PaperLiteral);
        assert!((rd - (-0.1)).abs() < 1e-15);
    }

    #[test]
    fn empty_unprotected_side_fallbacks() {
        let t = ContingencyTable {
            a: 1,
            b: 1,
            c: 0,
            d: 0,
        };
        // paper-literal: p2 := p_pos = 0.6
        assert_eq!(
            risk_difference(&t, &rates(0.4), FallbackMode::PaperLiteral),
            0.5 - 0.6
        );
        assert_eq!(
            risk_difference(&t, &rates(0.4), FallbackMode::ExpectedNegative),
            0.5 - 0.4
        );
    }

    #[test]
    fn maximal_discrimination() {
        let t = ContingencyTable {
            a: 3,
            b: 0,
            c: 0,
            d: 4,
        };
        assert_eq!(
            risk_difference(&t, &rates(0.3), FallbackMode::PaperLiteral),
            1.0
        );
    }

    #[test]
    fn weighted_rates() {
        let neg = Decision::Negative;
        let pos = Decision::Positive;
        let uniform =
            WeightedGroupRate::from_weights([(neg, 1.0), (neg, 1.0), (pos, 1.0), (pos, 1.0)]);
        assert_eq!(uniform.rate(&rates(0.5), FallbackMode::PaperLiteral), 0.5);
        let heavy = WeightedGroupRate::from_weights([(neg, 1.0), (pos, 4.0)]);
        assert_eq!(heavy.rate(&rates(0.5), FallbackMode::PaperLiteral), 0.2);
        let empty = WeightedGroupRate::<f64>::from_weights([]);
        assert_eq!(empty.rate(&rates(0.3), FallbackMode::PaperLiteral), 0.7);
        assert_eq!(empty.rate(&rates(0.3), FallbackMode::ExpectedNegative), 0.3);
    }

    #[test]
    fn fallback_mode_parses() {
        assert_eq!(
            "paper-literal".parse::<FallbackMode>().unwrap(),
            FallbackMode::PaperLiteral
        );
        assert_eq!(
            "expected-negative".parse::<FallbackMode>().unwrap(),
            FallbackMode::ExpectedNegative
        );
        assert!("other".parse::<FallbackMode>().is_err());
        assert_eq!(FallbackMode::default(), FallbackMode::PaperLiteral);
    }
}
