#![allow(dead_code)]

use cdisc::dataset::{load_dataset_str, Dataset, SchemaConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Schema with the given numeric and categorical covariates, a group column
/// `g` (protected level `F`) and a decision column `d` (positive level `+`).
pub fn schema(numeric: &[&str], categorical: &[&str]) -> SchemaConfig {
    let mut text = String::from(
        "protected = \"F\"\nunprotected = [\"M\"]\npositive = \"+\"\nnegative = [\"-\"]\n",
    );
    for name in numeric {
        text.push_str(&format!(
            "[[attributes]]\nname = \"{name}\"\nkind = \"numeric\"\n"
        ));
    }
    for name in categorical {
        text.push_str(&format!(
            "[[attributes]]\nname = \"{name}\"\nkind = \"categorical\"\n"
        ));
    }
    text.push_str("[[attributes]]\nname = \"g\"\nkind = \"categorical\"\nrole = \"group\"\n");
    text.push_str("[[attributes]]\nname = \"d\"\nkind = \"categorical\"\nrole = \"decision\"\n");
    SchemaConfig::from_toml(&text).unwrap()
}

pub struct Synthetic {
    pub numeric: usize,
    pub categorical: usize,
    /// Numeric values are drawn from `0..grid` so that distance ties occur.
    pub grid: u32,
    pub levels: u32,
}

impl Synthetic {
    pub fn names(&self) -> (Vec<String>, Vec<String>) {
        (
            (0..self.numeric).map(|i| format!("x{i}")).collect(),
            (0..self.categorical).map(|i| format!("c{i}")).collect(),
        )
    }

    pub fn config(&self) -> SchemaConfig {
        let (num, cat) = self.names();
        let num: Vec<&str> = num.iter().map(String::as_str).collect();
        let cat: Vec<&str> = cat.iter().map(String::as_str).collect();
        schema(&num, &cat)
    }

    pub fn csv(&self, n: usize, seed: u64) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (num, cat) = self.names();
        let mut header: Vec<String> = num.clone();
        header.extend(cat.iter().cloned());
        header.push("g".into());
        header.push("d".into());
        let mut text = header.join(",");
        text.push('\n');
        for i in 0..n {
            let mut row: Vec<String> = Vec::new();
            for _ in 0..self.numeric {
                row.push(rng.gen_range(0..self.grid).to_string());
            }
            for _ in 0..self.categorical {
                row.push(format!("v{}", rng.gen_range(0..self.levels)));
            }
            // both groups and both decisions always present
            let g = if i == 0 || (i > 1 && rng.gen_bool(0.5)) {
                "F"
            } else {
                "M"
            };
            let d = if i < 2 {
                if i == 0 {
                    "-"
                } else {
                    "+"
                }
            } else if rng.gen_bool(0.5) {
                "+"
            } else {
                "-"
            };
            row.push(g.into());
            row.push(d.into());
            text.push_str(&row.join(","));
            text.push('\n');
        }
        text
    }

    pub fn raw(&self, n: usize, seed: u64) -> Dataset<f64> {
        load_dataset_str(&self.csv(n, seed), &self.config()).unwrap()
    }

    pub fn normalized(&self, n: usize, seed: u64) -> Dataset<f64> {
        self.raw(n, seed).normalize_numeric().unwrap()
    }
}

/// n = 2000, exactly half protected, covariates drawn independently of the group.
pub fn independent_fixture(seed: u64) -> cdisc::Dataset64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("x0,x1,c0,g,d\n");
    for i in 0..2000 {
        let g = if i % 2 == 0 { "F" } else { "M" };
        let d = if rng.gen_bool(0.3) { "+" } else { "-" };
        text.push_str(&format!(
            "{},{},v{},{g},{d}\n",
            rng.gen_range(0..100),
            rng.gen_range(0..100),
            rng.gen_range(0..2)
        ));
    }
    let config = schema(&["x0", "x1"], &["c0"]);
    cdisc::load_dataset_str(&text, &config)
        .unwrap()
        .normalize_numeric()
        .unwrap()
}

pub mod tree_oracle {
    use cdisc::dataset::{AttributeKind, Dataset, Value};
    use cdisc::discovery::{Node, RegressionTree, Split};

    /// Training record id and label.
    type Row = (usize, f64);

    fn sse(labels: &[f64]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let m = labels.iter().sum::<f64>() / labels.len() as f64;
        labels.iter().map(|y| (y - m) * (y - m)).sum()
    }

    /// Best variance reduction over every one-level-vs-rest and midpoint split
    /// with both sides holding at least `min_leaf` rows.
    pub fn best_gain(
        d: &Dataset<f64>,
        features: &[usize],
        rows: &[(usize, f64)],
        min_leaf: usize,
    ) -> Option<f64> {
        let all: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let total = sse(&all);
        let mut best: Option<f64> = None;
        let mut consider = |left: Vec<f64>, right: Vec<f64>| {
            if left.len() >= min_leaf.max(1) && right.len() >= min_leaf.max(1) {
                let gain = total - sse(&left) - sse(&right);
                best = Some(best.map_or(gain, |b: f64| b.max(gain)));
            }
        };
        for &idx in features {
            match d.schema().attributes()[idx].kind {
                AttributeKind::Numeric => {
                    let mut values: Vec<f64> = rows
                        .iter()
                        .map(|r| d.records()[r.0].values[idx].as_num().unwrap())
                        .collect();
                    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    values.dedup();
                    for w in values.windows(2) {
                        let t = (w[0] + w[1]) / 2.0;
                        let (l, r): (Vec<&Row>, Vec<&Row>) = rows
                            .iter()
                            .partition(|row| d.records()[row.0].values[idx].as_num().unwrap() < t);
                        consider(
                            l.iter().map(|r| r.1).collect(),
                            r.iter().map(|r| r.1).collect(),
                        );
                    }
                }
                AttributeKind::Categorical => {
                    for code in 0..d.levels(idx).len() as u32 {
                        let (l, r): (Vec<&Row>, Vec<&Row>) = rows
                            .iter()
                            .partition(|row| d.records()[row.0].values[idx] == Value::Cat(code));
                        consider(
                            l.iter().map(|r| r.1).collect(),
                            r.iter().map(|r| r.1).collect(),
                        );
                    }
                }
            }
        }
        best
    }

    fn goes_left(d: &Dataset<f64>, split: &Split<f64>, id: usize) -> bool {
        let r = &d.records()[id];
        match split {
            Split::Threshold {
                attribute,
                threshold,
            } => {
                r.values[d.schema().index_of(attribute).unwrap()]
                    .as_num()
                    .unwrap()
                    < *threshold
            }
            Split::Level { attribute, level } => {
                let idx = d.schema().index_of(attribute).unwrap();
                d.level_name(idx, r.values[idx].as_cat().unwrap()) == level
            }
        }
    }

    #[derive(Debug, Default)]
    pub struct Audit {
        pub splits: usize,
        pub leaves: usize,
        /// Worst shortfall of a chosen split against the enumerated best.
        pub worst_gap: f64,
        /// Worst |prediction - mean of routed labels|.
        pub worst_leaf_error: f64,
        pub min_leaf_violations: usize,
        /// Leaves above the depth cap where a split with a clear gain existed.
        pub premature_stops: usize,
    }

    /// Walk `tree`, re-routing the training rows, and compare every decision
    /// against brute-force enumeration.
    pub fn audit(
        d: &Dataset<f64>,
        features: &[usize],
        tree: &RegressionTree<f64>,
        rows: &[(usize, f64)],
    ) -> Audit {
        let mut audit = Audit::default();
        walk(
            d,
            features,
            &tree.root,
            rows.to_vec(),
            tree.params.min_leaf,
            tree.params.max_depth,
            &mut audit,
        );
        audit
    }

    fn walk(
        d: &Dataset<f64>,
        features: &[usize],
        node: &Node<f64>,
        rows: Vec<(usize, f64)>,
        min_leaf: usize,
        depth_left: usize,
        audit: &mut Audit,
    ) {
        match node {
            Node::Leaf(leaf) => {
                audit.leaves += 1;
                let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
                audit.worst_leaf_error = audit.worst_leaf_error.max((leaf.prediction - mean).abs());
                if rows.len() != leaf.count || rows.len() < min_leaf {
                    audit.min_leaf_violations += 1;
                }
                let labels: Vec<f64> = rows.iter().map(|r| r.1).collect();
                let total = sse(&labels);
                if depth_left > 0 {
                    if let Some(g) = best_gain(d, features, &rows, min_leaf) {
                        if g > 1e-9 * total.max(1e-9) {
                            audit.premature_stops += 1;
                        }
                    }
                }
            }
            Node::Split { split, left, right } => {
                audit.splits += 1;
                let (l, r): (Vec<_>, Vec<_>) = rows
                    .iter()
                    .copied()
                    .partition(|row| goes_left(d, split, row.0));
                let all: Vec<f64> = rows.iter().map(|r| r.1).collect();
                let chosen = sse(&all)
                    - sse(&l.iter().map(|r| r.1).collect::<Vec<_>>())
                    - sse(&r.iter().map(|r| r.1).collect::<Vec<_>>());
                let best = best_gain(d, features, &rows, min_leaf).unwrap_or(f64::NEG_INFINITY);
                audit.worst_gap = audit.worst_gap.max(best - chosen);
                walk(d, features, left, l, min_leaf, depth_left - 1, audit);
                walk(d, features, right, r, min_leaf, depth_left - 1, audit);
            }
        }
    }
}

pub mod oracle {
    use cdisc::dataset::{Dataset, Value};

    /// Direct distance from raw values and the fitted ranges.
    pub fn oracle_distance(d: &Dataset<f64>, i: usize, j: usize) -> f64 {
        let (r, s) = (&d.records()[i], &d.records()[j]);
        let mut total = 0.0;
        for idx in d.schema().covariates() {
            total += match (r.values[idx], s.values[idx]) {
                (Value::Num(x), Value::Num(y)) => (x - y).powi(2),
                (Value::Cat(a), Value::Cat(b)) => f64::from(u8::from(a != b)),
                _ => unreachable!(),
            };
        }
        total.sqrt()
    }

    pub fn brute_kset(
        d: &Dataset<f64>,
        center: usize,
        k: usize,
        m: Option<f64>,
    ) -> Vec<(usize, usize)> {
        let mut all: Vec<(f64, usize)> = (0..d.len())
            .filter(|&j| j != center)
            .map(|j| (oracle_distance(d, center, j), j))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all.into_iter()
            .take(k)
            .enumerate()
            .filter(|(_, (dist, _))| m.is_none_or(|m| *dist <= m))
            .map(|(rank, (_, id))| (id, rank + 1))
            .collect()
    }
}
