//! Score aggregation with exact arithmetic and one-decimal half-up rounding.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use super::{BenchmarkItem, EvaluationResult, Level};
use crate::judge::ConstraintVerdict;
use crate::taxonomy::compare_sub_ids;

/// A percentage with one decimal, stored as an integer count of tenths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Percent {
    tenths: i64,
}

impl Percent {
    pub const fn from_tenths(tenths: i64) -> Self {
        Percent { tenths }
    }

    pub fn tenths(self) -> i64 {
        self.tenths
    }

    pub fn as_f64(self) -> f64 {
        self.tenths as f64 / 10.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.tenths < 0 { "-" } else { "" };
        let a = self.tenths.unsigned_abs();
        write!(f, "{sign}{}.{}", a / 10, a % 10)
    }
}

impl FromStr for Percent {
    type Err = String;

    /// Parses values such as `71.5`, `44` or `44.0`; at most one decimal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("not a one-decimal percentage: {s:?}");
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (whole, frac) = body.split_once('.').unwrap_or((body, "0"));
        if whole.is_empty() || frac.len() != 1 || !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let t = whole.parse::<i64>().map_err(|_| bad())? * 10 + frac.parse::<i64>().map_err(|_| bad())?;
        Ok(Percent::from_tenths(if neg { -t } else { t }))
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

/// Round a non-negative percentage to tenths, halves upward.
pub fn round_half_up_tenths(percent: Ratio<i128>) -> Percent {
    let scaled = percent * Ratio::from_integer(10) + Ratio::new(1, 2);
    Percent::from_tenths(scaled.floor().to_integer() as i64)
}

/// Count-weighted mean of level accuracies, rounded half-up to one decimal.
/// Levels with zero items are ignored; `None` when all counts are zero.
pub fn weighted_average(levels: &[(Percent, u64)]) -> Option<Percent> {
    let n: u64 = levels.iter().map(|(_, n)| n).sum();
    if n == 0 {
        return None;
    }
    let sum: i128 = levels.iter().map(|(p, k)| i128::from(p.tenths) * i128::from(*k)).sum();
    Some(round_half_up_tenths(Ratio::new(sum, i128::from(n) * 10)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Fraction of constraints satisfied per item.
    #[default]
    Fraction,
    /// 1 if every constraint is satisfied, else 0.
    StrictPass,
}

impl Metric {
    fn score(self, satisfied: usize, total: usize) -> Ratio<i128> {
        match self {
            _ if total == 0 => Ratio::from_integer(0),
            Metric::Fraction => Ratio::new(satisfied as i128, total as i128),
            Metric::StrictPass => Ratio::from_integer(i128::from(satisfied == total)),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Fraction => "fraction",
            Metric::StrictPass => "strict_pass",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubcategoryRow {
    pub sub_id: String,
    pub name: String,
    pub constraints: usize,
    pub satisfied: usize,
    pub indeterminate: usize,
    pub accuracy: Percent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusReport {
    pub metric: Metric,
    pub n_compose: usize,
    pub n_perception: usize,
    pub c_level_acc: Option<Percent>,
    pub p_level_acc: Option<Percent>,
    pub weighted_avg: Option<Percent>,
    pub indeterminate: usize,
    pub flagged_items: usize,
    pub subcategories: Vec<SubcategoryRow>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AggregateError {
    #[error("no result for item `{0}`")]
    MissingResult(String),
    #[error("result for unknown item `{0}`")]
    UnknownItem(String),
    #[error("more than one result for item `{0}`")]
    DuplicateResult(String),
    #[error("result for `{id}` has {got} constraint outcomes, item has {expected}")]
    ConstraintCount { id: String, expected: usize, got: usize },
    #[error("weighted average {avg} deviates from level values by more than 0.05")]
    Identity { avg: Percent },
}

impl CorpusReport {
    /// Check `weighted_avg` against the count-weighted level values.
    pub fn check_identity(&self) -> Result<(), AggregateError> {
        let levels = [
            (self.c_level_acc, self.n_compose as i128),
            (self.p_level_acc, self.n_perception as i128),
        ];
        let n: i128 = levels.iter().filter(|(p, _)| p.is_some()).map(|(_, k)| k).sum();
        let sum: i128 = levels.iter().filter_map(|(p, k)| p.map(|p| i128::from(p.tenths) * k)).sum();
        match self.weighted_avg {
            None if n == 0 => Ok(()),
            Some(avg) if n > 0 && 2 * (i128::from(avg.tenths) * n - sum).abs() <= n => Ok(()),
            Some(avg) => Err(AggregateError::Identity { avg }),
            None => Err(AggregateError::Identity { avg: Percent::from_tenths(0) }),
        }
    }

    pub fn to_markdown(&self) -> String {
        let cell = |p: Option<Percent>| p.map_or_else(|| "n/a".to_string(), |p| p.to_string());
        let mut out = String::new();
        out.push_str("| Level | Items | Accuracy |\n|---|---:|---:|\n");
        out.push_str(&format!("| C-Level | {} | {} |\n", self.n_compose, cell(self.c_level_acc)));
        out.push_str(&format!("| P-Level | {} | {} |\n", self.n_perception, cell(self.p_level_acc)));
        out.push_str(&format!(
            "| Avg. | {} | {} |\n",
            self.n_compose + self.n_perception,
            cell(self.weighted_avg)
        ));
        out.push_str(&format!(
            "\nMetric: {}. Indeterminate verdicts: {}. Flagged items: {}.\n",
            self.metric, self.indeterminate, self.flagged_items
        ));
        out.push_str("\n| Subcategory | Name | Constraints | Satisfied | Indeterminate | Accuracy |\n");
        out.push_str("|---|---|---:|---:|---:|---:|\n");
        for r in &self.subcategories {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                r.sub_id, r.name, r.constraints, r.satisfied, r.indeterminate, r.accuracy
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let cell = |p: Option<Percent>| p.map_or_else(String::new, |p| p.to_string());
        let rows: Vec<[String; 7]> = [
            ["level", "C-Level", "", &self.n_compose.to_string(), "", "", &cell(self.c_level_acc)],
            ["level", "P-Level", "", &self.n_perception.to_string(), "", "", &cell(self.p_level_acc)],
            [
                "level",
                "Avg.",
                "",
                &(self.n_compose + self.n_perception).to_string(),
                "",
                "",
                &cell(self.weighted_avg),
            ],
        ]
        .iter()
        .map(|r| r.map(str::to_string))
        .chain(self.subcategories.iter().map(|r| {
            [
                "subcategory".to_string(),
                r.sub_id.clone(),
                r.name.clone(),
                r.constraints.to_string(),
                r.satisfied.to_string(),
                r.indeterminate.to_string(),
                r.accuracy.to_string(),
            ]
        }))
        .collect();
        w.write_record(["section", "key", "name", "count", "satisfied", "indeterminate", "accuracy"])
            .expect("in-memory csv");
        for r in rows {
            w.write_record(&r).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

#[derive(Default)]
struct SubTally {
    name: String,
    constraints: usize,
    satisfied: usize,
    indeterminate: usize,
}

/// Aggregate per-item results into level accuracies and a per-subcategory
/// table. `results` must cover `items` exactly once, in any order.
pub fn aggregate(
    results: &[EvaluationResult],
    items: &[BenchmarkItem],
    metric: Metric,
) -> Result<CorpusReport, AggregateError> {
    let by_id: HashMap<&str, &BenchmarkItem> = items.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut seen: HashMap<&str, &EvaluationResult> = HashMap::new();
    for r in results {
        let item = by_id.get(r.id.as_str()).ok_or_else(|| AggregateError::UnknownItem(r.id.clone()))?;
        if seen.insert(r.id.as_str(), r).is_some() {
            return Err(AggregateError::DuplicateResult(r.id.clone()));
        }
        if r.per_constraint.len() != item.constraints.len() {
            return Err(AggregateError::ConstraintCount {
                id: r.id.clone(),
                expected: item.constraints.len(),
                got: r.per_constraint.len(),
            });
        }
    }
    if let Some(missing) = items.iter().find(|i| !seen.contains_key(i.id.as_str())) {
        return Err(AggregateError::MissingResult(missing.id.clone()));
    }

    let mut level_sum: BTreeMap<Level, (Ratio<i128>, u64)> = BTreeMap::new();
    let mut subs: BTreeMap<String, SubTally> = BTreeMap::new();
    let mut indeterminate = 0;
    let mut flagged_items = 0;
    for item in items {
        let r = seen[item.id.as_str()];
        let (sat, total) = r.counts();
        let e = level_sum.entry(item.level).or_insert((Ratio::from_integer(0), 0));
        e.0 += metric.score(sat, total);
        e.1 += 1;
        indeterminate += r.indeterminate();
        flagged_items += usize::from(!r.flags.is_empty());
        for o in &r.per_constraint {
            let c = &item.constraints[o.idx];
            let t = subs.entry(c.sub_id().to_string()).or_default();
            t.name = c.class.sub_name.clone();
            t.constraints += 1;
            t.satisfied += usize::from(o.verdict == ConstraintVerdict::Satisfied);
            t.indeterminate += usize::from(o.verdict == ConstraintVerdict::Indeterminate);
        }
    }
    let level = |l: Level| {
        level_sum
            .get(&l)
            .map(|(sum, n)| round_half_up_tenths(sum * Ratio::from_integer(100) / Ratio::from_integer(i128::from(*n))))
    };
    let n_of = |l: Level| level_sum.get(&l).map_or(0, |(_, n)| *n);
    let c_level_acc = level(Level::Compose);
    let p_level_acc = level(Level::Perception);
    let weighted_avg = weighted_average(
        &[(c_level_acc, n_of(Level::Compose)), (p_level_acc, n_of(Level::Perception))]
            .iter()
            .filter_map(|(p, n)| p.map(|p| (p, *n)))
            .collect::<Vec<_>>(),
    );
    let mut subcategories: Vec<SubcategoryRow> = subs
        .into_iter()
        .map(|(sub_id, t)| SubcategoryRow {
            accuracy: round_half_up_tenths(Ratio::new(t.satisfied as i128 * 100, t.constraints as i128)),
            sub_id,
            name: t.name,
            constraints: t.constraints,
            satisfied: t.satisfied,
            indeterminate: t.indeterminate,
        })
        .collect();
    subcategories.sort_by(|a, b| compare_sub_ids(&a.sub_id, &b.sub_id));
    let report = CorpusReport {
        metric,
        n_compose: n_of(Level::Compose) as usize,
        n_perception: n_of(Level::Perception) as usize,
        c_level_acc,
        p_level_acc,
        weighted_avg,
        indeterminate,
        flagged_items,
        subcategories,
    };
    report.check_identity()?;
    Ok(report)
}
