use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{BenchError, RunRecord};

/// Pairs compared by default: makespan of the first over the second.
pub const DEFAULT_PAIRS: [(&str, &str); 6] = [
    ("hlp-ols", "hlp-est"),
    ("hlp-ols", "heft"),
    ("qhlp-ols", "qhlp-est"),
    ("qhlp-ols", "heft"),
    ("erls", "greedy"),
    ("erls", "eft"),
];

/// One aggregate line.
///
/// `kind = "ratio"` aggregates makespan / λ* (baseline `lp_star`);
/// `kind = "pairwise"` aggregates makespan(algorithm) / makespan(baseline)
/// over the (instance, platform) cells where both succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: String,
    pub family: String,
    pub algorithm: String,
    pub baseline: String,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn find(&self, kind: &str, family: &str, algorithm: &str, baseline: &str) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.family == family && r.algorithm == algorithm && r.baseline == baseline)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BenchError> {
        let mut writer = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            writer.write_record(["kind", "family", "algorithm", "baseline", "count", "mean", "min", "max"])?;
        }
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.flush().map_err(|e| BenchError::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, BenchError> {
        let rows = csv::Reader::from_reader(input).deserialize().collect::<Result<_, _>>()?;
        Ok(Summary { rows })
    }
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>, BenchError> {
    Ok(csv::Reader::from_reader(input).deserialize().collect::<Result<_, _>>()?)
}

#[derive(Default)]
struct Acc {
    count: usize,
    sum: f64,
    min: f64,
    max: f64,
}

impl Acc {
    fn push(&mut self, v: f64) {
        if self.count == 0 {
            self.min = v;
            self.max = v;
        }
        self.count += 1;
        self.sum += v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn row(&self, kind: &str, family: &str, algorithm: &str, baseline: &str) -> SummaryRow {
        SummaryRow {
            kind: kind.to_string(),
            family: family.to_string(),
            algorithm: algorithm.to_string(),
            baseline: baseline.to_string(),
            count: self.count,
            mean: self.sum / self.count as f64,
            min: self.min,
            max: self.max,
        }
    }
}

/// Per-(family, algorithm) ratio statistics followed by the pairwise
/// comparisons in `pairs` that have data. Failed rows are ignored.
pub fn summarize(records: &[RunRecord], pairs: &[(&str, &str)]) -> Summary {
    let mut ratios: BTreeMap<(&str, &str), Acc> = BTreeMap::new();
    let mut cells: BTreeMap<(&str, &str, &str), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        if let Some(ratio) = r.ratio {
            ratios.entry((&r.family, &r.algorithm)).or_default().push(ratio);
        }
        if let Some(m) = r.makespan {
            cells.entry((&r.family, &r.instance, &r.platform)).or_default().insert(&r.algorithm, m);
        }
    }
    let mut rows: Vec<SummaryRow> =
        ratios.iter().map(|((family, alg), acc)| acc.row("ratio", family, alg, "lp_star")).collect();

    for &(a, b) in pairs {
        let mut by_family: BTreeMap<&str, Acc> = BTreeMap::new();
        for ((family, ..), makespans) in &cells {
            if let (Some(&ma), Some(&mb)) = (makespans.get(a), makespans.get(b)) {
                if mb > 0.0 {
                    by_family.entry(family).or_default().push(ma / mb);
                }
            }
        }
        rows.extend(by_family.iter().map(|(family, acc)| acc.row("pairwise", family, a, b)));
    }
    Summary { rows }
}
