//! Association between utility labels and candidate predictors.
//!
//! Categorical predictors use Theil's uncertainty coefficient, real-valued
//! predictors the correlation ratio. Both are computed with natural logs /
//! plain sums; the uncertainty coefficient is a ratio of entropies so the log
//! base cancels.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Instance, ModelOutput};
use crate::report::{fmt_fixed, Table};
use crate::utility::ClassifiedPair;

#[derive(Debug, Error, PartialEq)]
pub enum AssocError {
    #[error("contingency table is empty")]
    EmptyTable,
    #[error("contingency table is ragged: row {row} has {got} columns, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("marginal distribution has a single category (zero entropy)")]
    DegenerateMarginal,
    #[error("correlation ratio needs at least two values, got {0}")]
    TooFewValues(usize),
    #[error("non-finite value in grouped input")]
    NonFinite,
}

/// Counts with target categories on rows and predictor categories on columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContingencyTable {
    pub row_categories: Vec<String>,
    pub col_categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn new(
        row_categories: Vec<String>,
        col_categories: Vec<String>,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self, AssocError> {
        for (i, r) in counts.iter().enumerate() {
            if r.len() != col_categories.len() {
                return Err(AssocError::Ragged {
                    row: i,
                    got: r.len(),
                    expected: col_categories.len(),
                });
            }
        }
        if counts.len() != row_categories.len() {
            return Err(AssocError::Ragged {
                row: counts.len(),
                got: 0,
                expected: row_categories.len(),
            });
        }
        let total = counts.iter().flatten().sum();
        if total == 0 {
            return Err(AssocError::EmptyTable);
        }
        Ok(ContingencyTable {
            row_categories,
            col_categories,
            counts,
            total,
        })
    }

    /// Unnamed categories, for ad-hoc matrices.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, AssocError> {
        let nr = counts.len();
        let nc = counts.first().map_or(0, Vec::len);
        Self::new(
            (0..nr).map(|i| format!("r{i}")).collect(),
            (0..nc).map(|j| format!("c{j}")).collect(),
            counts,
        )
    }

    /// Cross-tabulates paired observations. Categories are sorted.
    pub fn from_pairs<T, P>(pairs: impl IntoIterator<Item = (T, P)>) -> Result<Self, AssocError>
    where
        T: Into<String>,
        P: Into<String>,
    {
        let mut cells: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (t, p) in pairs {
            *cells.entry((t.into(), p.into())).or_default() += 1;
        }
        let mut rows: Vec<String> = cells.keys().map(|(t, _)| t.clone()).collect();
        rows.dedup();
        let mut cols: Vec<String> = cells.keys().map(|(_, p)| p.clone()).collect();
        cols.sort();
        cols.dedup();
        let counts = rows
            .iter()
            .map(|r| {
                cols.iter()
                    .map(|c| cells.get(&(r.clone(), c.clone())).copied().unwrap_or(0))
                    .collect()
            })
            .collect();
        Self::new(rows, cols, counts)
    }

    pub fn transpose(&self) -> ContingencyTable {
        let counts = (0..self.col_categories.len())
            .map(|j| self.counts.iter().map(|r| r[j]).collect())
            .collect();
        ContingencyTable {
            row_categories: self.col_categories.clone(),
            col_categories: self.row_categories.clone(),
            counts,
            total: self.total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UDirection {
    /// U(target | predictor): how much the predictor tells about the target (rows).
    TargetGivenPredictor,
    PredictorGivenTarget,
    Symmetric,
}

fn entropy(counts: impl Iterator<Item = u64>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

struct Entropies {
    h_row: f64,
    h_col: f64,
    /// H(row | col)
    h_row_given_col: f64,
    /// H(col | row)
    h_col_given_row: f64,
}

fn entropies(t: &ContingencyTable) -> Entropies {
    let n = t.total as f64;
    let row_m: Vec<u64> = t.counts.iter().map(|r| r.iter().sum()).collect();
    let col_m: Vec<u64> = (0..t.col_categories.len())
        .map(|j| t.counts.iter().map(|r| r[j]).sum())
        .collect();
    // Conditional entropies are summed per slice, so a pure slice contributes exactly zero.
    let h_row_given_col = col_m
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(j, &m)| m as f64 / n * entropy(t.counts.iter().map(|r| r[j]), m as f64))
        .sum();
    let h_col_given_row = row_m
        .iter()
        .zip(&t.counts)
        .filter(|(&m, _)| m > 0)
        .map(|(&m, r)| m as f64 / n * entropy(r.iter().copied(), m as f64))
        .sum();
    Entropies {
        h_row: entropy(row_m.into_iter(), n),
        h_col: entropy(col_m.into_iter(), n),
        h_row_given_col,
        h_col_given_row,
    }
}

/// Theil's uncertainty coefficient, in [0, 1].
pub fn theils_u(t: &ContingencyTable, direction: UDirection) -> Result<f64, AssocError> {
    let e = entropies(t);
    let u = match direction {
        UDirection::TargetGivenPredictor if e.h_row > 0.0 => 1.0 - e.h_row_given_col / e.h_row,
        UDirection::PredictorGivenTarget if e.h_col > 0.0 => 1.0 - e.h_col_given_row / e.h_col,
        UDirection::Symmetric if e.h_row + e.h_col > 0.0 => {
            2.0 * (e.h_row - e.h_row_given_col) / (e.h_row + e.h_col)
        }
        _ => return Err(AssocError::DegenerateMarginal),
    };
    Ok(u.clamp(0.0, 1.0))
}

/// Real values grouped by category.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GroupedValues {
    pub groups: BTreeMap<String, Vec<f64>>,
}

impl GroupedValues {
    pub fn from_pairs<C: Into<String>>(pairs: impl IntoIterator<Item = (C, f64)>) -> Self {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (c, v) in pairs {
            groups.entry(c.into()).or_default().push(v);
        }
        GroupedValues { groups }
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationRatio {
    pub eta: f64,
    /// Total variance was zero; `eta` is reported as 0.
    pub zero_variance: bool,
}

/// `eta = sqrt(SS_between / SS_total)`.
pub fn correlation_ratio(g: &GroupedValues) -> Result<CorrelationRatio, AssocError> {
    let n = g.len();
    if n < 2 {
        return Err(AssocError::TooFewValues(n));
    }
    if g.groups.values().flatten().any(|v| !v.is_finite()) {
        return Err(AssocError::NonFinite);
    }
    let grand = g.groups.values().flatten().sum::<f64>() / n as f64;
    let ss_total: f64 = g.groups.values().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_between: f64 = g
        .groups
        .values()
        .filter(|v| !v.is_empty())
        .map(|v| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.len() as f64 * (m - grand).powi(2)
        })
        .sum();
    // Relative threshold: constant inputs leave only rounding residue in ss_total.
    let scale = g
        .groups
        .values()
        .flatten()
        .map(|v| v * v)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    if ss_total <= scale * 1e-24 {
        return Ok(CorrelationRatio {
            eta: 0.0,
            zero_variance: true,
        });
    }
    Ok(CorrelationRatio {
        eta: (ss_between / ss_total).clamp(0.0, 1.0).sqrt(),
        zero_variance: false,
    })
}

/// One row of the correlation report: association of utility with task
/// correctness (Theil's U, three directions) and with similarity to the gold
/// rationale (correlation ratio, grouped by the three utility classes).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub model_id: String,
    pub n: usize,
    pub u_target_given_predictor: Option<f64>,
    pub u_predictor_given_target: Option<f64>,
    pub u_symmetric: Option<f64>,
    pub eta_similarity: Option<f64>,
    pub eta_zero_variance: bool,
    pub n_with_similarity: usize,
}

pub const ETA_GROUPING_NOTE: &str =
    "eta groups similarity_to_gold by the three utility classes (useful / not_useful / unsure)";

fn correlation_row(
    model_id: &str,
    pairs: &[&ClassifiedPair],
    outputs: &HashMap<(&str, &str), &ModelOutput>,
    instances: &HashMap<&str, &Instance>,
) -> CorrelationRow {
    let mut accuracy_pairs = Vec::new();
    let mut sim_pairs = Vec::new();
    for p in pairs {
        let Some(o) = outputs.get(&(p.instance_id.as_str(), p.model_id.as_str())) else {
            continue;
        };
        let Some(inst) = instances.get(p.instance_id.as_str()) else {
            continue;
        };
        let correct = if o.predicted_label == inst.gold_label {
            "correct"
        } else {
            "incorrect"
        };
        accuracy_pairs.push((p.label.as_str(), correct));
        if let Some(s) = o.similarity_to_gold {
            sim_pairs.push((p.label.as_str(), s));
        }
    }
    let table = ContingencyTable::from_pairs(accuracy_pairs.iter().copied()).ok();
    let u = |d| table.as_ref().and_then(|t| theils_u(t, d).ok());
    let n_with_similarity = sim_pairs.len();
    let eta = correlation_ratio(&GroupedValues::from_pairs(sim_pairs)).ok();
    CorrelationRow {
        model_id: model_id.to_string(),
        n: accuracy_pairs.len(),
        u_target_given_predictor: u(UDirection::TargetGivenPredictor),
        u_predictor_given_target: u(UDirection::PredictorGivenTarget),
        u_symmetric: u(UDirection::Symmetric),
        eta_similarity: eta.map(|e| e.eta),
        eta_zero_variance: eta.is_some_and(|e| e.zero_variance),
        n_with_similarity,
    }
}

/// Per-model rows followed by an `overall` row pooling every model.
pub fn correlation_table(
    pairs: &[ClassifiedPair],
    outputs: &[ModelOutput],
    instances: &[Instance],
) -> Vec<CorrelationRow> {
    let out_idx: HashMap<(&str, &str), &ModelOutput> = outputs
        .iter()
        .map(|o| ((o.instance_id.as_str(), o.model_id.as_str()), o))
        .collect();
    let inst_idx: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut by_model: BTreeMap<&str, Vec<&ClassifiedPair>> = BTreeMap::new();
    for p in pairs {
        by_model.entry(p.model_id.as_str()).or_default().push(p);
    }
    let mut rows: Vec<CorrelationRow> = by_model
        .iter()
        .map(|(m, ps)| correlation_row(m, ps, &out_idx, &inst_idx))
        .collect();
    let all: Vec<&ClassifiedPair> = pairs.iter().collect();
    rows.push(correlation_row("overall", &all, &out_idx, &inst_idx));
    rows
}

pub fn render_correlation(rows: &[CorrelationRow]) -> String {
    let f = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| fmt_fixed(v, 4));
    let mut t = Table::new([
        "model",
        "n",
        "U(util|acc)",
        "U(acc|util)",
        "U(sym)",
        "eta(sim)",
    ]);
    for r in rows {
        t.row([
            r.model_id.clone(),
            r.n.to_string(),
            f(r.u_target_given_predictor),
            f(r.u_predictor_given_target),
            f(r.u_symmetric),
            f(r.eta_similarity),
        ]);
    }
    format!("# {ETA_GROUPING_NOTE}\n{}", t.render())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_one() {
        let t = ContingencyTable::from_counts(vec![vec![5, 0, 0], vec![0, 7, 0], vec![0, 0, 2]])
            .unwrap();
        for d in [
            UDirection::TargetGivenPredictor,
            UDirection::PredictorGivenTarget,
            UDirection::Symmetric,
        ] {
            assert!((theils_u(&t, d).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_independent_is_zero() {
        let t = ContingencyTable::from_counts(vec![vec![25, 25], vec![25, 25]]).unwrap();
        assert_eq!(theils_u(&t, UDirection::TargetGivenPredictor).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_target() {
        let t = ContingencyTable::from_counts(vec![vec![3, 4]]).unwrap();
        assert_eq!(
            theils_u(&t, UDirection::TargetGivenPredictor),
            Err(AssocError::DegenerateMarginal)
        );
        // the predictor still has entropy, so the reverse direction is defined
        assert_eq!(theils_u(&t, UDirection::PredictorGivenTarget).unwrap(), 0.0);
        assert_eq!(
            ContingencyTable::from_counts(vec![vec![0, 0]]),
            Err(AssocError::EmptyTable)
        );
    }

    #[test]
    fn eta_examples() {
        let g = GroupedValues::from_pairs([("A", 1.0), ("A", 1.0), ("B", 2.0), ("B", 2.0)]);
        assert!((correlation_ratio(&g).unwrap().eta - 1.0).abs() < 1e-12);

        let flat = GroupedValues::from_pairs([("A", 3.0), ("B", 3.0), ("B", 3.0)]);
        let r = correlation_ratio(&flat).unwrap();
        assert_eq!(r.eta, 0.0);
        assert!(r.zero_variance);

        assert_eq!(
            correlation_ratio(&GroupedValues::default()),
            Err(AssocError::TooFewValues(0))
        );
    }

    #[test]
    fn from_pairs_tabulates() {
        let t = ContingencyTable::from_pairs([("u", "c"), ("u", "i"), ("n", "i"), ("u", "c")])
            .unwrap();
        assert_eq!(t.row_categories, vec!["n", "u"]);
        assert_eq!(t.col_categories, vec!["c", "i"]);
        assert_eq!(t.counts, vec![vec![0, 1], vec![2, 1]]);
        assert_eq!(t.total, 4);
    }
}
