//! Krippendorff's alpha for nominal data with missing ratings.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{AnnotationRecord, Property, PropertyRecord};

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("no unit has at least two ratings")]
    Empty,
    #[error("expected disagreement is zero: every rating is the same category")]
    ZeroExpectedDisagreement,
}

/// Units × coders, with missing cells allowed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReliabilityMatrix {
    pub units: Vec<String>,
    pub coders: Vec<String>,
    pub cells: BTreeMap<(usize, usize), String>,
}

impl ReliabilityMatrix {
    /// Builds from (unit, coder, category) triples. A repeated (unit, coder) keeps the last value.
    pub fn from_triples<U, C, V>(triples: impl IntoIterator<Item = (U, C, V)>) -> Self
    where
        U: Into<String>,
        C: Into<String>,
        V: Into<String>,
    {
        let mut units: BTreeMap<String, usize> = BTreeMap::new();
        let mut coders: BTreeMap<String, usize> = BTreeMap::new();
        let mut raw = Vec::new();
        for (u, c, v) in triples {
            let u = u.into();
            let c = c.into();
            let nu = units.len();
            let ui = *units.entry(u).or_insert(nu);
            let nc = coders.len();
            let ci = *coders.entry(c).or_insert(nc);
            raw.push(((ui, ci), v.into()));
        }
        let mut unit_names = vec![String::new(); units.len()];
        for (n, i) in units {
            unit_names[i] = n;
        }
        let mut coder_names = vec![String::new(); coders.len()];
        for (n, i) in coders {
            coder_names[i] = n;
        }
        ReliabilityMatrix {
            units: unit_names,
            coders: coder_names,
            cells: raw.into_iter().collect(),
        }
    }

    /// Ratings per unit, keeping only units with at least two ratings.
    pub fn pairable_units(&self) -> Vec<Vec<&str>> {
        let mut per_unit: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for ((u, _), v) in &self.cells {
            per_unit.entry(*u).or_default().push(v.as_str());
        }
        per_unit.into_values().filter(|v| v.len() >= 2).collect()
    }
}

/// Nominal-metric alpha computed through the coincidence matrix:
/// `alpha = 1 - (n - 1) * sum_{c != k} o_ck / sum_{c != k} n_c n_k`.
pub fn krippendorff_alpha(m: &ReliabilityMatrix) -> Result<f64, AgreementError> {
    let units = m.pairable_units();
    if units.is_empty() {
        return Err(AgreementError::Empty);
    }
    let categories: BTreeSet<&str> = units.iter().flatten().copied().collect();
    let cat_index: BTreeMap<&str, usize> =
        categories.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let k = categories.len();
    let mut o = vec![vec![0.0f64; k]; k];
    for values in &units {
        let mu = values.len() as f64;
        let mut counts = vec![0.0f64; k];
        for v in values {
            counts[cat_index[v]] += 1.0;
        }
        for c in 0..k {
            for d in 0..k {
                let pairs = if c == d {
                    counts[c] * (counts[c] - 1.0)
                } else {
                    counts[c] * counts[d]
                };
                o[c][d] += pairs / (mu - 1.0);
            }
        }
    }
    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                observed += o[c][d];
                expected += n_c[c] * n_c[d];
            }
        }
    }
    if expected == 0.0 {
        return Err(AgreementError::ZeroExpectedDisagreement);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerPhase {
    Pre,
    Post,
}

/// Reliability of utility answers for one model and answer phase; units are instances.
pub fn answer_matrix(
    annotations: &[AnnotationRecord],
    model_id: &str,
    phase: AnswerPhase,
) -> ReliabilityMatrix {
    ReliabilityMatrix::from_triples(annotations.iter().filter(|a| a.model_id == model_id).map(
        |a| {
            let v = match phase {
                AnswerPhase::Pre => &a.pre_answer,
                AnswerPhase::Post => &a.post_answer,
            };
            (a.instance_id.clone(), a.worker_id.clone(), v.as_str().to_string())
        },
    ))
}

pub fn property_matrix(
    properties: &[PropertyRecord],
    model_id: &str,
    property: Property,
) -> ReliabilityMatrix {
    ReliabilityMatrix::from_triples(
        properties
            .iter()
            .filter(|p| p.model_id == model_id)
            .map(|p| {
                (
                    p.instance_id.clone(),
                    p.worker_id.clone(),
                    p.get(property).to_string(),
                )
            }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRow {
    pub model_id: String,
    pub field: String,
    /// `None` when alpha is undefined for this slice.
    pub alpha: Option<f64>,
    pub error: Option<String>,
}

/// Alpha per (model, field) for pre/post answers and every property.
pub fn alpha_table(annotations: &[AnnotationRecord], properties: &[PropertyRecord]) -> Vec<AlphaRow> {
    let models: BTreeSet<&str> = annotations
        .iter()
        .map(|a| a.model_id.as_str())
        .chain(properties.iter().map(|p| p.model_id.as_str()))
        .collect();
    let mut rows = Vec::new();
    let mut push = |model: &str, field: String, m: ReliabilityMatrix| {
        let r = krippendorff_alpha(&m);
        rows.push(AlphaRow {
            model_id: model.to_string(),
            field,
            alpha: r.as_ref().ok().copied(),
            error: r.err().map(|e| e.to_string()),
        });
    };
    for model in models {
        if annotations.iter().any(|a| a.model_id == model) {
            push(model, "pre_answer".into(), answer_matrix(annotations, model, AnswerPhase::Pre));
            push(model, "post_answer".into(), answer_matrix(annotations, model, AnswerPhase::Post));
        }
        if properties.iter().any(|p| p.model_id == model) {
            for p in Property::ALL {
                push(model, p.name().into(), property_matrix(properties, model, p));
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_agreement() {
        let m = ReliabilityMatrix::from_triples([
            ("u1", "a", "x"),
            ("u1", "b", "x"),
            ("u2", "a", "y"),
            ("u2", "b", "y"),
            ("u3", "a", "x"),
            ("u3", "b", "x"),
        ]);
        assert_eq!(krippendorff_alpha(&m).unwrap(), 1.0);
    }

    #[test]
    fn single_category_is_degenerate() {
        let m = ReliabilityMatrix::from_triples([
            ("u1", "a", "x"),
            ("u1", "b", "x"),
            ("u2", "a", "x"),
            ("u2", "b", "x"),
        ]);
        assert_eq!(
            krippendorff_alpha(&m),
            Err(AgreementError::ZeroExpectedDisagreement)
        );
        assert_eq!(
            AgreementError::ZeroExpectedDisagreement.to_string(),
            "expected disagreement is zero: every rating is the same category"
        );
    }

    #[test]
    fn singly_rated_units_dropped() {
        let m = ReliabilityMatrix::from_triples([("u1", "a", "x"), ("u2", "b", "y")]);
        assert_eq!(krippendorff_alpha(&m), Err(AgreementError::Empty));
        assert_eq!(
            krippendorff_alpha(&ReliabilityMatrix::default()),
            Err(AgreementError::Empty)
        );
    }

    #[test]
    fn four_units_one_disagreement() {
        // o_aa = 2, o_ab = o_ba = 1, o_bb = 4; n_a = 3, n_b = 5, n = 8
        // alpha = 1 - 7 * 2 / (2 * 3 * 5) = 8 / 15
        let m = ReliabilityMatrix::from_triples([
            ("u1", "c1", "a"),
            ("u1", "c2", "a"),
            ("u2", "c1", "a"),
            ("u2", "c2", "b"),
            ("u3", "c1", "b"),
            ("u3", "c2", "b"),
            ("u4", "c1", "b"),
            ("u4", "c2", "b"),
        ]);
        assert!((krippendorff_alpha(&m).unwrap() - 8.0 / 15.0).abs() < 1e-12);
    }
}
