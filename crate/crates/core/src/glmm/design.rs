use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::GlmmError;
use crate::corpus::{AnnotationRecord, Instance, Property, PropertyRecord};

pub const INTERCEPT: &str = "(Intercept)";
pub const N_PROPERTIES: usize = 8;
/// Intercept, eight main effects, 28 pairwise interactions.
pub const N_PROPERTY_COLUMNS: usize = 1 + N_PROPERTIES + N_PROPERTIES * (N_PROPERTIES - 1) / 2;

/// Column of the main effect for `p`.
pub fn main_column(p: Property) -> usize {
    1 + p.index()
}

/// Column of the interaction between two distinct properties, in either order.
pub fn interaction_column(a: Property, b: Property) -> Option<usize> {
    let (i, j) = match a.index().cmp(&b.index()) {
        std::cmp::Ordering::Less => (a.index(), b.index()),
        std::cmp::Ordering::Greater => (b.index(), a.index()),
        std::cmp::Ordering::Equal => return None,
    };
    // pairs (i, j) with i < j enumerated row by row
    let before: usize = (0..i).map(|k| N_PROPERTIES - 1 - k).sum();
    Some(1 + N_PROPERTIES + before + (j - i - 1))
}

/// Names of the 37 property-model columns in order.
pub fn property_column_names() -> Vec<String> {
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(Property::ALL.iter().map(|p| p.name().to_string()));
    for (i, a) in Property::ALL.iter().enumerate() {
        for b in &Property::ALL[i + 1..] {
            names.push(format!("{}:{}", a.name(), b.name()));
        }
    }
    names
}

/// Expands eight property indicators into the 37-column row.
pub fn property_row(values: &[bool; N_PROPERTIES]) -> Vec<f64> {
    let mut row = Vec::with_capacity(N_PROPERTY_COLUMNS);
    row.push(1.0);
    row.extend(values.iter().map(|&v| v as u8 as f64));
    for i in 0..N_PROPERTIES {
        for j in i + 1..N_PROPERTIES {
            row.push((values[i] && values[j]) as u8 as f64);
        }
    }
    row
}

/// A grouping factor for random intercepts: a level index per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFactor {
    pub name: String,
    pub levels: Vec<String>,
    pub index: Vec<usize>,
}

impl GroupFactor {
    /// Builds from one level name per observation. Levels are sorted.
    pub fn from_labels<S: AsRef<str>>(name: &str, labels: &[S]) -> Self {
        let mut ids: BTreeMap<&str, usize> = labels.iter().map(|l| (l.as_ref(), 0)).collect();
        for (k, v) in ids.values_mut().enumerate() {
            *v = k;
        }
        GroupFactor {
            name: name.to_string(),
            levels: ids.keys().map(|s| s.to_string()).collect(),
            index: labels.iter().map(|l| ids[l.as_ref()]).collect(),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}

/// Fixed-effect design, binary response, and grouping factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    column_names: Vec<String>,
    n_rows: usize,
    x: Vec<f64>,
    response: Vec<f64>,
    factors: Vec<GroupFactor>,
}

impl DesignMatrix {
    pub fn new(
        column_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        response: Vec<f64>,
        factors: Vec<GroupFactor>,
    ) -> Result<Self, GlmmError> {
        if rows.is_empty() {
            return Err(GlmmError::EmptyDesign);
        }
        let p = column_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(GlmmError::Shape(format!(
                "row {bad} has {} columns, expected {p}",
                rows[bad].len()
            )));
        }
        if response.len() != rows.len() {
            return Err(GlmmError::Shape(format!(
                "{} responses for {} rows",
                response.len(),
                rows.len()
            )));
        }
        if response.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(GlmmError::Shape("response must be 0 or 1".into()));
        }
        for f in &factors {
            if f.index.len() != rows.len() || f.index.iter().any(|&l| l >= f.levels.len()) {
                return Err(GlmmError::Shape(format!("factor {} is inconsistent", f.name)));
            }
        }
        Ok(DesignMatrix {
            column_names,
            n_rows: rows.len(),
            x: rows.into_iter().flatten().collect(),
            response,
            factors,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.n_cols().max(1))
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn factors(&self) -> &[GroupFactor] {
        &self.factors
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Same observations with only the named grouping factors kept, in the given order.
    pub fn with_factors(&self, names: &[&str]) -> Result<DesignMatrix, GlmmError> {
        let factors = names
            .iter()
            .map(|n| {
                self.factors
                    .iter()
                    .find(|f| f.name == *n)
                    .cloned()
                    .ok_or_else(|| GlmmError::UnknownFactor(n.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(DesignMatrix {
            factors,
            ..self.clone()
        })
    }

    /// Reorders observations: row `k` of the result is row `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> DesignMatrix {
        let rows = order.iter().map(|&i| self.row(i).to_vec()).collect();
        let response = order.iter().map(|&i| self.response[i]).collect();
        let factors = self
            .factors
            .iter()
            .map(|f| GroupFactor {
                name: f.name.clone(),
                levels: f.levels.clone(),
                index: order.iter().map(|&i| f.index[i]).collect(),
            })
            .collect();
        DesignMatrix::new(self.column_names.clone(), rows, response, factors)
            .expect("permutation of a valid design is valid")
    }
}

/// One response observation with the property vector of the rationale it saw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyObservation {
    pub properties: [bool; N_PROPERTIES],
    pub response: bool,
    pub question_id: String,
    pub model_id: String,
    pub human_prior: bool,
}

pub const FACTOR_QUESTION: &str = "question";
pub const FACTOR_MODEL: &str = "model";
pub const FACTOR_HUMAN_PRIOR: &str = "human_prior";

/// 37-column design with question, model, and human-prior factors.
pub fn design_from_observations(obs: &[PropertyObservation]) -> Result<DesignMatrix, GlmmError> {
    if obs.is_empty() {
        return Err(GlmmError::EmptyDesign);
    }
    let rows = obs.iter().map(|o| property_row(&o.properties)).collect();
    let response = obs.iter().map(|o| o.response as u8 as f64).collect();
    let q: Vec<&str> = obs.iter().map(|o| o.question_id.as_str()).collect();
    let m: Vec<&str> = obs.iter().map(|o| o.model_id.as_str()).collect();
    let h: Vec<&str> = obs
        .iter()
        .map(|o| if o.human_prior { "1" } else { "0" })
        .collect();
    DesignMatrix::new(
        property_column_names(),
        rows,
        response,
        vec![
            GroupFactor::from_labels(FACTOR_QUESTION, &q),
            GroupFactor::from_labels(FACTOR_MODEL, &m),
            GroupFactor::from_labels(FACTOR_HUMAN_PRIOR, &h),
        ],
    )
}

/// How property annotations are matched to utility annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One property vector per (instance, model) by strict majority over its
    /// property annotators, repeated for each utility annotator of the pair.
    #[default]
    Majority,
    /// Property and utility annotations paired by worker id.
    PerAnnotator,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(Aggregation::Majority),
            "per_annotator" | "per-annotator" => Ok(Aggregation::PerAnnotator),
            other => Err(format!("unknown aggregation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltDesign {
    pub design: DesignMatrix,
    pub observations: Vec<PropertyObservation>,
    /// Utility annotations without a matching property vector.
    pub dropped: usize,
}

/// Joins utility annotations with property annotations into model rows.
/// The response is post-rationale correctness; human prior is pre-rationale correctness.
pub fn build_design(
    instances: &[Instance],
    annotations: &[AnnotationRecord],
    properties: &[PropertyRecord],
    aggregation: Aggregation,
) -> Result<BuiltDesign, GlmmError> {
    let inst: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut sorted: Vec<&AnnotationRecord> = annotations.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.instance_id, &a.model_id, &a.worker_id).cmp(&(&b.instance_id, &b.model_id, &b.worker_id))
    });

    let majority: HashMap<(&str, &str), [bool; N_PROPERTIES]> = {
        let mut acc: HashMap<(&str, &str), ([usize; N_PROPERTIES], usize)> = HashMap::new();
        for p in properties {
            let e = acc
                .entry((p.instance_id.as_str(), p.model_id.as_str()))
                .or_default();
            for (k, v) in p.values().iter().enumerate() {
                e.0[k] += *v as usize;
            }
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(k, (counts, n))| (k, counts.map(|c| 2 * c > n)))
            .collect()
    };
    let per_worker: HashMap<(&str, &str, &str), [bool; N_PROPERTIES]> = properties
        .iter()
        .map(|p| {
            (
                (p.instance_id.as_str(), p.model_id.as_str(), p.worker_id.as_str()),
                p.values(),
            )
        })
        .collect();

    let mut observations = Vec::new();
    let mut dropped = 0;
    for a in sorted {
        let Some(instance) = inst.get(a.instance_id.as_str()) else {
            dropped += 1;
            continue;
        };
        let props = match aggregation {
            Aggregation::Majority => majority
                .get(&(a.instance_id.as_str(), a.model_id.as_str()))
                .copied(),
            Aggregation::PerAnnotator => per_worker
                .get(&(
                    a.instance_id.as_str(),
                    a.model_id.as_str(),
                    a.worker_id.as_str(),
                ))
                .copied(),
        };
        let Some(properties) = props else {
            dropped += 1;
            continue;
        };
        observations.push(PropertyObservation {
            properties,
            response: a.post_answer == instance.gold_label,
            question_id: a.instance_id.clone(),
            model_id: a.model_id.clone(),
            human_prior: a.pre_answer == instance.gold_label,
        });
    }
    let design = design_from_observations(&observations)?;
    Ok(BuiltDesign {
        design,
        observations,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_layout() {
        let names = property_column_names();
        assert_eq!(names.len(), 37);
        assert_eq!(names[0], INTERCEPT);
        assert_eq!(names[1], "grammaticality");
        assert_eq!(names[8], "contrast");
        assert_eq!(names[9], "grammaticality:validity");
        assert_eq!(names[36], "association:contrast");
        for (i, a) in Property::ALL.iter().enumerate() {
            for b in &Property::ALL[i + 1..] {
                let c = interaction_column(*a, *b).unwrap();
                assert_eq!(names[c], format!("{}:{}", a.name(), b.name()));
                assert_eq!(interaction_column(*b, *a), Some(c));
            }
        }
        assert_eq!(interaction_column(Property::Leakage, Property::Leakage), None);
    }

    #[test]
    fn all_zero_row() {
        let r = property_row(&[false; 8]);
        assert_eq!(r[0], 1.0);
        assert!(r[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn product_rule() {
        let mut v = [false; 8];
        v[Property::Grammaticality.index()] = true;
        v[Property::Leakage.index()] = true;
        let r = property_row(&v);
        let nz: Vec<usize> = (1..r.len()).filter(|&k| r[k] != 0.0).collect();
        assert_eq!(
            nz,
            vec![
                main_column(Property::Grammaticality),
                main_column(Property::Leakage),
                interaction_column(Property::Grammaticality, Property::Leakage).unwrap()
            ]
        );
    }

    #[test]
    fn empty_and_bad_shapes() {
        assert!(matches!(design_from_observations(&[]), Err(GlmmError::EmptyDesign)));
        let bad = DesignMatrix::new(vec!["a".into()], vec![vec![1.0, 2.0]], vec![1.0], vec![]);
        assert!(matches!(bad, Err(GlmmError::Shape(_))));
        let bad = DesignMatrix::new(vec!["a".into()], vec![vec![1.0]], vec![0.5], vec![]);
        assert!(matches!(bad, Err(GlmmError::Shape(_))));
    }

    #[test]
    fn factor_levels_sorted() {
        let f = GroupFactor::from_labels("q", &["b", "a", "b", "c"]);
        assert_eq!(f.levels, vec!["a", "b", "c"]);
        assert_eq!(f.index, vec![1, 0, 1, 2]);
    }
}
