//! Log-odds summaries of a fitted property model.

use std::collections::BTreeSet;

use serde::Serialize;

use super::design::{interaction_column, main_column, property_column_names, property_row, DesignMatrix, N_PROPERTIES};
use super::laplace::FittedGlmm;
use super::GlmmError;
use crate::corpus::Property;
use crate::report::{fmt_fixed, Table};

fn check_columns(m: &FittedGlmm) -> Result<(), GlmmError> {
    if m.column_names != property_column_names() {
        return Err(GlmmError::Shape("fit does not use the 37 property columns".into()));
    }
    Ok(())
}

pub fn parse_property(name: &str) -> Result<Property, GlmmError> {
    name.parse::<Property>()
        .map_err(|_| GlmmError::UnknownProperty(name.to_string()))
}

fn row_values(row: &[f64]) -> [bool; N_PROPERTIES] {
    let mut v = [false; N_PROPERTIES];
    for p in Property::ALL {
        v[p.index()] = row[main_column(p)] != 0.0;
    }
    v
}

/// Fixed-effects linear predictor averaged over the design's rows with
/// `property` forced to `present`; random effects at zero.
pub fn marginal_log_odds(
    m: &FittedGlmm,
    d: &DesignMatrix,
    property: Property,
    present: bool,
) -> Result<f64, GlmmError> {
    check_columns(m)?;
    if d.column_names() != m.column_names.as_slice() {
        return Err(GlmmError::Shape("design and fit columns differ".into()));
    }
    if d.n_rows() == 0 {
        return Err(GlmmError::EmptyDesign);
    }
    let mut sum = 0.0;
    for row in d.rows() {
        let mut v = row_values(row);
        v[property.index()] = present;
        sum += property_row(&v).iter().zip(&m.beta).map(|(x, b)| x * b).sum::<f64>();
    }
    Ok(sum / d.n_rows() as f64)
}

/// Intercept plus the main effects of `on` and the interactions among them.
pub fn combination_log_odds(m: &FittedGlmm, on: &BTreeSet<Property>) -> Result<f64, GlmmError> {
    check_columns(m)?;
    let mut v = m.beta[0];
    let props: Vec<Property> = on.iter().copied().collect();
    for (i, &a) in props.iter().enumerate() {
        v += m.beta[main_column(a)];
        for &b in &props[i + 1..] {
            v += m.beta[interaction_column(a, b).expect("distinct properties")];
        }
    }
    Ok(v)
}

pub fn combination_log_odds_by_name<S: AsRef<str>>(m: &FittedGlmm, names: &[S]) -> Result<f64, GlmmError> {
    let set = names
        .iter()
        .map(|n| parse_property(n.as_ref()))
        .collect::<Result<BTreeSet<_>, _>>()?;
    combination_log_odds(m, &set)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalRow {
    pub property: String,
    pub present: f64,
    pub absent: f64,
}

pub fn marginal_table(m: &FittedGlmm, d: &DesignMatrix) -> Result<Vec<MarginalRow>, GlmmError> {
    Property::ALL
        .iter()
        .map(|&p| {
            Ok(MarginalRow {
                property: p.name().to_string(),
                present: marginal_log_odds(m, d, p, true)?,
                absent: marginal_log_odds(m, d, p, false)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinationRow {
    pub properties: Vec<String>,
    pub log_odds: f64,
    /// Change relative to the intercept.
    pub delta: f64,
}

fn combination_row(m: &FittedGlmm, set: &BTreeSet<Property>) -> Result<CombinationRow, GlmmError> {
    let v = combination_log_odds(m, set)?;
    Ok(CombinationRow {
        properties: set.iter().map(|p| p.name().to_string()).collect(),
        log_odds: v,
        delta: v - m.beta[0],
    })
}

fn sort_desc(rows: &mut [CombinationRow]) {
    rows.sort_by(|a, b| b.delta.total_cmp(&a.delta).then_with(|| a.properties.cmp(&b.properties)));
}

/// The `k` property pairs with the largest increase over the intercept.
pub fn top_pairwise(m: &FittedGlmm, k: usize) -> Result<Vec<CombinationRow>, GlmmError> {
    let mut rows = Vec::new();
    for (i, &a) in Property::ALL.iter().enumerate() {
        for &b in &Property::ALL[i + 1..] {
            rows.push(combination_row(m, &BTreeSet::from([a, b]))?);
        }
    }
    sort_desc(&mut rows);
    rows.truncate(k);
    Ok(rows)
}

/// All 256 property subsets ranked by log odds.
pub fn best_combinations(m: &FittedGlmm, k: usize) -> Result<Vec<CombinationRow>, GlmmError> {
    let mut rows = Vec::with_capacity(1 << N_PROPERTIES);
    for mask in 0u32..(1 << N_PROPERTIES) {
        let set: BTreeSet<Property> = Property::ALL
            .iter()
            .copied()
            .filter(|p| mask & (1 << p.index()) != 0)
            .collect();
        rows.push(combination_row(m, &set)?);
    }
    sort_desc(&mut rows);
    rows.truncate(k);
    Ok(rows)
}

pub fn render_marginal(rows: &[MarginalRow]) -> String {
    let mut t = Table::new(["property", "present", "absent"]);
    for r in rows {
        t.row([r.property.clone(), fmt_fixed(r.present, 3), fmt_fixed(r.absent, 3)]);
    }
    t.render()
}

pub fn render_combinations(intercept: f64, rows: &[CombinationRow]) -> String {
    let mut t = Table::new(["combination", "log odds", "delta"]);
    t.row([super::design::INTERCEPT.to_string(), fmt_fixed(intercept, 3), String::new()]);
    for r in rows {
        let name = if r.properties.is_empty() {
            "(none)".to_string()
        } else {
            r.properties.iter().map(|p| format!("+ {p}")).collect::<Vec<_>>().join(" ")
        };
        t.row([name, fmt_fixed(r.log_odds, 3), fmt_fixed(r.delta, 3)]);
    }
    t.render()
}
