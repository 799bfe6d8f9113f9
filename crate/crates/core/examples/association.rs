//! Theil's U on a contingency table and the correlation ratio on grouped values.

use rationale_utility::assoc::{correlation_ratio, theils_u, ContingencyTable, GroupedValues, UDirection};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pairs = [
        ("useful", "correct"), ("useful", "correct"), ("not_useful", "incorrect"),
        ("unsure", "correct"), ("not_useful", "correct"), ("unsure", "correct"),
        ("not_useful", "incorrect"), ("useful", "incorrect"),
    ];
    let t = ContingencyTable::from_pairs(pairs)?;
    println!("rows {:?}", t.row_categories);
    println!("cols {:?}", t.col_categories);
    for r in &t.counts {
        println!("  {r:?}");
    }
    for d in [UDirection::TargetGivenPredictor, UDirection::PredictorGivenTarget, UDirection::Symmetric] {
        println!("U {d:?} = {:.4}", theils_u(&t, d)?);
    }

    let sims = [("useful", 0.81), ("useful", 0.74), ("unsure", 0.52), ("unsure", 0.61), ("not_useful", 0.22), ("not_useful", 0.40)];
    let eta = correlation_ratio(&GroupedValues::from_pairs(sims))?;
    println!("eta = {:.4}", eta.eta);
    Ok(())
}
