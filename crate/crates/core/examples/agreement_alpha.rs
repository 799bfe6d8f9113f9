//! Krippendorff's alpha on a small reliability matrix with missing cells.

use rationale_utility::agreement::{krippendorff_alpha, ReliabilityMatrix};

fn main() {
    // (unit, coder, category); coder c3 skipped units 1 and 4
    let ratings = [
        ("1", "c1", "a"), ("1", "c2", "a"),
        ("2", "c1", "b"), ("2", "c2", "b"), ("2", "c3", "b"),
        ("3", "c1", "a"), ("3", "c2", "b"), ("3", "c3", "a"),
        ("4", "c1", "c"), ("4", "c2", "c"),
        ("5", "c1", "a"),
    ];
    let m = ReliabilityMatrix::from_triples(ratings);
    println!("{} units, {} pairable", m.units.len(), m.pairable_units().len());
    match krippendorff_alpha(&m) {
        Ok(a) => println!("alpha = {a:.4}"),
        Err(e) => println!("alpha undefined: {e}"),
    }

    let constant = ReliabilityMatrix::from_triples([("1", "c1", "a"), ("1", "c2", "a")]);
    println!("constant ratings: {:?}", krippendorff_alpha(&constant));
}
