//! Utility labels and their distribution for a corpus directory.
//!
//! Usage: cargo run --example utility_distribution [-- <corpus-dir>]

use std::path::PathBuf;

use rationale_utility::corpus::{join_evaluation_rows, Corpus};
use rationale_utility::utility::{classify_pairs, render_distribution, utility_distribution};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/utility10"));
    let c = Corpus::load_dir(&dir)?;
    let join = join_evaluation_rows(&c.instances, &c.outputs, &c.annotations);
    let pairs = classify_pairs(&join.rows, 5)?;
    for p in pairs.iter().take(4) {
        println!(
            "{} {}: pre {:?} post {:?} -> {}",
            p.instance_id, p.model_id, p.pre.winner, p.post.winner, p.label
        );
    }
    println!();
    print!("{}", render_distribution(&utility_distribution(&pairs)?));
    Ok(())
}
