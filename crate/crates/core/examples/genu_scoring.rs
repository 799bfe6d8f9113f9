//! GEN-U from recorded oracle predictions, and its association with utility.
//!
//! Usage: cargo run --example genu_scoring [-- <corpus-dir> <model-id>]

use std::path::PathBuf;

use rationale_utility::corpus::{join_evaluation_rows, Corpus};
use rationale_utility::genu::{correlate_genu_with_utility, render_genu, score_corpus, GenuConfig, PredictionSource};
use rationale_utility::utility::{classify_pairs, utility_labels};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e/corpus"));
    let model = args.next().unwrap_or_else(|| "t5".into());
    let c = Corpus::load_dir(&dir)?;
    let cfg = GenuConfig {
        model_id: model,
        template: None,
    };
    let report = score_corpus(
        &c.instances,
        &c.outputs,
        &c.gen_questions,
        &PredictionSource::Offline(&c.oracle_predictions),
        &cfg,
    )?;
    print!("{}", render_genu(&report));

    let join = join_evaluation_rows(&c.instances, &c.outputs, &c.annotations);
    let labels = utility_labels(&classify_pairs(&join.rows, 5)?);
    let corr = correlate_genu_with_utility(&report.results, &labels)?;
    println!("U(utility | GEN-U) = {:.4} over {} rationales", corr.u, corr.n);
    Ok(())
}
