//! Exploration rounds with scripted oracles, then the conditioned training file.

use rationale_utility::corpus::{Dataset, GenQuestion, GenType, Instance, Label};
use rationale_utility::oracle::MockOracle;
use rationale_utility::quarkpool::{
    emit_training_file, exploration_due, explore, ControlTokens, ExplorationConfig, ExploreOptions, GenuReward,
    Pool, RunManifest,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instances: Vec<Instance> = (0..3)
        .map(|i| Instance {
            id: format!("q{i}"),
            dataset: Dataset::Strategyqa,
            question: format!("Is thing {i} heavier than a feather?"),
            choices: vec![Label::new("Yes"), Label::new("No")],
            gold_label: Label::new("Yes"),
            gold_rationale: String::new(),
        })
        .collect();
    let gqs: Vec<GenQuestion> = instances
        .iter()
        .map(|i| GenQuestion {
            id: format!("{}-r0", i.id),
            parent_instance_id: i.id.clone(),
            gen_type: GenType::Rephrase,
            question: format!("Does {} weigh more than a feather?", i.id),
            gold_label: Label::new("Yes"),
            validated: true,
            validation_votes: 3,
        })
        .collect();

    let generator = MockOracle::new().with_generator(|r| {
        let s = r.seed.unwrap_or(0);
        (0..r.n)
            .map(|k| if (s >> 3) % 2 == k as u64 % 2 { format!("It has mass ({s})") } else { format!("Who knows ({s})") })
            .collect()
    });
    let oracle_i = MockOracle::constant("No");
    let oracle_ir = MockOracle::new().with_fallback(|input| Some(if input.contains("mass") { "Yes" } else { "No" }.into()));
    let reward = GenuReward::new(&gqs, &oracle_i, &oracle_ir, None);

    let cfg = ExplorationConfig {
        interval_steps: 100,
        ..Default::default()
    };
    let mut pool = Pool::new(ControlTokens::default())?;
    for step in (0..=300).step_by(50) {
        if !exploration_due(step, &cfg) {
            continue;
        }
        let opts = ExploreOptions {
            step,
            max_in_flight: 2,
            template: None,
        };
        let added = explore(&mut pool, &instances, &generator, &reward, &cfg, opts)?;
        println!("step {step}: +{added}, pool {}", pool.len());
    }

    let dir = std::env::temp_dir().join("rutil-quark-example");
    std::fs::create_dir_all(&dir)?;
    let train = dir.join("train.jsonl");
    let n = emit_training_file(&pool, &instances, None, Default::default(), None, &train)?;
    println!("{n} training lines in {}", train.display());
    for line in std::fs::read_to_string(&train)?.lines().take(3) {
        println!("  {line}");
    }
    RunManifest::new(cfg, ControlTokens::default()).write(&dir.join("manifest.json"))?;
    Ok(())
}
