//! Builds a generation prompt, parses scripted completions, and validates a candidate.

use rationale_utility::corpus::{Dataset, GenType, Instance, Label};
use rationale_utility::oracle::MockOracle;
use rationale_utility::prompts::{
    build_genq_prompt, generate_gen_questions, record_validation, GenTemplate, GenerationConfig, Verdict,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = Instance {
        id: "sq1".into(),
        dataset: Dataset::Strategyqa,
        question: "Could a llama fit in a phone booth?".into(),
        choices: vec![Label::new("Yes"), Label::new("No")],
        gold_label: Label::new("Yes"),
        gold_rationale: "Llamas are about six feet tall and a phone booth is seven.".into(),
    };
    let template = GenTemplate::builtin(GenType::Rephrase);
    let prompt = build_genq_prompt(&inst, &template)?;
    let tail: Vec<&str> = prompt.lines().rev().take(2).collect();
    println!("prompt: {} lines, ends with {:?}", prompt.lines().count(), tail);

    let generator = MockOracle::new().with_completions([
        " Is a phone booth big enough for a llama?\nanswer: Yes",
        " Would a llama fit inside a telephone booth?\nanswer: true",
        " Is a phone booth big enough for a llama?\nanswer: Yes",
        "",
    ]);
    let out = generate_gen_questions(&inst, &template, &generator, &GenerationConfig::default())?;
    let req = &out.audit.request;
    println!("request n={} temperature={}", req.n, req.temperature);
    for c in &out.parsed.candidates {
        println!("candidate {}: {:?} -> {:?}", c.id, c.question, c.proposed_answer);
    }
    println!("{} rejected, {} duplicates", out.parsed.rejects.len(), out.parsed.duplicates);

    let cand = &out.parsed.candidates[0];
    let verdicts: Vec<Verdict> = [(true, Some("Yes")), (true, Some("Yes")), (false, None)]
        .into_iter()
        .enumerate()
        .map(|(i, (valid, a))| Verdict {
            candidate_id: cand.id.clone(),
            validator_id: format!("v{i}"),
            valid,
            answer: a.map(Label::new),
        })
        .collect();
    println!("{:?}", record_validation(cand, &verdicts));
    Ok(())
}
