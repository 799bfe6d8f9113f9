//! Fits the property model on simulated annotations and prints the marginal table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rationale_utility::corpus::Property;
use rationale_utility::glmm::{
    design_from_observations, fit_glmm, marginal_table, render_combinations, render_marginal, top_pairwise,
    FitConfig, PropertyObservation, INTERCEPT,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut obs = Vec::new();
    for q in 0..150 {
        let q_effect: f64 = rng.gen_range(-0.5..0.5);
        for model in ["gpt3", "t5-large"] {
            let properties: [bool; 8] = std::array::from_fn(|_| rng.gen_bool(0.5));
            // validity helps, leakage hurts
            let eta = -0.3 + q_effect + if properties[Property::Validity.index()] { 1.0 } else { 0.0 }
                - if properties[Property::Leakage.index()] { 0.7 } else { 0.0 };
            for w in 0..3 {
                let p = 1.0 / (1.0 + (-eta).exp());
                obs.push(PropertyObservation {
                    properties,
                    response: rng.gen_bool(p),
                    question_id: format!("q{q}"),
                    model_id: model.to_string(),
                    human_prior: (q + w) % 2 == 0,
                });
            }
        }
    }
    let d = design_from_observations(&obs)?;
    let fit = fit_glmm(&d, &FitConfig::default())?;
    println!(
        "{} rows, {} columns, converged {}, sigma {:?}",
        fit.n_obs,
        fit.beta.len(),
        fit.converged,
        fit.sigma.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>()
    );
    print!("{}", render_marginal(&marginal_table(&fit, &d)?));
    println!();
    print!("{}", render_combinations(fit.coefficient(INTERCEPT).unwrap(), &top_pairwise(&fit, 5)?));
    Ok(())
}
