//! Oracle clients: the in-process mock, and the HTTP client when a URL is given.
//!
//! Usage: cargo run --example oracle_client [-- http://127.0.0.1:8080]

use std::time::Duration;

use rationale_utility::oracle::{map_bounded, GenerateRequest, HttpOracle, MockOracle, Oracle, OracleEndpoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mock = MockOracle::new()
        .with_answers([("Is water wet?", "Yes")])
        .with_fallback(|_| Some("No".into()))
        .with_delay(Duration::from_millis(5));
    let inputs = ["Is water wet?", "Is fire cold?", "Is ice hot?", "Is sand dry?"];
    let labels = map_bounded(&inputs, 2, |q| mock.predict(q).map(|p| p.label));
    for (q, l) in inputs.iter().zip(labels) {
        println!("{q} -> {}", l?);
    }
    println!("max in flight: {}", mock.max_observed_in_flight());

    let Some(url) = std::env::args().nth(1) else {
        println!("pass a base URL to try the HTTP client");
        return Ok(());
    };
    let http = HttpOracle::new(OracleEndpoint::new(url).with_env_token())?;
    http.health()?;
    let req = GenerateRequest {
        prompt: "question: Is water wet?\nrephrase:".into(),
        n: 5,
        temperature: 0.7,
        top_p: 1.0,
        max_tokens: 32,
        seed: Some(0),
    };
    for c in http.generate(&req)? {
        println!("completion: {c:?}");
    }
    Ok(())
}
