mod common;

use std::path::Path;
use std::process::Command;

use common::pipeline::{e2e_corpus, fixtures, rutil};

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_on_every_subcommand() {
    let cmds: &[&[&str]] = &[
        &[],
        &["ingest"],
        &["utility"],
        &["agreement"],
        &["correlate"],
        &["glmm"],
        &["glmm", "fit"],
        &["genq"],
        &["genq", "build"],
        &["genq", "parse"],
        &["genq", "generate"],
        &["genq", "validate"],
        &["genu"],
        &["genu", "score"],
        &["genu", "correlate"],
        &["pool"],
        &["pool", "bin"],
        &["pool", "explore"],
        &["pool", "emit"],
        &["report"],
    ];
    for c in cmds {
        let mut args = c.to_vec();
        args.push("--help");
        let r = rutil(&args);
        assert_eq!(r.code, 0, "{c:?}: {}", r.stderr);
        assert!(r.stdout.contains("Usage"), "{c:?}");
    }
    assert_eq!(rutil(&["--version"]).code, 0);
}

#[test]
fn usage_errors_exit_two() {
    let r = rutil(&["utility", "--no-such-flag"]);
    assert_eq!(r.code, 2);
    assert_eq!(rutil(&["frobnicate"]).code, 2);
    assert_eq!(rutil(&[]).code, 2);
}

#[test]
fn missing_file_names_the_path() {
    let r = rutil(&["utility", "--instances", "/nonexistent/inst.jsonl", "--outputs", "x", "--annotations", "y"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("/nonexistent/inst.jsonl"), "{}", r.stderr);
    let r = rutil(&["ingest", "--corpus-dir", "/nonexistent/dir"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("/nonexistent/dir"));
}

#[test]
fn malformed_record_is_domain_or_io() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["instances", "model_outputs", "annotations"] {
        std::fs::copy(
            fixtures().join(format!("utility10/{f}.jsonl")),
            dir.path().join(format!("{f}.jsonl")),
        )
        .unwrap();
    }
    // an answer outside the instance's choices is a schema violation
    let ann = dir.path().join("annotations.jsonl");
    let text = std::fs::read_to_string(&ann).unwrap();
    let first = text.lines().next().unwrap().replacen("\"post_answer\": \"", "\"post_answer\": \"Zebra", 1);
    let first = if first.contains("Zebra") {
        first
    } else {
        text.lines().next().unwrap().replacen("\"post_answer\":\"", "\"post_answer\":\"Zebra", 1)
    };
    std::fs::write(&ann, format!("{first}\n{}", text.lines().skip(1).collect::<Vec<_>>().join("\n"))).unwrap();
    let r = rutil(&["utility", "--corpus-dir", p(dir.path())]);
    assert_eq!(r.code, 1, "{}", r.stderr);

    std::fs::write(&ann, "{not json\n").unwrap();
    let r = rutil(&["utility", "--corpus-dir", p(dir.path())]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("annotations.jsonl"));
}

#[test]
fn utility_table_matches_hand_tally() {
    let r = rutil(&["utility", "--corpus-dir", p(&fixtures().join("utility10"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows: Vec<Vec<&str>> = r.stdout.lines().skip(2).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows[0], ["m1", "obqa", "25.00", "50.00", "25.00", "4", "0", "3"]);
    assert_eq!(rows[1], ["m1", "strategyqa", "50.00", "33.33", "16.67", "6", "0", "0"]);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let c = e2e_corpus();
    let dir = tempfile::tempdir().unwrap();
    for cmd in [["utility"], ["correlate"], ["agreement"], ["ingest"]] {
        let a = dir.path().join(format!("{}-a.json", cmd[0]));
        let b = dir.path().join(format!("{}-b.json", cmd[0]));
        let ra = rutil(&[cmd[0], "--corpus-dir", p(&c), "--out", p(&a)]);
        let rb = rutil(&[cmd[0], "--corpus-dir", p(&c), "--out", p(&b)]);
        assert_eq!(ra.code, 0);
        assert_eq!(ra.stdout, rb.stdout);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{}", cmd[0]);
    }
    let g = |name: &str| {
        let o = dir.path().join(name);
        let r = rutil(&["genu", "score", "--corpus-dir", p(&c), "--model-id", "t5", "--out", p(&o), "--jobs", "3"]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        std::fs::read(o).unwrap()
    };
    assert_eq!(g("g1.jsonl"), g("g2.jsonl"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    for f in ["instances", "model_outputs", "annotations"] {
        std::fs::copy(fixtures().join(format!("utility10/{f}.jsonl")), corpus.join(format!("{f}.jsonl"))).unwrap();
    }
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[paths]\ncorpus_dir = \"corpus\"\n\n[pools]\nvote_pool_size = 7\n").unwrap();
    let r = rutil(&["--config", p(&cfg), "utility"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    // every pair has five annotators, under the configured seven
    assert!(r.stdout.lines().nth(2).unwrap().split_whitespace().nth(6) == Some("4"), "{}", r.stdout);

    let r = rutil(&["--config", p(&cfg), "--set", "pools.vote_pool_size=5", "utility"]);
    assert_eq!(r.stdout.lines().nth(2).unwrap().split_whitespace().nth(6), Some("0"));

    let r = rutil(&["--config", p(&cfg), "--set", "pools.bogus=1", "utility"]);
    assert_eq!(r.code, 2);
    let r = rutil(&["--config", p(&cfg), "--set", "paths.instances=missing.jsonl", "utility"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("missing.jsonl"));
}

#[test]
fn genq_build_parse_validate() {
    let c = e2e_corpus();
    let dir = tempfile::tempdir().unwrap();
    let r = rutil(&["genq", "build", "--corpus-dir", p(&c), "--instance-id", "e00", "--gen-type", "rephrase"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("### e00 rephrase\n"));
    assert!(r.stdout.contains("Synthetic question number 0?"));
    assert!(r.stdout.trim_end().ends_with("rephrase:"), "{}", r.stdout);

    let audit = dir.path().join("audit.jsonl");
    let line = serde_json::json!({
        "instance_id": "e00",
        "gen_type": "rephrase",
        "request": {"prompt": "p", "n": 5, "temperature": 0.7, "top_p": 1.0, "max_tokens": 64, "seed": 1},
        "completions": [
            " Is number zero synthetic?\nanswer: Yes",
            " Is number zero synthetic?\nanswer: Yes",
            " Is the zeroth question synthetic?",
            "",
            " Would zero be synthetic?\nanswer: false"
        ]
    });
    std::fs::write(&audit, format!("{line}\n")).unwrap();
    let cands = dir.path().join("cands.jsonl");
    let rejects = dir.path().join("rejects.jsonl");
    let r = rutil(&[
        "genq", "parse", "--corpus-dir", p(&c), "--audit", p(&audit), "--out", p(&cands), "--rejects-out", p(&rejects),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout, "3 candidates, 1 rejected, 1 duplicates\n");

    let parsed: Vec<serde_json::Value> =
        std::fs::read_to_string(&cands).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed[1]["proposed_answer"], "Yes", "rephrase defaults to the parent's answer");
    assert_eq!(parsed[2]["proposed_answer"], "No");

    let verdicts = dir.path().join("verdicts.jsonl");
    let mut v = String::new();
    for (cid, answers) in [
        (parsed[0]["id"].as_str().unwrap(), [Some("Yes"), Some("Yes"), None]),
        (parsed[1]["id"].as_str().unwrap(), [Some("Yes"), Some("No"), None]),
    ] {
        for (k, a) in answers.iter().enumerate() {
            let j = serde_json::json!({"candidate_id": cid, "validator_id": format!("v{k}"), "valid": a.is_some(), "answer": a});
            v.push_str(&format!("{j}\n"));
        }
    }
    std::fs::write(&verdicts, v).unwrap();
    let out = dir.path().join("gq.jsonl");
    let rej = dir.path().join("rej.jsonl");
    let r = rutil(&[
        "genq", "validate", "--candidates", p(&cands), "--verdicts", p(&verdicts), "--out", p(&out), "--rejections-out", p(&rej),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout, "1 accepted, 2 rejected\n");
    let rej = std::fs::read_to_string(&rej).unwrap();
    assert!(rej.contains("answer_disagreement") && rej.contains("no_verdicts"), "{rej}");
}

#[test]
fn exploration_not_due_leaves_pool_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pool.jsonl");
    let r = rutil(&["pool", "explore", "--step", "7", "--seed", "1", "--out", p(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("not due"));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
    let c = e2e_corpus();
    let r = rutil(&["pool", "explore", "--corpus-dir", p(&c), "--step", "500", "--seed", "1", "--out", p(&out)]);
    assert_eq!(r.code, 2, "due but no generator configured: {}", r.stderr);
    assert!(r.stderr.contains("oracle.generator"));
}

#[test]
fn pool_bin_single_scores() {
    for (s, tok) in [("-1", "<|genu_neg|>"), ("0", "<|genu_zero|>"), ("1", "<|genu_pos|>")] {
        let r = rutil(&["pool", "bin", "--score", s]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        assert!(r.stdout.contains(tok), "{}", r.stdout);
    }
    assert_eq!(rutil(&["pool", "bin", "--score", "2"]).code, 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_rutil");
    let ok = Command::new(bin).args(["utility", "--corpus-dir"]).arg(fixtures().join("utility10")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin).args(["utility", "--corpus-dir", "/nonexistent"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("/nonexistent"));
}

#[test]
fn glmm_fit_on_generated_properties() {
    use rand::{Rng, SeedableRng};
    let dir = tempfile::tempdir().unwrap();
    let src = e2e_corpus();
    for f in ["instances", "model_outputs", "annotations"] {
        std::fs::copy(src.join(format!("{f}.jsonl")), dir.path().join(format!("{f}.jsonl"))).unwrap();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let mut props = String::new();
    for line in std::fs::read_to_string(src.join("annotations.jsonl")).unwrap().lines() {
        let a: serde_json::Value = serde_json::from_str(line).unwrap();
        let mut rec = serde_json::json!({
            "instance_id": a["instance_id"], "model_id": a["model_id"], "worker_id": a["worker_id"],
        });
        for p in ["grammaticality", "validity", "coherence", "conciseness", "leakage", "novelty", "association", "contrast"] {
            rec[p] = serde_json::json!(rng.gen_bool(0.5));
        }
        props.push_str(&format!("{rec}\n"));
    }
    std::fs::write(dir.path().join("property_annotations.jsonl"), props).unwrap();
    for agg in ["majority", "per_annotator"] {
        let a = rutil(&["glmm", "fit", "--corpus-dir", p(dir.path()), "--aggregation", agg, "--top", "3"]);
        assert_eq!(a.code, 0, "{agg}: {}", a.stderr);
        assert!(a.stdout.contains("(Intercept)") && a.stdout.contains("grammaticality"), "{}", a.stdout);
        let b = rutil(&["glmm", "fit", "--corpus-dir", p(dir.path()), "--aggregation", agg, "--top", "3"]);
        assert_eq!(a.stdout, b.stdout);
    }
}
