use std::path::{Path, PathBuf};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn rutil(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rutil").chain(args.iter().copied());
    let code = rationale_utility::cli::run_with(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn e2e_corpus() -> PathBuf {
    fixtures().join("e2e/corpus")
}

pub fn e2e_golden() -> PathBuf {
    fixtures().join("e2e/golden")
}

/// Files the offline pipeline writes, in the order they are produced.
pub const E2E_FILES: &[&str] = &[
    "ingest.txt",
    "ingest.json",
    "utility.txt",
    "utility.json",
    "correlate.txt",
    "correlate.json",
    "genu.txt",
    "genu.jsonl",
    "pool_bin.txt",
    "pool.jsonl",
    "emit.txt",
    "training.jsonl",
    "manifest.json",
];

/// ingest, utility, correlate, genu score, pool bin, pool emit. Returns each step's exit code.
pub fn run_e2e(out: &Path) -> Vec<(&'static str, i32)> {
    let corpus = e2e_corpus();
    let c = corpus.to_str().unwrap();
    let p = |name: &str| out.join(name).to_str().unwrap().to_string();
    let steps: Vec<(&'static str, &'static str, Vec<String>)> = vec![
        ("ingest", "ingest.txt", vec!["ingest".into(), "--corpus-dir".into(), c.into(), "--out".into(), p("ingest.json")]),
        ("utility", "utility.txt", vec!["utility".into(), "--corpus-dir".into(), c.into(), "--out".into(), p("utility.json")]),
        (
            "correlate",
            "correlate.txt",
            vec!["correlate".into(), "--corpus-dir".into(), c.into(), "--out".into(), p("correlate.json")],
        ),
        (
            "genu",
            "genu.txt",
            vec![
                "genu".into(),
                "score".into(),
                "--corpus-dir".into(),
                c.into(),
                "--model-id".into(),
                "t5".into(),
                "--out".into(),
                p("genu.jsonl"),
            ],
        ),
        (
            "pool bin",
            "pool_bin.txt",
            vec![
                "pool".into(),
                "bin".into(),
                "--corpus-dir".into(),
                c.into(),
                "--genu".into(),
                p("genu.jsonl"),
                "--out".into(),
                p("pool.jsonl"),
            ],
        ),
        (
            "pool emit",
            "emit.txt",
            vec![
                "pool".into(),
                "emit".into(),
                "--corpus-dir".into(),
                c.into(),
                "--pool".into(),
                p("pool.jsonl"),
                "--template".into(),
                "feb".into(),
                "--out".into(),
                p("training.jsonl"),
                "--manifest-out".into(),
                p("manifest.json"),
            ],
        ),
    ];
    let mut codes = Vec::new();
    for (name, stdout_file, args) in steps {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let r = rutil(&args);
        std::fs::write(out.join(stdout_file), &r.stdout).unwrap();
        if r.code != 0 {
            eprintln!("{name}: {}", r.stderr);
        }
        codes.push((name, r.code));
    }
    codes
}

/// Names of files that differ from the golden copy.
pub fn golden_diff(out: &Path) -> Vec<String> {
    let golden = e2e_golden();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(&golden).unwrap();
        for f in E2E_FILES {
            std::fs::copy(out.join(f), golden.join(f)).unwrap();
        }
    }
    E2E_FILES
        .iter()
        .filter(|f| std::fs::read(out.join(f)).ok() != std::fs::read(golden.join(f)).ok())
        .map(|f| f.to_string())
        .collect()
}
