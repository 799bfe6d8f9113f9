//! Data side of reward-conditioned training: GEN-U scores become control
//! tokens, sampled rationales accumulate in a pool, and the pool is written out
//! as conditioned training pairs for an external trainer.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, CorpusError, GenQuestion, Instance, Record};
use crate::genu::score_rationale;
use crate::oracle::{map_bounded, GenerateRequest, Oracle, OracleError};
use crate::prompts::RationalizationTemplate;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("reward {0} is outside {{-1, 0, 1}}")]
    OutOfDomain(i64),
    #[error("unknown control token {0:?}")]
    UnknownToken(String),
    #[error("control tokens must be distinct and non-empty")]
    Tokens,
    #[error("invalid exploration config: {0}")]
    Config(String),
    #[error("generator failed for instance {instance_id}: {error}")]
    Generator { instance_id: String, error: OracleError },
    #[error("generator returned {got} samples for instance {instance_id}, expected {expected}")]
    ShortSample {
        instance_id: String,
        got: usize,
        expected: usize,
    },
    #[error("reward failed for instance {instance_id}: {message}")]
    Reward { instance_id: String, message: String },
    #[error("pool entry for unknown instance {0}")]
    UnknownInstance(String),
    #[error("pool entry {instance_id}@{step}: genu {genu} does not match token {token:?}")]
    Inconsistent {
        instance_id: String,
        step: u64,
        genu: i8,
        token: String,
    },
    #[error("nothing to emit")]
    EmptySelection,
    #[error("malformed training line {line}: {message}")]
    TrainingLine { line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlTokens {
    pub neg: String,
    pub zero: String,
    pub pos: String,
}

impl Default for ControlTokens {
    fn default() -> Self {
        ControlTokens {
            neg: "<|genu_neg|>".into(),
            zero: "<|genu_zero|>".into(),
            pos: "<|genu_pos|>".into(),
        }
    }
}

impl ControlTokens {
    pub fn validate(&self) -> Result<(), PoolError> {
        let t = [&self.neg, &self.zero, &self.pos];
        if t.iter().any(|s| s.trim().is_empty() || s.chars().any(char::is_whitespace))
            || t[0] == t[1]
            || t[1] == t[2]
            || t[0] == t[2]
        {
            return Err(PoolError::Tokens);
        }
        Ok(())
    }

    pub fn token(&self, value: i8) -> Result<&str, PoolError> {
        match value {
            -1 => Ok(&self.neg),
            0 => Ok(&self.zero),
            1 => Ok(&self.pos),
            v => Err(PoolError::OutOfDomain(v as i64)),
        }
    }

    pub fn value(&self, token: &str) -> Result<i8, PoolError> {
        [(-1, &self.neg), (0, &self.zero), (1, &self.pos)]
            .into_iter()
            .find(|(_, t)| t.as_str() == token)
            .map(|(v, _)| v)
            .ok_or_else(|| PoolError::UnknownToken(token.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardBin {
    pub value: i8,
    pub control_token: String,
}

/// Fixed-value binning: each GEN-U value is its own bin.
pub fn bin_reward(genu: i64, tokens: &ControlTokens) -> Result<RewardBin, PoolError> {
    let value = i8::try_from(genu).map_err(|_| PoolError::OutOfDomain(genu))?;
    Ok(RewardBin {
        value,
        control_token: tokens.token(value).map_err(|_| PoolError::OutOfDomain(genu))?.to_string(),
    })
}

pub fn bin_from_token(token: &str, tokens: &ControlTokens) -> Result<RewardBin, PoolError> {
    Ok(RewardBin {
        value: tokens.value(token)?,
        control_token: token.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    pub interval_steps: u64,
    pub samples_per_instance: u32,
    pub top_p: f64,
    pub temperature: f64,
    pub seed: u64,
    pub max_tokens: u32,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            interval_steps: 500,
            samples_per_instance: 2,
            top_p: 0.7,
            temperature: 1.0,
            seed: 0,
            max_tokens: 128,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<(), PoolError> {
        let bad = |m: &str| Err(PoolError::Config(m.to_string()));
        if self.interval_steps < 1 {
            return bad("interval_steps must be at least 1");
        }
        if self.samples_per_instance < 1 {
            return bad("samples_per_instance must be at least 1");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must lie in (0, 1]");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.max_tokens < 1 {
            return bad("max_tokens must be at least 1");
        }
        Ok(())
    }
}

/// Step 0 never explores; the pool is seeded by an explicit forced round.
pub fn exploration_due(step: u64, cfg: &ExplorationConfig) -> bool {
    step > 0 && cfg.interval_steps > 0 && step % cfg.interval_steps == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolEntry {
    pub instance_id: String,
    pub sample_text: String,
    pub genu: i8,
    pub bin_token: String,
    pub step_added: u64,
}

impl Record for PoolEntry {
    fn check(&self) -> Result<(), String> {
        if !(-1..=1).contains(&self.genu) {
            return Err(format!("genu {} is outside {{-1, 0, 1}}", self.genu));
        }
        if self.instance_id.trim().is_empty() {
            return Err("instance_id must be non-empty".into());
        }
        Ok(())
    }
}

/// Where the control token goes in emitted training pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenSide {
    #[default]
    Encoder,
    Decoder,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pool {
    pub tokens: ControlTokens,
    pub entries: Vec<PoolEntry>,
}

impl Pool {
    pub fn new(tokens: ControlTokens) -> Result<Self, PoolError> {
        tokens.validate()?;
        Ok(Pool {
            tokens,
            entries: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, instance_id: &str, sample_text: &str, genu: i8, step: u64) -> Result<PoolEntry, PoolError> {
        Ok(PoolEntry {
            instance_id: instance_id.to_string(),
            sample_text: sample_text.to_string(),
            genu,
            bin_token: bin_reward(genu as i64, &self.tokens)?.control_token,
            step_added: step,
        })
    }

    /// Loads a pool file and checks every entry's token against its score.
    pub fn load(path: &Path, tokens: ControlTokens) -> Result<Self, PoolError> {
        let mut pool = Pool::new(tokens)?;
        pool.entries = corpus::read_jsonl(path)?;
        pool.check()?;
        Ok(pool)
    }

    pub fn check(&self) -> Result<(), PoolError> {
        for e in &self.entries {
            if self.tokens.value(&e.bin_token).ok() != Some(e.genu) {
                return Err(PoolError::Inconsistent {
                    instance_id: e.instance_id.clone(),
                    step: e.step_added,
                    genu: e.genu,
                    token: e.bin_token.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), PoolError> {
        Ok(corpus::save_records(path, &self.entries)?)
    }
}

/// Scores one sampled text for one instance.
pub trait Reward: Sync {
    fn score(&self, instance: &Instance, sample: &str) -> Result<i8, String>;
}

impl<F> Reward for F
where
    F: Fn(&Instance, &str) -> Result<i8, String> + Sync,
{
    fn score(&self, instance: &Instance, sample: &str) -> Result<i8, String> {
        self(instance, sample)
    }
}

/// GEN-U of each sample, re-querying both oracles with the sample as rationale.
pub struct GenuReward<'a> {
    by_parent: HashMap<&'a str, Vec<&'a GenQuestion>>,
    oracle_i: &'a dyn Oracle,
    oracle_ir: &'a dyn Oracle,
    template: Option<&'a RationalizationTemplate>,
}

impl<'a> GenuReward<'a> {
    pub fn new(
        gen_questions: &'a [GenQuestion],
        oracle_i: &'a dyn Oracle,
        oracle_ir: &'a dyn Oracle,
        template: Option<&'a RationalizationTemplate>,
    ) -> Self {
        let mut by_parent: HashMap<&str, Vec<&GenQuestion>> = HashMap::new();
        for g in gen_questions.iter().filter(|g| g.validated) {
            by_parent.entry(g.parent_instance_id.as_str()).or_default().push(g);
        }
        for v in by_parent.values_mut() {
            v.sort_by(|a, b| a.id.cmp(&b.id));
        }
        GenuReward {
            by_parent,
            oracle_i,
            oracle_ir,
            template,
        }
    }
}

impl Reward for GenuReward<'_> {
    fn score(&self, instance: &Instance, sample: &str) -> Result<i8, String> {
        let gqs = self
            .by_parent
            .get(instance.id.as_str())
            .ok_or_else(|| format!("no validated gen questions for {}", instance.id))?;
        score_rationale(instance, sample, gqs, self.oracle_i, self.oracle_ir, self.template).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExploreOptions<'a> {
    pub step: u64,
    pub max_in_flight: usize,
    /// Renders the generator prompt; the bare question when unset.
    pub template: Option<&'a RationalizationTemplate>,
}

/// Per-instance generation seeds, drawn in instance order from a stream keyed by the step.
pub fn round_seeds(seed: u64, step: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    (0..n).map(|_| rng.next_u64()).collect()
}

pub fn training_input(instance: &Instance, template: Option<&RationalizationTemplate>) -> String {
    match template {
        Some(t) => t.render(instance, None, None).input,
        None => instance.question.clone(),
    }
}

/// One exploration round. Entries are appended in instance order, then sample
/// order; on any failure the pool is left untouched.
pub fn explore(
    pool: &mut Pool,
    instances: &[Instance],
    generator: &dyn Oracle,
    reward: &dyn Reward,
    cfg: &ExplorationConfig,
    opts: ExploreOptions<'_>,
) -> Result<usize, PoolError> {
    cfg.validate()?;
    let seeds = round_seeds(cfg.seed, opts.step, instances.len());
    let jobs: Vec<(&Instance, u64)> = instances.iter().zip(seeds).collect();
    let want = cfg.samples_per_instance as usize;
    let results = map_bounded(&jobs, opts.max_in_flight.max(1), |(inst, seed)| {
        let req = GenerateRequest {
            prompt: training_input(inst, opts.template),
            n: cfg.samples_per_instance,
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            max_tokens: cfg.max_tokens,
            seed: Some(*seed),
        };
        let mut samples = generator.generate(&req).map_err(|error| PoolError::Generator {
            instance_id: inst.id.clone(),
            error,
        })?;
        if samples.len() < want {
            return Err(PoolError::ShortSample {
                instance_id: inst.id.clone(),
                got: samples.len(),
                expected: want,
            });
        }
        samples.truncate(want);
        let mut scored = Vec::with_capacity(want);
        for s in samples {
            let genu = reward.score(inst, &s).map_err(|message| PoolError::Reward {
                instance_id: inst.id.clone(),
                message,
            })?;
            scored.push((s, genu));
        }
        Ok(scored)
    });
    let mut added = Vec::with_capacity(instances.len() * want);
    for ((inst, _), r) in jobs.iter().zip(results) {
        for (s, genu) in r? {
            added.push(pool.entry(&inst.id, &s, genu, opts.step)?);
        }
    }
    let n = added.len();
    pool.entries.extend(added);
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingLine {
    pub input: String,
    pub target: String,
}

/// Stable order: bin descending, then instance id, then step added.
pub fn sorted_selection<'a>(pool: &'a Pool, filter: Option<i8>) -> Vec<&'a PoolEntry> {
    let mut v: Vec<&PoolEntry> = pool
        .entries
        .iter()
        .filter(|e| filter.is_none_or(|f| e.genu == f))
        .collect();
    v.sort_by(|a, b| {
        b.genu
            .cmp(&a.genu)
            .then_with(|| a.instance_id.cmp(&b.instance_id))
            .then_with(|| a.step_added.cmp(&b.step_added))
    });
    v
}

pub fn training_lines(
    pool: &Pool,
    instances: &[Instance],
    template: Option<&RationalizationTemplate>,
    side: TokenSide,
    filter: Option<i8>,
) -> Result<Vec<TrainingLine>, PoolError> {
    let idx: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let sel = sorted_selection(pool, filter);
    if sel.is_empty() {
        return Err(PoolError::EmptySelection);
    }
    sel.into_iter()
        .map(|e| {
            let inst = idx
                .get(e.instance_id.as_str())
                .ok_or_else(|| PoolError::UnknownInstance(e.instance_id.clone()))?;
            let input = training_input(inst, template);
            Ok(match side {
                TokenSide::Encoder => TrainingLine {
                    input: format!("{} {}", e.bin_token, input),
                    target: e.sample_text.clone(),
                },
                TokenSide::Decoder => TrainingLine {
                    input,
                    target: format!("{} {}", e.bin_token, e.sample_text),
                },
            })
        })
        .collect()
}

/// Writes the conditioned training file and returns the line count.
pub fn emit_training_file(
    pool: &Pool,
    instances: &[Instance],
    template: Option<&RationalizationTemplate>,
    side: TokenSide,
    filter: Option<i8>,
    path: &Path,
) -> Result<usize, PoolError> {
    let lines = training_lines(pool, instances, template, side, filter)?;
    corpus::save_records(path, &lines)?;
    Ok(lines.len())
}

/// A training line with its control token split off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTrainingLine {
    pub bin: RewardBin,
    pub input: String,
    pub target: String,
}

fn split_token<'s>(s: &'s str, tokens: &ControlTokens) -> Result<(RewardBin, &'s str), PoolError> {
    let (tok, rest) = s.split_once(' ').ok_or_else(|| PoolError::UnknownToken(s.to_string()))?;
    Ok((bin_from_token(tok, tokens)?, rest))
}

pub fn parse_training_line(line: &TrainingLine, tokens: &ControlTokens, side: TokenSide) -> Result<ParsedTrainingLine, PoolError> {
    Ok(match side {
        TokenSide::Encoder => {
            let (bin, input) = split_token(&line.input, tokens)?;
            ParsedTrainingLine {
                bin,
                input: input.to_string(),
                target: line.target.clone(),
            }
        }
        TokenSide::Decoder => {
            let (bin, target) = split_token(&line.target, tokens)?;
            ParsedTrainingLine {
                bin,
                input: line.input.clone(),
                target: target.to_string(),
            }
        }
    })
}

pub fn read_training_file(path: &Path, tokens: &ControlTokens, side: TokenSide) -> Result<Vec<ParsedTrainingLine>, PoolError> {
    let text = std::fs::read_to_string(path).map_err(|e| PoolError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line: TrainingLine = serde_json::from_str(l).map_err(|e| PoolError::TrainingLine {
                line: i + 1,
                message: e.to_string(),
            })?;
            parse_training_line(&line, tokens, side)
        })
        .collect()
}

/// Settings the external trainer needs; defaults follow the published run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub optimizer: String,
    pub adam_epsilon: f64,
    pub learning_rate: f64,
    pub lr_scheduler: String,
    pub warmup_steps: u64,
    pub gradient_clipping: f64,
    pub gradient_accumulation_steps: u32,
    pub kl_coef: f64,
    pub entropy_coef: f64,
    pub train_batch_size: u32,
    pub eval_batch_size: u32,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            optimizer: "adam".into(),
            adam_epsilon: 1e-8,
            learning_rate: 1e-5,
            lr_scheduler: "linear_with_warmup".into(),
            warmup_steps: 1000,
            gradient_clipping: 1.0,
            gradient_accumulation_steps: 2,
            kl_coef: 0.05,
            entropy_coef: 0.05,
            train_batch_size: 4,
            eval_batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub exploration: ExplorationConfig,
    pub control_tokens: ControlTokens,
    pub token_side: TokenSide,
    pub trainer: TrainerConfig,
    /// Role to model pin, e.g. generator, oracle_i, oracle_ir.
    pub models: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(exploration: ExplorationConfig, control_tokens: ControlTokens) -> Self {
        RunManifest {
            exploration,
            control_tokens,
            token_side: TokenSide::Encoder,
            trainer: TrainerConfig::default(),
            models: BTreeMap::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), PoolError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| PoolError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dataset, Label};
    use crate::oracle::MockOracle;

    fn inst(id: &str) -> Instance {
        Instance {
            id: id.into(),
            dataset: Dataset::Strategyqa,
            question: format!("question {id}?"),
            choices: vec![Label::new("Yes"), Label::new("No")],
            gold_label: Label::new("Yes"),
            gold_rationale: String::new(),
        }
    }

    fn sampler() -> MockOracle {
        MockOracle::new().with_generator(|r| {
            (0..r.n)
                .map(|k| format!("{} sample {k} seed {}", r.prompt, r.seed.unwrap()))
                .collect()
        })
    }

    #[test]
    fn bins() {
        let t = ControlTokens::default();
        assert_eq!(bin_reward(1, &t).unwrap().control_token, "<|genu_pos|>");
        assert_eq!(bin_reward(-1, &t).unwrap().control_token, "<|genu_neg|>");
        assert!(matches!(bin_reward(2, &t), Err(PoolError::OutOfDomain(2))));
        assert!(matches!(bin_reward(i64::MAX, &t), Err(PoolError::OutOfDomain(_))));
        for v in -1..=1 {
            let b = bin_reward(v, &t).unwrap();
            assert_eq!(bin_from_token(&b.control_token, &t).unwrap().value as i64, v);
        }
        let dup = ControlTokens {
            neg: "a".into(),
            zero: "a".into(),
            pos: "b".into(),
        };
        assert!(dup.validate().is_err());
    }

    #[test]
    fn due_schedule() {
        let c = ExplorationConfig::default();
        assert!(exploration_due(500, &c));
        assert!(exploration_due(1000, &c));
        assert!(!exploration_due(499, &c));
        assert!(!exploration_due(0, &c));
    }

    #[test]
    fn config_validation() {
        for bad in [
            ExplorationConfig {
                interval_steps: 0,
                ..Default::default()
            },
            ExplorationConfig {
                top_p: 0.0,
                ..Default::default()
            },
            ExplorationConfig {
                temperature: 0.0,
                ..Default::default()
            },
            ExplorationConfig {
                samples_per_instance: 0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn round_grows_and_uses_config() {
        let instances = vec![inst("a"), inst("b"), inst("c")];
        let g = sampler();
        let reward = |_: &Instance, _: &str| Ok(-1);
        let mut pool = Pool::new(ControlTokens::default()).unwrap();
        let cfg = ExplorationConfig::default();
        let opts = ExploreOptions {
            step: 0,
            max_in_flight: 2,
            template: None,
        };
        assert_eq!(explore(&mut pool, &instances, &g, &reward, &cfg, opts).unwrap(), 6);
        assert!(pool.entries.iter().all(|e| e.bin_token == "<|genu_neg|>"));
        let reqs = g.generate_requests();
        assert!(reqs.iter().all(|r| r.n == 2 && r.top_p == 0.7 && r.temperature == 1.0));
        assert_eq!(pool.entries[0].instance_id, "a");
        assert_eq!(pool.entries[5].instance_id, "c");
    }

    #[test]
    fn failure_leaves_pool_unchanged() {
        let instances = vec![inst("a"), inst("b")];
        let short = MockOracle::new().with_generator(|r| if r.prompt.contains('b') { vec![] } else { vec!["x".into(); 2] });
        let reward = |_: &Instance, _: &str| Ok(0);
        let mut pool = Pool::new(ControlTokens::default()).unwrap();
        let cfg = ExplorationConfig::default();
        let opts = ExploreOptions {
            step: 500,
            max_in_flight: 1,
            template: None,
        };
        assert!(matches!(
            explore(&mut pool, &instances, &short, &reward, &cfg, opts),
            Err(PoolError::ShortSample { .. })
        ));
        assert!(pool.is_empty());
        let failing = sampler().failing_first(1);
        assert!(matches!(
            explore(&mut pool, &instances, &failing, &reward, &cfg, opts),
            Err(PoolError::Generator { .. })
        ));
        assert!(pool.is_empty());
    }

    #[test]
    fn emit_order_and_filter() {
        let instances = vec![inst("a"), inst("b")];
        let mut pool = Pool::new(ControlTokens::default()).unwrap();
        for (id, g, step) in [("b", 0, 0), ("a", -1, 0), ("b", 1, 500), ("a", 1, 500), ("a", 0, 0), ("b", -1, 500)] {
            let e = pool.entry(id, &format!("{id}{g}{step}"), g, step).unwrap();
            pool.entries.push(e);
        }
        let lines = training_lines(&pool, &instances, None, TokenSide::Encoder, None).unwrap();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].input.starts_with("<|genu_pos|> "));
        assert_eq!(lines[0].target, "a1500");
        assert!(lines[5].input.starts_with("<|genu_neg|>"));
        let pos = training_lines(&pool, &instances, None, TokenSide::Encoder, Some(1)).unwrap();
        assert_eq!(pos.len(), 2);
        let mut empty = pool.clone();
        empty.entries.retain(|e| e.genu != 1);
        assert!(matches!(
            training_lines(&empty, &instances, None, TokenSide::Encoder, Some(1)),
            Err(PoolError::EmptySelection)
        ));
        let dec = training_lines(&pool, &instances, None, TokenSide::Decoder, None).unwrap();
        let back = parse_training_line(&dec[0], &pool.tokens, TokenSide::Decoder).unwrap();
        assert_eq!(back.target, "a1500");
        assert_eq!(back.bin.value, 1);
    }

    #[test]
    fn inconsistent_entry_rejected() {
        let mut pool = Pool::new(ControlTokens::default()).unwrap();
        let mut e = pool.entry("a", "s", 1, 0).unwrap();
        e.genu = 0;
        pool.entries.push(e);
        assert!(matches!(pool.check(), Err(PoolError::Inconsistent { .. })));
    }

    #[test]
    fn manifest_carries_trainer_defaults() {
        let m = RunManifest::new(ExplorationConfig::default(), ControlTokens::default());
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["trainer"]["kl_coef"], 0.05);
        assert_eq!(v["trainer"]["warmup_steps"], 1000);
        assert_eq!(v["exploration"]["interval_steps"], 500);
    }
}
