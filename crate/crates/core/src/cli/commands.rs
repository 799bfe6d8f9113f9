use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use super::*;
use crate::agreement::alpha_table;
use crate::assoc::{correlation_table, render_correlation};
use crate::corpus::{
    join_evaluation_rows, read_jsonl, save_records, validate_corpus, Corpus, GenType, Instance, Record, RecordKind,
};
use crate::genu::{
    correlate_genu_with_utility, render_genu, score_corpus, GenUResult, GenuConfig, GenuError, PredictionSource,
};
use crate::glmm::{
    best_combinations, build_design, fit_glmm, marginal_table, render_combinations, render_marginal, top_pairwise,
    Aggregation,
};
use crate::oracle::{HttpOracle, OracleEndpoint};
use crate::prompts::{
    build_genq_prompt, generate_many, parse_audit, record_validation, AuditRecord, GenCandidate, GenTemplate,
    PromptError, RationalizationKind, RationalizationTemplate, Verdict,
};
use crate::quarkpool::{
    bin_reward, emit_training_file, exploration_due, explore, ExploreOptions, GenuReward, Pool, PoolError,
    RunManifest,
};
use crate::report::{fmt_fixed, Table};
use crate::utility::{
    classify_pairs, generalization_accuracy_report, render_distribution, render_generalization, utility_distribution,
    utility_labels, ClassifiedPair, UtilityError,
};

struct Ctx<'a> {
    cfg: RunConfig,
    jobs: usize,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn prompt_err(e: PromptError) -> CliError {
    match e {
        PromptError::Io { .. } => CliError::Io(e.to_string()),
        PromptError::UnsupportedKind(_) | PromptError::Template(_) => CliError::Config(e.to_string()),
        PromptError::Oracle(o) => o.into(),
        _ => domain(e),
    }
}

fn pool_err(e: PoolError) -> CliError {
    match e {
        PoolError::Corpus(c) => c.into(),
        PoolError::Io { .. } => CliError::Io(e.to_string()),
        PoolError::Config(_) | PoolError::Tokens => CliError::Config(e.to_string()),
        PoolError::Generator { error, .. } => error.into(),
        _ => domain(e),
    }
}

fn utility_err(e: UtilityError) -> CliError {
    domain(e)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    Ok(save_records(path, records)?)
}

fn flag(c: &CorpusArgs, kind: RecordKind) -> &Option<PathBuf> {
    match kind {
        RecordKind::Instances => &c.instances,
        RecordKind::ModelOutputs => &c.outputs,
        RecordKind::Annotations => &c.annotations,
        RecordKind::PropertyAnnotations => &c.properties,
        RecordKind::GenQuestions => &c.gen_questions,
        RecordKind::OraclePredictions => &c.predictions,
        RecordKind::GenAnnotations => &c.gen_annotations,
    }
}

fn flag_name(kind: RecordKind) -> &'static str {
    match kind {
        RecordKind::Instances => "--instances",
        RecordKind::ModelOutputs => "--outputs",
        RecordKind::Annotations => "--annotations",
        RecordKind::PropertyAnnotations => "--properties",
        RecordKind::GenQuestions => "--gen-questions",
        RecordKind::OraclePredictions => "--predictions",
        RecordKind::GenAnnotations => "--gen-annotations",
    }
}

impl Ctx<'_> {
    fn print(&mut self, s: &str) -> Result<(), CliError> {
        self.out
            .write_all(s.as_bytes())
            .and_then(|_| if s.ends_with('\n') { Ok(()) } else { self.out.write_all(b"\n") })
            .map_err(|e| CliError::Io(format!("stdout: {e}")))
    }

    fn warn(&mut self, s: &str) {
        let _ = writeln!(self.err, "warning: {s}");
    }

    fn path(&self, c: &CorpusArgs, kind: RecordKind) -> Result<Option<PathBuf>, CliError> {
        if let Some(p) = flag(c, kind) {
            return Ok(Some(p.clone()));
        }
        let p = &self.cfg.paths;
        let configured = match kind {
            RecordKind::Instances => &p.instances,
            RecordKind::ModelOutputs => &p.model_outputs,
            RecordKind::Annotations => &p.annotations,
            RecordKind::PropertyAnnotations => &p.property_annotations,
            RecordKind::GenQuestions => &p.gen_questions,
            RecordKind::OraclePredictions => &p.oracle_predictions,
            RecordKind::GenAnnotations => &p.gen_annotations,
        };
        if let Some(p) = configured {
            return Ok(Some(p.clone()));
        }
        let Some(dir) = c.corpus_dir.as_ref().or(p.corpus_dir.as_ref()) else {
            return Ok(None);
        };
        if !dir.is_dir() {
            return Err(CliError::Io(format!("{}: corpus directory does not exist", dir.display())));
        }
        let f = dir.join(Corpus::file_name(kind));
        Ok(f.exists().then_some(f))
    }

    fn require<T: Record>(&self, c: &CorpusArgs, kind: RecordKind) -> Result<Vec<T>, CliError> {
        match self.path(c, kind)? {
            Some(p) => Ok(read_jsonl(&p)?),
            None => Err(CliError::Config(format!(
                "no {kind} file: pass {} or set paths.{}",
                flag_name(kind),
                match kind {
                    RecordKind::PropertyAnnotations => "property_annotations",
                    k => k.name(),
                }
            ))),
        }
    }

    fn optional<T: Record>(&self, c: &CorpusArgs, kind: RecordKind) -> Result<Vec<T>, CliError> {
        match self.path(c, kind)? {
            Some(p) => Ok(read_jsonl(&p)?),
            None => Ok(Vec::new()),
        }
    }

    fn rationalization(&self, kind: Option<&str>) -> Result<Option<RationalizationTemplate>, CliError> {
        let Some(k) = kind else { return Ok(None) };
        let kind: RationalizationKind = k.parse().map_err(prompt_err)?;
        let dir = self.cfg.paths.templates_dir.as_ref().map(|d| d.join("rationalization"));
        RationalizationTemplate::load(kind, dir.as_deref()).map(Some).map_err(prompt_err)
    }

    fn gen_template(&self, g: GenType) -> Result<GenTemplate, CliError> {
        let dir = self.cfg.paths.templates_dir.as_ref().map(|d| d.join("genq"));
        GenTemplate::load(g, dir.as_deref()).map_err(prompt_err)
    }

    fn endpoint(&self, role: &str) -> Result<OracleEndpoint, CliError> {
        let ep = match role {
            "i" => &self.cfg.oracle.i,
            "ir" => &self.cfg.oracle.ir,
            _ => &self.cfg.oracle.generator,
        };
        let mut ep = ep
            .clone()
            .ok_or_else(|| CliError::Config(format!("oracle.{role} is not configured")))?
            .with_env_token();
        ep.max_in_flight = ep.max_in_flight.min(self.jobs);
        Ok(ep)
    }

    fn oracle(&self, role: &str) -> Result<HttpOracle, CliError> {
        Ok(HttpOracle::new(self.endpoint(role)?)?)
    }

    fn classified(&self, c: &CorpusArgs) -> Result<(Vec<Instance>, Vec<crate::corpus::ModelOutput>, Classified), CliError> {
        let instances: Vec<Instance> = self.require(c, RecordKind::Instances)?;
        let outputs = self.require(c, RecordKind::ModelOutputs)?;
        let annotations = self.require(c, RecordKind::Annotations)?;
        let join = join_evaluation_rows(&instances, &outputs, &annotations);
        let pairs = classify_pairs(&join.rows, self.cfg.pools.vote_pool_size).map_err(utility_err)?;
        let cl = Classified {
            pairs,
            excluded_missing_instance: join.excluded_missing_instance,
            excluded_missing_output: join.excluded_missing_output,
        };
        Ok((instances, outputs, cl))
    }
}

#[derive(Debug, Serialize)]
struct Classified {
    pairs: Vec<ClassifiedPair>,
    excluded_missing_instance: usize,
    excluded_missing_output: usize,
}

fn gen_types(names: &[String]) -> Result<Vec<GenType>, CliError> {
    if names.is_empty() {
        return Ok(GenType::ALL.to_vec());
    }
    names.iter().map(|n| n.parse().map_err(CliError::Config)).collect()
}

pub(super) fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let jobs = cli.jobs.or(cfg.jobs).unwrap_or(8);
    if jobs < 1 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let mut ctx = Ctx { cfg, jobs, out, err };
    match cli.command {
        Command::Ingest(a) => ingest(&mut ctx, a),
        Command::Utility(a) => utility(&mut ctx, a),
        Command::Agreement(a) => agreement(&mut ctx, a),
        Command::Correlate(a) => correlate(&mut ctx, a),
        Command::Glmm(GlmmCommand::Fit(a)) => glmm_fit(&mut ctx, a),
        Command::Genq(GenqCommand::Build(a)) => genq_build(&mut ctx, a),
        Command::Genq(GenqCommand::Parse(a)) => genq_parse(&mut ctx, a),
        Command::Genq(GenqCommand::Generate(a)) => genq_generate(&mut ctx, a),
        Command::Genq(GenqCommand::Validate(a)) => genq_validate(&mut ctx, a),
        Command::Genu(GenuCommand::Score(a)) => genu_score(&mut ctx, a),
        Command::Genu(GenuCommand::Correlate(a)) => genu_correlate(&mut ctx, a),
        Command::Pool(PoolCommand::Bin(a)) => pool_bin(&mut ctx, a),
        Command::Pool(PoolCommand::Explore(a)) => pool_explore(&mut ctx, a),
        Command::Pool(PoolCommand::Emit(a)) => pool_emit(&mut ctx, a),
        Command::Report(a) => report(&mut ctx, a),
    }
}

#[derive(Serialize)]
struct IngestReport<'a> {
    counts: BTreeMap<&'static str, usize>,
    clean: bool,
    violations: &'a [crate::corpus::Violation],
    warnings: &'a [crate::corpus::Warning],
}

fn ingest(ctx: &mut Ctx<'_>, a: IngestArgs) -> Result<(), CliError> {
    let c = &a.corpus;
    let corpus = Corpus {
        instances: ctx.require(c, RecordKind::Instances)?,
        outputs: ctx.optional(c, RecordKind::ModelOutputs)?,
        annotations: ctx.optional(c, RecordKind::Annotations)?,
        properties: ctx.optional(c, RecordKind::PropertyAnnotations)?,
        gen_questions: ctx.optional(c, RecordKind::GenQuestions)?,
        oracle_predictions: ctx.optional(c, RecordKind::OraclePredictions)?,
        gen_annotations: ctx.optional(c, RecordKind::GenAnnotations)?,
    };
    let v = validate_corpus(&corpus, ctx.cfg.pools.vote_pool_size);
    let counts = BTreeMap::from([
        (RecordKind::Instances.name(), corpus.instances.len()),
        (RecordKind::ModelOutputs.name(), corpus.outputs.len()),
        (RecordKind::Annotations.name(), corpus.annotations.len()),
        (RecordKind::PropertyAnnotations.name(), corpus.properties.len()),
        (RecordKind::GenQuestions.name(), corpus.gen_questions.len()),
        (RecordKind::OraclePredictions.name(), corpus.oracle_predictions.len()),
        (RecordKind::GenAnnotations.name(), corpus.gen_annotations.len()),
    ]);
    let mut t = Table::new(["records", "count"]);
    for (k, n) in &counts {
        t.row([k.to_string(), n.to_string()]);
    }
    let mut text = t.render();
    for viol in &v.violations {
        text.push_str(&format!("violation: {} {} {}: {}\n", viol.record_kind, viol.kind, viol.key, viol.detail));
    }
    text.push_str(&format!(
        "{} violations, {} warnings\n",
        v.violations.len(),
        v.warnings.len()
    ));
    ctx.print(&text)?;
    if let Some(p) = &a.out {
        write_json(
            p,
            &IngestReport {
                counts,
                clean: v.clean,
                violations: &v.violations,
                warnings: &v.warnings,
            },
        )?;
    }
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let f = |k| dir.join(Corpus::file_name(k));
        write_records(&f(RecordKind::Instances), &corpus.instances)?;
        for (kind, empty) in [
            (RecordKind::ModelOutputs, corpus.outputs.is_empty()),
            (RecordKind::Annotations, corpus.annotations.is_empty()),
            (RecordKind::PropertyAnnotations, corpus.properties.is_empty()),
            (RecordKind::GenQuestions, corpus.gen_questions.is_empty()),
            (RecordKind::OraclePredictions, corpus.oracle_predictions.is_empty()),
            (RecordKind::GenAnnotations, corpus.gen_annotations.is_empty()),
        ] {
            if empty {
                continue;
            }
            match kind {
                RecordKind::ModelOutputs => write_records(&f(kind), &corpus.outputs)?,
                RecordKind::Annotations => write_records(&f(kind), &corpus.annotations)?,
                RecordKind::PropertyAnnotations => write_records(&f(kind), &corpus.properties)?,
                RecordKind::GenQuestions => write_records(&f(kind), &corpus.gen_questions)?,
                RecordKind::OraclePredictions => write_records(&f(kind), &corpus.oracle_predictions)?,
                RecordKind::GenAnnotations => write_records(&f(kind), &corpus.gen_annotations)?,
                RecordKind::Instances => {}
            }
        }
    }
    if v.clean {
        Ok(())
    } else {
        Err(CliError::Domain(format!("corpus has {} violations", v.violations.len())))
    }
}

fn utility(ctx: &mut Ctx<'_>, a: UtilityArgs) -> Result<(), CliError> {
    let (_, _, cl) = ctx.classified(&a.corpus)?;
    let dist = utility_distribution(&cl.pairs).map_err(utility_err)?;
    let mut text = render_distribution(&dist);
    if cl.excluded_missing_instance + cl.excluded_missing_output > 0 {
        text.push_str(&format!(
            "excluded annotations: {} without instance, {} without model output\n",
            cl.excluded_missing_instance, cl.excluded_missing_output
        ));
    }
    ctx.print(&text)?;
    if let Some(p) = &a.out {
        #[derive(Serialize)]
        struct Out<'a> {
            distribution: &'a [crate::utility::UtilityDistribution],
            #[serde(flatten)]
            classified: &'a Classified,
        }
        write_json(
            p,
            &Out {
                distribution: &dist,
                classified: &cl,
            },
        )?;
    }
    Ok(())
}

fn agreement(ctx: &mut Ctx<'_>, a: AgreementArgs) -> Result<(), CliError> {
    let annotations = ctx.optional(&a.corpus, RecordKind::Annotations)?;
    let properties = ctx.optional(&a.corpus, RecordKind::PropertyAnnotations)?;
    if annotations.is_empty() && properties.is_empty() {
        return Err(CliError::Config(
            "agreement needs --annotations or --properties".into(),
        ));
    }
    let rows = alpha_table(&annotations, &properties);
    let mut t = Table::new(["model", "field", "alpha"]);
    for r in &rows {
        t.row([
            r.model_id.clone(),
            r.field.clone(),
            r.alpha.map_or_else(|| format!("- ({})", r.error.as_deref().unwrap_or("")), |x| fmt_fixed(x, 3)),
        ]);
    }
    ctx.print(&t.render())?;
    if let Some(p) = &a.out {
        write_json(p, &rows)?;
    }
    Ok(())
}

fn correlate(ctx: &mut Ctx<'_>, a: CorrelateArgs) -> Result<(), CliError> {
    let (instances, outputs, cl) = ctx.classified(&a.corpus)?;
    if cl.pairs.is_empty() {
        return Err(domain(UtilityError::EmptyCorpus));
    }
    let rows = correlation_table(&cl.pairs, &outputs, &instances);
    ctx.print(&render_correlation(&rows))?;
    if let Some(p) = &a.out {
        write_json(p, &rows)?;
    }
    Ok(())
}

fn glmm_fit(ctx: &mut Ctx<'_>, a: GlmmFitArgs) -> Result<(), CliError> {
    let aggregation: Aggregation = a.aggregation.parse().map_err(CliError::Config)?;
    let instances: Vec<Instance> = ctx.require(&a.corpus, RecordKind::Instances)?;
    let annotations = ctx.require(&a.corpus, RecordKind::Annotations)?;
    let properties = ctx.require(&a.corpus, RecordKind::PropertyAnnotations)?;
    let built = build_design(&instances, &annotations, &properties, aggregation).map_err(domain)?;
    let design = if a.factors.is_empty() {
        built.design
    } else {
        let names: Vec<&str> = a.factors.iter().map(String::as_str).collect();
        built.design.with_factors(&names).map_err(domain)?
    };
    let fit = fit_glmm(&design, &ctx.cfg.glmm).map_err(domain)?;
    let marginal = marginal_table(&fit, &design).map_err(domain)?;
    let pairwise = top_pairwise(&fit, a.top).map_err(domain)?;
    let best = best_combinations(&fit, a.top).map_err(domain)?;

    let mut t = Table::new(["term", "estimate"]);
    for (n, b) in fit.column_names.iter().zip(&fit.beta) {
        t.row([n.clone(), fmt_fixed(*b, 4)]);
    }
    for (n, s) in fit.factor_names.iter().zip(&fit.sigma) {
        t.row([format!("sd({n})"), fmt_fixed(*s, 4)]);
    }
    let mut text = format!(
        "n = {}, dropped = {}, loglik = {}, converged = {}\n",
        fit.n_obs,
        built.dropped,
        fmt_fixed(fit.loglik, 4),
        fit.converged
    );
    text.push_str(&t.render());
    text.push_str("\nmarginal log odds\n");
    text.push_str(&render_marginal(&marginal));
    text.push_str("\ntop pairs\n");
    text.push_str(&render_combinations(fit.beta[0], &pairwise));
    text.push_str("\nbest combinations\n");
    text.push_str(&render_combinations(fit.beta[0], &best));
    ctx.print(&text)?;
    for w in fit.warnings.clone() {
        ctx.warn(&w);
    }
    if let Some(p) = &a.out {
        #[derive(Serialize)]
        struct Out<'a> {
            fit: &'a crate::glmm::FittedGlmm,
            dropped: usize,
            marginal: &'a [crate::glmm::MarginalRow],
            top_pairs: &'a [crate::glmm::CombinationRow],
            best_combinations: &'a [crate::glmm::CombinationRow],
        }
        write_json(
            p,
            &Out {
                fit: &fit,
                dropped: built.dropped,
                marginal: &marginal,
                top_pairs: &pairwise,
                best_combinations: &best,
            },
        )?;
    }
    if !fit.converged {
        ctx.warn("optimizer stopped before converging");
    }
    Ok(())
}

#[derive(Serialize)]
struct PromptLine<'a> {
    instance_id: &'a str,
    gen_type: GenType,
    prompt: String,
}

fn genq_build(ctx: &mut Ctx<'_>, a: GenqBuildArgs) -> Result<(), CliError> {
    let instances: Vec<Instance> = ctx.require(&a.corpus, RecordKind::Instances)?;
    let types = gen_types(&a.gen_types)?;
    let templates: Vec<GenTemplate> = types.iter().map(|&g| ctx.gen_template(g)).collect::<Result<_, _>>()?;
    let mut lines = Vec::new();
    for inst in instances.iter().filter(|i| a.instance_id.as_ref().is_none_or(|id| &i.id == id)) {
        for t in &templates {
            match build_genq_prompt(inst, t) {
                Ok(prompt) => lines.push(PromptLine {
                    instance_id: &inst.id,
                    gen_type: t.gen_type,
                    prompt,
                }),
                Err(e) => ctx.warn(&format!("{} {}: {e}", inst.id, t.gen_type.as_str())),
            }
        }
    }
    if lines.is_empty() {
        return Err(CliError::Domain("no prompts built".into()));
    }
    let mut text = String::new();
    for l in &lines {
        text.push_str(&format!("### {} {}\n{}\n\n", l.instance_id, l.gen_type.as_str(), l.prompt));
    }
    ctx.print(&text)?;
    if let Some(p) = &a.out {
        write_records(p, &lines)?;
    }
    Ok(())
}

fn genq_parse(ctx: &mut Ctx<'_>, a: GenqParseArgs) -> Result<(), CliError> {
    let instances: Vec<Instance> = ctx.require(&a.corpus, RecordKind::Instances)?;
    let audits: Vec<AuditRecord> = read_jsonl(&a.audit)?;
    let idx: BTreeMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut candidates = Vec::new();
    let mut rejects = Vec::new();
    let mut duplicates = 0;
    for au in &audits {
        let parent = idx
            .get(au.instance_id.as_str())
            .ok_or_else(|| CliError::Domain(format!("audit line for unknown instance {}", au.instance_id)))?;
        let parsed = parse_audit(au, parent);
        duplicates += parsed.duplicates;
        candidates.extend(parsed.candidates);
        rejects.extend(parsed.rejects.into_iter().map(|r| (au.instance_id.clone(), au.gen_type, r)));
    }
    ctx.print(&format!(
        "{} candidates, {} rejected, {} duplicates\n",
        candidates.len(),
        rejects.len(),
        duplicates
    ))?;
    if let Some(p) = &a.out {
        write_records(p, &candidates)?;
    }
    if let Some(p) = &a.rejects_out {
        #[derive(Serialize)]
        struct Rej<'a> {
            instance_id: &'a str,
            gen_type: GenType,
            #[serde(flatten)]
            reject: &'a crate::prompts::RejectedCompletion,
        }
        let rows: Vec<Rej> = rejects
            .iter()
            .map(|(i, g, r)| Rej {
                instance_id: i,
                gen_type: *g,
                reject: r,
            })
            .collect();
        write_records(p, &rows)?;
    }
    Ok(())
}

fn genq_generate(ctx: &mut Ctx<'_>, a: GenqGenerateArgs) -> Result<(), CliError> {
    let seed = a
        .seed
        .or(ctx.cfg.seeds.genq)
        .ok_or_else(|| CliError::Config("genq generate needs --seed or seeds.genq".into()))?;
    let instances: Vec<Instance> = ctx.require(&a.corpus, RecordKind::Instances)?;
    let types = gen_types(&a.gen_types)?;
    let templates: Vec<GenTemplate> = types.iter().map(|&g| ctx.gen_template(g)).collect::<Result<_, _>>()?;
    let oracle = ctx.oracle("generator")?;
    let mut gcfg = ctx.cfg.generation.clone();
    gcfg.seed = Some(seed);
    let jobs: Vec<(&Instance, &GenTemplate)> =
        instances.iter().flat_map(|i| templates.iter().map(move |t| (i, t))).collect();
    let results = generate_many(&jobs, &oracle, &gcfg, ctx.jobs);
    let mut candidates = Vec::new();
    let mut audits = Vec::new();
    for ((inst, t), r) in jobs.iter().zip(results) {
        match r {
            Ok(o) => {
                for w in &o.warnings {
                    ctx.warn(w);
                }
                candidates.extend(o.parsed.candidates);
                audits.push(o.audit);
            }
            Err(e @ (PromptError::EmptyQuestion(_) | PromptError::MissingContext(_))) => {
                ctx.warn(&format!("{} {}: {e}", inst.id, t.gen_type.as_str()))
            }
            Err(e) => return Err(prompt_err(e)),
        }
    }
    ctx.print(&format!("{} candidates from {} requests\n", candidates.len(), audits.len()))?;
    if let Some(p) = &a.out {
        write_records(p, &candidates)?;
    }
    if let Some(p) = &a.audit_out {
        write_records(p, &audits)?;
    }
    Ok(())
}

fn genq_validate(ctx: &mut Ctx<'_>, a: GenqValidateArgs) -> Result<(), CliError> {
    let candidates: Vec<GenCandidate> = read_jsonl(&a.candidates)?;
    let verdicts: Vec<Verdict> = read_jsonl(&a.verdicts)?;
    let mut by: BTreeMap<&str, Vec<Verdict>> = BTreeMap::new();
    for v in &verdicts {
        by.entry(v.candidate_id.as_str()).or_default().push(v.clone());
    }
    let pool = ctx.cfg.pools.validator_pool_size;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for c in &candidates {
        let vs = by.remove(c.id.as_str()).unwrap_or_default();
        if !vs.is_empty() && vs.len() != pool {
            ctx.warn(&format!("{} has {} verdicts, expected {pool}", c.id, vs.len()));
        }
        match record_validation(c, &vs) {
            Ok(q) => accepted.push(q),
            Err(r) => rejected.push((c.id.clone(), r)),
        }
    }
    for id in by.keys() {
        ctx.warn(&format!("verdicts for unknown candidate {id}"));
    }
    ctx.print(&format!("{} accepted, {} rejected\n", accepted.len(), rejected.len()))?;
    if let Some(p) = &a.out {
        write_records(p, &accepted)?;
    }
    if let Some(p) = &a.rejections_out {
        #[derive(Serialize)]
        struct Rej<'a> {
            candidate_id: &'a str,
            #[serde(flatten)]
            rejection: &'a crate::prompts::ValidationRejection,
        }
        let rows: Vec<Rej> = rejected
            .iter()
            .map(|(c, r)| Rej {
                candidate_id: c,
                rejection: r,
            })
            .collect();
        write_records(p, &rows)?;
    }
    Ok(())
}

fn genu_score(ctx: &mut Ctx<'_>, a: GenuScoreArgs) -> Result<(), CliError> {
    let c = &a.corpus;
    let instances: Vec<Instance> = ctx.require(c, RecordKind::Instances)?;
    let outputs = ctx.require(c, RecordKind::ModelOutputs)?;
    let gen_questions = ctx.require(c, RecordKind::GenQuestions)?;
    let template = ctx.rationalization(a.template.as_deref())?;
    let cfg = GenuConfig {
        model_id: a.model_id.clone(),
        template,
    };
    let predictions = if a.live {
        None
    } else {
        ctx.path(c, RecordKind::OraclePredictions)?
            .map(|p| read_jsonl(&p))
            .transpose()?
    };
    let result = match &predictions {
        Some(p) => score_corpus(&instances, &outputs, &gen_questions, &PredictionSource::Offline(p), &cfg),
        None => {
            let (oi, oir) = match (ctx.oracle("i"), ctx.oracle("ir")) {
                (Ok(i), Ok(ir)) => (i, ir),
                (Err(e), _) | (_, Err(e)) => {
                    return Err(CliError::Config(format!("no predictions file and no live oracles: {e}")))
                }
            };
            let src = PredictionSource::Live {
                oracle_i: &oi,
                oracle_ir: &oir,
                max_in_flight: ctx.jobs,
            };
            score_corpus(&instances, &outputs, &gen_questions, &src, &cfg)
        }
    };
    let report = match result {
        Ok(r) => r,
        Err(GenuError::Oracle {
            gen_question_id,
            error,
            partial,
        }) => {
            if let Some(p) = &a.out {
                write_records(p, &partial.results)?;
            }
            if let Some(p) = &a.predictions_out {
                write_records(p, &partial.predictions)?;
            }
            let code: CliError = error.clone().into();
            let msg = format!(
                "oracle failed on {gen_question_id} after scoring {} instances: {error}",
                partial.results.len()
            );
            return Err(match code {
                CliError::Io(_) => CliError::Io(msg),
                CliError::Config(_) => CliError::Config(msg),
                CliError::Domain(_) => CliError::Domain(msg),
            });
        }
        Err(e) => return Err(domain(e)),
    };
    ctx.print(&render_genu(&report))?;
    if let Some(p) = &a.out {
        write_records(p, &report.results)?;
    }
    if let Some(p) = &a.predictions_out {
        write_records(p, &report.predictions)?;
    }
    Ok(())
}

fn genu_correlate(ctx: &mut Ctx<'_>, a: GenuCorrelateArgs) -> Result<(), CliError> {
    let results: Vec<GenUResult> = read_jsonl(&a.genu)?;
    let (_, _, cl) = ctx.classified(&a.corpus)?;
    let labels = utility_labels(&cl.pairs);
    let c = correlate_genu_with_utility(&results, &labels).map_err(domain)?;
    ctx.print(&format!("U(utility | GEN-U) = {} over {} pairs\n", fmt_fixed(c.u, 4), c.n))?;
    if let Some(p) = &a.out {
        write_json(p, &c)?;
    }
    Ok(())
}

fn parse_filter(s: &str, pool: &Pool) -> Result<i8, CliError> {
    match s {
        "pos" | "1" | "+1" => Ok(1),
        "zero" | "0" => Ok(0),
        "neg" | "-1" => Ok(-1),
        t => pool.tokens.value(t).map_err(|e| CliError::Config(e.to_string())),
    }
}

fn pool_bin(ctx: &mut Ctx<'_>, a: PoolBinArgs) -> Result<(), CliError> {
    let pool = Pool::new(ctx.cfg.pool.control_tokens.clone()).map_err(pool_err)?;
    if let Some(s) = a.score {
        let b = bin_reward(s, &pool.tokens).map_err(pool_err)?;
        return ctx.print(&b.control_token);
    }
    let Some(path) = &a.genu else {
        let mut t = Table::new(["genu", "token"]);
        for v in [1i8, 0, -1] {
            t.row([v.to_string(), pool.tokens.token(v).map_err(pool_err)?.to_string()]);
        }
        return ctx.print(&t.render());
    };
    let out = a
        .out
        .as_ref()
        .ok_or_else(|| CliError::Config("pool bin --genu needs --out".into()))?;
    let results: Vec<GenUResult> = read_jsonl(path)?;
    let outputs: Vec<crate::corpus::ModelOutput> = ctx.require(&a.corpus, RecordKind::ModelOutputs)?;
    let template = ctx.rationalization(a.template.as_deref())?;
    let instances: Vec<Instance> = if template.is_some() {
        ctx.require(&a.corpus, RecordKind::Instances)?
    } else {
        Vec::new()
    };
    let inst: BTreeMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let outs: BTreeMap<(&str, &str), &crate::corpus::ModelOutput> = outputs
        .iter()
        .map(|o| ((o.instance_id.as_str(), o.model_id.as_str()), o))
        .collect();
    let mut pool = pool;
    for r in &results {
        let o = outs
            .get(&(r.instance_id.as_str(), r.model_id.as_str()))
            .ok_or_else(|| CliError::Domain(format!("no model output for {} / {}", r.instance_id, r.model_id)))?;
        let sample = match &template {
            Some(t) => {
                let i = inst
                    .get(r.instance_id.as_str())
                    .ok_or_else(|| CliError::Domain(format!("unknown instance {}", r.instance_id)))?;
                t.render(i, Some(&o.predicted_label), Some(&o.rationale)).target
            }
            None => o.rationale.clone(),
        };
        let e = pool.entry(&r.instance_id, &sample, r.genu, a.step).map_err(pool_err)?;
        pool.entries.push(e);
    }
    pool.save(out).map_err(pool_err)?;
    let count = |v: i8| pool.entries.iter().filter(|e| e.genu == v).count();
    ctx.print(&format!(
        "{} entries: {} pos, {} zero, {} neg\n",
        pool.len(),
        count(1),
        count(0),
        count(-1)
    ))
}

fn manifest(ctx: &Ctx<'_>, exploration: crate::quarkpool::ExplorationConfig) -> RunManifest {
    let mut m = RunManifest::new(exploration, ctx.cfg.pool.control_tokens.clone());
    m.token_side = ctx.cfg.pool.token_side;
    for (role, ep) in [
        ("generator", &ctx.cfg.oracle.generator),
        ("oracle_i", &ctx.cfg.oracle.i),
        ("oracle_ir", &ctx.cfg.oracle.ir),
    ] {
        if let Some(ep) = ep {
            m.models
                .insert(role.to_string(), ep.model.clone().unwrap_or_else(|| ep.base_url.clone()));
        }
    }
    m
}

fn pool_explore(ctx: &mut Ctx<'_>, a: PoolExploreArgs) -> Result<(), CliError> {
    let seed = a
        .seed
        .or(ctx.cfg.seeds.exploration)
        .ok_or_else(|| CliError::Config("pool explore needs --seed or seeds.exploration".into()))?;
    let mut ecfg = ctx.cfg.exploration.clone();
    ecfg.seed = seed;
    ecfg.validate().map_err(pool_err)?;
    let tokens = ctx.cfg.pool.control_tokens.clone();
    let mut pool = match &a.pool {
        Some(p) => Pool::load(p, tokens).map_err(pool_err)?,
        None => Pool::new(tokens).map_err(pool_err)?,
    };
    if !a.force && !exploration_due(a.step, &ecfg) {
        pool.save(&a.out).map_err(pool_err)?;
        return ctx.print(&format!(
            "step {}: exploration not due (every {} steps); pool unchanged at {} entries\n",
            a.step,
            ecfg.interval_steps,
            pool.len()
        ));
    }
    let instances: Vec<Instance> = ctx.require(&a.corpus, RecordKind::Instances)?;
    let gen_questions = ctx.require(&a.corpus, RecordKind::GenQuestions)?;
    let template = ctx.rationalization(a.template.as_deref())?;
    let generator = ctx.oracle("generator")?;
    let oi = ctx.oracle("i")?;
    let oir = ctx.oracle("ir")?;
    let reward = GenuReward::new(&gen_questions, &oi, &oir, template.as_ref());
    let opts = ExploreOptions {
        step: a.step,
        max_in_flight: ctx.jobs,
        template: template.as_ref(),
    };
    let added = explore(&mut pool, &instances, &generator, &reward, &ecfg, opts).map_err(pool_err)?;
    pool.save(&a.out).map_err(pool_err)?;
    if let Some(p) = &a.manifest_out {
        manifest(ctx, ecfg).write(p).map_err(pool_err)?;
    }
    ctx.print(&format!("step {}: added {added} entries, pool has {}\n", a.step, pool.len()))
}

fn pool_emit(ctx: &mut Ctx<'_>, a: PoolEmitArgs) -> Result<(), CliError> {
    let pool = Pool::load(&a.pool, ctx.cfg.pool.control_tokens.clone()).map_err(pool_err)?;
    let instances: Vec<Instance> = ctx.require(&a.corpus, RecordKind::Instances)?;
    let template = ctx.rationalization(a.template.as_deref())?;
    let filter = a.filter.as_deref().map(|f| parse_filter(f, &pool)).transpose()?;
    let n = emit_training_file(&pool, &instances, template.as_ref(), ctx.cfg.pool.token_side, filter, &a.out)
        .map_err(pool_err)?;
    if let Some(p) = &a.manifest_out {
        manifest(ctx, ctx.cfg.exploration.clone()).write(p).map_err(pool_err)?;
    }
    ctx.print(&format!("wrote {n} training lines\n"))
}

fn report(ctx: &mut Ctx<'_>, a: ReportArgs) -> Result<(), CliError> {
    let c = &a.corpus;
    let (instances, outputs, cl) = ctx.classified(c)?;
    let dist = utility_distribution(&cl.pairs).map_err(utility_err)?;
    let annotations = ctx.require(c, RecordKind::Annotations)?;
    let properties = ctx.optional(c, RecordKind::PropertyAnnotations)?;
    let alpha = alpha_table(&annotations, &properties);
    let corr = correlation_table(&cl.pairs, &outputs, &instances);
    let gen_annotations: Vec<crate::corpus::GenAnnotationRecord> = ctx.optional(c, RecordKind::GenAnnotations)?;
    let gen_questions: Vec<crate::corpus::GenQuestion> = ctx.optional(c, RecordKind::GenQuestions)?;
    let labels = utility_labels(&cl.pairs);
    let generalization = if gen_annotations.is_empty() {
        None
    } else {
        Some(generalization_accuracy_report(&gen_annotations, &labels, &gen_questions, &instances).map_err(utility_err)?)
    };
    let genu = match (&a.model_id, ctx.path(c, RecordKind::OraclePredictions)?) {
        (Some(m), Some(p)) => {
            let preds = read_jsonl(&p)?;
            let cfg = GenuConfig {
                model_id: m.clone(),
                template: None,
            };
            Some(score_corpus(&instances, &outputs, &gen_questions, &PredictionSource::Offline(&preds), &cfg).map_err(domain)?)
        }
        _ => None,
    };

    let mut text = String::from("## utility\n");
    text.push_str(&render_distribution(&dist));
    text.push_str("\n## agreement\n");
    let mut t = Table::new(["model", "field", "alpha"]);
    for r in &alpha {
        t.row([r.model_id.clone(), r.field.clone(), r.alpha.map_or_else(|| "-".into(), |x| fmt_fixed(x, 3))]);
    }
    text.push_str(&t.render());
    text.push_str("\n## correlation\n");
    text.push_str(&render_correlation(&corr));
    if let Some(g) = &generalization {
        text.push_str("\n## generalization\n");
        text.push_str(&render_generalization(g));
    }
    if let Some(g) = &genu {
        text.push_str("\n## gen-u\n");
        text.push_str(&render_genu(g));
    }
    ctx.print(&text)?;
    if let Some(p) = &a.out {
        #[derive(Serialize)]
        struct Out<'a> {
            utility: &'a [crate::utility::UtilityDistribution],
            agreement: &'a [crate::agreement::AlphaRow],
            correlation: &'a [crate::assoc::CorrelationRow],
            generalization: Option<&'a crate::utility::GeneralizationReport>,
            genu: Option<&'a crate::genu::GenuReport>,
        }
        write_json(
            p,
            &Out {
                utility: &dist,
                agreement: &alpha,
                correlation: &corr,
                generalization: generalization.as_ref(),
                genu: genu.as_ref(),
            },
        )?;
    }
    Ok(())
}
