//! Run configuration, stage commands, and the run manifest.
//!
//! One declarative config file drives every stage; `${VAR}` in string values
//! interpolates environment variables so secrets stay out of the file, and
//! relative paths resolve against the config file's directory. Stages write
//! deterministic files under the output directory and append to a manifest
//! whose counts must reconcile.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assess::{
    AssessError, AssessmentResult, Assessor, FilterOutcome, FilterPolicy, filter_records,
};
use crate::dataset::{DatasetError, SubsetManifest, SubsetName, build_subset, export_jsonl};
use crate::eval::consistency::{ConsistencyReport, StdMode, consistency};
use crate::eval::dimensional::{dimensional_report, dimensional_scores, load_transcripts};
use crate::eval::fidelity::{
    FidelityError, FidelityOptions, per_round_dimension_scores, personality_fidelity_run,
};
use crate::eval::mcq::{load_mcq, mr_accuracy};
use crate::eval::rouge::rouge_report;
use crate::eval::winrate::{load_items, win_rate};
use crate::gateway::{
    Backend, Gateway, GatewayStats, HttpBackend, MockBackend, ResponseCache, RetryPolicy,
};
use crate::interview::{
    InterviewError, InterviewRecord, Interviewer, MULTI_TURNS, ScreenedQuestions,
    SuitabilityVerdict,
};
use crate::jsonv::Cursor;
use crate::registry::{CharacterProfile, Registry, RegistryError};
use crate::scales::{BankError, Question, QuestionMode, Scale, ScaleBank};
use crate::template::{TemplateError, TemplateSet};
use crate::util::{csv_field, now_unix, par_map, sha256_hex, write_atomic};

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bank_path: PathBuf,
    pub registry_path: PathBuf,
    pub out_dir: PathBuf,
    pub gateway: GatewayConfig,
    #[serde(default = "default_subsets")]
    pub subsets: Vec<SubsetName>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_filter_policy")]
    pub filter_policy: FilterPolicy,
    /// Multi-turn interviews per (character, scale).
    #[serde(default = "default_multi_rounds")]
    pub multi_rounds: u32,
    #[serde(default = "default_memory_k")]
    pub memory_k: usize,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
    #[serde(default)]
    pub models: ModelAliases,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_retry_attempts")]
    pub retry_max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Sampling temperature for dataset generation; judging is pinned to 0.
    #[serde(default = "default_generation_temperature")]
    pub generation_temperature: f64,
    /// Optional prices per million tokens, for the manifest's cost estimate.
    #[serde(default)]
    pub price_per_mtok_prompt: f64,
    #[serde(default)]
    pub price_per_mtok_completion: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelAliases {
    pub generator: String,
    pub judge: String,
    pub subject: String,
}

impl Default for ModelAliases {
    fn default() -> Self {
        ModelAliases {
            generator: "gpt-3.5-turbo".into(),
            judge: "gpt-3.5-turbo".into(),
            subject: "gpt-3.5-turbo".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub mcq_path: Option<PathBuf>,
    #[serde(default)]
    pub rouge_pairs_path: Option<PathBuf>,
    #[serde(default)]
    pub winrate_items_path: Option<PathBuf>,
    #[serde(default)]
    pub transcripts_path: Option<PathBuf>,
    /// Average dimension-match ratios per result instead of pooling.
    #[serde(default)]
    pub per_character_averaging: bool,
    /// Use the sample (n-1) estimator for consistency.
    #[serde(default)]
    pub sample_std: bool,
    /// Scales for the consistency protocol; defaults to Part scales with
    /// enough dimensions for a multi-turn interview.
    #[serde(default)]
    pub consistency_scales: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Pf,
    Mr,
    Rouge,
    Winrate,
    Dims,
    Consistency,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Pf,
        Metric::Mr,
        Metric::Rouge,
        Metric::Winrate,
        Metric::Dims,
        Metric::Consistency,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Pf => "pf",
            Metric::Mr => "mr",
            Metric::Rouge => "rouge",
            Metric::Winrate => "winrate",
            Metric::Dims => "dims",
            Metric::Consistency => "consistency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

fn default_subsets() -> Vec<SubsetName> {
    SubsetName::ALL.to_vec()
}
fn default_filter_policy() -> FilterPolicy {
    FilterPolicy::PerDimension
}
fn default_multi_rounds() -> u32 {
    1
}
fn default_memory_k() -> usize {
    3
}
fn default_api_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_concurrency() -> usize {
    4
}
fn default_retry_attempts() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_generation_temperature() -> f64 {
    0.7
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    MissingFile(PathBuf),
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("environment variable `{0}` referenced by the config is not set")]
    MissingEnv(String),
    #[error("config: {0}")]
    Invalid(String),
    #[error("config path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Replace `${VAR}` in every string value with the environment variable.
fn interpolate_env(value: &mut Value) -> Result<(), ConfigError> {
    match value {
        Value::String(s) => {
            while let Some(start) = s.find("${") {
                let Some(rel_end) = s[start..].find('}') else {
                    return Err(ConfigError::Invalid(format!("unclosed ${{...}} in `{s}`")));
                };
                let end = start + rel_end;
                let var = &s[start + 2..end];
                let replacement =
                    std::env::var(var).map_err(|_| ConfigError::MissingEnv(var.to_string()))?;
                s.replace_range(start..=end, &replacement);
            }
            Ok(())
        }
        Value::Array(items) => items.iter_mut().try_for_each(interpolate_env),
        Value::Object(map) => map.values_mut().try_for_each(interpolate_env),
        _ => Ok(()),
    }
}

impl RunConfig {
    /// Load, interpolate environment variables, resolve relative paths
    /// against the config file's directory, and validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(ConfigError::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let mut value: Value = serde_json::from_str(&text)?;
        interpolate_env(&mut value)?;
        let mut config: RunConfig = serde_json::from_value(value)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.bank_path);
        resolve(&mut self.registry_path);
        resolve(&mut self.out_dir);
        if let Some(p) = self.gateway.mock_script.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.gateway.cache_dir.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.templates_dir.as_mut() {
            resolve(p);
        }
        for p in [
            self.eval.mcq_path.as_mut(),
            self.eval.rouge_pairs_path.as_mut(),
            self.eval.winrate_items_path.as_mut(),
            self.eval.transcripts_path.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.gateway.endpoint_url, &self.gateway.mock_script) {
            (None, None) => {
                return Err(ConfigError::Invalid(
                    "gateway needs endpoint_url or mock_script".into(),
                ));
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "endpoint_url and mock_script are mutually exclusive; mock mode must \
                     never touch the network"
                        .into(),
                ));
            }
            _ => {}
        }
        if self.gateway.concurrency == 0 {
            return Err(ConfigError::Invalid(
                "gateway.concurrency must be at least 1".into(),
            ));
        }
        for path in [&self.bank_path, &self.registry_path] {
            if !path.exists() {
                return Err(ConfigError::MissingPath(path.clone()));
            }
        }
        if let Some(script) = &self.gateway.mock_script
            && !script.exists()
        {
            return Err(ConfigError::MissingPath(script.clone()));
        }
        let randomized = self.subsets.contains(&SubsetName::PartMulti);
        if randomized && self.seed.is_none() {
            return Err(ConfigError::Invalid(
                "multi-turn generation randomizes question choice; set `seed`".into(),
            ));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        sha256_hex(&[text.as_bytes()])
    }

    pub fn mock_mode(&self) -> bool {
        self.gateway.mock_script.is_some()
    }

    pub fn build_gateway(&self) -> Result<Gateway, ConfigError> {
        let backend: Box<dyn Backend> =
            match (&self.gateway.mock_script, &self.gateway.endpoint_url) {
                (Some(script), None) => Box::new(
                    MockBackend::from_script(script)
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?,
                ),
                (None, Some(url)) => {
                    let api_key = std::env::var(&self.gateway.api_key_env).ok();
                    if api_key.is_none() {
                        log::warn!(
                            "env var `{}` not set; calling {url} without credentials",
                            self.gateway.api_key_env
                        );
                    }
                    Box::new(HttpBackend::new(
                        url.clone(),
                        api_key,
                        Duration::from_millis(self.gateway.timeout_ms),
                    ))
                }
                _ => unreachable!("validate() enforces exactly one backend"),
            };
        let mut gateway = Gateway::new(backend)
            .with_retry(RetryPolicy {
                max_attempts: self.gateway.retry_max_attempts.max(1),
                backoff_base: Duration::from_millis(self.gateway.backoff_base_ms),
            })
            .with_concurrency_limit(self.gateway.concurrency);
        if let Some(dir) = &self.gateway.cache_dir {
            gateway = gateway.with_cache(ResponseCache::new(dir));
        }
        Ok(gateway)
    }

    pub fn templates(&self) -> Result<TemplateSet, TemplateError> {
        match &self.templates_dir {
            Some(dir) => TemplateSet::with_overrides(dir),
            None => Ok(TemplateSet::embedded()),
        }
    }
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    /// Interview slots planned: every (character, suitable-or-not question)
    /// single slot plus every (character, scale, round) multi slot.
    pub generated: u64,
    /// Slots dropped by the suitability screen (including multi slots skipped
    /// for lacking five suitable dimensions).
    pub suitability_excluded: u64,
    /// Slots that errored (gateway failures, empty responses).
    pub failed: u64,
    /// Records emitted to the interview store.
    pub emitted: u64,
    /// Records discarded by the filtering mechanism.
    pub filtered_out: u64,
    /// Records kept after filtering.
    pub kept: u64,
    /// Kept records that landed in at least one exported subset.
    pub exported: u64,
    /// Kept records no requested subset wanted (0 under the default subsets).
    pub kept_unexported: u64,
}

impl StageCounts {
    /// The reconciliation identity:
    /// generated = exported + excluded + filtered + failed + kept_unexported.
    pub fn reconciles(&self, through_export: bool) -> bool {
        let base = self.generated == self.suitability_excluded + self.failed + self.emitted;
        let filter_ok = self.emitted == self.filtered_out + self.kept;
        let export_ok = self.kept == self.exported + self.kept_unexported;
        match through_export {
            true => base && filter_ok && export_ok,
            false => base,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GatewayTally {
    pub calls: u64,
    pub cache_hits: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub estimated_cost: f64,
}

impl GatewayTally {
    fn add(&mut self, stats: GatewayStats, cfg: &GatewayConfig) {
        self.calls += stats.calls;
        self.cache_hits += stats.cache_hits;
        self.prompt_tokens += stats.prompt_tokens;
        self.completion_tokens += stats.completion_tokens;
        self.estimated_cost += stats.prompt_tokens as f64 / 1e6 * cfg.price_per_mtok_prompt
            + stats.completion_tokens as f64 / 1e6 * cfg.price_per_mtok_completion;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageInfo {
    pub completed_at_unix: u64,
    pub wall_clock_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub counts: StageCounts,
    pub gateway: GatewayTally,
    pub stages: BTreeMap<String, StageInfo>,
}

impl RunManifest {
    pub fn path(out_dir: &Path) -> PathBuf {
        out_dir.join("manifest.json")
    }

    pub fn load_or_default(out_dir: &Path) -> Self {
        std::fs::read_to_string(Self::path(out_dir))
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default()
    }

    pub fn save(&self, out_dir: &Path) -> std::io::Result<()> {
        let bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        write_atomic(&Self::path(out_dir), &bytes)
    }

    fn record_stage(&mut self, name: &str, started: Instant) {
        self.stages.insert(
            name.to_string(),
            StageInfo {
                completed_at_unix: now_unix(),
                wall_clock_ms: started.elapsed().as_millis() as u64,
            },
        );
    }
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("interview store missing at {0}; run `generate` first")]
    MissingStore(PathBuf),
    #[error("kept-set missing at {0}; run `filter` first")]
    MissingKeptSet(PathBuf),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Assess(#[from] AssessError),
    #[error(transparent)]
    Interview(#[from] InterviewError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("manifest does not reconcile: {0}")]
    Reconciliation(String),
}

impl PipelineError {
    /// Process exit code: 2 config, 4 hard failure. (Partial failures exit 3
    /// at the CLI from stage outcomes, not from errors.)
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 4,
        }
    }
}

// ---------------------------------------------------------------------------
// Stage files

pub fn interviews_path(out_dir: &Path) -> PathBuf {
    out_dir.join("interviews.jsonl")
}
pub fn verdicts_path(out_dir: &Path) -> PathBuf {
    out_dir.join("verdicts.json")
}
pub fn assessments_path(out_dir: &Path) -> PathBuf {
    out_dir.join("assessments.json")
}
pub fn outcomes_path(out_dir: &Path) -> PathBuf {
    out_dir.join("outcomes.json")
}
pub fn kept_path(out_dir: &Path) -> PathBuf {
    out_dir.join("kept.jsonl")
}
pub fn subset_path(out_dir: &Path, name: SubsetName) -> PathBuf {
    out_dir
        .join("subsets")
        .join(format!("{}.jsonl", name.as_str()))
}
pub fn subset_manifest_path(out_dir: &Path, name: SubsetName) -> PathBuf {
    out_dir
        .join("subsets")
        .join(format!("{}.manifest.json", name.as_str()))
}
pub fn report_path(out_dir: &Path, metric: Metric) -> PathBuf {
    out_dir
        .join("reports")
        .join(format!("{}.json", metric.as_str()))
}

fn write_records_jsonl(path: &Path, records: &[InterviewRecord]) -> Result<(), PipelineError> {
    let mut sorted: Vec<&InterviewRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut bytes = Vec::new();
    for r in sorted {
        bytes.extend_from_slice(serde_json::to_string(r)?.as_bytes());
        bytes.push(b'\n');
    }
    write_atomic(path, &bytes)?;
    Ok(())
}

fn read_records_jsonl(path: &Path) -> Result<Vec<InterviewRecord>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines() {
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(line)?);
        }
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// generate

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerateOutcome {
    pub generated: u64,
    pub suitability_excluded: u64,
    pub failed: u64,
    pub emitted: u64,
    pub failures: Vec<String>,
}

struct CharacterPlan<'a> {
    profile: &'a CharacterProfile,
    single_questions: Vec<&'a Question>,
    multi_scales: Vec<&'a Scale>,
}

/// Screen suitability, run single and multi interviews per the configured
/// subsets, and write the interview store. Individual slot failures are
/// recorded, not fatal; the CLI exits 3 when any slot failed.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateOutcome, PipelineError> {
    let started = Instant::now();
    let bank = ScaleBank::load(&config.bank_path)?;
    let registry = Registry::load(&config.registry_path)?;
    registry.validate_labels(&bank)?;
    let templates = config.templates()?;
    let gateway = config.build_gateway()?;

    let want_full_single = config.subsets.contains(&SubsetName::FullSingle);
    let want_part_single = config.subsets.contains(&SubsetName::PartSingle);
    let want_multi = config.subsets.contains(&SubsetName::PartMulti);

    let single_pool: Vec<&Question> = if want_full_single {
        bank.select_questions(QuestionMode::Full)?
    } else if want_part_single {
        bank.select_questions(QuestionMode::Part)?
    } else {
        Vec::new()
    };
    let multi_scales: Vec<&Scale> = if want_multi {
        bank.select_questions(QuestionMode::Part)?; // surfaces EmptyPartSubset early
        bank.scales()
            .filter(|s| bank.is_part_scale(&s.id) && s.dimensions.len() >= MULTI_TURNS)
            .collect()
    } else {
        Vec::new()
    };

    let (train, _) = registry.split();
    let plans: Vec<CharacterPlan> = train
        .into_iter()
        .map(|profile| CharacterPlan {
            profile,
            single_questions: single_pool.clone(),
            multi_scales: multi_scales.clone(),
        })
        .collect();

    let seed = config.seed.unwrap_or(0);
    let multi_rounds = config.multi_rounds;
    let memory_k = config.memory_k;

    struct CharacterOutcome {
        records: Vec<InterviewRecord>,
        verdicts: Vec<SuitabilityVerdict>,
        generated: u64,
        excluded: u64,
        failed: u64,
        failures: Vec<String>,
    }

    let outcomes: Vec<Result<CharacterOutcome, PipelineError>> =
        par_map(plans, config.gateway.concurrency, |plan| {
            let mut iv = Interviewer::new(
                &gateway,
                &templates,
                config.gateway.models.generator.clone(),
                config.gateway.models.judge.clone(),
            );
            iv.memory_k = memory_k;
            iv.temperature = config.gateway.generation_temperature;

            // Union of questions needing a suitability verdict.
            let mut to_screen: BTreeMap<&str, &Question> = BTreeMap::new();
            for q in &plan.single_questions {
                to_screen.insert(q.id.as_str(), q);
            }
            for scale in &plan.multi_scales {
                for q in &scale.questions {
                    to_screen.insert(q.id.as_str(), q);
                }
            }
            let questions: Vec<&Question> = to_screen.values().copied().collect();
            let screened: ScreenedQuestions = iv.screen(plan.profile, &questions)?;

            let mut outcome = CharacterOutcome {
                records: Vec::new(),
                verdicts: screened.verdicts.values().cloned().collect(),
                generated: 0,
                excluded: 0,
                failed: 0,
                failures: Vec::new(),
            };

            for question in &plan.single_questions {
                outcome.generated += 1;
                if !screened.is_suitable(&question.id) {
                    outcome.excluded += 1;
                    continue;
                }
                match iv.run_single(plan.profile, question, &screened) {
                    Ok(record) => outcome.records.push(record),
                    Err(e) => {
                        outcome.failed += 1;
                        outcome.failures.push(e.to_string());
                    }
                }
            }

            for scale in &plan.multi_scales {
                for round in 0..multi_rounds {
                    outcome.generated += 1;
                    match iv.run_multi(plan.profile, scale, &screened, seed, round) {
                        Ok(record) => outcome.records.push(record),
                        Err(InterviewError::InsufficientDimensions { .. }) => {
                            outcome.excluded += 1;
                        }
                        Err(e) => {
                            outcome.failed += 1;
                            outcome.failures.push(e.to_string());
                        }
                    }
                }
            }
            Ok(outcome)
        });

    let mut records = Vec::new();
    let mut verdicts = Vec::new();
    let mut result = GenerateOutcome::default();
    for outcome in outcomes {
        let outcome = outcome?;
        result.generated += outcome.generated;
        result.suitability_excluded += outcome.excluded;
        result.failed += outcome.failed;
        result.failures.extend(outcome.failures);
        records.extend(outcome.records);
        verdicts.extend(outcome.verdicts);
    }
    result.emitted = records.len() as u64;

    std::fs::create_dir_all(&config.out_dir)?;
    write_records_jsonl(&interviews_path(&config.out_dir), &records)?;
    verdicts.sort_by_key(|a| (a.character.clone(), a.question_id.clone()));
    write_atomic(
        &verdicts_path(&config.out_dir),
        &serde_json::to_vec_pretty(&verdicts)?,
    )?;
    write_generation_manifest(&config.out_dir, config.seed, &records, &result.failures)?;

    let mut manifest = RunManifest::load_or_default(&config.out_dir);
    manifest.config_digest = config.digest();
    manifest.counts.generated = result.generated;
    manifest.counts.suitability_excluded = result.suitability_excluded;
    manifest.counts.failed = result.failed;
    manifest.counts.emitted = result.emitted;
    manifest.gateway.add(gateway.stats(), &config.gateway);
    manifest.record_stage("generate", started);
    manifest.save(&config.out_dir)?;

    Ok(result)
}

pub fn generation_manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join("generation.json")
}

/// Per-record generation status: which records were emitted under which seed,
/// the cache digest behind every turn, and what failed.
fn write_generation_manifest(
    out_dir: &Path,
    seed: Option<u64>,
    records: &[InterviewRecord],
    failures: &[String],
) -> Result<(), PipelineError> {
    let mut sorted: Vec<&InterviewRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let records_json: Vec<serde_json::Value> = sorted
        .iter()
        .map(|r| {
            serde_json::json!({
                "id": r.id,
                "character": r.character,
                "scale": r.scale_id,
                "kind": r.kind,
                "status": "emitted",
                "turn_digests": r.turn_digests,
            })
        })
        .collect();
    let manifest = serde_json::json!({
        "seed": seed,
        "records": records_json,
        "failures": failures,
    });
    write_atomic(
        &generation_manifest_path(out_dir),
        &serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// filter

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterStageOutcome {
    pub assessed_pairs: usize,
    pub kept: u64,
    pub filtered_out: u64,
    pub outcomes: Vec<FilterOutcome>,
}

/// Assess every (character, scale) group in the interview store, decide
/// keep/discard per record, and materialize the kept-set.
pub fn cmd_filter(config: &RunConfig) -> Result<FilterStageOutcome, PipelineError> {
    let started = Instant::now();
    let store = interviews_path(&config.out_dir);
    if !store.exists() {
        return Err(PipelineError::MissingStore(store));
    }
    let records = read_records_jsonl(&store)?;
    let bank = ScaleBank::load(&config.bank_path)?;
    let registry = Registry::load(&config.registry_path)?;
    let templates = config.templates()?;
    let gateway = config.build_gateway()?;
    let assessor = Assessor::new(&gateway, &templates, config.gateway.models.judge.clone());

    // Group records by (character, scale); only annotated pairs get judged.
    let mut groups: BTreeMap<(String, String), Vec<&InterviewRecord>> = BTreeMap::new();
    for record in &records {
        groups
            .entry((record.character.clone(), record.scale_id.clone()))
            .or_default()
            .push(record);
    }
    let judged_groups: Vec<((String, String), Vec<&InterviewRecord>)> = groups
        .into_iter()
        .filter(|((character, scale_id), _)| {
            registry
                .ground_truth_for(character, scale_id)
                .ok()
                .flatten()
                .is_some()
                && bank.get(scale_id).is_some()
        })
        .collect();

    let assessments: Vec<AssessmentResult> = par_map(
        judged_groups,
        config.gateway.concurrency,
        |((character, scale_id), group)| {
            let scale = bank.get(&scale_id).expect("filtered to known scales");
            let truth = registry
                .ground_truth_for(&character, &scale_id)
                .ok()
                .flatten();
            assessor.assess(&character, scale, &group, truth)
        },
    )
    .into_iter()
    .collect::<Result<_, _>>()?;

    let outcomes = filter_records(&records, &assessments, config.filter_policy);
    let kept_ids: std::collections::BTreeSet<&str> = outcomes
        .iter()
        .filter(|o| o.kept)
        .map(|o| o.record_id.as_str())
        .collect();
    let kept_records: Vec<InterviewRecord> = records
        .iter()
        .filter(|r| kept_ids.contains(r.id.as_str()))
        .cloned()
        .collect();

    write_atomic(
        &assessments_path(&config.out_dir),
        &serde_json::to_vec_pretty(&assessments)?,
    )?;
    write_assessments_csv(&config.out_dir, &assessments)?;
    write_atomic(
        &outcomes_path(&config.out_dir),
        &serde_json::to_vec_pretty(&outcomes)?,
    )?;
    write_records_jsonl(&kept_path(&config.out_dir), &kept_records)?;

    let result = FilterStageOutcome {
        assessed_pairs: assessments.len(),
        kept: kept_records.len() as u64,
        filtered_out: (records.len() - kept_records.len()) as u64,
        outcomes,
    };

    let mut manifest = RunManifest::load_or_default(&config.out_dir);
    warn_on_config_drift(&manifest, config);
    manifest.counts.kept = result.kept;
    manifest.counts.filtered_out = result.filtered_out;
    manifest.gateway.add(gateway.stats(), &config.gateway);
    manifest.record_stage("filter", started);
    manifest.save(&config.out_dir)?;
    Ok(result)
}

/// Later stages normally run under the config that generated the store.
fn warn_on_config_drift(manifest: &RunManifest, config: &RunConfig) {
    if !manifest.config_digest.is_empty() && manifest.config_digest != config.digest() {
        log::warn!(
            "config digest {} differs from the one that generated this output dir ({})",
            &config.digest()[..12],
            &manifest.config_digest[..12.min(manifest.config_digest.len())]
        );
    }
}

fn write_assessments_csv(out_dir: &Path, assessments: &[AssessmentResult]) -> std::io::Result<()> {
    let mut csv =
        String::from("character,scale,matched_dimensions,compared_dimensions,full_match\n");
    for a in assessments {
        let matched = a.per_dimension_match.values().filter(|m| **m).count();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_field(&a.character),
            csv_field(&a.scale_id),
            matched,
            a.per_dimension_match.len(),
            a.full_match
        ));
    }
    write_atomic(&out_dir.join("assessments.csv"), csv.as_bytes())
}

// ---------------------------------------------------------------------------
// export

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportOutcome {
    pub manifests: Vec<SubsetManifest>,
    pub exported_records: u64,
    pub kept_unexported: u64,
}

/// Build and write every requested subset from the kept-set.
pub fn cmd_export(config: &RunConfig) -> Result<ExportOutcome, PipelineError> {
    let started = Instant::now();
    let kept_file = kept_path(&config.out_dir);
    if !kept_file.exists() {
        return Err(PipelineError::MissingKeptSet(kept_file));
    }
    let records = read_records_jsonl(&kept_file)?;
    let bank = ScaleBank::load(&config.bank_path)?;
    let registry = Registry::load(&config.registry_path)?;
    let templates = config.templates()?;

    let mut manifests = Vec::new();
    let mut exported_ids: std::collections::BTreeSet<String> = Default::default();
    let mut subsets: Vec<SubsetName> = config.subsets.clone();
    subsets.sort();
    subsets.dedup();
    for name in subsets {
        let (samples, manifest) = build_subset(
            name,
            &records,
            &bank,
            &registry,
            &templates,
            config.memory_k,
        )?;
        export_jsonl(&samples, subset_path(&config.out_dir, name))?;
        write_atomic(
            &subset_manifest_path(&config.out_dir, name),
            &serde_json::to_vec_pretty(&manifest)?,
        )?;
        exported_ids.extend(samples.iter().map(|s| s.source_record.clone()));
        manifests.push(manifest);
    }

    let result = ExportOutcome {
        exported_records: exported_ids.len() as u64,
        kept_unexported: records.len() as u64 - exported_ids.len() as u64,
        manifests,
    };

    let mut manifest = RunManifest::load_or_default(&config.out_dir);
    warn_on_config_drift(&manifest, config);
    manifest.counts.exported = result.exported_records;
    manifest.counts.kept_unexported = result.kept_unexported;
    manifest.record_stage("export", started);
    if !manifest.counts.reconciles(true) {
        manifest.save(&config.out_dir)?;
        return Err(PipelineError::Reconciliation(format!(
            "{:?}",
            manifest.counts
        )));
    }
    manifest.save(&config.out_dir)?;
    Ok(result)
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub succeeded: Vec<Metric>,
    pub failed: Vec<(Metric, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ConsistencyRun {
    character: String,
    report: ConsistencyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ConsistencyEvalReport {
    runs: Vec<ConsistencyRun>,
    mean_average_std: f64,
    mode: StdMode,
}

/// Run the selected metrics; each is isolated so one missing input doesn't
/// block the others. The CLI exits 3 when any metric failed.
pub fn cmd_eval(config: &RunConfig, which: &[Metric]) -> Result<EvalOutcome, PipelineError> {
    let started = Instant::now();
    let templates = config.templates()?;
    let gateway = config.build_gateway()?;

    let mut metrics: Vec<Metric> = if which.is_empty() {
        config.eval.metrics.clone()
    } else {
        which.to_vec()
    };
    if metrics.is_empty() {
        metrics = Metric::ALL.to_vec();
    }
    metrics.sort();
    metrics.dedup();

    let mut outcome = EvalOutcome::default();
    for metric in metrics {
        let result = run_metric(config, metric, &gateway, &templates);
        match result {
            Ok(()) => outcome.succeeded.push(metric),
            Err(e) => {
                log::warn!("metric {} failed: {e}", metric.as_str());
                outcome.failed.push((metric, e.to_string()));
            }
        }
    }
    write_eval_summary_csv(&config.out_dir, &outcome.succeeded)?;

    let mut manifest = RunManifest::load_or_default(&config.out_dir);
    manifest.gateway.add(gateway.stats(), &config.gateway);
    manifest.record_stage("eval", started);
    manifest.save(&config.out_dir)?;
    Ok(outcome)
}

/// Flatten each report's headline numbers into `reports/summary.csv`.
fn write_eval_summary_csv(out_dir: &Path, succeeded: &[Metric]) -> Result<(), PipelineError> {
    let mut csv = String::from("metric,key,value\n");
    for metric in succeeded {
        let text = std::fs::read_to_string(report_path(out_dir, *metric))?;
        let report: Value = serde_json::from_str(&text)?;
        let mut push = |key: &str, value: &Value| {
            if let Some(v) = value.as_f64() {
                csv.push_str(&format!("{},{},{v}\n", metric.as_str(), key));
            }
        };
        match metric {
            Metric::Pf => {
                push("single_accuracy", &report["single_accuracy"]);
                push("full_accuracy", &report["full_accuracy"]);
                push("coverage", &report["coverage"]);
            }
            Metric::Mr => push("accuracy", &report["accuracy"]),
            Metric::Rouge => push("mean_f1", &report["mean_f1"]),
            Metric::Winrate => push("win_rate", &report["win_rate"]),
            Metric::Dims => {
                if let Some(means) = report["means"].as_object() {
                    for (k, v) in means {
                        push(&format!("mean_{k}"), v);
                    }
                }
            }
            Metric::Consistency => push("mean_average_std", &report["mean_average_std"]),
        }
    }
    write_atomic(&out_dir.join("reports").join("summary.csv"), csv.as_bytes())?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
enum MetricError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Fidelity(#[from] FidelityError),
    #[error(transparent)]
    Assess(#[from] AssessError),
    #[error(transparent)]
    Interview(#[from] InterviewError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn write_report<T: Serialize>(
    out_dir: &Path,
    metric: Metric,
    report: &T,
) -> Result<(), MetricError> {
    let bytes = serde_json::to_vec_pretty(report)?;
    write_atomic(&report_path(out_dir, metric), &bytes)?;
    Ok(())
}

fn run_metric(
    config: &RunConfig,
    metric: Metric,
    gateway: &Gateway,
    templates: &TemplateSet,
) -> Result<(), MetricError> {
    match metric {
        Metric::Rouge => {
            let path =
                config.eval.rouge_pairs_path.as_ref().ok_or_else(|| {
                    MetricError::Input("eval.rouge_pairs_path not configured".into())
                })?;
            let text = std::fs::read_to_string(path)?;
            let value: Value = serde_json::from_str(&text)?;
            let root = Cursor::root(&value);
            let mut triples: Vec<(String, String, String)> = Vec::new();
            for cur in root
                .array()
                .map_err(|e| MetricError::Input(e.to_string()))?
            {
                let get = |f: &str| -> Result<String, MetricError> {
                    cur.field(f)
                        .and_then(|c| c.str().map(str::to_string))
                        .map_err(|e| MetricError::Input(e.to_string()))
                };
                triples.push((get("id")?, get("candidate")?, get("reference")?));
            }
            let report = rouge_report(
                triples
                    .iter()
                    .map(|(id, c, r)| (id.as_str(), c.as_str(), r.as_str())),
            );
            write_report(&config.out_dir, metric, &report)
        }
        Metric::Mr => {
            let path = config
                .eval
                .mcq_path
                .as_ref()
                .ok_or_else(|| MetricError::Input("eval.mcq_path not configured".into()))?;
            let items = load_mcq(path).map_err(|e| MetricError::Input(e.to_string()))?;
            let report = mr_accuracy(gateway, &config.gateway.models.subject, &items, templates)
                .map_err(|e| MetricError::Input(e.to_string()))?;
            write_report(&config.out_dir, metric, &report)
        }
        Metric::Winrate => {
            let path = config.eval.winrate_items_path.as_ref().ok_or_else(|| {
                MetricError::Input("eval.winrate_items_path not configured".into())
            })?;
            let seed = config.seed.ok_or_else(|| {
                MetricError::Input("win-rate randomizes answer order; set `seed`".into())
            })?;
            let items = load_items(path).map_err(|e| MetricError::Input(e.to_string()))?;
            let report = win_rate(
                gateway,
                &config.gateway.models.judge,
                &items,
                templates,
                seed,
            )
            .map_err(|e| MetricError::Input(e.to_string()))?;
            write_report(&config.out_dir, metric, &report)
        }
        Metric::Dims => {
            let path =
                config.eval.transcripts_path.as_ref().ok_or_else(|| {
                    MetricError::Input("eval.transcripts_path not configured".into())
                })?;
            let transcripts =
                load_transcripts(path).map_err(|e| MetricError::Input(e.to_string()))?;
            let scores = par_map(transcripts, config.gateway.concurrency, |t| {
                dimensional_scores(gateway, &config.gateway.models.judge, templates, &t)
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| MetricError::Input(e.to_string()))?;
            let report = dimensional_report(scores);
            write_report(&config.out_dir, metric, &report)
        }
        Metric::Pf => {
            let bank = ScaleBank::load(&config.bank_path)?;
            let registry = Registry::load(&config.registry_path)?;
            let report = personality_fidelity_run(
                gateway,
                templates,
                &config.gateway.models.subject,
                &config.gateway.models.judge,
                &bank,
                &registry,
                FidelityOptions {
                    per_result_averaging: config.eval.per_character_averaging,
                    workers: config.gateway.concurrency,
                },
            )?;
            write_report(&config.out_dir, metric, &report)
        }
        Metric::Consistency => {
            let bank = ScaleBank::load(&config.bank_path)?;
            let registry = Registry::load(&config.registry_path)?;
            let seed = config.seed.ok_or_else(|| {
                MetricError::Input(
                    "consistency interviews randomize question choice; set `seed`".into(),
                )
            })?;
            let mode = if config.eval.sample_std {
                StdMode::Sample
            } else {
                StdMode::Population
            };
            let scale_ids: Vec<String> = match &config.eval.consistency_scales {
                Some(ids) => ids.clone(),
                None => bank
                    .scales()
                    .filter(|s| bank.is_part_scale(&s.id) && s.dimensions.len() >= MULTI_TURNS)
                    .map(|s| s.id.clone())
                    .collect(),
            };
            if scale_ids.is_empty() {
                return Err(MetricError::Input(
                    "no scale has enough dimensions for the consistency protocol".into(),
                ));
            }
            let interviewer = Interviewer::new(
                gateway,
                templates,
                config.gateway.models.subject.clone(),
                config.gateway.models.judge.clone(),
            );
            let assessor = Assessor::new(gateway, templates, config.gateway.models.judge.clone());
            let (_, test_characters) = registry.split();
            let mut runs = Vec::new();
            for profile in test_characters {
                for scale_id in &scale_ids {
                    let Some(scale) = bank.get(scale_id) else {
                        return Err(MetricError::Input(format!("unknown scale `{scale_id}`")));
                    };
                    let screened = all_suitable(profile, scale);
                    let record = interviewer.run_multi(profile, scale, &screened, seed, 0)?;
                    let rounds = per_round_dimension_scores(&assessor, scale, &record)?;
                    let report = consistency(&scale.id, &rounds, mode)
                        .map_err(|e| MetricError::Input(e.to_string()))?;
                    runs.push(ConsistencyRun {
                        character: profile.name.clone(),
                        report,
                    });
                }
            }
            if runs.is_empty() {
                return Err(MetricError::Input("registry has no test characters".into()));
            }
            let mean_average_std =
                runs.iter().map(|r| r.report.average_std).sum::<f64>() / runs.len() as f64;
            let report = ConsistencyEvalReport {
                runs,
                mean_average_std,
                mode,
            };
            write_report(&config.out_dir, metric, &report)
        }
    }
}

fn all_suitable(profile: &CharacterProfile, scale: &Scale) -> ScreenedQuestions {
    ScreenedQuestions {
        character: profile.name.clone(),
        verdicts: scale
            .questions
            .iter()
            .map(|q| {
                (
                    q.id.clone(),
                    SuitabilityVerdict {
                        question_id: q.id.clone(),
                        character: profile.name.clone(),
                        suitable: true,
                        judge_rationale: "evaluation interviews every question".into(),
                        parse_failed: false,
                    },
                )
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// report

/// Summarize the manifest and any reports; errors if counts don't reconcile.
pub fn cmd_report(config: &RunConfig) -> Result<String, PipelineError> {
    let manifest = RunManifest::load_or_default(&config.out_dir);
    let c = &manifest.counts;
    let through_export = manifest.stages.contains_key("export");
    if through_export && !c.reconciles(true) {
        return Err(PipelineError::Reconciliation(format!("{c:?}")));
    }

    let mut out = String::new();
    out.push_str(&format!(
        "run {}\n",
        manifest.config_digest.get(..12).unwrap_or("(no digest)")
    ));
    out.push_str(&format!(
        "slots planned {} | excluded {} | failed {} | emitted {}\n",
        c.generated, c.suitability_excluded, c.failed, c.emitted
    ));
    out.push_str(&format!(
        "filtered out {} | kept {} | exported {} | kept unexported {}\n",
        c.filtered_out, c.kept, c.exported, c.kept_unexported
    ));
    out.push_str(&format!(
        "gateway: {} calls ({} cache hits), {} prompt tok, {} completion tok, est cost ${:.4}\n",
        manifest.gateway.calls,
        manifest.gateway.cache_hits,
        manifest.gateway.prompt_tokens,
        manifest.gateway.completion_tokens,
        manifest.gateway.estimated_cost
    ));
    for (stage, info) in &manifest.stages {
        out.push_str(&format!("stage {stage}: {} ms\n", info.wall_clock_ms));
    }
    for metric in Metric::ALL {
        let path = report_path(&config.out_dir, metric);
        if path.exists() {
            out.push_str(&format!("report: {}\n", path.display()));
        }
    }
    Ok(out)
}
