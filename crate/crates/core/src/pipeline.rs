//! End-to-end experiments: generate a log from a ground-truth policy, mine
//! it, enhance the result and evaluate it, writing every artifact to disk.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::enhance::{self, RefinementConfig, TraceRow};
use crate::error::{Error, Result};
use crate::metrics::{self, EvaluationReport, WscWeights};
use crate::mining::{self, MiningConfig, ThresholdGrid, TuneResult};
use crate::model::{AccessLog, AttributeSchema, Policy};
use crate::preprocess::{self, Discretizer, EncodedLog};
use crate::synth::{self, EntityCounts, RandomPolicySpec, RandomSchemaSpec, UniverseSpec};
use crate::{io, seed, split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySource {
    Builtin { name: String },
    Random { schema: RandomSchemaSpec, policy: RandomPolicySpec },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UniverseConfig {
    /// Entity counts; builtin policies fall back to their own universe.
    pub entity_counts: Option<EntityCounts>,
    pub cap: u64,
}

impl Default for UniverseConfig {
    fn default() -> Self {
        UniverseConfig {
            entity_counts: None,
            cap: synth::DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogTransforms {
    /// Fraction of tuples kept, stratified by decision.
    pub sparsify: Option<f64>,
    /// Fraction of decisions flipped.
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    #[serde(default)]
    pub grid: ThresholdGrid,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_folds() -> usize {
    5
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            grid: ThresholdGrid::default(),
            folds: default_folds(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvalSplit {
    /// Mine and evaluate on the whole log.
    #[default]
    Full,
    Holdout { test_fraction: f64 },
    CrossValidation { folds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Label used in reports; defaults to the builtin name or `experiment`.
    #[serde(default)]
    pub dataset: Option<String>,
    /// Ground-truth source; only `generate` needs one.
    #[serde(default)]
    pub policy: Option<PolicySource>,
    #[serde(default)]
    pub universe: UniverseConfig,
    #[serde(default)]
    pub transforms: LogTransforms,
    /// Optional discretizer spec applied before encoding.
    #[serde(default)]
    pub discretizer: Option<PathBuf>,
    /// Mining settings; the seed is replaced by a substream of the master seed.
    #[serde(default)]
    pub mining: MiningConfig,
    /// Threshold grid search; `None` keeps `mining.thresholds`.
    #[serde(default)]
    pub tuning: Option<TuningConfig>,
    #[serde(default = "yes")]
    pub enhance: bool,
    #[serde(default)]
    pub enhancement: RefinementConfig,
    #[serde(default)]
    pub evaluation: EvalSplit,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn yes() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidFraction(f))
    }
}

impl ExperimentConfig {
    pub fn new(policy: Option<PolicySource>, seed: u64) -> Self {
        ExperimentConfig {
            dataset: None,
            policy,
            universe: UniverseConfig::default(),
            transforms: LogTransforms::default(),
            discretizer: None,
            mining: MiningConfig::default(),
            tuning: None,
            enhance: true,
            enhancement: RefinementConfig::default(),
            evaluation: EvalSplit::Full,
            seed,
            output_dir: default_output(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    fn from_value(value: Value) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::Spec(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `path=value` overrides, where `path` is a dotted field path
    /// (`mining.k.auto.k_max=12`) and `value` is JSON or a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for o in overrides {
            let (path, raw) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("override `{}` is not path=value", o.as_ref())))?;
            let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut value, path, parsed)?;
        }
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.transforms.sparsify {
            check_fraction(f)?;
        }
        if let Some(f) = self.transforms.noise {
            check_fraction(f)?;
        }
        match self.evaluation {
            EvalSplit::Full => {}
            EvalSplit::Holdout { test_fraction } => {
                if !(test_fraction > 0.0 && test_fraction < 1.0) {
                    return Err(Error::InvalidFraction(test_fraction));
                }
            }
            EvalSplit::CrossValidation { folds } => {
                if folds < 2 {
                    return Err(Error::Spec(format!("need at least 2 folds, got {folds}")));
                }
            }
        }
        if let Some(t) = &self.tuning {
            if t.folds < 2 {
                return Err(Error::Spec(format!("tuning needs at least 2 folds, got {}", t.folds)));
            }
        }
        self.mining.validate()?;
        self.enhancement.validate()
    }

    pub fn dataset_name(&self) -> String {
        match (&self.dataset, &self.policy) {
            (Some(d), _) => d.clone(),
            (None, Some(PolicySource::Builtin { name })) => name.clone(),
            (None, _) => "experiment".to_string(),
        }
    }

    fn mining_config(&self) -> MiningConfig {
        MiningConfig {
            seed: seed::substream(self.seed, "cluster"),
            ..self.mining
        }
    }
}

fn set_path(root: &mut Value, path: &str, new: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Default::default());
            } else {
                return Err(Error::Spec(format!("`{path}`: `{part}` is not inside an object")));
            }
        }
        let map = cur.as_object_mut().expect("object checked above");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), new);
            return Ok(());
        }
        cur = map.entry(part.to_string()).or_insert(Value::Null);
    }
    Err(Error::Spec("empty override path".into()))
}

/// Per-stage wall-clock seconds, in stage order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings(pub Vec<(String, f64)>);

impl Timings {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.0.push((stage.to_string(), start.elapsed().as_secs_f64()));
        Ok(out)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().map(|(_, s)| s).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: String,
    pub config: ExperimentConfig,
    pub timings: Timings,
    pub artifacts: BTreeMap<String, PathBuf>,
    /// `|L|`, `|L+|`, `|L-|` of the log the stage consumed or produced.
    pub log_counts: BTreeMap<String, usize>,
    #[serde(default)]
    pub noise_flips: Option<usize>,
    #[serde(default)]
    pub optimal_k: Option<usize>,
    #[serde(default)]
    pub tuning: Option<TuneResult>,
    #[serde(default)]
    pub report: Option<EvaluationReport>,
}

impl RunManifest {
    fn new(config: &ExperimentConfig) -> Self {
        RunManifest {
            dataset: config.dataset_name(),
            config: config.clone(),
            timings: Timings::default(),
            artifacts: BTreeMap::new(),
            log_counts: BTreeMap::new(),
            noise_flips: None,
            optimal_k: None,
            tuning: None,
            report: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

fn log_counts(log: &AccessLog) -> BTreeMap<String, usize> {
    synth::log_summary(log)
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

fn ground_truth(config: &ExperimentConfig) -> Result<(Policy, UniverseSpec)> {
    let universe_seed = seed::substream(config.seed, "universe");
    let source = config
        .policy
        .as_ref()
        .ok_or_else(|| Error::Spec("no policy source configured".into()))?;
    let policy = match source {
        PolicySource::Builtin { name } => synth::builtin(name)
            .ok_or_else(|| Error::Spec(format!("unknown builtin policy `{name}`")))?,
        PolicySource::Random { schema, policy } => {
            let schema = synth::random_schema(&RandomSchemaSpec {
                seed: seed::substream(config.seed, "schema"),
                ..*schema
            })?;
            synth::generate_random_policy(
                &schema,
                &RandomPolicySpec {
                    seed: seed::substream(config.seed, "generate"),
                    ..*policy
                },
            )?
        }
        PolicySource::File { path } => Policy::from_json(&fs::read_to_string(path)?)?,
    };
    let counts = match (&config.universe.entity_counts, source) {
        (Some(c), _) => *c,
        (None, PolicySource::Builtin { name }) => {
            synth::builtin_universe(name, universe_seed)
                .expect("builtin checked above")
                .entity_counts
        }
        (None, _) => EntityCounts {
            users: 100,
            objects: 100,
            sessions: 1,
        },
    };
    let universe = UniverseSpec {
        schema: policy.schema().clone(),
        entity_counts: counts,
        seed: universe_seed,
    };
    Ok((policy, universe))
}

/// Everything `generate` produces, in memory.
#[derive(Debug, Clone)]
pub struct Generated {
    pub policy: Policy,
    pub complete: AccessLog,
    pub log: AccessLog,
    pub noise_flips: Option<usize>,
}

pub fn generate_logs(config: &ExperimentConfig, timings: &mut Timings) -> Result<Generated> {
    config.validate()?;
    let (policy, universe) = timings.time("universe", || ground_truth(config))?;
    let complete = timings.time("generate", || {
        synth::generate_complete_log(&universe, &policy, config.universe.cap)
    })?;
    let mut log = complete.clone();
    if let Some(f) = config.transforms.sparsify {
        log = synth::sparsify(&log, f, seed::substream(config.seed, "sparsify"))?;
    }
    let mut noise_flips = None;
    if let Some(f) = config.transforms.noise {
        let (noisy, flipped) = synth::add_noise(&log, f, seed::substream(config.seed, "noise"))?;
        log = noisy;
        noise_flips = Some(flipped.len());
    }
    Ok(Generated {
        policy: policy.with_entities(complete.entities().clone()),
        complete,
        log,
        noise_flips,
    })
}

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn artifact(manifest: &mut RunManifest, dir: &Path, key: &str, file: &str) -> PathBuf {
    let path = dir.join(file);
    manifest.artifacts.insert(key.to_string(), path.clone());
    path
}

/// Writes the ground-truth policy, its schema and the (transformed) log.
pub fn generate(config: &ExperimentConfig) -> Result<RunManifest> {
    let mut manifest = RunManifest::new(config);
    let generated = generate_logs(config, &mut manifest.timings)?;
    let dir = &config.output_dir;
    prepare_output(dir)?;
    fs::write(artifact(&mut manifest, dir, "policy", "policy.json"), generated.policy.to_json()?)?;
    fs::write(
        artifact(&mut manifest, dir, "schema", "schema.json"),
        serde_json::to_string_pretty(generated.policy.schema())? + "\n",
    )?;
    io::write_log(
        &generated.log,
        BufWriter::new(File::create(artifact(&mut manifest, dir, "log", "log.csv"))?),
    )?;
    if config.transforms.sparsify.is_some() || config.transforms.noise.is_some() {
        io::write_log(
            &generated.complete,
            BufWriter::new(File::create(artifact(&mut manifest, dir, "complete_log", "complete_log.csv"))?),
        )?;
    }
    manifest.log_counts = log_counts(&generated.log);
    manifest.noise_flips = generated.noise_flips;
    let path = artifact(&mut manifest, dir, "manifest", "generate_manifest.json");
    manifest.write(&path)?;
    info!("generated {} tuples", generated.log.len());
    Ok(manifest)
}

pub fn read_schema(path: &Path) -> Result<AttributeSchema> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Imputes missing values and applies the configured discretizer.
pub fn prepare_log(log: &AccessLog, config: &ExperimentConfig) -> Result<AccessLog> {
    let mut log = preprocess::impute_missing(log);
    if let Some(path) = &config.discretizer {
        let spec = Discretizer::from_json(&fs::read_to_string(path)?)?;
        log = preprocess::discretize(&log, &spec)?;
    }
    log.validate()?;
    Ok(log)
}

/// Mining, optional tuning and enhancement of one encoded log.
#[derive(Debug, Clone)]
pub struct MinedPolicy {
    pub rules: Vec<crate::model::Rule>,
    pub mined: mining::Mined,
    pub tuning: Option<TuneResult>,
    pub trace: Vec<TraceRow>,
}

pub fn mine_log(
    log: &EncodedLog,
    schema: &AttributeSchema,
    config: &ExperimentConfig,
    timings: &mut Timings,
) -> Result<MinedPolicy> {
    let mut mining_config = config.mining_config();
    let tuning = match &config.tuning {
        Some(t) => {
            let result = timings.time("tune", || {
                mining::tune_thresholds(log, &mining_config, &t.grid, t.folds)
            })?;
            mining_config.thresholds = result.thresholds;
            Some(result)
        }
        None => None,
    };
    let mined = timings.time("mine", || mining::mine_encoded(log, schema, &mining_config))?;
    let (rules, trace) = if config.enhance {
        let rcfg = RefinementConfig {
            extraction: mining_config,
            ..config.enhancement
        };
        let out = timings.time("enhance", || enhance::enhance_encoded(&mined.rules, schema, log, &rcfg))?;
        (out.rules, out.trace)
    } else {
        (mined.rules.clone(), Vec::new())
    };
    Ok(MinedPolicy {
        rules,
        mined,
        tuning,
        trace,
    })
}

fn evaluate_on(
    rules: &[crate::model::Rule],
    schema: &AttributeSchema,
    log: &EncodedLog,
    weights: &WscWeights,
) -> Result<EvaluationReport> {
    if log.positive.is_empty() {
        return Err(Error::EmptyInput("evaluation needs a non-empty L+"));
    }
    let wsc_max = metrics::wsc_max_encoded(log, schema, weights);
    metrics::evaluate_encoded(rules, schema, log, weights, wsc_max)
}

fn mean_report(reports: &[EvaluationReport]) -> Result<EvaluationReport> {
    let n = reports.len() as f64;
    let mean = |f: fn(&EvaluationReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mut out = reports[0].clone();
    out.accuracy = mean(|r| r.accuracy);
    out.precision = mean(|r| r.precision);
    out.recall = mean(|r| r.recall);
    out.f_score = mean(|r| r.f_score);
    out.wsc = mean(|r| r.wsc);
    out.wsc_max = mean(|r| r.wsc_max);
    out.delta_wsc = mean(|r| r.delta_wsc);
    out.quality = mean(|r| r.quality);
    out.count_accuracy = mean(|r| r.count_accuracy);
    out.count_f_score = mean(|r| r.count_f_score);
    out.rule_count = (reports.iter().map(|r| r.rule_count).sum::<usize>() as f64 / n).round() as usize;
    Ok(out)
}

/// Mines `log` per the configuration and writes the mined policy, cluster
/// dump, modes, diagnostics, enhancement trace, report and manifest.
pub fn mine(log: &AccessLog, config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let mut manifest = RunManifest::new(config);
    let log = manifest.timings.time("preprocess", || prepare_log(log, config))?;
    let schema = log.schema().clone();
    let encoded = manifest.timings.time("encode", || EncodedLog::from_log(&log))?;
    if encoded.positive.is_empty() {
        return Err(Error::EmptyInput("the log has no permitted tuples"));
    }
    let weights = config.enhancement.weights;
    let eval_seed = seed::substream(config.seed, "evaluation");

    let (result, report) = match config.evaluation {
        EvalSplit::Full => {
            let result = mine_log(&encoded, &schema, config, &mut manifest.timings)?;
            let report = manifest
                .timings
                .time("evaluate", || evaluate_on(&result.rules, &schema, &encoded, &weights))?;
            (result, report)
        }
        EvalSplit::Holdout { test_fraction } => {
            let (train, test) = split::holdout(&encoded, test_fraction, eval_seed)?;
            let result = mine_log(&train, &schema, config, &mut manifest.timings)?;
            let report = manifest
                .timings
                .time("evaluate", || evaluate_on(&result.rules, &schema, &test, &weights))?;
            (result, report)
        }
        EvalSplit::CrossValidation { folds } => {
            let mut reports = Vec::with_capacity(folds);
            for (train, test) in split::stratified_folds(&encoded, folds, eval_seed)? {
                if train.positive.is_empty() || test.positive.is_empty() {
                    continue;
                }
                let r = mine_log(&train, &schema, config, &mut manifest.timings)?;
                reports.push(evaluate_on(&r.rules, &schema, &test, &weights)?);
            }
            if reports.is_empty() {
                return Err(Error::EmptyInput("every fold has an empty positive partition"));
            }
            let result = mine_log(&encoded, &schema, config, &mut manifest.timings)?;
            (result, mean_report(&reports)?)
        }
    };

    let dir = &config.output_dir;
    prepare_output(dir)?;
    let policy = Policy::new(schema.clone(), result.rules.clone())?;
    fs::write(artifact(&mut manifest, dir, "mined_policy", "mined_policy.json"), policy.to_json()?)?;
    io::write_cluster_dump(
        &result.mined.model,
        BufWriter::new(File::create(artifact(&mut manifest, dir, "clusters", "clusters.csv"))?),
    )?;
    io::write_modes(
        &result.mined.model,
        &encoded.codebook,
        File::create(artifact(&mut manifest, dir, "modes", "modes.csv"))?,
    )?;
    io::write_diagnostics(
        &result.mined.diagnostics,
        File::create(artifact(&mut manifest, dir, "diagnostics", "diagnostics.csv"))?,
    )?;
    io::write_table(
        &TraceRow::CSV_HEADER,
        result.trace.iter().map(|t| t.csv_row().to_vec()),
        File::create(artifact(&mut manifest, dir, "trace", "trace.csv"))?,
    )?;
    fs::write(artifact(&mut manifest, dir, "report", "report.json"), report.to_json()?)?;
    manifest.log_counts = log_counts(&log);
    manifest.optimal_k = Some(result.mined.model.k);
    manifest.tuning = result.tuning;
    manifest.report = Some(report);
    let path = artifact(&mut manifest, dir, "manifest", "manifest.json");
    manifest.write(&path)?;
    Ok(manifest)
}

/// Threshold grid search on `log`, using the configured grid (or the
/// default one).
pub fn tune(log: &AccessLog, config: &ExperimentConfig) -> Result<TuneResult> {
    config.validate()?;
    let log = prepare_log(log, config)?;
    let encoded = EncodedLog::from_log(&log)?;
    let t = config.tuning.clone().unwrap_or_default();
    mining::tune_thresholds(&encoded, &config.mining_config(), &t.grid, t.folds)
}

/// Evaluates a policy against a log, failing when their attributes differ.
/// Read the log with the policy's schema so every rule value is encodable.
pub fn evaluate_files(policy: &Policy, log: &AccessLog, weights: &WscWeights) -> Result<EvaluationReport> {
    let log = preprocess::impute_missing(log);
    for kind in crate::model::EntityKind::ALL {
        if policy.schema().attrs_of(kind) != log.schema().attrs_of(kind) {
            return Err(Error::SchemaMismatch(format!(
                "{} attributes of the policy and the log differ",
                kind.name()
            )));
        }
    }
    let encoded = EncodedLog::from_log(&log)?;
    evaluate_on(policy.rules(), log.schema(), &encoded, weights)
}

pub const REPORT_HEADER: [&str; 8] = [
    "dataset",
    "running_time_s",
    "optimal_k",
    "rules",
    "ACC",
    "F-score",
    "WSC",
    "Q",
];

/// One row per manifest, sorted by dataset name.
pub fn report_rows(manifests: &[RunManifest]) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::with_capacity(manifests.len());
    for m in manifests {
        let report = m
            .report
            .as_ref()
            .ok_or_else(|| Error::Format(format!("manifest for `{}` has no report", m.dataset)))?;
        let k = m
            .optimal_k
            .ok_or_else(|| Error::Format(format!("manifest for `{}` has no optimal k", m.dataset)))?;
        let [acc, f, wsc, q] = report.csv_row();
        rows.push(vec![
            m.dataset.clone(),
            format!("{:.3}", m.timings.total()),
            k.to_string(),
            report.rule_count.to_string(),
            acc,
            f,
            wsc,
            q,
        ]);
    }
    rows.sort_by(|a, b| a[0].cmp(&b[0]));
    Ok(rows)
}
