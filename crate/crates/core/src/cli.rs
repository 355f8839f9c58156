//! Command implementations behind the binary: detect, evaluate, sample, tune.
//!
//! All file formats are line-delimited JSON, UTF-8. Outputs are written in
//! input order regardless of worker scheduling, so identical inputs and
//! caches give byte-identical outputs.

use crate::datamodel::{
    parse_prediction, parse_record, serialize_prediction, validate_config, DetectionConfig,
    PredictionSet, Record, SampleSet,
};
use crate::error::{Error, Result};
use crate::evaluator::{
    aggregate, baseline_mark_all, baseline_mark_none, evaluate_record, render_table, report_jsonl,
    CorrelationKind,
};
use crate::pipeline::detect_record;
use crate::sampler::{
    generate_samples, load_offline_samples, serialize_samples_row, SampleCache, SamplingProfile,
};
use crate::scorer::{
    deterministic_stub_provider, EmbeddingProvider, RemoteEmbeddingProvider, TrigramHashProvider,
};
use crate::tuner::{approximate_config, grid_search, render_leaderboard, GridSpec, Objective};
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const ENV_EMBED_URL: &str = "HALLUMARK_EMBED_URL";
pub const ENV_EMBED_TOKEN: &str = "HALLUMARK_EMBED_TOKEN";
pub const ENV_COMPLETION_URL: &str = "HALLUMARK_COMPLETION_URL";
pub const ENV_COMPLETION_TOKEN: &str = "HALLUMARK_COMPLETION_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProviderChoice {
    #[default]
    Stub,
    Remote,
}

impl std::str::FromStr for ProviderChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stub" => Ok(ProviderChoice::Stub),
            "remote" => Ok(ProviderChoice::Remote),
            other => Err(Error::config(
                "provider",
                format!("unknown provider {other:?} (expected stub or remote)"),
            )),
        }
    }
}

/// Everything one command invocation needs.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub config: Option<PathBuf>,
    /// Programmatic config override; takes precedence over the config file.
    pub config_inline: Option<DetectionConfig>,
    pub lang: Option<String>,
    pub provider: ProviderChoice,
    pub samples: Option<PathBuf>,
    pub offline: bool,
    pub cache_dir: Option<PathBuf>,
    pub jobs: usize,
    pub metric: CorrelationKind,
    /// Guarantees rerun-identical outputs: fresh network sampling is refused,
    /// only inline, offline-file, and already-cached samples are used.
    pub deterministic: bool,
    /// Predictions file (evaluate only).
    pub predictions: Option<PathBuf>,
}

/// Read a records file; each record is tagged with its explicit id or its
/// position in the file.
pub fn read_records(path: &Path) -> Result<Vec<(String, Record)>> {
    let content = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (line_no, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(line).map_err(|e| locate(e, line_no + 1))?;
        let id = record.id_or_index(records.len());
        records.push((id, record));
    }
    Ok(records)
}

pub fn read_predictions(path: &Path) -> Result<Vec<(String, PredictionSet)>> {
    let content = std::fs::read_to_string(path)?;
    let mut predictions = Vec::new();
    for (line_no, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p = parse_prediction(line).map_err(|e| locate(e, line_no + 1))?;
        let id =
            p.id.clone()
                .unwrap_or_else(|| format!("record-{}", predictions.len()));
        predictions.push((id, p));
    }
    Ok(predictions)
}

fn locate(e: Error, file_line: usize) -> Error {
    match e {
        Error::Parse {
            byte_offset,
            message,
            ..
        } => Error::Parse {
            line: file_line,
            byte_offset,
            message,
        },
        other => other,
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    PerLanguage(BTreeMap<String, DetectionConfig>),
    Single(DetectionConfig),
}

/// Resolves the detection config for a record's language: inline override,
/// then config file (per-language map or single object), then the built-in
/// tuned table.
pub struct ConfigResolver {
    inline: Option<DetectionConfig>,
    file: Option<ConfigFile>,
}

impl ConfigResolver {
    pub fn load(manifest: &RunManifest) -> Result<Self> {
        let file = match &manifest.config {
            Some(path) => {
                let content = std::fs::read_to_string(path)?;
                let parsed: ConfigFile =
                    serde_json::from_str(&content).map_err(|e| Error::Parse {
                        line: e.line(),
                        byte_offset: e.column().saturating_sub(1),
                        message: format!("config file {}: {e}", path.display()),
                    })?;
                match &parsed {
                    ConfigFile::PerLanguage(map) => {
                        for (lang, cfg) in map {
                            validate_config(cfg.clone())
                                .map_err(|e| Error::config(lang.as_str(), e.to_string()))?;
                        }
                    }
                    ConfigFile::Single(cfg) => {
                        validate_config(cfg.clone())?;
                    }
                }
                Some(parsed)
            }
            None => None,
        };
        let inline = match &manifest.config_inline {
            Some(cfg) => Some(validate_config(cfg.clone())?),
            None => None,
        };
        Ok(ConfigResolver { inline, file })
    }

    pub fn for_lang(&self, lang: &str) -> DetectionConfig {
        if let Some(cfg) = &self.inline {
            return cfg.clone();
        }
        match &self.file {
            Some(ConfigFile::PerLanguage(map)) => map
                .get(&lang.to_ascii_lowercase())
                .cloned()
                .unwrap_or_else(|| DetectionConfig::for_language(lang).0),
            Some(ConfigFile::Single(cfg)) => cfg.clone(),
            None => DetectionConfig::for_language(lang).0,
        }
    }
}

fn build_provider(choice: ProviderChoice) -> Result<Box<dyn EmbeddingProvider>> {
    match choice {
        ProviderChoice::Stub => Ok(Box::new(deterministic_stub_provider(
            TrigramHashProvider::DEFAULT_DIMENSION,
        )?)),
        ProviderChoice::Remote => {
            let url = std::env::var(ENV_EMBED_URL).map_err(|_| {
                Error::config(
                    "provider",
                    format!("remote provider requires {ENV_EMBED_URL}"),
                )
            })?;
            let token = std::env::var(ENV_EMBED_TOKEN).ok();
            Ok(Box::new(RemoteEmbeddingProvider::new(url, token)?))
        }
    }
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(path) => {
            std::fs::write(path, content)?;
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("worker pool")
            .install(f)
    }
}

fn lang_matches(filter: &Option<String>, lang: &str) -> bool {
    match filter {
        Some(f) => f.eq_ignore_ascii_case(lang),
        None => true,
    }
}

struct SampleSource {
    offline: Option<BTreeMap<String, SampleSet>>,
    cache: Option<SampleCache>,
    profile: SamplingProfile,
}

impl SampleSource {
    fn prepare(manifest: &RunManifest, records: &[(String, Record)]) -> Result<Self> {
        let offline = match &manifest.samples {
            Some(path) => Some(load_offline_samples(path)?),
            None => None,
        };
        if manifest.offline && offline.is_none() {
            // Inline sample_texts can still satisfy offline mode, but only if
            // every record has them; reject before any work otherwise.
            if let Some((id, _)) = records
                .iter()
                .find(|(_, r)| r.sample_texts.as_ref().is_none_or(|s| s.is_empty()))
            {
                return Err(Error::config(
                    "offline",
                    format!(
                        "offline mode without --samples, and record {id} has no inline sample_texts"
                    ),
                ));
            }
        }
        let cache = match &manifest.cache_dir {
            Some(dir) => Some(SampleCache::new(dir)?),
            None => None,
        };
        let mut profile = SamplingProfile::default();
        if !(manifest.offline || manifest.deterministic) {
            profile.endpoint = std::env::var(ENV_COMPLETION_URL).unwrap_or_default();
            profile.auth_token = std::env::var(ENV_COMPLETION_TOKEN).ok();
        }
        Ok(SampleSource {
            offline,
            cache,
            profile,
        })
    }

    /// Resolution order: inline record samples, offline file, cache/endpoint.
    fn resolve(&self, id: &str, record: &Record) -> Result<SampleSet> {
        if let Some(texts) = &record.sample_texts {
            if !texts.is_empty() {
                return Ok(SampleSet::from_texts(texts.clone(), "inline"));
            }
        }
        if let Some(map) = &self.offline {
            if let Some(set) = map.get(id) {
                return Ok(set.clone());
            }
            return Err(Error::MissingSamples(id.to_string()));
        }
        if self.cache.is_some() || !self.profile.endpoint.is_empty() {
            return match generate_samples(&record.model_input, &self.profile, self.cache.as_ref())
            {
                Ok(set) => Ok(set),
                // A cache miss with no endpoint means the record simply has
                // no sample source; real endpoint failures keep their message.
                Err(Error::Sampler(m)) if m.contains("no completion endpoint") => {
                    Err(Error::MissingSamples(id.to_string()))
                }
                Err(e) => Err(e),
            };
        }
        Err(Error::MissingSamples(id.to_string()))
    }
}

/// Report per-record failures to stderr and surface the first error.
fn drain_failures<T>(results: Vec<(String, Result<T>)>) -> Result<Vec<T>> {
    let mut ok = Vec::with_capacity(results.len());
    let mut first_error = None;
    for (id, result) in results {
        match result {
            Ok(value) => ok.push(value),
            Err(e) => {
                eprintln!("record {id}: {e}");
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(ok),
    }
}

/// Detect hallucination spans for every input record; one prediction line per
/// record, in input order.
pub fn run_detect(manifest: &RunManifest) -> Result<()> {
    let records: Vec<(String, Record)> = read_records(&manifest.input)?
        .into_iter()
        .filter(|(_, r)| lang_matches(&manifest.lang, &r.lang))
        .collect();
    let resolver = ConfigResolver::load(manifest)?;
    let source = SampleSource::prepare(manifest, &records)?;
    let provider = build_provider(manifest.provider)?;

    let results: Vec<(String, Result<String>)> = with_pool(manifest.jobs, || {
        records
            .par_iter()
            .map(|(id, record)| {
                let line = source.resolve(id, record).and_then(|samples| {
                    let cfg = validate_config(resolver.for_lang(&record.lang))?;
                    let prediction =
                        detect_record(record, &samples, &cfg, provider.as_ref(), Some(id.clone()))?;
                    Ok(serialize_prediction(&prediction))
                });
                (id.clone(), line)
            })
            .collect()
    });

    let lines = drain_failures(results)?;
    let mut content = lines.join("\n");
    if !content.is_empty() {
        content.push('\n');
    }
    write_output(manifest.output.as_deref(), &content)
}

/// Evaluate a predictions file against gold records; emits the per-record
/// JSONL report and a per-language table with the mark-none/mark-all
/// baseline rows.
pub fn run_evaluate(manifest: &RunManifest) -> Result<()> {
    let predictions_path = manifest
        .predictions
        .as_ref()
        .ok_or_else(|| Error::config("predictions", "evaluate requires a predictions file"))?;
    let gold: Vec<(String, Record)> = read_records(&manifest.input)?
        .into_iter()
        .filter(|(_, r)| lang_matches(&manifest.lang, &r.lang))
        .collect();
    let predictions = read_predictions(predictions_path)?;
    let by_id: BTreeMap<&str, &PredictionSet> =
        predictions.iter().map(|(id, p)| (id.as_str(), p)).collect();

    let missing: Vec<&str> = gold
        .iter()
        .filter(|(id, _)| !by_id.contains_key(id.as_str()))
        .map(|(id, _)| id.as_str())
        .collect();
    let gold_ids: BTreeMap<&str, ()> = gold.iter().map(|(id, _)| (id.as_str(), ())).collect();
    let orphans: Vec<&str> = predictions
        .iter()
        .filter(|(id, _)| !gold_ids.contains_key(id.as_str()))
        .map(|(id, _)| id.as_str())
        .collect();
    if !missing.is_empty() || (manifest.lang.is_none() && !orphans.is_empty()) {
        return Err(Error::IdMismatch(format!(
            "gold records without predictions: {missing:?}; predictions without gold: {orphans:?}"
        )));
    }

    let mut system_rows = Vec::new();
    let mut none_rows = Vec::new();
    let mut all_rows = Vec::new();
    for (id, record) in &gold {
        system_rows.push(evaluate_record(
            record,
            by_id[id.as_str()],
            id,
            manifest.metric,
        )?);
        none_rows.push(evaluate_record(
            record,
            &baseline_mark_none(record),
            id,
            manifest.metric,
        )?);
        all_rows.push(evaluate_record(
            record,
            &baseline_mark_all(record),
            id,
            manifest.metric,
        )?);
    }
    let system = aggregate(system_rows);
    let mark_none = aggregate(none_rows);
    let mark_all = aggregate(all_rows);

    let table = render_table(&[
        ("mark-none", &mark_none),
        ("mark-all", &mark_all),
        ("predictions", &system),
    ]);
    let jsonl = report_jsonl(&system);
    match &manifest.output {
        Some(path) => {
            std::fs::write(path, jsonl)?;
            print!("{table}");
        }
        None => {
            print!("{jsonl}");
            eprint!("{table}");
        }
    }
    Ok(())
}

/// Generate (or load from cache) the sample set for every record and write a
/// samples file usable by `--samples`/offline detection.
pub fn run_sample(manifest: &RunManifest, profile: &SamplingProfile) -> Result<()> {
    let records: Vec<(String, Record)> = read_records(&manifest.input)?
        .into_iter()
        .filter(|(_, r)| lang_matches(&manifest.lang, &r.lang))
        .collect();
    let cache = match &manifest.cache_dir {
        Some(dir) => Some(SampleCache::new(dir)?),
        None => None,
    };
    profile.validate()?;

    let results: Vec<(String, Result<String>)> = with_pool(manifest.jobs, || {
        records
            .par_iter()
            .map(|(id, record)| {
                let row = generate_samples(&record.model_input, profile, cache.as_ref())
                    .map(|set| serialize_samples_row(id, &set));
                (id.clone(), row)
            })
            .collect()
    });
    let lines = drain_failures(results)?;
    let mut content = lines.join("\n");
    if !content.is_empty() {
        content.push('\n');
    }
    write_output(manifest.output.as_deref(), &content)
}

/// Grid-search hyperparameters per language and write the tuned config file
/// (the same per-language format `--config` consumes).
pub fn run_tune(
    manifest: &RunManifest,
    grid_file: Option<&Path>,
    objective: Objective,
) -> Result<()> {
    let records: Vec<(String, Record)> = read_records(&manifest.input)?
        .into_iter()
        .filter(|(_, r)| lang_matches(&manifest.lang, &r.lang))
        .collect();
    let source = SampleSource::prepare(manifest, &records)?;
    let provider = build_provider(manifest.provider)?;

    let mut sample_map: BTreeMap<String, SampleSet> = BTreeMap::new();
    for (id, record) in &records {
        sample_map.insert(id.clone(), source.resolve(id, record)?);
    }

    let mut by_lang: BTreeMap<String, Vec<(String, Record)>> = BTreeMap::new();
    for (id, record) in records {
        by_lang
            .entry(record.lang.to_ascii_lowercase())
            .or_default()
            .push((id, record));
    }
    if by_lang.is_empty() {
        if let Some(lang) = &manifest.lang {
            // No validation data for this language: fall back to the nearest
            // tuned language's settings.
            let (cfg, note) = approximate_config(lang);
            eprintln!("{note}");
            let mut tuned = BTreeMap::new();
            tuned.insert(lang.to_ascii_lowercase(), cfg);
            let content = serde_json::to_string_pretty(&tuned).expect("configs serialize");
            return write_output(manifest.output.as_deref(), &format!("{content}\n"));
        }
        return Err(Error::validation("records", "no records to tune on"));
    }

    let base_grid: Option<GridSpec> = match grid_file {
        Some(path) => {
            let content = std::fs::read_to_string(path)?;
            Some(serde_json::from_str(&content).map_err(|e| Error::Parse {
                line: e.line(),
                byte_offset: e.column().saturating_sub(1),
                message: format!("grid file {}: {e}", path.display()),
            })?)
        }
        None => None,
    };

    let mut tuned: BTreeMap<String, DetectionConfig> = BTreeMap::new();
    for (lang, group) in &by_lang {
        let mut grid = match &base_grid {
            Some(g) => GridSpec {
                lang: lang.clone(),
                ..g.clone()
            },
            None => GridSpec::for_language(lang),
        };
        grid.objective = objective;
        let ranked = with_pool(manifest.jobs, || {
            grid_search(group, &sample_map, &grid, provider.as_ref())
        })?;
        eprint!("{}", render_leaderboard(lang, &ranked, 10));
        let (best, _) = ranked
            .first()
            .ok_or_else(|| Error::config("grid", "no valid grid points"))?;
        tuned.insert(lang.clone(), best.clone());
    }

    let content = serde_json::to_string_pretty(&tuned).expect("configs serialize");
    write_output(manifest.output.as_deref(), &format!("{content}\n"))
}
