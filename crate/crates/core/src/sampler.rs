//! Stochastic sample acquisition: a completion-endpoint client with the
//! decoding profile used throughout, an on-disk cache keyed by query and
//! profile, and an offline sample file loader for fully network-free runs.

use crate::datamodel::{SampleProvenance, SampleSet};
use crate::error::{Error, Result};
use crate::Score;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

/// Request shape the completion endpoint speaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ApiShape {
    #[default]
    Chat,
    Completion,
}

/// Decoding parameters and transport settings for sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingProfile {
    pub model: String,
    pub endpoint: String,
    pub api_shape: ApiShape,
    pub temperature: Score,
    pub top_p: Score,
    pub top_k: u32,
    pub max_tokens: u32,
    pub sample_count: usize,
    pub no_repeat_ngram: u32,
    /// Optional wrapper with a `{query}` placeholder; the query is passed
    /// through verbatim when absent.
    pub prompt_template: Option<String>,
    pub timeout_secs: u64,
    pub retry_budget: u32,
    #[serde(skip)]
    pub auth_token: Option<String>,
}

impl Default for SamplingProfile {
    fn default() -> Self {
        SamplingProfile {
            model: "meta-llama/Llama-3.2-3B-Instruct".into(),
            endpoint: String::new(),
            api_shape: ApiShape::Chat,
            temperature: 0.1,
            top_p: 0.9,
            top_k: 50,
            max_tokens: 64,
            sample_count: 20,
            no_repeat_ngram: 3,
            prompt_template: None,
            timeout_secs: 120,
            retry_budget: 2,
            auth_token: None,
        }
    }
}

impl SamplingProfile {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 1 {
            return Err(Error::config("sample_count", "must be >= 1"));
        }
        if self.temperature <= 0.0 {
            return Err(Error::config("temperature", "must be > 0"));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::config("top_p", "must be in (0, 1]"));
        }
        Ok(())
    }

    fn prompt_for(&self, query: &str) -> String {
        match &self.prompt_template {
            Some(template) => template.replace("{query}", query),
            None => query.to_string(),
        }
    }

    /// Stable digest over everything that affects what the endpoint returns.
    /// Transport settings (timeout, retries, auth) are excluded.
    pub fn fingerprint(&self) -> String {
        let essence = serde_json::json!({
            "model": self.model,
            "endpoint": self.endpoint,
            "api_shape": self.api_shape,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "max_tokens": self.max_tokens,
            "sample_count": self.sample_count,
            "no_repeat_ngram": self.no_repeat_ngram,
            "prompt_template": self.prompt_template,
        });
        hex_digest(essence.to_string().as_bytes())
    }

    /// Decoding parameters as provenance, minus anything downgraded away.
    fn provenance(&self, downgraded: &[String]) -> SampleProvenance {
        let mut parameters = serde_json::Map::new();
        parameters.insert("model".into(), self.model.clone().into());
        parameters.insert("temperature".into(), self.temperature.into());
        parameters.insert("top_p".into(), self.top_p.into());
        parameters.insert("max_tokens".into(), self.max_tokens.into());
        parameters.insert("n".into(), self.sample_count.into());
        if !downgraded.iter().any(|p| p == "top_k") {
            parameters.insert("top_k".into(), self.top_k.into());
        }
        if !downgraded.iter().any(|p| p == "no_repeat_ngram") {
            parameters.insert("no_repeat_ngram".into(), self.no_repeat_ngram.into());
        }
        SampleProvenance {
            endpoint: self.endpoint.clone(),
            parameters,
            downgraded: downgraded.to_vec(),
        }
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// File-per-key sample cache with atomic writes (temp file + rename), so
/// concurrent writers cannot corrupt an entry.
pub struct SampleCache {
    dir: PathBuf,
}

impl SampleCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(SampleCache { dir })
    }

    pub fn key(query: &str, profile: &SamplingProfile) -> String {
        format!(
            "{}-{}",
            &hex_digest(query.as_bytes())[..16],
            &profile.fingerprint()[..16]
        )
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<SampleSet>> {
        let path = self.path(key);
        if !path.exists() {
            return Ok(None);
        }
        let content = std::fs::read_to_string(&path)?;
        let line = content.lines().next().unwrap_or_default();
        let set: SampleSet = serde_json::from_str(line)
            .map_err(|e| Error::Sampler(format!("corrupt cache entry {}: {e}", path.display())))?;
        Ok(Some(set))
    }

    pub fn put(&self, key: &str, set: &SampleSet) -> Result<()> {
        let tmp = self.dir.join(format!(
            ".tmp-{key}-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_nanos())
                .unwrap_or(0)
        ));
        {
            let mut file = std::fs::File::create(&tmp)?;
            writeln!(
                file,
                "{}",
                serde_json::to_string(set).expect("sample sets serialize")
            )?;
        }
        std::fs::rename(&tmp, self.path(key))?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    message: Option<ChatMessage>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

fn request_body(
    profile: &SamplingProfile,
    prompt: &str,
    downgraded: &[String],
) -> serde_json::Value {
    let mut body = serde_json::Map::new();
    body.insert("model".into(), profile.model.clone().into());
    match profile.api_shape {
        ApiShape::Chat => {
            body.insert(
                "messages".into(),
                serde_json::json!([{ "role": "user", "content": prompt }]),
            );
        }
        ApiShape::Completion => {
            body.insert("prompt".into(), prompt.into());
        }
    }
    body.insert("temperature".into(), profile.temperature.into());
    body.insert("top_p".into(), profile.top_p.into());
    body.insert("max_tokens".into(), profile.max_tokens.into());
    body.insert("n".into(), profile.sample_count.into());
    if !downgraded.iter().any(|p| p == "top_k") {
        body.insert("top_k".into(), profile.top_k.into());
    }
    if !downgraded.iter().any(|p| p == "no_repeat_ngram") {
        body.insert(
            "no_repeat_ngram_size".into(),
            profile.no_repeat_ngram.into(),
        );
    }
    serde_json::Value::Object(body)
}

/// Which of our optional parameters a 4xx response body complains about.
fn rejected_parameter(body: &str, downgraded: &[String]) -> Option<String> {
    let lower = body.to_lowercase();
    if lower.contains("top_k") && !downgraded.iter().any(|p| p == "top_k") {
        return Some("top_k".into());
    }
    if (lower.contains("no_repeat_ngram") || lower.contains("repetition"))
        && !downgraded.iter().any(|p| p == "no_repeat_ngram")
    {
        return Some("no_repeat_ngram".into());
    }
    None
}

fn extract_texts(response: CompletionResponse) -> Result<Vec<String>> {
    response
        .choices
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            c.message
                .map(|m| m.content)
                .or(c.text)
                .ok_or_else(|| Error::Sampler(format!("choice {i} has neither message nor text")))
        })
        .collect()
}

/// Produce `profile.sample_count` completions for `query`.
///
/// A warm cache entry (keyed by query hash and profile fingerprint) bypasses
/// the network entirely. A short count is a hard error: the frequency score
/// divides by `n`, so silent padding or truncation would bias detection.
pub fn generate_samples(
    query: &str,
    profile: &SamplingProfile,
    cache: Option<&SampleCache>,
) -> Result<SampleSet> {
    profile.validate()?;
    let key = SampleCache::key(query, profile);
    if let Some(cache) = cache {
        if let Some(hit) = cache.get(&key)? {
            return Ok(hit);
        }
    }
    if profile.endpoint.is_empty() {
        return Err(Error::Sampler(
            "no completion endpoint configured and no cache hit".into(),
        ));
    }

    let client = reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs(profile.timeout_secs))
        .build()
        .map_err(|e| Error::Sampler(format!("failed to build HTTP client: {e}")))?;
    let prompt = profile.prompt_for(query);

    let mut downgraded: Vec<String> = Vec::new();
    let mut attempt = 0;
    let texts = loop {
        let mut request =
            client
                .post(&profile.endpoint)
                .json(&request_body(profile, &prompt, &downgraded));
        if let Some(token) = &profile.auth_token {
            request = request.bearer_auth(token);
        }
        let outcome = request.send();
        match outcome {
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    let parsed: CompletionResponse = response.json().map_err(|e| {
                        Error::Sampler(format!("malformed completion response: {e}"))
                    })?;
                    break extract_texts(parsed)?;
                }
                let body = response.text().unwrap_or_default();
                if status.is_client_error() {
                    if let Some(param) = rejected_parameter(&body, &downgraded) {
                        downgraded.push(param);
                        continue; // one retry per downgradable parameter
                    }
                    return Err(Error::Sampler(format!(
                        "{} rejected request ({status}): {body}",
                        profile.endpoint
                    )));
                }
                if attempt >= profile.retry_budget {
                    return Err(Error::Sampler(format!(
                        "{} failed ({status}) after {attempt} retries: {body}",
                        profile.endpoint
                    )));
                }
            }
            Err(e) => {
                if attempt >= profile.retry_budget {
                    return Err(Error::Sampler(format!(
                        "request to {} failed after {attempt} retries: {e}",
                        profile.endpoint
                    )));
                }
            }
        }
        attempt += 1;
        std::thread::sleep(std::time::Duration::from_millis(100 * attempt as u64));
    };

    if texts.len() != profile.sample_count {
        let missing: Vec<usize> = (texts.len()..profile.sample_count).collect();
        return Err(Error::Sampler(format!(
            "endpoint returned {} of {} completions; missing indices {missing:?}",
            texts.len(),
            profile.sample_count
        )));
    }

    let set = SampleSet::new(texts, profile.provenance(&downgraded));
    if let Some(cache) = cache {
        cache.put(&key, &set)?;
    }
    Ok(set)
}

#[derive(Serialize, Deserialize)]
struct SamplesRow {
    id: serde_json::Value,
    samples: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<SampleProvenance>,
}

/// One line of a samples file.
pub fn serialize_samples_row(id: &str, set: &SampleSet) -> String {
    serde_json::to_string(&SamplesRow {
        id: serde_json::Value::String(id.to_string()),
        samples: set.samples.clone(),
        provenance: Some(set.provenance.clone()),
    })
    .expect("sample rows serialize")
}

/// Load a line-delimited samples file into a record-id keyed map. Duplicate
/// ids are rejected: two entries for one record make provenance ambiguous.
pub fn load_offline_samples(path: &Path) -> Result<BTreeMap<String, SampleSet>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut map = BTreeMap::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: SamplesRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no + 1,
            byte_offset: e.column().saturating_sub(1),
            message: e.to_string(),
        })?;
        let id = match row.id {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        let provenance = row.provenance.unwrap_or_else(|| SampleProvenance {
            endpoint: format!("offline:{}", path.display()),
            ..SampleProvenance::default()
        });
        if map
            .insert(id.clone(), SampleSet::new(row.samples, provenance))
            .is_some()
        {
            return Err(Error::validation(
                "id",
                format!("duplicate record id {id:?} in {}", path.display()),
            ));
        }
    }
    Ok(map)
}
