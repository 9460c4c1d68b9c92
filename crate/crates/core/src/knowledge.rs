//! Label-definition knowledge: extraction prompts, tolerant parsing of the
//! model's `{label: definition}` mapping, and knowledge files on disk.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{fold_label, LabelSchema};
use crate::llm::{DecodingConfig, LlmClient, LlmError, Provider};
use crate::prompt::{PromptError, PromptTemplate, RenderedPrompt};
use crate::pydict;

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("annotation guidelines are empty")]
    EmptyGuidelines,
    #[error("definitions missing for labels {0:?}")]
    MissingLabels(Vec<String>),
    #[error("definitions given for labels not in the schema: {0:?}")]
    ExtraLabels(Vec<String>),
    #[error("label {0:?} is defined more than once")]
    DuplicateLabel(String),
    #[error("definition of {0:?} is empty")]
    EmptyDefinition(String),
    #[error("no label mapping found in model output: {reason}")]
    Unparseable { reason: String, raw: String },
    #[error("knowledge file is for task {found:?}, schema is {expected:?}")]
    TaskMismatch { expected: String, found: String },
    #[error("model call failed: {0}")]
    ProviderFailure(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

/// Where a knowledge base came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    LlmExtracted { model_id: String, timestamp: String },
    Manual,
}

/// Definitions for every label of one task, in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    task_name: String,
    provenance: Provenance,
    entries: IndexMap<String, String>,
}

impl KnowledgeBase {
    /// Validates `entries` against `schema`. Keys are matched
    /// case-insensitively and stored under the schema's spelling.
    pub fn new<K, V>(
        schema: &LabelSchema,
        entries: impl IntoIterator<Item = (K, V)>,
        provenance: Provenance,
    ) -> Result<Self, KnowledgeError>
    where
        K: Into<String>,
        V: Into<String>,
    {
        let mut found: IndexMap<String, String> = IndexMap::new();
        let mut extra = Vec::new();
        for (key, value) in entries {
            let key = key.into();
            let value = value.into().trim().to_owned();
            match schema.resolve(&key) {
                Some(label) => {
                    if found.contains_key(label) {
                        return Err(KnowledgeError::DuplicateLabel(label.to_owned()));
                    }
                    if value.is_empty() {
                        return Err(KnowledgeError::EmptyDefinition(label.to_owned()));
                    }
                    found.insert(label.to_owned(), value);
                }
                None => extra.push(key),
            }
        }
        let missing: Vec<String> = schema
            .labels()
            .iter()
            .filter(|l| !found.contains_key(l.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(KnowledgeError::MissingLabels(missing));
        }
        if !extra.is_empty() {
            return Err(KnowledgeError::ExtraLabels(extra));
        }
        let entries = schema
            .labels()
            .iter()
            .map(|l| (l.clone(), found.swap_remove(l.as_str()).expect("checked above")))
            .collect();
        Ok(Self {
            task_name: schema.task_name().to_owned(),
            provenance,
            entries,
        })
    }

    pub fn task_name(&self) -> &str {
        &self.task_name
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn entries(&self) -> &IndexMap<String, String> {
        &self.entries
    }

    pub fn definition(&self, label: &str) -> Option<&str> {
        self.entries.get(label).map(String::as_str)
    }

    /// `{"Label": "definition", ...}` in schema order, as inserted into
    /// AGKA prompts.
    pub fn mapping_literal(&self, schema: &LabelSchema) -> String {
        let body: Vec<String> = schema
            .labels()
            .iter()
            .filter_map(|l| self.entries.get(l).map(|d| (l, d)))
            .map(|(l, d)| {
                format!(
                    "{}: {}",
                    serde_json::to_string(l).expect("string"),
                    serde_json::to_string(d).expect("string")
                )
            })
            .collect();
        format!("{{{}}}", body.join(", "))
    }
}

/// The request asking a model to define each label from guideline text.
pub fn build_extraction_prompt(
    template: &PromptTemplate,
    schema: &LabelSchema,
    guidelines: &str,
) -> Result<RenderedPrompt, KnowledgeError> {
    if guidelines.trim().is_empty() {
        return Err(KnowledgeError::EmptyGuidelines);
    }
    Ok(template.render_extraction(schema, guidelines)?)
}

fn strip_fences(raw: &str) -> String {
    raw.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Finds the label mapping in a model response and validates it.
///
/// Tolerates code fences, prose before and after the mapping, single- or
/// double-quoted strings and case differences in label names.
pub fn parse_knowledge_response(
    raw: &str,
    schema: &LabelSchema,
    provenance: Provenance,
) -> Result<KnowledgeBase, KnowledgeError> {
    let cleaned = strip_fences(raw);
    let mut last_err = String::from("no '{' in output");
    let mut parsed = None;
    for (at, _) in cleaned.match_indices('{') {
        match pydict::parse_string_map(&cleaned[at..]) {
            Ok(map) if !map.is_empty() => {
                parsed = Some(map);
                break;
            }
            Ok(_) => last_err = "empty mapping".into(),
            Err(e) => last_err = e,
        }
    }
    let Some(map) = parsed else {
        return Err(KnowledgeError::Unparseable {
            reason: last_err,
            raw: raw.to_owned(),
        });
    };
    KnowledgeBase::new(schema, map, provenance)
}

#[derive(Debug, Serialize, Deserialize)]
struct KnowledgeFile {
    task_name: String,
    provenance: Provenance,
    entries: IndexMap<String, String>,
}

/// Writes `kb` as a pretty-printed knowledge JSON file.
pub fn store_knowledge(kb: &KnowledgeBase, path: impl AsRef<Path>) -> Result<(), KnowledgeError> {
    let path = path.as_ref();
    let file = KnowledgeFile {
        task_name: kb.task_name.clone(),
        provenance: kb.provenance.clone(),
        entries: kb.entries.clone(),
    };
    let body = serde_json::to_string_pretty(&file).expect("knowledge serializes");
    fs::write(path, body + "\n").map_err(|e| KnowledgeError::File {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Reads a knowledge file and re-validates it against `schema`.
pub fn load_knowledge(path: impl AsRef<Path>, schema: &LabelSchema) -> Result<KnowledgeBase, KnowledgeError> {
    let path = path.as_ref();
    let file_err = |message: String| KnowledgeError::File {
        path: path.to_owned(),
        message,
    };
    let body = fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
    let file: KnowledgeFile = serde_json::from_str(&body).map_err(|e| file_err(e.to_string()))?;
    if file.task_name != schema.task_name() {
        return Err(KnowledgeError::TaskMismatch {
            expected: schema.task_name().to_owned(),
            found: file.task_name,
        });
    }
    let keys: HashSet<String> = file.entries.keys().map(|k| fold_label(k)).collect();
    if keys.len() != file.entries.len() {
        return Err(file_err("duplicate label keys".into()));
    }
    KnowledgeBase::new(schema, file.entries, file.provenance)
}

/// Runs the extraction prompt against `provider` and parses the reply.
///
/// Uses the classification decoding settings with a larger output budget.
pub async fn extract_knowledge(
    client: &LlmClient,
    provider: &Provider,
    template: &PromptTemplate,
    schema: &LabelSchema,
    guidelines: &str,
) -> Result<KnowledgeBase, KnowledgeError> {
    let prompt = build_extraction_prompt(template, schema, guidelines)?;
    let outcome = client
        .complete(provider, &prompt, &DecodingConfig::knowledge_extraction())
        .await?;
    let Some(raw) = outcome.raw_text else {
        let failure = outcome.failure.map(|f| f.to_string()).unwrap_or_default();
        return Err(KnowledgeError::ProviderFailure(failure));
    };
    let provenance = Provenance::LlmExtracted {
        model_id: provider.spec().model_id.clone(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    parse_knowledge_response(&raw, schema, provenance)
}
