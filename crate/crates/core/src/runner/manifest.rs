use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{ExperimentPlan, LoadedDataset};
use crate::knowledge::KnowledgeBase;
use crate::prompt::PromptTemplate;
use crate::rng::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub n_examples: usize,
    /// SHA-256 over the canonical JSONL of the loaded examples.
    pub content_sha256: String,
    pub task_name: String,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge: Option<KnowledgeBase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRecord {
    pub name: String,
    pub model_id: String,
    pub base_url: String,
    #[serde(default)]
    pub snapshot: Option<String>,
}

/// Everything needed to re-render each prompt of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub software_version: String,
    pub started_at: String,
    #[serde(default)]
    pub finished_at: Option<String>,
    pub plan: ExperimentPlan,
    pub template_version: String,
    pub template_sha256: String,
    pub template: PromptTemplate,
    pub datasets: IndexMap<String, DatasetFingerprint>,
    pub providers: Vec<ProviderRecord>,
}

impl RunManifest {
    pub fn new(plan: &ExperimentPlan, template: &PromptTemplate, datasets: &[LoadedDataset]) -> Self {
        let template_json = serde_json::to_string(template).expect("template serializes");
        let datasets = datasets
            .iter()
            .filter(|d| plan.datasets.contains(&d.name))
            .map(|d| {
                let knowledge_sha256 = d
                    .knowledge
                    .as_ref()
                    .map(|kb| sha256_hex(serde_json::to_string(kb.as_ref()).expect("kb serializes").as_bytes()));
                (
                    d.name.clone(),
                    DatasetFingerprint {
                        n_examples: d.data.len(),
                        content_sha256: d.content_sha256(),
                        task_name: d.data.schema().task_name().to_owned(),
                        labels: d.data.schema().labels().to_vec(),
                        knowledge_sha256,
                        knowledge: d.knowledge.as_deref().cloned(),
                    },
                )
            })
            .collect();
        let providers = plan
            .providers
            .iter()
            .map(|p| ProviderRecord {
                name: p.name.clone(),
                model_id: p.model_id.clone(),
                base_url: p.base_url.to_string(),
                snapshot: p.snapshot.clone(),
            })
            .collect();
        Self {
            run_id: plan.run_id.clone(),
            software_version: env!("CARGO_PKG_VERSION").to_owned(),
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: None,
            plan: plan.clone(),
            template_version: template.version.clone(),
            template_sha256: sha256_hex(template_json.as_bytes()),
            template: template.clone(),
            datasets,
            providers,
        }
    }
}
