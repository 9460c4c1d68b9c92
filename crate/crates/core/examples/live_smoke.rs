//! Classifies a few toy posts with a real OpenAI-compatible endpoint.
//!
//! LECBENCH_LIVE_BASE_URL=https://api.openai.com/v1 LECBENCH_LIVE_MODEL=gpt-4o-mini \
//! OPENAI_API_KEY=... cargo run --example live_smoke

use std::path::Path;

use lecbench::corpus::{self, LabelSchema};
use lecbench::llm::{DecodingConfig, LlmClient, Provider, ProviderSpec, RetryPolicy};
use lecbench::parse;
use lecbench::prompt::PromptTemplate;
use url::Url;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (Ok(base), Ok(model)) = (std::env::var("LECBENCH_LIVE_BASE_URL"), std::env::var("LECBENCH_LIVE_MODEL")) else {
        println!("set LECBENCH_LIVE_BASE_URL and LECBENCH_LIVE_MODEL to run against a live endpoint");
        return Ok(());
    };
    let key_env = std::env::var("LECBENCH_LIVE_KEY_ENV").unwrap_or_else(|_| "OPENAI_API_KEY".into());
    let mut spec = ProviderSpec::new("live", Url::parse(&base)?, model);
    spec.api_key_env = Some(key_env);
    spec.max_concurrency = 2;
    let provider = Provider::http(spec)?;

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let schema = LabelSchema::load(data.join("schemas/epistemic.json"))?;
    let dataset = corpus::load_dataset(data.join("toy/epistemic.jsonl"), schema.clone())?;
    let template = PromptTemplate::load(data.join("templates/agka-v1.toml"))?;
    let client = LlmClient::new(RetryPolicy::default());

    for example in dataset.examples().iter().step_by(10) {
        let prompt = template.render_vanilla(&schema, &example.text)?;
        let out = client.complete(&provider, &prompt, &DecodingConfig::classification()).await?;
        let parsed = out.raw_text.as_deref().map(|raw| parse::normalize(raw, &schema));
        println!(
            "{:<10} gold {:<10} scored {:<10} {:?} ({} ms, {} attempt(s))",
            example.id,
            example.gold,
            parse::scoring_label(parsed.as_ref()),
            out.raw_text.as_deref().or(out.failure.as_ref().map(|f| f.message.as_str())),
            out.latency_ms,
            out.attempt_count
        );
    }
    Ok(())
}
