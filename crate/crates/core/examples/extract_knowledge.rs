//! Builds the guideline-extraction prompt and parses a model's reply into
//! label definitions. A scripted mock stands in for the model.
//!
//! cargo run --example extract_knowledge

use std::path::Path;
use std::sync::Arc;

use lecbench::corpus::LabelSchema;
use lecbench::knowledge;
use lecbench::llm::{LlmClient, MockRule, MockTransport, Provider, ProviderSpec};
use lecbench::prompt::PromptTemplate;

const GUIDELINES: &str = "Urgency reflects how quickly an instructor should respond to a post. \
Posts that report blocking problems, deadlines or grading errors need a prompt reply. \
Posts sharing opinions, thanks or general discussion can wait.";

const REPLY: &str = "Here are the definitions:\n```python\n{'High_urgency': 'The post reports a blocking problem, \
a deadline or a grading error that needs a prompt reply.', 'Low_urgency': 'The post shares opinions, \
thanks or discussion that can wait.'}\n```";

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let schema = LabelSchema::load(data.join("schemas/urgency.json"))?;
    let template = PromptTemplate::load(data.join("templates/agka-v1.toml"))?;

    let prompt = knowledge::build_extraction_prompt(&template, &schema, GUIDELINES)?;
    println!("=== extraction prompt ===\n{}\n", prompt.text);

    let mock = MockTransport::new(MockRule::script([(prompt.text.as_str(), REPLY)]));
    let provider = Provider::new(ProviderSpec::mock("extractor"), Arc::new(mock))?;
    let kb = knowledge::extract_knowledge(&LlmClient::default(), &provider, &template, &schema, GUIDELINES).await?;
    println!("provenance: {:?}", kb.provenance());
    for (label, definition) in kb.entries() {
        println!("{label}: {definition}");
    }
    println!("\nmapping as rendered in prompts:\n{}", kb.mapping_literal(&schema));
    Ok(())
}
