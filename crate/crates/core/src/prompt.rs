//! Template-driven rendering of classification prompts.
//!
//! A prompt is assembled from named components in a fixed order: task claim,
//! label-definition knowledge, output-format instruction, the few-shot block
//! and the query. Vanilla prompts use only the task claim, the output format
//! and the query. Every rendered prompt records the byte range of each
//! component so tests can check the span algebra directly.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Example, LabelSchema};
use crate::knowledge::KnowledgeBase;
use crate::rng::sha256_hex;

const DEFAULT_TEMPLATE: &str = include_str!("../data/templates/agka-v1.toml");

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("knowledge is missing definitions for {0:?}")]
    IncompleteKnowledge(Vec<String>),
    #[error("knowledge base is for task {found:?}, expected {expected:?}")]
    KnowledgeTaskMismatch { expected: String, found: String },
    #[error("shot {id:?} has label {label:?} which is not in the schema")]
    ShotLabel { id: String, label: String },
    #[error("label {0:?} contains a double quote")]
    QuotedLabel(String),
    #[error("invalid prompt variant {0:?}")]
    InvalidVariant(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Vanilla,
    Agka,
}

/// Prompt family plus shot count. Vanilla prompts never carry shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptVariant {
    kind: PromptKind,
    shots: u32,
}

impl PromptVariant {
    pub const VANILLA: PromptVariant = PromptVariant {
        kind: PromptKind::Vanilla,
        shots: 0,
    };

    pub fn vanilla() -> Self {
        Self::VANILLA
    }

    pub fn agka(shots: u32) -> Self {
        Self {
            kind: PromptKind::Agka,
            shots,
        }
    }

    pub fn new(kind: PromptKind, shots: u32) -> Result<Self, PromptError> {
        if kind == PromptKind::Vanilla && shots != 0 {
            return Err(PromptError::InvalidVariant(format!("vanilla-{shots}")));
        }
        Ok(Self { kind, shots })
    }

    pub fn kind(self) -> PromptKind {
        self.kind
    }

    pub fn shots(self) -> u32 {
        self.shots
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PromptKind::Vanilla => f.write_str("vanilla"),
            PromptKind::Agka => write!(f, "agka-{}", self.shots),
        }
    }
}

impl FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PromptError::InvalidVariant(s.to_owned());
        let lower = s.trim().to_ascii_lowercase();
        let (kind, shots) = match lower.split_once('-') {
            Some((k, n)) => (k.to_owned(), n.parse::<u32>().map_err(|_| bad())?),
            None => (lower.clone(), 0),
        };
        let kind = match kind.as_str() {
            "vanilla" => PromptKind::Vanilla,
            "agka" => PromptKind::Agka,
            _ => return Err(bad()),
        };
        Self::new(kind, shots)
    }
}

impl TryFrom<String> for PromptVariant {
    type Error = PromptError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PromptVariant> for String {
    fn from(v: PromptVariant) -> String {
        v.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    TaskClaim,
    Knowledge,
    OutputFormat,
    ShotBlock,
    Query,
    /// The whole knowledge-extraction request.
    Instruction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub component: Component,
    pub range: Range<usize>,
}

/// Non-fatal oddities noticed while rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "lint")]
pub enum PromptLint {
    /// A shot text contains the `Label:` marker used by the frame.
    ShotContainsLabelMarker { shot_id: String },
    QueryContainsLabelMarker,
    /// The query text also appears inside a shot.
    QueryInShot { shot_id: String },
}

/// The exact message text sent to a model, with its component layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub spans: Vec<Span>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lints: Vec<PromptLint>,
}

impl RenderedPrompt {
    pub fn span(&self, component: Component) -> Option<&str> {
        self.spans
            .iter()
            .find(|s| s.component == component)
            .map(|s| &self.text[s.range.clone()])
    }

    pub fn components(&self) -> Vec<Component> {
        self.spans.iter().map(|s| s.component).collect()
    }

    /// Hex SHA-256 of the prompt text.
    pub fn hash(&self) -> String {
        sha256_hex(self.text.as_bytes())
    }
}

#[derive(Default)]
struct Builder {
    text: String,
    spans: Vec<Span>,
}

impl Builder {
    fn push(&mut self, component: Component, part: &str) {
        let start = self.text.len();
        self.text.push_str(part);
        self.spans.push(Span {
            component,
            range: start..self.text.len(),
        });
    }

    fn finish(self, lints: Vec<PromptLint>) -> RenderedPrompt {
        RenderedPrompt {
            text: self.text,
            spans: self.spans,
            lints,
        }
    }
}

/// Renders `labels` as `["A", "B"]`.
pub fn label_list_literal(labels: &[String]) -> Result<String, PromptError> {
    let quoted = labels
        .iter()
        .map(|l| {
            if l.contains('"') {
                Err(PromptError::QuotedLabel(l.clone()))
            } else {
                Ok(format!("\"{l}\""))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(format!("[{}]", quoted.join(", ")))
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub version: String,
    pub task_claim: String,
    pub knowledge: String,
    pub output_format: String,
    pub shot: String,
    pub query: String,
    pub extraction: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }
}

impl PromptTemplate {
    pub fn from_toml_str(src: &str) -> Result<Self, PromptError> {
        let template: PromptTemplate = toml::from_str(src).map_err(|e| PromptError::Template(e.to_string()))?;
        template.validate()?;
        Ok(template)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&src)
    }

    fn validate(&self) -> Result<(), PromptError> {
        let sections: [(&str, &str, &[&str], &[&str]); 6] = [
            ("task_claim", &self.task_claim, &["task_name", "kind_noun", "label_list"], &["label_list"]),
            ("knowledge", &self.knowledge, &["subject", "mapping"], &["mapping"]),
            ("output_format", &self.output_format, &[], &[]),
            ("shot", &self.shot, &["text", "label"], &["text", "label"]),
            ("query", &self.query, &["text"], &["text"]),
            ("extraction", &self.extraction, &["label_list", "guidelines"], &["label_list", "guidelines"]),
        ];
        for (name, body, allowed, required) in sections {
            let used = slot_names(body).map_err(|e| PromptError::Template(format!("{name}: {e}")))?;
            if let Some(bad) = used.iter().find(|s| !allowed.contains(&s.as_str())) {
                return Err(PromptError::Template(format!("{name}: unknown slot {{{{{bad}}}}}")));
            }
            if let Some(missing) = required.iter().find(|r| !used.iter().any(|u| u == *r)) {
                return Err(PromptError::Template(format!("{name}: missing slot {{{{{missing}}}}}")));
            }
        }
        Ok(())
    }

    fn task_claim(&self, schema: &LabelSchema) -> Result<String, PromptError> {
        let labels = label_list_literal(schema.labels())?;
        Ok(fill(
            &self.task_claim,
            &[
                ("task_name", schema.task_name()),
                ("kind_noun", schema.task_kind().label_noun()),
                ("label_list", &labels),
            ],
        ))
    }

    fn query(&self, text: &str) -> Result<String, PromptError> {
        if text.trim().is_empty() {
            return Err(PromptError::EmptyQuery);
        }
        Ok(fill(&self.query, &[("text", text)]))
    }

    /// Task claim, output format and query.
    pub fn render_vanilla(&self, schema: &LabelSchema, query_text: &str) -> Result<RenderedPrompt, PromptError> {
        let query = self.query(query_text)?;
        let mut b = Builder::default();
        b.push(Component::TaskClaim, &self.task_claim(schema)?);
        b.push(Component::OutputFormat, &self.output_format);
        b.push(Component::Query, &query);
        Ok(b.finish(query_lints(query_text)))
    }

    /// Task claim, knowledge, output format, shots (if any) and query.
    pub fn render_agka(
        &self,
        schema: &LabelSchema,
        knowledge: &KnowledgeBase,
        shots: &[Example],
        query_text: &str,
    ) -> Result<RenderedPrompt, PromptError> {
        let query = self.query(query_text)?;
        if knowledge.task_name() != schema.task_name() {
            return Err(PromptError::KnowledgeTaskMismatch {
                expected: schema.task_name().to_owned(),
                found: knowledge.task_name().to_owned(),
            });
        }
        let missing: Vec<String> = schema
            .labels()
            .iter()
            .filter(|l| knowledge.definition(l).is_none())
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(PromptError::IncompleteKnowledge(missing));
        }
        let mut lints = Vec::new();
        let mut shot_block = String::new();
        for shot in shots {
            if !schema.contains(&shot.gold) {
                return Err(PromptError::ShotLabel {
                    id: shot.id.clone(),
                    label: shot.gold.clone(),
                });
            }
            if shot.text.contains("Label:") {
                lints.push(PromptLint::ShotContainsLabelMarker { shot_id: shot.id.clone() });
            }
            if shot.text.contains(query_text) {
                lints.push(PromptLint::QueryInShot { shot_id: shot.id.clone() });
            }
            shot_block.push_str(&fill(&self.shot, &[("text", &shot.text), ("label", &shot.gold)]));
        }
        lints.extend(query_lints(query_text));

        let mapping = knowledge.mapping_literal(schema);
        let mut b = Builder::default();
        b.push(Component::TaskClaim, &self.task_claim(schema)?);
        b.push(
            Component::Knowledge,
            &fill(&self.knowledge, &[("subject", schema.subject()), ("mapping", &mapping)]),
        );
        b.push(Component::OutputFormat, &self.output_format);
        if !shots.is_empty() {
            b.push(Component::ShotBlock, &shot_block);
        }
        b.push(Component::Query, &query);
        Ok(b.finish(lints))
    }

    /// The request asking a model to define every label from guideline text.
    pub fn render_extraction(&self, schema: &LabelSchema, guidelines: &str) -> Result<RenderedPrompt, PromptError> {
        let labels = label_list_literal(schema.labels())?;
        let mut b = Builder::default();
        b.push(
            Component::Instruction,
            &fill(&self.extraction, &[("label_list", &labels), ("guidelines", guidelines)]),
        );
        Ok(b.finish(Vec::new()))
    }
}

fn query_lints(query_text: &str) -> Vec<PromptLint> {
    if query_text.contains("Label:") {
        vec![PromptLint::QueryContainsLabelMarker]
    } else {
        Vec::new()
    }
}

fn slot_names(body: &str) -> Result<Vec<String>, String> {
    let mut names = Vec::new();
    let mut rest = body;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or("unclosed {{")?;
        let name = &after[..end];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad slot name {name:?}"));
        }
        names.push(name.to_owned());
        rest = &after[end + 2..];
    }
    Ok(names)
}

/// Single-pass slot substitution. Values are inserted verbatim.
fn fill(body: &str, values: &[(&str, &str)]) -> String {
    let lookup: HashMap<&str, &str> = values.iter().copied().collect();
    let mut out = String::with_capacity(body.len());
    let mut rest = body;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = &after[..end];
                match lookup.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TaskKind;
    use crate::knowledge::Provenance;

    fn binary() -> LabelSchema {
        LabelSchema::new("Binary Emotion Classification", TaskKind::Emotion, ["Positive", "Negative"]).unwrap()
    }

    fn binary_kb() -> KnowledgeBase {
        KnowledgeBase::new(
            &binary(),
            [("Positive", "Good feelings."), ("Negative", "Bad feelings.")],
            Provenance::Manual,
        )
        .unwrap()
    }

    fn assert_spans_tile(p: &RenderedPrompt) {
        let mut at = 0;
        for s in &p.spans {
            assert_eq!(s.range.start, at);
            at = s.range.end;
        }
        assert_eq!(at, p.text.len());
    }

    #[test]
    fn vanilla_structure() {
        let t = PromptTemplate::default();
        let p = t.render_vanilla(&binary(), "This is such a great way to explain this!").unwrap();
        assert_eq!(
            p.components(),
            vec![Component::TaskClaim, Component::OutputFormat, Component::Query]
        );
        assert_spans_tile(&p);
        assert!(p.text.ends_with("Text: This is such a great way to explain this!\n\nLabel: "));
        assert_eq!(p, t.render_vanilla(&binary(), "This is such a great way to explain this!").unwrap());
        assert!(matches!(t.render_vanilla(&binary(), "  "), Err(PromptError::EmptyQuery)));
    }

    #[test]
    fn task_kind_noun_drives_claim() {
        let t = PromptTemplate::default();
        let schema = LabelSchema::new("Cognitive Presence Classification", TaskKind::Cognition, ["Other"]).unwrap();
        let p = t.render_vanilla(&schema, "x").unwrap();
        assert!(p.text.contains("assign a cognitive label from [\"Other\"]"));
    }

    #[test]
    fn agka_zero_shot_is_few_shot_minus_shot_block() {
        let t = PromptTemplate::default();
        let shots = vec![Example::new("s1", "Love it", "Positive"), Example::new("s2", "Hate it", "Negative")];
        let zero = t.render_agka(&binary(), &binary_kb(), &[], "query").unwrap();
        let few = t.render_agka(&binary(), &binary_kb(), &shots, "query").unwrap();
        assert_spans_tile(&few);
        let block = few.span(Component::ShotBlock).unwrap();
        assert_eq!(block, "Text: Love it\n\nLabel: Positive\n\nText: Hate it\n\nLabel: Negative\n\n");
        assert_eq!(few.text.replacen(block, "", 1), zero.text);
        assert!(zero.span(Component::ShotBlock).is_none());
    }

    #[test]
    fn shot_with_label_marker_is_verbatim_and_linted() {
        let t = PromptTemplate::default();
        let shots = vec![Example::new("odd", "Label: Negative, honestly", "Positive")];
        let p = t.render_agka(&binary(), &binary_kb(), &shots, "query").unwrap();
        assert_spans_tile(&p);
        assert!(p.span(Component::ShotBlock).unwrap().contains("Text: Label: Negative, honestly\n\n"));
        assert_eq!(p.lints, vec![PromptLint::ShotContainsLabelMarker { shot_id: "odd".into() }]);
    }

    #[test]
    fn agka_errors() {
        let t = PromptTemplate::default();
        let bad_shot = vec![Example::new("x", "t", "Neutral")];
        assert!(matches!(
            t.render_agka(&binary(), &binary_kb(), &bad_shot, "q"),
            Err(PromptError::ShotLabel { .. })
        ));
        let other = LabelSchema::new("Binary Emotion Classification", TaskKind::Emotion, ["Positive", "Negative", "Mixed"]).unwrap();
        match t.render_agka(&other, &binary_kb(), &[], "q") {
            Err(PromptError::IncompleteKnowledge(missing)) => assert_eq!(missing, vec!["Mixed"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variants_parse() {
        assert_eq!("vanilla".parse::<PromptVariant>().unwrap(), PromptVariant::vanilla());
        assert_eq!("agka-5".parse::<PromptVariant>().unwrap(), PromptVariant::agka(5));
        assert_eq!("AGKA".parse::<PromptVariant>().unwrap(), PromptVariant::agka(0));
        assert!("vanilla-5".parse::<PromptVariant>().is_err());
        assert!("cot-1".parse::<PromptVariant>().is_err());
        assert_eq!(PromptVariant::agka(10).to_string(), "agka-10");
    }

    #[test]
    fn template_validation() {
        let t = PromptTemplate {
            query: "Text: {{txt}}".into(),
            ..PromptTemplate::default()
        };
        assert!(t.validate().is_err());
        let t = PromptTemplate {
            shot: "Text: {{text}}".into(),
            ..PromptTemplate::default()
        };
        assert!(t.validate().is_err());
        assert!(PromptTemplate::from_toml_str("version = 1").is_err());
    }

    #[test]
    fn fill_does_not_rescan_values() {
        assert_eq!(fill("a {{x}} b", &[("x", "{{x}}")]), "a {{x}} b");
        assert_eq!(fill("{{y}}", &[]), "{{y}}");
    }

    #[test]
    fn quoted_label_rejected() {
        let schema = LabelSchema::new("t", TaskKind::Emotion, ["say \"hi\""]).unwrap();
        assert!(matches!(
            PromptTemplate::default().render_vanilla(&schema, "q"),
            Err(PromptError::QuotedLabel(_))
        ));
    }
}
