//! Turns raw model output into a label or a classified failure.
//!
//! The pipeline trims the output, drops code-fence lines, surrounding
//! quotes, a leading `Label:` and a trailing full stop, then compares
//! case-insensitively against the schema:
//!
//! 1. the whole remainder is a label: [`ParseKind::ExactLabel`];
//! 2. every line or `, ; | /`-separated part is a label and at least two
//!    distinct labels occur: [`ParseKind::MultipleAnswers`];
//! 3. the first line is a label and more text follows:
//!    [`ParseKind::ExtractedLabel`];
//! 4. anything else: [`ParseKind::NoLabel`], listing every label that
//!    occurs as a whole word.
//!
//! Outputs that do not yield a label are scored as [`INVALID_LABEL`].

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{fold_label, LabelSchema};
use crate::metrics::INVALID_LABEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseKind {
    ExactLabel,
    ExtractedLabel,
    MultipleAnswers,
    NoLabel,
}

impl ParseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExactLabel => "exact_label",
            Self::ExtractedLabel => "extracted_label",
            Self::MultipleAnswers => "multiple_answers",
            Self::NoLabel => "no_label",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub kind: ParseKind,
    /// Set for exact and extracted labels, always spelled as in the schema.
    pub label: Option<String>,
    /// Labels found in the output, in order of appearance for multiple
    /// answers and in schema order otherwise.
    pub all_found: Vec<String>,
}

/// Error taxonomy for one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    IncorrectAnswer,
    FormatViolation,
    MultipleAnswers,
    ProviderFailure,
    None,
}

impl ErrorClass {
    /// The four failure classes, in report order.
    pub const FAILURES: [ErrorClass; 4] = [
        Self::IncorrectAnswer,
        Self::FormatViolation,
        Self::MultipleAnswers,
        Self::ProviderFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::IncorrectAnswer => "incorrect_answer",
            Self::FormatViolation => "format_violation",
            Self::MultipleAnswers => "multiple_answers",
            Self::ProviderFailure => "provider_failure",
            Self::None => "none",
        }
    }
}

fn strip_quotes(s: &str) -> &str {
    for (open, close) in [('"', '"'), ('\'', '\''), ('`', '`'), ('“', '”'), ('‘', '’')] {
        if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return s[open.len_utf8()..s.len() - close.len_utf8()].trim();
        }
    }
    s
}

fn strip_label_prefix(s: &str) -> &str {
    const PREFIX: &str = "label:";
    match s.get(..PREFIX.len()) {
        Some(head) if head.eq_ignore_ascii_case(PREFIX) => s[PREFIX.len()..].trim_start(),
        _ => s,
    }
}

fn clean(raw: &str) -> String {
    let unfenced: Vec<&str> = raw
        .trim()
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect();
    let joined = unfenced.join("\n");
    let mut s = strip_quotes(joined.trim());
    s = strip_label_prefix(s);
    s = strip_quotes(s);
    s.strip_suffix('.').unwrap_or(s).trim().to_owned()
}

fn resolve<'s>(schema: &'s LabelSchema, text: &str) -> Option<&'s str> {
    let folded = fold_label(text);
    if folded.is_empty() {
        return None;
    }
    schema.resolve(&folded)
}

/// Compiled once per distinct label; compiling Unicode classes is slow.
fn label_pattern(label: &str) -> Regex {
    static PATTERNS: OnceLock<Mutex<HashMap<String, Regex>>> = OnceLock::new();
    let mut cache = PATTERNS.get_or_init(Default::default).lock().expect("pattern cache poisoned");
    cache
        .entry(label.to_owned())
        .or_insert_with(|| {
            let words: Vec<String> = fold_label(label).split(' ').map(regex::escape).collect();
            Regex::new(&format!(r"(?i)(?:^|[^\p{{L}}\p{{N}}_\-]){}(?:$|[^\p{{L}}\p{{N}}_\-])", words.join(r"[\s_\-]+")))
                .expect("escaped label forms a valid pattern")
        })
        .clone()
}

/// Labels occurring as whole words in `text`, in schema order.
pub fn labels_mentioned(text: &str, schema: &LabelSchema) -> Vec<String> {
    schema
        .labels()
        .iter()
        .filter(|l| label_pattern(l).is_match(text))
        .cloned()
        .collect()
}

/// Classifies raw model output against `schema`. Never fails.
pub fn normalize(raw: &str, schema: &LabelSchema) -> ParseOutcome {
    let text = clean(raw);

    if let Some(label) = resolve(schema, &text) {
        return ParseOutcome {
            kind: ParseKind::ExactLabel,
            label: Some(label.to_owned()),
            all_found: vec![label.to_owned()],
        };
    }

    let parts: Vec<&str> = text
        .split(['\n', ',', ';', '|', '/'])
        .map(|p| strip_quotes(p.trim()).trim())
        .filter(|p| !p.is_empty())
        .collect();
    let resolved: Option<Vec<&str>> = parts.iter().map(|p| resolve(schema, p)).collect();
    if let Some(found) = resolved {
        let mut distinct: Vec<String> = Vec::new();
        for label in found {
            if !distinct.iter().any(|d| d == label) {
                distinct.push(label.to_owned());
            }
        }
        if distinct.len() >= 2 {
            return ParseOutcome {
                kind: ParseKind::MultipleAnswers,
                label: None,
                all_found: distinct,
            };
        }
    }

    let first_line = text.lines().next().unwrap_or("");
    let first = strip_quotes(first_line.trim());
    let first = first.strip_suffix('.').unwrap_or(first);
    if let Some(label) = resolve(schema, first) {
        return ParseOutcome {
            kind: ParseKind::ExtractedLabel,
            label: Some(label.to_owned()),
            all_found: labels_mentioned(&text, schema),
        };
    }

    ParseOutcome {
        kind: ParseKind::NoLabel,
        label: None,
        all_found: labels_mentioned(&text, schema),
    }
}

/// Error class of one prediction. `outcome` is `None` when the provider
/// returned no text.
pub fn classify_error(outcome: Option<&ParseOutcome>, gold: &str) -> ErrorClass {
    let Some(outcome) = outcome else {
        return ErrorClass::ProviderFailure;
    };
    match outcome.kind {
        ParseKind::ExactLabel if outcome.label.as_deref() == Some(gold) => ErrorClass::None,
        ParseKind::ExactLabel => ErrorClass::IncorrectAnswer,
        ParseKind::ExtractedLabel | ParseKind::NoLabel => ErrorClass::FormatViolation,
        ParseKind::MultipleAnswers => ErrorClass::MultipleAnswers,
    }
}

/// The label a prediction is scored as.
pub fn scoring_label(outcome: Option<&ParseOutcome>) -> &str {
    match outcome {
        Some(ParseOutcome {
            kind: ParseKind::ExactLabel | ParseKind::ExtractedLabel,
            label: Some(label),
            ..
        }) => label,
        _ => INVALID_LABEL,
    }
}
