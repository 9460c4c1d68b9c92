//! Benchmark harness for prompt-based classification of learner-generated text.
//!
//! The crate evaluates chat-completion models on learning-engagement tasks
//! (behavior, emotion and cognition labels) with two prompt families:
//!
//! * **vanilla**: task claim, output-format instruction and the query text;
//! * **AGKA** (annotation-guideline knowledge augmentation): the vanilla frame
//!   plus label definitions extracted from annotation guidelines and an
//!   optional block of class-balanced few-shot exemplars.
//!
//! The pipeline is split into small modules that can be used on their own:
//!
//! | module        | purpose                                                        |
//! |---------------|----------------------------------------------------------------|
//! | [`corpus`]    | label schemas, JSONL datasets, preprocessing rules, splits      |
//! | [`sampler`]   | random under-sampling of few-shot exemplars                     |
//! | [`knowledge`] | label-definition extraction prompts, tolerant parsing, storage  |
//! | [`prompt`]    | template-driven rendering of vanilla and AGKA prompts           |
//! | [`llm`]       | provider abstraction, retries, rate limits, cache, mock models  |
//! | [`parse`]     | output normalization and the error taxonomy                     |
//! | [`metrics`]   | confusion matrices, accuracy, weighted F1, Welch's t-test       |
//! | [`runner`]    | experiment plans, trial execution, resumable results store      |
//! | [`report`]    | results/ablation tables, few-shot curves, confusion and errors  |
//! | [`cli`]       | the `lecbench` command-line front end                           |
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod corpus;
pub mod knowledge;
pub mod llm;
pub mod metrics;
pub mod parse;
pub mod prompt;
pub mod report;
pub mod runner;
pub mod sampler;

mod pydict;
mod rng;

pub use corpus::{Dataset, Example, LabelSchema, SplitSpec, TaskKind};
pub use knowledge::{KnowledgeBase, Provenance};
pub use llm::{CompletionOutcome, DecodingConfig, LlmClient, Provider, ProviderSpec};
pub use metrics::{ConfusionMatrix, EvalSummary, INVALID_LABEL};
pub use parse::{ErrorClass, ParseKind, ParseOutcome};
pub use prompt::{PromptTemplate, PromptVariant, RenderedPrompt};
pub use runner::{PredictionRecord, ShotCount};
pub use sampler::ShotSet;
