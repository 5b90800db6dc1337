//! personaforge interviews LLM role-playing agents with psychological scale
//! questions, filters the collected dialogues against human-annotated
//! personality ground truth, exports fine-tuning-ready chat datasets, and
//! scores role-play quality with judge-based and lexical metrics.
//!
//! The pipeline has four stages, each usable as a library call or a CLI
//! subcommand:
//!
//! 1. **generate** — screen scale questions for character fit, then run
//!    single-turn and five-turn interviews ([`interview`]).
//! 2. **filter** — judge the responses per trait dimension, classify the
//!    personality label, and discard records that contradict the character's
//!    annotated personality ([`assess`]).
//! 3. **export** — assemble the kept records into the three training subsets
//!    and write chat JSONL ([`dataset`]).
//! 4. **eval** — personality fidelity, motivation-recognition accuracy,
//!    Rouge-L, win-rate, five-dimension scoring, and multi-turn consistency
//!    ([`eval`]).
//!
//! All LLM access goes through one [`gateway::Gateway`] with retries, a
//! content-addressed response cache, a concurrency cap, and a scripted mock
//! backend that makes full offline runs deterministic and byte-reproducible.
//!
//! The accompanying book (`book/`) walks through each concept with runnable
//! snippets; start with the scale-banks chapter.
//!
//! ```
//! use personaforge::eval::rouge_l;
//!
//! let f1 = rouge_l("the cat sat", "the cat ate food");
//! assert!((f1 - 4.0 / 7.0).abs() < 1e-9);
//! ```

pub mod assess;
pub mod dataset;
pub mod eval;
pub mod gateway;
pub mod interview;
mod jsonv;
mod parse;
pub mod pipeline;
pub mod registry;
pub mod scales;
pub mod template;
mod util;

pub use assess::{AssessmentResult, Assessor, FilterOutcome, FilterPolicy};
pub use dataset::{DatasetSample, SubsetManifest, SubsetName};
pub use gateway::{ChatRequest, ChatResponse, Gateway, Message, MockBackend};
pub use interview::{InterviewKind, InterviewRecord, Interviewer};
pub use pipeline::{Metric, RunConfig, RunManifest};
pub use registry::{CharacterProfile, Registry};
pub use scales::{Question, Scale, ScaleBank};
pub use template::TemplateSet;
