//! Evaluation metrics: Rouge-L, motivation-recognition accuracy, win-rate,
//! five-dimension judged scoring, multi-turn consistency, and the
//! personality-fidelity orchestration.

pub mod consistency;
pub mod dimensional;
pub mod fidelity;
pub mod mcq;
pub mod rouge;
pub mod winrate;

pub use consistency::{ConsistencyError, ConsistencyReport, StdMode, consistency};
pub use dimensional::{DimensionalReport, DimensionalScore, Transcript, dimensional_scores};
pub use fidelity::{FidelityOptions, FidelityReport, personality_fidelity_run};
pub use mcq::{McqItem, McqReport, load_mcq, mr_accuracy, parse_answer_letter};
pub use rouge::{RougeReport, rouge_l, rouge_report};
pub use winrate::{WinRateItem, WinRateReport, win_rate};
