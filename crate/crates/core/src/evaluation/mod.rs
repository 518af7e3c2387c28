//! Multiple-choice evaluation: prompt assembly, log-likelihood argmax,
//! knowledge scores, relative gains and the configuration grid.

mod answer;
mod config;
mod grid;
mod metrics;
mod prompt;
mod question;

pub use answer::{answer_question, argmax, Answer, EvalContext, Retriever};
pub use config::{ablation_configs, EvalConfig, MAX_K, SHOT_COUNTS};
pub use grid::{
    journal_path, knowledge_score, read_journal, read_journal_dir, run_grid, GridOptions,
    JournalFile, ResultRow, ResultTable,
};
pub use metrics::{has_knowledge, relative_gain, relative_gain_exact, KnowledgeScore};
pub(crate) use question::OPTION_LABELS;
pub use prompt::{assemble_prompt, Prompt, ANSWER_CUE};
pub use question::{validate_questions, Question};
