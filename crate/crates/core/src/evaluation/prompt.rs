//! Frozen multiple-choice prompt template.
//!
//! ```text
//! <retrieved doc 1>
//!
//! <retrieved doc K>
//!
//! <exemplar stem>
//! A. <option>
//! B. <option>
//! Answer: <correct option>
//!
//! <question stem>
//! A. <option>
//! B. <option>
//! Answer:
//! ```
//!
//! Blocks are joined by a blank line. Retrieved documents come first, then
//! exemplars, then the question. The continuations scored are the option
//! texts themselves.

use std::collections::HashSet;

use super::question::{Question, OPTION_LABELS};
use crate::corpus::ChunkLookup;
use crate::retrieval::{augment_query, RetrievalResult, DOC_SEPARATOR};
use crate::{Error, Result};

pub const ANSWER_CUE: &str = "Answer:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub context: String,
    pub continuations: Vec<String>,
}

fn question_block(q: &Question, answer: Option<&str>) -> String {
    let mut s = String::with_capacity(q.stem.len() + 64);
    s.push_str(&q.stem);
    for (label, opt) in OPTION_LABELS.iter().zip(&q.options) {
        s.push('\n');
        s.push(*label);
        s.push_str(". ");
        s.push_str(opt);
    }
    s.push('\n');
    s.push_str(ANSWER_CUE);
    if let Some(a) = answer {
        s.push(' ');
        s.push_str(a);
    }
    s
}

/// Builds the scoring context and per-option continuations.
pub fn assemble_prompt(
    question: &Question,
    shots: &[Question],
    hits: &RetrievalResult,
    lookup: &dyn ChunkLookup,
) -> Result<Prompt> {
    let mut seen = HashSet::new();
    for ex in shots {
        if ex.question_id == question.question_id {
            return Err(Error::invalid(format!(
                "exemplar `{}` is the question being asked",
                ex.question_id
            )));
        }
        if !seen.insert(ex.question_id.as_str()) {
            return Err(Error::invalid(format!(
                "exemplar `{}` repeated",
                ex.question_id
            )));
        }
    }
    let mut blocks: Vec<String> = shots
        .iter()
        .map(|ex| question_block(ex, Some(ex.correct_option())))
        .collect();
    blocks.push(question_block(question, None));
    let body = blocks.join(DOC_SEPARATOR);
    let context = augment_query(&body, hits, lookup)?;
    Ok(Prompt {
        context,
        continuations: question.options.clone(),
    })
}
