use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Topic;
use crate::{Error, Result};

/// Multiple-choice question with exactly one correct option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub stem: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub topic: Topic,
    #[serde(default)]
    pub source_chunk: Option<String>,
}

impl Question {
    pub fn num_options(&self) -> usize {
        self.options.len()
    }

    pub fn correct_option(&self) -> &str {
        &self.options[self.correct_index]
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.question_id;
        if id.is_empty() {
            return Err(Error::invalid("question with empty id"));
        }
        if self.stem.trim().is_empty() {
            return Err(Error::invalid(format!("question `{id}` has an empty stem")));
        }
        if self.options.len() < 2 || self.options.len() > OPTION_LABELS.len() {
            return Err(Error::invalid(format!(
                "question `{id}` has {} options",
                self.options.len()
            )));
        }
        if self.correct_index >= self.options.len() {
            return Err(Error::invalid(format!(
                "question `{id}` correct index {} out of range",
                self.correct_index
            )));
        }
        let mut seen = HashSet::new();
        for o in &self.options {
            if o.trim().is_empty() {
                return Err(Error::invalid(format!("question `{id}` has an empty option")));
            }
            if !seen.insert(o.as_str()) {
                return Err(Error::invalid(format!(
                    "question `{id}` repeats option `{o}`"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) const OPTION_LABELS: [char; 26] = [
    'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O', 'P', 'Q', 'R',
    'S', 'T', 'U', 'V', 'W', 'X', 'Y', 'Z',
];

/// Validates a question set: each question valid, ids unique.
pub fn validate_questions(questions: &[Question]) -> Result<()> {
    let mut ids = HashSet::new();
    for q in questions {
        q.validate()?;
        if !ids.insert(q.question_id.as_str()) {
            return Err(Error::invalid(format!(
                "duplicate question id `{}`",
                q.question_id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) fn sample(id: &str, options: &[&str], correct: usize) -> Question {
    Question {
        question_id: id.into(),
        stem: format!("Stem of {id}?"),
        options: options.iter().map(|s| s.to_string()).collect(),
        correct_index: correct,
        topic: Topic::Anatomy,
        source_chunk: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(sample("q", &["a", "b"], 1).validate().is_ok());
        assert!(sample("q", &["a"], 0).validate().is_err());
        assert!(sample("q", &["a", "b"], 2).validate().is_err());
        assert!(sample("q", &["a", "a"], 0).validate().is_err());
        let qs = vec![sample("q", &["a", "b"], 0), sample("q", &["c", "d"], 0)];
        assert!(validate_questions(&qs).is_err());
    }
}
