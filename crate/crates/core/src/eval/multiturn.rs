use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnOrder {
    Original,
    Swapped,
}

impl TurnOrder {
    pub fn as_str(&self) -> &'static str {
        match self {
            TurnOrder::Original => "original",
            TurnOrder::Swapped => "swapped",
        }
    }
}

impl std::str::FromStr for TurnOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "original" => Ok(TurnOrder::Original),
            "swapped" => Ok(TurnOrder::Swapped),
            other => Err(format!("unknown order tag {other:?}")),
        }
    }
}

/// Correctness of both turns of one two-turn dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiTurnRecord {
    pub image_id: String,
    pub order: TurnOrder,
    pub q1_correct: bool,
    pub q2_correct: bool,
}

/// Counts behind the conditional accuracy, mergeable across shards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnCounts {
    pub records: u64,
    pub first_correct: u64,
    pub both_correct: u64,
}

impl TurnCounts {
    pub fn push(&mut self, r: &MultiTurnRecord) {
        self.records += 1;
        if r.q1_correct {
            self.first_correct += 1;
            if r.q2_correct {
                self.both_correct += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.records += other.records;
        self.first_correct += other.first_correct;
        self.both_correct += other.both_correct;
    }

    pub fn accuracy(&self) -> ConditionalAccuracy {
        if self.first_correct == 0 {
            ConditionalAccuracy::Undefined
        } else {
            ConditionalAccuracy::Defined {
                both_correct: self.both_correct,
                first_correct: self.first_correct,
            }
        }
    }
}

/// Probability that the second turn is right given the first one was.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConditionalAccuracy {
    Defined { both_correct: u64, first_correct: u64 },
    /// No record answered the first turn correctly.
    Undefined,
}

impl ConditionalAccuracy {
    pub fn value(&self) -> Option<f64> {
        match *self {
            ConditionalAccuracy::Defined {
                both_correct,
                first_correct,
            } => Some(both_correct as f64 / first_correct as f64),
            ConditionalAccuracy::Undefined => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, ConditionalAccuracy::Defined { .. })
    }
}

impl fmt::Display for ConditionalAccuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v:.3}"),
            None => f.write_str("undefined"),
        }
    }
}

pub fn conditional_accuracy(records: &[MultiTurnRecord]) -> ConditionalAccuracy {
    let mut counts = TurnCounts::default();
    records.iter().for_each(|r| counts.push(r));
    counts.accuracy()
}

/// Two questions about the same image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPair {
    pub image_id: String,
    pub q_a: String,
    pub q_b: String,
}

impl QuestionPair {
    pub fn new(image_id: impl Into<String>, q_a: impl Into<String>, q_b: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            q_a: q_a.into(),
            q_b: q_b.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTask {
    pub image_id: String,
    pub order: TurnOrder,
    pub first: String,
    pub second: String,
}

/// Emits every pair in both orders so that each question is asked once as the
/// opening turn and once as the follow-up.
pub fn build_pairs(questions: &[QuestionPair]) -> Result<Vec<DialogueTask>, EvalError> {
    let mut seen = HashSet::new();
    let mut tasks = Vec::with_capacity(questions.len() * 2);
    for q in questions {
        if q.q_a.trim().is_empty() || q.q_b.trim().is_empty() {
            return Err(EvalError::EmptyQuestion(q.image_id.clone()));
        }
        if q.q_a == q.q_b || !seen.insert(q.image_id.as_str()) {
            return Err(EvalError::DuplicateQuestions(q.image_id.clone()));
        }
        tasks.push(DialogueTask {
            image_id: q.image_id.clone(),
            order: TurnOrder::Original,
            first: q.q_a.clone(),
            second: q.q_b.clone(),
        });
        tasks.push(DialogueTask {
            image_id: q.image_id.clone(),
            order: TurnOrder::Swapped,
            first: q.q_b.clone(),
            second: q.q_a.clone(),
        });
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(q1: bool, q2: bool) -> MultiTurnRecord {
        MultiTurnRecord {
            image_id: "img".into(),
            order: TurnOrder::Original,
            q1_correct: q1,
            q2_correct: q2,
        }
    }

    #[test]
    fn all_correct() {
        assert_eq!(conditional_accuracy(&vec![rec(true, true); 5]).value(), Some(1.0));
    }

    #[test]
    fn eight_of_ten() {
        let mut rs = vec![rec(true, true); 8];
        rs.extend(vec![rec(true, false); 2]);
        rs.extend(vec![rec(false, true); 4]);
        assert_eq!(conditional_accuracy(&rs).value(), Some(0.8));
    }

    #[test]
    fn undefined_not_zero() {
        let c = conditional_accuracy(&[rec(false, true), rec(false, false)]);
        assert_eq!(c, ConditionalAccuracy::Undefined);
        assert_eq!(c.value(), None);
        assert_eq!(c.to_string(), "undefined");
        assert_eq!(conditional_accuracy(&[]), ConditionalAccuracy::Undefined);
    }

    #[test]
    fn one_image_two_tasks() {
        let tasks = build_pairs(&[QuestionPair::new("i", "what colour?", "how many?")]).unwrap();
        assert_eq!(tasks.len(), 2);
        assert_eq!(tasks[0].first, tasks[1].second);
        assert_eq!(tasks[0].second, tasks[1].first);
        assert!(build_pairs(&[]).unwrap().is_empty());
    }

    #[test]
    fn pair_errors() {
        assert!(matches!(
            build_pairs(&[QuestionPair::new("i", "q", "q")]),
            Err(EvalError::DuplicateQuestions(_))
        ));
        assert!(matches!(
            build_pairs(&[QuestionPair::new("i", "q", " ")]),
            Err(EvalError::EmptyQuestion(_))
        ));
        let twice = [QuestionPair::new("i", "a", "b"), QuestionPair::new("i", "c", "d")];
        assert!(matches!(build_pairs(&twice), Err(EvalError::DuplicateQuestions(_))));
    }
}
