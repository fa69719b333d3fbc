//! Prioritized default logic: triggered, conflicted, defeated and binding rules,
//! proper scenarios, and feedback-driven theory revision.

mod formula;
mod logic;
mod scenario;
mod theory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use formula::Formula;
pub use logic::{entails, satisfiable, ATOM_BUDGET};
pub use scenario::{binding, conflicted, defeated, proper_scenarios, triggered, Reasoner, RuleSet, RULE_BUDGET};
pub use theory::{DefaultRule, FeedbackOutcome, ObligationKind, ReasonTheory, RuleEntry, TheoryFile};

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("entailment query mentions {0} atoms, more than the budget of {ATOM_BUDGET}")]
    AtomBudget(usize),
    #[error("theory has {0} rules, more than the enumeration budget")]
    RuleBudget(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate rule id {0}")]
    DuplicateRule(String),
    #[error("unknown rule id {0}")]
    UnknownRule(String),
    #[error("obligation {0} has no kind")]
    MissingKind(String),
    #[error("obligation {0} given two different kinds")]
    KindMismatch(String),
    #[error("inconsistent feedback: {0}")]
    InconsistentFeedback(String),
}

/// How detected conflicts enter the background information.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictEncoding {
    /// One `¬(φ ∧ φ′)` per conflicting pair.
    #[default]
    Pairwise,
    /// A single negated conjunction over every obligation involved in a conflict.
    Aggregate,
}

/// Background information: labels, fixed knowledge and the recorded conflicts.
pub fn build_background(
    labels: &[String],
    knowledge: &[Formula],
    conflicts: &[(String, String)],
    encoding: ConflictEncoding,
) -> Vec<Formula> {
    let mut w: Vec<Formula> = labels.iter().map(Formula::atom).collect();
    w.extend(knowledge.iter().cloned());
    match encoding {
        ConflictEncoding::Pairwise => {
            for (a, b) in conflicts {
                w.push(Formula::not(Formula::and(vec![Formula::atom(a), Formula::atom(b)])));
            }
        }
        ConflictEncoding::Aggregate if !conflicts.is_empty() => {
            let mut atoms: Vec<&String> = conflicts.iter().flat_map(|(a, b)| [a, b]).collect();
            atoms.sort();
            atoms.dedup();
            w.push(Formula::not(Formula::and(atoms.into_iter().map(Formula::atom).collect())));
        }
        ConflictEncoding::Aggregate => {}
    }
    w
}
