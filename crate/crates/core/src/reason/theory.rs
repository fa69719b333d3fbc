use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Formula, ReasonError, RuleSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObligationKind {
    /// Pursued by a dedicated policy.
    Goal,
    /// Enforced by filtering actions.
    Constraint,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DefaultRule {
    pub id: String,
    pub premise: Formula,
    pub conclusion: String,
}

/// Default rules with a strict priority order, obligation kinds and fixed knowledge.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReasonTheory {
    pub rules: Vec<DefaultRule>,
    /// Pairs `(lower, higher)` of rule ids, transitively closed.
    order: BTreeSet<(String, String)>,
    pub kinds: BTreeMap<String, ObligationKind>,
    pub knowledge: Vec<Formula>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackOutcome {
    /// A new rule was created.
    RuleAdded,
    /// The rule existed and the order grew.
    OrderExtended,
    /// Nothing changed.
    Unchanged,
}

impl ReasonTheory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule_index(&self, id: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.id == id)
    }

    pub fn find_rule(&self, premise: &Formula, conclusion: &str) -> Option<usize> {
        self.rules.iter().position(|r| &r.premise == premise && r.conclusion == conclusion)
    }

    pub fn kind(&self, obligation: &str) -> Option<ObligationKind> {
        self.kinds.get(obligation).copied()
    }

    pub fn order(&self) -> impl Iterator<Item = (&str, &str)> {
        self.order.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// `lower < higher` in the priority order.
    pub fn is_lower(&self, lower: &str, higher: &str) -> bool {
        self.order.contains(&(lower.to_string(), higher.to_string()))
    }

    pub fn is_lower_idx(&self, lower: usize, higher: usize) -> bool {
        self.is_lower(&self.rules[lower].id, &self.rules[higher].id)
    }

    /// Adds a rule; fails on a duplicate id or missing kind.
    pub fn add_rule(&mut self, id: &str, premise: Formula, conclusion: &str, kind: Option<ObligationKind>) -> Result<usize, ReasonError> {
        if self.rule_index(id).is_some() {
            return Err(ReasonError::DuplicateRule(id.to_string()));
        }
        match (self.kinds.get(conclusion), kind) {
            (None, None) => return Err(ReasonError::MissingKind(conclusion.to_string())),
            (Some(k), Some(k2)) if *k != k2 => {
                return Err(ReasonError::KindMismatch(conclusion.to_string()))
            }
            (None, Some(k)) => {
                self.kinds.insert(conclusion.to_string(), k);
            }
            _ => {}
        }
        self.rules.push(DefaultRule { id: id.to_string(), premise, conclusion: conclusion.to_string() });
        Ok(self.rules.len() - 1)
    }

    /// Adds `lower < higher` edges, closes transitively, and rejects any cycle.
    pub fn extend_order(&mut self, edges: &[(String, String)]) -> Result<bool, ReasonError> {
        let mut order = self.order.clone();
        for (a, b) in edges {
            for id in [a, b] {
                if self.rule_index(id).is_none() {
                    return Err(ReasonError::UnknownRule(id.clone()));
                }
            }
            order.insert((a.clone(), b.clone()));
        }
        let closed = transitive_closure(&order);
        if let Some((a, _)) = closed.iter().find(|(a, b)| a == b) {
            return Err(ReasonError::InconsistentFeedback(format!("order would place {a} below itself")));
        }
        let changed = closed != self.order;
        self.order = closed;
        Ok(changed)
    }

    fn fresh_id(&self, premise: &Formula) -> String {
        let base = match premise.as_atom() {
            Some(a) => format!("d_{a}"),
            None => format!("d_{}", self.rules.len() + 1),
        };
        if self.rule_index(&base).is_none() {
            return base;
        }
        (2..).map(|k| format!("{base}_{k}")).find(|id| self.rule_index(id).is_none()).unwrap()
    }

    /// Integrates judge feedback `(obligation, reason)` given the scenario the agent acted on.
    pub fn apply_feedback(
        &self,
        chosen: RuleSet,
        obligation: &str,
        reason: &Formula,
        kind: Option<ObligationKind>,
    ) -> Result<(ReasonTheory, FeedbackOutcome), ReasonError> {
        let mut next = self.clone();
        let (idx, added) = match next.find_rule(reason, obligation) {
            Some(i) => (i, false),
            None => {
                let id = next.fresh_id(reason);
                (next.add_rule(&id, reason.clone(), obligation, kind)?, true)
            }
        };
        let top = next.rules[idx].id.clone();
        let edges: Vec<(String, String)> = chosen
            .iter()
            .filter(|&i| i != idx && i < self.rules.len())
            .map(|i| (self.rules[i].id.clone(), top.clone()))
            .collect();
        let extended = next.extend_order(&edges)?;
        let outcome = match (added, extended) {
            (true, _) => FeedbackOutcome::RuleAdded,
            (false, true) => FeedbackOutcome::OrderExtended,
            (false, false) => FeedbackOutcome::Unchanged,
        };
        Ok((next, outcome))
    }

    /// Obligations concluded by the rules of a scenario.
    pub fn derive_obligations(&self, scenario: RuleSet) -> BTreeSet<String> {
        scenario.iter().map(|i| self.rules[i].conclusion.clone()).collect()
    }

    pub fn to_file(&self) -> TheoryFile {
        TheoryFile {
            rules: self
                .rules
                .iter()
                .map(|r| RuleEntry {
                    id: r.id.clone(),
                    premise: r.premise.clone(),
                    conclusion: r.conclusion.clone(),
                    kind: self.kinds[&r.conclusion],
                })
                .collect(),
            order: self.order.iter().map(|(a, b)| [a.clone(), b.clone()]).collect(),
            knowledge: self.knowledge.clone(),
        }
    }

    pub fn from_file(file: &TheoryFile) -> Result<Self, ReasonError> {
        let mut t = ReasonTheory { knowledge: file.knowledge.clone(), ..Default::default() };
        for r in &file.rules {
            t.add_rule(&r.id, r.premise.clone(), &r.conclusion, Some(r.kind))?;
        }
        let edges: Vec<(String, String)> = file.order.iter().map(|[a, b]| (a.clone(), b.clone())).collect();
        t.extend_order(&edges)?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("theory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReasonError> {
        let file: TheoryFile = serde_json::from_str(text).map_err(|e| ReasonError::Parse(e.to_string()))?;
        Self::from_file(&file)
    }

    /// DOT digraph: atoms as nodes, rules as labelled edges, active atoms filled.
    pub fn to_dot(&self, active: &BTreeSet<String>) -> String {
        let mut facts = BTreeSet::new();
        for r in &self.rules {
            r.premise.atoms_into(&mut facts);
        }
        for k in &self.knowledge {
            k.atoms_into(&mut facts);
        }
        let obligations: BTreeSet<&String> = self.rules.iter().map(|r| &r.conclusion).collect();
        let mut out = String::from("digraph reasoning {\n  rankdir=LR;\n");
        let node = |out: &mut String, name: &str, shape: &str| {
            let fill = if active.contains(name) { ", style=filled, fillcolor=\"#f4c542\", active=true" } else { "" };
            let _ = writeln!(out, "  \"{name}\" [shape={shape}{fill}];");
        };
        for a in facts.iter().filter(|a| !obligations.contains(a)) {
            node(&mut out, a, "ellipse");
        }
        for o in &obligations {
            let shape = match self.kinds.get(*o) {
                Some(ObligationKind::Goal) => "doublecircle",
                _ => "box",
            };
            node(&mut out, o, shape);
        }
        for r in &self.rules {
            let mut src = BTreeSet::new();
            r.premise.atoms_into(&mut src);
            for s in src {
                let _ = writeln!(out, "  \"{s}\" -> \"{}\" [label=\"{}\"];", r.conclusion, r.id);
            }
        }
        let order: Vec<String> = self.order.iter().map(|(a, b)| format!("{a} < {b}")).collect();
        let text = if order.is_empty() { "(no priorities)".to_string() } else { order.join("\\n") };
        let _ = writeln!(out, "  order [shape=note, label=\"{text}\"];");
        out.push_str("}\n");
        out
    }
}

fn transitive_closure(edges: &BTreeSet<(String, String)>) -> BTreeSet<(String, String)> {
    let mut closed = edges.clone();
    loop {
        let mut added = Vec::new();
        for (a, b) in &closed {
            for (c, d) in closed.range((b.clone(), String::new())..) {
                if c != b {
                    break;
                }
                if !closed.contains(&(a.clone(), d.clone())) {
                    added.push((a.clone(), d.clone()));
                }
            }
        }
        if added.is_empty() {
            return closed;
        }
        closed.extend(added);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub id: String,
    pub premise: Formula,
    pub conclusion: String,
    pub kind: ObligationKind,
}

/// On-disk layout of a theory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoryFile {
    #[serde(default)]
    pub rules: Vec<RuleEntry>,
    #[serde(default)]
    pub order: Vec<[String; 2]>,
    #[serde(default)]
    pub knowledge: Vec<Formula>,
}
