//! Judges that watch the agent and point out the obligation it ignored, with the reason why.

mod translate;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use translate::Translator;

use crate::env::{render_text, Action, Env, EnvState, Labels};
use crate::reason::{
    build_background, ConflictEncoding, Formula, ObligationKind, ReasonError, ReasonTheory, Reasoner, RuleSet,
    TheoryFile,
};

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Reason(#[from] ReasonError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed judge file: {0}")]
    Format(String),
    #[error("obligation {0} has no translator")]
    NoTranslator(String),
    #[error("replay diverged at entry {0}: {1}")]
    ReplayMismatch(usize, String),
}

/// A judge's verdict: the obligation that should have been honored and the reason for it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub obligation: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ObligationKind>,
}

impl Feedback {
    pub fn reason_formula(&self) -> Formula {
        Formula::atom(&self.reason)
    }
}

pub trait Judge {
    /// Inspects `action` taken in `state`; `chosen` is the scenario the agent acted on.
    fn judge(&mut self, env: &Env, state: &EnvState, action: Action, chosen: &[String]) -> Result<Option<Feedback>, JudgeError>;
}

/// Rule ids of `s` ordered from highest to lowest priority.
fn by_priority(theory: &ReasonTheory, s: RuleSet) -> Vec<usize> {
    let mut rules: Vec<usize> = s.iter().collect();
    rules.sort_by(|&a, &b| {
        if theory.is_lower_idx(b, a) {
            std::cmp::Ordering::Less
        } else if theory.is_lower_idx(a, b) {
            std::cmp::Ordering::Greater
        } else {
            a.cmp(&b)
        }
    });
    rules
}

/// Judge reasoning with its own totally ordered theory and fixed translators.
#[derive(Clone, Debug)]
pub struct RuleBasedJudge {
    pub theory: ReasonTheory,
    pub translators: BTreeMap<String, Translator>,
}

/// On-disk judge: a theory plus translator assignments.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JudgeFile {
    #[serde(flatten)]
    pub theory: TheoryFile,
    pub translators: BTreeMap<String, Translator>,
}

pub const RESCUE: &str = "phi_R";
pub const NO_PUSH: &str = "phi_C";

impl RuleBasedJudge {
    /// Rescue whoever is in the water; otherwise never push anyone off a bridge.
    pub fn standard() -> Self {
        let mut theory = ReasonTheory::new();
        theory.add_rule("d_B", Formula::atom(Labels::BRIDGE), NO_PUSH, Some(ObligationKind::Constraint)).unwrap();
        theory.add_rule("d_D", Formula::atom(Labels::DROWNING), RESCUE, Some(ObligationKind::Goal)).unwrap();
        theory.extend_order(&[("d_B".into(), "d_D".into())]).unwrap();
        let translators = [(NO_PUSH.to_string(), Translator::NoPush), (RESCUE.to_string(), Translator::Rescue)].into();
        RuleBasedJudge { theory, translators }
    }

    pub fn from_file(file: &JudgeFile) -> Result<Self, JudgeError> {
        let theory = ReasonTheory::from_file(&file.theory)?;
        for r in &theory.rules {
            if !file.translators.contains_key(&r.conclusion) {
                return Err(JudgeError::NoTranslator(r.conclusion.clone()));
            }
        }
        Ok(RuleBasedJudge { theory, translators: file.translators.clone() })
    }

    pub fn to_file(&self) -> JudgeFile {
        JudgeFile { theory: self.theory.to_file(), translators: self.translators.clone() }
    }

    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let text = fs::read_to_string(path)?;
        let file: JudgeFile = serde_json::from_str(&text).map_err(|e| JudgeError::Format(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn expected_actions(&self, env: &Env, s: &EnvState, obligation: &str) -> Result<Vec<Action>, JudgeError> {
        let t = self.translators.get(obligation).ok_or_else(|| JudgeError::NoTranslator(obligation.into()))?;
        Ok(t.expected(env, s))
    }

    /// Pairs of the judge's triggered obligations that no single action satisfies.
    pub fn dilemmas(&self, env: &Env, s: &EnvState) -> Result<Vec<(String, String)>, JudgeError> {
        let labels = env.labels(s).atoms();
        let t = &self.theory;
        let w0 = build_background(&labels, &t.knowledge, &[], ConflictEncoding::Pairwise);
        let triggered = Reasoner::new(t, &w0)?.triggered(RuleSet::EMPTY);
        let mut concl: Vec<&String> = triggered.iter().map(|i| &t.rules[i].conclusion).collect();
        concl.sort();
        concl.dedup();
        let expected: Vec<Vec<Action>> =
            concl.iter().map(|o| self.expected_actions(env, s, o)).collect::<Result<_, _>>()?;
        let mut conflicts = Vec::new();
        for i in 0..concl.len() {
            for j in i + 1..concl.len() {
                if !expected[i].iter().any(|x| expected[j].contains(x)) {
                    conflicts.push((concl[i].clone(), concl[j].clone()));
                }
            }
        }
        Ok(conflicts)
    }

    /// The judge's own obligations in `s`, highest priority first, with their reasons.
    pub fn obligations(&self, env: &Env, s: &EnvState) -> Result<Vec<(String, Formula)>, JudgeError> {
        let labels = env.labels(s).atoms();
        let t = &self.theory;
        let conflicts = self.dilemmas(env, s)?;
        let w = build_background(&labels, &t.knowledge, &conflicts, ConflictEncoding::Pairwise);
        let scenarios = Reasoner::new(t, &w)?.proper_scenarios()?;
        let Some(&chosen) = scenarios.first() else { return Ok(Vec::new()) };
        Ok(by_priority(t, chosen)
            .into_iter()
            .map(|i| (t.rules[i].conclusion.clone(), t.rules[i].premise.clone()))
            .collect())
    }

    /// Walks the judge's obligations by priority: the first one the action breaks
    /// is reported; honoring a goal settles the matter.
    pub fn verdict(&self, env: &Env, s: &EnvState, action: Action) -> Result<Option<Feedback>, JudgeError> {
        for (obligation, premise) in self.obligations(env, s)? {
            let kind = self.theory.kind(&obligation);
            if !self.expected_actions(env, s, &obligation)?.contains(&action) {
                let reason = premise.as_atom().map(str::to_string).unwrap_or_else(|| premise.to_string());
                return Ok(Some(Feedback { obligation, reason, kind }));
            }
            if kind == Some(ObligationKind::Goal) {
                return Ok(None);
            }
        }
        Ok(None)
    }
}

impl Judge for RuleBasedJudge {
    fn judge(&mut self, env: &Env, state: &EnvState, action: Action, _chosen: &[String]) -> Result<Option<Feedback>, JudgeError> {
        self.verdict(env, state, action)
    }
}

/// Short content hash identifying a state.
pub fn state_hash(s: &EnvState) -> String {
    let text = serde_json::to_string(s).expect("state serializes");
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// One judged step, enough to replay the feedback later.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub state_hash: String,
    pub labels: Vec<String>,
    pub action: Action,
    pub chosen: Vec<String>,
    pub feedback: Option<Feedback>,
}

/// Wraps a judge and logs every verdict.
pub struct Recorder<J> {
    pub inner: J,
    pub transcript: Vec<TranscriptEntry>,
}

impl<J: Judge> Recorder<J> {
    pub fn new(inner: J) -> Self {
        Recorder { inner, transcript: Vec::new() }
    }
}

impl<J: Judge> Judge for Recorder<J> {
    fn judge(&mut self, env: &Env, state: &EnvState, action: Action, chosen: &[String]) -> Result<Option<Feedback>, JudgeError> {
        let feedback = self.inner.judge(env, state, action, chosen)?;
        self.transcript.push(TranscriptEntry {
            state_hash: state_hash(state),
            labels: env.labels(state).atoms(),
            action,
            chosen: chosen.to_vec(),
            feedback: feedback.clone(),
        });
        Ok(feedback)
    }
}

/// Plays back a recorded transcript, checking that the agent retraces it.
pub struct ReplayJudge {
    entries: Vec<TranscriptEntry>,
    pos: usize,
}

impl ReplayJudge {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        ReplayJudge { entries, pos: 0 }
    }
}

impl Judge for ReplayJudge {
    fn judge(&mut self, _env: &Env, state: &EnvState, action: Action, _chosen: &[String]) -> Result<Option<Feedback>, JudgeError> {
        let k = self.pos;
        let e = self.entries.get(k).ok_or_else(|| JudgeError::ReplayMismatch(k, "transcript exhausted".into()))?;
        if e.state_hash != state_hash(state) || e.action != action {
            return Err(JudgeError::ReplayMismatch(k, format!("expected {} in state {}", e.action, e.state_hash)));
        }
        self.pos += 1;
        Ok(e.feedback.clone())
    }
}

pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> Result<(), JudgeError> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).map_err(|e| JudgeError::Format(e.to_string()))?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, JudgeError> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| JudgeError::Format(e.to_string())))
        .collect()
}

/// Re-applies every recorded verdict to `theory`.
pub fn replay_feedback(theory: &ReasonTheory, entries: &[TranscriptEntry]) -> Result<ReasonTheory, JudgeError> {
    let mut t = theory.clone();
    for e in entries {
        if let Some(f) = &e.feedback {
            let chosen = RuleSet::from_indices(e.chosen.iter().filter_map(|id| t.rule_index(id)));
            t = t.apply_feedback(chosen, &f.obligation, &f.reason_formula(), f.kind)?.0;
        }
    }
    Ok(t)
}

/// Human judge over a text terminal.
///
/// Each prompt shows the state and the action; an empty line approves, otherwise
/// `<obligation> <reason>` where the reason must be an active label.
pub struct InteractiveJudge<R, W> {
    input: R,
    output: W,
    kinds: BTreeMap<String, ObligationKind>,
}

impl<R: BufRead, W: Write> InteractiveJudge<R, W> {
    pub fn new(input: R, output: W, kinds: BTreeMap<String, ObligationKind>) -> Self {
        InteractiveJudge { input, output, kinds }
    }
}

impl<R: BufRead, W: Write> Judge for InteractiveJudge<R, W> {
    fn judge(&mut self, env: &Env, state: &EnvState, action: Action, _chosen: &[String]) -> Result<Option<Feedback>, JudgeError> {
        let labels = env.labels(state);
        loop {
            write!(self.output, "{}action: {action}\nfeedback> ", render_text(env, state))?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Ok(None);
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                [] => return Ok(None),
                [obligation, reason] => {
                    let Some(&kind) = self.kinds.get(*obligation) else {
                        writeln!(self.output, "unknown obligation {obligation}")?;
                        continue;
                    };
                    if !labels.contains(reason) {
                        writeln!(self.output, "{reason} does not hold here")?;
                        continue;
                    }
                    return Ok(Some(Feedback { obligation: obligation.to_string(), reason: reason.to_string(), kind: Some(kind) }));
                }
                _ => writeln!(self.output, "expected '<obligation> <reason>' or an empty line")?,
            }
        }
    }
}
