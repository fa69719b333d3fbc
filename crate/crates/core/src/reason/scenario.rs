use serde::{Deserialize, Serialize};

use super::logic::{Compiled, Vocab};
use super::{Formula, ReasonError, ReasonTheory};

/// Maximum number of rules for proper-scenario enumeration.
pub const RULE_BUDGET: usize = 16;

/// Subset of a theory's rules, bit `i` standing for rule `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleSet(pub u64);

impl RuleSet {
    pub const EMPTY: RuleSet = RuleSet(0);

    pub fn from_indices(idx: impl IntoIterator<Item = usize>) -> Self {
        RuleSet(idx.into_iter().fold(0, |m, i| m | 1 << i))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }

    pub fn ids(self, theory: &ReasonTheory) -> Vec<String> {
        self.iter().map(|i| theory.rules[i].id.clone()).collect()
    }
}

/// Precomputed view of a theory under fixed background information.
///
/// Models of the background are enumerated once; every later query filters them.
pub struct Reasoner<'a> {
    theory: &'a ReasonTheory,
    /// Per model of W: which premises hold, which conclusions hold.
    premise_true: Vec<u64>,
    conclusion_true: Vec<u64>,
    /// `refutes[j]`: rules whose conclusion is refuted by W with rule `j`'s conclusion.
    refutes: Vec<u64>,
    all: u64,
}

impl<'a> Reasoner<'a> {
    pub fn new(theory: &'a ReasonTheory, background: &[Formula]) -> Result<Self, ReasonError> {
        let n = theory.rules.len();
        if n > 64 {
            return Err(ReasonError::RuleBudget(n));
        }
        let vocab = Vocab::new(
            background.iter().chain(theory.rules.iter().map(|r| &r.premise)),
            theory.rules.iter().map(|r| r.conclusion.clone()),
        )?;
        let w: Vec<Compiled> = background.iter().map(|f| vocab.compile(f)).collect();
        let premises: Vec<Compiled> = theory.rules.iter().map(|r| vocab.compile(&r.premise)).collect();
        let conclusions: Vec<usize> = theory.rules.iter().map(|r| vocab.index(&r.conclusion)).collect();
        let models = vocab.models(&w);
        let mask_of = |test: &dyn Fn(usize) -> bool| (0..n).filter(|&i| test(i)).fold(0u64, |acc, i| acc | 1 << i);
        let premise_true: Vec<u64> = models.iter().map(|&m| mask_of(&|i| premises[i].eval(m))).collect();
        let conclusion_true: Vec<u64> = models.iter().map(|&m| mask_of(&|i| m >> conclusions[i] & 1 == 1)).collect();
        let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let refutes = (0..n)
            .map(|j| {
                // W ∪ {Conc(j)} ⊢ ¬Conc(i) iff Conc(i) is false in every model of W where Conc(j) holds
                conclusion_true
                    .iter()
                    .filter(|c| *c >> j & 1 == 1)
                    .fold(all, |acc, c| acc & !c)
            })
            .collect();
        Ok(Reasoner { theory, premise_true, conclusion_true, refutes, all })
    }

    /// Models of W that also satisfy the conclusions of `s`.
    fn models_with(&self, s: RuleSet) -> impl Iterator<Item = usize> + '_ {
        (0..self.conclusion_true.len()).filter(move |&k| self.conclusion_true[k] & s.0 == s.0)
    }

    pub fn triggered(&self, s: RuleSet) -> RuleSet {
        RuleSet(self.models_with(s).fold(self.all, |acc, k| acc & self.premise_true[k]))
    }

    pub fn conflicted(&self, s: RuleSet) -> RuleSet {
        RuleSet(self.models_with(s).fold(self.all, |acc, k| acc & !self.conclusion_true[k]))
    }

    pub fn defeated(&self, s: RuleSet) -> RuleSet {
        self.defeated_given(self.triggered(s))
    }

    fn defeated_given(&self, triggered: RuleSet) -> RuleSet {
        let n = self.theory.rules.len();
        let mut out = 0u64;
        for i in 0..n {
            let beaten = triggered
                .iter()
                .any(|j| self.theory.is_lower_idx(i, j) && self.refutes[j] >> i & 1 == 1);
            if beaten {
                out |= 1 << i;
            }
        }
        RuleSet(out)
    }

    pub fn binding(&self, s: RuleSet) -> RuleSet {
        let t = self.triggered(s);
        RuleSet(t.0 & !self.conflicted(s).0 & !self.defeated_given(t).0)
    }

    /// Every fixpoint `S = Binding(S)`, in ascending bitmask order.
    pub fn proper_scenarios(&self) -> Result<Vec<RuleSet>, ReasonError> {
        let n = self.theory.rules.len();
        if n > RULE_BUDGET {
            return Err(ReasonError::RuleBudget(n));
        }
        Ok((0..1u64 << n).map(RuleSet).filter(|&s| self.binding(s) == s).collect())
    }
}

/// Rules whose premise follows from W together with the conclusions of `s`.
pub fn triggered(background: &[Formula], theory: &ReasonTheory, s: RuleSet) -> Result<RuleSet, ReasonError> {
    Ok(Reasoner::new(theory, background)?.triggered(s))
}

pub fn conflicted(background: &[Formula], theory: &ReasonTheory, s: RuleSet) -> Result<RuleSet, ReasonError> {
    Ok(Reasoner::new(theory, background)?.conflicted(s))
}

pub fn defeated(background: &[Formula], theory: &ReasonTheory, s: RuleSet) -> Result<RuleSet, ReasonError> {
    Ok(Reasoner::new(theory, background)?.defeated(s))
}

pub fn binding(background: &[Formula], theory: &ReasonTheory, s: RuleSet) -> Result<RuleSet, ReasonError> {
    Ok(Reasoner::new(theory, background)?.binding(s))
}

pub fn proper_scenarios(theory: &ReasonTheory, background: &[Formula]) -> Result<Vec<RuleSet>, ReasonError> {
    Reasoner::new(theory, background)?.proper_scenarios()
}
