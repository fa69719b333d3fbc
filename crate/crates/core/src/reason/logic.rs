//! Truth-table entailment over a bounded vocabulary.

use std::collections::BTreeSet;

use super::{Formula, ReasonError};

/// Maximum number of distinct atoms an entailment query may mention.
pub const ATOM_BUDGET: usize = 24;

#[derive(Clone, Debug)]
pub(crate) struct Vocab {
    atoms: Vec<String>,
}

impl Vocab {
    pub fn new<'a>(formulas: impl IntoIterator<Item = &'a Formula>, extra: impl IntoIterator<Item = String>) -> Result<Self, ReasonError> {
        let mut set = BTreeSet::new();
        for f in formulas {
            f.atoms_into(&mut set);
        }
        set.extend(extra);
        if set.len() > ATOM_BUDGET {
            return Err(ReasonError::AtomBudget(set.len()));
        }
        Ok(Vocab { atoms: set.into_iter().collect() })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn index(&self, atom: &str) -> usize {
        self.atoms.binary_search_by(|a| a.as_str().cmp(atom)).expect("atom in vocabulary")
    }

    pub fn compile(&self, f: &Formula) -> Compiled {
        match f {
            Formula::True => Compiled::Const(true),
            Formula::False => Compiled::Const(false),
            Formula::Atom(a) => Compiled::Var(self.index(a) as u32),
            Formula::Not(x) => Compiled::Not(Box::new(self.compile(x))),
            Formula::And(xs) => Compiled::And(xs.iter().map(|x| self.compile(x)).collect()),
            Formula::Or(xs) => Compiled::Or(xs.iter().map(|x| self.compile(x)).collect()),
            Formula::Implies(a, b) => Compiled::Implies(Box::new(self.compile(a)), Box::new(self.compile(b))),
        }
    }

    /// All assignments, as bitmasks, satisfying every formula.
    pub fn models(&self, premises: &[Compiled]) -> Vec<u32> {
        (0..1u32 << self.len()).filter(|&m| premises.iter().all(|p| p.eval(m))).collect()
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Compiled {
    Const(bool),
    Var(u32),
    Not(Box<Compiled>),
    And(Vec<Compiled>),
    Or(Vec<Compiled>),
    Implies(Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    pub fn eval(&self, m: u32) -> bool {
        match self {
            Compiled::Const(b) => *b,
            Compiled::Var(i) => m >> i & 1 == 1,
            Compiled::Not(x) => !x.eval(m),
            Compiled::And(xs) => xs.iter().all(|x| x.eval(m)),
            Compiled::Or(xs) => xs.iter().any(|x| x.eval(m)),
            Compiled::Implies(a, b) => !a.eval(m) || b.eval(m),
        }
    }
}

/// Classical consequence: every model of `premises` satisfies `goal`.
pub fn entails(premises: &[Formula], goal: &Formula) -> Result<bool, ReasonError> {
    let vocab = Vocab::new(premises.iter().chain([goal]), [])?;
    let ps: Vec<Compiled> = premises.iter().map(|p| vocab.compile(p)).collect();
    let g = vocab.compile(goal);
    Ok((0..1u32 << vocab.len()).all(|m| !ps.iter().all(|p| p.eval(m)) || g.eval(m)))
}

/// True when some assignment satisfies every formula.
pub fn satisfiable(formulas: &[Formula]) -> Result<bool, ReasonError> {
    entails(formulas, &Formula::False).map(|e| !e)
}
