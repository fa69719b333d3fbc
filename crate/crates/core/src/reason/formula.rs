use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ReasonError;

/// Propositional formula over named atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Formula {
    True,
    False,
    Atom(String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(fs: Vec<Formula>) -> Self {
        Formula::And(fs)
    }

    pub fn or(fs: Vec<Formula>) -> Self {
        Formula::Or(fs)
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn atoms_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                out.insert(a.clone());
            }
            Formula::Not(f) => f.atoms_into(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.atoms_into(out)),
            Formula::Implies(a, b) => {
                a.atoms_into(out);
                b.atoms_into(out);
            }
        }
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.atoms_into(&mut out);
        out
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Formula::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Parses an s-expression such as `(and B (not D))`.
    pub fn parse(text: &str) -> Result<Formula, ReasonError> {
        let tokens = tokenize(text);
        let mut pos = 0;
        let f = parse_expr(&tokens, &mut pos, text)?;
        if pos != tokens.len() {
            return Err(ReasonError::Parse(format!("trailing input in {text:?}")));
        }
        Ok(f)
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(str::to_string).collect()
}

fn parse_expr(tokens: &[String], pos: &mut usize, src: &str) -> Result<Formula, ReasonError> {
    let err = |m: &str| ReasonError::Parse(format!("{m} in {src:?}"));
    let tok = tokens.get(*pos).ok_or_else(|| err("unexpected end"))?;
    *pos += 1;
    match tok.as_str() {
        ")" => Err(err("unexpected ')'")),
        "(" => {
            let op = tokens.get(*pos).ok_or_else(|| err("missing operator"))?.clone();
            *pos += 1;
            let mut args = Vec::new();
            while tokens.get(*pos).map(String::as_str) != Some(")") {
                if *pos >= tokens.len() {
                    return Err(err("missing ')'"));
                }
                args.push(parse_expr(tokens, pos, src)?);
            }
            *pos += 1;
            match (op.as_str(), args.len()) {
                ("not", 1) => Ok(Formula::not(args.pop().unwrap())),
                ("and", _) => Ok(Formula::And(args)),
                ("or", _) => Ok(Formula::Or(args)),
                ("implies", 2) => {
                    let b = args.pop().unwrap();
                    let a = args.pop().unwrap();
                    Ok(Formula::implies(a, b))
                }
                _ => Err(err(&format!("bad operator or arity for '{op}'"))),
            }
        }
        "true" => Ok(Formula::True),
        "false" => Ok(Formula::False),
        atom => {
            if atom.chars().all(|c| c.is_alphanumeric() || c == '_') {
                Ok(Formula::Atom(atom.to_string()))
            } else {
                Err(err(&format!("bad atom '{atom}'")))
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, op: &str, xs: &[Formula]| {
            write!(f, "({op}")?;
            for x in xs {
                write!(f, " {x}")?;
            }
            write!(f, ")")
        };
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(x) => write!(f, "(not {x})"),
            Formula::And(xs) => list(f, "and", xs),
            Formula::Or(xs) => list(f, "or", xs),
            Formula::Implies(a, b) => write!(f, "(implies {a} {b})"),
        }
    }
}

impl TryFrom<String> for Formula {
    type Error = ReasonError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Formula::parse(&s)
    }
}

impl From<Formula> for String {
    fn from(f: Formula) -> String {
        f.to_string()
    }
}
