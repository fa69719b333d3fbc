use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbama::reason::{
    binding, build_background, conflicted, defeated, entails, proper_scenarios, triggered, ConflictEncoding,
    FeedbackOutcome, Formula, ObligationKind, ReasonError, ReasonTheory, Reasoner, RuleSet,
};

fn a(name: &str) -> Formula {
    Formula::atom(name)
}

fn nand(x: &str, y: &str) -> Formula {
    Formula::not(Formula::and(vec![a(x), a(y)]))
}

/// d1: B -> phi_C (constraint), d2: D -> phi_R (goal).
fn dilemma() -> ReasonTheory {
    let mut t = ReasonTheory::new();
    t.add_rule("d1", a("B"), "phi_C", Some(ObligationKind::Constraint)).unwrap();
    t.add_rule("d2", a("D"), "phi_R", Some(ObligationKind::Goal)).unwrap();
    t
}

fn dilemma_w() -> Vec<Formula> {
    vec![a("B"), a("D"), nand("phi_C", "phi_R")]
}

fn set(t: &ReasonTheory, ids: &[&str]) -> RuleSet {
    RuleSet::from_indices(ids.iter().map(|id| t.rule_index(id).unwrap()))
}

fn ids(t: &ReasonTheory, s: RuleSet) -> Vec<String> {
    s.ids(t)
}

// independent truth-table evaluator

fn holds(f: &Formula, v: &BTreeMap<String, bool>) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(x) => v[x],
        Formula::Not(g) => !holds(g, v),
        Formula::And(gs) => gs.iter().all(|g| holds(g, v)),
        Formula::Or(gs) => gs.iter().any(|g| holds(g, v)),
        Formula::Implies(p, q) => !holds(p, v) || holds(q, v),
    }
}

fn oracle_entails(premises: &[Formula], goal: &Formula) -> bool {
    let mut atoms = goal.atoms();
    for p in premises {
        atoms.extend(p.atoms());
    }
    let atoms: Vec<String> = atoms.into_iter().collect();
    (0..1u32 << atoms.len()).all(|m| {
        let v = atoms.iter().enumerate().map(|(i, x)| (x.clone(), m >> i & 1 == 1)).collect();
        !premises.iter().all(|p| holds(p, &v)) || holds(goal, &v)
    })
}

fn random_formula(rng: &mut ChaCha8Rng, atoms: &[&str], depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.35) {
        return a(atoms[rng.gen_range(0..atoms.len())]);
    }
    let op = rng.gen_range(0..4);
    let x = random_formula(rng, atoms, depth - 1);
    if op == 0 {
        return Formula::not(x);
    }
    let y = random_formula(rng, atoms, depth - 1);
    match op {
        1 => Formula::and(vec![x, y]),
        2 => Formula::or(vec![x, y]),
        _ => Formula::implies(x, y),
    }
}

#[test]
fn entailment_examples() {
    assert!(entails(&[a("B")], &a("B")).unwrap());
    assert!(entails(&[nand("phi_C", "phi_R"), a("phi_R")], &Formula::not(a("phi_C"))).unwrap());
    assert!(!entails(&[a("B")], &a("D")).unwrap());
    assert!(entails(&[a("B"), Formula::not(a("B"))], &a("D")).unwrap());
}

#[test]
fn entailment_matches_truth_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let atoms = ["p", "q", "r"];
    for _ in 0..1000 {
        let premises: Vec<Formula> = (0..rng.gen_range(0..4)).map(|_| random_formula(&mut rng, &atoms, 3)).collect();
        let goal = random_formula(&mut rng, &atoms, 3);
        assert_eq!(entails(&premises, &goal).unwrap(), oracle_entails(&premises, &goal), "{premises:?} |- {goal}");
    }
}

#[test]
fn atom_budget_is_enforced() {
    let big: Vec<Formula> = (0..30).map(|i| a(&format!("x{i}"))).collect();
    assert!(matches!(entails(&big, &a("x0")), Err(ReasonError::AtomBudget(30))));
}

#[test]
fn triggered_examples() {
    let t = dilemma();
    let w = [a("B"), a("D")];
    assert_eq!(ids(&t, triggered(&w, &t, RuleSet::EMPTY).unwrap()), ["d1", "d2"]);
    assert!(triggered(&[], &t, RuleSet::EMPTY).unwrap().is_empty());

    let mut chained = t.clone();
    chained.add_rule("d3", a("phi_R"), "phi_X", Some(ObligationKind::Goal)).unwrap();
    let s = set(&chained, &["d2"]);
    assert!(triggered(&[a("D")], &chained, s).unwrap().contains(2));
}

#[test]
fn conflicted_examples() {
    let t = dilemma();
    let w = dilemma_w();
    assert_eq!(ids(&t, conflicted(&w, &t, set(&t, &["d2"])).unwrap()), ["d1"]);
    assert!(conflicted(&[a("B"), a("D")], &t, RuleSet::EMPTY).unwrap().is_empty());
}

#[test]
fn defeated_examples() {
    let mut t = dilemma();
    let w = dilemma_w();
    assert!(defeated(&w, &t, set(&t, &["d1"])).unwrap().is_empty());
    t.extend_order(&[("d1".into(), "d2".into())]).unwrap();
    assert_eq!(ids(&t, defeated(&w, &t, set(&t, &["d1"])).unwrap()), ["d1"]);
}

#[test]
fn binding_examples() {
    let t = dilemma();
    let w = dilemma_w();
    let s = set(&t, &["d2"]);
    assert_eq!(binding(&w, &t, s).unwrap(), s);
    let r = Reasoner::new(&t, &w).unwrap();
    for s in [RuleSet::EMPTY, set(&t, &["d1"]), s, set(&t, &["d1", "d2"])] {
        let expected = RuleSet(r.triggered(s).0 & !r.conflicted(s).0 & !r.defeated(s).0);
        assert_eq!(r.binding(s), expected);
    }
}

#[test]
fn proper_scenario_examples() {
    let mut t = dilemma();
    let w = dilemma_w();
    let got: Vec<Vec<String>> = proper_scenarios(&t, &w).unwrap().into_iter().map(|s| ids(&t, s)).collect();
    assert_eq!(got, [vec!["d1"], vec!["d2"]]);

    assert_eq!(proper_scenarios(&ReasonTheory::new(), &w).unwrap(), [RuleSet::EMPTY]);

    t.extend_order(&[("d1".into(), "d2".into())]).unwrap();
    let got: Vec<Vec<String>> = proper_scenarios(&t, &w).unwrap().into_iter().map(|s| ids(&t, s)).collect();
    assert_eq!(got, [vec!["d2"]]);
}

#[test]
fn rule_budget_is_enforced() {
    let mut t = ReasonTheory::new();
    for i in 0..17 {
        t.add_rule(&format!("r{i}"), a("B"), &format!("o{i}"), Some(ObligationKind::Goal)).unwrap();
    }
    assert!(matches!(proper_scenarios(&t, &[a("B")]), Err(ReasonError::RuleBudget(17))));
}

#[test]
fn background_examples() {
    let labels = vec!["B".to_string(), "D".to_string()];
    let pairs = vec![("phi_C".to_string(), "phi_R".to_string())];
    let w = build_background(&labels, &[], &pairs, ConflictEncoding::Pairwise);
    let w: BTreeSet<Formula> = w.into_iter().collect();
    assert_eq!(w, BTreeSet::from([a("B"), a("D"), nand("phi_C", "phi_R")]));

    let k = vec![Formula::implies(a("B"), a("D"))];
    assert_eq!(build_background(&[], &k, &[], ConflictEncoding::Pairwise), k);

    let three = vec![("x".to_string(), "y".to_string()), ("x".to_string(), "z".to_string()), ("y".to_string(), "z".to_string())];
    let w = build_background(&[], &[], &three, ConflictEncoding::Pairwise);
    assert_eq!(w, vec![nand("x", "y"), nand("x", "z"), nand("y", "z")]);
    let agg = build_background(&[], &[], &three, ConflictEncoding::Aggregate);
    assert_eq!(agg.len(), 1);
    assert!(entails(&agg, &Formula::not(Formula::and(vec![a("x"), a("y"), a("z")]))).unwrap());
    assert!(!entails(&agg, &nand("x", "y")).unwrap());
}

#[test]
fn feedback_examples() {
    let t = dilemma();
    let (t2, outcome) = t.apply_feedback(set(&t, &["d1"]), "phi_R", &a("D"), None).unwrap();
    assert_eq!(outcome, FeedbackOutcome::OrderExtended);
    assert_eq!(t2.rules.len(), 2);
    assert!(t2.is_lower("d1", "d2"));

    let (t3, outcome) = ReasonTheory::new().apply_feedback(RuleSet::EMPTY, "phi_R", &a("D"), Some(ObligationKind::Goal)).unwrap();
    assert_eq!(outcome, FeedbackOutcome::RuleAdded);
    assert_eq!(t3.rules.len(), 1);
    assert_eq!(t3.order().count(), 0);
}

#[test]
fn feedback_closes_order_and_rejects_cycles() {
    let mut t = ReasonTheory::new();
    for (id, p) in [("a", "A"), ("b", "Bx"), ("c", "C")] {
        t.add_rule(id, a(p), &format!("o_{id}"), Some(ObligationKind::Goal)).unwrap();
    }
    let (t, _) = t.apply_feedback(set(&t, &["b"]), "o_a", &a("A"), None).unwrap();
    let (t, _) = t.apply_feedback(set(&t, &["c"]), "o_b", &a("Bx"), None).unwrap();
    assert!(t.is_lower("c", "a"));
    let err = t.apply_feedback(set(&t, &["a"]), "o_c", &a("C"), None).unwrap_err();
    assert!(matches!(err, ReasonError::InconsistentFeedback(_)));
}

#[test]
fn feedback_without_kind_is_rejected() {
    let err = ReasonTheory::new().apply_feedback(RuleSet::EMPTY, "phi_Q", &a("D"), None).unwrap_err();
    assert!(matches!(err, ReasonError::MissingKind(_)));
}

#[test]
fn derived_obligations() {
    let t = dilemma();
    assert_eq!(t.derive_obligations(set(&t, &["d2"])), BTreeSet::from(["phi_R".to_string()]));
    assert!(t.derive_obligations(RuleSet::EMPTY).is_empty());
    assert_eq!(t.derive_obligations(set(&t, &["d1", "d2"])).len(), 2);
}

#[test]
fn theory_file_round_trip() {
    let mut t = dilemma();
    t.extend_order(&[("d1".into(), "d2".into())]).unwrap();
    t.knowledge.push(Formula::implies(a("B"), Formula::or(vec![a("D"), Formula::not(a("D"))])));
    let back = ReasonTheory::from_json(&t.to_json()).unwrap();
    assert_eq!(back, t);
}

#[test]
fn formula_text_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let f = random_formula(&mut rng, &["p", "q", "phi_R"], 4);
        assert_eq!(Formula::parse(&f.to_string()).unwrap(), f);
    }
    assert!(Formula::parse("(and p").is_err());
}

#[test]
fn dot_export() {
    let empty = ReasonTheory::new().to_dot(&BTreeSet::new());
    assert!(empty.starts_with("digraph") && !empty.contains("->"));
    let mut t = dilemma();
    t.extend_order(&[("d1".into(), "d2".into())]).unwrap();
    let dot = t.to_dot(&BTreeSet::from(["D".to_string()]));
    assert!(dot.contains("\"B\" -> \"phi_C\" [label=\"d1\"]"));
    assert!(dot.contains("d1 < d2"));
    assert!(dot.lines().any(|l| l.contains("\"D\"") && l.contains("active=true")));
    assert!(!dot.lines().any(|l| l.contains("\"B\" [") && l.contains("active=true")));
}

// properties

fn formula_strategy() -> impl Strategy<Value = Formula> {
    let leaf = prop::sample::select(vec!["f0", "f1", "f2", "o0", "o1", "o2"]).prop_map(a);
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Formula::and(vec![x, y])),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Formula::or(vec![x, y])),
            (inner.clone(), inner).prop_map(|(x, y)| Formula::implies(x, y)),
        ]
    })
}

fn theory_strategy() -> impl Strategy<Value = (ReasonTheory, Vec<Formula>)> {
    let rule = (formula_strategy(), 0..3usize);
    (prop::collection::vec(rule, 0..6), prop::collection::vec((0..6usize, 0..6usize), 0..8), prop::collection::vec(formula_strategy(), 0..3))
        .prop_map(|(rules, edges, w)| {
            let mut t = ReasonTheory::new();
            for (i, (premise, o)) in rules.into_iter().enumerate() {
                t.add_rule(&format!("r{i}"), premise, &format!("o{o}"), Some(ObligationKind::Goal)).unwrap();
            }
            let n = t.rules.len();
            for (x, y) in edges {
                if n > 0 && x % n < y % n {
                    t.extend_order(&[(format!("r{}", x % n), format!("r{}", y % n))]).unwrap();
                }
            }
            (t, w)
        })
}

#[derive(Clone, Debug)]
struct Fb {
    chosen: Vec<usize>,
    obligation: usize,
    reason: usize,
}

fn feedback_strategy() -> impl Strategy<Value = Vec<Fb>> {
    prop::collection::vec(
        (prop::collection::vec(0..6usize, 0..3), 0..3usize, 0..3usize).prop_map(|(chosen, obligation, reason)| Fb { chosen, obligation, reason }),
        1..12,
    )
}

fn apply(t: &ReasonTheory, fb: &Fb) -> Result<(ReasonTheory, FeedbackOutcome), ReasonError> {
    let chosen = RuleSet::from_indices(fb.chosen.iter().copied().filter(|&i| i < t.rules.len()));
    t.apply_feedback(chosen, &format!("o{}", fb.obligation), &a(&format!("f{}", fb.reason)), Some(ObligationKind::Goal))
}

proptest! {
    #[test]
    fn proper_scenarios_are_fixpoints((t, w) in theory_strategy()) {
        let r = Reasoner::new(&t, &w).unwrap();
        for s in r.proper_scenarios().unwrap() {
            prop_assert_eq!(r.binding(s), s);
        }
    }

    #[test]
    fn order_stays_strict(fbs in feedback_strategy()) {
        let mut t = ReasonTheory::new();
        for fb in &fbs {
            match apply(&t, fb) {
                Ok((next, _)) => t = next,
                Err(ReasonError::InconsistentFeedback(_)) => {
                    // rejected updates leave the theory as it was
                    prop_assert!(apply(&t, fb).is_err());
                }
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
            let order: BTreeSet<(String, String)> = t.order().map(|(x, y)| (x.to_string(), y.to_string())).collect();
            for (x, y) in &order {
                prop_assert_ne!(x, y);
                for (y2, z) in &order {
                    if y == y2 {
                        prop_assert!(order.contains(&(x.clone(), z.clone())));
                    }
                }
            }
        }
    }

    #[test]
    fn repeated_feedback_is_idempotent(fbs in feedback_strategy()) {
        let mut t = ReasonTheory::new();
        for fb in &fbs {
            if let Ok((once, _)) = apply(&t, fb) {
                let (twice, outcome) = apply(&once, fb).unwrap();
                prop_assert_eq!(&twice, &once);
                prop_assert_eq!(outcome, FeedbackOutcome::Unchanged);
                t = once;
            }
        }
    }
}
