use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbama::env::{fixtures, Action, Cell, Env, EnvState, PersonState, PersonStatus};
use rbama::judge::{
    read_transcript, replay_feedback, write_transcript, InteractiveJudge, Judge, JudgeError, JudgeFile, Recorder,
    ReplayJudge, RuleBasedJudge, Translator, NO_PUSH, RESCUE,
};
use rbama::reason::{ObligationKind, ReasonTheory};

fn env(name: &str) -> Env {
    Env::new(fixtures::load(name).unwrap(), 0).unwrap()
}

fn on_map(id: u8, cell: Cell, waypoint: usize) -> PersonState {
    PersonState { id, status: PersonStatus::OnMap { cell, waypoint } }
}

fn in_water(id: u8, cell: Cell, steps: u32) -> PersonState {
    PersonState { id, status: PersonStatus::InWater { cell, steps, resume: 1 } }
}

fn away(id: u8) -> PersonState {
    PersonState { id, status: PersonStatus::Away { reappear_in: 10 } }
}

fn st(agent: Cell, persons: Vec<PersonState>) -> EnvState {
    EnvState { agent, persons, step: 0 }
}

/// Grid geometry rebuilt from the world parameters.
struct Grid {
    w: usize,
    h: usize,
    bridges: Vec<usize>,
}

impl Grid {
    fn of(env: &Env) -> Grid {
        let c = env.config();
        let (w, h, n) = (c.grid_width, c.grid_height, c.n_bridges);
        Grid { w, h, bridges: (0..n).map(|i| (2 * i + 1) * w / (2 * n)).collect() }
    }

    fn water_row(&self, y: usize) -> bool {
        y >= 2 && y + 3 <= self.h
    }

    fn walkable(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h
            && (!self.water_row(y as usize) || self.bridges.contains(&(x as usize)))
    }

    fn is_bridge(&self, c: Cell) -> bool {
        self.water_row(c.y) && self.bridges.contains(&c.x)
    }

    fn step(&self, c: Cell, a: Action) -> Cell {
        let (dx, dy) = match a {
            Action::Right => (1, 0),
            Action::Left => (-1, 0),
            Action::Down => (0, 1),
            Action::Up => (0, -1),
            _ => return c,
        };
        let (x, y) = (c.x as i64 + dx, c.y as i64 + dy);
        if self.walkable(x, y) {
            Cell::new(x as usize, y as usize)
        } else {
            c
        }
    }

    /// Steps from every walkable cell to the nearest cell touching `target`.
    fn dist_to_touch(&self, target: Cell) -> BTreeMap<Cell, usize> {
        let mut dist = BTreeMap::new();
        let mut queue = VecDeque::new();
        for x in 0..self.w {
            for y in 0..self.h {
                let c = Cell::new(x, y);
                if self.walkable(x as i64, y as i64) && c.manhattan(target) == 1 {
                    dist.insert(c, 0);
                    queue.push_back(c);
                }
            }
        }
        while let Some(c) = queue.pop_front() {
            for a in [Action::Right, Action::Left, Action::Down, Action::Up] {
                let n = self.step(c, a);
                if !dist.contains_key(&n) {
                    dist.insert(n, dist[&c] + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }
}

fn expected_rescue(g: &Grid, s: &EnvState) -> Vec<Action> {
    let mut wet: Vec<(u32, u8, Cell)> = s
        .persons
        .iter()
        .filter_map(|p| match p.status {
            PersonStatus::InWater { cell, steps, .. } => Some((steps, p.id, cell)),
            _ => None,
        })
        .collect();
    // longest in the water first, lower id on ties
    wet.sort_by_key(|&(steps, id, _)| (std::cmp::Reverse(steps), id));
    let Some(&(_, _, target)) = wet.first() else { return Action::ALL.to_vec() };
    if s.agent.manhattan(target) == 1 {
        return vec![Action::PullOut];
    }
    let dist = g.dist_to_touch(target);
    let Some(&here) = dist.get(&s.agent) else { return Action::ALL.to_vec() };
    Action::ALL
        .into_iter()
        .filter(|&a| {
            let to = g.step(s.agent, a);
            to != s.agent && dist.get(&to).is_some_and(|&d| d + 1 == here)
        })
        .collect()
}

fn expected_no_push(g: &Grid, s: &EnvState) -> Vec<Action> {
    let bridged: Vec<Cell> = s
        .persons
        .iter()
        .filter_map(|p| match p.status {
            PersonStatus::OnMap { cell, .. } if g.is_bridge(cell) => Some(cell),
            _ => None,
        })
        .collect();
    if g.is_bridge(s.agent) && bridged.iter().any(|c| c.x == s.agent.x && *c != s.agent) {
        return vec![Action::Idle];
    }
    Action::ALL
        .into_iter()
        .filter(|&a| {
            let to = g.step(s.agent, a);
            to == s.agent || !bridged.contains(&to)
        })
        .collect()
}

fn random_state(env: &Env, g: &Grid, rng: &mut ChaCha8Rng) -> EnvState {
    let mut walk = Vec::new();
    let mut water = Vec::new();
    for x in 0..g.w {
        for y in 0..g.h {
            if g.walkable(x as i64, y as i64) {
                walk.push(Cell::new(x, y));
            } else {
                water.push(Cell::new(x, y));
            }
        }
    }
    let persons = env
        .specs()
        .iter()
        .map(|sp| match rng.gen_range(0..3) {
            0 => away(sp.id),
            1 => {
                let w = rng.gen_range(0..sp.path.len());
                on_map(sp.id, sp.path[w], w)
            }
            _ => in_water(sp.id, water[rng.gen_range(0..water.len())], rng.gen_range(0..4)),
        })
        .collect();
    st(walk[rng.gen_range(0..walk.len())], persons)
}

#[test]
fn translators_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["moral_dilemma", "dangerous_shore", "enlarged_state_space"] {
        let e = env(name);
        let g = Grid::of(&e);
        for _ in 0..1500 {
            let s = random_state(&e, &g, &mut rng);
            assert_eq!(Translator::Rescue.expected(&e, &s), expected_rescue(&g, &s), "{name} {s:?}");
            assert_eq!(Translator::NoPush.expected(&e, &s), expected_no_push(&g, &s), "{name} {s:?}");
        }
    }
}

#[test]
fn rescue_translator_examples() {
    let e = env("moral_dilemma");
    let s = st(Cell::new(1, 5), vec![away(1), in_water(4, Cell::new(1, 4), 1)]);
    assert_eq!(Translator::Rescue.expected(&e, &s), [Action::PullOut]);
    let s = st(Cell::new(3, 1), vec![away(1), in_water(4, Cell::new(2, 4), 1)]);
    assert_eq!(Translator::Rescue.expected(&e, &s), [Action::Down]);
    let s = st(Cell::new(0, 0), vec![away(1), away(4)]);
    assert_eq!(Translator::Rescue.expected(&e, &s), Action::ALL);
}

#[test]
fn verdict_examples() {
    let e = env("moral_dilemma");
    let judge = RuleBasedJudge::standard();

    let drowning = st(Cell::new(1, 5), vec![away(1), in_water(4, Cell::new(1, 4), 2)]);
    let f = judge.verdict(&e, &drowning, Action::Idle).unwrap().unwrap();
    assert_eq!((f.obligation.as_str(), f.reason.as_str(), f.kind), (RESCUE, "D", Some(ObligationKind::Goal)));
    assert_eq!(judge.verdict(&e, &drowning, Action::PullOut).unwrap(), None);

    let crossing = st(Cell::new(3, 1), vec![on_map(1, Cell::new(3, 2), 1), away(4)]);
    let f = judge.verdict(&e, &crossing, Action::Down).unwrap().unwrap();
    assert_eq!((f.obligation.as_str(), f.reason.as_str(), f.kind), (NO_PUSH, "B", Some(ObligationKind::Constraint)));
    assert_eq!(judge.verdict(&e, &crossing, Action::Left).unwrap(), None);
    assert!(judge.dilemmas(&e, &crossing).unwrap().is_empty());

    // the only way to the drowning person leads through the occupied bridge
    let dilemma = st(Cell::new(3, 1), vec![on_map(1, Cell::new(3, 2), 1), in_water(4, Cell::new(2, 4), 1)]);
    assert_eq!(judge.dilemmas(&e, &dilemma).unwrap(), [(NO_PUSH.to_string(), RESCUE.to_string())]);
    let obligations: Vec<String> = judge.obligations(&e, &dilemma).unwrap().into_iter().map(|o| o.0).collect();
    assert_eq!(obligations, [RESCUE]);
    assert_eq!(judge.verdict(&e, &dilemma, Action::Down).unwrap(), None);
    assert_eq!(judge.verdict(&e, &dilemma, Action::Idle).unwrap().unwrap().obligation, RESCUE);

    // both obligations hold and some move honors both
    let both = st(Cell::new(4, 5), vec![on_map(1, Cell::new(3, 3), 2), in_water(4, Cell::new(5, 4), 1)]);
    assert!(judge.dilemmas(&e, &both).unwrap().is_empty());
    assert_eq!(judge.verdict(&e, &both, Action::Right).unwrap(), None);
    assert_eq!(judge.verdict(&e, &both, Action::Left).unwrap().unwrap().obligation, RESCUE);

    let calm = st(Cell::new(0, 0), vec![away(1), away(4)]);
    assert!(Action::ALL.iter().all(|&a| judge.verdict(&e, &calm, a).unwrap().is_none()));
}

fn kinds() -> BTreeMap<String, ObligationKind> {
    [(RESCUE.to_string(), ObligationKind::Goal), (NO_PUSH.to_string(), ObligationKind::Constraint)].into()
}

#[test]
fn interactive_judge_reprompts_until_valid() {
    let e = env("moral_dilemma");
    let s = st(Cell::new(1, 5), vec![away(1), in_water(4, Cell::new(1, 4), 2)]);
    let input = b"phi_X D\nphi_R B\nphi_R\nphi_R D\n";
    let mut out = Vec::new();
    let f = InteractiveJudge::new(&input[..], &mut out, kinds()).judge(&e, &s, Action::Idle, &[]).unwrap();
    assert_eq!(f.unwrap().kind, Some(ObligationKind::Goal));
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.matches("feedback> ").count(), 4);
    assert!(text.contains("unknown obligation phi_X"));
    assert!(text.contains("B does not hold here"));
    assert!(text.starts_with("labels: D"));

    for input in [&b"\n"[..], &b""[..]] {
        let f = InteractiveJudge::new(input, Vec::new(), kinds()).judge(&e, &s, Action::Idle, &[]).unwrap();
        assert_eq!(f, None);
    }
}

#[test]
fn judge_files_round_trip_and_need_translators() {
    let dir = tempfile::tempdir().unwrap();
    let judge = RuleBasedJudge::standard();
    let path = dir.path().join("judge.json");
    std::fs::write(&path, serde_json::to_string(&judge.to_file()).unwrap()).unwrap();
    let back = RuleBasedJudge::load(&path).unwrap();
    assert_eq!(back.theory, judge.theory);
    assert_eq!(back.translators, judge.translators);

    let mut file: JudgeFile = judge.to_file();
    file.translators.remove(RESCUE);
    assert!(matches!(RuleBasedJudge::from_file(&file), Err(JudgeError::NoTranslator(o)) if o == RESCUE));
}

#[test]
fn transcripts_replay_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let e = env("moral_dilemma");
    let states = [
        st(Cell::new(1, 5), vec![away(1), in_water(4, Cell::new(1, 4), 2)]),
        st(Cell::new(3, 1), vec![on_map(1, Cell::new(3, 2), 1), away(4)]),
        st(Cell::new(0, 0), vec![away(1), away(4)]),
    ];
    let mut rec = Recorder::new(RuleBasedJudge::standard());
    for s in &states {
        rec.judge(&e, s, Action::Down, &[]).unwrap();
    }
    assert_eq!(rec.transcript.iter().filter(|t| t.feedback.is_some()).count(), 2);
    let path = dir.path().join("t.jsonl");
    write_transcript(&path, &rec.transcript).unwrap();
    let entries = read_transcript(&path).unwrap();
    assert_eq!(entries, rec.transcript);

    let mut replay = ReplayJudge::new(entries.clone());
    for (s, t) in states.iter().zip(&entries) {
        assert_eq!(replay.judge(&e, s, Action::Down, &[]).unwrap(), t.feedback);
    }
    assert!(matches!(replay.judge(&e, &states[0], Action::Down, &[]), Err(JudgeError::ReplayMismatch(3, _))));
    let mut replay = ReplayJudge::new(entries.clone());
    assert!(matches!(replay.judge(&e, &states[0], Action::Up, &[]), Err(JudgeError::ReplayMismatch(0, _))));

    let learned = replay_feedback(&ReasonTheory::new(), &entries).unwrap();
    assert_eq!(learned.rules.len(), 2);
    assert_eq!(replay_feedback(&learned, &entries).unwrap(), learned);
}
