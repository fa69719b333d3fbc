use rbama::agent::AgentBundle;
use rbama::env::{fixtures, Env, ResetMode};
use rbama::eval::{episode_seed, evaluate, evaluate_episodes, EvalReport, EvalSpec, Subject};
use rbama::exec::{with_threads, Exec};
use rbama::judge::RuleBasedJudge;
use rbama::pipeline::{standard_agent, train_instrumental, Budget};
use rbama::policy::Backend;

fn env() -> Env {
    Env::new(fixtures::load("moral_dilemma").unwrap(), 0).unwrap()
}

fn bundle() -> AgentBundle {
    let budget = Budget { rescue: 3000, bridge_guard: 20_000, ..Budget::default() };
    let mut b = standard_agent(&env(), &budget, true, 1).unwrap();
    b.theory = RuleBasedJudge::standard().theory;
    b
}

#[test]
fn reports_do_not_depend_on_scheduling() {
    let e = env();
    let subject = Subject::Agent(Box::new(bundle()));
    let spec = EvalSpec::new(200, 12);
    let seq = evaluate_episodes(&subject, &e, &spec, Exec::Sequential).unwrap();
    let par = evaluate_episodes(&subject, &e, &spec, Exec::Parallel).unwrap();
    assert_eq!(seq, par);
    let pooled = with_threads(Some(2), || evaluate(&subject, &e, &spec, Exec::Parallel).unwrap());
    assert_eq!(pooled, evaluate(&subject, &e, &spec, Exec::Sequential).unwrap());
}

#[test]
fn report_totals_match_the_episodes() {
    let e = env();
    let subject = Subject::Agent(Box::new(bundle()));
    let spec = EvalSpec::new(100, 3);
    let eps = evaluate_episodes(&subject, &e, &spec, Exec::default()).unwrap();
    let r = EvalReport::from_episodes(&eps, 3, &e.config().hash());
    assert_eq!(r.episodes, 100);
    assert_eq!(r.total_steps, eps.iter().map(|x| x.steps).sum::<usize>());
    assert_eq!(r.count_resc, eps.iter().filter(|x| x.water).count());
    assert_eq!(r.r_instr, eps.iter().map(|x| x.returns.instr).sum::<f64>());
    assert_eq!(r.goal_reached as f64, r.r_instr);
    assert!(r.to_table().lines().any(|l| l.starts_with("R_instr") && l.ends_with("100")));
}

#[test]
fn zero_episodes_give_an_empty_report() {
    let e = env();
    let r = evaluate(&Subject::Agent(Box::new(bundle())), &e, &EvalSpec::new(0, 0), Exec::default()).unwrap();
    assert_eq!(r, EvalReport { config_hash: e.config().hash(), ..Default::default() });
}

#[test]
fn single_policies_evaluate_from_the_initial_state() {
    let e = env();
    let model = train_instrumental(&e, 3000, Backend::Tabular, None, 0).unwrap().model;
    let spec = EvalSpec { reset: ResetMode::Initial, ..EvalSpec::new(5, 0) };
    let eps = evaluate_episodes(&Subject::Policy(model), &e, &spec, Exec::default()).unwrap();
    // every episode replays the same deterministic shortest path
    assert!(eps.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(eps[0].steps, 12);
    assert!(eps[0].reached_goal);
}

#[test]
fn episode_seeds_are_distinct() {
    let mut seeds: Vec<u64> = (0..10_000).map(|i| episode_seed(7, i)).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 10_000);
    assert_ne!(episode_seed(7, 0), episode_seed(8, 0));
}
