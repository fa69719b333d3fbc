use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rbama::embedding::TabularMdp;
use rbama::env::{fixtures, Env};
use rbama::eval::{evaluate, EvalSpec, Subject};
use rbama::exec::Exec;
use rbama::judge::RuleBasedJudge;
use rbama::pipeline::{standard_agent, Budget};

fn dilemma() -> Env {
    Env::new(fixtures::load("moral_dilemma").unwrap(), 0).unwrap()
}

fn value_iteration(c: &mut Criterion) {
    let env = dilemma();
    let mdp = TabularMdp::build(&env, &env.reset_support(), 5_000_000, None).unwrap();
    let rewards = mdp.combine(1.0, 1.0, 1.0);
    let mut group = c.benchmark_group("value_iteration");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| mdp.solve_values(&rewards, 0.9, 1e-9, None, exec))
        });
    }
    group.finish();
}

fn batch_eval(c: &mut Criterion) {
    let env = dilemma();
    let budget = Budget { rescue: 3000, bridge_guard: 20_000, ..Budget::default() };
    let mut bundle = standard_agent(&env, &budget, true, 0).unwrap();
    bundle.theory = RuleBasedJudge::standard().theory;
    let subject = Subject::Agent(Box::new(bundle));
    let spec = EvalSpec::new(200, 0);
    let mut group = c.benchmark_group("batch_eval");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| evaluate(&subject, &env, &spec, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, value_iteration, batch_eval);
criterion_main!(benches);
