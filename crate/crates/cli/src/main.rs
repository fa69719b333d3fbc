use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rbama::agent::{load_bundle, run_episode, save_bundle, AgentBundle, AgentError};
use rbama::embedding::{compute_ethical_weight, EmbedConfig, EmbedError, Sampling, Scope};
use rbama::env::{fixtures, render_png, render_text, Env, EnvConfig, EnvError, EnvState, ResetMode};
use rbama::eval::{episode_seed, evaluate, EvalSpec, Subject};
use rbama::exec::{with_threads, Exec};
use rbama::judge::{
    read_transcript, replay_feedback, write_transcript, InteractiveJudge, JudgeError, Recorder, RuleBasedJudge,
};
use rbama::pipeline::{bridge_guard, find_probes, standard_agent, teach, train_spec, Budget, Curriculum, Net};
use rbama::policy::{
    risk_rows, train_value_policy, write_curve, write_risk_csv, Backend, PolicyError, PolicyModel, RiskModel,
};
use rbama::reason::{ReasonError, ReasonTheory};

#[derive(Parser)]
#[command(name = "rbama", version, about = "Reason-based moral agents in a bridge grid world")]
struct Cli {
    /// Master seed; every command is deterministic given it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Fixture name or path to a world config.
    #[arg(long, global = true, default_value = "moral_dilemma")]
    config: String,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel work.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one component, or a complete untaught agent.
    Train(TrainArgs),
    /// Run judged episodes and revise the agent's reason theory.
    Teach(TeachArgs),
    /// Evaluate an agent or a single policy without learning.
    Eval(EvalArgs),
    /// Search for the smallest ethical weight.
    Embed(EmbedArgs),
    /// Draw a state.
    Render(RenderArgs),
    /// Export the agent's reason theory as DOT.
    Graph(GraphArgs),
    /// Export the state-action pairs a risk model flags.
    RiskCsv(RiskCsvArgs),
    /// Re-apply a recorded feedback transcript to a theory.
    ReplayFeedback(ReplayArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainNet {
    Instrumental,
    Rescue,
    BridgeGuard,
    /// Instrumental, rescue and bridge guard together, saved as an agent directory.
    Agent,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    net: TrainNet,
    /// Training episodes, or resets for the bridge guard.
    #[arg(long)]
    episodes: Option<usize>,
    /// Risk model to shield instrumental training with.
    #[arg(long)]
    shield: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Use a one-hidden-layer network of this width instead of a table.
    #[arg(long)]
    hidden: Option<usize>,
    /// Train the agent's instrumental policy without its bridge guard.
    #[arg(long)]
    unshielded: bool,
}

#[derive(Args)]
struct TeachArgs {
    #[arg(long)]
    agent: PathBuf,
    /// `rules` for the standard judge, `rules:<path>` for a judge file, or `interactive`.
    #[arg(long, default_value = "rules")]
    judge: String,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Start every episode from a random reset instead of mixing in probe states.
    #[arg(long)]
    random_only: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ResetArg {
    Initial,
    Random,
    RandomPassable,
}

#[derive(Args)]
struct EvalArgs {
    /// Agent directory.
    #[arg(long, conflicts_with = "policy", required_unless_present = "policy")]
    agent: Option<PathBuf>,
    /// Single policy model file.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, value_enum, default_value_t = ResetArg::Random)]
    reset: ResetArg,
    /// Start every episode from this state (JSON).
    #[arg(long)]
    state: Option<PathBuf>,
    /// Write per-step decision traces as JSON lines.
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    FromS0,
    Full,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long, value_enum, default_value_t = ScopeArg::Full)]
    scope: ScopeArg,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = 20.0)]
    max_weight: f64,
    #[arg(long, default_value_t = 7200)]
    timeout_secs: u64,
    /// Plan with drowning timers in the state.
    #[arg(long)]
    track_drowning: bool,
    /// Estimate the state space from this many random walks instead of enumerating it.
    #[arg(long)]
    sampled_resets: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    /// State to draw (JSON); the initial state otherwise.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Write a PNG to `--out` instead of text.
    #[arg(long)]
    png: bool,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    agent: PathBuf,
    /// Highlight the labels and obligations active in this state (JSON).
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Args)]
struct RiskCsvArgs {
    /// Risk model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Random walks used to collect states.
    #[arg(long, default_value_t = 2000)]
    resets: usize,
    #[arg(long, default_value_t = 50)]
    steps: usize,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    transcript: PathBuf,
    /// Starting theory; empty when omitted.
    #[arg(long)]
    theory: Option<PathBuf>,
}

/// Bad command-line input that maps to the configuration exit code.
#[derive(Debug)]
struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn load_config(spec: &str) -> Result<EnvConfig> {
    if fixtures::source(spec).is_some() {
        return Ok(fixtures::load(spec)?);
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| ConfigError(format!("{spec} is neither a fixture nor a readable file: {e}")))?;
    Ok(EnvConfig::from_json(&text)?)
}

fn read_state(path: &Path, env: &Env) -> Result<EnvState> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let s: EnvState = serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    env.check_state(&s)?;
    Ok(s)
}

fn backend(hidden: Option<usize>) -> Backend {
    hidden.map_or(Backend::Tabular, |hidden| Backend::Mlp { hidden })
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// Prints `value` as JSON, or `table` for humans.
fn emit(cli: &Cli, value: &Value, table: &str) {
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("json value")),
        Format::Table => print!("{table}"),
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_train(cli: &Cli, env: &Env, a: &TrainArgs) -> Result<()> {
    let dir = out_dir(cli, "out");
    fs::create_dir_all(&dir)?;
    let backend = backend(a.hidden);
    let defaults = Budget::default();
    let (summary, table) = match a.net {
        TrainNet::Agent => {
            let budget = Budget {
                instrumental: a.episodes.unwrap_or(defaults.instrumental),
                backend,
                ..defaults
            };
            let bundle = standard_agent(env, &budget, !a.unshielded, cli.seed)?;
            save_bundle(&bundle, &dir, cli.seed)?;
            let v = json!({ "net": "agent", "budget": budget, "dir": dir });
            (v, format!("agent written to {}\n", dir.display()))
        }
        TrainNet::BridgeGuard => {
            let resets = a.episodes.unwrap_or(defaults.bridge_guard);
            let shield = bridge_guard(env, resets, backend, cli.seed)?;
            let path = dir.join("bridge-guard.model");
            shield.risk.save(&path)?;
            let v = json!({ "net": "bridge-guard", "resets": resets, "model": path });
            (v, format!("bridge guard trained on {resets} resets, written to {}\n", path.display()))
        }
        TrainNet::Instrumental | TrainNet::Rescue => {
            let (net, name, default_episodes) = match a.net {
                TrainNet::Instrumental => (Net::Instrumental, "instrumental", defaults.instrumental),
                _ => (Net::Rescue, "rescue", defaults.rescue),
            };
            let episodes = a.episodes.unwrap_or(default_episodes);
            let spec = train_spec(net, episodes, backend).expect("value network");
            let shield = match &a.shield {
                Some(p) => {
                    let risk = RiskModel::load(p)?;
                    risk.check_config(&env.config().hash())?;
                    Some(rbama::policy::Shield::new(risk, a.threshold))
                }
                None => None,
            };
            let shields: Vec<_> = shield.iter().collect();
            let outcome = train_value_policy(env, &spec, &shields, cli.seed)?;
            let model = dir.join(format!("{name}.model"));
            let curve = dir.join(format!("{name}_curve.csv"));
            outcome.model.save(&model)?;
            write_curve(&curve, &outcome.curve)?;
            let tail = &outcome.curve[outcome.curve.len().saturating_sub(100)..];
            let mean = if tail.is_empty() { 0.0 } else { tail.iter().map(|p| p.ret).sum::<f64>() / tail.len() as f64 };
            let v = json!({ "net": name, "episodes": episodes, "final_mean_return": mean, "model": model, "curve": curve });
            (v, format!("{name}: {episodes} episodes, mean return over the last 100 {mean:.3}\nmodel {}\ncurve {}\n", model.display(), curve.display()))
        }
    };
    emit(cli, &summary, &table);
    Ok(())
}

fn load_agent(env: &Env, dir: &Path) -> Result<AgentBundle> {
    Ok(load_bundle(dir, Some(&env.config().hash()))?.0)
}

fn teach_with<J: rbama::judge::Judge>(
    bundle: &mut AgentBundle,
    env: &Env,
    judge: J,
    episodes: usize,
    curriculum: &Curriculum,
    seed: u64,
) -> Result<(rbama::pipeline::TeachReport, Vec<rbama::judge::TranscriptEntry>)> {
    let mut rec = Recorder::new(judge);
    let report = teach(bundle, env, &mut rec, episodes, curriculum, seed)?;
    Ok((report, rec.transcript))
}

fn cmd_teach(cli: &Cli, env: &Env, a: &TeachArgs) -> Result<()> {
    let mut bundle = load_agent(env, &a.agent)?;
    let rules = match a.judge.as_str() {
        "rules" | "interactive" => RuleBasedJudge::standard(),
        other => match other.strip_prefix("rules:") {
            Some(path) => RuleBasedJudge::load(Path::new(path))?,
            None => return Err(ConfigError(format!("unknown judge {other}")).into()),
        },
    };
    let curriculum = if a.random_only {
        Curriculum::random()
    } else {
        Curriculum::with_probes(&find_probes(env, &rules, 20, 20_000, cli.seed)?)
    };
    let (report, transcript) = if a.judge == "interactive" {
        let stdin = io::stdin();
        let judge = InteractiveJudge::new(stdin.lock(), io::stderr(), rules.theory.kinds.clone());
        teach_with(&mut bundle, env, judge, a.episodes, &curriculum, cli.seed)?
    } else {
        teach_with(&mut bundle, env, rules, a.episodes, &curriculum, cli.seed)?
    };
    let dir = cli.out.clone().unwrap_or_else(|| a.agent.clone());
    save_bundle(&bundle, &dir, cli.seed)?;
    let transcript_path = dir.join("transcript.jsonl");
    write_transcript(&transcript_path, &transcript)?;
    let v = json!({ "report": report, "theory": bundle.theory.to_file(), "transcript": transcript_path });
    let order: Vec<String> = report.order.iter().map(|(l, h)| format!("{l} < {h}")).collect();
    let table = format!(
        "episodes {}\nfeedback {}\nrules {}\norder {}\n",
        report.episodes,
        report.feedback,
        bundle.theory.rules.iter().map(|r| format!("{}: {} -> {}", r.id, r.premise, r.conclusion)).collect::<Vec<_>>().join(", "),
        if order.is_empty() { "none".into() } else { order.join(", ") }
    );
    emit(cli, &v, &table);
    Ok(())
}

fn cmd_eval(cli: &Cli, env: &Env, a: &EvalArgs) -> Result<()> {
    let subject = match (&a.agent, &a.policy) {
        (Some(dir), _) => Subject::Agent(Box::new(load_agent(env, dir)?)),
        (None, Some(p)) => {
            let m = PolicyModel::load(p)?;
            m.check_config(&env.config().hash())?;
            Subject::Policy(m)
        }
        (None, None) => unreachable!("clap requires one of --agent and --policy"),
    };
    let reset = match &a.state {
        Some(p) => ResetMode::Fixed(read_state(p, env)?),
        None => match a.reset {
            ResetArg::Initial => ResetMode::Initial,
            ResetArg::Random => ResetMode::Random,
            ResetArg::RandomPassable => ResetMode::RandomPassable,
        },
    };
    let spec = EvalSpec { reset, ..EvalSpec::new(a.episodes, cli.seed) };
    let report = evaluate(&subject, env, &spec, Exec::default())?;
    if let (Some(path), Subject::Agent(b)) = (&a.traces, &subject) {
        dump_traces(path, b, env, &spec)?;
    }
    let v = serde_json::to_value(&report)?;
    if let Some(out) = &cli.out {
        write_json(out, &v)?;
    }
    emit(cli, &v, &report.to_table());
    Ok(())
}

/// Replays the evaluation episodes with recording on; episode seeds match `evaluate`.
fn dump_traces(path: &Path, bundle: &AgentBundle, env: &Env, spec: &EvalSpec) -> Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    let base = env.clone().with_termination(spec.termination);
    for i in 0..spec.episodes {
        let seed = episode_seed(spec.seed, i);
        let mut env = base.clone();
        env.reseed(seed);
        env.reset(&spec.reset);
        let mut b = bundle.clone();
        b.reseed(seed);
        for (t, step) in run_episode(&mut b, &mut env, None, true)?.steps.iter().enumerate() {
            let line = json!({ "episode": i, "t": t, "state": step.state, "trace": step.trace, "rewards": step.rewards });
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_embed(cli: &Cli, env: &Env, a: &EmbedArgs) -> Result<()> {
    let cfg = EmbedConfig {
        scope: match a.scope {
            ScopeArg::FromS0 => Scope::FromS0,
            ScopeArg::Full => Scope::Full,
        },
        step: a.step,
        max_weight: a.max_weight,
        timeout: Duration::from_secs(a.timeout_secs),
        track_drowning: a.track_drowning,
        sampled: a.sampled_resets.map(|resets| Sampling { resets, steps: 200, seed: cli.seed }),
        ..EmbedConfig::default()
    };
    let report = compute_ethical_weight(env, &cfg, Exec::default())?;
    let v = serde_json::to_value(&report)?;
    if let Some(out) = &cli.out {
        write_json(out, &v)?;
    }
    let table = format!(
        "ethical weight {:.2}\nstates {}\nchecked states {}\nelapsed {:.1} s\n",
        report.weight, report.states, report.checked_states, report.elapsed_secs
    );
    emit(cli, &v, &table);
    Ok(())
}

fn cmd_render(cli: &Cli, env: &Env, a: &RenderArgs) -> Result<()> {
    let s = match &a.state {
        Some(p) => read_state(p, env)?,
        None => env.initial_state(),
    };
    if a.png {
        let out = cli.out.as_ref().ok_or_else(|| ConfigError("--png needs --out".into()))?;
        render_png(env, &s, out)?;
        return Ok(());
    }
    let text = render_text(env, &s);
    match &cli.out {
        Some(out) => fs::write(out, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_graph(cli: &Cli, env: &Env, a: &GraphArgs) -> Result<()> {
    let mut bundle = load_agent(env, &a.agent)?;
    let active = match &a.state {
        Some(p) => {
            let s = read_state(p, env)?;
            let (_, trace) = bundle.select_action(env, &s)?;
            trace.labels.into_iter().chain(trace.obligations).collect()
        }
        None => Default::default(),
    };
    let dot = bundle.theory.to_dot(&active);
    match &cli.out {
        Some(out) => fs::write(out, &dot)?,
        None => print!("{dot}"),
    }
    Ok(())
}

fn cmd_risk_csv(cli: &Cli, env: &Env, a: &RiskCsvArgs) -> Result<()> {
    let model = RiskModel::load(&a.model)?;
    model.check_config(&env.config().hash())?;
    let states = rbama::embedding::estimate_state_space(env, a.resets, a.steps, cli.seed, Exec::default());
    let rows = risk_rows(&model, env, &states, a.threshold);
    let out = out_dir(cli, "risk.csv");
    write_risk_csv(&out, &rows)?;
    let v = json!({ "states": states.len(), "rows": rows.len(), "csv": out });
    emit(cli, &v, &format!("{} of {} states flagged, written to {}\n", rows.len(), states.len(), out.display()));
    Ok(())
}

fn cmd_replay(cli: &Cli, a: &ReplayArgs) -> Result<()> {
    let start = match &a.theory {
        Some(p) => ReasonTheory::from_json(&fs::read_to_string(p)?)?,
        None => ReasonTheory::new(),
    };
    let theory = replay_feedback(&start, &read_transcript(&a.transcript)?)?;
    let text = theory.to_json();
    if let Some(out) = &cli.out {
        fs::write(out, &text)?;
    }
    let v: Value = serde_json::from_str(&text)?;
    emit(cli, &v, &(text + "\n"));
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Cmd::ReplayFeedback(a) = &cli.cmd {
        return cmd_replay(cli, a);
    }
    let env = Env::new(load_config(&cli.config)?, cli.seed)?;
    match &cli.cmd {
        Cmd::Train(a) => cmd_train(cli, &env, a),
        Cmd::Teach(a) => cmd_teach(cli, &env, a),
        Cmd::Eval(a) => cmd_eval(cli, &env, a),
        Cmd::Embed(a) => cmd_embed(cli, &env, a),
        Cmd::Render(a) => cmd_render(cli, &env, a),
        Cmd::Graph(a) => cmd_graph(cli, &env, a),
        Cmd::RiskCsv(a) => cmd_risk_csv(cli, &env, a),
        Cmd::ReplayFeedback(_) => unreachable!(),
    }
}

const CONFIG: u8 = 2;
const TIMEOUT: u8 = 3;
const INCONSISTENT: u8 = 4;

fn env_code(e: &EnvError) -> u8 {
    match e {
        EnvError::InvalidConfig(_) | EnvError::InvalidState(_) => CONFIG,
        EnvError::Io(_) => 1,
    }
}

fn reason_code(e: &ReasonError) -> u8 {
    match e {
        ReasonError::InconsistentFeedback(_) => INCONSISTENT,
        ReasonError::Parse(_) | ReasonError::DuplicateRule(_) | ReasonError::UnknownRule(_) => CONFIG,
        ReasonError::MissingKind(_) | ReasonError::KindMismatch(_) => CONFIG,
        ReasonError::AtomBudget(_) | ReasonError::RuleBudget(_) => 1,
    }
}

fn policy_code(e: &PolicyError) -> u8 {
    match e {
        PolicyError::Env(e) => env_code(e),
        PolicyError::ConfigMismatch { .. } | PolicyError::Hyperparams(_) | PolicyError::Format(_) => CONFIG,
        PolicyError::Io(_) => 1,
    }
}

fn judge_code(e: &JudgeError) -> u8 {
    match e {
        JudgeError::Reason(e) => reason_code(e),
        JudgeError::ReplayMismatch(..) => INCONSISTENT,
        JudgeError::Format(_) | JudgeError::NoTranslator(_) => CONFIG,
        JudgeError::Io(_) => 1,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<ConfigError>() {
        return CONFIG;
    }
    if let Some(e) = err.downcast_ref::<EmbedError>() {
        return match e {
            EmbedError::Timeout { .. } | EmbedError::StateBudget(_) => TIMEOUT,
            EmbedError::Stochastic => CONFIG,
            EmbedError::Env(e) => env_code(e),
            EmbedError::NoWeight(_) => 1,
        };
    }
    if let Some(e) = err.downcast_ref::<AgentError>() {
        return match e {
            AgentError::Reason(e) => reason_code(e),
            AgentError::Policy(e) => policy_code(e),
            AgentError::Judge(e) => judge_code(e),
            AgentError::Format(_) | AgentError::MissingPolicy(_) | AgentError::MissingShield(_) => CONFIG,
            AgentError::UnknownObligation(_) => CONFIG,
            AgentError::Io(_) => 1,
        };
    }
    if let Some(e) = err.downcast_ref::<EnvError>() {
        return env_code(e);
    }
    if let Some(e) = err.downcast_ref::<PolicyError>() {
        return policy_code(e);
    }
    if let Some(e) = err.downcast_ref::<JudgeError>() {
        return judge_code(e);
    }
    if let Some(e) = err.downcast_ref::<ReasonError>() {
        return reason_code(e);
    }
    if err.is::<serde_json::Error>() {
        return CONFIG;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs;
    match with_threads(jobs, || run(&cli).map_err(|e| (exit_code(&e), format!("{e:#}")))) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            let _ = writeln!(io::stderr(), "error: {msg}");
            ExitCode::from(code)
        }
    }
}
