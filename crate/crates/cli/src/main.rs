//! `negotiate`: training data, intent model, trials, batches, replay and the
//! live server.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 when the work
//! itself fails.

mod roles;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use negotiate_bridge::ServerOptions;
use negotiate_core::harness::{
    compute_metrics, default_model, generate_assignments, generate_training_trials, run_batch, train_model, RecordLevel,
};
use negotiate_core::intent::{read_records, split_by_trial, write_records, LdaModel, TrainingRecord};
use negotiate_core::{run_trial, HumanSide, Profile, RobotRole, TrialConfig, TrialLog};
use serde_json::json;

use roles::{goal_name, parse_human, parse_robot};

#[derive(Debug, Parser)]
#[command(name = "negotiate", version, about = "Physical negotiation simulator")]
struct Cli {
    /// Profile TOML file, or the name of a built-in profile (default, realistic).
    #[arg(long, global = true, env = "NEGOTIATE_PROFILE")]
    profile: Option<String>,
    /// Print summaries as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate passive trials and write labelled feature records.
    GenData(GenData),
    /// Fit the intent classifier on feature records.
    Train(Train),
    /// Score a model on feature records.
    Eval(Eval),
    /// Run one trial.
    Run(Run),
    /// Run a batch of randomly assigned trials.
    Batch(Batch),
    /// Recompute metrics from a trial log.
    Replay(Replay),
    /// Serve live sessions over web sockets.
    Serve(Serve),
    /// Print the effective profile as TOML.
    Profile,
}

#[derive(Debug, Args)]
struct GenData {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Write the records of later trials here instead of `--out`.
    #[arg(long)]
    test_out: Option<PathBuf>,
    /// Trials kept in `--out` when `--test-out` is given; default two thirds.
    #[arg(long)]
    train_trials: Option<usize>,
}

#[derive(Debug, Args)]
struct Train {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Eval {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct ModelArg {
    /// Trained model JSON; without it the profile's default model is trained.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Run {
    /// `follower`, or `kcg|hard|soft:gN`.
    #[arg(long, value_parser = parse_robot)]
    robot: RobotRole,
    /// `follower`, or `hard|soft:gN`.
    #[arg(long, value_parser = parse_human)]
    human: HumanSide,
    #[arg(long)]
    seed: u64,
    /// Trial log; `.bin` selects the binary format, anything else JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Debug, Args)]
struct Batch {
    #[arg(long, default_value_t = 240)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Per-trial CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Debug, Args)]
struct Replay {
    log: PathBuf,
}

#[derive(Debug, Args)]
struct Serve {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Robot role for new sessions.
    #[arg(long, value_parser = parse_robot, default_value = "follower")]
    robot: RobotRole,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<negotiate_core::Error> for CliError {
    fn from(e: negotiate_core::Error) -> Self {
        match e {
            negotiate_core::Error::GoalIndex { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_profile(spec: Option<&str>) -> Result<Profile> {
    let Some(spec) = spec else { return Ok(Profile::default()) };
    let path = Path::new(spec);
    if path.exists() {
        return Ok(Profile::load(path)?);
    }
    Profile::named(spec).map_err(|_| CliError::Usage(format!("no profile file or built-in profile named '{spec}'")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load_model(arg: &ModelArg, profile: &Profile) -> Result<LdaModel> {
    match &arg.model {
        Some(path) => {
            let mut s = String::new();
            open(path)?.read_to_string(&mut s)?;
            Ok(LdaModel::from_json(&s)?)
        }
        None => Ok(default_model(profile)?),
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn dispatch(cli: Cli) -> Result<()> {
    let profile = load_profile(cli.profile.as_deref())?;
    match cli.command {
        Command::GenData(a) => gen_data(a, &profile, cli.json),
        Command::Train(a) => train(a, &profile, cli.json),
        Command::Eval(a) => eval(a, cli.json),
        Command::Run(a) => run(a, profile, cli.json),
        Command::Batch(a) => batch(a, profile, cli.json),
        Command::Replay(a) => replay(a, cli.json),
        Command::Serve(a) => serve(a, profile),
        Command::Profile => {
            print!("{}", profile.to_toml_string()?);
            Ok(())
        }
    }
}

fn gen_data(a: GenData, profile: &Profile, json: bool) -> Result<()> {
    let trials = a.trials.unwrap_or(profile.training.n_trials);
    let seed = a.seed.unwrap_or(profile.training.seed);
    if trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let records = generate_training_trials(trials, profile, seed)?;
    let (train, test) = match &a.test_out {
        Some(_) => {
            let n_train = a.train_trials.unwrap_or(trials * 2 / 3);
            if n_train == 0 || n_train >= trials {
                return Err(CliError::Usage("--train-trials must leave trials on both sides".into()));
            }
            split_by_trial(records, n_train)
        }
        None => (records, Vec::new()),
    };
    let mut w = create(&a.out)?;
    write_records(&mut w, &train)?;
    w.flush()?;
    if let Some(path) = &a.test_out {
        let mut w = create(path)?;
        write_records(&mut w, &test)?;
        w.flush()?;
    }
    if json {
        print_json(
            &json!({ "trials": trials, "seed": seed, "train_records": train.len(), "test_records": test.len() }),
        );
    } else {
        println!("{trials} trials, {} records written, {} held out", train.len(), test.len());
    }
    Ok(())
}

fn read_data(path: &Path) -> Result<Vec<TrainingRecord>> {
    let records = read_records(open(path)?)?;
    if records.is_empty() {
        return Err(CliError::Runtime(format!("{}: no records", path.display())));
    }
    Ok(records)
}

fn train(a: Train, profile: &Profile, json: bool) -> Result<()> {
    let records = read_data(&a.data)?;
    let model = train_model(&records, profile)?;
    let mut w = create(&a.out)?;
    w.write_all(model.to_json()?.as_bytes())?;
    w.flush()?;
    if json {
        print_json(&json!({ "samples": records.len(), "classes": model.n_classes(), "priors": model.priors() }));
    } else {
        println!("trained on {} samples, {} classes", records.len(), model.n_classes());
    }
    Ok(())
}

fn eval(a: Eval, json: bool) -> Result<()> {
    let mut s = String::new();
    open(&a.model)?.read_to_string(&mut s)?;
    let model = LdaModel::from_json(&s)?;
    let records = read_data(&a.data)?;
    let k = model.n_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    for r in &records {
        if r.label >= k {
            return Err(CliError::Runtime(format!("record label {} outside the model's {k} classes", r.label)));
        }
        let (predicted, _) = model.classify(r.features.as_slice());
        confusion[r.label][predicted] += 1;
    }
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let accuracy = correct as f64 / records.len() as f64;
    if json {
        print_json(&json!({ "accuracy": accuracy, "n": records.len(), "correct": correct, "confusion": confusion }));
    } else {
        println!("accuracy {:.4} ({correct}/{})", accuracy, records.len());
        println!("confusion (rows: true goal, columns: predicted)");
        let header: String = (0..k).map(|j| format!("{:>8}", goal_name(j))).collect();
        println!("    {header}");
        for (i, row) in confusion.iter().enumerate() {
            let cells: String = row.iter().map(|c| format!("{c:>8}")).collect();
            println!("{:<4}{cells}", goal_name(i));
        }
    }
    Ok(())
}

fn run(a: Run, profile: Profile, json: bool) -> Result<()> {
    let config = TrialConfig { robot: a.robot, human: a.human, seed: a.seed, record: RecordLevel::Full, profile };
    config.validate()?;
    let model = load_model(&a.model, &config.profile)?;
    let log = run_trial(&config, &model)?;
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        if path.extension().is_some_and(|e| e == "bin") {
            log.write_binary(&mut w)?;
        } else {
            log.write_jsonl(&mut w)?;
        }
        w.flush()?;
    }
    report_log(&log, json)
}

fn report_log(log: &TrialLog, json: bool) -> Result<()> {
    let m = compute_metrics(log)?;
    if json {
        print_json(
            &json!({ "seed": log.config.seed, "robot": log.config.robot, "human": log.config.human, "metrics": m }),
        );
    } else {
        let goal = m.goal.map(goal_name).unwrap_or_else(|| "none".into());
        let term = m.termination.map(|t| format!("{t:?}").to_lowercase()).unwrap_or_else(|| "none".into());
        let status = format!("{:?}", m.status).to_lowercase();
        let winner = format!("{:?}", m.winner).to_lowercase();
        println!(
            "outcome {status} goal={goal} termination={term} duration={:.3}s success={} winner={winner} switches={}",
            m.duration, m.success, m.n_switches
        );
    }
    Ok(())
}

fn batch(a: Batch, profile: Profile, json: bool) -> Result<()> {
    if a.trials == 0 || a.jobs == 0 {
        return Err(CliError::Usage("--trials and --jobs must be positive".into()));
    }
    let model = load_model(&a.model, &profile)?;
    let configs = generate_assignments(a.trials, a.seed, &profile, RecordLevel::Summary);
    let report = run_batch(&configs, a.jobs, Some(&model))?;
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    let summary = report.summary_json()?;
    if let Some(path) = &a.summary {
        let mut w = create(path)?;
        w.write_all(summary.as_bytes())?;
        w.flush()?;
    }
    if json {
        println!("{summary}");
    } else {
        for g in std::iter::once(&report.summary.overall).chain(&report.summary.groups) {
            let pct = |x: f64| format!("{:.1}%", 100.0 * x);
            let opt = |x: Option<f64>| x.map(|v| format!("{v:.2}s")).unwrap_or_else(|| "-".into());
            println!(
                "{:<18} n={:<4} success={} [{}, {}] robot_wins={} human_wins={} aborts={} switches={:.2} agree={} disagree={}",
                g.label,
                g.n,
                pct(g.success_rate),
                pct(g.success_ci95.lo),
                pct(g.success_ci95.hi),
                g.robot_wins,
                g.human_wins,
                g.aborts,
                g.mean_switches,
                opt(g.mean_agreement_duration),
                opt(g.mean_disagreement_duration),
            );
        }
    }
    Ok(())
}

fn replay(a: Replay, json: bool) -> Result<()> {
    let mut bytes = Vec::new();
    open(&a.log)?.read_to_end(&mut bytes)?;
    let log = if bytes.starts_with(b"NGLB") {
        TrialLog::read_binary(bytes.as_slice())?
    } else {
        TrialLog::read_jsonl(bytes.as_slice())?
    };
    report_log(&log, json)
}

fn serve(a: Serve, profile: Profile) -> Result<()> {
    if !(a.speed.is_finite() && a.speed > 0.0) {
        return Err(CliError::Usage("--speed must be positive".into()));
    }
    let template =
        TrialConfig { robot: a.robot, human: HumanSide::Live, seed: a.seed, record: RecordLevel::Summary, profile };
    template.validate()?;
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    eprintln!("preparing intent model");
    let model = load_model(&a.model, &template.profile)?;
    let options = ServerOptions { speed: a.speed, template, ..Default::default() };
    let runtime = tokio::runtime::Runtime::new()?;
    let addr = SocketAddr::new(a.host, a.port);
    runtime.block_on(negotiate_bridge::serve(addr, model, options)).map_err(|e| CliError::Runtime(e.to_string()))
}
