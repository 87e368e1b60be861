use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use pourflow::dataset::{
    holdout_split, load_corpus, save_corpus, synthesize_corpus, GeneratorSpec, HoldoutCase,
    StaticContext,
};
use pourflow::eval::{
    run_case, write_case_artifacts, CaseConfig, CaseReport, DEFAULT_BINS, DEFAULT_THRESHOLD,
};
use pourflow::generate::generate_simulated;
use pourflow::network::NetKind;
use pourflow::optim::{train, write_training_log, TrainConfig};
use pourflow::NetworkBundle;

#[derive(Parser, Debug)]
#[command(
    name = "pourflow",
    version,
    about = "Learn, generate and evaluate pouring motions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic demonstration corpus.
    Synth(SynthArgs),
    /// Train one network on a corpus.
    Train(TrainArgs),
    /// Generate one trajectory with trained frc/vel/stp networks.
    Generate(GenerateArgs),
    /// Run holdout cases: train, generate on unseen trials, score histograms.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Generator spec (TOML); defaults to the built-in inventory.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// frc, vel or stp.
    #[arg(long)]
    kind: NetKind,
    #[arg(long)]
    corpus: PathBuf,
    /// Directory for `<kind>.json` and `<kind>_log.csv`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to 4000 for vel and 2000 for frc/stp.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Log progress every N epochs.
    #[arg(long, default_value_t = 100)]
    log_every: usize,
    /// Add a wall-clock column to the loss log.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Directory holding frc.json, vel.json and stp.json.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    frc: Option<PathBuf>,
    #[arg(long)]
    vel: Option<PathBuf>,
    #[arg(long)]
    stp: Option<PathBuf>,
    /// Corpus to pull θ_1 and z from (with --trial).
    #[arg(long, requires = "trial")]
    corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    trial: Option<String>,
    /// Initial angle in degrees (overrides the trial's).
    #[arg(long, allow_negative_numbers = true)]
    theta1: Option<f64>,
    /// Static context: f_init,f_empty,f_final,d_cup,h_cup,d_ctn,h_ctn,rho.
    #[arg(long, value_delimiter = ',')]
    z: Option<Vec<f64>>,
    /// Step limit; defaults to the T_max the vel network was trained with.
    #[arg(long)]
    t_max: Option<usize>,
    /// Accepted for interface symmetry; generation is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// `all` or a comma-separated list of case ids 1-7.
    #[arg(long, default_value = "all")]
    cases: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the epochs of all three networks.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    frc_epochs: Option<usize>,
    #[arg(long)]
    vel_epochs: Option<usize>,
    #[arg(long)]
    stp_epochs: Option<usize>,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long, value_delimiter = ',')]
    unseen_cups: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    unseen_containers: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    unseen_materials: Option<Vec<String>>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn ensure_exists(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.exists() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let spec = match &a.spec {
        Some(p) => GeneratorSpec::from_file(p)?,
        None => GeneratorSpec::default(),
    };
    spec.validate()?;
    ensure_dir(&a.out)?;
    let corpus = synthesize_corpus(&spec, a.seed)?;
    save_corpus(&corpus, &a.out)?;
    println!("trials={} t_max={}", corpus.len(), corpus.t_max());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> anyhow::Result<()> {
    ensure_exists(&a.corpus, "corpus")?;
    let corpus = load_corpus(&a.corpus)?;
    ensure_dir(&a.out)?;
    let mut cfg = TrainConfig::for_kind(a.kind);
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    cfg.seed = a.seed;
    cfg.adam.learning_rate = a.lr;
    cfg.hidden_size = a.hidden;
    cfg.log_every = a.log_every;
    cfg.validate()?;
    info!(
        "training {} on {} trials: {} epochs, lr {}, hidden {}",
        a.kind,
        corpus.len(),
        cfg.epochs,
        cfg.adam.learning_rate,
        cfg.hidden_size
    );
    let every = cfg.log_every;
    let outcome = train::<f64>(a.kind, &corpus.trials, &cfg, |r| {
        if every > 0 && r.epoch % every == 0 {
            match r.accuracy {
                Some(acc) => info!("epoch {} loss {:.6} accuracy {:.4}", r.epoch, r.loss, acc),
                None => info!("epoch {} loss {:.6}", r.epoch, r.loss),
            }
        }
    })
    .with_context(|| format!("training {}", a.kind))?;
    let ckpt = a.out.join(format!("{}.json", a.kind));
    outcome.bundle.save_checkpoint(&ckpt)?;
    write_training_log(
        &a.out.join(format!("{}_log.csv", a.kind)),
        &outcome.history,
        a.timing,
    )?;
    match outcome.final_accuracy {
        Some(acc) => println!(
            "kind={} final_loss={} accuracy={}",
            a.kind, outcome.final_loss, acc
        ),
        None => println!("kind={} final_loss={}", a.kind, outcome.final_loss),
    }
    Ok(())
}

fn load_net(
    explicit: &Option<PathBuf>,
    models: &Option<PathBuf>,
    kind: NetKind,
) -> anyhow::Result<NetworkBundle> {
    let path = match (explicit, models) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join(format!("{kind}.json")),
        (None, None) => bail!("no checkpoint for {kind}: pass --{kind} or --models"),
    };
    ensure_exists(&path, "checkpoint")?;
    let net = NetworkBundle::load_checkpoint(&path)?;
    net.expect_kind(kind)
        .with_context(|| format!("checkpoint {}", path.display()))?;
    Ok(net)
}

fn cmd_generate(a: GenerateArgs) -> anyhow::Result<()> {
    let frc = load_net(&a.frc, &a.models, NetKind::Frc)?;
    let vel = load_net(&a.vel, &a.models, NetKind::Vel)?;
    let stp = load_net(&a.stp, &a.models, NetKind::Stp)?;

    let (theta_1, z) = match (&a.corpus, &a.trial) {
        (Some(dir), Some(id)) => {
            ensure_exists(dir, "corpus")?;
            let corpus = load_corpus(dir)?;
            let trial = corpus
                .get(id)
                .with_context(|| format!("trial {id} not in corpus"))?;
            let z = match &a.z {
                Some(v) => StaticContext::from_slice(v)?,
                None => trial.context,
            };
            (a.theta1.unwrap_or(trial.theta[0]), z)
        }
        _ => {
            let z = a.z.as_ref().context("pass --corpus/--trial or --z")?;
            (a.theta1.unwrap_or(0.0), StaticContext::from_slice(z)?)
        }
    };
    z.validate()?;
    let t_max = match a.t_max {
        Some(t) => t,
        None => vel
            .meta
            .as_ref()
            .map(|m| m.t_max)
            .context("vel checkpoint has no T_max; pass --t-max")?,
    };
    ensure_dir(&a.out)?;
    let traj = generate_simulated(&frc, &vel, &stp, theta_1, &z, t_max)?;
    let path = a.out.join("trajectory.csv");
    traj.write_csv(&path)?;
    println!(
        "termination={} steps={} final_theta={}",
        traj.termination,
        traj.steps(),
        traj.theta[traj.steps()]
    );
    traj.into_result()?;
    Ok(())
}

fn parse_cases(text: &str) -> anyhow::Result<Vec<HoldoutCase>> {
    if text.trim() == "all" {
        return Ok(HoldoutCase::ALL.to_vec());
    }
    let mut out = BTreeSet::new();
    for part in text.split(',') {
        let id: u8 = part
            .trim()
            .parse()
            .with_context(|| format!("bad case id '{part}'"))?;
        out.insert(HoldoutCase::from_id(id)?);
    }
    Ok(out.into_iter().collect())
}

fn cmd_evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let cases = parse_cases(&a.cases)?;
    if !(0.0..=1.0).contains(&a.threshold) {
        bail!("threshold must lie in [0, 1]");
    }
    ensure_exists(&a.corpus, "corpus")?;
    let corpus = load_corpus(&a.corpus)?;
    ensure_dir(&a.out)?;

    let mut cfg = CaseConfig {
        seed: a.seed,
        threshold: a.threshold,
        bins: a.bins,
        ..CaseConfig::default()
    };
    if let Some(e) = a.epochs {
        cfg = cfg.with_epochs(e);
    }
    for (t, e) in [
        (&mut cfg.frc, a.frc_epochs),
        (&mut cfg.vel, a.vel_epochs),
        (&mut cfg.stp, a.stp_epochs),
    ] {
        if let Some(e) = e {
            t.epochs = e;
        }
        t.hidden_size = a.hidden;
        t.validate()?;
    }
    let set = |v: Vec<String>| v.into_iter().collect::<BTreeSet<_>>();
    if let Some(v) = a.unseen_cups {
        cfg.unseen.cups = set(v);
    }
    if let Some(v) = a.unseen_containers {
        cfg.unseen.containers = set(v);
    }
    if let Some(v) = a.unseen_materials {
        cfg.unseen.materials = set(v);
    }

    let mut reports = Vec::with_capacity(cases.len());
    for case in cases {
        info!("{case}: training and generating");
        let report = match run_case(&corpus, case, &cfg) {
            Ok(run) => run.report,
            Err(e) => {
                let sizes = holdout_split(&corpus, case, &cfg.unseen).ok();
                let mut r = CaseReport::failed(case, &cfg, &e);
                if let Some((train, test)) = sizes {
                    r.train_size = train.len();
                    r.test_size = test.len();
                }
                r
            }
        };
        write_case_artifacts(&report, &a.out.join(format!("case_{}", case.id())))?;
        println!("{}", report.summary_line());
        reports.push(report);
    }

    let mut summary =
        String::from("case,description,train_size,test_size,low_m,similarity,passed,error\n");
    for r in &reports {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.case.id(),
            r.description,
            r.train_size,
            r.test_size,
            r.low_m,
            r.similarity.map(|s| s.to_string()).unwrap_or_default(),
            r.passed.map(|p| p.to_string()).unwrap_or_default(),
            r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        ));
    }
    let path = a.out.join("summary.csv");
    fs::write(&path, summary).with_context(|| format!("writing {}", path.display()))?;

    let failed = reports.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        bail!("{failed} case(s) failed to run");
    }
    Ok(())
}
