//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pourflow::dataset::{
    load_corpus, save_corpus, synthesize_corpus, Corpus, FillOracle, GeneratorSpec, Provenance,
    StaticContext, TrialLabels, TrialRecord,
};
use pourflow::eval::dtw_cost;
use pourflow::generate::{generate_live, generate_simulated, Termination};
use pourflow::linalg::Vector;
use pourflow::lstm::{lstm_step, LstmParams};
use pourflow::network::{loss_and_grad, NetKind, NetworkBundle, Scaler, SequenceBatch};
use pourflow::optim::{train, windowed_means, TrainConfig};

type Check = Result<String, String>;

const SEED: u64 = 7;
/// Epochs per network for the seven-case battery.
const BATTERY_EPOCHS: [(&str, usize); 3] = [
    ("--vel-epochs", 400),
    ("--frc-epochs", 200),
    ("--stp-epochs", 300),
];

struct Trained {
    corpus: Corpus,
    frc: NetworkBundle<f64>,
    vel: NetworkBundle<f64>,
    stp: NetworkBundle<f64>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pourflow")
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin())
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| format!("spawn failed: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "`pourflow {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

// ---------------------------------------------------------------- 1

fn context() -> StaticContext {
    StaticContext {
        f_init: 1.6,
        f_empty: 0.6,
        f_final: 0.75,
        d_cup: 72.0,
        h_cup: 95.0,
        d_ctn: 88.0,
        h_ctn: 120.0,
        rho: 0.85,
    }
}

fn trial(id: &str, theta: Vec<f64>, force: Vec<f64>) -> TrialRecord {
    TrialRecord {
        id: id.into(),
        theta,
        force,
        context: context(),
        labels: TrialLabels {
            cup: "c".into(),
            container: "k".into(),
            material: "m".into(),
        },
        provenance: Provenance::Synthetic,
    }
}

fn gradient_check(kind: NetKind, rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let trials = vec![
        trial("a", vec![0.5, 6.0, 14.5, 21.0], vec![1.6, 1.55, 1.3, 1.1]),
        trial("b", vec![1.0, 9.0, 20.0], vec![1.6, 1.4, 0.95]),
    ];
    let batch = SequenceBatch::<f64>::from_trials(kind, &trials, 4).map_err(|e| e.to_string())?;
    let mut net = NetworkBundle::<f64>::random(kind, 4, 0.5, rng);
    net.input_scaler = Scaler::fit(kind.input_size(), batch.valid_frames());
    if kind != NetKind::Stp {
        let ts: Vec<f64> = batch.valid_targets().collect();
        net.target_scaler = Scaler::fit(1, ts.chunks(1));
    }
    let mut grads = net.params.zeros_like();
    loss_and_grad(&net, &batch, Some(&mut grads)).map_err(|e| e.to_string())?;
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n.to_string(), t.to_vec()))
        .collect();

    let eps = 1e-5;
    let mut checked = 0;
    for (k, (name, g)) in analytic.iter().enumerate() {
        for (j, &ga) in g.iter().enumerate() {
            let orig = net.params.tensors_mut()[k].1[j];
            net.params.tensors_mut()[k].1[j] = orig + eps;
            let up = loss_and_grad(&net, &batch, None)
                .map_err(|e| e.to_string())?
                .loss;
            net.params.tensors_mut()[k].1[j] = orig - eps;
            let down = loss_and_grad(&net, &batch, None)
                .map_err(|e| e.to_string())?
                .loss;
            net.params.tensors_mut()[k].1[j] = orig;
            let fd = (up - down) / (2.0 * eps);
            let err = (ga - fd).abs();
            if err > 1e-7 && err > 1e-4 * ga.abs().max(fd.abs()) {
                return Err(format!("{kind} {name}[{j}]: bptt {ga:e} vs fd {fd:e}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counts = Vec::new();
    for kind in [NetKind::Frc, NetKind::Vel, NetKind::Stp] {
        counts.push(format!("{kind} {}", gradient_check(kind, &mut rng)?));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "parameters checked: {} ({secs:.2}s)",
        counts.join(", ")
    ))
}

// ---------------------------------------------------------------- 2

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn criterion_2() -> Check {
    let x = [0.7, -1.3];
    let h_prev = [0.2, -0.4, 0.9];
    let c_prev = [1.0, -2.0, 0.3];
    let mut worst: f64 = 0.0;

    // Zero parameters: every gate is 1/2 and the candidate is 0.
    let zero = LstmParams::<f64>::zeros(3, 2);
    let (h, c, _) = lstm_step(&zero, &x, &h_prev, &c_prev).map_err(|e| e.to_string())?;
    for k in 0..3 {
        let ce = 0.5 * c_prev[k];
        worst = worst
            .max((c[k] - ce).abs())
            .max((h[k] - 0.5 * ce.tanh()).abs());
    }
    worst = worst.max((h[0] - 0.231_058_578_630_004_9).abs());

    // Forget and output gates saturated open, input gate shut.
    let mut sat = LstmParams::<f64>::zeros(3, 2);
    sat.b_f = Vector(vec![20.0; 3]);
    sat.b_o = Vector(vec![20.0; 3]);
    sat.b_i = Vector(vec![-20.0; 3]);
    sat.b_g = Vector(vec![0.5; 3]);
    let (h, c, _) = lstm_step(&sat, &x, &h_prev, &c_prev).map_err(|e| e.to_string())?;
    for k in 0..3 {
        let ce = sigmoid(20.0) * c_prev[k] + sigmoid(-20.0) * 0.5f64.tanh();
        worst = worst
            .max((c[k] - ce).abs())
            .max((h[k] - sigmoid(20.0) * ce.tanh()).abs());
        worst = worst.max((c[k] - c_prev[k]).abs());
    }
    ensure(worst <= 1e-8, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.2e}"))
}

// ---------------------------------------------------------------- 3

/// Minimum cost over every monotone path from (0,0) to the far corner.
fn brute_force_dtw(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
    let here = (a[i] - b[j]).abs();
    if i + 1 == a.len() && j + 1 == b.len() {
        return here;
    }
    let mut best = f64::INFINITY;
    if i + 1 < a.len() {
        best = best.min(brute_force_dtw(a, b, i + 1, j));
    }
    if j + 1 < b.len() {
        best = best.min(brute_force_dtw(a, b, i, j + 1));
    }
    if i + 1 < a.len() && j + 1 < b.len() {
        best = best.min(brute_force_dtw(a, b, i + 1, j + 1));
    }
    here + best
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 0..200 {
        let mut seq = || -> Vec<f64> {
            let len = rng.random_range(1..=6);
            (0..len)
                .map(|_| f64::from(rng.random_range(-4i32..=4)))
                .collect()
        };
        let (a, b) = (seq(), seq());
        let dp = dtw_cost(&a, &b).map_err(|e| e.to_string())?;
        let bf = brute_force_dtw(&a, &b, 0, 0);
        ensure(dp == bf, || {
            format!("pair {n}: {a:?} vs {b:?}: dp {dp} brute force {bf}")
        })?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.1}s"))?;
    Ok(format!("200 pairs exact ({secs:.3}s)"))
}

// ---------------------------------------------------------------- 4

fn default_config(kind: NetKind, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::for_kind(kind);
    cfg.seed = seed;
    cfg
}

fn criterion_4(trained: &mut Option<Trained>) -> Check {
    let start = Instant::now();
    let corpus = synthesize_corpus(&GeneratorSpec::default(), SEED).map_err(|e| e.to_string())?;
    ensure(corpus.len() >= 120, || {
        format!("corpus has {} trials", corpus.len())
    })?;

    let mut nets = BTreeMap::new();
    let mut detail = Vec::new();
    for (k, kind) in [NetKind::Vel, NetKind::Frc, NetKind::Stp]
        .into_iter()
        .enumerate()
    {
        let cfg = default_config(kind, k as u64);
        ensure(
            cfg.adam.learning_rate == 0.01 && cfg.hidden_size == 16,
            || "unexpected default hyperparameters".into(),
        )?;
        let out =
            train::<f64>(kind, &corpus.trials, &cfg, |_| {}).map_err(|e| format!("{kind}: {e}"))?;
        detail.push(format!(
            "{kind} {} epochs loss {:.5}",
            cfg.epochs, out.final_loss
        ));
        match kind {
            NetKind::Stp => {
                let acc = out.final_accuracy.unwrap_or(0.0);
                detail.push(format!("stp accuracy {acc:.4}"));
                ensure(acc >= 0.90, || format!("stp accuracy {acc}"))?;
            }
            _ => ensure(out.final_loss <= 0.01, || {
                format!("{kind} loss {}", out.final_loss)
            })?,
        }
        nets.insert(kind.name(), out.bundle);
    }
    let full_secs = start.elapsed().as_secs_f64();
    ensure(full_secs < 1800.0, || {
        format!("full training took {full_secs:.0}s")
    })?;

    // CI-scale variant: 30 trials, 300 epochs, three 100-epoch windows.
    let small = &corpus.trials[..30];
    for (k, kind) in [NetKind::Vel, NetKind::Frc, NetKind::Stp]
        .into_iter()
        .enumerate()
    {
        let mut cfg = default_config(kind, 100 + k as u64);
        cfg.epochs = 300;
        let out =
            train::<f64>(kind, small, &cfg, |_| {}).map_err(|e| format!("{kind} small: {e}"))?;
        let w = windowed_means(&out.history, 100);
        ensure(w.len() == 3 && w[0] > w[1] && w[1] > w[2], || {
            format!("{kind} window means {w:?}")
        })?;
    }

    *trained = Some(Trained {
        corpus,
        frc: nets.remove("frc").unwrap(),
        vel: nets.remove("vel").unwrap(),
        stp: nets.remove("stp").unwrap(),
    });
    Ok(format!(
        "{}; CI windows decrease ({:.0}s full + {:.0}s CI)",
        detail.join(", "),
        full_secs,
        start.elapsed().as_secs_f64() - full_secs
    ))
}

// ---------------------------------------------------------------- 5

fn read_summary(path: &Path) -> Result<Vec<BTreeMap<String, String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty summary")?.split(',').collect();
    Ok(lines
        .map(|l| {
            header
                .iter()
                .map(|h| h.to_string())
                .zip(l.split(',').map(str::to_string))
                .collect()
        })
        .collect())
}

fn criterion_5(corpus_dir: &Path, work: &Path) -> Check {
    let start = Instant::now();
    let out = work.join("battery");
    let mut args = vec![
        "evaluate",
        "--corpus",
        p(corpus_dir),
        "--cases",
        "all",
        "--out",
        p(&out),
        "--seed",
        "1",
    ];
    let epochs: Vec<String> = BATTERY_EPOCHS.iter().map(|(_, e)| e.to_string()).collect();
    for ((flag, _), e) in BATTERY_EPOCHS.iter().zip(&epochs) {
        args.push(*flag);
        args.push(e);
    }
    run_cli(&args)?;
    let rows = read_summary(&out.join("summary.csv"))?;
    ensure(rows.len() == 7, || format!("{} cases reported", rows.len()))?;
    let mut score = BTreeMap::new();
    for r in &rows {
        let id: u8 = r["case"].parse().map_err(|_| "bad case id")?;
        ensure(r["error"].is_empty(), || {
            format!("case {id}: {}", r["error"])
        })?;
        let s: f64 = r["similarity"]
            .parse()
            .map_err(|_| format!("case {id}: no score"))?;
        for f in ["h1.csv", "h2.csv", "overlay.svg", "report.json"] {
            let path = out.join(format!("case_{id}")).join(f);
            ensure(path.exists(), || format!("missing {}", path.display()))?;
        }
        score.insert(id, s);
    }
    let s7 = score[&7];
    for id in 1..=3u8 {
        ensure(score[&id] > s7, || {
            format!("case {id} {:.4} not above case 7 {s7:.4}", score[&id])
        })?;
    }
    let listing: Vec<String> = score.iter().map(|(k, v)| format!("{k}:{v:.3}")).collect();
    Ok(format!(
        "similarities {} ({:.0}s)",
        listing.join(" "),
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 6

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn same_csv_outputs(a: &Path, b: &Path) -> Result<usize, String> {
    let fa = files_under(a);
    ensure(fa == files_under(b), || {
        format!("{} and {} hold different files", a.display(), b.display())
    })?;
    let mut n = 0;
    for rel in fa {
        if rel.extension().is_some_and(|e| e == "csv" || e == "json") {
            let (x, y) = (
                fs::read(a.join(&rel)).unwrap(),
                fs::read(b.join(&rel)).unwrap(),
            );
            ensure(x == y, || format!("{} differs between runs", rel.display()))?;
            n += 1;
        }
    }
    Ok(n)
}

fn criterion_6(corpus_dir: &Path, work: &Path) -> Check {
    let mut compared = 0;
    let twice = |name: &str| {
        (
            work.join(format!("{name}_a")),
            work.join(format!("{name}_b")),
        )
    };

    let (a, b) = twice("synth");
    for d in [&a, &b] {
        run_cli(&["synth", "--seed", "7", "--out", p(d)])?;
    }
    compared += same_csv_outputs(&a, &b)?;
    compared += same_csv_outputs(&a, corpus_dir)?;

    let (ma, mb) = twice("models");
    for d in [&ma, &mb] {
        for kind in ["frc", "vel", "stp"] {
            run_cli(&[
                "train",
                "--kind",
                kind,
                "--corpus",
                p(corpus_dir),
                "--out",
                p(d),
                "--epochs",
                "15",
                "--seed",
                "3",
            ])?;
        }
    }
    compared += same_csv_outputs(&ma, &mb)?;

    let (ga, gb) = twice("generate");
    for d in [&ga, &gb] {
        run_cli(&[
            "generate",
            "--models",
            p(&ma),
            "--corpus",
            p(corpus_dir),
            "--trial",
            "t0042",
            "--out",
            p(d),
        ])?;
    }
    compared += same_csv_outputs(&ga, &gb)?;

    let (ea, eb) = twice("evaluate");
    for d in [&ea, &eb] {
        run_cli(&[
            "evaluate",
            "--corpus",
            p(corpus_dir),
            "--cases",
            "1,7",
            "--epochs",
            "10",
            "--seed",
            "5",
            "--out",
            p(d),
        ])?;
    }
    compared += same_csv_outputs(&ea, &eb)?;
    Ok(format!(
        "{compared} CSV/JSON files byte-identical across synth/train/generate/evaluate reruns"
    ))
}

// ---------------------------------------------------------------- 7

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

fn criterion_7(trained: Option<&Trained>, corpus_dir: &Path, work: &Path) -> Check {
    let corpus = match trained {
        Some(t) => t.corpus.clone(),
        None => synthesize_corpus(&GeneratorSpec::default(), SEED).map_err(|e| e.to_string())?,
    };
    let dir = work.join("roundtrip");
    save_corpus(&corpus, &dir).map_err(|e| e.to_string())?;
    let mut numbers = 0;
    for loaded in [load_corpus(&dir), load_corpus(corpus_dir)] {
        let back = loaded.map_err(|e| e.to_string())?;
        ensure(back.len() == corpus.len(), || "trial count changed".into())?;
        for (x, y) in corpus.trials.iter().zip(&back.trials) {
            ensure(x.id == y.id && x.labels == y.labels, || {
                format!("{} labels changed", x.id)
            })?;
            ensure(bits(&x.theta) == bits(&y.theta), || {
                format!("{} theta changed", x.id)
            })?;
            ensure(bits(&x.force) == bits(&y.force), || {
                format!("{} force changed", x.id)
            })?;
            ensure(
                bits(&x.context.to_array()) == bits(&y.context.to_array()),
                || format!("{} z changed", x.id),
            )?;
            numbers += 2 * x.len() + 8;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let owned;
    let nets: Vec<&NetworkBundle<f64>> = match trained {
        Some(t) => vec![&t.frc, &t.vel, &t.stp],
        None => {
            owned = [NetKind::Frc, NetKind::Vel, NetKind::Stp]
                .map(|k| NetworkBundle::random(k, 16, 0.08, &mut rng));
            owned.iter().collect()
        }
    };
    let mut params = 0;
    for net in nets {
        let path = work.join(format!("{}.json", net.kind));
        net.save_checkpoint(&path).map_err(|e| e.to_string())?;
        let back = NetworkBundle::<f64>::load_checkpoint(&path).map_err(|e| e.to_string())?;
        for ((name, x), (_, y)) in net.params.tensors().into_iter().zip(back.params.tensors()) {
            ensure(bits(x) == bits(y), || {
                format!("{} {name} changed", net.kind)
            })?;
            params += x.len();
        }
        for (x, y) in [
            (&net.input_scaler.mean, &back.input_scaler.mean),
            (&net.input_scaler.std, &back.input_scaler.std),
            (&net.target_scaler.mean, &back.target_scaler.mean),
            (&net.target_scaler.std, &back.target_scaler.std),
        ] {
            ensure(bits(x) == bits(y), || {
                format!("{} scaler changed", net.kind)
            })?;
        }
        ensure(*net == back, || format!("{} metadata changed", net.kind))?;
    }

    let f32_net = NetworkBundle::<f32>::random(NetKind::Vel, 5, 0.08, &mut rng);
    let path = work.join("vel_f32.json");
    f32_net.save_checkpoint(&path).map_err(|e| e.to_string())?;
    let back = NetworkBundle::<f32>::load_checkpoint(&path).map_err(|e| e.to_string())?;
    ensure(back == f32_net, || "f32 checkpoint changed".into())?;
    Ok(format!(
        "{numbers} corpus values and {params} network parameters bit-exact"
    ))
}

// ---------------------------------------------------------------- 8

fn parse_trajectory(path: &Path) -> Result<(Vec<f64>, Vec<f64>), String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let (mut theta, mut omega) = (Vec::new(), Vec::new());
    for line in text.lines().skip(1).filter(|l| !l.starts_with('#')) {
        let cols: Vec<&str> = line.split(',').collect();
        theta.push(cols[1].parse::<f64>().map_err(|e| e.to_string())?);
        if !cols[2].is_empty() {
            omega.push(cols[2].parse::<f64>().map_err(|e| e.to_string())?);
        }
    }
    Ok((theta, omega))
}

fn criterion_8(trained: Option<&Trained>, corpus_dir: &Path, work: &Path) -> Check {
    let t = trained.ok_or("needs the networks trained for criterion 4")?;
    let t_max = t.corpus.t_max();
    let mut stopped = 0;
    for trial in &t.corpus.trials {
        let traj = generate_simulated(
            &t.frc,
            &t.vel,
            &t.stp,
            trial.theta[0],
            &trial.context,
            t_max,
        )
        .map_err(|e| format!("{}: {e}", trial.id))?;
        ensure(traj.check_integration(), || {
            format!("{}: integration identity broken", trial.id)
        })?;
        ensure(traj.theta.len() <= t_max + 1, || {
            format!("{}: {} angles", trial.id, traj.theta.len())
        })?;
        stopped += usize::from(traj.termination == Termination::StoppedByStp);
    }

    // Live generation against the fill oracle on held-in trials.
    let mut live_stopped = 0;
    for trial in t.corpus.trials.iter().step_by(9) {
        let mut oracle = FillOracle::from_context(&trial.context).map_err(|e| e.to_string())?;
        let traj = generate_live(
            &t.vel,
            &t.stp,
            &mut oracle,
            trial.theta[0],
            &trial.context,
            t_max,
        )
        .map_err(|e| format!("{}: {e}", trial.id))?;
        ensure(traj.check_integration(), || {
            format!("{}: live integration identity broken", trial.id)
        })?;
        ensure(
            traj.theta.iter().all(|a| (-5.0..=185.0).contains(a)),
            || format!("{}: angle out of range", trial.id),
        )?;
        ensure(traj.termination == Termination::StoppedByStp, || {
            format!("{}: live run {}", trial.id, traj.termination)
        })?;
        live_stopped += 1;
    }

    // A stop network that never fires exercises the step bound itself.
    let mut never = NetworkBundle::<f64>::zeros(NetKind::Stp, 16);
    never.params.head_b = Vector(vec![10.0, -10.0]);
    let first = &t.corpus.trials[0];
    for bound in [1, 2, t_max] {
        let traj = generate_simulated(
            &t.frc,
            &t.vel,
            &never,
            first.theta[0],
            &first.context,
            bound,
        )
        .map_err(|e| e.to_string())?;
        ensure(
            traj.termination == Termination::HitMaxSteps
                && traj.steps() == bound
                && traj.check_integration(),
            || {
                format!(
                    "bound {bound}: {} steps, {}",
                    traj.steps(),
                    traj.termination
                )
            },
        )?;
    }

    // The exported CSV reconstructs exactly.
    let models = work.join("full_models");
    fs::create_dir_all(&models).map_err(|e| e.to_string())?;
    for net in [&t.frc, &t.vel, &t.stp] {
        net.save_checkpoint(&models.join(format!("{}.json", net.kind)))
            .map_err(|e| e.to_string())?;
    }
    let mut rows = 0;
    for id in ["t0001", "t0090", "t0180"] {
        let out = work.join(format!("traj_{id}"));
        run_cli(&[
            "generate",
            "--models",
            p(&models),
            "--corpus",
            p(corpus_dir),
            "--trial",
            id,
            "--out",
            p(&out),
        ])?;
        let (theta, omega) = parse_trajectory(&out.join("trajectory.csv"))?;
        ensure(
            theta.len() == omega.len() + 1 && theta.len() <= t_max + 1,
            || format!("{id}: bad lengths"),
        )?;
        for (k, w) in omega.iter().enumerate() {
            ensure(theta[k] + w == theta[k + 1], || {
                format!("{id}: row {} breaks θ+ω", k + 1)
            })?;
        }
        rows += theta.len();
    }
    Ok(format!(
        "{} generated trajectories ({stopped} stopped by stp), {live_stopped} oracle-driven runs stop in range, bounds 1/2/{t_max} exact, {rows} CSV rows reconstruct",
        t.corpus.len()
    ))
}

// ----------------------------------------------------------------

fn report(id: usize, name: &str, result: Check) -> bool {
    match result {
        Ok(detail) => {
            println!("criterion {id} ({name}): PASS: {detail}");
            true
        }
        Err(detail) => {
            println!("criterion {id} ({name}): FAIL: {detail}");
            false
        }
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let work = tmp.path();
    let corpus_dir = work.join("corpus");
    let corpus_ready = run_cli(&["synth", "--seed", "7", "--out", p(&corpus_dir)]);

    let mut trained = None;
    let mut ok = true;
    ok &= report(1, "gradient correctness", criterion_1());
    ok &= report(2, "LSTM step oracle", criterion_2());
    ok &= report(3, "DTW brute force", criterion_3());
    ok &= report(4, "training analog", criterion_4(&mut trained));
    let with_corpus = |f: &dyn Fn() -> Check| corpus_ready.clone().and_then(|_| f());
    ok &= report(
        5,
        "generalization battery",
        with_corpus(&|| criterion_5(&corpus_dir, work)),
    );
    ok &= report(
        6,
        "determinism",
        with_corpus(&|| criterion_6(&corpus_dir, work)),
    );
    ok &= report(
        7,
        "round trips",
        with_corpus(&|| criterion_7(trained.as_ref(), &corpus_dir, work)),
    );
    ok &= report(
        8,
        "integration identity",
        with_corpus(&|| criterion_8(trained.as_ref(), &corpus_dir, work)),
    );
    if !ok {
        std::process::exit(1);
    }
}
