use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{holdout_split, Corpus, HoldoutCase, UnseenSet};
use crate::error::{Error, Result};
use crate::generate::{generate_simulated, Termination};
use crate::network::{NetKind, NetworkBundle};
use crate::optim::{train, TrainConfig};

use super::hist::{HistogramPair, DEFAULT_BINS, DEFAULT_THRESHOLD};

/// Test sets smaller than this are flagged in the report.
pub const LOW_M: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub frc: TrainConfig,
    pub vel: TrainConfig,
    pub stp: TrainConfig,
    pub seed: u64,
    pub bins: usize,
    pub threshold: f64,
    pub unseen: UnseenSet,
}

impl Default for CaseConfig {
    fn default() -> Self {
        CaseConfig {
            frc: TrainConfig::for_kind(NetKind::Frc),
            vel: TrainConfig::for_kind(NetKind::Vel),
            stp: TrainConfig::for_kind(NetKind::Stp),
            seed: 0,
            bins: DEFAULT_BINS,
            threshold: DEFAULT_THRESHOLD,
            unseen: UnseenSet::default(),
        }
    }
}

impl CaseConfig {
    /// Same epoch count for every network.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.frc.epochs = epochs;
        self.vel.epochs = epochs;
        self.stp.epochs = epochs;
        self
    }

    fn train_config(&self, kind: NetKind, case: HoldoutCase) -> TrainConfig {
        let mut cfg = match kind {
            NetKind::Frc => self.frc.clone(),
            NetKind::Vel => self.vel.clone(),
            NetKind::Stp => self.stp.clone(),
        };
        let k = match kind {
            NetKind::Frc => 0,
            NetKind::Vel => 1,
            NetKind::Stp => 2,
        };
        cfg.seed = self
            .seed
            .wrapping_mul(1000)
            .wrapping_add(10 * u64::from(case.id()) + k);
        cfg
    }
}

/// The three trained networks of one case.
#[derive(Debug, Clone)]
pub struct TrainedNets {
    pub frc: NetworkBundle<f64>,
    pub vel: NetworkBundle<f64>,
    pub stp: NetworkBundle<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: HoldoutCase,
    pub description: String,
    pub unseen_cups: Vec<String>,
    pub unseen_containers: Vec<String>,
    pub unseen_materials: Vec<String>,
    pub train_size: usize,
    pub test_size: usize,
    pub low_m: bool,
    pub t_max: usize,
    pub threshold: f64,
    pub bins: usize,
    pub similarity: Option<f64>,
    pub passed: Option<bool>,
    pub stopped_by_stp: usize,
    pub hit_max_steps: usize,
    pub final_losses: Option<[f64; 3]>,
    pub histograms: Option<HistogramPair>,
    pub error: Option<String>,
}

impl CaseReport {
    fn skeleton(case: HoldoutCase, cfg: &CaseConfig) -> Self {
        let (cup, ctn, mat) = case.designated();
        let list = |on: bool, set: &std::collections::BTreeSet<String>| {
            if on {
                set.iter().cloned().collect()
            } else {
                Vec::new()
            }
        };
        CaseReport {
            case,
            description: case.description().to_string(),
            unseen_cups: list(cup, &cfg.unseen.cups),
            unseen_containers: list(ctn, &cfg.unseen.containers),
            unseen_materials: list(mat, &cfg.unseen.materials),
            train_size: 0,
            test_size: 0,
            low_m: false,
            t_max: 0,
            threshold: cfg.threshold,
            bins: cfg.bins,
            similarity: None,
            passed: None,
            stopped_by_stp: 0,
            hit_max_steps: 0,
            final_losses: None,
            histograms: None,
            error: None,
        }
    }

    /// A report for a case that could not run.
    pub fn failed(case: HoldoutCase, cfg: &CaseConfig, err: &Error) -> Self {
        let mut r = Self::skeleton(case, cfg);
        r.error = Some(err.to_string());
        r
    }

    pub fn summary_line(&self) -> String {
        match (&self.error, self.similarity) {
            (Some(e), _) => format!("case {}: error: {e}", self.case.id()),
            (None, Some(s)) => format!(
                "case {} ({}): m={}{} similarity={:.4} {}",
                self.case.id(),
                self.description,
                self.test_size,
                if self.low_m { " (low m)" } else { "" },
                s,
                if self.passed == Some(true) {
                    "PASS"
                } else {
                    "FAIL"
                }
            ),
            (None, None) => format!("case {}: no score", self.case.id()),
        }
    }
}

/// Trains frc/vel/stp on `train`.
pub fn train_case_nets(
    train_set: &Corpus,
    case: HoldoutCase,
    cfg: &CaseConfig,
) -> Result<TrainedNets> {
    let run = |kind| {
        train::<f64>(
            kind,
            &train_set.trials,
            &cfg.train_config(kind, case),
            |_| {},
        )
        .map(|o| o.bundle)
    };
    Ok(TrainedNets {
        frc: run(NetKind::Frc)?,
        vel: run(NetKind::Vel)?,
        stp: run(NetKind::Stp)?,
    })
}

/// Outcome of one case: the report plus the generated angle sequences.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub report: CaseReport,
    pub generated: Vec<Vec<f64>>,
}

/// Trains on the case's train split, generates one trajectory per test
/// trial from its `(θ_1, z)`, and scores the histogram pair.
pub fn run_case(corpus: &Corpus, case: HoldoutCase, cfg: &CaseConfig) -> Result<CaseRun> {
    let (train_set, test_set) = holdout_split(corpus, case, &cfg.unseen)?;
    if test_set.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{case}: {} test trial(s), at least 2 needed",
            test_set.len()
        )));
    }
    let nets = train_case_nets(&train_set, case, cfg)?;
    run_case_with(&train_set, &test_set, case, cfg, &nets)
}

/// Scores a case with already trained networks.
pub fn run_case_with(
    train_set: &Corpus,
    test_set: &Corpus,
    case: HoldoutCase,
    cfg: &CaseConfig,
    nets: &TrainedNets,
) -> Result<CaseRun> {
    let mut report = CaseReport::skeleton(case, cfg);
    report.train_size = train_set.len();
    report.test_size = test_set.len();
    report.low_m = test_set.len() < LOW_M;
    report.t_max = train_set.t_max();
    report.final_losses = Some(
        [&nets.frc, &nets.vel, &nets.stp]
            .map(|n| n.meta.as_ref().map_or(f64::NAN, |m| m.final_loss)),
    );

    let mut generated = Vec::with_capacity(test_set.len());
    for trial in &test_set.trials {
        let traj = generate_simulated(
            &nets.frc,
            &nets.vel,
            &nets.stp,
            trial.theta[0],
            &trial.context,
            report.t_max,
        )?
        .into_result()?;
        match traj.termination {
            Termination::StoppedByStp => report.stopped_by_stp += 1,
            Termination::HitMaxSteps => report.hit_max_steps += 1,
            Termination::ForceFailure { .. } => {}
        }
        generated.push(traj.theta);
    }
    let tests: Vec<Vec<f64>> = test_set.trials.iter().map(|t| t.theta.clone()).collect();
    let pair = HistogramPair::build(&generated, &tests, cfg.bins)?;
    let score = pair.similarity()?;
    report.similarity = Some(score);
    report.passed = Some(score >= cfg.threshold);
    report.histograms = Some(pair);
    Ok(CaseRun { report, generated })
}

/// Writes `report.json`, `h1.csv`, `h2.csv` and `overlay.svg` into `dir`.
pub fn write_case_artifacts(report: &CaseReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write(
        "report.json",
        serde_json::to_string_pretty(report).expect("report serializes") + "\n",
    )?;
    if let Some(pair) = &report.histograms {
        write("h1.csv", pair.h1.to_csv())?;
        write("h2.csv", pair.h2.to_csv())?;
        write(
            "overlay.svg",
            overlay_svg(
                pair,
                &format!("case {}: unseen {}", report.case.id(), report.description),
            ),
        )?;
    }
    Ok(())
}

/// Bar overlay of h1 (blue) and h2 (orange).
pub fn overlay_svg(pair: &HistogramPair, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let bins = pair.h1.bins().max(1);
    let peak = pair
        .h1
        .density
        .iter()
        .chain(&pair.h2.density)
        .copied()
        .fold(0.0, f64::max)
        .max(1e-12);
    let bw = (W - 2.0 * PAD) / bins as f64;
    let y = |d: f64| H - PAD - d / peak * (H - 2.0 * PAD);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        xml_escape(title)
    );
    for (hist, color) in [(&pair.h1, "#1f77b4"), (&pair.h2, "#ff7f0e")] {
        for (k, &d) in hist.density.iter().enumerate() {
            if d > 0.0 {
                let top = y(d);
                s.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\" fill-opacity=\"0.5\"/>\n",
                    PAD + k as f64 * bw,
                    top,
                    bw,
                    H - PAD - top
                ));
            }
        }
    }
    let right = pair.h1.edges.last().copied().unwrap_or(1.0);
    s.push_str(&format!(
        "<line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{PAD}\" y=\"{lb}\" font-family=\"sans-serif\" font-size=\"11\">0</text>\n\
         <text x=\"{r}\" y=\"{lb}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{right:.3}</text>\n\
         <text x=\"{cx}\" y=\"{lb}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">normalized DTW distance</text>\n\
         <text x=\"{lx}\" y=\"40\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f77b4\">h1 demo vs demo</text>\n\
         <text x=\"{lx}\" y=\"56\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#ff7f0e\">h2 generated vs demo</text>\n\
         </svg>\n",
        b = H - PAD,
        r = W - PAD,
        lb = H - PAD + 18.0,
        cx = W / 2.0,
        lx = W - PAD - 150.0,
    ));
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
