//! Demonstration trials, the per-frame feature vector and padding.

mod fill;
mod io;
mod split;
mod synth;

pub use fill::{Cylinder, FillOracle, LBF_PER_KG, WATER_KG_PER_MM3};
pub use io::{load_corpus, save_corpus, MANIFEST_FILE};
pub use split::{holdout_split, HoldoutCase, UnseenSet};
pub use synth::{synthesize_corpus, ContainerSpec, CupSpec, GeneratorSpec, MaterialSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of static context values per trial.
pub const STATIC_DIM: usize = 8;
/// Length of the full per-frame feature vector `[θ, f, z]`.
pub const FEATURE_DIM: usize = 2 + STATIC_DIM;

/// Per-trial constants: force readings in lbf, vessel sizes in mm, and the
/// material density relative to water.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticContext {
    pub f_init: f64,
    pub f_empty: f64,
    pub f_final: f64,
    pub d_cup: f64,
    pub h_cup: f64,
    pub d_ctn: f64,
    pub h_ctn: f64,
    pub rho: f64,
}

impl StaticContext {
    pub const FIELDS: [&'static str; STATIC_DIM] = [
        "f_init", "f_empty", "f_final", "d_cup", "h_cup", "d_ctn", "h_ctn", "rho",
    ];

    pub fn to_array(&self) -> [f64; STATIC_DIM] {
        [
            self.f_init,
            self.f_empty,
            self.f_final,
            self.d_cup,
            self.h_cup,
            self.d_ctn,
            self.h_ctn,
            self.rho,
        ]
    }

    pub fn from_slice(z: &[f64]) -> Result<Self> {
        if z.len() != STATIC_DIM {
            return Err(Error::dim("static context", STATIC_DIM, z.len()));
        }
        Ok(StaticContext {
            f_init: z[0],
            f_empty: z[1],
            f_final: z[2],
            d_cup: z[3],
            h_cup: z[4],
            d_ctn: z[5],
            h_ctn: z[6],
            rho: z[7],
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !self.to_array().iter().all(|v| v.is_finite()) {
            problems.push("non-finite static value".to_string());
        }
        if !(self.f_empty >= 0.0) {
            problems.push(format!("f_empty must be >= 0, got {}", self.f_empty));
        }
        if !(self.f_init >= self.f_empty) {
            problems.push(format!(
                "f_init ({}) < f_empty ({})",
                self.f_init, self.f_empty
            ));
        }
        for (name, v) in [
            ("d_cup", self.d_cup),
            ("h_cup", self.h_cup),
            ("d_ctn", self.d_ctn),
            ("h_ctn", self.h_ctn),
            ("rho", self.rho),
        ] {
            if !(v > 0.0) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    Imported,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Synthetic => "synthetic",
            Provenance::Imported => "imported",
        }
    }
}

/// Which cup, container and material a trial used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialLabels {
    pub cup: String,
    pub container: String,
    pub material: String,
}

/// One demonstration sampled at 60 Hz: rotation in degrees, sensed force in lbf.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub id: String,
    pub theta: Vec<f64>,
    pub force: Vec<f64>,
    pub context: StaticContext,
    pub labels: TrialLabels,
    pub provenance: Provenance,
}

impl TrialRecord {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != self.force.len() {
            return Err(Error::dim(
                "trial force length",
                self.theta.len(),
                self.force.len(),
            ));
        }
        if self.theta.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "trial {} has {} frames, need at least 2",
                self.id,
                self.theta.len()
            )));
        }
        if !self.theta.iter().chain(&self.force).all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("trial {}", self.id)));
        }
        if self.theta[0].abs() > 15.0 {
            return Err(Error::InvalidArgument(format!(
                "trial {} starts at {}°, expected a level cup (|θ_1| <= 15°)",
                self.id, self.theta[0]
            )));
        }
        if self.force.iter().any(|&f| f < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "trial {} has negative force",
                self.id
            )));
        }
        self.context.validate()
    }

    /// Feature vector at 1-based step `t`:
    /// `[θ_t, f_t, f_init, f_empty, f_final, d_cup, h_cup, d_ctn, h_ctn, ρ]`.
    pub fn features(&self, t: usize) -> Result<[f64; FEATURE_DIM]> {
        if t == 0 || t > self.len() {
            return Err(Error::InvalidArgument(format!(
                "step {t} outside 1..={} for trial {}",
                self.len(),
                self.id
            )));
        }
        Ok(assemble_frame(
            self.theta[t - 1],
            self.force[t - 1],
            &self.context,
        ))
    }
}

pub fn assemble_frame(theta: f64, force: f64, z: &StaticContext) -> [f64; FEATURE_DIM] {
    let mut a = [0.0; FEATURE_DIM];
    a[0] = theta;
    a[1] = force;
    a[2..].copy_from_slice(&z.to_array());
    a
}

/// A set of trials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub trials: Vec<TrialRecord>,
}

impl Corpus {
    pub fn new(trials: Vec<TrialRecord>) -> Self {
        Corpus { trials }
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Longest trial length; zero for an empty corpus.
    pub fn t_max(&self) -> usize {
        self.trials.iter().map(TrialRecord::len).max().unwrap_or(0)
    }

    pub fn get(&self, id: &str) -> Option<&TrialRecord> {
        self.trials.iter().find(|t| t.id == id)
    }
}

/// Euclidean norm of the three force components.
pub fn sensed_force(fx: f64, fy: f64, fz: f64) -> Result<f64> {
    if !(fx.is_finite() && fy.is_finite() && fz.is_finite()) {
        return Err(Error::NonFinite("force components".into()));
    }
    Ok((fx * fx + fy * fy + fz * fz).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    /// Append zeros.
    Zero,
    /// Repeat the final value.
    EndValue,
}

/// Extends `values` to `len`; the mask marks original entries.
pub fn pad_sequence<V: Clone>(
    values: &[V],
    len: usize,
    mode: PadMode,
    zero: V,
) -> (Vec<V>, Vec<bool>) {
    let mut out = values.to_vec();
    let mut mask = vec![true; values.len()];
    if let Some(last) = values.last() {
        let fill = match mode {
            PadMode::Zero => zero,
            PadMode::EndValue => last.clone(),
        };
        while out.len() < len {
            out.push(fill.clone());
            mask.push(false);
        }
    }
    (out, mask)
}

/// Drops padded entries again.
pub fn unpad<V: Clone>(padded: &[V], mask: &[bool]) -> Vec<V> {
    padded
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| v.clone())
        .collect()
}

/// Feature frames of one trial padded to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedTrial {
    pub frames: Vec<[f64; FEATURE_DIM]>,
    pub mask: Vec<bool>,
    pub length: usize,
}

/// Pads every trial of the corpus to `T_max` with the given rule.
pub fn pad_corpus(corpus: &Corpus, mode: PadMode) -> Result<Vec<PaddedTrial>> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let t_max = corpus.t_max();
    corpus
        .trials
        .iter()
        .map(|trial| {
            let frames: Vec<[f64; FEATURE_DIM]> = (1..=trial.len())
                .map(|t| trial.features(t))
                .collect::<Result<_>>()?;
            let (frames, mask) = pad_sequence(&frames, t_max, mode, [0.0; FEATURE_DIM]);
            Ok(PaddedTrial {
                frames,
                mask,
                length: trial.len(),
            })
        })
        .collect()
}
