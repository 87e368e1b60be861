//! Synthetic demonstrations standing in for recorded human pours.
//!
//! Each trial tilts a cylindrical cup with a minimum-jerk ramp up to the
//! angle that leaves the desired amount inside, holds while the material
//! drains, and returns part of the way. Force comes from [`FillOracle`].

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::fill::{Cylinder, FillOracle};
use super::{Corpus, Provenance, StaticContext, TrialLabels, TrialRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CupSpec {
    pub id: String,
    pub diameter_mm: f64,
    pub height_mm: f64,
    pub mass_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerSpec {
    pub id: String,
    pub diameter_mm: f64,
    pub height_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub id: String,
    /// Bulk density relative to water.
    pub density_ratio: f64,
}

/// Generator configuration, usually read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub sample_rate_hz: f64,
    /// Trials generated for every cup × container × material combination.
    pub trials_per_combo: usize,
    /// Fill level range as a fraction of cup volume.
    pub fill_fraction: [f64; 2],
    /// Fraction of the fill the demonstrator aims to pour out.
    pub pour_fraction: [f64; 2],
    /// Largest share of the container volume a single pour may use.
    pub container_headroom: f64,
    pub start_angle_deg: [f64; 2],
    /// Marginal standard deviation of the tracker jitter.
    pub angle_jitter_deg: f64,
    /// Lag-one correlation of the tracker jitter.
    pub angle_jitter_corr: f64,
    pub force_jitter_lbf: f64,
    /// Relative random spread applied to segment durations.
    pub timing_spread: f64,
    pub cups: Vec<CupSpec>,
    pub containers: Vec<ContainerSpec>,
    pub materials: Vec<MaterialSpec>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        let cups = [
            (62.0, 85.0, 0.16),
            (68.0, 95.0, 0.20),
            (72.0, 105.0, 0.24),
            (78.0, 90.0, 0.22),
            (84.0, 110.0, 0.30),
            (75.0, 100.0, 0.26),
        ];
        let containers = [
            (60.0, 60.0),
            (70.0, 80.0),
            (80.0, 70.0),
            (90.0, 100.0),
            (100.0, 80.0),
            (110.0, 120.0),
            (120.0, 90.0),
            (130.0, 140.0),
            (140.0, 110.0),
            (95.0, 75.0),
        ];
        GeneratorSpec {
            sample_rate_hz: 60.0,
            trials_per_combo: 1,
            fill_fraction: [0.4, 0.9],
            pour_fraction: [0.5, 0.95],
            container_headroom: 0.8,
            start_angle_deg: [0.0, 4.0],
            angle_jitter_deg: 0.25,
            angle_jitter_corr: 0.95,
            force_jitter_lbf: 0.01,
            timing_spread: 0.04,
            cups: cups
                .iter()
                .enumerate()
                .map(|(i, &(d, h, m))| CupSpec {
                    id: format!("cup{}", i + 1),
                    diameter_mm: d,
                    height_mm: h,
                    mass_kg: m,
                })
                .collect(),
            containers: containers
                .iter()
                .enumerate()
                .map(|(i, &(d, h))| ContainerSpec {
                    id: format!("ctn{}", i + 1),
                    diameter_mm: d,
                    height_mm: h,
                })
                .collect(),
            materials: vec![
                MaterialSpec {
                    id: "water".into(),
                    density_ratio: 1.0,
                },
                MaterialSpec {
                    id: "beans".into(),
                    density_ratio: 0.85,
                },
                MaterialSpec {
                    id: "ice".into(),
                    density_ratio: 0.55,
                },
            ],
        }
    }
}

impl GeneratorSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: GeneratorSpec =
            toml::from_str(text).map_err(|e| Error::InvalidSpec(vec![e.to_string()]))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("generator spec serializes")
    }

    pub fn trial_count(&self) -> usize {
        self.cups.len() * self.containers.len() * self.materials.len() * self.trials_per_combo
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.sample_rate_hz > 0.0) {
            errs.push(format!(
                "sample_rate_hz must be positive, got {}",
                self.sample_rate_hz
            ));
        }
        if self.trials_per_combo == 0 {
            errs.push("trials_per_combo must be at least 1".into());
        }
        for (what, list_empty) in [
            ("cups", self.cups.is_empty()),
            ("containers", self.containers.is_empty()),
            ("materials", self.materials.is_empty()),
        ] {
            if list_empty {
                errs.push(format!("{what} list is empty"));
            }
        }
        let [lo, hi] = self.fill_fraction;
        if !(lo > 0.0 && lo <= hi) {
            errs.push(format!("fill_fraction range [{lo}, {hi}] is invalid"));
        }
        if hi > 1.0 {
            errs.push(format!(
                "fill_fraction upper bound {hi} fills above the brim"
            ));
        }
        let [plo, phi] = self.pour_fraction;
        if !(plo > 0.0 && plo <= phi && phi < 1.0) {
            errs.push(format!(
                "pour_fraction range [{plo}, {phi}] must lie inside (0, 1)"
            ));
        }
        if !(self.container_headroom > 0.0 && self.container_headroom <= 1.0) {
            errs.push(format!(
                "container_headroom {} must lie in (0, 1]",
                self.container_headroom
            ));
        }
        let [slo, shi] = self.start_angle_deg;
        if !(slo <= shi && slo.abs() <= 15.0 && shi.abs() <= 15.0) {
            errs.push(format!(
                "start_angle_deg [{slo}, {shi}] must be an ordered range within ±15°"
            ));
        }
        if !(self.angle_jitter_deg >= 0.0 && self.force_jitter_lbf >= 0.0) {
            errs.push("jitter levels must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.angle_jitter_corr) {
            errs.push(format!(
                "angle_jitter_corr {} must lie in [0, 1)",
                self.angle_jitter_corr
            ));
        }
        if !(0.0..0.5).contains(&self.timing_spread) {
            errs.push(format!(
                "timing_spread {} must lie in [0, 0.5)",
                self.timing_spread
            ));
        }
        let mut ids = std::collections::BTreeSet::new();
        for c in &self.cups {
            if !(c.diameter_mm > 0.0 && c.height_mm > 0.0 && c.mass_kg > 0.0) {
                errs.push(format!(
                    "cup {} needs positive diameter, height and mass",
                    c.id
                ));
            }
            if !ids.insert(format!("cup:{}", c.id)) {
                errs.push(format!("duplicate cup id {}", c.id));
            }
        }
        for c in &self.containers {
            if !(c.diameter_mm > 0.0 && c.height_mm > 0.0) {
                errs.push(format!(
                    "container {} needs positive diameter and height",
                    c.id
                ));
            }
            if !ids.insert(format!("ctn:{}", c.id)) {
                errs.push(format!("duplicate container id {}", c.id));
            }
        }
        for m in &self.materials {
            if !(m.density_ratio > 0.0) {
                errs.push(format!("material {} needs a positive density ratio", m.id));
            }
            if !ids.insert(format!("mat:{}", m.id)) {
                errs.push(format!("duplicate material id {}", m.id));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(errs))
        }
    }
}

/// Minimum-jerk blend on `s ∈ [0, 1]`.
fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

struct Segment {
    from: f64,
    to: f64,
    start: f64,
    duration: f64,
}

fn profile(segments: &[Segment], time: f64) -> f64 {
    let mut value = segments[0].from;
    for seg in segments {
        if time >= seg.start {
            value = seg.from + (seg.to - seg.from) * min_jerk((time - seg.start) / seg.duration);
        }
    }
    value
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn synthesize_trial(
    spec: &GeneratorSpec,
    cup: &CupSpec,
    ctn: &ContainerSpec,
    mat: &MaterialSpec,
    id: String,
    rng: &mut ChaCha8Rng,
) -> Result<TrialRecord> {
    let cyl = Cylinder::new(cup.diameter_mm, cup.height_mm)?;
    let fill = uniform(rng, spec.fill_fraction) * cyl.volume();
    let mut oracle = FillOracle::new(cyl, cup.mass_kg, fill, mat.density_ratio)?;

    let ctn_volume = Cylinder::new(ctn.diameter_mm, ctn.height_mm)?.volume();
    let wanted = uniform(rng, spec.pour_fraction);
    let pour = wanted.min(spec.container_headroom * ctn_volume / fill);
    let peak = cyl.tilt_for_capacity(fill * (1.0 - pour));
    let start = uniform(rng, spec.start_angle_deg);
    let end = 0.2 * peak + rng.random_range(-1.0..1.0);

    let mut spread = |base: f64| base * (1.0 + spec.timing_spread * rng.random_range(-1.0..1.0));
    // Heavier material and narrow targets are poured more carefully.
    let ramp = spread(0.45 + 0.35 * peak / 90.0 + 0.1 * mat.density_ratio + 6.0 / ctn.diameter_mm);
    let hold = spread(0.12 + 0.35 * pour);
    let back = spread(0.4 + 0.15 * (peak - end) / 90.0);
    let segments = [
        Segment {
            from: start,
            to: peak,
            start: 0.0,
            duration: ramp,
        },
        Segment {
            from: peak,
            to: end,
            start: ramp + hold,
            duration: back,
        },
    ];
    let total = ramp + hold + back;
    let frames = (total * spec.sample_rate_hz).round() as usize + 1;

    let sigma = spec.angle_jitter_deg;
    let corr = spec.angle_jitter_corr;
    let innovation = Normal::new(0.0, sigma * (1.0 - corr * corr).sqrt()).expect("finite sigma");
    let force_noise = Normal::new(0.0, spec.force_jitter_lbf).expect("finite sigma");
    let mut jitter = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);

    let mut theta = Vec::with_capacity(frames);
    let mut force = Vec::with_capacity(frames);
    for k in 0..frames {
        let t = k as f64 / spec.sample_rate_hz;
        if k > 0 {
            jitter = corr * jitter + innovation.sample(rng);
        }
        let angle = profile(&segments, t) + jitter;
        let f = oracle.observe(angle) + force_noise.sample(rng);
        theta.push(angle);
        force.push(f.max(oracle.f_empty()));
    }

    let context = StaticContext {
        f_init: force[0],
        f_empty: oracle.f_empty(),
        f_final: force[frames - 1],
        d_cup: cup.diameter_mm,
        h_cup: cup.height_mm,
        d_ctn: ctn.diameter_mm,
        h_ctn: ctn.height_mm,
        rho: mat.density_ratio,
    };
    Ok(TrialRecord {
        id,
        theta,
        force,
        context,
        labels: TrialLabels {
            cup: cup.id.clone(),
            container: ctn.id.clone(),
            material: mat.id.clone(),
        },
        provenance: Provenance::Synthetic,
    })
}

/// Generates one trial per combination and repetition, in a fixed order from
/// a single seeded stream.
pub fn synthesize_corpus(spec: &GeneratorSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(spec.trial_count());
    for cup in &spec.cups {
        for ctn in &spec.containers {
            for mat in &spec.materials {
                for _ in 0..spec.trials_per_combo {
                    let id = format!("t{:04}", trials.len() + 1);
                    trials.push(synthesize_trial(spec, cup, ctn, mat, id, &mut rng)?);
                }
            }
        }
    }
    Ok(Corpus::new(trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> GeneratorSpec {
        let mut spec = GeneratorSpec::default();
        spec.cups.truncate(2);
        spec.containers.truncate(3);
        spec
    }

    #[test]
    fn default_inventory_shape() {
        let spec = GeneratorSpec::default();
        assert_eq!(spec.cups.len(), 6);
        assert_eq!(spec.containers.len(), 10);
        assert_eq!(spec.materials.len(), 3);
        assert_eq!(spec.trial_count(), 180);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = small_spec();
        let a = synthesize_corpus(&spec, 7).unwrap();
        let b = synthesize_corpus(&spec, 7).unwrap();
        let c = synthesize_corpus(&spec, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn trials_are_consistent() {
        let corpus = synthesize_corpus(&small_spec(), 3).unwrap();
        assert_eq!(corpus.len(), 18);
        for trial in &corpus.trials {
            trial.validate().unwrap();
            let z = &trial.context;
            assert_eq!(trial.force[0], z.f_init);
            assert_eq!(*trial.force.last().unwrap(), z.f_final);
            for &f in &trial.force {
                assert!(
                    f >= z.f_empty && f <= z.f_init + 0.1,
                    "{f} outside [{}, {}]",
                    z.f_empty,
                    z.f_init
                );
            }
            assert!(z.f_final < z.f_init);
            let peak = trial.theta.iter().cloned().fold(f64::MIN, f64::max);
            assert!(peak > 20.0 && peak < 92.0, "peak {peak}");
        }
    }

    #[test]
    fn overfill_and_empty_specs_rejected() {
        let spec = GeneratorSpec {
            fill_fraction: [0.5, 1.2],
            trials_per_combo: 0,
            materials: Vec::new(),
            ..GeneratorSpec::default()
        };
        match spec.validate() {
            Err(Error::InvalidSpec(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
            other => panic!("expected spec errors, got {other:?}"),
        }
    }

    #[test]
    fn toml_round_trip() {
        let spec = GeneratorSpec::default();
        let text = spec.to_toml_string();
        assert_eq!(GeneratorSpec::from_toml_str(&text).unwrap(), spec);
        let partial = GeneratorSpec::from_toml_str("trials_per_combo = 2\n").unwrap();
        assert_eq!(partial.trial_count(), 360);
        assert!(GeneratorSpec::from_toml_str("bogus = 1\n").is_err());
    }
}
