//! On-disk corpus layout.
//!
//! ```text
//! <dir>/manifest.csv      trial_id,cup_id,container_id,material_id,f_init,...,rho,length,data_file,provenance
//! <dir>/summary.json      {"trials": n, "t_max": m}
//! <dir>/trials/<id>.csv   t,theta_deg,force_lbf
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! value-exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Corpus, Provenance, StaticContext, TrialLabels, TrialRecord};

pub const MANIFEST_FILE: &str = "manifest.csv";
const SUMMARY_FILE: &str = "summary.json";
const TRIAL_DIR: &str = "trials";

const MANIFEST_HEADER: [&str; 15] = [
    "trial_id",
    "cup_id",
    "container_id",
    "material_id",
    "f_init",
    "f_empty",
    "f_final",
    "d_cup",
    "h_cup",
    "d_ctn",
    "h_ctn",
    "rho",
    "length",
    "data_file",
    "provenance",
];
const TRIAL_HEADER: [&str; 3] = ["t", "theta_deg", "force_lbf"];

#[derive(Debug, Serialize, Deserialize)]
struct Summary {
    trials: usize,
    t_max: usize,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::malformed(path, e.to_string())
}

pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let trial_dir = dir.join(TRIAL_DIR);
    fs::create_dir_all(&trial_dir).map_err(|e| Error::io(&trial_dir, e))?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest =
        csv::Writer::from_path(&manifest_path).map_err(|e| csv_err(&manifest_path, e))?;
    manifest
        .write_record(MANIFEST_HEADER)
        .map_err(|e| csv_err(&manifest_path, e))?;
    for trial in &corpus.trials {
        trial.validate()?;
        let data_file = format!("{TRIAL_DIR}/{}.csv", trial.id);
        let mut row = vec![
            trial.id.clone(),
            trial.labels.cup.clone(),
            trial.labels.container.clone(),
            trial.labels.material.clone(),
        ];
        row.extend(trial.context.to_array().iter().map(|v| v.to_string()));
        row.push(trial.len().to_string());
        row.push(data_file.clone());
        row.push(trial.provenance.as_str().to_string());
        manifest
            .write_record(&row)
            .map_err(|e| csv_err(&manifest_path, e))?;

        let path = dir.join(&data_file);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(TRIAL_HEADER)
            .map_err(|e| csv_err(&path, e))?;
        for (k, (theta, force)) in trial.theta.iter().zip(&trial.force).enumerate() {
            w.write_record([(k + 1).to_string(), theta.to_string(), force.to_string()])
                .map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    manifest.flush().map_err(|e| Error::io(&manifest_path, e))?;

    let summary = Summary {
        trials: corpus.len(),
        t_max: corpus.t_max(),
    };
    let summary_path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, text + "\n").map_err(|e| Error::io(&summary_path, e))?;
    Ok(())
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, name: &str, path: &Path) -> Result<&'a str> {
    rec.get(idx).ok_or_else(|| {
        let line = rec.position().map_or(0, |p| p.line());
        Error::malformed(path, format!("line {line}: missing field '{name}'"))
    })
}

fn parse_num<V: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    path: &Path,
) -> Result<V> {
    let raw = field(rec, idx, name, path)?;
    raw.trim().parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        Error::malformed(
            path,
            format!("line {line}, field '{name}': cannot parse '{raw}'"),
        )
    })
}

fn check_header(rec: &csv::StringRecord, expected: &[&str], path: &Path) -> Result<()> {
    let got: Vec<&str> = rec.iter().collect();
    if got != expected {
        return Err(Error::malformed(
            path,
            format!("line 1: expected header {:?}, found {:?}", expected, got),
        ));
    }
    Ok(())
}

fn load_trial_data(path: &Path, length: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(&header, &TRIAL_HEADER, path)?;
    let mut theta = Vec::with_capacity(length);
    let mut force = Vec::with_capacity(length);
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let t: usize = parse_num(&rec, 0, "t", path)?;
        if t != theta.len() + 1 {
            let line = rec.position().map_or(0, |p| p.line());
            return Err(Error::malformed(
                path,
                format!(
                    "line {line}, field 't': expected step {}, found {t}",
                    theta.len() + 1
                ),
            ));
        }
        theta.push(parse_num(&rec, 1, "theta_deg", path)?);
        force.push(parse_num(&rec, 2, "force_lbf", path)?);
    }
    if theta.len() != length {
        return Err(Error::malformed(
            path,
            format!(
                "manifest declares {length} frames, file has {}",
                theta.len()
            ),
        ));
    }
    Ok((theta, force))
}

pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(Error::Empty("corpus (no manifest.csv)"));
    }
    let mut reader =
        csv::Reader::from_path(&manifest_path).map_err(|e| csv_err(&manifest_path, e))?;
    let header = reader
        .headers()
        .map_err(|e| csv_err(&manifest_path, e))?
        .clone();
    check_header(&header, &MANIFEST_HEADER, &manifest_path)?;

    let mut trials = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(&manifest_path, e))?;
        let p = &manifest_path;
        let id = field(&rec, 0, "trial_id", p)?.to_string();
        let labels = TrialLabels {
            cup: field(&rec, 1, "cup_id", p)?.to_string(),
            container: field(&rec, 2, "container_id", p)?.to_string(),
            material: field(&rec, 3, "material_id", p)?.to_string(),
        };
        let mut z = [0.0; 8];
        for (k, v) in z.iter_mut().enumerate() {
            *v = parse_num(&rec, 4 + k, StaticContext::FIELDS[k], p)?;
        }
        let context = StaticContext::from_slice(&z)?;
        let length: usize = parse_num(&rec, 12, "length", p)?;
        let data_file = PathBuf::from(field(&rec, 13, "data_file", p)?);
        let provenance = match field(&rec, 14, "provenance", p)? {
            "synthetic" => Provenance::Synthetic,
            "imported" => Provenance::Imported,
            other => {
                let line = rec.position().map_or(0, |p| p.line());
                return Err(Error::malformed(
                    p,
                    format!("line {line}, field 'provenance': unknown value '{other}'"),
                ));
            }
        };
        let (theta, force) = load_trial_data(&dir.join(&data_file), length)?;
        let trial = TrialRecord {
            id,
            theta,
            force,
            context,
            labels,
            provenance,
        };
        trial.validate()?;
        trials.push(trial);
    }
    if trials.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let corpus = Corpus::new(trials);

    let summary_path = dir.join(SUMMARY_FILE);
    if summary_path.exists() {
        let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
        let summary: Summary = serde_json::from_str(&text)
            .map_err(|e| Error::malformed(&summary_path, e.to_string()))?;
        if summary.trials != corpus.len() || summary.t_max != corpus.t_max() {
            return Err(Error::malformed(
                &summary_path,
                format!(
                    "summary says {} trials / T_max {}, data has {} / {}",
                    summary.trials,
                    summary.t_max,
                    corpus.len(),
                    corpus.t_max()
                ),
            ));
        }
    }
    Ok(corpus)
}
