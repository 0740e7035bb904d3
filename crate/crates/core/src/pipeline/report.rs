use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    fit, require_labels, GridReport, PipelineConfig, PipelineError, PipelineModel, Result,
};
use crate::corpus::RawDocument;

/// One document placed on the first two latent axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub id: String,
    pub axis1: f64,
    pub axis2: f64,
    pub label: String,
    pub split: String,
    pub correct: bool,
}

pub struct Holdout {
    pub model: PipelineModel,
    pub points: Vec<ScatterPoint>,
    pub test_accuracy: f64,
}

/// Fits on a seeded, per-class `train_fraction` of the corpus and places
/// every document in the fitted latent space.
pub fn holdout_scatter(
    docs: &[RawDocument],
    config: &PipelineConfig,
    train_fraction: f64,
) -> Result<Holdout> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PipelineError::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let labels = require_labels(docs)?;
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut is_train = vec![false; docs.len()];
    for idx in members.values_mut() {
        idx.shuffle(&mut rng);
        let n = ((idx.len() as f64 * train_fraction).round() as usize).clamp(1, idx.len());
        for &i in &idx[..n] {
            is_train[i] = true;
        }
    }
    let train: Vec<RawDocument> = docs
        .iter()
        .zip(&is_train)
        .filter(|(_, &t)| t)
        .map(|(d, _)| d.clone())
        .collect();
    let model = fit(&train, config)?;

    let mut tested = 0;
    let mut hits = 0;
    let points = docs
        .iter()
        .zip(&labels)
        .zip(&is_train)
        .map(|((d, label), &t)| {
            let z = model.latent(d);
            let correct = model.classifier.predict(&z).expect("dimension").label == *label;
            if !t {
                tested += 1;
                hits += usize::from(correct);
            }
            ScatterPoint {
                id: d.id.clone(),
                axis1: z.first().copied().unwrap_or(0.0),
                axis2: z.get(1).copied().unwrap_or(0.0),
                label: label.clone(),
                split: if t { "train" } else { "test" }.to_string(),
                correct,
            }
        })
        .collect();
    Ok(Holdout {
        model,
        points,
        test_accuracy: if tested == 0 {
            f64::NAN
        } else {
            hits as f64 / tested as f64
        },
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `grid.csv`, `sv_vs_accuracy.csv`, `singular_values.csv` and
/// `latent_scatter.csv` into `out_dir`.
pub fn emit_reports(
    grid: &GridReport,
    singular_values: &[f64],
    scatter: &[ScatterPoint],
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    let open = |name: &str| -> Result<csv::Writer<fs::File>> {
        let path = out_dir.join(name);
        let file = fs::File::create(&path).map_err(|e| PipelineError::io(&path, e))?;
        Ok(csv::Writer::from_writer(file))
    };

    let mut w = open("grid.csv")?;
    w.write_record([
        "gamma",
        "nu",
        "status",
        "mean_accuracy",
        "std_accuracy",
        "mean_support_vectors",
    ])?;
    for r in &grid.rows {
        w.write_record([
            r.gamma.to_string(),
            r.nu.to_string(),
            r.status.as_str().to_string(),
            opt(r.mean_accuracy),
            opt(r.std_accuracy),
            opt(r.mean_support_vectors),
        ])?;
    }
    w.flush().map_err(|e| PipelineError::io(out_dir, e))?;

    let mut w = open("sv_vs_accuracy.csv")?;
    w.write_record(["gamma", "nu", "mean_support_vectors", "mean_accuracy"])?;
    for r in &grid.rows {
        if let (Some(sv), Some(acc)) = (r.mean_support_vectors, r.mean_accuracy) {
            w.write_record([
                r.gamma.to_string(),
                r.nu.to_string(),
                sv.to_string(),
                acc.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| PipelineError::io(out_dir, e))?;

    let mut w = open("singular_values.csv")?;
    w.write_record(["index", "value"])?;
    for (i, d) in crate::lsi::singular_value_report(singular_values) {
        w.write_record([i.to_string(), d.to_string()])?;
    }
    w.flush().map_err(|e| PipelineError::io(out_dir, e))?;

    let mut w = open("latent_scatter.csv")?;
    w.write_record(["id", "axis1", "axis2", "label", "split", "correct"])?;
    for p in scatter {
        w.write_record([
            p.id.clone(),
            p.axis1.to_string(),
            p.axis2.to_string(),
            p.label.clone(),
            p.split.clone(),
            p.correct.to_string(),
        ])?;
    }
    w.flush().map_err(|e| PipelineError::io(out_dir, e))?;
    Ok(())
}
