use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_metrics, match_detections, MatchConfig, MatchResult, Metrics};
use crate::detection::DetectionSet;
use crate::error::{Error, Result};
use crate::scenegen::{read_manifest, AnnotationSet, MANIFEST_FILE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image: String,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// False when no prediction file existed for this image.
    pub predicted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    pub per_image: Vec<ImageReport>,
}

impl EvalReport {
    pub fn metrics(&self) -> Metrics {
        Metrics::from_counts(self.tp, self.fp, self.r#fn)
    }
}

fn stem(path: &Path) -> Option<String> {
    path.file_stem().map(|s| s.to_string_lossy().into_owned())
}

/// Annotation files keyed by stem: the manifest entries when `gt_dir` holds
/// a dataset, otherwise every `.json` file directly inside it.
fn ground_truth_files(gt_dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    if gt_dir.join(MANIFEST_FILE).is_file() {
        for e in read_manifest(gt_dir)?.entries {
            let p = gt_dir.join(&e.annotation_path);
            if let Some(s) = stem(&p) {
                out.insert(s, p);
            }
        }
        return Ok(out);
    }
    let entries = fs::read_dir(gt_dir).map_err(|e| Error::io(gt_dir, e))?;
    for entry in entries {
        let p = entry.map_err(|e| Error::io(gt_dir, e))?.path();
        if p.extension().is_some_and(|x| x == "json") && p.is_file() {
            if let Some(s) = stem(&p) {
                out.insert(s, p);
            }
        }
    }
    Ok(out)
}

/// Scores `<pred_dir>/<stem>.json` detection files against the annotations
/// with the same stem. An image without a prediction file counts all its
/// tiles as misses; prediction files without an annotation are ignored.
pub fn evaluate_dataset(pred_dir: &Path, gt_dir: &Path, cfg: &MatchConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if !pred_dir.is_dir() {
        return Err(Error::io(
            pred_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "prediction directory not found"),
        ));
    }
    let gts = ground_truth_files(gt_dir)?;
    let per: Vec<(String, MatchResult, bool)> = gts
        .into_par_iter()
        .map(|(name, gt_path)| {
            let ann = AnnotationSet::load(&gt_path)?;
            let pred_path = pred_dir.join(format!("{name}.json"));
            let (preds, predicted) = if pred_path.is_file() {
                (DetectionSet::load(&pred_path)?.detections, true)
            } else {
                (Vec::new(), false)
            };
            let result = match_detections(&preds, &ann.tiles, cfg)?;
            Ok((name, result, predicted))
        })
        .collect::<Result<_>>()?;
    let total = compute_metrics(per.iter().map(|(_, r, _)| r));
    Ok(EvalReport {
        precision: total.precision,
        recall: total.recall,
        fscore: total.fscore,
        tp: total.tp,
        fp: total.fp,
        r#fn: total.r#fn,
        per_image: per
            .into_iter()
            .map(|(image, r, predicted)| ImageReport {
                image,
                metrics: Metrics::of(&r),
                predicted,
            })
            .collect(),
    })
}
