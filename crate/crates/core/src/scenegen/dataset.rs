use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    annotate, derive_seed, rasterize, sample_composition, sample_scene, CompositionJitter, SceneConfig, SceneSpec,
};
use crate::catalog::Catalog;
use crate::compose::TemplateRegistry;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

/// Slight per-tile jitter for composition scenes in generated datasets.
const DATASET_COMPOSITION_JITTER: CompositionJitter = CompositionJitter {
    pos_sigma: 1.0,
    theta_sigma: 1.0,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationMode {
    Random,
    Compositions,
    Mixed,
}

impl FromStr for GenerationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(GenerationMode::Random),
            "compositions" => Ok(GenerationMode::Compositions),
            "mixed" => Ok(GenerationMode::Mixed),
            other => Err(Error::invalid(
                "mode",
                format!("'{other}' is not random|compositions|mixed"),
            )),
        }
    }
}

impl fmt::Display for GenerationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenerationMode::Random => "random",
            GenerationMode::Compositions => "compositions",
            GenerationMode::Mixed => "mixed",
        })
    }
}

/// Paths are relative to the dataset directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: String,
    pub annotation_path: String,
    pub scene_path: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub count: usize,
    pub entries: Vec<ManifestEntry>,
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    if manifest.count != manifest.entries.len() {
        return Err(Error::invalid("manifest.count", "does not match the number of entries"));
    }
    Ok(manifest)
}

fn scene_for(
    index: usize,
    seed: u64,
    mode: GenerationMode,
    config: &SceneConfig,
    catalog: &Catalog,
    registry: &TemplateRegistry,
) -> Result<SceneSpec> {
    let image_seed = derive_seed(seed, index as u64);
    let composition = match mode {
        GenerationMode::Random => false,
        GenerationMode::Compositions => true,
        GenerationMode::Mixed => ChaCha8Rng::seed_from_u64(image_seed).random_bool(0.5),
    };
    if !composition || registry.is_empty() {
        return sample_scene(image_seed, config, catalog);
    }
    let ids = registry.ids();
    let id = ids[(image_seed % ids.len() as u64) as usize];
    let scene = sample_composition(registry, catalog, id, &DATASET_COMPOSITION_JITTER, image_seed, config)?;
    let expected: usize = {
        let t = registry.get(id)?;
        let alts = &scene.composition.as_ref().expect("composition scene").alternatives;
        t.parts.iter().zip(alts).map(|(g, &a)| g.alternatives[a].len()).sum()
    };
    if scene.tiles.len() == expected {
        Ok(scene)
    } else {
        // a jittered tile could not be placed; the exact layout always fits
        sample_composition(registry, catalog, id, &CompositionJitter::none(), image_seed, config)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `n` rendered images with their annotation and scene files plus a
/// manifest. Each image is seeded from `(seed, index)` alone, so the output
/// does not depend on scheduling.
pub fn generate_dataset(
    n: usize,
    seed: u64,
    out_dir: &Path,
    mode: GenerationMode,
    config: &SceneConfig,
    catalog: &Catalog,
    registry: &TemplateRegistry,
) -> Result<DatasetManifest> {
    config.validate()?;
    for sub in ["images", "annotations", "scenes"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let results: Vec<Result<ManifestEntry>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let scene = scene_for(i, seed, mode, config, catalog, registry)?;
            let entry = ManifestEntry {
                image_path: format!("images/{i:06}.png"),
                annotation_path: format!("annotations/{i:06}.json"),
                scene_path: format!("scenes/{i:06}.json"),
            };
            let image = rasterize(&scene, catalog)?;
            let image_path = out_dir.join(&entry.image_path);
            image.save(&image_path)?;
            let mut ann = annotate(&scene, catalog)?;
            ann.image = entry.image_path.clone();
            write_json(&out_dir.join(&entry.annotation_path), &ann)?;
            write_json(&out_dir.join(&entry.scene_path), &scene)?;
            Ok(entry)
        })
        .collect();
    let mut entries = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => failures.push((i, e)),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Dataset(failures));
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        seed,
        count: entries.len(),
        entries,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
