use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SceneSpec;
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::geometry::{bin_of, canonical_theta, polygon_of, Aabb, OrientationBins, Polygon, ShapeClass, ARC_SEGMENTS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileAnnotation {
    pub spec_id: String,
    pub shape: ShapeClass,
    pub cx: f64,
    pub cy: f64,
    /// Orientation reduced modulo the tile's symmetry period.
    pub theta_deg: f64,
    pub orientation_bin: usize,
    pub aabb: Aabb,
    pub vertices: Polygon,
}

/// Per-image label file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub tiles: Vec<TileAnnotation>,
}

impl AnnotationSet {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// Exact labels for every tile, in image coordinates after global jitter.
pub fn annotate(scene: &SceneSpec, catalog: &Catalog) -> Result<AnnotationSet> {
    let bins = OrientationBins::default();
    let tiles = scene
        .tiles
        .iter()
        .zip(scene.placed_poses())
        .map(|(tile, pose)| {
            let spec = catalog.get(&tile.spec_id)?;
            let vertices = polygon_of(spec.shape, &pose, ARC_SEGMENTS)?;
            let theta = canonical_theta(pose.theta, spec.symmetry);
            Ok(TileAnnotation {
                spec_id: spec.id.clone(),
                shape: spec.shape,
                cx: pose.cx,
                cy: pose.cy,
                theta_deg: theta,
                orientation_bin: bin_of(theta, &bins),
                aabb: vertices.aabb(),
                vertices,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AnnotationSet {
        image: String::new(),
        width: scene.width(),
        height: scene.height(),
        tiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{OrientedBox, Point2, Similarity};
    use crate::scenegen::{sample_scene, SceneConfig, TilePose};

    #[test]
    fn single_tile_matches_pose() {
        let cat = Catalog::default();
        let mut scene = SceneSpec::empty(300, 300);
        let pose = OrientedBox::new(120.0, 140.0, 60.0, 60.0, 217.0).unwrap();
        scene.tiles.push(TilePose {
            spec_id: "red_triangle".into(),
            pose,
        });
        let ann = annotate(&scene, &cat).unwrap();
        let t = &ann.tiles[0];
        assert_eq!((t.cx, t.cy, t.theta_deg), (120.0, 140.0, 217.0));
        assert_eq!(t.orientation_bin, 29);
        assert_eq!(
            t.vertices,
            polygon_of(ShapeClass::RightTriangle, &pose, ARC_SEGMENTS).unwrap()
        );
    }

    #[test]
    fn jitter_rotation_shifts_thetas() {
        let cat = Catalog::default();
        let mut scene = sample_scene(3, &SceneConfig::default(), &cat).unwrap();
        scene.global_jitter = Similarity::identity();
        let base = annotate(&scene, &cat).unwrap();
        scene.global_jitter.rotation_deg = 10.0;
        let turned = annotate(&scene, &cat).unwrap();
        for ((a, b), tile) in base.tiles.iter().zip(&turned.tiles).zip(&scene.tiles) {
            let k = cat.get(&tile.spec_id).unwrap().symmetry;
            let expected = canonical_theta(tile.pose.theta + 10.0, k);
            assert!((b.theta_deg - expected).abs() < 1e-9);
            assert!((a.theta_deg - canonical_theta(tile.pose.theta, k)).abs() < 1e-9);
        }
    }

    #[test]
    fn vertices_are_jitter_equivariant() {
        let cat = Catalog::default();
        let scene = sample_scene(77, &SceneConfig::default(), &cat).unwrap();
        let ann = annotate(&scene, &cat).unwrap();
        for (a, tile) in ann.tiles.iter().zip(&scene.tiles) {
            let raw = polygon_of(a.shape, &tile.pose, ARC_SEGMENTS).unwrap();
            for (v, r) in a.vertices.vertices().iter().zip(raw.vertices()) {
                let moved: Point2 = scene.global_jitter.apply(*r);
                assert!(v.dist(moved) < 1e-9);
            }
        }
    }

    #[test]
    fn photometrics_do_not_move_labels() {
        let cat = Catalog::default();
        let clean = sample_scene(8, &SceneConfig::default(), &cat).unwrap();
        let mut noisy = clean.clone();
        noisy.photometrics.brightness_gain = 1.2;
        noisy.photometrics.gamma = 0.9;
        noisy.photometrics.noise_sigma = 7.0;
        assert_eq!(annotate(&clean, &cat).unwrap(), annotate(&noisy, &cat).unwrap());
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let cat = Catalog::default();
        let ann = annotate(&sample_scene(12, &SceneConfig::default(), &cat).unwrap(), &cat).unwrap();
        let text = serde_json::to_string(&ann).unwrap();
        let back: AnnotationSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ann);
    }
}
