use tilesight_core::catalog::Catalog;
use tilesight_core::compose::{check_composition, feedback, ComposeTolerance, TemplateRegistry};
use tilesight_core::refdetect::{detect, DetectParams};
use tilesight_core::scenegen::{rasterize, sample_composition, CompositionJitter, SceneConfig};

#[test]
fn rendered_templates_verify_from_pixels() {
    let cat = Catalog::default();
    let reg = TemplateRegistry::builtin(&cat).unwrap();
    for id in reg.ids() {
        let template = reg.get(id).unwrap();
        for seed in 0..6 {
            let scene = sample_composition(
                &reg,
                &cat,
                id,
                &CompositionJitter::none(),
                seed,
                &SceneConfig::default(),
            )
            .unwrap();
            let img = rasterize(&scene, &cat).unwrap();
            let dets = detect(&img, &cat, &DetectParams::default()).unwrap();
            let r = check_composition(&dets, template, &cat, &ComposeTolerance::default()).unwrap();
            assert!(r.complete, "{id} seed {seed}: {:?}", feedback(&r));
            assert_eq!(feedback(&r), vec![format!("success: {id} complete")]);
        }
    }
}

#[test]
fn removing_a_tile_from_the_picture_reports_it() {
    let cat = Catalog::default();
    let reg = TemplateRegistry::builtin(&cat).unwrap();
    let mut scene = sample_composition(
        &reg,
        &cat,
        "mushroom",
        &CompositionJitter::none(),
        4,
        &SceneConfig::default(),
    )
    .unwrap();
    scene.tiles.pop();
    let img = rasterize(&scene, &cat).unwrap();
    let dets = detect(&img, &cat, &DetectParams::default()).unwrap();
    let r = check_composition(&dets, reg.get("mushroom").unwrap(), &cat, &ComposeTolerance::default()).unwrap();
    assert!(!r.complete);
    assert_eq!(r.missing.len(), 1);
    assert!(feedback(&r).iter().any(|f| f.starts_with("part missing: ")));
}
